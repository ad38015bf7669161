//! Modified-measure densities and measure-preservation residuals. A step
//! map phi preserves the measure mu(x)dx exactly when
//! det(phi'(x)) mu(phi(x)) = mu(x); the residual reported here is the
//! relative defect of that identity.
//!
//! The density families are the ones the integrators actually preserve:
//! unit volume, the trapezoidal factors det(I +- (h/2) f'(x)), their
//! reciprocals for Kahan's method, products across a foliation split, and
//! conjugated densities mu(P^{-1} x).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{FoliationMap, QuadraticFieldSpec, QuadraticMap, VectorField};
use crate::integrator::{kahan_rk_step, kahan_step, rk_step, KahanWeights};
use crate::jacobian::{kahan_det, kahan_rk_det, rk_det};
use crate::linalg::Matrix;
use crate::tableaux::ButcherTableau;

/// A density mu(x)dx, bound to the step size it was derived for. Mixing a
/// density with a step of a different h is a configuration error.
#[derive(Clone)]
pub enum DensitySpec {
    Unit {
        dim: usize,
    },
    TrapezoidalPlus {
        field: Arc<dyn VectorField>,
        h: f64,
    },
    TrapezoidalMinus {
        field: Arc<dyn VectorField>,
        h: f64,
    },
    KahanPlus {
        field: Arc<dyn VectorField>,
        h: f64,
    },
    KahanMinus {
        field: Arc<dyn VectorField>,
        h: f64,
    },
    /// rho(x-part) * nu(y-part), split at rho's dimension.
    Product {
        rho: Box<DensitySpec>,
        nu: Box<DensitySpec>,
    },
    /// mu(P^{-1} x) for a conjugated system.
    Conjugated {
        inner: Box<DensitySpec>,
        p_inv: Matrix,
    },
}

impl DensitySpec {
    pub fn unit(dim: usize) -> Self {
        DensitySpec::Unit { dim }
    }

    pub fn trapezoidal_plus(field: Arc<dyn VectorField>, h: f64) -> Self {
        DensitySpec::TrapezoidalPlus { field, h }
    }

    pub fn trapezoidal_minus(field: Arc<dyn VectorField>, h: f64) -> Self {
        DensitySpec::TrapezoidalMinus { field, h }
    }

    pub fn kahan_plus(field: Arc<dyn VectorField>, h: f64) -> Self {
        DensitySpec::KahanPlus { field, h }
    }

    pub fn kahan_minus(field: Arc<dyn VectorField>, h: f64) -> Self {
        DensitySpec::KahanMinus { field, h }
    }

    pub fn product(rho: DensitySpec, nu: DensitySpec) -> Self {
        DensitySpec::Product {
            rho: Box::new(rho),
            nu: Box::new(nu),
        }
    }

    pub fn conjugated(inner: DensitySpec, p: &Matrix) -> Result<Self> {
        let p_inv = p.inverse().map_err(|_| Error::SingularP)?;
        Ok(DensitySpec::Conjugated {
            inner: Box::new(inner),
            p_inv,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Unit { dim } => *dim,
            DensitySpec::TrapezoidalPlus { field, .. }
            | DensitySpec::TrapezoidalMinus { field, .. }
            | DensitySpec::KahanPlus { field, .. }
            | DensitySpec::KahanMinus { field, .. } => field.dim(),
            DensitySpec::Product { rho, nu } => rho.dim() + nu.dim(),
            DensitySpec::Conjugated { inner, .. } => inner.dim(),
        }
    }

    /// Verify every h-bound leaf matches the step size in use.
    pub fn check_step_size(&self, step_h: f64) -> Result<()> {
        match self {
            DensitySpec::Unit { .. } => Ok(()),
            DensitySpec::TrapezoidalPlus { h, .. }
            | DensitySpec::TrapezoidalMinus { h, .. }
            | DensitySpec::KahanPlus { h, .. }
            | DensitySpec::KahanMinus { h, .. } => {
                if *h == step_h {
                    Ok(())
                } else {
                    Err(Error::BadConfig(format!(
                        "density is bound to h = {h} but the step uses h = {step_h}"
                    )))
                }
            }
            DensitySpec::Product { rho, nu } => {
                rho.check_step_size(step_h)?;
                nu.check_step_size(step_h)
            }
            DensitySpec::Conjugated { inner, .. } => inner.check_step_size(step_h),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let value = match self {
            DensitySpec::Unit { .. } => 1.0,
            DensitySpec::TrapezoidalPlus { field, h } => {
                Matrix::identity_plus(0.5 * h, &field.jacobian(x)).det()
            }
            DensitySpec::TrapezoidalMinus { field, h } => {
                Matrix::identity_plus(-0.5 * h, &field.jacobian(x)).det()
            }
            DensitySpec::KahanPlus { field, h } => {
                let det = Matrix::identity_plus(0.5 * h, &field.jacobian(x)).det();
                if det <= 0.0 {
                    return Err(Error::NonpositiveDensity { value: det });
                }
                1.0 / det
            }
            DensitySpec::KahanMinus { field, h } => {
                let det = Matrix::identity_plus(-0.5 * h, &field.jacobian(x)).det();
                if det <= 0.0 {
                    return Err(Error::NonpositiveDensity { value: det });
                }
                1.0 / det
            }
            DensitySpec::Product { rho, nu } => {
                let split = rho.dim();
                rho.eval(&x[..split])? * nu.eval(&x[split..])?
            }
            DensitySpec::Conjugated { inner, p_inv } => inner.eval(&p_inv.matvec(x))?,
        };
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonpositiveDensity { value });
        }
        Ok(value)
    }
}

/// Evaluate the density at a point.
pub fn density_eval(density: &DensitySpec, x: &[f64]) -> Result<f64> {
    density.eval(x)
}

/// Relative measure residual |jac_det * mu(phi(x)) - mu(x)| / mu(x) of one
/// step, where `jac_det` is the step-map Jacobian determinant at `x` and
/// `step` produces phi(x). `h` is checked against the density binding.
pub fn measure_residual<F>(
    step: F,
    density: &DensitySpec,
    x: &[f64],
    jac_det: f64,
    h: f64,
) -> Result<f64>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    density.check_step_size(h)?;
    let phi = step(x)?;
    let mu_x = density.eval(x)?;
    let mu_phi = density.eval(&phi)?;
    Ok((jac_det * mu_phi - mu_x).abs() / mu_x)
}

/// Borrowed assembly of a foliate field, for stepping the combined system.
struct Assembled<'a> {
    u: &'a dyn VectorField,
    v: &'a dyn FoliationMap,
}

impl VectorField for Assembled<'_> {
    fn dim(&self) -> usize {
        self.u.dim() + self.v.y_dim()
    }

    fn eval(&self, z: &[f64]) -> Vec<f64> {
        let (x, y) = z.split_at(self.u.dim());
        let mut out = self.u.eval(x);
        out.extend(self.v.eval(x, y));
        out
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let m = self.u.dim();
        let n = self.v.y_dim();
        let (x, y) = z.split_at(m);
        let mut jac = Matrix::zeros(m + n, m + n);
        jac.set_block(0, 0, &self.u.jacobian(x));
        jac.set_block(m, 0, &self.v.jac_x(x, y));
        jac.set_block(m, m, &self.v.jac_y(x, y));
        jac
    }
}

/// Max product-measure residual of a one-stage method over the assembled
/// foliate system f(x, y) = (u(x), v(x, y)). The caller asserts that the
/// method preserves rho on the x-system and nu on each frozen y-system;
/// this checks that the product rho(x)nu(y) then survives assembly.
pub fn product_measure_check(
    u: &dyn VectorField,
    rho: &DensitySpec,
    v: &dyn FoliationMap,
    nu: &DensitySpec,
    tableau: &ButcherTableau,
    h: f64,
    samples: &[Vec<f64>],
) -> Result<f64> {
    if tableau.stages() != 1 {
        return Err(Error::BadParams(
            "product measures factor only through one-stage methods".into(),
        ));
    }
    if rho.dim() != u.dim() || nu.dim() != v.y_dim() {
        return Err(Error::BadParams(
            "density dimensions do not match the foliation split".into(),
        ));
    }
    let field = Assembled { u, v };
    let product = DensitySpec::product(rho.clone(), nu.clone());
    let mut worst: f64 = 0.0;
    for z in samples {
        let step = rk_step(&field, tableau, h, z)?;
        let lin = step.stage_lin.as_ref().expect("rk steps carry stages");
        let det = rk_det(&field, tableau, lin)?.det_phi;
        let residual = measure_residual(
            |p| rk_step(&field, tableau, h, p).map(|r| r.x_next),
            &product,
            z,
            det,
            h,
        )?;
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Max Kahan-step residual of the reciprocal density
/// det(I + (h/2) f'(x, y))^{-1} on the assembled quadratic field
/// f(x, y) = (u(x), v(y) + w(x)). Both diagonal blocks must satisfy the
/// determinant condition for the density to be preserved; `w` only needs to
/// keep the field quadratic.
pub fn kahan_foliation_check(
    u: &QuadraticFieldSpec,
    v: &QuadraticFieldSpec,
    w: &QuadraticMap,
    h: f64,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let assembled = crate::fields::foliate_quadratic(u, v, w)?;
    let density = DensitySpec::kahan_plus(Arc::new(assembled.clone()), h);
    let mut worst: f64 = 0.0;
    for z in samples {
        let step = kahan_step(&assembled, h, z)?;
        let det = kahan_det(&assembled, h, z, &step.x_next)?;
        let residual = measure_residual(
            |p| kahan_step(&assembled, h, p).map(|r| r.x_next),
            &density,
            z,
            det,
            h,
        )?;
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Residual of the reciprocal density under the Runge-Kutta form of the
/// Kahan map on an arbitrary smooth field. Exact Jacobian determinants come
/// from the forward/backward stage sums, so this works on the foliate
/// counterexamples that are only quadratic in part of the state.
pub fn kahan_rk_measure_residual(
    field: Arc<dyn VectorField>,
    weights: &KahanWeights,
    h: f64,
    x: &[f64],
) -> Result<f64> {
    let density = DensitySpec::kahan_plus(field.clone(), h);
    let step = kahan_rk_step(field.as_ref(), weights, h, x)?;
    let det = kahan_rk_det(field.as_ref(), weights, h, x, &step.x_next)?;
    measure_residual(
        |p| kahan_rk_step(field.as_ref(), weights, h, p).map(|r| r.x_next),
        &density,
        x,
        det,
        h,
    )
}
