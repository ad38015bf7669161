//! Exact per-step Jacobians and determinants of Runge-Kutta maps, the
//! corresponding Kahan-map determinants, finite-difference oracles, and the
//! foliation factorization checks.
//!
//! The RK map Jacobian comes from differentiating the stage equations:
//!
//!   phi_h'(x) = I + h (b^T (x) I) F (I_s (x) I - h (A (x) I) F)^{-1} (1 (x) I)
//!
//! with F = diag(f'(k_1), ..., f'(k_s)), and its determinant collapses to
//! the quotient
//!
//!   det(I_s (x) I - h ((A - 1 b^T) (x) I) F) / det(I_s (x) I - h (A (x) I) F).

use crate::error::{Error, Result};
use crate::fields::{FoliationMap, SmoothMap, Smoothness, VectorField};
use crate::integrator::{self, rk_step, KahanWeights, StageLinearization};
use crate::linalg::Matrix;
use crate::tableaux::ButcherTableau;

/// Per-step volume data: the determinant quotient, its two factors, and the
/// optional finite-difference oracle value.
#[derive(Debug, Clone)]
pub struct VolumeReport {
    pub det_phi: f64,
    pub det_numerator: f64,
    pub det_denominator: f64,
    pub fd_det: Option<f64>,
    pub abs_dev_from_one: f64,
}

fn require_converged(lin: &StageLinearization) -> Result<()> {
    if !lin.converged {
        return Err(Error::BadParams(
            "stage linearization is not converged; volume data would be meaningless".into(),
        ));
    }
    Ok(())
}

/// The exact Jacobian of the RK step map at the converged stages: one
/// sn x sn solve against the stacked identity, then the b-weighted
/// recombination.
pub fn rk_jacobian(
    field: &dyn VectorField,
    tableau: &ButcherTableau,
    lin: &StageLinearization,
) -> Result<Matrix> {
    require_converged(lin)?;
    let n = field.dim();
    let s = tableau.stages();
    let w = integrator::stage_system_matrix(tableau.a(), lin.h, &lin.stage_jacobians);

    let mut rhs = Matrix::zeros(s * n, n);
    for i in 0..s {
        rhs.set_block(i * n, 0, &Matrix::identity(n));
    }
    let k_derivs = w.solve(&rhs).map_err(|_| Error::SingularStageMatrix)?;

    let mut phi = Matrix::identity(n);
    for i in 0..s {
        let xi = k_derivs.block(i * n, 0, n, n);
        let term = lin.stage_jacobians[i].mul(&xi).scaled(lin.h * tableau.b()[i]);
        phi = phi.add(&term);
    }
    Ok(phi)
}

/// Determinant of the RK step map via the stage-matrix quotient,
/// cross-checked against det of [`rk_jacobian`] at relative 1e-10.
pub fn rk_det(
    field: &dyn VectorField,
    tableau: &ButcherTableau,
    lin: &StageLinearization,
) -> Result<VolumeReport> {
    require_converged(lin)?;
    let s = tableau.stages();

    // A - 1 b^T
    let mut shifted = tableau.a().clone();
    for i in 0..s {
        for j in 0..s {
            shifted[(i, j)] -= tableau.b()[j];
        }
    }
    let num = integrator::stage_system_matrix(&shifted, lin.h, &lin.stage_jacobians).det();
    let den = integrator::stage_system_matrix(tableau.a(), lin.h, &lin.stage_jacobians).det();
    if den == 0.0 {
        return Err(Error::SingularStageMatrix);
    }
    let det_phi = num / den;

    let direct = rk_jacobian(field, tableau, lin)?.det();
    let dev = (direct - det_phi).abs() / det_phi.abs().max(1.0);
    if dev > 1e-10 {
        return Err(Error::Inconsistency {
            context: "det(rk_jacobian) vs stage-matrix quotient",
            value: dev,
        });
    }

    Ok(VolumeReport {
        det_phi,
        det_numerator: num,
        det_denominator: den,
        fd_det: None,
        abs_dev_from_one: (det_phi - 1.0).abs(),
    })
}

/// [`rk_det`] plus the central finite-difference oracle on the step map,
/// verified to agree within mixed absolute/relative 1e-5.
pub fn rk_det_with_oracle(
    field: &dyn VectorField,
    tableau: &ButcherTableau,
    lin: &StageLinearization,
    x: &[f64],
) -> Result<VolumeReport> {
    let mut report = rk_det(field, tableau, lin)?;
    let h = lin.h;
    let fd = fd_step_det(
        |p| rk_step(field, tableau, h, p).map(|r| r.x_next),
        x,
        field.dim(),
    )?;
    let dev = (report.det_phi - fd).abs();
    if dev > 1e-5 * (1.0 + report.det_phi.abs()) {
        return Err(Error::Inconsistency {
            context: "finite-difference determinant oracle",
            value: dev,
        });
    }
    report.fd_det = Some(fd);
    Ok(report)
}

/// Determinant of the Kahan step map for a quadratic field:
/// det(I + (h/2) f'(x')) / det(I - (h/2) f'(x)).
pub fn kahan_det(
    spec: &crate::fields::QuadraticFieldSpec,
    h: f64,
    x: &[f64],
    x_next: &[f64],
) -> Result<f64> {
    let num = Matrix::identity_plus(0.5 * h, &spec.jacobian(x_next)).det();
    let den = Matrix::identity_plus(-0.5 * h, &spec.jacobian(x)).det();
    if den == 0.0 {
        return Err(Error::SingularDenominator);
    }
    Ok(num / den)
}

/// Determinant of the Runge-Kutta form of the Kahan map, valid for any
/// smooth field:
/// det(I + h sum b_i (1 - c_i) f'(k_i)) / det(I - h sum b_i c_i f'(k_i))
/// with k_i = x + c_i (x' - x). For quadratic fields the moment conditions
/// collapse this to [`kahan_det`].
pub fn kahan_rk_det(
    field: &dyn VectorField,
    weights: &KahanWeights,
    h: f64,
    x: &[f64],
    x_next: &[f64],
) -> Result<f64> {
    let n = field.dim();
    let mut fwd = Matrix::zeros(n, n);
    let mut bwd = Matrix::zeros(n, n);
    for (bi, ci) in weights.b.iter().zip(&weights.c) {
        let stage: Vec<f64> = (0..n).map(|d| x[d] + ci * (x_next[d] - x[d])).collect();
        let jac = field.jacobian(&stage);
        fwd = fwd.add(&jac.scaled(bi * (1.0 - ci)));
        bwd = bwd.add(&jac.scaled(bi * ci));
    }
    let num = Matrix::identity_plus(h, &fwd).det();
    let den = Matrix::identity_plus(-h, &bwd).det();
    if den == 0.0 {
        return Err(Error::SingularDenominator);
    }
    Ok(num / den)
}

/// Central finite differences of an arbitrary step map, column step
/// 1e-6 * (1 + |x_j|). Step failures propagate.
pub fn fd_step_jacobian<F>(step: F, x: &[f64], n: usize) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = Matrix::zeros(n, x.len());
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..x.len() {
        let delta = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + delta;
        xm[j] = x[j] - delta;
        let fp = step(&xp)?;
        let fm = step(&xm)?;
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * delta);
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    Ok(jac)
}

/// Determinant of the finite-difference step Jacobian.
pub fn fd_step_det<F>(step: F, x: &[f64], n: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    Ok(fd_step_jacobian(step, x, n)?.det())
}

// ---------------------------------------------------------------------------
// Foliation factorization
// ---------------------------------------------------------------------------

/// Borrowed assembly of f(x, y) = (u(x), v(x, y)); avoids cloning the parts
/// the factor check also needs individually.
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

    fn smoothness(&self) -> Smoothness {
        self.u.smoothness()
    }
}

/// y-system of a foliation with x frozen at a stage value.
struct FrozenX<'a> {
    v: &'a dyn FoliationMap,
    x: Vec<f64>,
}

impl VectorField for FrozenX<'_> {
    fn dim(&self) -> usize {
        self.v.y_dim()
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.v.eval(&self.x, y)
    }

    fn jacobian(&self, y: &[f64]) -> Matrix {
        self.v.jac_y(&self.x, y)
    }
}

/// y-system ydot = shift + v(y) with a constant shift.
struct Shifted<'a> {
    base: &'a dyn VectorField,
    shift: Vec<f64>,
}

impl VectorField for Shifted<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.base.eval(y);
        for (o, s) in out.iter_mut().zip(&self.shift) {
            *o += s;
        }
        out
    }

    fn jacobian(&self, y: &[f64]) -> Matrix {
        self.base.jacobian(y)
    }
}

/// Sum-form coupling borrowed from its parts.
struct SumAdapter<'a> {
    w: &'a dyn SmoothMap,
    v: &'a dyn VectorField,
}

impl FoliationMap for SumAdapter<'_> {
    fn x_dim(&self) -> usize {
        self.w.in_dim()
    }

    fn y_dim(&self) -> usize {
        self.v.dim()
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = self.w.eval(x);
        let vy = self.v.eval(y);
        for (o, v) in out.iter_mut().zip(&vy) {
            *o += v;
        }
        out
    }

    fn jac_x(&self, x: &[f64], _y: &[f64]) -> Matrix {
        self.w.jacobian(x)
    }

    fn jac_y(&self, _x: &[f64], y: &[f64]) -> Matrix {
        self.v.jacobian(y)
    }
}

/// The coupling component handed to [`foliation_factor_check`].
pub enum FoliationKind<'a> {
    /// General v(x, y); only one-stage methods factor this.
    General(&'a dyn FoliationMap),
    /// v(x, y) = w(x) + v~(y); methods satisfying the delta condition factor
    /// this for any stage count.
    Sum {
        w: &'a dyn SmoothMap,
        v: &'a dyn VectorField,
    },
}

/// Both sides of the foliation determinant factorization, plus the shift
/// data (d_h, e_h, c_h) in the sum-form case.
#[derive(Debug, Clone)]
pub struct FoliationFactors {
    /// det of the full step map, from the stage-matrix quotient.
    pub lhs: f64,
    /// det(psi_h'(x)) * det(d_y chi_h(..)).
    pub rhs: f64,
    pub psi_det: f64,
    pub chi_det: f64,
    pub d_h: Option<Vec<f64>>,
    pub e_h: Option<Vec<f64>>,
    pub c_h: Option<Vec<f64>>,
}

/// Evaluate both sides of the factorization
/// det(phi_h'(x, y)) = det(psi_h'(x)) det(d_y chi_h(..)) for a foliate
/// field. One-stage methods factor any coupling through the frozen stage
/// value; multi-stage methods need the sum form and the delta condition.
pub fn foliation_factor_check(
    u: &dyn VectorField,
    kind: &FoliationKind<'_>,
    tableau: &ButcherTableau,
    h: f64,
    x: &[f64],
    y: &[f64],
) -> Result<FoliationFactors> {
    let s = tableau.stages();
    match kind {
        FoliationKind::General(v) => {
            if s != 1 {
                return Err(Error::BadParams(
                    "general couplings factor only through one-stage methods; use the sum form"
                        .into(),
                ));
            }
            let psi = rk_step(u, tableau, h, x)?;
            let psi_lin = psi.stage_lin.as_ref().expect("rk steps carry stages");
            let psi_det = rk_det(u, tableau, psi_lin)?.det_phi;

            let frozen = FrozenX {
                v: *v,
                x: psi_lin.stages[0].clone(),
            };
            let chi = rk_step(&frozen, tableau, h, y)?;
            let chi_det = rk_det(&frozen, tableau, chi.stage_lin.as_ref().unwrap())?.det_phi;

            let lhs = full_det(u, *v, tableau, h, x, y)?;
            Ok(FoliationFactors {
                lhs,
                rhs: psi_det * chi_det,
                psi_det,
                chi_det,
                d_h: None,
                e_h: None,
                c_h: None,
            })
        }
        FoliationKind::Sum { w, v } => {
            let adapter = SumAdapter { w: *w, v: *v };
            if s == 1 {
                return foliation_factor_check(u, &FoliationKind::General(&adapter), tableau, h, x, y);
            }
            let delta = tableau.delta_condition();
            if !delta.satisfied {
                return Err(Error::DeltaConditionViolated);
            }
            let delta = delta.delta.expect("satisfied implies a delta vector");

            let psi = rk_step(u, tableau, h, x)?;
            let psi_lin = psi.stage_lin.as_ref().expect("rk steps carry stages");
            let psi_det = rk_det(u, tableau, psi_lin)?.det_phi;

            let n = v.dim();
            let wk: Vec<Vec<f64>> = psi_lin.stages.iter().map(|k| w.eval(k)).collect();
            // d = sum_j delta_j w(k_j); e = sum_j a_1j (w(k_j) - d);
            // c = sum_i b_i (w(k_i) - d) - e.
            let mut d = vec![0.0; n];
            for (dj, wkj) in delta.iter().zip(&wk) {
                for i in 0..n {
                    d[i] += dj * wkj[i];
                }
            }
            let mut e = vec![0.0; n];
            for j in 0..s {
                for i in 0..n {
                    e[i] += tableau.a()[(0, j)] * (wk[j][i] - d[i]);
                }
            }
            let mut c = vec![0.0; n];
            for j in 0..s {
                for i in 0..n {
                    c[i] += tableau.b()[j] * (wk[j][i] - d[i]);
                }
            }
            for i in 0..n {
                c[i] -= e[i];
            }

            let shifted = Shifted {
                base: *v,
                shift: d.clone(),
            };
            let y_base: Vec<f64> = y.iter().zip(&e).map(|(yi, ei)| yi + h * ei).collect();
            let chi = rk_step(&shifted, tableau, h, &y_base)?;
            let chi_det = rk_det(&shifted, tableau, chi.stage_lin.as_ref().unwrap())?.det_phi;

            let lhs = full_det(u, &adapter, tableau, h, x, y)?;
            Ok(FoliationFactors {
                lhs,
                rhs: psi_det * chi_det,
                psi_det,
                chi_det,
                d_h: Some(d),
                e_h: Some(e),
                c_h: Some(c),
            })
        }
    }
}

fn full_det(
    u: &dyn VectorField,
    v: &dyn FoliationMap,
    tableau: &ButcherTableau,
    h: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let field = Assembled { u, v };
    let z: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    let step = rk_step(&field, tableau, h, &z)?;
    Ok(rk_det(&field, tableau, step.stage_lin.as_ref().unwrap())?.det_phi)
}
