//! Foliation assembly: fields of the form f(x, y) = (u(x), v(x, y)) whose
//! Jacobian is block lower-triangular, optionally conjugated by a linear
//! change of variables.

use super::{ConjugatedField, Smoothness, VectorField};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Smooth map between Euclidean spaces with an analytic Jacobian.
pub trait SmoothMap: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, x: &[f64]) -> Matrix;
}

/// Closure-backed [`SmoothMap`].
pub struct FnMap {
    in_dim: usize,
    out_dim: usize,
    f: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    jac: Box<dyn Fn(&[f64]) -> Matrix + Send + Sync>,
}

impl FnMap {
    pub fn new<F, J>(in_dim: usize, out_dim: usize, f: F, jac: J) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    {
        FnMap {
            in_dim,
            out_dim,
            f: Box::new(f),
            jac: Box::new(jac),
        }
    }
}

impl SmoothMap for FnMap {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        (self.jac)(x)
    }
}

/// The coupled component v(x, y) of a foliate field, with both partial
/// Jacobians.
pub trait FoliationMap: Send + Sync {
    fn x_dim(&self) -> usize;
    fn y_dim(&self) -> usize;
    fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    /// d v / d x, shape y_dim x x_dim.
    fn jac_x(&self, x: &[f64], y: &[f64]) -> Matrix;
    /// d v / d y, shape y_dim x y_dim.
    fn jac_y(&self, x: &[f64], y: &[f64]) -> Matrix;
}

/// Closure-backed [`FoliationMap`].
pub struct FnFoliation {
    x_dim: usize,
    y_dim: usize,
    f: Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    jx: Box<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>,
    jy: Box<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>,
}

impl FnFoliation {
    pub fn new<F, Jx, Jy>(x_dim: usize, y_dim: usize, f: F, jx: Jx, jy: Jy) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        Jx: Fn(&[f64], &[f64]) -> Matrix + Send + Sync + 'static,
        Jy: Fn(&[f64], &[f64]) -> Matrix + Send + Sync + 'static,
    {
        FnFoliation {
            x_dim,
            y_dim,
            f: Box::new(f),
            jx: Box::new(jx),
            jy: Box::new(jy),
        }
    }
}

impl FoliationMap for FnFoliation {
    fn x_dim(&self) -> usize {
        self.x_dim
    }

    fn y_dim(&self) -> usize {
        self.y_dim
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (self.f)(x, y)
    }

    fn jac_x(&self, x: &[f64], y: &[f64]) -> Matrix {
        (self.jx)(x, y)
    }

    fn jac_y(&self, x: &[f64], y: &[f64]) -> Matrix {
        (self.jy)(x, y)
    }
}

/// Sum-form coupling v(x, y) = w(x) + v~(y); the case where multi-stage
/// factorizations apply.
pub struct SumFoliation {
    pub w: Box<dyn SmoothMap>,
    pub v: Box<dyn VectorField>,
}

impl SumFoliation {
    pub fn new(w: Box<dyn SmoothMap>, v: Box<dyn VectorField>) -> Result<Self> {
        if w.out_dim() != v.dim() {
            return Err(Error::BadParams(format!(
                "w maps into R^{} but the y-field lives on R^{}",
                w.out_dim(),
                v.dim()
            )));
        }
        Ok(SumFoliation { w, v })
    }
}

impl FoliationMap for SumFoliation {
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

/// Assembled foliate field g(x, y) = (u(x), v(x, y)).
pub struct FoliateField {
    u: Box<dyn VectorField>,
    v: Box<dyn FoliationMap>,
}

impl FoliateField {
    pub fn new(u: Box<dyn VectorField>, v: Box<dyn FoliationMap>) -> Result<Self> {
        if u.dim() != v.x_dim() {
            return Err(Error::BadParams(format!(
                "u lives on R^{} but v expects x in R^{}",
                u.dim(),
                v.x_dim()
            )));
        }
        Ok(FoliateField { u, v })
    }
}

impl VectorField for FoliateField {
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

/// A foliate field together with an optional linear change of variables.
pub struct FoliationSpec {
    pub u: Box<dyn VectorField>,
    pub v: Box<dyn FoliationMap>,
    pub p: Option<Matrix>,
}

/// Assemble f(x, y) = (u(x), v(x, y)), conjugated by P when given:
/// the result is z -> P f(P^{-1} z).
pub fn foliate(spec: FoliationSpec) -> Result<Box<dyn VectorField>> {
    let base = FoliateField::new(spec.u, spec.v)?;
    match spec.p {
        None => Ok(Box::new(base)),
        Some(p) => Ok(Box::new(ConjugatedField::new(Box::new(base), p)?)),
    }
}
