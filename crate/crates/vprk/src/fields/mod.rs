//! Vector fields: the field abstraction (value plus analytic Jacobian), the
//! builtin catalog, and combinators (linear conjugation, foliation assembly).
//!
//! Builtins carry analytic Jacobians; a central-difference fallback exists
//! only for user-supplied closures and is flagged via
//! [`VectorField::jacobian_is_exact`].

mod foliation;
mod quadratic;

pub use foliation::{foliate, FnFoliation, FnMap, FoliationMap, FoliationSpec, SmoothMap, SumFoliation};
pub use quadratic::{polarize, foliate_quadratic, QuadraticFieldSpec, QuadraticMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Differentiability tag. `C1` marks fields whose Jacobian is continuous but
/// not smooth (piecewise definitions glued along a seam).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Smooth,
    C1,
}

/// An autonomous vector field f on R^n with analytic Jacobian f'.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, x: &[f64]) -> Matrix;

    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }

    /// False when the Jacobian falls back to finite differences.
    fn jacobian_is_exact(&self) -> bool {
        true
    }
}

/// Central-difference Jacobian of a plain map, column step 1e-6 * (1 + |x_j|).
pub fn fd_jacobian<F>(f: F, x: &[f64], out_dim: usize) -> Matrix
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut jac = Matrix::zeros(out_dim, n);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..n {
        let step = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        xm[j] = x[j] - step;
        let fp = f(&xp);
        let fm = f(&xm);
        for i in 0..out_dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    jac
}

/// Closure-backed field for user code and tests. Without an analytic
/// Jacobian it falls back to central differences and reports itself as
/// inexact.
pub struct FnField {
    dim: usize,
    f: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    jac: Option<Box<dyn Fn(&[f64]) -> Matrix + Send + Sync>>,
    smoothness: Smoothness,
}

impl FnField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        FnField {
            dim,
            f: Box::new(f),
            jac: None,
            smoothness: Smoothness::Smooth,
        }
    }

    pub fn with_jacobian<F, J>(dim: usize, f: F, jac: J) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    {
        FnField {
            dim,
            f: Box::new(f),
            jac: Some(Box::new(jac)),
            smoothness: Smoothness::Smooth,
        }
    }
}

impl VectorField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        match &self.jac {
            Some(j) => j(x),
            None => fd_jacobian(|p| (self.f)(p), x, self.dim),
        }
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn jacobian_is_exact(&self) -> bool {
        self.jac.is_some()
    }
}

/// Affine field f(x) = Lx + d.
#[derive(Debug, Clone)]
pub struct LinearField {
    l: Matrix,
    d: Vec<f64>,
}

impl LinearField {
    pub fn new(l: Matrix, d: Vec<f64>) -> Result<Self> {
        if !l.is_square() || l.rows() != d.len() {
            return Err(Error::BadParams(format!(
                "linear field needs square L matching d: L is {}x{}, d has length {}",
                l.rows(),
                l.cols(),
                d.len()
            )));
        }
        Ok(LinearField { l, d })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.l
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.l.matvec(x);
        for (o, d) in out.iter_mut().zip(&self.d) {
            *o += d;
        }
        out
    }

    fn jacobian(&self, _x: &[f64]) -> Matrix {
        self.l.clone()
    }
}

/// f(x) = J^{-1} (S x + d) with J skew invertible and S symmetric: the
/// gradient field of the quadratic form H(x) = x^T S x / 2 + d^T x rotated
/// by J^{-1}. Its Jacobian is similar to minus its transpose via P = J.
pub struct QuadHamiltonianField {
    j: Matrix,
    lin: LinearField,
}

impl QuadHamiltonianField {
    pub fn new(j: Matrix, s: Matrix, d: Vec<f64>) -> Result<Self> {
        let n = d.len();
        if !j.is_square() || j.rows() != n || !s.is_square() || s.rows() != n {
            return Err(Error::BadParams(
                "quad_hamiltonian needs square J and S matching d".into(),
            ));
        }
        let skew_defect = j.add(&j.transpose()).max_abs();
        if skew_defect > 1e-12 {
            return Err(Error::BadParams(format!(
                "J must be skew-symmetric (defect {skew_defect:.3e})"
            )));
        }
        let sym_defect = s.sub(&s.transpose()).max_abs();
        if sym_defect > 1e-12 {
            return Err(Error::BadParams(format!(
                "S must be symmetric (defect {sym_defect:.3e})"
            )));
        }
        let j_inv = j
            .inverse()
            .map_err(|_| Error::BadParams("J must be invertible".into()))?;
        let lin = LinearField::new(j_inv.mul(&s), j_inv.matvec(&d))?;
        Ok(QuadHamiltonianField { j, lin })
    }

    /// The structure matrix J; a valid similarity candidate P for the
    /// minus-transpose check.
    pub fn structure_matrix(&self) -> &Matrix {
        &self.j
    }

    /// View as a quadratic field (zero homogeneous part) for Kahan stepping.
    pub fn to_quadratic(&self) -> QuadraticFieldSpec {
        QuadraticFieldSpec::linear(self.lin.matrix().clone(), self.lin.d.clone())
            .expect("shapes validated at construction")
    }
}

impl VectorField for QuadHamiltonianField {
    fn dim(&self) -> usize {
        self.lin.dim()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.lin.eval(x)
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        self.lin.jacobian(x)
    }
}

/// Separable field f(x, y) = (u(y), v(x)) for u: R^n -> R^m, v: R^m -> R^n.
/// Its Jacobian anticommutes with diag(I_m, -I_n).
pub struct HlwSeparableField {
    u: Box<dyn SmoothMap>,
    v: Box<dyn SmoothMap>,
}

impl HlwSeparableField {
    pub fn new(u: Box<dyn SmoothMap>, v: Box<dyn SmoothMap>) -> Result<Self> {
        if u.in_dim() != v.out_dim() || u.out_dim() != v.in_dim() {
            return Err(Error::BadParams(
                "hlw_separable needs u: R^n -> R^m and v: R^m -> R^n".into(),
            ));
        }
        Ok(HlwSeparableField { u, v })
    }

    pub fn x_dim(&self) -> usize {
        self.u.out_dim()
    }

    pub fn y_dim(&self) -> usize {
        self.v.out_dim()
    }
}

impl VectorField for HlwSeparableField {
    fn dim(&self) -> usize {
        self.x_dim() + self.y_dim()
    }

    fn eval(&self, z: &[f64]) -> Vec<f64> {
        let m = self.x_dim();
        let mut out = self.u.eval(&z[m..]);
        out.extend(self.v.eval(&z[..m]));
        out
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let m = self.x_dim();
        let n = self.y_dim();
        let mut jac = Matrix::zeros(m + n, m + n);
        jac.set_block(0, m, &self.u.jacobian(&z[m..]));
        jac.set_block(m, 0, &self.v.jacobian(&z[..m]));
        jac
    }
}

/// Conjugated field f~(z) = P f(P^{-1} z).
pub struct ConjugatedField {
    inner: Box<dyn VectorField>,
    p: Matrix,
    p_inv: Matrix,
}

impl ConjugatedField {
    pub fn new(inner: Box<dyn VectorField>, p: Matrix) -> Result<Self> {
        if !p.is_square() || p.rows() != inner.dim() {
            return Err(Error::BadParams("P must be square of the field dimension".into()));
        }
        let p_inv = p.inverse().map_err(|_| Error::SingularP)?;
        Ok(ConjugatedField { inner, p, p_inv })
    }
}

impl VectorField for ConjugatedField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, z: &[f64]) -> Vec<f64> {
        let w = self.p_inv.matvec(z);
        self.p.matvec(&self.inner.eval(&w))
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let w = self.p_inv.matvec(z);
        self.p.mul(&self.inner.jacobian(&w)).mul(&self.p_inv)
    }

    fn smoothness(&self) -> Smoothness {
        self.inner.smoothness()
    }

    fn jacobian_is_exact(&self) -> bool {
        self.inner.jacobian_is_exact()
    }
}

// ---------------------------------------------------------------------------
// Worked example fields
// ---------------------------------------------------------------------------

/// xdot = sin z, ydot = cos z, zdot = sin y + cos x. Separable (HLW) in the
/// ((x,y), z) split, hence anticommutes with diag(1, 1, -1).
pub struct Example1Field;

impl VectorField for Example1Field {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, p: &[f64]) -> Vec<f64> {
        let (x, y, z) = (p[0], p[1], p[2]);
        vec![z.sin(), z.cos(), y.sin() + x.cos()]
    }

    fn jacobian(&self, p: &[f64]) -> Matrix {
        let (x, y, z) = (p[0], p[1], p[2]);
        Matrix::from_rows(&[
            &[0.0, 0.0, z.cos()],
            &[0.0, 0.0, -z.sin()],
            &[-x.sin(), y.cos(), 0.0],
        ])
    }
}

/// Piecewise C^1 field: (x^3/3 - c, -x^2 y, 0) for x >= 0 and
/// (x^3/3 - c, 0, -x^2 z) for x < 0. The Jacobian is continuous across the
/// seam (both branches vanish quadratically); the x >= 0 branch is used at
/// x = 0 exactly. Each branch's Jacobian has spectrum {x^2, -x^2, 0}.
pub struct Example2Field {
    c: f64,
}

impl Example2Field {
    pub fn new(c: f64) -> Self {
        Example2Field { c }
    }

    pub fn drift(&self) -> f64 {
        self.c
    }
}

impl VectorField for Example2Field {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, p: &[f64]) -> Vec<f64> {
        let (x, y, z) = (p[0], p[1], p[2]);
        let fx = x * x * x / 3.0 - self.c;
        if x >= 0.0 {
            vec![fx, -x * x * y, 0.0]
        } else {
            vec![fx, 0.0, -x * x * z]
        }
    }

    fn jacobian(&self, p: &[f64]) -> Matrix {
        let (x, y, z) = (p[0], p[1], p[2]);
        let x2 = x * x;
        if x >= 0.0 {
            Matrix::from_rows(&[
                &[x2, 0.0, 0.0],
                &[-2.0 * x * y, -x2, 0.0],
                &[0.0, 0.0, 0.0],
            ])
        } else {
            Matrix::from_rows(&[
                &[x2, 0.0, 0.0],
                &[0.0, 0.0, 0.0],
                &[-2.0 * x * z, 0.0, -x2],
            ])
        }
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C1
    }
}

/// Harmonic oscillator over a skew coupling that depends on the slow
/// variables: f(x, y) = (x2, -x1, A(x) w(y)) with
/// A(x) = [[0, x1, x1], [-x1, 0, x1 x2], [-x1, -x1 x2, 0]] and
/// w(y) = (y1^3/3, y2^3/3, y3^2/2), so that the lower-right Jacobian block
/// is A(x) S(y) with S(y) = diag(y1^2, y2^2, y3). The similarity matrix
/// that would pair the block spectrum varies with x, which is exactly what
/// breaks multi-stage volume preservation here.
pub struct Example3Field;

impl Example3Field {
    /// The skew coupling matrix A(x).
    pub fn coupling(x: &[f64]) -> Matrix {
        let (x1, x2) = (x[0], x[1]);
        Matrix::from_rows(&[
            &[0.0, x1, x1],
            &[-x1, 0.0, x1 * x2],
            &[-x1, -x1 * x2, 0.0],
        ])
    }

    /// The symmetric factor S(y) of the lower-right Jacobian block.
    pub fn symmetric_factor(y: &[f64]) -> Matrix {
        Matrix::from_rows(&[
            &[y[0] * y[0], 0.0, 0.0],
            &[0.0, y[1] * y[1], 0.0],
            &[0.0, 0.0, y[2]],
        ])
    }

    fn w(y: &[f64]) -> Vec<f64> {
        vec![
            y[0] * y[0] * y[0] / 3.0,
            y[1] * y[1] * y[1] / 3.0,
            y[2] * y[2] / 2.0,
        ]
    }
}

impl VectorField for Example3Field {
    fn dim(&self) -> usize {
        5
    }

    fn eval(&self, z: &[f64]) -> Vec<f64> {
        let (x, y) = z.split_at(2);
        let mut out = vec![x[1], -x[0]];
        out.extend(Self::coupling(x).matvec(&Self::w(y)));
        out
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let (x, y) = z.split_at(2);
        let w = Self::w(y);
        let mut jac = Matrix::zeros(5, 5);
        jac[(0, 1)] = 1.0;
        jac[(1, 0)] = -1.0;
        // d/dx1 A(x) and d/dx2 A(x) applied to w(y).
        let da_dx1 = Matrix::from_rows(&[
            &[0.0, 1.0, 1.0],
            &[-1.0, 0.0, x[1]],
            &[-1.0, -x[1], 0.0],
        ]);
        let da_dx2 = Matrix::from_rows(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, x[0]],
            &[0.0, -x[0], 0.0],
        ]);
        let col1 = da_dx1.matvec(&w);
        let col2 = da_dx2.matvec(&w);
        for i in 0..3 {
            jac[(2 + i, 0)] = col1[i];
            jac[(2 + i, 1)] = col2[i];
        }
        jac.set_block(2, 2, &Self::coupling(x).mul(&Self::symmetric_factor(y)));
        jac
    }
}

/// Harmonic oscillator foliated over a Hamiltonian y-system whose quadratic
/// Hamiltonian H(x, y) = q_x p_x q_y p_y couples through x:
/// f(q_x, p_x, q_y, p_y) = (p_x, -q_x, q_x p_x q_y, -q_x p_x p_y).
/// The oscillator frequency is taken as 1.
pub struct KahanRemarkField;

impl VectorField for KahanRemarkField {
    fn dim(&self) -> usize {
        4
    }

    fn eval(&self, z: &[f64]) -> Vec<f64> {
        let (qx, px, qy, py) = (z[0], z[1], z[2], z[3]);
        vec![px, -qx, qx * px * qy, -qx * px * py]
    }

    fn jacobian(&self, z: &[f64]) -> Matrix {
        let (qx, px, qy, py) = (z[0], z[1], z[2], z[3]);
        Matrix::from_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[-1.0, 0.0, 0.0, 0.0],
            &[px * qy, qx * qy, qx * px, 0.0],
            &[-px * py, -qx * py, 0.0, -qx * px],
        ])
    }
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

/// Names accepted by [`builtin_field`].
pub const BUILTIN_FIELDS: [&str; 7] = [
    "quad_hamiltonian",
    "hlw_separable",
    "example1",
    "example2",
    "example3",
    "kahan_remark",
    "linear",
];

/// JSON field descriptor: `{"name": "example2", "params": {"c": 1.0}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl FieldDescriptor {
    pub fn by_name(name: &str) -> Self {
        FieldDescriptor {
            name: name.to_string(),
            params: serde_json::Value::Null,
        }
    }

    pub fn build(&self) -> Result<Box<dyn VectorField>> {
        builtin_field(&self.name, &self.params)
    }

    /// The quadratic form of the field when it has one (Kahan stepping
    /// needs it); `quad_hamiltonian`, `linear` and `quadratic` qualify.
    pub fn build_quadratic(&self) -> Result<QuadraticFieldSpec> {
        match self.name.as_str() {
            "quad_hamiltonian" => {
                let p: QuadHamParams = from_params(&self.params)?;
                Ok(p.build()?.to_quadratic())
            }
            "linear" => {
                let p: LinearParams = from_params(&self.params)?;
                let lin = p.build()?;
                QuadraticFieldSpec::linear(lin.matrix().clone(), lin.d.clone())
            }
            "quadratic" => {
                let p: QuadraticParams = from_params(&self.params)?;
                p.build()
            }
            other => Err(Error::BadParams(format!(
                "field '{other}' is not quadratic; Kahan's method needs a quadratic field"
            ))),
        }
    }
}

fn from_params<T: serde::de::DeserializeOwned + Default>(v: &serde_json::Value) -> Result<T> {
    if v.is_null() {
        Ok(T::default())
    } else {
        Ok(serde_json::from_value(v.clone())?)
    }
}

fn matrix_from_nested(rows: &[Vec<f64>]) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::BadParams("ragged matrix in params".into()));
    }
    let mut data = Vec::with_capacity(r * c);
    for row in rows {
        for v in row {
            if !v.is_finite() {
                return Err(Error::BadParams("non-finite matrix entry in params".into()));
            }
        }
        data.extend_from_slice(row);
    }
    Ok(Matrix::new(r, c, data))
}

#[derive(Debug, Default, Deserialize)]
struct QuadHamParams {
    j: Option<Vec<Vec<f64>>>,
    s: Option<Vec<Vec<f64>>>,
    d: Option<Vec<f64>>,
}

impl QuadHamParams {
    fn build(&self) -> Result<QuadHamiltonianField> {
        let j = match &self.j {
            Some(rows) => matrix_from_nested(rows)?,
            None => Matrix::from_rows(&[
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[-1.0, 0.0, 0.0, 0.0],
                &[0.0, -1.0, 0.0, 0.0],
            ]),
        };
        let s = match &self.s {
            Some(rows) => matrix_from_nested(rows)?,
            None => Matrix::from_rows(&[
                &[2.0, 0.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0, -1.0],
                &[1.0, 0.0, 3.0, 1.0],
                &[0.0, -1.0, 1.0, 1.0],
            ]),
        };
        let d = self
            .d
            .clone()
            .unwrap_or_else(|| vec![0.5, -0.25, 1.0, 0.75]);
        QuadHamiltonianField::new(j, s, d)
    }
}

#[derive(Debug, Default, Deserialize)]
struct Example2Params {
    c: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct LinearParams {
    l: Option<Vec<Vec<f64>>>,
    d: Option<Vec<f64>>,
}

impl LinearParams {
    fn build(&self) -> Result<LinearField> {
        let l = match &self.l {
            Some(rows) => matrix_from_nested(rows)?,
            // Default is deliberately not volume preserving (nonzero trace).
            None => Matrix::from_rows(&[&[0.3, 1.0], &[-0.7, -0.1]]),
        };
        let d = self.d.clone().unwrap_or_else(|| vec![0.0; l.rows()]);
        LinearField::new(l, d)
    }
}

#[derive(Debug, Default, Deserialize)]
struct QuadraticParams {
    q: Option<Vec<Vec<Vec<f64>>>>,
    l: Option<Vec<Vec<f64>>>,
    d: Option<Vec<f64>>,
}

impl QuadraticParams {
    fn build(&self) -> Result<QuadraticFieldSpec> {
        let n = self
            .q
            .as_ref()
            .map(|q| q.len())
            .or_else(|| self.l.as_ref().map(|l| l.len()))
            .or_else(|| self.d.as_ref().map(|d| d.len()))
            .ok_or_else(|| Error::BadParams("quadratic field needs q, l or d".into()))?;
        let mut tensor = vec![0.0; n * n * n];
        if let Some(q) = &self.q {
            if q.len() != n || q.iter().any(|m| m.len() != n || m.iter().any(|r| r.len() != n)) {
                return Err(Error::BadParams("q must be an n x n x n tensor".into()));
            }
            for (i, slab) in q.iter().enumerate() {
                for (j, row) in slab.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        tensor[(i * n + j) * n + k] = *v;
                    }
                }
            }
        }
        let l = match &self.l {
            Some(rows) => matrix_from_nested(rows)?,
            None => Matrix::zeros(n, n),
        };
        let d = self.d.clone().unwrap_or_else(|| vec![0.0; n]);
        QuadraticFieldSpec::new(n, tensor, l, d)
    }
}

/// The default separable instance: coupled pendulums with a non-gradient
/// force, xdot = y, ydot = (-sin x1 - x2, -sin x2 + x1). Four-dimensional
/// and not Hamiltonian, so volume preservation is not a symplecticity
/// byproduct.
pub fn hlw_default() -> HlwSeparableField {
    let u = FnMap::new(2, 2, |y: &[f64]| y.to_vec(), |_y: &[f64]| Matrix::identity(2));
    let v = FnMap::new(
        2,
        2,
        |x: &[f64]| vec![-x[0].sin() - x[1], -x[1].sin() + x[0]],
        |x: &[f64]| {
            Matrix::from_rows(&[&[-x[0].cos(), -1.0], &[1.0, -x[1].cos()]])
        },
    );
    HlwSeparableField::new(Box::new(u), Box::new(v)).expect("dimensions match")
}

/// Build a catalog field from its name and JSON params.
pub fn builtin_field(name: &str, params: &serde_json::Value) -> Result<Box<dyn VectorField>> {
    match name {
        "quad_hamiltonian" => {
            let p: QuadHamParams = from_params(params)?;
            Ok(Box::new(p.build()?))
        }
        "hlw_separable" => Ok(Box::new(hlw_default())),
        "example1" => Ok(Box::new(Example1Field)),
        "example2" => {
            let p: Example2Params = from_params(params)?;
            Ok(Box::new(Example2Field::new(p.c.unwrap_or(1.0))))
        }
        "example3" => Ok(Box::new(Example3Field)),
        "kahan_remark" => Ok(Box::new(KahanRemarkField)),
        "linear" => {
            let p: LinearParams = from_params(params)?;
            Ok(Box::new(p.build()?))
        }
        "quadratic" => {
            let p: QuadraticParams = from_params(params)?;
            Ok(Box::new(p.build()?))
        }
        other => Err(Error::UnknownField(other.to_string())),
    }
}
