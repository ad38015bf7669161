//! Quadratic maps and fields: homogeneous part as a symmetric coefficient
//! tensor, linear part, constant drift. The polarized bilinear form drives
//! Kahan stepping.

use super::{SmoothMap, Smoothness, VectorField};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Quadratic map R^m -> R^n: f(x) = Q(x) + Lx + d with
/// Q(x)_i = sum_{j,k} q_{i,jk} x_j x_k. The tensor is symmetrized over
/// (j, k) at construction, so q_{i,jk} = q_{i,kj} holds exactly.
#[derive(Debug, Clone)]
pub struct QuadraticMap {
    in_dim: usize,
    out_dim: usize,
    q: Vec<f64>,
    l: Matrix,
    d: Vec<f64>,
}

impl QuadraticMap {
    pub fn new(in_dim: usize, out_dim: usize, q: Vec<f64>, l: Matrix, d: Vec<f64>) -> Result<Self> {
        if q.len() != out_dim * in_dim * in_dim {
            return Err(Error::BadParams(format!(
                "quadratic tensor needs {} entries, got {}",
                out_dim * in_dim * in_dim,
                q.len()
            )));
        }
        if l.rows() != out_dim || l.cols() != in_dim || d.len() != out_dim {
            return Err(Error::BadParams(
                "linear part / drift shapes do not match the quadratic map dimensions".into(),
            ));
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::BadParams("non-finite tensor entry".into()));
        }
        let mut map = QuadraticMap {
            in_dim,
            out_dim,
            q,
            l,
            d,
        };
        map.symmetrize();
        Ok(map)
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        QuadraticMap {
            in_dim,
            out_dim,
            q: vec![0.0; out_dim * in_dim * in_dim],
            l: Matrix::zeros(out_dim, in_dim),
            d: vec![0.0; out_dim],
        }
    }

    fn symmetrize(&mut self) {
        let n = self.in_dim;
        for i in 0..self.out_dim {
            for j in 0..n {
                for k in j + 1..n {
                    let a = self.q[(i * n + j) * n + k];
                    let b = self.q[(i * n + k) * n + j];
                    let avg = 0.5 * (a + b);
                    self.q[(i * n + j) * n + k] = avg;
                    self.q[(i * n + k) * n + j] = avg;
                }
            }
        }
    }

    #[inline]
    pub fn coeff(&self, i: usize, j: usize, k: usize) -> f64 {
        self.q[(i * self.in_dim + j) * self.in_dim + k]
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn linear_part(&self) -> &Matrix {
        &self.l
    }

    pub fn drift(&self) -> &[f64] {
        &self.d
    }

    /// Q(x), the homogeneous quadratic part.
    pub fn quadratic_part(&self, x: &[f64]) -> Vec<f64> {
        self.polarized(x, x)
    }

    /// The symmetric bilinear form q(x, y) with q(x, x) = Q(x).
    pub fn polarized(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim);
        assert_eq!(y.len(), self.in_dim);
        let n = self.in_dim;
        let mut out = vec![0.0; self.out_dim];
        for i in 0..self.out_dim {
            let mut acc = 0.0;
            for j in 0..n {
                if x[j] == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                let mut row = 0.0;
                for k in 0..n {
                    row += self.q[base + k] * y[k];
                }
                acc += x[j] * row;
            }
            out[i] = acc;
        }
        out
    }

    /// Matrix of the partially applied bilinear form: q(x, y) = q_matrix(x) y.
    pub fn q_matrix(&self, x: &[f64]) -> Matrix {
        assert_eq!(x.len(), self.in_dim);
        let n = self.in_dim;
        let mut m = Matrix::zeros(self.out_dim, n);
        for i in 0..self.out_dim {
            for k in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.coeff(i, j, k) * x[j];
                }
                m[(i, k)] = acc;
            }
        }
        m
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.quadratic_part(x);
        let lx = self.l.matvec(x);
        for i in 0..self.out_dim {
            out[i] += lx[i] + self.d[i];
        }
        out
    }

    /// Jacobian 2 q(x, .) + L; affine in x.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        self.q_matrix(x).scaled(2.0).add(&self.l)
    }
}

impl SmoothMap for QuadraticMap {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        QuadraticMap::eval(self, x)
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        QuadraticMap::jacobian(self, x)
    }
}

/// Square quadratic map used as a vector field.
#[derive(Debug, Clone)]
pub struct QuadraticFieldSpec {
    map: QuadraticMap,
}

impl QuadraticFieldSpec {
    /// `q` is the row-major n*n*n tensor `q[i][j][k]`, symmetrized over (j, k).
    pub fn new(dim: usize, q: Vec<f64>, l: Matrix, d: Vec<f64>) -> Result<Self> {
        Ok(QuadraticFieldSpec {
            map: QuadraticMap::new(dim, dim, q, l, d)?,
        })
    }

    /// Purely affine field (zero quadratic tensor).
    pub fn linear(l: Matrix, d: Vec<f64>) -> Result<Self> {
        let n = d.len();
        Self::new(n, vec![0.0; n * n * n], l, d)
    }

    pub fn map(&self) -> &QuadraticMap {
        &self.map
    }

    pub fn dim(&self) -> usize {
        self.map.in_dim()
    }

    pub fn polarized(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.map.polarized(x, y)
    }

    pub fn q_matrix(&self, x: &[f64]) -> Matrix {
        self.map.q_matrix(x)
    }

    pub fn quadratic_part(&self, x: &[f64]) -> Vec<f64> {
        self.map.quadratic_part(x)
    }

    pub fn linear_part(&self) -> &Matrix {
        self.map.linear_part()
    }

    pub fn drift(&self) -> &[f64] {
        self.map.drift()
    }
}

impl VectorField for QuadraticFieldSpec {
    fn dim(&self) -> usize {
        self.map.in_dim()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.map.eval(x)
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        self.map.jacobian(x)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }
}

/// The symmetric bilinear form of a quadratic field,
/// q(x, y) = (Q(x + y) - Q(x) - Q(y)) / 2, evaluated through the tensor.
pub fn polarize(spec: &QuadraticFieldSpec, x: &[f64], y: &[f64]) -> Vec<f64> {
    spec.polarized(x, y)
}

/// Assemble the block field f(x, y) = (u(x), v(y) + w(x)) as one quadratic
/// field on R^{m+n}.
pub fn foliate_quadratic(
    u: &QuadraticFieldSpec,
    v: &QuadraticFieldSpec,
    w: &QuadraticMap,
) -> Result<QuadraticFieldSpec> {
    let m = u.dim();
    let n = v.dim();
    if w.in_dim() != m || w.out_dim() != n {
        return Err(Error::BadParams(format!(
            "w must map R^{m} -> R^{n}, got R^{} -> R^{}",
            w.in_dim(),
            w.out_dim()
        )));
    }
    let dim = m + n;
    let mut q = vec![0.0; dim * dim * dim];
    // x-block rows: u's tensor on x coordinates.
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                q[(i * dim + j) * dim + k] = u.map().coeff(i, j, k);
            }
        }
    }
    // y-block rows: v's tensor on y coordinates plus w's tensor on x.
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                q[((m + i) * dim + m + j) * dim + (m + k)] = v.map().coeff(i, j, k);
            }
        }
        for j in 0..m {
            for k in 0..m {
                q[((m + i) * dim + j) * dim + k] = w.coeff(i, j, k);
            }
        }
    }
    let mut l = Matrix::zeros(dim, dim);
    l.set_block(0, 0, u.linear_part());
    l.set_block(m, m, v.linear_part());
    l.set_block(m, 0, w.linear_part());
    let mut d = u.drift().to_vec();
    for i in 0..n {
        d.push(v.drift()[i] + w.drift()[i]);
    }
    QuadraticFieldSpec::new(dim, q, l, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::fd_jacobian;
    use crate::sampling::{self, DEFAULT_SEED};

    #[test]
    fn scalar_polarization() {
        // Q(x) = x^2 in one dimension: q(x, y) = x y.
        let spec = QuadraticFieldSpec::new(1, vec![1.0], Matrix::zeros(1, 1), vec![0.0]).unwrap();
        assert_eq!(polarize(&spec, &[2.0], &[3.0]), vec![6.0]);
    }

    #[test]
    fn polarization_is_symmetric_and_diagonal_matches() {
        let mut rng = sampling::rng_from_seed(DEFAULT_SEED ^ 41);
        for _ in 0..10 {
            let spec = sampling::random_quadratic_field(&mut rng, 3);
            let x = sampling::sample_box(&mut rng, 3, 1.0);
            let y = sampling::sample_box(&mut rng, 3, 1.0);
            let qxy = spec.polarized(&x, &y);
            let qyx = spec.polarized(&y, &x);
            for (a, b) in qxy.iter().zip(&qyx) {
                assert!((a - b).abs() <= 1e-12);
            }
            // q(x, x) against the polarization identity (Q(x+y)-Q(x)-Q(y))/2
            // evaluated directly, the independent route.
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let qs = spec.quadratic_part(&sum);
            let qx = spec.quadratic_part(&x);
            let qy = spec.quadratic_part(&y);
            for i in 0..3 {
                let direct = 0.5 * (qs[i] - qx[i] - qy[i]);
                assert!((qxy[i] - direct).abs() <= 1e-12);
            }
            let qxx = spec.polarized(&x, &x);
            let direct = spec.quadratic_part(&x);
            for (a, b) in qxx.iter().zip(&direct) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_is_affine_and_matches_fd() {
        let mut rng = sampling::rng_from_seed(DEFAULT_SEED ^ 43);
        let spec = sampling::random_quadratic_field(&mut rng, 4);
        for _ in 0..5 {
            let x = sampling::sample_box(&mut rng, 4, 1.0);
            let analytic = spec.jacobian(&x);
            let fd = fd_jacobian(|p| spec.eval(p), &x, 4);
            assert!(analytic.sub(&fd).max_abs() <= 1e-5);
        }
        // Affine check: J(x) + J(y) = J(x + y) + J(0).
        let x = sampling::sample_box(&mut rng, 4, 1.0);
        let y = sampling::sample_box(&mut rng, 4, 1.0);
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let lhs = spec.jacobian(&x).add(&spec.jacobian(&y));
        let rhs = spec.jacobian(&sum).add(&spec.jacobian(&vec![0.0; 4]));
        assert!(lhs.sub(&rhs).max_abs() <= 1e-13);
    }

    #[test]
    fn foliated_quadratic_blocks() {
        let mut rng = sampling::rng_from_seed(DEFAULT_SEED ^ 47);
        let u = sampling::random_quadratic_d_field(&mut rng, 2);
        let v = sampling::random_quadratic_d_field(&mut rng, 2);
        let w = sampling::random_quadratic_map(&mut rng, 2, 2);
        let f = foliate_quadratic(&u, &v, &w).unwrap();
        assert_eq!(f.dim(), 4);
        let x = sampling::sample_box(&mut rng, 2, 1.0);
        let y = sampling::sample_box(&mut rng, 2, 1.0);
        let z: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
        let fz = f.eval(&z);
        let ux = u.eval(&x);
        let vy = v.eval(&y);
        let wx = w.eval(&x);
        for i in 0..2 {
            assert!((fz[i] - ux[i]).abs() <= 1e-14);
            assert!((fz[2 + i] - (vy[i] + wx[i])).abs() <= 1e-14);
        }
        // Upper-right Jacobian block vanishes.
        assert_eq!(f.jacobian(&z).block(0, 2, 2, 2).max_abs(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn polarized_symmetry_any_tensor(
                q in proptest::collection::vec(-3.0_f64..3.0, 8),
                x in proptest::collection::vec(-2.0_f64..2.0, 2),
                y in proptest::collection::vec(-2.0_f64..2.0, 2),
            ) {
                let spec = QuadraticFieldSpec::new(2, q, Matrix::zeros(2, 2), vec![0.0; 2]).unwrap();
                let a = spec.polarized(&x, &y);
                let b = spec.polarized(&y, &x);
                for (u, v) in a.iter().zip(&b) {
                    prop_assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }
}
