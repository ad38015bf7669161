//! Butcher tableaux, the skew-parametrized symplectic normal form, and the
//! structural predicates on Runge-Kutta methods (symplecticity defect,
//! nonconfluency, the delta condition used by foliation factorizations).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Absolute tolerance for pairwise delta agreement and abscissa distinctness.
/// Tableau entries are O(1) and exact-rational tableaux hit 0 exactly.
pub const DELTA_TOL: f64 = 1e-12;

/// Coefficients (A, b, c) of an s-stage Runge-Kutta method. The abscissae
/// `c` are always the row sums of `A`, recomputed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    s: usize,
    a: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::BadParams(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.len() != a.rows() {
            return Err(Error::BadParams(format!(
                "b has length {} but A is {0}x{0}",
                b.len()
            )));
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(Error::BadParams("b entries must be finite".into()));
        }
        let s = b.len();
        let c = (0..s).map(|i| a.row(i).iter().sum()).collect();
        Ok(ButcherTableau { s, a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.s
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Sum of the weights minus one; zero for consistent methods.
    pub fn consistency_defect(&self) -> f64 {
        (self.b.iter().sum::<f64>() - 1.0).abs()
    }

    /// max-abs norm of M = BA + A^T B - b b^T with B = diag(b). Zero (below
    /// 1e-14) exactly when the method is symplectic.
    pub fn symplecticity_defect(&self) -> f64 {
        let s = self.s;
        let mut m = Matrix::zeros(s, s);
        for i in 0..s {
            for j in 0..s {
                m[(i, j)] =
                    self.b[i] * self.a[(i, j)] + self.a[(j, i)] * self.b[j] - self.b[i] * self.b[j];
            }
        }
        m.max_abs()
    }

    /// Checks nonconfluency and pair-independence of
    /// delta_j(i,k) = (a_ij - a_kj) / (c_i - c_k), returning the common
    /// delta vector when it exists. Vacuously satisfied for s = 1.
    pub fn delta_condition(&self) -> DeltaCondition {
        let s = self.s;
        if s < 2 {
            return DeltaCondition {
                satisfied: true,
                delta: Some(Vec::new()),
            };
        }
        for i in 0..s {
            for k in i + 1..s {
                if (self.c[i] - self.c[k]).abs() <= DELTA_TOL {
                    return DeltaCondition {
                        satisfied: false,
                        delta: None,
                    };
                }
            }
        }
        let mut delta = Vec::with_capacity(s);
        for j in 0..s {
            let reference = (self.a[(0, j)] - self.a[(1, j)]) / (self.c[0] - self.c[1]);
            for i in 0..s {
                for k in 0..s {
                    if i == k {
                        continue;
                    }
                    let d = (self.a[(i, j)] - self.a[(k, j)]) / (self.c[i] - self.c[k]);
                    if (d - reference).abs() > DELTA_TOL {
                        return DeltaCondition {
                            satisfied: false,
                            delta: None,
                        };
                    }
                }
            }
            delta.push(reference);
        }
        DeltaCondition {
            satisfied: true,
            delta: Some(delta),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let a: Vec<Vec<f64>> = (0..self.s).map(|i| self.a.row(i).to_vec()).collect();
        serde_json::json!({ "s": self.s, "A": a, "b": self.b })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: TableauJson = serde_json::from_value(value.clone())?;
        parsed.build()
    }
}

/// Result of [`ButcherTableau::delta_condition`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaCondition {
    pub satisfied: bool,
    /// Common per-column delta vector; present only when satisfied
    /// (empty for the vacuous one-stage case).
    pub delta: Option<Vec<f64>>,
}

/// JSON form of a tableau: `{"s": .., "A": [[..]], "b": [..]}`, `c` derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableauJson {
    pub s: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl TableauJson {
    pub fn build(&self) -> Result<ButcherTableau> {
        if self.a.len() != self.s || self.a.iter().any(|row| row.len() != self.s) {
            return Err(Error::BadParams(format!("A must be {0}x{0}", self.s)));
        }
        let mut data = Vec::with_capacity(self.s * self.s);
        for row in &self.a {
            data.extend_from_slice(row);
        }
        ButcherTableau::new(Matrix::new(self.s, self.s, data), self.b.clone())
    }
}

/// Symplectic method in skew normal form: weights `b` (all nonzero) and a
/// skew-symmetric `omega`, yielding A = (omega + 1 1^T) diag(b) / 2.
#[derive(Debug, Clone)]
pub struct SsrkSpec {
    b: Vec<f64>,
    omega: Matrix,
}

impl SsrkSpec {
    pub fn new(b: Vec<f64>, omega: Matrix) -> Result<Self> {
        let s = b.len();
        if omega.rows() != s || omega.cols() != s {
            return Err(Error::BadParams(format!(
                "omega must be {s}x{s}, got {}x{}",
                omega.rows(),
                omega.cols()
            )));
        }
        let skew_defect = omega.add(&omega.transpose()).max_abs();
        if skew_defect > 1e-14 {
            return Err(Error::BadParams(format!(
                "omega is not skew-symmetric (defect {skew_defect:.3e})"
            )));
        }
        if b.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::BadParams("all weights b_i must be nonzero".into()));
        }
        Ok(SsrkSpec { b, omega })
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    /// A = (omega + 1 1^T) diag(b) / 2; the result always has zero
    /// symplecticity defect.
    pub fn to_tableau(&self) -> ButcherTableau {
        let s = self.b.len();
        let mut a = Matrix::zeros(s, s);
        for i in 0..s {
            for j in 0..s {
                a[(i, j)] = 0.5 * (self.omega[(i, j)] + 1.0) * self.b[j];
            }
        }
        ButcherTableau::new(a, self.b.clone()).expect("shape is consistent by construction")
    }
}

/// Construct one of the four built-in tableaux:
/// `midpoint`, `trapezoidal`, `gauss2`, `gauss3`.
pub fn builtin_tableau(name: &str) -> Result<ButcherTableau> {
    let sqrt3 = 3.0_f64.sqrt();
    let sqrt15 = 15.0_f64.sqrt();
    match name {
        "midpoint" => ButcherTableau::new(Matrix::new(1, 1, vec![0.5]), vec![1.0]),
        "trapezoidal" => ButcherTableau::new(
            Matrix::from_rows(&[&[0.0, 0.0], &[0.5, 0.5]]),
            vec![0.5, 0.5],
        ),
        "gauss2" => ButcherTableau::new(
            Matrix::from_rows(&[
                &[0.25, 0.25 - sqrt3 / 6.0],
                &[0.25 + sqrt3 / 6.0, 0.25],
            ]),
            vec![0.5, 0.5],
        ),
        "gauss3" => ButcherTableau::new(
            Matrix::from_rows(&[
                &[5.0 / 36.0, 2.0 / 9.0 - sqrt15 / 15.0, 5.0 / 36.0 - sqrt15 / 30.0],
                &[5.0 / 36.0 + sqrt15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - sqrt15 / 24.0],
                &[5.0 / 36.0 + sqrt15 / 30.0, 2.0 / 9.0 + sqrt15 / 15.0, 5.0 / 36.0],
            ]),
            vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
        ),
        other => Err(Error::UnknownTableau(other.to_string())),
    }
}

/// Names accepted by [`builtin_tableau`], in catalog order.
pub const BUILTIN_TABLEAUX: [&str; 4] = ["midpoint", "trapezoidal", "gauss2", "gauss3"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{self, DEFAULT_SEED};
    use rand::Rng;

    #[test]
    fn one_stage_ssrk_is_midpoint() {
        let spec = SsrkSpec::new(vec![1.0], Matrix::zeros(1, 1)).unwrap();
        let t = spec.to_tableau();
        assert_eq!(t.a()[(0, 0)], 0.5);
        assert_eq!(t.b(), &[1.0]);
        assert_eq!(t.c(), &[0.5]);
    }

    #[test]
    fn gauss2_from_ssrk_normal_form() {
        // Solving (1 + omega)/4 = 1/4 - sqrt(3)/6 gives omega = -2 sqrt(3)/3.
        let omega = -2.0 * 3.0_f64.sqrt() / 3.0;
        let spec = SsrkSpec::new(
            vec![0.5, 0.5],
            Matrix::from_rows(&[&[0.0, omega], &[-omega, 0.0]]),
        )
        .unwrap();
        let t = spec.to_tableau();
        let g2 = builtin_tableau("gauss2").unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.a()[(i, j)] - g2.a()[(i, j)]).abs() <= 1e-15);
            }
        }
        assert!(t.symplecticity_defect() <= 1e-14);
    }

    #[test]
    fn symplecticity_defect_values() {
        assert!(builtin_tableau("midpoint").unwrap().symplecticity_defect() <= 1e-16);
        // Hand computation gives M = [[-1/4, 0], [0, 1/4]] for the trapezoidal rule.
        let tr = builtin_tableau("trapezoidal").unwrap();
        assert!((tr.symplecticity_defect() - 0.25).abs() <= 1e-15);
        assert!(builtin_tableau("gauss2").unwrap().symplecticity_defect() <= 1e-15);
        assert!(builtin_tableau("gauss3").unwrap().symplecticity_defect() <= 1e-15);
    }

    #[test]
    fn ssrk_defect_vanishes_on_seeded_draws() {
        let mut rng = sampling::rng_from_seed(DEFAULT_SEED);
        for _ in 0..100 {
            let s = rng.random_range(1..=4);
            let mut b = Vec::with_capacity(s);
            for _ in 0..s {
                let mut v: f64 = rng.random_range(-1.0..1.0);
                if v.abs() < 1e-3 {
                    v = 0.5;
                }
                b.push(v);
            }
            let spec = SsrkSpec::new(b, sampling::random_skew(&mut rng, s)).unwrap();
            assert!(spec.to_tableau().symplecticity_defect() <= 1e-14);
        }
    }

    #[test]
    fn delta_condition_trapezoidal() {
        let d = builtin_tableau("trapezoidal").unwrap().delta_condition();
        assert!(d.satisfied);
        let delta = d.delta.unwrap();
        assert!((delta[0] - 0.5).abs() <= 1e-15);
        assert!((delta[1] - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn delta_condition_gauss2_and_gauss3() {
        assert!(builtin_tableau("gauss2").unwrap().delta_condition().satisfied);
        assert!(!builtin_tableau("gauss3").unwrap().delta_condition().satisfied);
    }

    #[test]
    fn delta_condition_random_two_stage_ssrk() {
        let mut rng = sampling::rng_from_seed(DEFAULT_SEED ^ 5);
        for _ in 0..20 {
            // Consistent weights and omega != 0.
            let b1: f64 = rng.random_range(0.1..0.9);
            let omega: f64 = rng.random_range(0.2..1.5);
            let spec = SsrkSpec::new(
                vec![b1, 1.0 - b1],
                Matrix::from_rows(&[&[0.0, omega], &[-omega, 0.0]]),
            )
            .unwrap();
            assert!(spec.to_tableau().delta_condition().satisfied);
        }
    }

    #[test]
    fn delta_condition_rejects_confluent_abscissae() {
        // Both rows sum to 1/2.
        let t = ButcherTableau::new(
            Matrix::from_rows(&[&[0.25, 0.25], &[0.3, 0.2]]),
            vec![0.5, 0.5],
        )
        .unwrap();
        let d = t.delta_condition();
        assert!(!d.satisfied);
        assert!(d.delta.is_none());
    }

    #[test]
    fn one_stage_delta_is_vacuous() {
        let d = builtin_tableau("midpoint").unwrap().delta_condition();
        assert!(d.satisfied);
        assert_eq!(d.delta.unwrap().len(), 0);
    }

    #[test]
    fn builtin_catalog_values() {
        let mid = builtin_tableau("midpoint").unwrap();
        assert_eq!(mid.stages(), 1);
        assert_eq!(mid.b(), &[1.0]);

        let g3 = builtin_tableau("gauss3").unwrap();
        assert_eq!(g3.stages(), 3);
        let sqrt15 = 15.0_f64.sqrt();
        let expect_c = [0.5 - sqrt15 / 10.0, 0.5, 0.5 + sqrt15 / 10.0];
        for (got, want) in g3.c().iter().zip(expect_c) {
            assert!((got - want).abs() <= 1e-15, "c {got} vs {want}");
        }
        assert_eq!(g3.b(), &[5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0]);
        // Quadrature order conditions at the Gauss nodes.
        let b = g3.b();
        let c = g3.c();
        let m0: f64 = b.iter().sum();
        let m1: f64 = b.iter().zip(c).map(|(bi, ci)| bi * ci).sum();
        let m2: f64 = b.iter().zip(c).map(|(bi, ci)| bi * ci * ci).sum();
        assert!((m0 - 1.0).abs() <= 1e-15);
        assert!((m1 - 0.5).abs() <= 1e-15);
        assert!((m2 - 1.0 / 3.0).abs() <= 1e-15);

        assert!(matches!(
            builtin_tableau("rk4"),
            Err(Error::UnknownTableau(_))
        ));
    }

    #[test]
    fn abscissae_are_row_sums() {
        for name in BUILTIN_TABLEAUX {
            let t = builtin_tableau(name).unwrap();
            for i in 0..t.stages() {
                let sum: f64 = t.a().row(i).iter().sum();
                assert!((t.c()[i] - sum).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        for name in BUILTIN_TABLEAUX {
            let t = builtin_tableau(name).unwrap();
            let back = ButcherTableau::from_json(&t.to_json()).unwrap();
            assert_eq!(t, back);
        }
        let parsed = ButcherTableau::from_json(&serde_json::json!({
            "s": 1, "A": [[0.5]], "b": [1.0]
        }))
        .unwrap();
        assert_eq!(parsed, builtin_tableau("midpoint").unwrap());
    }

    #[test]
    fn ssrk_spec_validation() {
        let not_skew = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(SsrkSpec::new(vec![0.5, 0.5], not_skew).is_err());
        let skew = Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(SsrkSpec::new(vec![0.5, 0.0], skew).is_err());
    }
}
