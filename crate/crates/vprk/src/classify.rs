//! Numerical membership tests for the volume-preservation classes: the
//! determinant condition det(I + (h/2)f'(x)) = det(I - (h/2)f'(x)), vanishing
//! odd power traces, paired nonzero spectra, and constant-similarity checks
//! (P f' P^{-1} = -f'^T or -f'). The three spectral criteria are equivalent
//! and the aggregate classifier cross-validates them on every sample.
//!
//! All verdicts are per-sample and never extrapolated: a pass certifies "no
//! violation found on these samples", nothing more.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::linalg::Matrix;

/// Relative tolerance for the determinant-condition and trace checks.
pub const CLASS_TOL: f64 = 1e-9;

/// Eigenvalues below this magnitude are treated as zero and ignored by the
/// pairing check.
pub const EIG_ZERO_CUTOFF: f64 = 1e-9;

/// Pairing tolerance: lambda and mu pair up when |lambda + mu| is below
/// `EIG_PAIR_RTOL * (1 + |lambda|)`. Looser than the determinant tolerances
/// because polynomial roots carry more rounding.
pub const EIG_PAIR_RTOL: f64 = 1e-7;

/// Outcome of a pass/fail check with its worst observed deviation.
#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub pass: bool,
    pub max_deviation: f64,
}

/// Evaluate |det(I + (h/2)J) - det(I - (h/2)J)| relative to the larger
/// factor at every (sample, h) pair.
pub fn det_condition_check(
    field: &dyn VectorField,
    samples: &[Vec<f64>],
    h_grid: &[f64],
) -> CheckSummary {
    let mut max_dev: f64 = 0.0;
    for x in samples {
        let jac = field.jacobian(x);
        max_dev = max_dev.max(det_condition_deviation(&jac, h_grid));
    }
    CheckSummary {
        pass: max_dev <= CLASS_TOL,
        max_deviation: max_dev,
    }
}

fn det_condition_deviation(jac: &Matrix, h_grid: &[f64]) -> f64 {
    let mut max_dev: f64 = 0.0;
    for &h in h_grid {
        let plus = Matrix::identity_plus(0.5 * h, jac).det();
        let minus = Matrix::identity_plus(-0.5 * h, jac).det();
        let scale = plus.abs().max(minus.abs()).max(1.0);
        max_dev = max_dev.max((plus - minus).abs() / scale);
    }
    max_dev
}

/// Per-k maxima of |tr(f'(x)^{2k+1})| for k = 0..k_max; k = 0 is the
/// divergence check. Passing requires every trace to vanish relative to
/// 1 + ||f'||_inf^{2k+1}.
#[derive(Debug, Clone, Serialize)]
pub struct OddTraceReport {
    pub pass: bool,
    /// Raw per-k maxima over the samples.
    pub per_k_max: Vec<f64>,
    /// Worst normalized deviation over all k and samples.
    pub max_deviation: f64,
}

pub fn odd_trace_check(field: &dyn VectorField, samples: &[Vec<f64>], k_max: usize) -> OddTraceReport {
    let mut per_k_max = vec![0.0_f64; k_max + 1];
    let mut max_dev: f64 = 0.0;
    for x in samples {
        let jac = field.jacobian(x);
        let norm = jac.norm_inf();
        let square = jac.mul(&jac);
        let mut power = jac.clone(); // J^(2k+1)
        for k in 0..=k_max {
            if k > 0 {
                power = power.mul(&square);
            }
            let tr = power.trace().abs();
            per_k_max[k] = per_k_max[k].max(tr);
            let scale = 1.0 + norm.powi(2 * k as i32 + 1);
            max_dev = max_dev.max(tr / scale);
        }
    }
    OddTraceReport {
        pass: max_dev <= CLASS_TOL,
        per_k_max,
        max_deviation: max_dev,
    }
}

/// Pairing verdict for the nonzero spectrum of one matrix.
#[derive(Debug, Clone, Serialize)]
pub struct EigPairing {
    pub pass: bool,
    /// Eigenvalues (re, im) that found no partner.
    pub unpaired: Vec<(f64, f64)>,
    /// All eigenvalues (re, im), zeros included.
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Check that the nonzero eigenvalues of `jac` come in plus/minus pairs,
/// multiplicities respected. Eigenvalues are the roots of the
/// characteristic polynomial (trace recursion), found by simultaneous
/// (Durand-Kerner) iteration; fine for the desk-scale matrices used here.
pub fn eig_pairing_check(jac: &Matrix) -> Result<EigPairing> {
    let eigs = eigenvalues(jac)?;
    let mut remaining: Vec<Complex64> = eigs
        .iter()
        .copied()
        .filter(|z| z.norm() > EIG_ZERO_CUTOFF)
        .collect();
    remaining.sort_by(|a, b| b.norm().total_cmp(&a.norm()));

    let mut unpaired = Vec::new();
    while let Some(lambda) = remaining.pop() {
        let mut best: Option<(usize, f64)> = None;
        for (idx, mu) in remaining.iter().enumerate() {
            let dist = (lambda + mu).norm();
            if best.map_or(true, |(_, d)| dist < d) {
                best = Some((idx, dist));
            }
        }
        match best {
            Some((idx, dist)) if dist <= EIG_PAIR_RTOL * (1.0 + lambda.norm()) => {
                remaining.remove(idx);
            }
            _ => unpaired.push((lambda.re, lambda.im)),
        }
    }
    Ok(EigPairing {
        pass: unpaired.is_empty(),
        unpaired,
        eigenvalues: eigs.iter().map(|z| (z.re, z.im)).collect(),
    })
}

/// Similarity mode: minus-transpose (Hamiltonian-like) or minus-self
/// (sign-reversal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimilarityMode {
    MinusTranspose,
    MinusSelf,
}

/// Worst defect of P f'(x) P^{-1} + f'(x)^T (or + f'(x)) over the samples,
/// relative to 1 + ||f'||_inf.
pub fn similarity_check(
    field: &dyn VectorField,
    p: &Matrix,
    mode: SimilarityMode,
    samples: &[Vec<f64>],
) -> Result<CheckSummary> {
    let p_inv = p.inverse().map_err(|_| Error::SingularP)?;
    let mut max_dev: f64 = 0.0;
    for x in samples {
        let jac = field.jacobian(x);
        let conj = p.mul(&jac).mul(&p_inv);
        let target = match mode {
            SimilarityMode::MinusTranspose => jac.transpose(),
            SimilarityMode::MinusSelf => jac.clone(),
        };
        let defect = conj.add(&target).max_abs() / (1.0 + jac.norm_inf());
        max_dev = max_dev.max(defect);
    }
    Ok(CheckSummary {
        pass: max_dev <= CLASS_TOL,
        max_deviation: max_dev,
    })
}

/// A candidate similarity matrix to test during classification.
pub struct PCandidate {
    pub label: String,
    pub p: Matrix,
    pub mode: SimilarityMode,
}

/// Classifier configuration: explicit sample points, an h grid for the
/// determinant condition, the trace depth (defaults to the dimension,
/// beyond which Cayley-Hamilton adds nothing), and optional similarity
/// candidates.
pub struct ClassifyConfig {
    pub samples: Vec<Vec<f64>>,
    pub h_grid: Vec<f64>,
    pub k_max: Option<usize>,
    pub p_candidates: Vec<PCandidate>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilarityOutcome {
    pub label: String,
    pub mode: SimilarityMode,
    pub pass: bool,
    pub defect: f64,
}

/// Aggregate report; `equivalence_consistent` records whether the three
/// spectral criteria agreed on every individual sample.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub dim: usize,
    pub det_condition: CheckSummary,
    pub odd_traces: OddTraceReport,
    pub eig_pairing_pass: bool,
    pub unpaired: Vec<(f64, f64)>,
    /// max |tr f'(x)| over the samples.
    pub divergence: f64,
    pub similarity: Vec<SimilarityOutcome>,
    pub equivalence_consistent: bool,
    pub samples: Vec<Vec<f64>>,
    pub h_grid: Vec<f64>,
    pub seed: u64,
}

/// Run every check and cross-validate the equivalence of the determinant
/// condition, odd-trace vanishing, and eigenvalue pairing on each sample.
pub fn classify(field: &dyn VectorField, config: &ClassifyConfig) -> Result<ClassReport> {
    let n = field.dim();
    let k_max = config.k_max.unwrap_or(n);
    let mut equivalence_consistent = true;
    let mut divergence: f64 = 0.0;
    let mut all_unpaired = Vec::new();
    let mut eig_pass_all = true;

    for x in &config.samples {
        let jac = field.jacobian(x);
        divergence = divergence.max(jac.trace().abs());

        let one = std::slice::from_ref(x);
        let det_pass = det_condition_check(field, one, &config.h_grid).pass;
        let trace_pass = odd_trace_check(field, one, k_max).pass;
        let eig = eig_pairing_check(&jac)?;
        if !(det_pass == trace_pass && trace_pass == eig.pass) {
            equivalence_consistent = false;
        }
        if !eig.pass {
            eig_pass_all = false;
            all_unpaired.extend(eig.unpaired);
        }
    }

    let mut similarity = Vec::new();
    for cand in &config.p_candidates {
        let summary = similarity_check(field, &cand.p, cand.mode, &config.samples)?;
        similarity.push(SimilarityOutcome {
            label: cand.label.clone(),
            mode: cand.mode,
            pass: summary.pass,
            defect: summary.max_deviation,
        });
    }

    Ok(ClassReport {
        dim: n,
        det_condition: det_condition_check(field, &config.samples, &config.h_grid),
        odd_traces: odd_trace_check(field, &config.samples, k_max),
        eig_pairing_pass: eig_pass_all,
        unpaired: all_unpaired,
        divergence,
        similarity,
        equivalence_consistent,
        samples: config.samples.clone(),
        h_grid: config.h_grid.clone(),
        seed: config.seed,
    })
}

// ---------------------------------------------------------------------------
// Characteristic polynomial and roots
// ---------------------------------------------------------------------------

/// Coefficients (1, c_1, ..., c_n) of det(zI - M) = z^n + c_1 z^{n-1} + ...
/// + c_n via the trace recursion B_k = M (B_{k-1} + c_{k-1} I),
/// c_k = -tr(B_k)/k.
pub fn char_poly(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    if n == 0 {
        return coeffs;
    }
    let mut b = m.clone();
    let mut c = -b.trace();
    coeffs.push(c);
    for k in 2..=n {
        // B_k = M (B_{k-1} + c_{k-1} I)
        let mut shifted = b;
        for i in 0..n {
            shifted[(i, i)] += c;
        }
        b = m.mul(&shifted);
        c = -b.trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Power-sum traces p_i = tr(M^i) for i = 1..=depth.
pub fn power_traces(m: &Matrix, depth: usize) -> Vec<f64> {
    let mut traces = Vec::with_capacity(depth);
    let mut power = m.clone();
    traces.push(power.trace());
    for _ in 1..depth {
        power = power.mul(m);
        traces.push(power.trace());
    }
    traces
}

/// Elementary symmetric functions e_1..e_n of the eigenvalues from the
/// power traces, by the Newton recursion
/// e_k = (1/k) sum_{i=1..k} (-1)^{i-1} e_{k-i} p_i.
pub fn elementary_symmetric_from_traces(traces: &[f64]) -> Vec<f64> {
    let n = traces.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * traces[i - 1];
        }
        e[k] = acc / k as f64;
    }
    e.remove(0);
    e
}

/// All eigenvalues of a real matrix as roots of its characteristic
/// polynomial.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    let coeffs = char_poly(m);
    poly_roots(&coeffs)
}

/// Roots of a real polynomial given by descending coefficients
/// (c_0 z^d + ... + c_d, c_0 != 0). Near-zero trailing coefficients are
/// deflated into exact zero roots before the simultaneous iteration.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    assert!(!coeffs.is_empty() && coeffs[0] != 0.0, "leading coefficient must be nonzero");
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut monic: Vec<f64> = coeffs.iter().map(|c| c / coeffs[0]).collect();

    // Deflate zero roots.
    let mut zeros = 0;
    while monic.len() > 1 && monic.last().unwrap().abs() <= 1e-12 * (1.0 + scale / coeffs[0].abs()) {
        monic.pop();
        zeros += 1;
    }
    let degree = monic.len() - 1;
    let mut roots: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); zeros];
    if degree == 0 {
        return Ok(roots);
    }

    let radius = 1.0 + monic.iter().skip(1).fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let eval = |w: Complex64| -> Complex64 {
        let mut acc = Complex64::new(monic[0], 0.0);
        for c in &monic[1..] {
            acc = acc * w + c;
        }
        acc
    };

    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for k in 0..degree {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if j != k {
                    let diff = z[k] - z[j];
                    denom *= if diff.norm() < 1e-30 {
                        Complex64::new(1e-30, 1e-30)
                    } else {
                        diff
                    };
                }
            }
            let step = eval(z[k]) / denom;
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if max_step <= 1e-13 {
            roots.extend(z);
            return Ok(roots);
        }
    }
    Err(Error::EigenFailure)
}
