//! Seeded sampling used by tests and experiment drivers. All draws go
//! through a ChaCha8 stream keyed by an explicit seed so identical
//! configurations reproduce byte-identical reports.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fields::{QuadraticFieldSpec, QuadraticMap};
use crate::linalg::Matrix;

/// Default experiment seed, echoed into every report.
pub const DEFAULT_SEED: u64 = 0x5EED;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the centered box [-half_width, half_width]^dim.
pub fn sample_box(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.random_range(-half_width..half_width))
        .collect()
}

/// Matrix with entries uniform in [-scale, scale].
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::new(rows, cols, data)
}

/// Random matrix pushed away from singularity by a diagonal shift; suitable
/// where recovery tests assume moderate conditioning.
pub fn random_well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut m = random_matrix(rng, n, n, 1.0);
    for i in 0..n {
        m[(i, i)] += n as f64;
    }
    m
}

/// Random invertible matrix via rejection on the determinant.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let m = random_matrix(rng, n, n, 1.0);
        if m.det().abs() > 0.2 {
            return m;
        }
    }
}

pub fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    m
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Linear map whose nonzero spectrum comes in exact positive-negative
/// pairs: diag(l1, -l1, l2, -l2, ..., [0]) conjugated by a random
/// invertible matrix.
pub fn random_paired_spectrum(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut diag = Matrix::zeros(n, n);
    let pairs = n / 2;
    for p in 0..pairs {
        let lambda = rng.random_range(0.3..1.5);
        diag[(2 * p, 2 * p)] = lambda;
        diag[(2 * p + 1, 2 * p + 1)] = -lambda;
    }
    // Odd dimension leaves a zero eigenvalue.
    let p = random_invertible(rng, n);
    let p_inv = p.inverse().expect("rejection sampling keeps P invertible");
    p.mul(&diag).mul(&p_inv)
}

/// Generic linear map, rejection-sampled to have a clearly nonzero trace so
/// every pairing-based test fails on it unambiguously.
pub fn random_generic_linear(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    loop {
        let m = random_matrix(rng, n, n, 1.0);
        if m.trace().abs() > 0.2 {
            return m;
        }
    }
}

/// Canonical skew structure matrix of even size: [[0, I], [-I, 0]].
pub fn canonical_skew(n: usize) -> Matrix {
    assert!(n % 2 == 0, "canonical skew matrix needs even dimension");
    let half = n / 2;
    let mut j = Matrix::zeros(n, n);
    for i in 0..half {
        j[(i, half + i)] = 1.0;
        j[(half + i, i)] = -1.0;
    }
    j
}

/// Fully symmetric random 3-tensor g[i][j][k] (all index permutations).
fn random_symmetric_tensor(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut g = vec![0.0; n * n * n];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = rng.random_range(-scale..scale);
                for (a, b, c) in [
                    (i, j, k),
                    (i, k, j),
                    (j, i, k),
                    (j, k, i),
                    (k, i, j),
                    (k, j, i),
                ] {
                    g[(a * n + b) * n + c] = v;
                }
            }
        }
    }
    g
}

/// Quadratic field with exactly paired Jacobian spectrum at every point:
/// f = J^{-1} grad H for a random cubic H, so f'(x) = J^{-1} (G:x + S) is
/// skew-inverse times symmetric everywhere. n must be even.
pub fn random_quadratic_d_field(rng: &mut ChaCha8Rng, n: usize) -> QuadraticFieldSpec {
    assert!(n % 2 == 0, "paired-spectrum quadratic fields need even dimension");
    let j = canonical_skew(n);
    let j_inv = j.inverse().expect("canonical skew matrix is invertible");
    let g = random_symmetric_tensor(rng, n, 0.5);
    let s = random_symmetric(rng, n);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();

    // grad H has quadratic part with tensor g/2; push J^{-1} through.
    let mut q = vec![0.0; n * n * n];
    for i in 0..n {
        for jj in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += j_inv[(i, m)] * 0.5 * g[(m * n + jj) * n + k];
                }
                q[(i * n + jj) * n + k] = acc;
            }
        }
    }
    QuadraticFieldSpec::new(n, q, j_inv.mul(&s), j_inv.matvec(&d))
        .expect("constructed shapes are consistent")
}

/// Generic quadratic field without structure (not volume preserving in
/// general).
pub fn random_quadratic_field(rng: &mut ChaCha8Rng, n: usize) -> QuadraticFieldSpec {
    let q = (0..n * n * n)
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let l = random_matrix(rng, n, n, 1.0);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    QuadraticFieldSpec::new(n, q, l, d).expect("constructed shapes are consistent")
}

/// Generic quadratic map R^m -> R^n.
pub fn random_quadratic_map(rng: &mut ChaCha8Rng, m: usize, n: usize) -> QuadraticMap {
    let q = (0..n * m * m)
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let l = random_matrix(rng, n, m, 1.0);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    QuadraticMap::new(m, n, q, l, d).expect("constructed shapes are consistent")
}
