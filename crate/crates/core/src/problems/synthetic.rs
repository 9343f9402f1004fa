//! Synthetic systems with a prescribed eigenstructure: a handful of
//! dominant modes over a small-magnitude tail, wrapped in a random
//! well-conditioned basis. The exact eigenpairs come back alongside the
//! system for use as test oracles.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, C64};
use crate::snapshots::LtiSystem;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// State dimension.
    pub n: usize,
    /// Dominant eigenvalues as `(re, im)`; complex entries must appear with
    /// their conjugates so the realized system stays real.
    pub dominant: Vec<(f64, f64)>,
    /// Magnitude scale of the remaining eigenvalues.
    pub tail_magnitude: f64,
    #[serde(default = "default_port_count")]
    pub inputs: usize,
    #[serde(default = "default_port_count")]
    pub outputs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_port_count() -> usize {
    1
}

fn default_dt() -> f64 {
    1.0
}

impl SyntheticConfig {
    pub fn new(n: usize, dominant: &[(f64, f64)], tail_magnitude: f64, seed: u64) -> Self {
        Self {
            n,
            dominant: dominant.to_vec(),
            tail_magnitude,
            inputs: 1,
            outputs: 1,
            seed,
            dt: 1.0,
        }
    }
}

/// Exact eigenstructure of a synthetic system, in the same mode order as
/// the generated eigenvalue list (descending modulus, conjugate pairs
/// adjacent with positive imaginary part first).
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns (`A v = lambda v`).
    pub right_vectors: DMatrix<C64>,
    /// Left eigenvectors as columns, bilinear pairing (`x^T A = lambda x^T`).
    pub left_vectors: DMatrix<C64>,
    /// The real basis `S` with `A = S D S^-1`.
    pub basis: DMatrix<f64>,
}

const COND_CAP: f64 = 1e6;
const BASIS_ATTEMPTS: usize = 20;

/// Build `A = S diag(dominant, tail) S^-1` with a random basis of condition
/// below 1e6 (resampled on failure), plus generic dense `B` and `C` so every
/// mode is reachable and observable from every column.
pub fn build_synthetic(cfg: &SyntheticConfig) -> Result<(LtiSystem, GroundTruth)> {
    let n_dom = cfg.dominant.len();
    if cfg.n == 0 || n_dom == 0 || n_dom > cfg.n {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= dominant count ({n_dom}) <= n ({})",
            cfg.n
        )));
    }
    if cfg.inputs == 0 || cfg.outputs == 0 {
        return Err(Error::InvalidParameter(
            "synthetic systems need at least one input and output".into(),
        ));
    }
    let mut dominant: Vec<C64> = cfg.dominant.iter().map(|&(re, im)| C64::new(re, im)).collect();
    let min_dom = dominant.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if dominant.iter().any(|z| z.norm() >= 1.0) {
        return Err(Error::InvalidParameter(
            "dominant eigenvalues must have modulus below 1".into(),
        ));
    }
    if cfg.n > n_dom && !(cfg.tail_magnitude >= 0.0 && cfg.tail_magnitude < min_dom) {
        return Err(Error::InvalidParameter(format!(
            "tail magnitude {} must stay below the smallest dominant modulus {min_dom}",
            cfg.tail_magnitude
        )));
    }
    for i in 0..dominant.len() {
        for j in (i + 1)..dominant.len() {
            if dominant[i] == dominant[j] {
                return Err(Error::InvalidParameter(
                    "dominant eigenvalues must be distinct".into(),
                ));
            }
        }
        if dominant[i].im != 0.0
            && !dominant.iter().any(|z| *z == dominant[i].conj())
        {
            return Err(Error::InvalidParameter(format!(
                "complex eigenvalue {} lacks its conjugate",
                dominant[i]
            )));
        }
    }
    // Descending modulus, positive imaginary part first within a pair.
    dominant.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });

    let tail_count = cfg.n - n_dom;
    let tail: Vec<f64> = (0..tail_count)
        .map(|k| {
            let scale = 1.0 - 0.5 * k as f64 / tail_count.max(1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * cfg.tail_magnitude * scale
        })
        .collect();

    // Real block-diagonal D in the sorted mode order.
    let mut d = DMatrix::zeros(cfg.n, cfg.n);
    let mut eigenvalues = Vec::with_capacity(cfg.n);
    let mut pair_start = Vec::new();
    let mut col = 0usize;
    let mut i = 0usize;
    while i < n_dom {
        let lam = dominant[i];
        if lam.im == 0.0 {
            d[(col, col)] = lam.re;
            eigenvalues.push(lam);
            col += 1;
            i += 1;
        } else {
            d[(col, col)] = lam.re;
            d[(col, col + 1)] = lam.im;
            d[(col + 1, col)] = -lam.im;
            d[(col + 1, col + 1)] = lam.re;
            eigenvalues.push(lam);
            eigenvalues.push(lam.conj());
            pair_start.push(col);
            col += 2;
            i += 2;
        }
    }
    for &t in &tail {
        d[(col, col)] = t;
        eigenvalues.push(C64::new(t, 0.0));
        col += 1;
    }

    // Random basis, resampled until it is comfortably invertible.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last_cond = f64::INFINITY;
    let mut chosen: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    for _ in 0..BASIS_ATTEMPTS {
        let s = DMatrix::from_fn(cfg.n, cfg.n, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
            + DMatrix::identity(cfg.n, cfg.n) * 2.0;
        let svd = numerics::svd(&s)?;
        let smin = svd.singular_values[cfg.n - 1];
        last_cond = if smin > 0.0 {
            svd.singular_values[0] / smin
        } else {
            f64::INFINITY
        };
        if last_cond <= COND_CAP {
            let s_inv = numerics::solve_linear(&s, &DMatrix::identity(cfg.n, cfg.n))?;
            chosen = Some((s, s_inv));
            break;
        }
    }
    let (s, s_inv) = chosen.ok_or(Error::ConditioningFailure {
        attempts: BASIS_ATTEMPTS,
        cond: last_cond,
    })?;

    let a = &s * &d * &s_inv;
    let b = DMatrix::from_fn(cfg.n, cfg.inputs, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let c = DMatrix::from_fn(cfg.outputs, cfg.n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);

    // Exact eigenvectors from the basis columns / inverse rows.
    let mut right = DMatrix::zeros(cfg.n, cfg.n);
    let mut left = DMatrix::zeros(cfg.n, cfg.n);
    let mut k = 0usize;
    while k < cfg.n {
        if eigenvalues[k].im > 0.0 {
            for row in 0..cfg.n {
                right[(row, k)] = C64::new(s[(row, k)], s[(row, k + 1)]);
                right[(row, k + 1)] = right[(row, k)].conj();
                left[(row, k)] = C64::new(s_inv[(k, row)], -s_inv[(k + 1, row)]);
                left[(row, k + 1)] = left[(row, k)].conj();
            }
            k += 2;
        } else {
            for row in 0..cfg.n {
                right[(row, k)] = C64::new(s[(row, k)], 0.0);
                left[(row, k)] = C64::new(s_inv[(k, row)], 0.0);
            }
            k += 1;
        }
    }

    let sys = LtiSystem::new(a, b, c, cfg.dt)?;
    Ok((
        sys,
        GroundTruth {
            eigenvalues,
            right_vectors: right,
            left_vectors: left,
            basis: s,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::hausdorff_distance;
    use crate::numerics::complexify;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_case() {
        let cfg = SyntheticConfig::new(1, &[(0.9, 0.0)], 0.0, 3);
        let (sys, truth) = build_synthetic(&cfg).unwrap();
        assert_relative_eq!(sys.a[(0, 0)], 0.9, epsilon = 1e-12);
        assert_eq!(truth.eigenvalues[0], C64::new(0.9, 0.0));
    }

    #[test]
    fn spectrum_matches_request() {
        let cfg = SyntheticConfig::new(10, &[(0.9, 0.0), (0.5, 0.0)], 1e-3, 11);
        let (sys, truth) = build_synthetic(&cfg).unwrap();
        let computed = numerics::eigenvalues_only(&sys.a).unwrap();
        let d = hausdorff_distance(&computed, &truth.eigenvalues);
        assert!(d <= 1e-10, "distance {d}");
    }

    #[test]
    fn conjugate_pair_gives_real_system() {
        let cfg = SyntheticConfig::new(6, &[(0.8, 0.1), (0.8, -0.1)], 1e-4, 7);
        let (sys, truth) = build_synthetic(&cfg).unwrap();
        assert_eq!(truth.eigenvalues[0], C64::new(0.8, 0.1));
        assert_eq!(truth.eigenvalues[1], C64::new(0.8, -0.1));
        // A is real by construction; its complex spectrum contains the pair.
        let computed = numerics::eigenvalues_only(&sys.a).unwrap();
        assert!((computed[0] - truth.eigenvalues[0]).norm() <= 1e-10);
    }

    #[test]
    fn ground_truth_vectors_are_eigenvectors() {
        let cfg = SyntheticConfig::new(8, &[(0.9, 0.0), (0.7, 0.2), (0.7, -0.2)], 1e-3, 19);
        let (sys, truth) = build_synthetic(&cfg).unwrap();
        let ac = complexify(&sys.a);
        let scale = sys.a.norm();
        for k in 0..8 {
            let v = truth.right_vectors.column(k).clone_owned();
            let res = (&ac * &v - &v * truth.eigenvalues[k]).norm() / v.norm();
            assert!(res <= 1e-10 * scale, "right vector {k}: {res}");
            let w = truth.left_vectors.column(k).clone_owned();
            let res = (ac.transpose() * &w - &w * truth.eigenvalues[k]).norm() / w.norm();
            assert!(res <= 1e-10 * scale, "left vector {k}: {res}");
        }
    }

    #[test]
    fn missing_conjugate_rejected() {
        let cfg = SyntheticConfig::new(4, &[(0.8, 0.1)], 1e-3, 1);
        assert!(build_synthetic(&cfg).is_err());
    }

    #[test]
    fn oversized_tail_rejected() {
        let cfg = SyntheticConfig::new(4, &[(0.5, 0.0)], 0.9, 1);
        assert!(build_synthetic(&cfg).is_err());
    }
}
