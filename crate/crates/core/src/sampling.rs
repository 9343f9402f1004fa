//! Random input/output/timestep selection and the probabilistic size
//! bounds governing how much must be sampled to keep the dominant modes.
//!
//! All draws use ChaCha8 seeded from a caller-supplied 64-bit seed, so a
//! selection is reproducible byte for byte across platforms from the seed
//! alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::Selection;

/// Inputs to the column-count bound for one ensemble.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    /// Assumed rank of the ensemble (number of spanning modes).
    pub l: usize,
    /// Minimum fraction of columns in which any spanning mode is present.
    pub eps_bar: f64,
    /// Acceptable probability of drawing a rank-deficient sample.
    pub beta: f64,
    /// Optional per-column sampling probabilities (must sum to 1). When
    /// sampling non-uniformly the caller supplies the re-weighted presence
    /// fraction as `eps_bar`; the bound formulas are unchanged.
    pub weights: Option<Vec<f64>>,
}

impl BoundInputs {
    pub fn new(l: usize, eps_bar: f64, beta: f64) -> Result<Self> {
        let b = Self {
            l,
            eps_bar,
            beta,
            weights: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 {
            return Err(Error::InvalidParameter("bound rank l must be >= 1".into()));
        }
        if !(self.eps_bar > 0.0 && self.eps_bar <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_bar must lie in (0, 1], got {}",
                self.eps_bar
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidParameter("weights must be nonnegative".into()));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "weights must sum to 1, got {sum}"
                )));
            }
        }
        Ok(())
    }
}

/// Minimum column count `ceil(max(l, ln(l / beta) / eps_bar))` that keeps the
/// rank-deficiency probability of a uniform sample below `beta`.
///
/// The bound is derived with the natural logarithm; equality after the
/// ceiling is accepted even though the underlying statement is strict.
pub fn min_columns(b: &BoundInputs) -> Result<usize> {
    min_columns_with_base(b, std::f64::consts::E)
}

/// Same bound with an alternative logarithm base, for sensitivity studies.
pub fn min_columns_with_base(b: &BoundInputs, base: f64) -> Result<usize> {
    b.validate()?;
    if !(base > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "log base must exceed 1, got {base}"
        )));
    }
    let log_term = (b.l as f64 / b.beta).log(base) / b.eps_bar;
    Ok((b.l as f64).max(log_term).ceil() as usize)
}

/// Upper bound `min(1, l (1 - eps_bar)^M)` on the probability that an
/// M-column sample misses at least one spanning mode.
pub fn rank_failure_bound(b: &BoundInputs, m: usize) -> Result<f64> {
    b.validate()?;
    Ok((b.l as f64 * (1.0 - b.eps_bar).powi(m as i32)).min(1.0))
}

/// Probability `(1 - (1 - beta)^2)^K` that all `K` independent draws of a
/// (primal, adjoint) ensemble pair come out rank-deficient.
pub fn combined_failure(beta: f64, trials: usize) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    if trials < 1 {
        return Err(Error::InvalidParameter("trial count must be >= 1".into()));
    }
    let gamma = 1.0 - (1.0 - beta) * (1.0 - beta);
    Ok(gamma.powi(trials as i32))
}

/// Everything needed to (re)draw a selection: the pools, the draw sizes,
/// the seed, and optional bound bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub inputs: usize,
    pub outputs: usize,
    pub primal_pool: Vec<usize>,
    pub adjoint_pool: Vec<usize>,
    pub pick_inputs: usize,
    pub pick_outputs: usize,
    pub pick_primal_steps: usize,
    pub pick_adjoint_steps: usize,
    pub seed: u64,
    /// Input-column sampling probabilities; uniform when absent.
    pub input_weights: Option<Vec<f64>>,
    /// Draw i.i.d. instead of without replacement; duplicates collapse, so
    /// the realized pick can come out smaller than requested.
    pub with_replacement: bool,
    pub bounds: Option<PlanBounds>,
    /// Number of repeated draws budgeted for consistency checking.
    pub trials: usize,
}

/// Bound bookkeeping attached to a plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBounds {
    pub bound_m_primal: usize,
    pub bound_m_adjoint: usize,
    pub beta: f64,
    /// `1 - (1 - beta)^2`, the per-draw failure budget for the pair.
    pub gamma: f64,
}

impl SamplingPlan {
    pub fn new(
        inputs: usize,
        outputs: usize,
        primal_pool: Vec<usize>,
        adjoint_pool: Vec<usize>,
        pick_inputs: usize,
        pick_outputs: usize,
        pick_primal_steps: usize,
        pick_adjoint_steps: usize,
        seed: u64,
    ) -> Self {
        Self {
            inputs,
            outputs,
            primal_pool,
            adjoint_pool,
            pick_inputs,
            pick_outputs,
            pick_primal_steps,
            pick_adjoint_steps,
            seed,
            input_weights: None,
            with_replacement: false,
            bounds: None,
            trials: 1,
        }
    }

    /// Attach the rank-preservation bounds for rank `l`, presence fractions
    /// `eps_x` / `eps_y`, and failure budget `beta`.
    pub fn with_bounds(mut self, l: usize, eps_x: f64, eps_y: f64, beta: f64) -> Result<Self> {
        let bound_m_primal = min_columns(&BoundInputs::new(l, eps_x, beta)?)?;
        let bound_m_adjoint = min_columns(&BoundInputs::new(l, eps_y, beta)?)?;
        self.bounds = Some(PlanBounds {
            bound_m_primal,
            bound_m_adjoint,
            beta,
            gamma: 1.0 - (1.0 - beta) * (1.0 - beta),
        });
        Ok(self)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut plan = self.clone();
        plan.seed = seed;
        plan
    }

    /// Sampled primal column budget `r * m1`.
    pub fn primal_budget(&self) -> usize {
        self.pick_inputs * self.pick_primal_steps
    }

    /// Sampled adjoint column budget `s * m2`.
    pub fn adjoint_budget(&self) -> usize {
        self.pick_outputs * self.pick_adjoint_steps
    }

    /// True when both sampled budgets meet the attached bounds.
    pub fn is_bound_satisfying(&self) -> bool {
        match &self.bounds {
            None => false,
            Some(b) => {
                self.primal_budget() >= b.bound_m_primal
                    && self.adjoint_budget() >= b.bound_m_adjoint
            }
        }
    }

    /// Draw the selection this plan describes. Deterministic in the seed.
    pub fn draw(&self) -> Result<Selection> {
        draw_selection(self)
    }
}

/// Sample the four index subsets of a plan. Sampling is without replacement
/// (unless the plan opts into replacement), uniform unless input weights are
/// given, and every returned index list is sorted ascending.
pub fn draw_selection(plan: &SamplingPlan) -> Result<Selection> {
    if let Some(w) = &plan.input_weights {
        if w.len() != plan.inputs {
            return Err(Error::InvalidParameter(format!(
                "expected {} input weights, got {}",
                plan.inputs,
                w.len()
            )));
        }
        BoundInputs {
            l: 1,
            eps_bar: 1.0,
            beta: 0.5,
            weights: Some(w.clone()),
        }
        .validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let input_pick = sample_pool(
        &(0..plan.inputs).collect::<Vec<_>>(),
        plan.pick_inputs,
        plan.input_weights.as_deref(),
        plan.with_replacement,
        &mut rng,
        "input columns",
    )?;
    let output_pick = sample_pool(
        &(0..plan.outputs).collect::<Vec<_>>(),
        plan.pick_outputs,
        None,
        plan.with_replacement,
        &mut rng,
        "output rows",
    )?;
    let primal_steps = sample_pool(
        &plan.primal_pool,
        plan.pick_primal_steps,
        None,
        plan.with_replacement,
        &mut rng,
        "primal steps",
    )?;
    let adjoint_steps = sample_pool(
        &plan.adjoint_pool,
        plan.pick_adjoint_steps,
        None,
        plan.with_replacement,
        &mut rng,
        "adjoint steps",
    )?;
    Ok(Selection {
        seed: plan.seed,
        input_pick,
        output_pick,
        primal_steps,
        adjoint_steps,
    })
}

/// Draw `count` items from `pool`, sorted ascending. With `with_replacement`
/// the draws are i.i.d. and duplicates collapse afterwards.
pub fn sample_pool(
    pool: &[usize],
    count: usize,
    weights: Option<&[f64]>,
    with_replacement: bool,
    rng: &mut ChaCha8Rng,
    context: &str,
) -> Result<Vec<usize>> {
    if count > pool.len() {
        return Err(Error::PoolExhausted {
            context: context.into(),
            requested: count,
            available: pool.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != pool.len() {
            return Err(Error::InvalidParameter(format!(
                "{context}: one weight per pool entry required"
            )));
        }
    }
    let mut picked: Vec<usize> = if with_replacement {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(weighted_index(pool.len(), weights, None, rng));
        }
        out.sort_unstable();
        out.dedup();
        out
    } else {
        let mut taken = vec![false; pool.len()];
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let idx = weighted_index(pool.len(), weights, Some(&taken), rng);
            taken[idx] = true;
            out.push(idx);
        }
        out.sort_unstable();
        out
    };
    for idx in picked.iter_mut() {
        *idx = pool[*idx];
    }
    Ok(picked)
}

// One categorical draw over the non-taken entries. Uniform when no weights.
fn weighted_index(
    len: usize,
    weights: Option<&[f64]>,
    taken: Option<&[bool]>,
    rng: &mut ChaCha8Rng,
) -> usize {
    let available = |i: usize| taken.map_or(true, |t| !t[i]);
    match weights {
        None => {
            let remaining: Vec<usize> = (0..len).filter(|&i| available(i)).collect();
            remaining[rng.gen_range(0..remaining.len())]
        }
        Some(w) => {
            let total: f64 = (0..len).filter(|&i| available(i)).map(|i| w[i]).sum();
            if total <= 0.0 {
                // All remaining weight exhausted; fall back to uniform.
                let remaining: Vec<usize> = (0..len).filter(|&i| available(i)).collect();
                return remaining[rng.gen_range(0..remaining.len())];
            }
            let mut target = rng.gen::<f64>() * total;
            let mut last = 0;
            for i in (0..len).filter(|&i| available(i)) {
                last = i;
                target -= w[i];
                if target <= 0.0 {
                    return i;
                }
            }
            last
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(p: usize, q: usize, r: usize, s: usize, m1: usize, m2: usize, seed: u64) -> SamplingPlan {
        SamplingPlan::new(
            p,
            q,
            (0..10).collect(),
            (0..10).collect(),
            r,
            s,
            m1,
            m2,
            seed,
        )
    }

    #[test]
    fn min_columns_examples() {
        // l=5, eps=1, beta=0.05: max(5, ln(100)) = max(5, 4.605...) -> 5.
        let b = BoundInputs::new(5, 1.0, 0.05).unwrap();
        assert_eq!(min_columns(&b).unwrap(), 5);
        // l=10, eps=0.1, beta=0.1: 10 ln(100) = 46.05... -> 47.
        let b = BoundInputs::new(10, 0.1, 0.1).unwrap();
        assert_eq!(min_columns(&b).unwrap(), 47);
        // Log term collapses below l.
        let b = BoundInputs::new(3, 1.0, 0.99).unwrap();
        assert_eq!(min_columns(&b).unwrap(), 3);
    }

    #[test]
    fn min_columns_monotonicity() {
        let base = BoundInputs::new(8, 0.3, 0.1).unwrap();
        let m0 = min_columns(&base).unwrap();
        for (eps, beta, l) in [(0.5, 0.1, 8), (0.3, 0.3, 8), (0.3, 0.1, 12)] {
            let b = BoundInputs::new(l, eps, beta).unwrap();
            let m = min_columns(&b).unwrap();
            if eps > base.eps_bar || beta > base.beta {
                assert!(m <= m0, "bound must not grow when eps or beta grows");
            }
            if l > base.l {
                assert!(m >= m0, "bound must not shrink when l grows");
            }
        }
    }

    #[test]
    fn rank_failure_bound_examples() {
        let b = BoundInputs::new(3, 1.0, 0.1).unwrap();
        assert_eq!(rank_failure_bound(&b, 1).unwrap(), 0.0);
        let b = BoundInputs::new(4, 0.5, 0.1).unwrap();
        assert!((rank_failure_bound(&b, 3).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(rank_failure_bound(&b, 0).unwrap(), 1.0);
    }

    #[test]
    fn combined_failure_examples() {
        assert!((combined_failure(0.1, 1).unwrap() - 0.19).abs() < 1e-15);
        assert!((combined_failure(0.1, 2).unwrap() - 0.0361).abs() < 1e-15);
        assert!(combined_failure(0.5, 20).unwrap() < 0.004);
    }

    #[test]
    fn full_pool_is_identity_regardless_of_seed() {
        for seed in [0u64, 1, 99999] {
            let mut p = plan(4, 3, 4, 3, 10, 10, seed);
            p.primal_pool = (5..15).collect();
            p.adjoint_pool = (0..10).map(|i| i * 2).collect();
            let sel = p.draw().unwrap();
            assert_eq!(sel.input_pick, vec![0, 1, 2, 3]);
            assert_eq!(sel.output_pick, vec![0, 1, 2]);
            assert_eq!(sel.primal_steps, (5..15).collect::<Vec<_>>());
            assert_eq!(sel.adjoint_steps, (0..10).map(|i| i * 2).collect::<Vec<_>>());
        }
    }

    #[test]
    fn same_seed_same_selection() {
        let p = plan(8, 8, 3, 3, 4, 4, 1234);
        assert_eq!(p.draw().unwrap(), p.draw().unwrap());
        let other = p.with_seed(1235).draw().unwrap();
        assert_ne!(p.draw().unwrap(), other);
    }

    #[test]
    fn uniform_frequencies() {
        let mut counts = [0usize; 4];
        for seed in 0..10_000u64 {
            let sel = plan(4, 4, 1, 1, 1, 1, seed).draw().unwrap();
            counts[sel.input_pick[0]] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.25).abs() <= 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn draws_are_sorted_without_duplicates() {
        for seed in 0..50u64 {
            let sel = plan(9, 9, 5, 4, 6, 3, seed).draw().unwrap();
            assert!(sel.input_pick.windows(2).all(|w| w[0] < w[1]));
            assert!(sel.output_pick.windows(2).all(|w| w[0] < w[1]));
            assert!(sel.primal_steps.windows(2).all(|w| w[0] < w[1]));
            assert!(sel.adjoint_steps.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn oversized_request_fails() {
        let p = plan(3, 3, 4, 1, 1, 1, 0);
        assert!(matches!(p.draw(), Err(Error::PoolExhausted { .. })));
    }

    #[test]
    fn replacement_mode_collapses_duplicates() {
        let mut p = plan(3, 3, 3, 3, 3, 3, 7);
        p.with_replacement = true;
        let sel = p.draw().unwrap();
        assert!(sel.input_pick.windows(2).all(|w| w[0] < w[1]));
        assert!(sel.input_pick.len() <= 3);
    }

    #[test]
    fn bound_satisfying_flag() {
        let p = plan(10, 10, 3, 3, 4, 4, 5)
            .with_bounds(5, 1.0, 1.0, 0.1)
            .unwrap();
        // Budgets 12 >= bound 5 on both sides.
        assert!(p.is_bound_satisfying());
        let tight = plan(10, 10, 1, 1, 2, 2, 5)
            .with_bounds(5, 1.0, 1.0, 0.1)
            .unwrap();
        assert!(!tight.is_bound_satisfying());
        let gamma = tight.bounds.as_ref().unwrap().gamma;
        assert!((gamma - (1.0 - 0.81)).abs() < 1e-15);
    }

    // Synthetic rank-l ensemble with a prescribed per-mode presence pattern.
    // Returns (presence sets, per-column mode lists).
    fn presence_ensemble(
        l: usize,
        n_cols: usize,
        eps: f64,
        seed: u64,
    ) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_mode = ((eps * n_cols as f64).round() as usize).max(1);
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
        for mode in 0..l {
            let mut cols: Vec<usize> = (0..n_cols).collect();
            for i in (1..cols.len()).rev() {
                let j = rng.gen_range(0..=i);
                cols.swap(i, j);
            }
            for &c in cols.iter().take(per_mode) {
                columns[c].push(mode);
            }
        }
        columns
    }

    #[test]
    fn empirical_rank_law_respects_bound() {
        let (l, n_cols, eps) = (6usize, 60usize, 0.4);
        let columns = presence_ensemble(l, n_cols, eps, 3);
        let trials = 2000;
        for m in [6usize, 10, 14] {
            let mut failures = 0;
            let mut rng = ChaCha8Rng::seed_from_u64(999 + m as u64);
            for _ in 0..trials {
                let mut present = vec![false; l];
                for _ in 0..m {
                    let c = rng.gen_range(0..n_cols);
                    for &mode in &columns[c] {
                        present[mode] = true;
                    }
                }
                if present.iter().any(|&p| !p) {
                    failures += 1;
                }
            }
            let empirical = failures as f64 / trials as f64;
            let bound = (l as f64) * (1.0 - eps).powi(m as i32);
            let sigma = (bound.min(1.0) * (1.0 - bound.min(1.0)).max(0.0) / trials as f64)
                .sqrt()
                .max(1.0 / trials as f64);
            assert!(
                empirical <= bound.min(1.0) + 3.0 * sigma,
                "M={m}: empirical {empirical} vs bound {bound}"
            );
        }
    }

    #[test]
    fn weighting_toward_rare_mode_lowers_failures() {
        // Mode 0 is rare (present in 10% of columns); the others are common.
        let l = 3usize;
        let n_cols = 50usize;
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
        for c in 0..n_cols {
            if c < 5 {
                columns[c].push(0);
            }
            if c % 2 == 0 {
                columns[c].push(1);
            }
            if c % 2 == 1 {
                columns[c].push(2);
            }
            if c % 3 == 0 {
                columns[c].push(1);
            }
        }
        let weights: Vec<f64> = (0..n_cols)
            .map(|c| if c < 5 { 4.0 } else { 1.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();

        let trials = 3000;
        let m = 8usize;
        let mut fail = [0usize; 2];
        for (which, w) in [None, Some(weights.as_slice())].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(4096 + which as u64);
            for _ in 0..trials {
                let mut present = vec![false; l];
                for _ in 0..m {
                    let c = weighted_index(n_cols, w, None, &mut rng);
                    for &mode in &columns[c] {
                        present[mode] = true;
                    }
                }
                if present.iter().any(|&p| !p) {
                    fail[which] += 1;
                }
            }
        }
        assert!(
            fail[1] < fail[0],
            "weighted failures {} should undercut uniform {}",
            fail[1],
            fail[0]
        );
    }
}
