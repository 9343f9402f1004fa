//! Error metrics, eigenvalue comparison tables, and cost accounting for
//! reduced models against the full system and against each other.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::{self, match_eigenvalues, Excitation, ModalRom};
use crate::numerics::C64;
use crate::pod::BpodRom;
use crate::snapshots::LtiSystem;

/// Anything that can play the reduced side of a full-vs-reduced comparison:
/// it simulates in its own coordinates and reconstructs full-order states.
pub trait ReducedModel {
    fn rom_order(&self) -> usize;
    /// Free response from a full-order initial state. Returns the outputs
    /// (`q x (steps+1)`) and reconstructed states (`N x (steps+1)`).
    fn response_to_initial(
        &self,
        x0: &DVector<f64>,
        steps: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    /// Forced response from rest; `u` is `p x steps`.
    fn response_to_inputs(&self, u: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

impl ReducedModel for ModalRom {
    fn rom_order(&self) -> usize {
        self.order()
    }

    fn response_to_initial(
        &self,
        x0: &DVector<f64>,
        steps: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let traj = modal::rom_simulate(self, Excitation::InitialState(x0), steps)?;
        let states = modal::reconstruct_states(self, &traj.modal_states);
        Ok((traj.outputs, states))
    }

    fn response_to_inputs(&self, u: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let traj = modal::rom_simulate(self, Excitation::Inputs(u), u.ncols())?;
        let states = modal::reconstruct_states(self, &traj.modal_states);
        Ok((traj.outputs, states))
    }
}

impl ReducedModel for BpodRom {
    fn rom_order(&self) -> usize {
        self.system.state_dim()
    }

    fn response_to_initial(
        &self,
        x0: &DVector<f64>,
        steps: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let t_l = self.basis.t_l.as_ref().expect("balanced basis has T_l");
        let xr0 = t_l.transpose() * x0;
        self.simulate_reduced(xr0, None, steps)
    }

    fn response_to_inputs(&self, u: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let order = self.system.state_dim();
        self.simulate_reduced(DVector::zeros(order), Some(u), u.ncols())
    }
}

impl BpodRom {
    fn simulate_reduced(
        &self,
        mut xr: DVector<f64>,
        inputs: Option<&DMatrix<f64>>,
        steps: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let q = self.system.output_dim();
        let n = self.basis.t_r.nrows();
        let mut outputs = DMatrix::zeros(q, steps + 1);
        let mut states = DMatrix::zeros(n, steps + 1);
        outputs.set_column(0, &(&self.system.c * &xr));
        states.set_column(0, &(&self.basis.t_r * &xr));
        for k in 1..=steps {
            xr = &self.system.a * xr;
            if let Some(u) = inputs {
                xr += &self.system.b * u.column(k - 1);
            }
            outputs.set_column(k, &(&self.system.c * &xr));
            states.set_column(k, &(&self.basis.t_r * &xr));
        }
        Ok((outputs, states))
    }
}

/// How to excite the full and reduced systems for error evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationSpec {
    /// Impulse responses: each column of `B` as an initial state.
    Impulses,
    /// Seeded unit-variance Gaussian forcing shared by both systems.
    Noise { seed: u64, count: usize },
}

/// Per-step error aggregates over one series.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ErrorAggregates {
    /// Mean of the per-step relative errors over the whole horizon.
    pub mean_whole: f64,
    /// Mean over the post-transient window (steps past 10% of the horizon).
    pub mean_post_transient: f64,
    /// Frobenius-norm ratio over the stacked series.
    pub frobenius_whole: f64,
    pub frobenius_post_transient: f64,
}

/// Relative output/state error series of a reduced model, averaged across
/// excitations. Steps with zero true norm are flagged, not zeroed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub e_output: Vec<f64>,
    pub e_state: Vec<f64>,
    pub flagged_output: Vec<usize>,
    pub flagged_state: Vec<usize>,
    pub output: ErrorAggregates,
    pub state: ErrorAggregates,
}

/// Simulate both systems under the same excitation set and report relative
/// output and state errors per step plus aggregates.
pub fn compare_outputs(
    full: &LtiSystem,
    reduced: &dyn ReducedModel,
    excitation: &ExcitationSpec,
    steps: usize,
) -> Result<ErrorSeries> {
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    let mut out_true: Vec<DMatrix<f64>> = Vec::new();
    let mut out_red: Vec<DMatrix<f64>> = Vec::new();
    let mut st_true: Vec<DMatrix<f64>> = Vec::new();
    let mut st_red: Vec<DMatrix<f64>> = Vec::new();

    match excitation {
        ExcitationSpec::Impulses => {
            for j in 0..full.input_dim() {
                let x0 = full.b.column(j).clone_owned();
                let (y_t, x_t) = simulate_full_initial(full, &x0, steps);
                let (y_r, x_r) = reduced.response_to_initial(&x0, steps)?;
                out_true.push(y_t);
                out_red.push(y_r);
                st_true.push(x_t);
                st_red.push(x_r);
            }
        }
        ExcitationSpec::Noise { seed, count } => {
            for i in 0..*count {
                let u = gaussian_inputs(full.input_dim(), steps, seed.wrapping_add(i as u64));
                let (y_t, x_t) = simulate_full_forced(full, &u);
                let (y_r, x_r) = reduced.response_to_inputs(&u)?;
                out_true.push(y_t);
                out_red.push(y_r);
                st_true.push(x_t);
                st_red.push(x_r);
            }
        }
    }

    let (e_output, flagged_output, output) = error_series(&out_true, &out_red, steps);
    let (e_state, flagged_state, state) = error_series(&st_true, &st_red, steps);
    Ok(ErrorSeries {
        e_output,
        e_state,
        flagged_output,
        flagged_state,
        output,
        state,
    })
}

fn simulate_full_initial(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    steps: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut x = x0.clone();
    let mut outputs = DMatrix::zeros(sys.output_dim(), steps + 1);
    let mut states = DMatrix::zeros(sys.state_dim(), steps + 1);
    outputs.set_column(0, &(&sys.c * &x));
    states.set_column(0, &x);
    for k in 1..=steps {
        x = &sys.a * x;
        outputs.set_column(k, &(&sys.c * &x));
        states.set_column(k, &x);
    }
    (outputs, states)
}

fn simulate_full_forced(sys: &LtiSystem, u: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let steps = u.ncols();
    let mut x = DVector::zeros(sys.state_dim());
    let mut outputs = DMatrix::zeros(sys.output_dim(), steps + 1);
    let mut states = DMatrix::zeros(sys.state_dim(), steps + 1);
    for k in 1..=steps {
        x = &sys.a * x + &sys.b * u.column(k - 1);
        outputs.set_column(k, &(&sys.c * &x));
        states.set_column(k, &x);
    }
    (outputs, states)
}

// Unit-variance Gaussian forcing via Box-Muller over the seeded generator.
fn gaussian_inputs(p: usize, steps: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(p, steps, |_, _| {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

fn error_series(
    truths: &[DMatrix<f64>],
    reduceds: &[DMatrix<f64>],
    steps: usize,
) -> (Vec<f64>, Vec<usize>, ErrorAggregates) {
    let cols = steps + 1;
    let mut per_step = vec![0.0_f64; cols];
    let mut flagged = Vec::new();
    for k in 0..cols {
        let mut sum = 0.0;
        let mut defined = true;
        for (t, r) in truths.iter().zip(reduceds) {
            let denom = t.column(k).norm();
            if denom == 0.0 {
                defined = false;
                break;
            }
            sum += (t.column(k) - r.column(k)).norm() / denom;
        }
        if defined {
            per_step[k] = sum / truths.len() as f64;
        } else {
            per_step[k] = f64::NAN;
            flagged.push(k);
        }
    }

    let transient_cut = cols.div_ceil(10);
    let mean_over = |range: std::ops::Range<usize>| {
        let vals: Vec<f64> = range
            .filter(|k| !flagged.contains(k))
            .map(|k| per_step[k])
            .collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let frobenius_over = |range: std::ops::Range<usize>| {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in range {
            for (t, r) in truths.iter().zip(reduceds) {
                num += (t.column(k) - r.column(k)).norm_squared();
                den += t.column(k).norm_squared();
            }
        }
        if den == 0.0 {
            f64::NAN
        } else {
            (num / den).sqrt()
        }
    };

    let aggregates = ErrorAggregates {
        mean_whole: mean_over(0..cols),
        mean_post_transient: mean_over(transient_cut..cols),
        frobenius_whole: frobenius_over(0..cols),
        frobenius_post_transient: frobenius_over(transient_cut..cols),
    };
    (per_step, flagged, aggregates)
}

/// One row of an eigenvalue comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenRow {
    pub index: usize,
    pub a: Option<(f64, f64)>,
    pub b: Option<(f64, f64)>,
    pub distance: Option<f64>,
}

/// Greedy-matched eigenvalue table, sorted by descending modulus of side A;
/// unmatched entries of either side are listed after the matched rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenComparison {
    pub rows: Vec<EigenRow>,
    /// Largest distance over matched pairs.
    pub max_distance: f64,
    pub unmatched_a: usize,
    pub unmatched_b: usize,
}

pub fn compare_eigenvalues(a: &[C64], b: &[C64]) -> EigenComparison {
    let pairs = match_eigenvalues(a, b);
    let mut rows: Vec<EigenRow> = pairs
        .iter()
        .map(|p| EigenRow {
            index: 0,
            a: Some((a[p.left].re, a[p.left].im)),
            b: Some((b[p.right].re, b[p.right].im)),
            distance: Some(p.distance),
        })
        .collect();
    rows.sort_by(|x, y| {
        let ma = x.a.map(|(re, im)| C64::new(re, im).norm()).unwrap_or(0.0);
        let mb = y.a.map(|(re, im)| C64::new(re, im).norm()).unwrap_or(0.0);
        mb.partial_cmp(&ma).unwrap()
    });
    let matched_a: Vec<usize> = pairs.iter().map(|p| p.left).collect();
    let matched_b: Vec<usize> = pairs.iter().map(|p| p.right).collect();
    let mut unmatched_a = 0;
    for (i, z) in a.iter().enumerate() {
        if !matched_a.contains(&i) {
            rows.push(EigenRow {
                index: 0,
                a: Some((z.re, z.im)),
                b: None,
                distance: None,
            });
            unmatched_a += 1;
        }
    }
    let mut unmatched_b = 0;
    for (j, z) in b.iter().enumerate() {
        if !matched_b.contains(&j) {
            rows.push(EigenRow {
                index: 0,
                a: None,
                b: Some((z.re, z.im)),
                distance: None,
            });
            unmatched_b += 1;
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row.index = i;
    }
    let max_distance = rows
        .iter()
        .filter_map(|r| r.distance)
        .fold(0.0_f64, f64::max);
    EigenComparison {
        rows,
        max_distance,
        unmatched_a,
        unmatched_b,
    }
}

/// Snapshot-count description of one pipeline: `p` inputs with `m1` primal
/// snapshots each, `q` outputs with `m2` adjoint snapshots each.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PipelineDims {
    pub inputs: usize,
    pub outputs: usize,
    pub primal_snapshots: usize,
    pub adjoint_snapshots: usize,
}

impl PipelineDims {
    pub fn hankel_rows(&self) -> usize {
        self.outputs * self.adjoint_snapshots
    }

    pub fn hankel_cols(&self) -> usize {
        self.inputs * self.primal_snapshots
    }
}

/// Cost accounting for the full pipeline against its sub-sampled variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub full: PipelineDims,
    pub sub: PipelineDims,
    pub state_dim: usize,
    /// `(M1 + M2) p q N^2` markov-parameter flops for the full pipeline.
    pub markov_flops_full: f64,
    /// `(m1 + m2) r s N^2` for the sub-sampled pipeline.
    pub markov_flops_sub: f64,
    pub svd_dims_full: (usize, usize),
    pub svd_dims_sub: (usize, usize),
    /// Hankel assembly flops: entries times the inner dimension `N`.
    pub hankel_flops_full: f64,
    pub hankel_flops_sub: f64,
    /// `markov_flops_sub / markov_flops_full`.
    pub markov_ratio: f64,
    /// `rs/(pq) * m1 m2/(M1 M2)`, the Hankel assembly ratio.
    pub hankel_ratio: f64,
}

pub fn cost_report(full: PipelineDims, sub: PipelineDims, state_dim: usize) -> CostReport {
    let n2 = (state_dim * state_dim) as f64;
    let markov_flops_full =
        (full.primal_snapshots + full.adjoint_snapshots) as f64 * (full.inputs * full.outputs) as f64 * n2;
    let markov_flops_sub =
        (sub.primal_snapshots + sub.adjoint_snapshots) as f64 * (sub.inputs * sub.outputs) as f64 * n2;
    let hankel_flops_full =
        full.hankel_rows() as f64 * full.hankel_cols() as f64 * state_dim as f64;
    let hankel_flops_sub = sub.hankel_rows() as f64 * sub.hankel_cols() as f64 * state_dim as f64;
    let hankel_ratio = (sub.inputs * sub.outputs) as f64 / (full.inputs * full.outputs) as f64
        * (sub.primal_snapshots * sub.adjoint_snapshots) as f64
        / (full.primal_snapshots * full.adjoint_snapshots) as f64;
    CostReport {
        full,
        sub,
        state_dim,
        markov_flops_full,
        markov_flops_sub,
        svd_dims_full: (full.hankel_rows(), full.hankel_cols()),
        svd_dims_sub: (sub.hankel_rows(), sub.hankel_cols()),
        hankel_flops_full,
        hankel_flops_sub,
        markov_ratio: markov_flops_sub / markov_flops_full,
        hankel_ratio,
    }
}

impl CostReport {
    /// `"(qM2 × pM1) : (sm2 × rm1)"`, the SVD problem sizes side by side.
    pub fn size_string(&self) -> String {
        format!(
            "({} × {}) : ({} × {})",
            self.svd_dims_full.0, self.svd_dims_full.1, self.svd_dims_sub.0, self.svd_dims_sub.1
        )
    }
}

/// `index,re_a,im_a,re_b,im_b,distance` rows; empty fields for unmatched sides.
pub fn eigenvalues_csv(cmp: &EigenComparison) -> String {
    let mut out = String::from("index,re_a,im_a,re_b,im_b,distance\n");
    for row in &cmp.rows {
        let fmt_pair = |p: Option<(f64, f64)>| match p {
            Some((re, im)) => format!("{re:e},{im:e}"),
            None => ",".to_string(),
        };
        let dist = match row.distance {
            Some(d) => format!("{d:e}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.index,
            fmt_pair(row.a),
            fmt_pair(row.b),
            dist
        ));
    }
    out
}

/// `step,e_output,e_state`; flagged steps print `nan`.
pub fn errors_csv(series: &ErrorSeries) -> String {
    let mut out = String::from("step,e_output,e_state\n");
    for (k, (eo, es)) in series.e_output.iter().zip(&series.e_state).enumerate() {
        out.push_str(&format!("{k},{eo:e},{es:e}\n"));
    }
    out
}

pub fn cost_csv(report: &CostReport) -> String {
    let mut out = String::from(
        "quantity,full,sub,ratio\n",
    );
    out.push_str(&format!(
        "markov_flops,{:e},{:e},{:e}\n",
        report.markov_flops_full, report.markov_flops_sub, report.markov_ratio
    ));
    out.push_str(&format!(
        "hankel_flops,{:e},{:e},{:e}\n",
        report.hankel_flops_full, report.hankel_flops_sub, report.hankel_ratio
    ));
    out.push_str(&format!(
        "svd_rows,{},{},\n",
        report.svd_dims_full.0, report.svd_dims_sub.0
    ));
    out.push_str(&format!(
        "svd_cols,{},{},\n",
        report.svd_dims_full.1, report.svd_dims_sub.1
    ));
    out.push_str(&format!("svd_size,\"{}\",,\n", report.size_string()));
    out
}
