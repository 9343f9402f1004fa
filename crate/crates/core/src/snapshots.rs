//! Discrete LTI systems and impulse-response snapshot collection.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, validate_finite};
use crate::textmat;

/// Any simulated entry beyond this magnitude is treated as divergence.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Discrete-time `(A, B, C)` triple: `x_k = A x_{k-1} + B u_k`, `y_k = C x_k`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Seconds per step; metadata mapping step index to time.
    pub dt: f64,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::InvalidParameter(format!(
                "state matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "LtiSystem (A NxN, B Nxp, C qxN)".into(),
                left_rows: b.nrows(),
                left_cols: b.ncols(),
                right_rows: c.nrows(),
                right_cols: c.ncols(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        validate_finite(&a, "A")?;
        validate_finite(&b, "B")?;
        validate_finite(&c, "C")?;
        Ok(Self { a, b, c, dt })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Spectral radius of `A`; logs a warning above `1 + 1e-9` instead of
    /// failing, since marginally unstable discretizations are still usable
    /// for short-horizon snapshot collection.
    pub fn check_stability(&self) -> Result<f64> {
        let rho = numerics::spectral_radius(&self.a)?;
        if rho > 1.0 + 1e-9 {
            log::warn!(
                "state matrix spectral radius {rho:.6} exceeds 1; system is unstable"
            );
        }
        Ok(rho)
    }
}

/// Which operator propagates a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Primal,
    Adjoint,
}

/// Matrix of state snapshots, one column per (trajectory, step) pair in
/// trajectory-major order: all sample steps of trajectory 0, then all of
/// trajectory 1, and so on.
#[derive(Debug, Clone)]
pub struct SnapshotEnsemble {
    pub data: DMatrix<f64>,
    /// Per-column source trajectory label (original B column / C row index).
    pub trajectory_ids: Vec<usize>,
    /// Per-column step index `k` (the column equals `M^k * initial`).
    pub step_indices: Vec<usize>,
    pub kind: SnapshotKind,
    pub dt: f64,
}

impl SnapshotEnsemble {
    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.data.nrows()
    }

    /// Distinct sample steps of the first trajectory (all trajectories share
    /// the same step set by construction).
    pub fn sample_steps(&self) -> Vec<usize> {
        match self.trajectory_ids.first() {
            None => Vec::new(),
            Some(&first) => self
                .trajectory_ids
                .iter()
                .zip(&self.step_indices)
                .take_while(|(t, _)| **t == first)
                .map(|(_, s)| *s)
                .collect(),
        }
    }

    pub fn write(&self, data_path: &Path, tags_path: &Path) -> Result<()> {
        textmat::write_real(data_path, &self.data)?;
        let tags = EnsembleTags {
            kind: self.kind,
            trajectory_ids: self.trajectory_ids.clone(),
            step_indices: self.step_indices.clone(),
            dt: self.dt,
        };
        std::fs::write(tags_path, serde_json::to_string_pretty(&tags)?)?;
        Ok(())
    }

    pub fn read(data_path: &Path, tags_path: &Path) -> Result<Self> {
        let data = textmat::read_real(data_path)?;
        let tags: EnsembleTags = serde_json::from_str(&std::fs::read_to_string(tags_path)?)?;
        if tags.trajectory_ids.len() != data.ncols() || tags.step_indices.len() != data.ncols() {
            return Err(Error::InvalidParameter(
                "ensemble tag file does not match snapshot column count".into(),
            ));
        }
        Ok(Self {
            data,
            trajectory_ids: tags.trajectory_ids,
            step_indices: tags.step_indices,
            kind: tags.kind,
            dt: tags.dt,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct EnsembleTags {
    kind: SnapshotKind,
    trajectory_ids: Vec<usize>,
    step_indices: Vec<usize>,
    dt: f64,
}

/// Propagate each initial column under `A` (primal) or `A^T` (adjoint) and
/// record the state at the requested step indices. Step 0 is the initial
/// column itself. Trajectory labels default to `0..n_cols`.
pub fn simulate_impulse(
    sys: &LtiSystem,
    kind: SnapshotKind,
    initial_columns: &DMatrix<f64>,
    sample_steps: &[usize],
) -> Result<SnapshotEnsemble> {
    let labels: Vec<usize> = (0..initial_columns.ncols()).collect();
    simulate_impulse_labeled(sys, kind, initial_columns, &labels, sample_steps)
}

/// Like [`simulate_impulse`] but with explicit trajectory labels, so
/// sub-sampled ensembles keep the original input/output indices.
pub fn simulate_impulse_labeled(
    sys: &LtiSystem,
    kind: SnapshotKind,
    initial_columns: &DMatrix<f64>,
    labels: &[usize],
    sample_steps: &[usize],
) -> Result<SnapshotEnsemble> {
    let n = sys.state_dim();
    if initial_columns.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "impulse initial columns".into(),
            left_rows: initial_columns.nrows(),
            left_cols: initial_columns.ncols(),
            right_rows: n,
            right_cols: n,
        });
    }
    if labels.len() != initial_columns.ncols() {
        return Err(Error::InvalidParameter(
            "one trajectory label per initial column required".into(),
        ));
    }
    if !sample_steps.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "sample steps must be strictly increasing".into(),
        ));
    }
    validate_finite(initial_columns, "impulse initial columns")?;

    let op = match kind {
        SnapshotKind::Primal => sys.a.clone(),
        SnapshotKind::Adjoint => sys.a.transpose(),
    };

    // Trajectories are independent; collect preserves trajectory-major order.
    let columns: Vec<Vec<DVector<f64>>> = (0..initial_columns.ncols())
        .into_par_iter()
        .map(|j| propagate_column(&op, &initial_columns.column(j).clone_owned(), sample_steps))
        .collect::<Result<_>>()?;

    let n_snap = initial_columns.ncols() * sample_steps.len();
    let mut data = DMatrix::zeros(n, n_snap);
    let mut trajectory_ids = Vec::with_capacity(n_snap);
    let mut step_indices = Vec::with_capacity(n_snap);
    let mut col = 0;
    for (j, states) in columns.iter().enumerate() {
        for (s, x) in states.iter().enumerate() {
            data.set_column(col, x);
            trajectory_ids.push(labels[j]);
            step_indices.push(sample_steps[s]);
            col += 1;
        }
    }
    Ok(SnapshotEnsemble {
        data,
        trajectory_ids,
        step_indices,
        kind,
        dt: sys.dt,
    })
}

fn propagate_column(
    op: &DMatrix<f64>,
    initial: &DVector<f64>,
    sample_steps: &[usize],
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(sample_steps.len());
    let mut x = initial.clone();
    let mut step = 0usize;
    let last = sample_steps.last().copied().unwrap_or(0);
    let mut next = sample_steps.iter().peekable();
    loop {
        while next.peek() == Some(&&step) {
            out.push(x.clone());
            next.next();
        }
        if step >= last {
            break;
        }
        x = op * &x;
        step += 1;
        if x.amax() > DIVERGENCE_CAP {
            return Err(Error::Divergence {
                step,
                cap: DIVERGENCE_CAP,
            });
        }
    }
    Ok(out)
}

/// Re-simulate every tagged column and return the worst reconstruction
/// residual; an intact ensemble reads back at machine precision.
///
/// Initial columns are resolved from the system via each column's label:
/// `B` column for primal ensembles, transposed `C` row for adjoint ones.
pub fn state_reconstruction(ensemble: &SnapshotEnsemble, sys: &LtiSystem) -> Result<f64> {
    let op = match ensemble.kind {
        SnapshotKind::Primal => sys.a.clone(),
        SnapshotKind::Adjoint => sys.a.transpose(),
    };
    let mut worst = 0.0_f64;
    for col in 0..ensemble.n_snapshots() {
        let label = ensemble.trajectory_ids[col];
        let initial: DVector<f64> = match ensemble.kind {
            SnapshotKind::Primal => {
                if label >= sys.input_dim() {
                    return Err(Error::IndexOutOfRange {
                        context: "primal trajectory label into B columns".into(),
                        index: label,
                        size: sys.input_dim(),
                    });
                }
                sys.b.column(label).clone_owned()
            }
            SnapshotKind::Adjoint => {
                if label >= sys.output_dim() {
                    return Err(Error::IndexOutOfRange {
                        context: "adjoint trajectory label into C rows".into(),
                        index: label,
                        size: sys.output_dim(),
                    });
                }
                sys.c.row(label).transpose()
            }
        };
        let mut x = initial;
        for _ in 0..ensemble.step_indices[col] {
            x = &op * x;
        }
        let residual = (ensemble.data.column(col) - x).norm();
        worst = worst.max(residual);
    }
    Ok(worst)
}
