//! Hankel matrix assembly from snapshot ensembles, plus the input/output
//! selection machinery for sub-sampled variants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshots::{LtiSystem, SnapshotEnsemble, SnapshotKind};

/// `H = Y^T X` with provenance of both ensembles.
///
/// Rows follow the adjoint ensemble's trajectory-major column order, columns
/// follow the primal ensemble's, so each entry is the Markov parameter
/// `c_i A^(t_j + t_hat_i) b_j` of its tags.
#[derive(Debug, Clone)]
pub struct HankelMatrix {
    pub h: DMatrix<f64>,
    pub primal_ref: EnsembleRef,
    pub adjoint_ref: EnsembleRef,
}

/// Which trajectories and steps produced one axis of a Hankel matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleRef {
    pub trajectory_ids: Vec<usize>,
    pub step_indices: Vec<usize>,
}

impl EnsembleRef {
    fn of(ens: &SnapshotEnsemble) -> Self {
        Self {
            trajectory_ids: ens.trajectory_ids.clone(),
            step_indices: ens.step_indices.clone(),
        }
    }
}

/// Chosen input columns, output rows, and time subsets for one sub-sampled
/// pipeline run, together with the seed that drew them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub seed: u64,
    pub input_pick: Vec<usize>,
    pub output_pick: Vec<usize>,
    pub primal_steps: Vec<usize>,
    pub adjoint_steps: Vec<usize>,
}

impl Selection {
    /// Identity selection: everything kept, in order.
    pub fn full(p: usize, q: usize, primal_steps: &[usize], adjoint_steps: &[usize]) -> Self {
        Self {
            seed: 0,
            input_pick: (0..p).collect(),
            output_pick: (0..q).collect(),
            primal_steps: primal_steps.to_vec(),
            adjoint_steps: adjoint_steps.to_vec(),
        }
    }

    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        check_picks(&self.input_pick, p, "input pick into B columns")?;
        check_picks(&self.output_pick, q, "output pick into C rows")?;
        if !self.primal_steps.windows(2).all(|w| w[0] < w[1])
            || !self.adjoint_steps.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::InvalidParameter(
                "selection step sets must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_picks(picks: &[usize], size: usize, context: &str) -> Result<()> {
    let mut seen = vec![false; size];
    for &i in picks {
        if i >= size {
            return Err(Error::IndexOutOfRange {
                context: context.into(),
                index: i,
                size,
            });
        }
        if seen[i] {
            return Err(Error::InvalidParameter(format!(
                "duplicate index {i} in {context}"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

/// `H = adjoint.data^T * primal.data`.
///
/// Entries are accumulated as explicit column dot products in a fixed index
/// order, so a sub-sampled Hankel matrix equals the corresponding submatrix
/// of the full one bit for bit.
pub fn build_hankel(primal: &SnapshotEnsemble, adjoint: &SnapshotEnsemble) -> Result<HankelMatrix> {
    if primal.kind != SnapshotKind::Primal || adjoint.kind != SnapshotKind::Adjoint {
        return Err(Error::InvalidParameter(
            "build_hankel expects (primal, adjoint) ensembles in that order".into(),
        ));
    }
    if primal.state_dim() != adjoint.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "hankel ensembles state dimension".into(),
            left_rows: adjoint.state_dim(),
            left_cols: adjoint.n_snapshots(),
            right_rows: primal.state_dim(),
            right_cols: primal.n_snapshots(),
        });
    }
    let rows = adjoint.n_snapshots();
    let cols = primal.n_snapshots();
    let mut h = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let y = adjoint.data.column(i);
        for j in 0..cols {
            h[(i, j)] = y.dot(&primal.data.column(j));
        }
    }
    Ok(HankelMatrix {
        h,
        primal_ref: EnsembleRef::of(primal),
        adjoint_ref: EnsembleRef::of(adjoint),
    })
}

/// Realize the selection matrices: `B_hat = B p1` (picked columns) and
/// `C_hat = p2 C` (picked rows).
pub fn apply_selection(sys: &LtiSystem, sel: &Selection) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    sel.validate(sys.input_dim(), sys.output_dim())?;
    let n = sys.state_dim();
    let mut b_hat = DMatrix::zeros(n, sel.input_pick.len());
    for (dst, &src) in sel.input_pick.iter().enumerate() {
        b_hat.set_column(dst, &sys.b.column(src));
    }
    let mut c_hat = DMatrix::zeros(sel.output_pick.len(), n);
    for (dst, &src) in sel.output_pick.iter().enumerate() {
        c_hat.set_row(dst, &sys.c.row(src));
    }
    Ok((b_hat, c_hat))
}

/// Positions inside a full trajectory-major ensemble that a (trajectory
/// subset, step subset) selection induces. Used to cross-check sub-sampled
/// Hankel matrices against the full one.
pub fn induced_columns(
    full_trajectories: &[usize],
    full_steps: &[usize],
    picked_trajectories: &[usize],
    picked_steps: &[usize],
) -> Vec<usize> {
    let mut cols = Vec::with_capacity(picked_trajectories.len() * picked_steps.len());
    for &t in picked_trajectories {
        let t_pos = full_trajectories.iter().position(|&x| x == t).expect("trajectory in pool");
        for &s in picked_steps {
            let s_pos = full_steps.iter().position(|&x| x == s).expect("step in pool");
            cols.push(t_pos * full_steps.len() + s_pos);
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics;
    use crate::snapshots::simulate_impulse;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ensemble(data: DMatrix<f64>, kind: SnapshotKind) -> SnapshotEnsemble {
        let cols = data.ncols();
        SnapshotEnsemble {
            data,
            trajectory_ids: (0..cols).collect(),
            step_indices: vec![0; cols],
            kind,
            dt: 1.0,
        }
    }

    #[test]
    fn identity_columns_give_identity() {
        let x = ensemble(DMatrix::identity(2, 2), SnapshotKind::Primal);
        let y = ensemble(DMatrix::identity(2, 2), SnapshotKind::Adjoint);
        let h = build_hankel(&x, &y).unwrap();
        assert_eq!(h.h, DMatrix::identity(2, 2));
    }

    #[test]
    fn inner_products_by_hand() {
        let x = ensemble(
            DMatrix::from_columns(&[
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 2.0]),
            ]),
            SnapshotKind::Primal,
        );
        let y = ensemble(
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            SnapshotKind::Adjoint,
        );
        let h = build_hankel(&x, &y).unwrap();
        assert_eq!(h.h, DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
    }

    #[test]
    fn entries_are_markov_parameters() {
        // Brute-force oracle: H[i,j] must equal c_(ri) A^(t_j + that_i) b_(cj).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 4;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() * 0.4 - 0.2);
        let b = DMatrix::from_fn(n, 2, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let c = DMatrix::from_fn(3, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let sys = LtiSystem::new(a.clone(), b.clone(), c.clone(), 1.0).unwrap();
        let primal_steps = [0usize, 1, 3];
        let adjoint_steps = [1usize, 2];
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &b, &primal_steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &c.transpose(), &adjoint_steps).unwrap();
        let h = build_hankel(&x, &y).unwrap();
        for i in 0..h.h.nrows() {
            for j in 0..h.h.ncols() {
                let (out_traj, t_hat) = (y.trajectory_ids[i], y.step_indices[i]);
                let (in_traj, t) = (x.trajectory_ids[j], x.step_indices[j]);
                let mut apow = DMatrix::identity(n, n);
                for _ in 0..(t + t_hat) {
                    apow = &a * apow;
                }
                let oracle = (c.row(out_traj) * &apow * b.column(in_traj))[(0, 0)];
                assert!(
                    (h.h[(i, j)] - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn hankel_rank_bounded_by_factor_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Rank-2 primal data in R^6.
        let basis = DMatrix::from_fn(6, 2, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let coeffs = DMatrix::from_fn(2, 5, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let x = ensemble(&basis * coeffs, SnapshotKind::Primal);
        let y = ensemble(DMatrix::from_fn(6, 4, |_, _| rng.gen::<f64>() * 2.0 - 1.0), SnapshotKind::Adjoint);
        let h = build_hankel(&x, &y).unwrap();
        let rank = numerics::svd(&h.h).unwrap().truncation_rank;
        assert!(rank <= 2);
    }

    #[test]
    fn selection_identity_and_single_column() {
        let a = DMatrix::identity(3, 3);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let sys = LtiSystem::new(a, b.clone(), c.clone(), 1.0).unwrap();

        let full = Selection::full(3, 2, &[0], &[0]);
        let (b_hat, c_hat) = apply_selection(&sys, &full).unwrap();
        assert_eq!(b_hat, b);
        assert_eq!(c_hat, c);

        let one = Selection {
            seed: 0,
            input_pick: vec![2],
            output_pick: vec![1],
            primal_steps: vec![0],
            adjoint_steps: vec![0],
        };
        let (b_hat, c_hat) = apply_selection(&sys, &one).unwrap();
        assert_eq!(b_hat.column(0), b.column(2));
        assert_eq!(c_hat.row(0), c.row(1));
    }

    #[test]
    fn selection_rejects_out_of_range_and_duplicates() {
        let sys = LtiSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        let bad = Selection {
            seed: 0,
            input_pick: vec![5],
            output_pick: vec![0],
            primal_steps: vec![0],
            adjoint_steps: vec![0],
        };
        assert!(matches!(
            apply_selection(&sys, &bad),
            Err(Error::IndexOutOfRange { .. })
        ));
        let dup = Selection {
            seed: 0,
            input_pick: vec![0, 0],
            output_pick: vec![0],
            primal_steps: vec![0],
            adjoint_steps: vec![0],
        };
        assert!(apply_selection(&sys, &dup).is_err());
    }

    #[test]
    fn selection_json_round_trip() {
        let sel = Selection {
            seed: 77,
            input_pick: vec![0, 2],
            output_pick: vec![1],
            primal_steps: vec![1, 4, 9],
            adjoint_steps: vec![2, 3],
        };
        let back = Selection::from_json(&sel.to_json().unwrap()).unwrap();
        assert_eq!(sel, back);
    }
}
