//! The reduction algorithms: snapshot POD, balanced POD, eigenfunction
//! reconstruction through auto- and cross-correlation matrices, two-sided
//! biorthogonalization, and the randomized sub-sampled pipeline.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hankel::{self, Selection};
use crate::modal::{match_eigenvalues, ModalRom, RomSource};
use crate::numerics::{self, complexify, C64};
use crate::sampling::SamplingPlan;
use crate::snapshots::{self, LtiSystem, SnapshotEnsemble, SnapshotKind};

pub use crate::modal::hausdorff_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSource {
    Auto,
    Cross,
    Bpod,
}

/// Projection basis extracted from snapshots. `t_l` is present for the
/// two-sided (balanced) variants.
#[derive(Debug, Clone)]
pub struct PodBasis {
    pub t_r: DMatrix<f64>,
    pub t_l: Option<DMatrix<f64>>,
    /// Retained correlation eigenvalues (auto) or singular values (bpod).
    pub sigma: Vec<f64>,
    pub source: BasisSource,
}

/// Balanced-POD reduced model: the oblique basis pair plus the projected
/// `(A_r, B_r, C_r)` system.
#[derive(Debug, Clone)]
pub struct BpodRom {
    pub basis: PodBasis,
    pub system: LtiSystem,
    pub hankel_dims: (usize, usize),
}

/// Snapshot POD basis `T_r = X V_p Sigma_p^(-1/2)` from the top `order`
/// eigenpairs of the correlation matrix `X^T X`.
pub fn snapshot_pod(x: &SnapshotEnsemble, order: usize, rank_tol: f64) -> Result<PodBasis> {
    if order == 0 {
        return Err(Error::InvalidParameter("POD order must be positive".into()));
    }
    let corr = x.data.transpose() * &x.data;
    let (vals, vecs) = numerics::symmetric_eig(&corr)?;
    let rank = numerics::rank_at_tol(vals.as_slice(), rank_tol);
    if order > rank {
        return Err(Error::RankShortfall {
            order,
            rank,
            rank_tol,
        });
    }
    let mut t_r = DMatrix::zeros(x.state_dim(), order);
    for j in 0..order {
        let col = (&x.data * vecs.column(j)) / vals[j].sqrt();
        t_r.set_column(j, &col);
    }
    Ok(PodBasis {
        t_r,
        t_l: None,
        sigma: vals.as_slice()[..order].to_vec(),
        source: BasisSource::Auto,
    })
}

/// Balanced POD: oblique bases from the SVD of `H = Y^T X` and the projected
/// reduced system `A_r = T_l^T A T_r`, `B_r = T_l^T B`, `C_r = C T_r`.
pub fn bpod(
    primal: &SnapshotEnsemble,
    adjoint: &SnapshotEnsemble,
    sys: &LtiSystem,
    order: usize,
    rank_tol: f64,
) -> Result<BpodRom> {
    let h = hankel::build_hankel(primal, adjoint)?;
    let dims = (h.h.nrows(), h.h.ncols());
    let svd = numerics::svd_with_tol(&h.h, rank_tol)?;
    if order > svd.truncation_rank {
        return Err(Error::RankShortfall {
            order,
            rank: svd.truncation_rank,
            rank_tol,
        });
    }
    let (t_r, t_l) = oblique_bases(primal, adjoint, &svd, order);
    let a_r = t_l.transpose() * &sys.a * &t_r;
    let b_r = t_l.transpose() * &sys.b;
    let c_r = &sys.c * &t_r;
    let system = LtiSystem::new(a_r, b_r, c_r, sys.dt)?;
    Ok(BpodRom {
        basis: PodBasis {
            t_r,
            t_l: Some(t_l),
            sigma: svd.singular_values.as_slice()[..order].to_vec(),
            source: BasisSource::Bpod,
        },
        system,
        hankel_dims: dims,
    })
}

fn oblique_bases(
    primal: &SnapshotEnsemble,
    adjoint: &SnapshotEnsemble,
    svd: &numerics::SvdResult,
    order: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = primal.state_dim();
    let mut t_r = DMatrix::zeros(n, order);
    let mut t_l = DMatrix::zeros(n, order);
    for j in 0..order {
        let scale = svd.singular_values[j].sqrt();
        t_r.set_column(j, &((&primal.data * svd.right.column(j)) / scale));
        t_l.set_column(j, &((&adjoint.data * svd.left.column(j)) / scale));
    }
    (t_r, t_l)
}

/// Two-sided modified Gram-Schmidt. Rescales and sweeps both column sets so
/// that `V_l^T V_r = I` (bilinear pairing) while each new column stays in
/// the span of the original leading columns.
pub fn biorthogonalize(
    v_l: &DMatrix<C64>,
    v_r: &DMatrix<C64>,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    if v_l.shape() != v_r.shape() {
        return Err(Error::DimensionMismatch {
            context: "biorthogonalize column sets".into(),
            left_rows: v_l.nrows(),
            left_cols: v_l.ncols(),
            right_rows: v_r.nrows(),
            right_cols: v_r.ncols(),
        });
    }
    let n = v_l.ncols();
    let mut l = v_l.clone();
    let mut r = v_r.clone();
    for j in 0..n {
        let lj = l.column(j).clone_owned();
        let rj = r.column(j).clone_owned();
        let pairing = lj.dot(&rj);
        if pairing.norm() < 1e-12 * lj.norm() * rj.norm() {
            return Err(Error::BiorthogonalBreakdown {
                column: j,
                pairing: pairing.norm(),
            });
        }
        let scale = pairing.sqrt();
        let lj = lj / scale;
        let rj = rj / scale;
        l.set_column(j, &lj);
        r.set_column(j, &rj);
        for k in (j + 1)..n {
            let coef_l = rj.dot(&l.column(k));
            let new_l = l.column(k) - &lj * coef_l;
            l.set_column(k, &new_l);
            let coef_r = lj.dot(&r.column(k));
            let new_r = r.column(k) - &rj * coef_r;
            r.set_column(k, &new_r);
        }
    }
    Ok((l, r))
}

/// Eigenfunction reconstruction through the two auto-correlation matrices
/// `X^T X` and `Y^T Y`: extract right eigenpairs from the primal snapshots
/// and left eigenpairs from the adjoint ones, keep the eigenvalues both
/// routes agree on within `match_tol`, then biorthogonalize the retained
/// vector pair.
pub fn eigenrecon_auto(
    x: &SnapshotEnsemble,
    y: &SnapshotEnsemble,
    sys: &LtiSystem,
    order_r: usize,
    order_l: usize,
    match_tol: f64,
    rank_tol: f64,
) -> Result<ModalRom> {
    if order_r > x.n_snapshots() || order_l > y.n_snapshots() {
        log::warn!(
            "requested orders ({order_r}, {order_l}) exceed snapshot counts ({}, {})",
            x.n_snapshots(),
            y.n_snapshots()
        );
    }
    let basis_r = snapshot_pod(x, order_r, rank_tol)?;
    let a_tilde = basis_r.t_r.transpose() * &sys.a * &basis_r.t_r;
    let right = numerics::eig(&a_tilde)?;
    let v_r_full = complexify(&basis_r.t_r) * &right.vectors;

    let basis_l = snapshot_pod(y, order_l, rank_tol)?;
    let a_hat = basis_l.t_r.transpose() * sys.a.transpose() * &basis_l.t_r;
    let left = numerics::eig(&a_hat)?;
    let v_l_full = complexify(&basis_l.t_r) * &left.vectors;

    let matched: Vec<_> = match_eigenvalues(&right.values, &left.values)
        .into_iter()
        .filter(|p| p.distance <= match_tol)
        .collect();
    if matched.is_empty() {
        return Err(Error::EmptyIntersection { match_tol });
    }

    let mut modes: Vec<(C64, usize, usize)> = matched
        .iter()
        .map(|p| {
            let avg = (right.values[p.left] + left.values[p.right]) * C64::new(0.5, 0.0);
            (avg, p.left, p.right)
        })
        .collect();
    modes.sort_by(|a, b| {
        b.0.norm()
            .partial_cmp(&a.0.norm())
            .unwrap()
            .then(b.0.re.partial_cmp(&a.0.re).unwrap())
            .then(b.0.im.partial_cmp(&a.0.im).unwrap())
    });

    let m = modes.len();
    let mut values: Vec<C64> = modes.iter().map(|t| t.0).collect();
    let mut v_r = DMatrix::zeros(sys.state_dim(), m);
    let mut v_l = DMatrix::zeros(sys.state_dim(), m);
    for (dst, &(_, ri, li)) in modes.iter().enumerate() {
        v_r.set_column(dst, &v_r_full.column(ri));
        v_l.set_column(dst, &v_l_full.column(li));
    }
    enforce_conjugate_closure(&mut values, &mut [&mut v_r, &mut v_l]);

    let (phi, psi) = biorthogonalize(&v_l, &v_r)?;
    let a_r = phi.transpose() * complexify(&sys.a) * &psi;
    let b_r = phi.transpose() * complexify(&sys.b);
    let c_r = complexify(&sys.c) * &psi;
    let biorth_defect = biorth_defect(&phi, &psi);
    let unstable_modes = flag_unstable(&values);

    Ok(ModalRom {
        eigenvalues: values,
        phi,
        psi,
        a_r,
        b_r,
        c_r,
        source: RomSource::Auto,
        retained_sigma: basis_r.sigma,
        biorth_defect,
        hankel_dims: None,
        unstable_modes,
        plan: None,
        selection: None,
        dt: sys.dt,
    })
}

/// Eigenfunction reconstruction through the cross-correlation matrix
/// `H = Y^T X`: oblique bases from the SVD of `H`, eigendecomposition of the
/// projected dynamics, and the modal ROM `A_r = Lambda`, `B_r = Phi^T B`,
/// `C_r = C Psi`. Biorthogonality holds by construction here.
pub fn eigenrecon_cross(
    primal: &SnapshotEnsemble,
    adjoint: &SnapshotEnsemble,
    sys: &LtiSystem,
    order: usize,
    rank_tol: f64,
) -> Result<ModalRom> {
    cross_recon(primal, adjoint, sys, order, rank_tol, RomSource::Cross)
}

fn cross_recon(
    primal: &SnapshotEnsemble,
    adjoint: &SnapshotEnsemble,
    sys: &LtiSystem,
    order: usize,
    rank_tol: f64,
    source: RomSource,
) -> Result<ModalRom> {
    if order > primal.n_snapshots().min(adjoint.n_snapshots()) {
        log::warn!(
            "requested order {order} exceeds snapshot budget ({}, {})",
            primal.n_snapshots(),
            adjoint.n_snapshots()
        );
    }
    let h = hankel::build_hankel(primal, adjoint)?;
    let dims = (h.h.nrows(), h.h.ncols());
    let svd = numerics::svd_with_tol(&h.h, rank_tol)?;
    if order > svd.truncation_rank {
        return Err(Error::RankShortfall {
            order,
            rank: svd.truncation_rank,
            rank_tol,
        });
    }
    let (t_r, t_l) = oblique_bases(primal, adjoint, &svd, order);
    let a_tilde = t_l.transpose() * &sys.a * &t_r;
    let eig = numerics::eig(&a_tilde)?;
    let p = &eig.vectors;

    // Phi^T = P^-1 T_l^T through a solve; P is never inverted explicitly.
    let t_l_t = complexify(&t_l.transpose());
    let z = match numerics::solve_linear(p, &t_l_t) {
        Ok(z) => z,
        Err(Error::SingularMatrix { .. }) => {
            let ac = complexify(&a_tilde);
            let residual = (0..order)
                .map(|i| {
                    let v = p.column(i).clone_owned();
                    (&ac * &v - &v * eig.values[i]).norm()
                })
                .fold(0.0_f64, f64::max);
            return Err(Error::EigFailure { n: order, residual });
        }
        Err(e) => return Err(e),
    };

    let phi = z.transpose();
    let psi = complexify(&t_r) * p;
    let a_r = DMatrix::from_diagonal(&DVector::from_vec(eig.values.clone()));
    let b_r = &z * complexify(&sys.b);
    let c_r = complexify(&sys.c) * &psi;
    let defect = biorth_defect(&phi, &psi);
    let unstable_modes = flag_unstable(&eig.values);

    Ok(ModalRom {
        eigenvalues: eig.values,
        phi,
        psi,
        a_r,
        b_r,
        c_r,
        source,
        retained_sigma: svd.singular_values.as_slice()[..order].to_vec(),
        biorth_defect: defect,
        hankel_dims: Some(dims),
        unstable_modes,
        plan: None,
        selection: None,
        dt: sys.dt,
    })
}

/// Simulate the primal/adjoint ensembles a selection asks for, with
/// trajectory labels pointing back at the original input/output indices.
pub fn rpod_ensembles(
    sys: &LtiSystem,
    sel: &Selection,
) -> Result<(SnapshotEnsemble, SnapshotEnsemble)> {
    let (b_hat, c_hat) = hankel::apply_selection(sys, sel)?;
    let primal = snapshots::simulate_impulse_labeled(
        sys,
        SnapshotKind::Primal,
        &b_hat,
        &sel.input_pick,
        &sel.primal_steps,
    )?;
    let adjoint = snapshots::simulate_impulse_labeled(
        sys,
        SnapshotKind::Adjoint,
        &c_hat.transpose(),
        &sel.output_pick,
        &sel.adjoint_steps,
    )?;
    Ok((primal, adjoint))
}

/// The randomized pipeline: draw the plan's selection, simulate the
/// sub-sampled impulse responses, build the sub-Hankel matrix, and run the
/// cross-correlation reconstruction on it.
pub fn rpod(
    sys: &LtiSystem,
    plan: &SamplingPlan,
    order: usize,
    rank_tol: f64,
) -> Result<ModalRom> {
    let budget = plan.primal_budget().min(plan.adjoint_budget());
    if order > budget {
        return Err(Error::RankShortfall {
            order,
            rank: budget,
            rank_tol,
        });
    }
    let sel = plan.draw()?;
    let (primal, adjoint) = rpod_ensembles(sys, &sel)?;
    let mut rom = cross_recon(&primal, &adjoint, sys, order, rank_tol, RomSource::Rpod)?;
    rom.plan = Some(plan.clone());
    rom.selection = Some(sel);
    Ok(rom)
}

/// Outcome of one run inside a repeated-sampling consistency check.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub seed: u64,
    pub retained: usize,
    pub eigenvalues: Vec<C64>,
    pub failure: Option<String>,
}

/// Pairwise eigenvalue-set agreement across repeated randomized runs.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// Summaries ordered by seed.
    pub runs: Vec<RunSummary>,
    /// `(run_i, run_j, hausdorff distance)` for i < j.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub max_distance: f64,
    pub match_tol: f64,
    /// Set when any pairwise distance exceeds `match_tol`.
    pub unstable: bool,
}

/// Run the randomized pipeline `K` times with seeds derived from the base
/// plan (`seed + run index`) and report eigenvalue-set consistency. Returns
/// the run with the largest retained rank.
pub fn rpod_repeated(
    sys: &LtiSystem,
    base_plan: &SamplingPlan,
    order: usize,
    runs: usize,
    rank_tol: f64,
    match_tol: f64,
) -> Result<(ModalRom, ConsistencyReport)> {
    if runs < 2 {
        return Err(Error::InvalidParameter(
            "repeated sampling needs at least 2 runs".into(),
        ));
    }
    let seeds: Vec<u64> = (0..runs)
        .map(|i| base_plan.seed.wrapping_add(i as u64))
        .collect();
    rpod_repeated_with_seeds(sys, base_plan, order, &seeds, rank_tol, match_tol)
}

/// Same as [`rpod_repeated`] with explicit seeds per run.
pub fn rpod_repeated_with_seeds(
    sys: &LtiSystem,
    base_plan: &SamplingPlan,
    order: usize,
    seeds: &[u64],
    rank_tol: f64,
    match_tol: f64,
) -> Result<(ModalRom, ConsistencyReport)> {
    let outcomes: Vec<(u64, Result<ModalRom>)> = seeds
        .par_iter()
        .map(|&seed| {
            let plan = base_plan.with_seed(seed);
            (seed, rpod_with_rank_fallback(sys, &plan, order, rank_tol))
        })
        .collect();

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut roms: Vec<Option<ModalRom>> = Vec::with_capacity(outcomes.len());
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(rom) => {
                runs.push(RunSummary {
                    seed,
                    retained: rom.order(),
                    eigenvalues: rom.eigenvalues.clone(),
                    failure: None,
                });
                roms.push(Some(rom));
            }
            Err(e) => {
                runs.push(RunSummary {
                    seed,
                    retained: 0,
                    eigenvalues: Vec::new(),
                    failure: Some(e.to_string()),
                });
                roms.push(None);
            }
        }
    }

    if roms.iter().all(|r| r.is_none()) {
        return Err(Error::AllRunsRankDeficient {
            runs: seeds.len(),
            order,
        });
    }

    let mut pairwise = Vec::new();
    let mut max_distance = 0.0_f64;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            let d = hausdorff_distance(&runs[i].eigenvalues, &runs[j].eigenvalues);
            max_distance = max_distance.max(d);
            pairwise.push((i, j, d));
        }
    }

    let best_idx = (0..roms.len())
        .filter(|&i| roms[i].is_some())
        .max_by_key(|&i| (runs[i].retained, std::cmp::Reverse(i)))
        .expect("at least one successful run");
    let best = roms.into_iter().nth(best_idx).flatten().expect("present");

    Ok((
        best,
        ConsistencyReport {
            runs,
            pairwise,
            max_distance,
            match_tol,
            unstable: max_distance > match_tol,
        },
    ))
}

// Retry at the available rank when the requested order is not achievable.
fn rpod_with_rank_fallback(
    sys: &LtiSystem,
    plan: &SamplingPlan,
    order: usize,
    rank_tol: f64,
) -> Result<ModalRom> {
    match rpod(sys, plan, order, rank_tol) {
        Err(Error::RankShortfall { rank, .. }) if rank >= 1 && rank < order => {
            rpod(sys, plan, rank, rank_tol)
        }
        other => other,
    }
}

fn biorth_defect(phi: &DMatrix<C64>, psi: &DMatrix<C64>) -> f64 {
    let n = phi.ncols();
    let prod = phi.transpose() * psi;
    let ident = DMatrix::<C64>::identity(n, n);
    (prod - ident).norm()
}

fn flag_unstable(values: &[C64]) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1.0)
        .map(|(i, _)| i)
        .collect()
}

// Snap adjacent near-conjugate modes to exact conjugates so real-system
// responses stay real and realification is well defined.
fn enforce_conjugate_closure(values: &mut [C64], mats: &mut [&mut DMatrix<C64>]) {
    let n = values.len();
    let mut i = 0;
    while i < n {
        let lam = values[i];
        if lam.im > 0.0 && i + 1 < n {
            let next = values[i + 1];
            let tol = 1e-9 * lam.norm().max(1.0);
            if (next.re - lam.re).abs() <= tol && (next.im + lam.im).abs() <= tol {
                values[i + 1] = lam.conj();
                for m in mats.iter_mut() {
                    let conj_col = m.column(i).map(|z| z.conj());
                    m.set_column(i + 1, &conj_col);
                }
                i += 2;
                continue;
            }
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshots::simulate_impulse;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
    }

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
    fn snapshot_pod_orthonormal_input_reproduced() {
        // Orthonormal snapshot columns: the projector must reproduce them.
        let q = numerics::svd(&random_matrix(8, 3, 1)).unwrap().left;
        let x = ensemble(q.clone(), SnapshotKind::Primal);
        let basis = snapshot_pod(&x, 3, 1e-10).unwrap();
        let projected = &basis.t_r * (basis.t_r.transpose() * &q);
        assert!((projected - &q).norm() <= 1e-10);
        let gram = basis.t_r.transpose() * &basis.t_r;
        assert!((gram - DMatrix::identity(3, 3)).norm() <= 1e-8);
    }

    #[test]
    fn snapshot_pod_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let data = DMatrix::from_columns(&[v.clone(), &v * 2.0]);
        let x = ensemble(data, SnapshotKind::Primal);
        let basis = snapshot_pod(&x, 1, 1e-10).unwrap();
        let dir = basis.t_r.column(0);
        let cosine = dir.dot(&v).abs() / (dir.norm() * v.norm());
        assert_relative_eq!(cosine, 1.0, epsilon = 1e-10);
        assert!(snapshot_pod(&x, 2, 1e-10).is_err());
    }

    #[test]
    fn snapshot_pod_rank_three_projection() {
        let basis = random_matrix(20, 3, 5);
        let coeffs = random_matrix(3, 6, 6);
        let data = &basis * coeffs;
        let x = ensemble(data.clone(), SnapshotKind::Primal);
        let pod = snapshot_pod(&x, 3, 1e-10).unwrap();
        let err = (&data - &pod.t_r * (pod.t_r.transpose() * &data)).norm();
        assert!(err <= 1e-8 * data.norm());
    }

    fn stable_random_system(n: usize, p: usize, q: usize, seed: u64) -> LtiSystem {
        let raw = random_matrix(n, n, seed);
        let rho = numerics::spectral_radius(&raw).unwrap();
        let a = raw * (0.7 / rho);
        let b = random_matrix(n, p, seed + 1);
        let c = random_matrix(q, n, seed + 2);
        LtiSystem::new(a, b, c, 1.0).unwrap()
    }

    #[test]
    fn bpod_symmetric_self_adjoint_bases_match() {
        let s = random_matrix(4, 4, 8);
        let a_sym = (&s + s.transpose()) * 0.1;
        let b = random_matrix(4, 2, 9);
        let c = b.transpose();
        let sys = LtiSystem::new(a_sym, b.clone(), c, 1.0).unwrap();
        let steps: Vec<usize> = (0..6).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = bpod(&x, &y, &sys, 3, 1e-8).unwrap();
        let t_l = rom.basis.t_l.as_ref().unwrap();
        for j in 0..3 {
            let diff = (t_l.column(j) - rom.basis.t_r.column(j)).norm();
            let sum = (t_l.column(j) + rom.basis.t_r.column(j)).norm();
            assert!(diff.min(sum) <= 1e-8, "column {j}");
        }
    }

    #[test]
    fn bpod_full_order_matches_markov_parameters() {
        let sys = stable_random_system(6, 2, 2, 31);
        let steps: Vec<usize> = (0..25).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = bpod(&x, &y, &sys, 6, 1e-10).unwrap();
        // CA^kB must agree between full and reduced systems.
        let mut full_pow = DMatrix::<f64>::identity(6, 6);
        let mut red_pow = DMatrix::<f64>::identity(6, 6);
        for k in 0..=10 {
            let full_markov = &sys.c * &full_pow * &sys.b;
            let red_markov = &rom.system.c * &red_pow * &rom.system.b;
            assert!(
                (&full_markov - &red_markov).norm() <= 1e-8 * full_markov.norm().max(1.0),
                "markov parameter k={k}"
            );
            full_pow = &sys.a * full_pow;
            red_pow = &rom.system.a * red_pow;
        }
        let t_l = rom.basis.t_l.as_ref().unwrap();
        let cross = t_l.transpose() * &rom.basis.t_r;
        assert!((cross - DMatrix::identity(6, 6)).norm() <= 1e-8);
    }

    #[test]
    fn bpod_hankel_singular_values_equal_rom_gramian_values() {
        // Full-order reduction on a horizon long enough that the snapshot
        // gramians are converged: the balanced coordinates must carry
        // gramians equal to the Hankel singular values.
        let sys = stable_random_system(6, 2, 2, 77);
        let steps: Vec<usize> = (0..60).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let order = 6;
        let rom = bpod(&x, &y, &sys, order, 1e-10).unwrap();
        // Infinite-horizon gramians of the reduced system by summation.
        let n = order;
        let mut wc = DMatrix::<f64>::zeros(n, n);
        let mut wo = DMatrix::<f64>::zeros(n, n);
        let mut ak = DMatrix::<f64>::identity(n, n);
        for _ in 0..400 {
            wc += &ak * &rom.system.b * rom.system.b.transpose() * ak.transpose();
            wo += ak.transpose() * rom.system.c.transpose() * &rom.system.c * &ak;
            ak = &rom.system.a * ak;
        }
        let product = wc * wo;
        let eig = numerics::eigenvalues_only(&product).unwrap();
        let mut hsv: Vec<f64> = eig.iter().map(|z| z.re.max(0.0).sqrt()).collect();
        hsv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for j in 0..order {
            assert!(
                (hsv[j] - rom.basis.sigma[j]).abs() <= 1e-6 * rom.basis.sigma[0],
                "hankel singular value {j}: {} vs {}",
                hsv[j],
                rom.basis.sigma[j]
            );
        }
    }

    #[test]
    fn biorthogonalize_fixed_point() {
        let q = numerics::svd(&random_matrix(6, 3, 12)).unwrap().left;
        let qc = complexify(&q);
        let (l, r) = biorthogonalize(&qc, &qc).unwrap();
        assert!((&l - &qc).norm() <= 1e-12);
        assert!((&r - &qc).norm() <= 1e-12);
    }

    #[test]
    fn biorthogonalize_random_full_rank() {
        let v = complexify(&(random_matrix(7, 4, 13) + DMatrix::identity(7, 4)));
        let (l, r) = biorthogonalize(&v, &v).unwrap();
        let prod = l.transpose() * &r;
        let ident = DMatrix::<C64>::identity(4, 4);
        assert!((prod - ident).norm() <= 1e-10);
    }

    #[test]
    fn biorthogonalize_two_column_hand_case() {
        let e1 = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let e2 = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let v_r = DMatrix::from_columns(&[e1.clone(), &e1 + &e2]);
        let v_l = DMatrix::from_columns(&[e1.clone(), e2.clone()]);
        let (l, r) = biorthogonalize(&v_l, &v_r).unwrap();
        let prod = l.transpose() * &r;
        let ident = DMatrix::<C64>::identity(2, 2);
        assert!((prod - ident).norm() <= 1e-12);
        // The second right column loses its e1 component.
        assert!((r.column(1)[0]).norm() <= 1e-12);
    }

    #[test]
    fn biorthogonalize_breakdown_detected() {
        let e1 = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let e2 = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let v_l = DMatrix::from_columns(&[e1.clone()]);
        let v_r = DMatrix::from_columns(&[e2.clone()]);
        match biorthogonalize(&v_l, &v_r) {
            Err(Error::BiorthogonalBreakdown { column, .. }) => assert_eq!(column, 0),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    fn diag_system(diag: &[f64], p_ones: usize) -> LtiSystem {
        let n = diag.len();
        let a = DMatrix::from_diagonal(&DVector::from_vec(diag.to_vec()));
        let b = DMatrix::from_element(n, p_ones, 1.0);
        let c = DMatrix::from_element(p_ones, n, 1.0);
        LtiSystem::new(a, b, c, 1.0).unwrap()
    }

    #[test]
    fn auto_route_recovers_diagonal_spectrum() {
        let sys = diag_system(&[0.9, 0.5, 0.1], 1);
        let steps: Vec<usize> = (0..5).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = eigenrecon_auto(&x, &y, &sys, 3, 3, 1e-6, 1e-10).unwrap();
        assert_eq!(rom.order(), 3);
        let mut got: Vec<f64> = rom.eigenvalues.iter().map(|z| z.re).collect();
        got.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (g, e) in got.iter().zip([0.9, 0.5, 0.1]) {
            assert_relative_eq!(*g, e, epsilon = 1e-8);
        }
        assert!(rom.biorth_defect <= 1e-8);
    }

    #[test]
    fn auto_route_sees_only_excited_modes() {
        // b orthogonal to the third eigenvector: only 2 modes can appear.
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.9, 0.5, 0.1]));
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let c = DMatrix::from_element(1, 3, 1.0);
        let sys = LtiSystem::new(a, b, c, 1.0).unwrap();
        let steps: Vec<usize> = (0..5).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = eigenrecon_auto(&x, &y, &sys, 2, 3, 1e-6, 1e-10).unwrap();
        assert_eq!(rom.order(), 2);
        let mut got: Vec<f64> = rom.eigenvalues.iter().map(|z| z.re).collect();
        got.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(got[0], 0.9, epsilon = 1e-8);
        assert_relative_eq!(got[1], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn auto_route_zero_match_tol_on_identical_routes() {
        // Symmetric system with B = C^T: both routes run on bit-identical
        // data, so even match_tol = 0 keeps the full intersection.
        let sys = diag_system(&[0.9, 0.5], 1);
        let steps: Vec<usize> = (0..4).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = eigenrecon_auto(&x, &y, &sys, 2, 2, 0.0, 1e-10).unwrap();
        assert_eq!(rom.order(), 2);
    }

    #[test]
    fn cross_route_recovers_diagonal_spectrum() {
        let sys = diag_system(&[0.9, 0.5], 1);
        let steps: Vec<usize> = (0..4).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = eigenrecon_cross(&x, &y, &sys, 2, 1e-10).unwrap();
        let mut got: Vec<f64> = rom.eigenvalues.iter().map(|z| z.re).collect();
        got.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_relative_eq!(got[0], 0.9, epsilon = 1e-10);
        assert_relative_eq!(got[1], 0.5, epsilon = 1e-10);
        assert!(rom.biorth_defect <= 1e-6);
        // A_r is the diagonal eigenvalue matrix by construction.
        for i in 0..2 {
            for j in 0..2 {
                if i != j {
                    assert_eq!(rom.a_r[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn cross_route_rank_shortfall() {
        let sys = diag_system(&[0.9, 0.5], 1);
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &[0, 1]).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &[0, 1]).unwrap();
        assert!(matches!(
            eigenrecon_cross(&x, &y, &sys, 3, 1e-10),
            Err(Error::RankShortfall { .. })
        ));
    }

    #[test]
    fn cross_route_modes_are_eigenvectors() {
        let sys = stable_random_system(6, 3, 3, 55);
        let steps: Vec<usize> = (0..12).collect();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom = eigenrecon_cross(&x, &y, &sys, 6, 1e-9).unwrap();
        let residuals = crate::modal::mode_residuals(&rom, &sys.a);
        let scale = sys.a.norm();
        for (i, r) in residuals.iter().enumerate() {
            assert!(*r <= 1e-7 * scale, "mode {i}: residual {r}");
        }
    }

    fn plan_for(sys: &LtiSystem, steps: &[usize], r: usize, s: usize, m1: usize, m2: usize, seed: u64) -> SamplingPlan {
        SamplingPlan::new(
            sys.input_dim(),
            sys.output_dim(),
            steps.to_vec(),
            steps.to_vec(),
            r,
            s,
            m1,
            m2,
            seed,
        )
    }

    #[test]
    fn rpod_identity_selection_equals_cross() {
        let sys = stable_random_system(6, 3, 3, 61);
        let steps: Vec<usize> = (0..8).collect();
        let plan = plan_for(&sys, &steps, 3, 3, 8, 8, 99);
        let rom_rpod = rpod(&sys, &plan, 5, 1e-9).unwrap();
        let x = simulate_impulse(&sys, SnapshotKind::Primal, &sys.b.clone(), &steps).unwrap();
        let y = simulate_impulse(&sys, SnapshotKind::Adjoint, &sys.c.transpose(), &steps).unwrap();
        let rom_cross = eigenrecon_cross(&x, &y, &sys, 5, 1e-9).unwrap();
        let d = hausdorff_distance(&rom_rpod.eigenvalues, &rom_cross.eigenvalues);
        assert!(d <= 1e-9, "distance {d}");
    }

    #[test]
    fn repeated_identical_seeds_zero_distance() {
        let sys = stable_random_system(6, 3, 3, 71);
        let steps: Vec<usize> = (0..8).collect();
        let plan = plan_for(&sys, &steps, 2, 2, 5, 5, 7);
        let (_, report) =
            rpod_repeated_with_seeds(&sys, &plan, 4, &[7, 7], 1e-9, 1e-6).unwrap();
        assert_eq!(report.max_distance, 0.0);
        assert!(!report.unstable);
    }

    #[test]
    fn repeated_needs_two_runs() {
        let sys = stable_random_system(4, 2, 2, 81);
        let plan = plan_for(&sys, &[0, 1, 2], 2, 2, 3, 3, 1);
        assert!(rpod_repeated(&sys, &plan, 2, 1, 1e-9, 1e-6).is_err());
    }
}
