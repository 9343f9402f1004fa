//! Reduced models in modal coordinates: the extracted eigenvalues, the left
//! and right mode matrices, and the reduced `(A_r, B_r, C_r)` triple.
//!
//! The left/right pairing is bilinear throughout: `Phi^T Psi = I` with a
//! plain transpose, no conjugation, which is the natural pairing between
//! left and right eigenvectors of a real matrix.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::Selection;
use crate::numerics::C64;
use crate::sampling::SamplingPlan;
use crate::textmat;

/// Which reconstruction route produced a modal ROM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomSource {
    Auto,
    Cross,
    Rpod,
}

/// Reduced model in modal coordinates. Modes are ordered by descending
/// eigenvalue modulus and nonreal modes appear in conjugate pairs with the
/// positive imaginary part first.
#[derive(Debug, Clone)]
pub struct ModalRom {
    pub eigenvalues: Vec<C64>,
    /// Left modal vectors, N x n; `phi.transpose() * psi = I`.
    pub phi: DMatrix<C64>,
    /// Right modal vectors, N x n.
    pub psi: DMatrix<C64>,
    /// Reduced dynamics; diagonal for the cross / randomized routes.
    pub a_r: DMatrix<C64>,
    pub b_r: DMatrix<C64>,
    pub c_r: DMatrix<C64>,
    pub source: RomSource,
    /// Singular (or correlation) values retained at the truncation.
    pub retained_sigma: Vec<f64>,
    /// `|Phi^T Psi - I|` observed at construction.
    pub biorth_defect: f64,
    /// Realized Hankel dimensions (rows, cols) for cost reporting.
    pub hankel_dims: Option<(usize, usize)>,
    /// Indices of flagged modes with modulus above 1.
    pub unstable_modes: Vec<usize>,
    pub plan: Option<SamplingPlan>,
    pub selection: Option<Selection>,
    pub dt: f64,
}

impl ModalRom {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn state_dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_r.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c_r.nrows()
    }

    /// Smallest over largest retained singular value; a conditioning
    /// diagnostic for the truncation (no threshold is enforced).
    pub fn sigma_ratio(&self) -> Option<f64> {
        match (self.retained_sigma.first(), self.retained_sigma.last()) {
            (Some(&max), Some(&min)) if max > 0.0 => Some(min / max),
            _ => None,
        }
    }

    /// Drop flagged unstable modes (conjugate partners go together).
    pub fn discard_unstable(&self) -> ModalRom {
        if self.unstable_modes.is_empty() {
            return self.clone();
        }
        let keep: Vec<usize> = (0..self.order())
            .filter(|i| !self.unstable_modes.contains(i))
            .collect();
        let take_cols = |m: &DMatrix<C64>| {
            let mut out = DMatrix::zeros(m.nrows(), keep.len());
            for (dst, &src) in keep.iter().enumerate() {
                out.set_column(dst, &m.column(src));
            }
            out
        };
        let mut a_r = DMatrix::zeros(keep.len(), keep.len());
        let mut b_r = DMatrix::zeros(keep.len(), self.b_r.ncols());
        for (dst, &src) in keep.iter().enumerate() {
            for (dst2, &src2) in keep.iter().enumerate() {
                a_r[(dst, dst2)] = self.a_r[(src, src2)];
            }
            b_r.set_row(dst, &self.b_r.row(src));
        }
        ModalRom {
            eigenvalues: keep.iter().map(|&i| self.eigenvalues[i]).collect(),
            phi: take_cols(&self.phi),
            psi: take_cols(&self.psi),
            a_r,
            b_r,
            c_r: take_cols(&self.c_r),
            source: self.source,
            retained_sigma: self.retained_sigma.clone(),
            biorth_defect: self.biorth_defect,
            hankel_dims: self.hankel_dims,
            unstable_modes: Vec::new(),
            plan: self.plan.clone(),
            selection: self.selection.clone(),
            dt: self.dt,
        }
    }

    /// Serialize to a directory: complex matrices in the shared text format
    /// plus a JSON manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        textmat::write_complex(&dir.join("phi.txt"), &self.phi)?;
        textmat::write_complex(&dir.join("psi.txt"), &self.psi)?;
        textmat::write_complex(&dir.join("a_r.txt"), &self.a_r)?;
        textmat::write_complex(&dir.join("b_r.txt"), &self.b_r)?;
        textmat::write_complex(&dir.join("c_r.txt"), &self.c_r)?;
        let manifest = RomManifest {
            order: self.order(),
            eigenvalues: self.eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            source: self.source,
            retained_sigma: self.retained_sigma.clone(),
            biorth_defect: self.biorth_defect,
            hankel_dims: self.hankel_dims,
            unstable_modes: self.unstable_modes.clone(),
            plan: self.plan.clone(),
            selection: self.selection.clone(),
            dt: self.dt,
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: RomManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let rom = ModalRom {
            eigenvalues: manifest
                .eigenvalues
                .iter()
                .map(|&(re, im)| C64::new(re, im))
                .collect(),
            phi: textmat::read_complex(&dir.join("phi.txt"))?,
            psi: textmat::read_complex(&dir.join("psi.txt"))?,
            a_r: textmat::read_complex(&dir.join("a_r.txt"))?,
            b_r: textmat::read_complex(&dir.join("b_r.txt"))?,
            c_r: textmat::read_complex(&dir.join("c_r.txt"))?,
            source: manifest.source,
            retained_sigma: manifest.retained_sigma,
            biorth_defect: manifest.biorth_defect,
            hankel_dims: manifest.hankel_dims,
            unstable_modes: manifest.unstable_modes,
            plan: manifest.plan,
            selection: manifest.selection,
            dt: manifest.dt,
        };
        if rom.psi.ncols() != rom.order() || rom.a_r.nrows() != rom.order() {
            return Err(Error::InvalidParameter(
                "modal ROM directory is internally inconsistent".into(),
            ));
        }
        Ok(rom)
    }
}

#[derive(Serialize, Deserialize)]
struct RomManifest {
    order: usize,
    eigenvalues: Vec<(f64, f64)>,
    source: RomSource,
    retained_sigma: Vec<f64>,
    biorth_defect: f64,
    hankel_dims: Option<(usize, usize)>,
    unstable_modes: Vec<usize>,
    plan: Option<SamplingPlan>,
    selection: Option<Selection>,
    dt: f64,
}

/// What drives a ROM simulation.
pub enum Excitation<'a> {
    /// Free response from a full-order initial state, projected by `Phi^T`.
    InitialState(&'a DVector<f64>),
    /// Forced response; one input column per step, `p x steps`.
    Inputs(&'a DMatrix<f64>),
}

/// Trajectory of a ROM simulation. Column `k` holds step `k`; step 0 is the
/// initial condition (zero for forced runs).
pub struct RomTrajectory {
    /// Real part of the outputs, `q x (steps + 1)`.
    pub outputs: DMatrix<f64>,
    pub modal_states: DMatrix<C64>,
    /// Largest imaginary magnitude seen in any output; near zero whenever
    /// the mode set is conjugate-closed and the excitation is real.
    pub max_imag: f64,
}

/// Run the modal recursion `psi_k = A_r psi_{k-1} + B_r u_k`,
/// `y_k = C_r psi_k`.
pub fn rom_simulate(rom: &ModalRom, excitation: Excitation, steps: usize) -> Result<RomTrajectory> {
    let n = rom.order();
    let mut state = DVector::<C64>::zeros(n);
    let mut inputs: Option<&DMatrix<f64>> = None;
    match excitation {
        Excitation::InitialState(x0) => {
            if x0.len() != rom.state_dim() {
                return Err(Error::DimensionMismatch {
                    context: "rom_simulate initial state".into(),
                    left_rows: x0.len(),
                    left_cols: 1,
                    right_rows: rom.state_dim(),
                    right_cols: 1,
                });
            }
            let x0c = x0.map(|v| C64::new(v, 0.0));
            state = rom.phi.transpose() * x0c;
        }
        Excitation::Inputs(u) => {
            if u.nrows() != rom.input_dim() {
                return Err(Error::DimensionMismatch {
                    context: "rom_simulate input rows".into(),
                    left_rows: u.nrows(),
                    left_cols: u.ncols(),
                    right_rows: rom.input_dim(),
                    right_cols: steps,
                });
            }
            if u.ncols() != steps {
                return Err(Error::InvalidParameter(format!(
                    "need one input column per step: got {} columns for {} steps",
                    u.ncols(),
                    steps
                )));
            }
            inputs = Some(u);
        }
    }

    let q = rom.output_dim();
    let mut outputs = DMatrix::zeros(q, steps + 1);
    let mut modal_states = DMatrix::zeros(n, steps + 1);
    let mut max_imag = 0.0_f64;

    let record = |k: usize, state: &DVector<C64>, outputs: &mut DMatrix<f64>, max_imag: &mut f64| {
        let y = &rom.c_r * state;
        for (i, z) in y.iter().enumerate() {
            outputs[(i, k)] = z.re;
            *max_imag = max_imag.max(z.im.abs());
        }
    };

    modal_states.set_column(0, &state);
    record(0, &state, &mut outputs, &mut max_imag);
    for k in 1..=steps {
        state = &rom.a_r * state;
        if let Some(u) = inputs {
            let uc = u.column(k - 1).map(|v| C64::new(v, 0.0));
            state += &rom.b_r * uc;
        }
        modal_states.set_column(k, &state);
        record(k, &state, &mut outputs, &mut max_imag);
    }

    Ok(RomTrajectory {
        outputs,
        modal_states,
        max_imag,
    })
}

/// Reconstruct full-order states `Re(Psi psi_k)` from modal states.
pub fn reconstruct_states(rom: &ModalRom, modal_states: &DMatrix<C64>) -> DMatrix<f64> {
    (&rom.psi * modal_states).map(|z| z.re)
}

/// Residuals `|A psi_i - lambda_i psi_i|` of every mode against a full
/// operator; a validation aid for tests.
pub fn mode_residuals(rom: &ModalRom, a: &DMatrix<f64>) -> Vec<f64> {
    let ac = crate::numerics::complexify(a);
    (0..rom.order())
        .map(|i| {
            let v = rom.psi.column(i).clone_owned();
            (&ac * &v - &v * rom.eigenvalues[i]).norm()
        })
        .collect()
}

/// Real-coefficient form of a modal ROM: each conjugate pair becomes a
/// 2x2 rotation-scaling block. Returns the real `(A, B, C)` triple plus the
/// projector taking a full-order initial state into the real modal
/// coordinates.
pub struct RealifiedRom {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub projector: DMatrix<f64>,
}

pub fn realify(rom: &ModalRom) -> Result<RealifiedRom> {
    let n = rom.order();
    let (big_n, p, q) = (rom.state_dim(), rom.input_dim(), rom.output_dim());
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, p);
    let mut c = DMatrix::zeros(q, n);
    let mut projector = DMatrix::zeros(n, big_n);

    let mut i = 0;
    while i < n {
        let lambda = rom.eigenvalues[i];
        if lambda.im == 0.0 {
            a[(i, i)] = lambda.re;
            for j in 0..p {
                b[(i, j)] = rom.b_r[(i, j)].re;
            }
            for j in 0..q {
                c[(j, i)] = rom.c_r[(j, i)].re;
            }
            for j in 0..big_n {
                projector[(i, j)] = rom.phi[(j, i)].re;
            }
            i += 1;
        } else {
            let partner = i + 1;
            let closed = partner < n
                && (rom.eigenvalues[partner].re - lambda.re).abs() <= 1e-9 * lambda.norm().max(1.0)
                && (rom.eigenvalues[partner].im + lambda.im).abs() <= 1e-9 * lambda.norm().max(1.0);
            if !closed {
                return Err(Error::InvalidParameter(format!(
                    "mode {i} has no adjacent conjugate partner; cannot realify"
                )));
            }
            let (re, im) = (lambda.re, lambda.im);
            a[(i, i)] = re;
            a[(i, partner)] = -im;
            a[(partner, i)] = im;
            a[(partner, partner)] = re;
            for j in 0..p {
                b[(i, j)] = rom.b_r[(i, j)].re;
                b[(partner, j)] = rom.b_r[(i, j)].im;
            }
            for j in 0..q {
                c[(j, i)] = 2.0 * rom.c_r[(j, i)].re;
                c[(j, partner)] = -2.0 * rom.c_r[(j, i)].im;
            }
            for j in 0..big_n {
                projector[(i, j)] = rom.phi[(j, i)].re;
                projector[(partner, j)] = rom.phi[(j, i)].im;
            }
            i += 2;
        }
    }
    Ok(RealifiedRom { a, b, c, projector })
}

/// One matched eigenvalue pair between two sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
}

/// Greedy nearest-neighbor matching in the complex plane: repeatedly pair
/// the globally closest unmatched eigenvalues, ties broken by smaller index.
pub fn match_eigenvalues(a: &[C64], b: &[C64]) -> Vec<MatchedPair> {
    let mut candidates: Vec<MatchedPair> = Vec::with_capacity(a.len() * b.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            candidates.push(MatchedPair {
                left: i,
                right: j,
                distance: (x - y).norm(),
            });
        }
    }
    candidates.sort_by(|u, v| {
        u.distance
            .partial_cmp(&v.distance)
            .unwrap()
            .then(u.left.cmp(&v.left))
            .then(u.right.cmp(&v.right))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut matched = Vec::new();
    for pair in candidates {
        if !used_a[pair.left] && !used_b[pair.right] {
            used_a[pair.left] = true;
            used_b[pair.right] = true;
            matched.push(pair);
        }
    }
    matched
}

/// Default matching tolerance: `1e-6` times the largest modulus present.
pub fn default_match_tol(a: &[C64], b: &[C64]) -> f64 {
    let max_mod = a
        .iter()
        .chain(b.iter())
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    1e-6 * max_mod.max(1.0)
}

/// Symmetric Hausdorff distance between two eigenvalue sets.
pub fn hausdorff_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let directed = |from: &[C64], to: &[C64]| {
        from.iter()
            .map(|x| to.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
