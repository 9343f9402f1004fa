//! Fokker-Planck propagator for a damped Duffing oscillator: probability
//! density evolution on a phase-plane grid, discretized in conservative
//! flux form so the total mass is preserved exactly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{propagator, Scheme};
use crate::error::{Error, Result};
use crate::snapshots::LtiSystem;

/// Phase-plane grid over position `x` and velocity `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpkGrid {
    pub nx: usize,
    pub nv: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub dt: f64,
    pub scheme: Scheme,
}

impl FpkGrid {
    pub fn validate(&self) -> Result<()> {
        // Coarser grids cannot resolve the soft-spring double well.
        if self.nx < 8 || self.nv < 8 {
            return Err(Error::InvalidParameter(format!(
                "FPK grid needs at least 8 nodes per axis, got {}x{}",
                self.nx, self.nv
            )));
        }
        if !(self.x_max > self.x_min && self.v_max > self.v_min && self.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "FPK grid extents and dt must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.nv
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hv(&self) -> f64 {
        (self.v_max - self.v_min) / (self.nv - 1) as f64
    }

    pub fn x_of(&self, i: usize) -> f64 {
        self.x_min + self.hx() * i as f64
    }

    pub fn v_of(&self, j: usize) -> f64 {
        self.v_min + self.hv() * j as f64
    }
}

/// Damped Duffing oscillator `x'' + eta x' + alpha x + beta x^3 = g G(t)`
/// with white-noise intensity `q_intensity`, plus the surrogate trajectory
/// ensembles standing in for input/output matrices: Gaussian density bumps
/// placed deterministically across the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuffingFpkConfig {
    pub eta_damp: f64,
    pub alpha_lin: f64,
    pub beta_cubic: f64,
    pub g_noise: f64,
    pub q_intensity: f64,
    pub grid: FpkGrid,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub bump_sigma: f64,
}

impl Default for DuffingFpkConfig {
    fn default() -> Self {
        Self {
            eta_damp: 10.0,
            alpha_lin: -15.0,
            beta_cubic: 30.0,
            g_noise: 1.0,
            q_intensity: 1.0,
            grid: FpkGrid {
                nx: 24,
                nv: 24,
                x_min: -1.5,
                x_max: 1.5,
                v_min: -3.0,
                v_max: 3.0,
                dt: 2e-3,
                scheme: Scheme::Implicit,
            },
            n_inputs: 40,
            n_outputs: 40,
            bump_sigma: 0.25,
        }
    }
}

/// Conservative finite-volume generator for `dW/dt = -div(f W) + D d^2W/dv^2`
/// with zero-flux outer boundaries. Each interior face exchanges flux
/// pairwise between its two cells, so every column of the generator sums to
/// zero exactly and density mass is preserved.
pub fn build_fpk_operator(
    grid: &FpkGrid,
    drift: impl Fn(f64, f64) -> (f64, f64),
    diffusion_vv: f64,
) -> DMatrix<f64> {
    let (nx, nv) = (grid.nx, grid.nv);
    let n = nx * nv;
    let (hx, hv) = (grid.hx(), grid.hv());
    let idx = |i: usize, j: usize| j * nx + i;
    let mut l = DMatrix::zeros(n, n);

    let advect = |donor_candidate_a: usize, b: usize, vel: f64, h: f64, l: &mut DMatrix<f64>| {
        // Face between cells a (lower coordinate) and b; vel > 0 flows a -> b.
        let a = donor_candidate_a;
        let w = vel.abs() / h;
        if vel > 0.0 {
            l[(b, a)] += w;
            l[(a, a)] -= w;
        } else if vel < 0.0 {
            l[(a, b)] += w;
            l[(b, b)] -= w;
        }
    };

    for j in 0..nv {
        for i in 0..nx {
            let m = idx(i, j);
            // x-face toward i+1 at (x_face, v_j): drift component f1.
            if i + 1 < nx {
                let x_face = 0.5 * (grid.x_of(i) + grid.x_of(i + 1));
                let (f1, _) = drift(x_face, grid.v_of(j));
                advect(m, idx(i + 1, j), f1, hx, &mut l);
            }
            // v-face toward j+1 at (x_i, v_face): drift component f2 plus diffusion.
            if j + 1 < nv {
                let v_face = 0.5 * (grid.v_of(j) + grid.v_of(j + 1));
                let (_, f2) = drift(grid.x_of(i), v_face);
                let m_up = idx(i, j + 1);
                advect(m, m_up, f2, hv, &mut l);
                let d = diffusion_vv / (hv * hv);
                l[(m, m_up)] += d;
                l[(m, m)] -= d;
                l[(m_up, m)] += d;
                l[(m_up, m_up)] -= d;
            }
        }
    }
    l
}

/// Largest absolute column sum of a generator; zero for a conservative
/// discretization.
pub fn conservation_defect(l: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..l.ncols() {
        worst = worst.max(l.column(j).sum().abs());
    }
    worst
}

/// Build the one-step FPK propagator for the Duffing oscillator along with
/// surrogate `B` (input densities) and `C` (output functionals) built from
/// Gaussian bumps.
pub fn build_duffing_fpk(cfg: &DuffingFpkConfig) -> Result<LtiSystem> {
    cfg.grid.validate()?;
    if cfg.n_inputs == 0 || cfg.n_outputs == 0 {
        return Err(Error::InvalidParameter(
            "FPK surrogate ensembles need at least one input and output".into(),
        ));
    }
    let n = cfg.grid.node_count();
    if cfg.n_inputs > n || cfg.n_outputs > n {
        return Err(Error::InvalidParameter(
            "more surrogate trajectories than grid nodes".into(),
        ));
    }
    if !(cfg.bump_sigma > 0.0) {
        return Err(Error::InvalidParameter("bump sigma must be positive".into()));
    }

    let (eta, alpha, beta) = (cfg.eta_damp, cfg.alpha_lin, cfg.beta_cubic);
    let drift = move |x: f64, v: f64| (v, -eta * v - alpha * x - beta * x * x * x);
    let d_vv = 0.5 * cfg.g_noise * cfg.g_noise * cfg.q_intensity;
    let l = build_fpk_operator(&cfg.grid, drift, d_vv);
    debug_assert!(conservation_defect(&l) <= 1e-8 * l.norm().max(1.0));
    let a = propagator(&l, cfg.grid.dt, cfg.grid.scheme)?;

    let b = bump_matrix(&cfg.grid, cfg.n_inputs, cfg.bump_sigma, 0.5);
    let c = bump_matrix(&cfg.grid, cfg.n_outputs, cfg.bump_sigma, 0.25).transpose();
    LtiSystem::new(a, b, c, cfg.grid.dt)
}

// Gaussian density bumps at deterministic grid positions; `offset` staggers
// the input and output placements against each other.
fn bump_matrix(grid: &FpkGrid, count: usize, sigma: f64, offset: f64) -> DMatrix<f64> {
    let n = grid.node_count();
    let mut b = DMatrix::zeros(n, count);
    for k in 0..count {
        let center_lin = (((k as f64 + offset) / count as f64) * n as f64) as usize % n;
        let (ci, cj) = (center_lin % grid.nx, center_lin / grid.nx);
        let (cx, cv) = (grid.x_of(ci), grid.v_of(cj));
        let mut total = 0.0;
        for j in 0..grid.nv {
            for i in 0..grid.nx {
                let dx = grid.x_of(i) - cx;
                let dv = grid.v_of(j) - cv;
                let w = (-(dx * dx + dv * dv) / (2.0 * sigma * sigma)).exp();
                b[(j * grid.nx + i, k)] = w;
                total += w;
            }
        }
        for v in b.column_mut(k).iter_mut() {
            *v /= total;
        }
    }
    b
}
