//! 2-D advection-diffusion contaminant transport on a rectangular field
//! with zero-flux boundaries, rectangular obstacles, and point sources.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{propagator, GridSpec2D};
use crate::error::{Error, Result};
use crate::snapshots::LtiSystem;

/// Point source: unit load at a grid node scaled by `strength`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub ix: usize,
    pub iy: usize,
    pub strength: f64,
}

/// Rectangular obstacle mask in node indices, inclusive on both ends.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectMask {
    pub ix0: usize,
    pub iy0: usize,
    pub ix1: usize,
    pub iy1: usize,
}

impl RectMask {
    fn contains(&self, ix: usize, iy: usize) -> bool {
        ix >= self.ix0 && ix <= self.ix1 && iy >= self.iy0 && iy <= self.iy1
    }
}

/// Physics of the contaminant transport field. Boundaries are zero-flux for
/// diffusion; advection carries mass out through downwind edges and
/// obstacles behave as internal reflective walls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollutantConfig {
    /// Dispersion coefficients, m^2/s.
    pub d_x: f64,
    pub d_y: f64,
    /// Constant velocity field, m/s.
    pub v_x: f64,
    pub v_y: f64,
    pub sources: Vec<Source>,
    #[serde(default)]
    pub obstacles: Vec<RectMask>,
    /// Measured node indices; full-state measurements when absent.
    pub measurements: Option<Vec<usize>>,
}

impl PollutantConfig {
    pub fn validate(&self, grid: &GridSpec2D) -> Result<()> {
        if self.d_x < 0.0 || self.d_y < 0.0 {
            return Err(Error::InvalidParameter(
                "dispersion coefficients must be nonnegative".into(),
            ));
        }
        for o in &self.obstacles {
            if o.ix1 >= grid.nx || o.iy1 >= grid.ny || o.ix0 > o.ix1 || o.iy0 > o.iy1 {
                return Err(Error::InvalidParameter(format!(
                    "obstacle ({},{})..({},{}) leaves the {}x{} grid",
                    o.ix0, o.iy0, o.ix1, o.iy1, grid.nx, grid.ny
                )));
            }
        }
        for s in &self.sources {
            if s.ix >= grid.nx || s.iy >= grid.ny {
                return Err(Error::InvalidParameter(format!(
                    "source ({},{}) leaves the {}x{} grid",
                    s.ix, s.iy, grid.nx, grid.ny
                )));
            }
            if self.obstacles.iter().any(|o| o.contains(s.ix, s.iy)) {
                return Err(Error::InvalidParameter(format!(
                    "source ({},{}) sits inside an obstacle",
                    s.ix, s.iy
                )));
            }
        }
        Ok(())
    }
}

/// Discretize the transport operator (central differences for diffusion,
/// donor-cell upwind fluxes for advection) and return the one-step system.
/// `B` has one unit-load column per source; `C` defaults to the full state.
pub fn build_pollutant(grid: &GridSpec2D, cfg: &PollutantConfig) -> Result<LtiSystem> {
    grid.validate()?;
    cfg.validate(grid)?;
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.node_count();
    let idx = |ix: usize, iy: usize| iy * nx + ix;
    let obstacle: Vec<bool> = (0..n)
        .map(|m| {
            let (ix, iy) = (m % nx, m / nx);
            cfg.obstacles.iter().any(|o| o.contains(ix, iy))
        })
        .collect();

    let (hx, hy) = (grid.hx(), grid.hy());
    let mut l = DMatrix::zeros(n, n);

    // Pairwise flux exchange across every interior fluid-fluid face keeps
    // the diffusive part mass conserving; advective flux leaves the domain
    // only through downwind outer edges.
    let mut exchange = |a: usize, b: usize, diff: f64, vel: f64, h: f64| {
        // a is the lower-index side of the face, flow a -> b for vel > 0.
        let d = diff / (h * h);
        l[(a, b)] += d;
        l[(a, a)] -= d;
        l[(b, a)] += d;
        l[(b, b)] -= d;
        let w = vel.abs() / h;
        if vel > 0.0 {
            l[(b, a)] += w;
            l[(a, a)] -= w;
        } else if vel < 0.0 {
            l[(a, b)] += w;
            l[(b, b)] -= w;
        }
    };

    for iy in 0..ny {
        for ix in 0..nx {
            let m = idx(ix, iy);
            if obstacle[m] {
                continue;
            }
            if ix + 1 < nx && !obstacle[idx(ix + 1, iy)] {
                exchange(m, idx(ix + 1, iy), cfg.d_x, cfg.v_x, hx);
            }
            if iy + 1 < ny && !obstacle[idx(ix, iy + 1)] {
                exchange(m, idx(ix, iy + 1), cfg.d_y, cfg.v_y, hy);
            }
        }
    }
    // Outflow through domain edges (advective only; diffusion is zero-flux).
    for iy in 0..ny {
        let left = idx(0, iy);
        if !obstacle[left] && cfg.v_x < 0.0 {
            l[(left, left)] -= cfg.v_x.abs() / hx;
        }
        let right = idx(nx - 1, iy);
        if !obstacle[right] && cfg.v_x > 0.0 {
            l[(right, right)] -= cfg.v_x / hx;
        }
    }
    for ix in 0..nx {
        let bottom = idx(ix, 0);
        if !obstacle[bottom] && cfg.v_y < 0.0 {
            l[(bottom, bottom)] -= cfg.v_y.abs() / hy;
        }
        let top = idx(ix, ny - 1);
        if !obstacle[top] && cfg.v_y > 0.0 {
            l[(top, top)] -= cfg.v_y / hy;
        }
    }

    let a = propagator(&l, grid.dt, grid.scheme)?;

    let mut b = DMatrix::zeros(n, cfg.sources.len());
    for (j, s) in cfg.sources.iter().enumerate() {
        b[(idx(s.ix, s.iy), j)] = s.strength;
    }
    let c = match &cfg.measurements {
        None => DMatrix::identity(n, n),
        Some(nodes) => {
            let mut c = DMatrix::zeros(nodes.len(), n);
            for (row, &node) in nodes.iter().enumerate() {
                if node >= n {
                    return Err(Error::IndexOutOfRange {
                        context: "pollutant measurement node".into(),
                        index: node,
                        size: n,
                    });
                }
                c[(row, node)] = 1.0;
            }
            c
        }
    };
    LtiSystem::new(a, b, c, grid.dt)
}
