//! Benchmark system generators: a pollutant-transport advection-diffusion
//! field, a linearized channel flow, a Fokker-Planck propagator for a damped
//! Duffing oscillator, and synthetic systems with known eigenstructure for
//! oracle testing.

mod channel;
mod fpk;
mod pollutant;
mod synthetic;

pub use channel::{build_channel, BaseFlow, ChannelConfig, ChannelLayout};
pub use fpk::{
    build_duffing_fpk, build_fpk_operator, conservation_defect, DuffingFpkConfig, FpkGrid,
};
pub use pollutant::{build_pollutant, PollutantConfig, RectMask, Source};
pub use synthetic::{build_synthetic, GroundTruth, SyntheticConfig};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// Time discretization of a continuous generator `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Explicit,
    Implicit,
}

/// 2-D grid description shared by the PDE generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec2D {
    pub nx: usize,
    pub ny: usize,
    /// Domain lengths in meters.
    pub lx: f64,
    pub ly: f64,
    /// Timestep in seconds.
    pub dt: f64,
    pub scheme: Scheme,
}

impl GridSpec2D {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter(
                "grid lengths and dt must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }
}

/// One-step propagator from a continuous generator: `I + dt L` (explicit)
/// or `(I - dt L)^-1` (implicit, materialized densely).
///
/// The explicit branch requires `dt <= 1 / max|L_ii|`; for the M-matrix
/// stencils assembled here that keeps every entry of `I + dt L` nonnegative
/// with column sums at most one, so the spectral radius stays within 1.
pub fn propagator(l: &DMatrix<f64>, dt: f64, scheme: Scheme) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    match scheme {
        Scheme::Explicit => {
            let max_diag = (0..n).map(|i| l[(i, i)].abs()).fold(0.0_f64, f64::max);
            if max_diag > 0.0 {
                let max_stable_dt = 1.0 / max_diag;
                if dt > max_stable_dt * (1.0 + 1e-12) {
                    return Err(Error::CflViolation { dt, max_stable_dt });
                }
            }
            let mut a = l * dt;
            for i in 0..n {
                a[(i, i)] += 1.0;
            }
            Ok(a)
        }
        Scheme::Implicit => {
            let mut m = l * (-dt);
            for i in 0..n {
                m[(i, i)] += 1.0;
            }
            numerics::solve_linear(&m, &DMatrix::identity(n, n))
        }
    }
}
