//! Linearized channel flow between no-slip walls: wall-normal velocity and
//! vorticity perturbations around a steady base flow, periodic in the
//! spanwise direction, forced in the wall-normal direction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{propagator, Scheme};
use crate::error::{Error, Result};
use crate::snapshots::LtiSystem;

/// Steady base flow profile; its shear couples velocity into vorticity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFlow {
    /// `U(y) = 1 - y^2`, shear `U'(y) = -2y`.
    Poiseuille,
    /// Constant profile; the two fields decouple.
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub reynolds: f64,
    /// Wall-normal nodes across `y` in `[-1, 1]`, walls included.
    pub ny: usize,
    /// Spanwise nodes across one period `z` in `[0, 2*pi)`.
    pub nz: usize,
    pub dt: f64,
    pub base_flow: BaseFlow,
    /// Spanwise indices of the point body forces on the centerline row.
    pub forcing_z: Vec<usize>,
    /// Explicit measured state indices; the default near-wall set covers
    /// both fields at the first interior row of each wall for the leading
    /// `nz - 1` spanwise stations (4 * (nz - 1) rows).
    pub measurements: Option<Vec<usize>>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            reynolds: 100.0,
            ny: 21,
            nz: 21,
            dt: 1.0,
            base_flow: BaseFlow::Poiseuille,
            forcing_z: vec![5, 15],
            measurements: None,
        }
    }
}

/// Index helper for the stacked `(v; eta)` state.
#[derive(Debug, Clone, Copy)]
pub struct ChannelLayout {
    pub ny: usize,
    pub nz: usize,
}

impl ChannelLayout {
    pub fn v_index(&self, iy: usize, iz: usize) -> usize {
        iz * self.ny + iy
    }

    pub fn eta_index(&self, iy: usize, iz: usize) -> usize {
        self.ny * self.nz + iz * self.ny + iy
    }

    pub fn state_dim(&self) -> usize {
        2 * self.ny * self.nz
    }

    pub fn is_wall(&self, iy: usize) -> bool {
        iy == 0 || iy == self.ny - 1
    }
}

/// Assemble the coupled `(v; eta)` system with the implicit scheme. Wall
/// rows are frozen (no-slip values stay at zero); the spanwise axis wraps.
pub fn build_channel(cfg: &ChannelConfig) -> Result<LtiSystem> {
    if cfg.ny < 3 || cfg.nz < 3 {
        return Err(Error::InvalidParameter(format!(
            "channel grid needs at least 3 nodes per axis, got {}x{}",
            cfg.ny, cfg.nz
        )));
    }
    if !(cfg.reynolds > 0.0) {
        return Err(Error::InvalidParameter(
            "Reynolds number must be positive".into(),
        ));
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let layout = ChannelLayout {
        ny: cfg.ny,
        nz: cfg.nz,
    };
    let n = layout.state_dim();
    let hy = 2.0 / (cfg.ny - 1) as f64;
    let hz = std::f64::consts::TAU / cfg.nz as f64;
    let inv_r = 1.0 / cfg.reynolds;
    let y_of = |iy: usize| -1.0 + hy * iy as f64;

    let mut l = DMatrix::zeros(n, n);
    for iz in 0..cfg.nz {
        let zm = (iz + cfg.nz - 1) % cfg.nz;
        let zp = (iz + 1) % cfg.nz;
        for iy in 1..cfg.ny - 1 {
            for field in 0..2 {
                let at = |iyy: usize, izz: usize| {
                    if field == 0 {
                        layout.v_index(iyy, izz)
                    } else {
                        layout.eta_index(iyy, izz)
                    }
                };
                let row = at(iy, iz);
                // (1/R) * laplacian, central in both axes, periodic in z.
                l[(row, at(iy - 1, iz))] += inv_r / (hy * hy);
                l[(row, at(iy + 1, iz))] += inv_r / (hy * hy);
                l[(row, at(iy, zm))] += inv_r / (hz * hz);
                l[(row, at(iy, zp))] += inv_r / (hz * hz);
                l[(row, row)] -= 2.0 * inv_r * (1.0 / (hy * hy) + 1.0 / (hz * hz));
            }
            if cfg.base_flow == BaseFlow::Poiseuille {
                // -U'(y) dv/dz feeding the vorticity equation.
                let du = -2.0 * y_of(iy);
                let row = layout.eta_index(iy, iz);
                l[(row, layout.v_index(iy, zp))] -= du / (2.0 * hz);
                l[(row, layout.v_index(iy, zm))] += du / (2.0 * hz);
            }
        }
    }

    let mut a = propagator(&l, cfg.dt, Scheme::Implicit)?;
    // No-slip rows hold their (zero) value exactly.
    for iz in 0..cfg.nz {
        for iy in [0, cfg.ny - 1] {
            for row in [layout.v_index(iy, iz), layout.eta_index(iy, iz)] {
                for col in 0..n {
                    a[(row, col)] = if col == row { 1.0 } else { 0.0 };
                }
            }
        }
    }

    let mid = cfg.ny / 2;
    let mut b = DMatrix::zeros(n, cfg.forcing_z.len());
    for (j, &iz) in cfg.forcing_z.iter().enumerate() {
        if iz >= cfg.nz {
            return Err(Error::IndexOutOfRange {
                context: "channel forcing spanwise index".into(),
                index: iz,
                size: cfg.nz,
            });
        }
        b[(layout.v_index(mid, iz), j)] = 1.0;
    }

    let rows: Vec<usize> = match &cfg.measurements {
        Some(nodes) => {
            for &node in nodes {
                if node >= n {
                    return Err(Error::IndexOutOfRange {
                        context: "channel measurement index".into(),
                        index: node,
                        size: n,
                    });
                }
            }
            nodes.clone()
        }
        None => {
            let mut rows = Vec::with_capacity(4 * (cfg.nz - 1));
            for field in 0..2 {
                for iy in [1, cfg.ny - 2] {
                    for iz in 0..cfg.nz - 1 {
                        rows.push(if field == 0 {
                            layout.v_index(iy, iz)
                        } else {
                            layout.eta_index(iy, iz)
                        });
                    }
                }
            }
            rows
        }
    };
    let mut c = DMatrix::zeros(rows.len(), n);
    for (row, &node) in rows.iter().enumerate() {
        c[(row, node)] = 1.0;
    }

    LtiSystem::new(a, b, c, cfg.dt)
}
