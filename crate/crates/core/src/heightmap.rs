//! Ego-centric heightmap: a square grid of surrounding-geometry heights
//! sampled in the humanoid's yaw frame, used as the scene-awareness
//! observation.

use crate::geom::{rot_z, Vec3};
use crate::sceneplan::SceneInstance;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Sampling parameters. The grid spans `[-extent, extent]` on both local
/// axes; a cell takes the max height of all points within `cell_radius`
/// of its center (horizontally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeightmapConfig {
    pub grid_n: usize,
    pub extent: f64,
    pub cell_radius: f64,
}

impl Default for HeightmapConfig {
    fn default() -> Self {
        HeightmapConfig { grid_n: 16, extent: 1.0, cell_radius: 0.12 }
    }
}

impl HeightmapConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.grid_n < 2 {
            return Err(format!("grid_n must be >= 2, got {}", self.grid_n));
        }
        if !(self.extent > 0.0) || !(self.cell_radius > 0.0) {
            return Err("extent and cell_radius must be positive".into());
        }
        Ok(())
    }
}

/// Sampled heights, row-major: `values[ix * grid_n + iy]` where `ix`
/// walks the local x axis (right) and `iy` the local y axis (back).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heightmap {
    pub grid_n: usize,
    pub values: Vec<f64>,
}

impl Heightmap {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.grid_n + iy]
    }

    /// CSV form: one row per local-x index, comma-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for ix in 0..self.grid_n {
            for iy in 0..self.grid_n {
                if iy > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.get(ix, iy));
            }
            out.push('\n');
        }
        out
    }

    /// ASCII PGM image for quick visual inspection; brighter is higher.
    /// Heights are scaled linearly from `[min, max]` to `[0, 255]`.
    pub fn to_pgm(&self) -> String {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        let mut out = format!("P2\n{} {}\n255\n", self.grid_n, self.grid_n);
        for ix in 0..self.grid_n {
            for iy in 0..self.grid_n {
                if iy > 0 {
                    out.push(' ');
                }
                let g = ((self.get(ix, iy) - lo) / span * 255.0).round() as u32;
                let _ = write!(out, "{}", g.min(255));
            }
            out.push('\n');
        }
        out
    }
}

/// Cell-center offsets along one axis, in local coordinates.
fn cell_centers(cfg: &HeightmapConfig) -> Vec<f64> {
    let step = 2.0 * cfg.extent / cfg.grid_n as f64;
    (0..cfg.grid_n)
        .map(|i| -cfg.extent + (i as f64 + 0.5) * step)
        .collect()
}

/// Sample the heightmap around `root_pos` with the grid oriented by
/// `root_yaw`. Cells with no nearby point read the ground height; heights
/// are clamped below by the ground.
pub fn sample_heightmap(
    scene: &SceneInstance,
    root_pos: &Vec3,
    root_yaw: f64,
    cfg: &HeightmapConfig,
) -> Heightmap {
    debug_assert!(cfg.validate().is_ok());
    let centers = cell_centers(cfg);
    let rot = rot_z(root_yaw);
    let r2 = cfg.cell_radius * cfg.cell_radius;
    let mut values = vec![scene.ground_height; cfg.grid_n * cfg.grid_n];
    for (ix, &lx) in centers.iter().enumerate() {
        for (iy, &ly) in centers.iter().enumerate() {
            let center = rot * Vec3::new(lx, ly, 0.0) + Vec3::new(root_pos.x, root_pos.y, 0.0);
            let mut best = scene.ground_height;
            for p in scene.all_points() {
                let dx = p.x - center.x;
                let dy = p.y - center.y;
                if dx * dx + dy * dy <= r2 && p.z > best {
                    best = p.z;
                }
            }
            values[ix * cfg.grid_n + iy] = best;
        }
    }
    Heightmap { grid_n: cfg.grid_n, values }
}
