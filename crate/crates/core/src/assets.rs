//! Part-cloud asset library.
//!
//! Object geometry is stored per asset id as a JSON map from part name to
//! an array of `[x, y, z]` points (one file per id, `<id>.json`). Raw
//! asset frames are y-up; scene-plan transforms bring them into the z-up
//! world frame.
//!
//! [`AssetLibrary::standin`] provides deterministic procedural clouds
//! (boxes and slabs per part) for every asset id referenced by the
//! bundled plans, so nothing here depends on external model downloads.

use crate::geom::Vec3;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad asset file {path}: {reason}")]
    Parse { path: String, reason: String },
}

/// In-memory collection of raw part clouds keyed by asset id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetLibrary {
    clouds: BTreeMap<String, BTreeMap<String, Vec<Vec3>>>,
}

impl AssetLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, asset_id: impl Into<String>, part: impl Into<String>, points: Vec<Vec3>) {
        self.clouds
            .entry(asset_id.into())
            .or_default()
            .insert(part.into(), points);
    }

    pub fn part_clouds(&self, asset_id: &str) -> Option<&BTreeMap<String, Vec<Vec3>>> {
        self.clouds.get(asset_id)
    }

    pub fn asset_ids(&self) -> impl Iterator<Item = &str> {
        self.clouds.keys().map(String::as_str)
    }

    /// Read every `<id>.json` in a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, AssetError> {
        let dir = dir.as_ref();
        let mut lib = Self::new();
        let entries = fs::read_dir(dir).map_err(|source| AssetError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| AssetError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            let path = entry.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let Some(asset_id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = fs::read_to_string(&path).map_err(|source| AssetError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let raw: BTreeMap<String, Vec<[f64; 3]>> =
                serde_json::from_str(&text).map_err(|e| AssetError::Parse {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
            for (part, points) in raw {
                lib.insert(
                    asset_id,
                    part,
                    points.into_iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
                );
            }
        }
        Ok(lib)
    }

    /// Write one `<id>.json` per asset, byte-stable (sorted part names,
    /// shortest round-trip floats).
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<(), AssetError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| AssetError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for (asset_id, parts) in &self.clouds {
            let raw: BTreeMap<&str, Vec<[f64; 3]>> = parts
                .iter()
                .map(|(name, pts)| {
                    (name.as_str(), pts.iter().map(|p| [p.x, p.y, p.z]).collect())
                })
                .collect();
            let path = dir.join(format!("{asset_id}.json"));
            let text = serde_json::to_string(&raw).expect("asset map serializes");
            fs::write(&path, text).map_err(|source| AssetError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }

    /// Deterministic stand-in clouds for all bundled asset ids.
    pub fn standin() -> Self {
        let mut lib = Self::new();

        // bed, long axis x, sleeps ~2.25 m once scaled 2.5x
        lib.insert("12747", "frame23", grid([-0.45, 0.0, -0.33], [0.45, 0.16, 0.33], [10, 2, 8]));
        lib.insert("12747", "mattress25", grid([-0.45, 0.16, -0.32], [0.45, 0.24, 0.32], [13, 2, 9]));
        lib.insert("12747", "pillow24", grid([-0.43, 0.24, -0.24], [-0.28, 0.30, 0.24], [4, 2, 7]));

        // sofa-style chair with two armrests
        lib.insert("45005", "seat_soft_surface42", grid([-0.20, 0.25, -0.20], [0.20, 0.30, 0.20], [9, 2, 9]));
        lib.insert("45005", "back_soft_surface47", grid([-0.20, 0.30, 0.16], [0.20, 0.62, 0.22], [9, 7, 2]));
        lib.insert("45005", "arm_sofa_style44", grid([-0.28, 0.30, -0.20], [-0.20, 0.42, 0.20], [2, 3, 9]));
        lib.insert("45005", "arm_sofa_style48", grid([0.20, 0.30, -0.20], [0.28, 0.42, 0.20], [2, 3, 9]));

        // plain chair
        lib.insert("37825", "seat_soft_surface58", grid([-0.22, 0.24, -0.22], [0.22, 0.29, 0.22], [9, 2, 9]));
        lib.insert("37825", "back_soft_surface62", grid([-0.22, 0.29, 0.18], [0.22, 0.60, 0.24], [9, 6, 2]));

        // table: board plus four corner legs
        lib.insert("21980", "board33", grid([-0.35, 0.34, -0.25], [0.35, 0.38, 0.25], [11, 2, 8]));
        let mut legs = Vec::new();
        for sx in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                legs.extend(grid(
                    [sx * 0.32 - 0.02, 0.0, sz * 0.22 - 0.02],
                    [sx * 0.32 + 0.02, 0.34, sz * 0.22 + 0.02],
                    [2, 5, 2],
                ));
            }
        }
        lib.insert("21980", "legs34", legs);

        // laptop: keyboard slab with a raised screen behind it
        lib.insert("11873", "keyboard15", grid([-0.25, 0.0, -0.35], [0.25, 0.03, 0.0], [9, 2, 6]));
        lib.insert("11873", "screen16", grid([-0.25, 0.03, 0.0], [0.25, 0.38, 0.05], [9, 6, 2]));

        // larger bed
        lib.insert("10873", "frame15", grid([-0.40, 0.0, -0.28], [0.40, 0.12, 0.28], [9, 2, 7]));
        lib.insert("10873", "mattress16", grid([-0.40, 0.12, -0.27], [0.40, 0.18, 0.27], [13, 2, 9]));
        lib.insert("10873", "pillow17", grid([-0.38, 0.18, -0.20], [-0.26, 0.23, 0.20], [4, 2, 6]));

        // demo-room furniture with unsuffixed part names
        lib.insert("90001", "mattress", grid([-0.45, 0.14, -0.32], [0.45, 0.22, 0.32], [13, 2, 9]));
        lib.insert("90001", "pillow", grid([-0.43, 0.22, -0.24], [-0.30, 0.28, 0.24], [4, 2, 7]));
        lib.insert("90002", "seat_surface", grid([-0.20, 0.25, -0.20], [0.20, 0.30, 0.20], [9, 2, 9]));
        lib.insert("90002", "back_soft_surface", grid([-0.20, 0.30, 0.16], [0.20, 0.60, 0.21], [9, 6, 2]));
        lib.insert("90002", "left_armrest_hard_surface", grid([-0.27, 0.30, -0.18], [-0.20, 0.42, 0.18], [2, 3, 8]));
        lib.insert("90002", "right_armrest_hard_surface", grid([0.20, 0.30, -0.18], [0.27, 0.42, 0.18], [2, 3, 8]));
        lib.insert("90003", "board", grid([-0.35, 0.36, -0.25], [0.35, 0.40, 0.25], [11, 2, 8]));
        lib.insert("90004", "keyboard", grid([-0.22, 0.0, -0.30], [0.22, 0.03, 0.0], [9, 2, 6]));
        lib.insert("90004", "screen", grid([-0.22, 0.03, 0.0], [0.22, 0.35, 0.04], [9, 6, 2]));

        lib
    }
}

/// Regular grid of points spanning `[min, max]` inclusive per axis.
fn grid(min: [f64; 3], max: [f64; 3], counts: [usize; 3]) -> Vec<Vec3> {
    let coord = |lo: f64, hi: f64, n: usize, i: usize| {
        if n <= 1 {
            (lo + hi) * 0.5
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
    for ix in 0..counts[0] {
        for iy in 0..counts[1] {
            for iz in 0..counts[2] {
                points.push(Vec3::new(
                    coord(min[0], max[0], counts[0], ix),
                    coord(min[1], max[1], counts[1], iy),
                    coord(min[2], max[2], counts[2], iz),
                ));
            }
        }
    }
    points
}
