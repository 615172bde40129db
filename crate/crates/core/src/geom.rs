//! Small geometry helpers shared across the crate: z-up world frame,
//! extrinsic XYZ Euler rotations, axis-aligned bounds.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// World-space 3-vector (meters). The world frame is z-up.
pub type Vec3 = Vector3<f64>;

/// Rotation matrix for one Euler triple `(rx, ry, rz)` in radians,
/// applied extrinsically: X first, then Y, then Z.
pub fn euler_xyz(rx: f64, ry: f64, rz: f64) -> Matrix3<f64> {
    let (sx, cx) = rx.sin_cos();
    let (sy, cy) = ry.sin_cos();
    let (sz, cz) = rz.sin_cos();
    let rot_x = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let rot_y = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rot_z = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    rot_z * rot_y * rot_x
}

/// Rotation about the world z axis.
pub fn rot_z(yaw: f64) -> Matrix3<f64> {
    euler_xyz(0.0, 0.0, yaw)
}

/// Yaw component of a rotation matrix (heading of the rotated x axis).
pub fn yaw_of(rot: &Matrix3<f64>) -> f64 {
    rot[(1, 0)].atan2(rot[(0, 0)])
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Smallest box enclosing `points`. Returns `None` for an empty input.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bb = Aabb { min: first, max: first };
        for p in iter {
            bb.expand(p);
        }
        Some(bb)
    }

    pub fn expand(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}
