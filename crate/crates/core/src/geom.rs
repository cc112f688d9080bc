//! Small fixed-dimension geometry helpers: 3-vectors, unit quaternions and
//! axis-aligned boxes in the world frame (meters, +z up).

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n.is_finite() && n > 1e-12 {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn is_finite(a: Vec3) -> bool {
    a.iter().all(|c| c.is_finite())
}

/// Unit quaternion, scalar-first (w, x, y, z).
///
/// Construction renormalizes small deviations; inputs whose norm is further
/// than [`Quat::MAX_NORM_DEVIATION`] from 1 are rejected as malformed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    /// Largest |norm - 1| accepted by [`Quat::new`] before rejection.
    pub const MAX_NORM_DEVIATION: f64 = 1e-2;

    pub fn identity() -> Self {
        Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Builds a unit quaternion. Norm deviations up to `MAX_NORM_DEVIATION`
    /// are renormalized; anything worse (or non-finite) is rejected.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, QuatError> {
        let n2 = w * w + x * x + y * y + z * z;
        if !n2.is_finite() {
            return Err(QuatError::NonFinite);
        }
        let n = n2.sqrt();
        if (n - 1.0).abs() > Self::MAX_NORM_DEVIATION {
            return Err(QuatError::NotUnit { norm: n });
        }
        Ok(Quat { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuatError {
    #[error("quaternion has non-finite components")]
    NonFinite,
    #[error("quaternion norm {norm} too far from 1 to renormalize")]
    NotUnit { norm: f64 },
}

/// Axis-aligned box, `min < max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self, AabbError> {
        if !is_finite(min) || !is_finite(max) {
            return Err(AabbError::NonFinite);
        }
        if (0..3).any(|i| min[i] >= max[i]) {
            return Err(AabbError::Degenerate);
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        scale(add(self.min, self.max), 0.5)
    }

    pub fn translated(&self, v: Vec3) -> Aabb {
        Aabb { min: add(self.min, v), max: add(self.max, v) }
    }

    /// Slab-method ray intersection. Returns the entry parameter `t >= 0`
    /// along `dir` (0 when the origin is inside), or `None` on a miss.
    pub fn ray_entry(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let mut t_min = 0.0f64;
        let mut t_max = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                // Parallel to this slab: hit possible only if inside it.
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[i];
                let mut t0 = (self.min[i] - origin[i]) * inv;
                let mut t1 = (self.max[i] - origin[i]) * inv;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_min = t_min.max(t0);
                t_max = t_max.min(t1);
                if t_min > t_max {
                    return None;
                }
            }
        }
        Some(t_min)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AabbError {
    #[error("box corners have non-finite components")]
    NonFinite,
    #[error("box min must be strictly below max on every axis")]
    Degenerate,
}
