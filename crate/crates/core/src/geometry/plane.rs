use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::math::Vec3;

/// Oriented cutting plane with a right-handed in-plane basis (`u × v = normal`).
///
/// Only `origin` and `normal` are read when deserializing; the basis is always
/// recomputed so it stays deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneSpec")]
pub struct CutPlane {
    pub origin: Vec3,
    pub normal: Vec3,
    pub u: Vec3,
    pub v: Vec3,
}

#[derive(Deserialize)]
struct PlaneSpec {
    origin: Vec3,
    normal: Vec3,
}

impl TryFrom<PlaneSpec> for CutPlane {
    type Error = GeometryError;

    fn try_from(s: PlaneSpec) -> Result<Self, Self::Error> {
        CutPlane::new(s.origin, s.normal)
    }
}

/// Axis-aligned plane orientations offered as presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanePreset {
    /// Normal along +z.
    Xy,
    /// Normal along +y.
    Xz,
    /// Normal along +x.
    Yz,
}

impl CutPlane {
    /// Completes `normal` into an orthonormal frame. `u = normalize(n × ẑ)`,
    /// falling back to `n × x̂` when the normal is within ~2.6° of ẑ; `v = n × u`.
    pub fn new(origin: Vec3, normal: Vec3) -> Result<Self, GeometryError> {
        if !origin.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let n = normal.try_normalize().ok_or(GeometryError::ZeroNormal)?;
        let helper = if n.dot(Vec3::Z).abs() > 0.999 { Vec3::X } else { Vec3::Z };
        let u = n.cross(helper).normalize();
        let v = n.cross(u);
        Ok(Self {
            origin,
            normal: n,
            u,
            v,
        })
    }

    pub fn preset(preset: PlanePreset, origin: Vec3) -> Self {
        let normal = match preset {
            PlanePreset::Xy => Vec3::Z,
            PlanePreset::Xz => Vec3::Y,
            PlanePreset::Yz => Vec3::X,
        };
        Self::new(origin, normal).expect("preset normals are unit vectors")
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.origin).dot(self.normal)
    }

    /// In-plane coordinates of `p` (its orthogonal projection onto the plane).
    pub fn project(&self, p: Vec3) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(self.u), d.dot(self.v)]
    }

    pub fn lift(&self, uv: [f64; 2]) -> Vec3 {
        self.origin + self.u * uv[0] + self.v * uv[1]
    }
}
