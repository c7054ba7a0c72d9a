use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::math::Vec3;

pub const MAX_IMAGE_SIZE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Orthographic,
    Perspective,
}

/// Pinhole or parallel camera. Pixel `(0, 0)` is the top-left corner; screen
/// right is `direction × up`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraSpec", into = "CameraSpec")]
pub struct Camera {
    pub mode: Projection,
    pub position: Vec3,
    pub direction: Vec3,
    pub up: Vec3,
    pub width: usize,
    pub height: usize,
    /// Half the visible height in world units (orthographic).
    pub ortho_half_height: f64,
    /// Vertical field of view in degrees (perspective).
    pub fov_deg: f64,
    forward: Vec3,
    right: Vec3,
    true_up: Vec3,
}

#[derive(Clone, Serialize, Deserialize)]
struct CameraSpec {
    mode: Projection,
    position: Vec3,
    direction: Vec3,
    up: Vec3,
    width: usize,
    height: usize,
    #[serde(default = "default_half_height")]
    ortho_half_height: f64,
    #[serde(default = "default_fov")]
    fov_deg: f64,
}

fn default_half_height() -> f64 {
    1.0
}

fn default_fov() -> f64 {
    45.0
}

impl TryFrom<CameraSpec> for Camera {
    type Error = RenderError;

    fn try_from(s: CameraSpec) -> Result<Self, Self::Error> {
        Camera::new(s.mode, s.position, s.direction, s.up, s.width, s.height)?
            .with_ortho_half_height(s.ortho_half_height)?
            .with_fov(s.fov_deg)
    }
}

impl From<Camera> for CameraSpec {
    fn from(c: Camera) -> Self {
        Self {
            mode: c.mode,
            position: c.position,
            direction: c.direction,
            up: c.up,
            width: c.width,
            height: c.height,
            ortho_half_height: c.ortho_half_height,
            fov_deg: c.fov_deg,
        }
    }
}

fn bad(msg: impl Into<String>) -> RenderError {
    RenderError::InvalidCamera(msg.into())
}

impl Camera {
    pub fn new(
        mode: Projection,
        position: Vec3,
        direction: Vec3,
        up: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self, RenderError> {
        if !(position.is_finite() && direction.is_finite() && up.is_finite()) {
            return Err(bad("non-finite vector"));
        }
        let forward = direction.try_normalize().ok_or_else(|| bad("zero view direction"))?;
        let right = forward
            .cross(up)
            .try_normalize()
            .filter(|_| forward.cross(up.normalize()).length() > 1e-6)
            .ok_or_else(|| bad("view direction and up are parallel"))?;
        if width == 0 || height == 0 || width > MAX_IMAGE_SIZE || height > MAX_IMAGE_SIZE {
            return Err(bad(format!("image size must be within 1..={MAX_IMAGE_SIZE}")));
        }
        Ok(Self {
            mode,
            position,
            direction,
            up,
            width,
            height,
            ortho_half_height: default_half_height(),
            fov_deg: default_fov(),
            forward,
            right,
            true_up: right.cross(forward),
        })
    }

    pub fn orthographic(
        position: Vec3,
        direction: Vec3,
        up: Vec3,
        size: (usize, usize),
        half_height: f64,
    ) -> Result<Self, RenderError> {
        Self::new(Projection::Orthographic, position, direction, up, size.0, size.1)?
            .with_ortho_half_height(half_height)
    }

    pub fn perspective(
        position: Vec3,
        direction: Vec3,
        up: Vec3,
        size: (usize, usize),
        fov_deg: f64,
    ) -> Result<Self, RenderError> {
        Self::new(Projection::Perspective, position, direction, up, size.0, size.1)?.with_fov(fov_deg)
    }

    pub fn with_ortho_half_height(mut self, h: f64) -> Result<Self, RenderError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(bad("ortho_half_height must be positive"));
        }
        self.ortho_half_height = h;
        Ok(self)
    }

    pub fn with_fov(mut self, fov_deg: f64) -> Result<Self, RenderError> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(bad("fov_deg must be within (0, 180)"));
        }
        self.fov_deg = fov_deg;
        Ok(self)
    }

    pub fn with_size(self, width: usize, height: usize) -> Result<Self, RenderError> {
        Self::new(self.mode, self.position, self.direction, self.up, width, height)?
            .with_ortho_half_height(self.ortho_half_height)?
            .with_fov(self.fov_deg)
    }

    /// Unit view direction.
    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    pub fn right(&self) -> Vec3 {
        self.right
    }

    pub fn true_up(&self) -> Vec3 {
        self.true_up
    }

    fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    fn tan_half_fov(&self) -> f64 {
        (self.fov_deg.to_radians() * 0.5).tan()
    }

    /// Screen coordinates in `[-1, 1]` of continuous pixel position `(px, py)`.
    fn ndc(&self, px: f64, py: f64) -> (f64, f64) {
        (px / self.width as f64 * 2.0 - 1.0, 1.0 - py / self.height as f64 * 2.0)
    }

    /// Ray through the center of pixel `(i, j)`: origin and unit direction.
    pub fn ray(&self, i: usize, j: usize) -> (Vec3, Vec3) {
        let (sx, sy) = self.ndc(i as f64 + 0.5, j as f64 + 0.5);
        match self.mode {
            Projection::Orthographic => {
                let h = self.ortho_half_height;
                let o = self.position + self.right * (sx * h * self.aspect()) + self.true_up * (sy * h);
                (o, self.forward)
            }
            Projection::Perspective => {
                let th = self.tan_half_fov();
                let d = self.forward + self.right * (sx * th * self.aspect()) + self.true_up * (sy * th);
                (self.position, d.normalize())
            }
        }
    }

    /// Continuous pixel position and view depth of a world point; `None` when
    /// it is not in front of a perspective camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let r = p - self.position;
        let (x, y, z) = (r.dot(self.right), r.dot(self.true_up), r.dot(self.forward));
        let (sx, sy) = match self.mode {
            Projection::Orthographic => {
                let h = self.ortho_half_height;
                (x / (h * self.aspect()), y / h)
            }
            Projection::Perspective => {
                if z <= 1e-9 {
                    return None;
                }
                let th = self.tan_half_fov();
                (x / (z * th * self.aspect()), y / (z * th))
            }
        };
        Some((
            (sx + 1.0) * 0.5 * self.width as f64,
            (1.0 - sy) * 0.5 * self.height as f64,
            z,
        ))
    }

    /// Orthographic views of the unit space-time cube `[-0.5, 0.5]³`:
    /// `t` looks along increasing time with rows matching the captures,
    /// `x` and `y` look from the side with time running right or up, and
    /// `iso` is an oblique overview.
    pub fn stc_preset(name: &str, width: usize, height: usize) -> Result<Self, RenderError> {
        let (pos, up, half) = match name {
            "t" | "front" => (Vec3::new(0.0, 0.0, -2.0), Vec3::new(0.0, -1.0, 0.0), 0.5),
            "x" | "side" => (Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, -1.0, 0.0), 0.5),
            "y" | "top" => (Vec3::new(0.0, -2.0, 0.0), Vec3::Z, 0.5),
            "iso" => (Vec3::new(1.6, -1.2, -2.0), Vec3::new(0.0, -1.0, 0.0), 0.9),
            other => return Err(bad(format!("unknown camera preset {other:?}"))),
        };
        Self::orthographic(pos, -pos, up, (width, height), half)
    }

    /// Orthographic camera framing the box `[lo, hi]` from `direction`.
    pub fn fit_bounds(
        lo: Vec3,
        hi: Vec3,
        direction: Vec3,
        up: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self, RenderError> {
        let center = (lo + hi) * 0.5;
        let radius = ((hi - lo).length() * 0.5).max(1e-9);
        let dir = direction.try_normalize().ok_or_else(|| bad("zero view direction"))?;
        let half = radius * 1.05 * (1.0f64).max(height as f64 / width as f64);
        Self::orthographic(center - dir * (radius * 3.0), dir, up, (width, height), half)
    }

    /// Views of a dataset's bounding box for the mesh view.
    pub fn mesh_preset(name: &str, lo: Vec3, hi: Vec3, width: usize, height: usize) -> Result<Self, RenderError> {
        let (dir, up) = match name {
            "front" | "z" => (-Vec3::Z, Vec3::Y),
            "side" | "x" => (-Vec3::X, Vec3::Z),
            "top" | "y" => (-Vec3::Y, Vec3::Z),
            "iso" => (Vec3::new(-1.0, -1.0, -1.0), Vec3::Z),
            other => return Err(bad(format!("unknown camera preset {other:?}"))),
        };
        Self::fit_bounds(lo, hi, dir, up, width, height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_up_is_rejected() {
        assert!(Camera::new(Projection::Orthographic, Vec3::ZERO, Vec3::Z, Vec3::Z * 2.0, 4, 4).is_err());
        assert!(Camera::new(Projection::Orthographic, Vec3::ZERO, Vec3::ZERO, Vec3::Y, 4, 4).is_err());
        assert!(Camera::new(Projection::Orthographic, Vec3::ZERO, Vec3::Z, Vec3::Y, 0, 4).is_err());
    }

    #[test]
    fn front_preset_maps_pixels_onto_voxel_columns() {
        let c = Camera::stc_preset("t", 8, 8).unwrap();
        let (o, d) = c.ray(0, 0);
        assert_eq!(d, Vec3::Z);
        assert!((o.x + 0.5 - 1.0 / 16.0).abs() < 1e-12);
        assert!((o.y + 0.5 - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn project_inverts_ray() {
        for mode in [Projection::Orthographic, Projection::Perspective] {
            let c = Camera::new(
                mode,
                Vec3::new(1.0, 2.0, 3.0),
                Vec3::new(-1.0, -2.0, -2.5),
                Vec3::Z,
                40,
                30,
            )
            .unwrap();
            for (i, j) in [(0, 0), (39, 29), (17, 5)] {
                let (o, d) = c.ray(i, j);
                let (px, py, _) = c.project(o + d * 2.5).unwrap();
                assert!((px - (i as f64 + 0.5)).abs() < 1e-9 && (py - (j as f64 + 0.5)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let c = Camera::stc_preset("iso", 64, 48).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: Camera = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"mode":"orthographic","position":[0,0,0],"direction":[0,0,1],"up":[0,0,1],"width":4,"height":4}"#;
        assert!(serde_json::from_str::<Camera>(bad).is_err());
    }
}
