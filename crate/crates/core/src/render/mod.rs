//! Opaque first-hit raycasting of the space-time cube, the linked mesh view,
//! and picking in both.
//!
//! The cube is rendered in a local frame where the volume fills
//! `[-0.5, 0.5]³`: local `x` follows image columns, `y` image rows (row 0 at
//! `y = -0.5`) and `z` the depth (time) index.

mod camera;
mod gradient;
mod mesh_view;
mod raycast;
mod texture;

use serde::{Deserialize, Serialize};

pub use camera::{Camera, Projection, MAX_IMAGE_SIZE};
pub use gradient::{ColorGradient, Rgb, ABSENT_COLOR, GRADIENT_NAMES};
pub use mesh_view::{pick_mesh, render_mesh_view};
pub use raycast::{pick_stc, render_stc, StcHit};
pub use texture::{bake_value_texture, ValueTexture};

use crate::dataset::{Dataset, Time};
use crate::geometry::CutPlane;
use crate::math::Vec3;
use crate::session::SessionState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("unknown gradient {0:?}")]
    UnknownGradient(String),
    #[error("invalid gradient {0}")]
    InvalidGradient(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("time {0} is outside the dataset")]
    TimeOutOfRange(Time),
    #[error("normal volume does not match the cube's dimensions")]
    NormalMismatch,
    #[error("pixel ({0}, {1}) is outside the image")]
    PixelOutOfBounds(usize, usize),
    #[error("the volume is empty")]
    EmptyVolume,
}

/// Lighting and appearance shared by both views. Colors are RGB in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderStyle {
    /// Point light in view coordinates; at the camera when `None`.
    pub light_position: Option<Vec3>,
    pub ambient: f32,
    pub diffuse: f32,
    pub specular: f32,
    pub shininess: f32,
    pub background: Rgb,
    pub highlight: Rgb,
    /// Cut-away plane in cube-local coordinates; voxels whose centers lie on
    /// the positive side of the normal are removed.
    pub clip_plane: Option<CutPlane>,
    pub marker_color: Rgb,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            light_position: None,
            ambient: 0.2,
            diffuse: 0.7,
            specular: 0.2,
            shininess: 32.0,
            background: [0.0; 3],
            highlight: [1.0, 0.85, 0.0],
            clip_plane: None,
            marker_color: [1.0, 0.1, 0.1],
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidStyle(m.to_string()));
        for c in [self.ambient, self.diffuse, self.specular] {
            if !(c.is_finite() && c >= 0.0) {
                return bad("coefficients must be finite and non-negative");
            }
        }
        if !(self.shininess.is_finite() && self.shininess > 0.0) {
            return bad("shininess must be positive");
        }
        for c in [self.background, self.highlight, self.marker_color] {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("colors must be within [0, 1]");
            }
        }
        if self.light_position.is_some_and(|p| !p.is_finite()) {
            return bad("non-finite light position");
        }
        Ok(())
    }

    /// Blinn-Phong color of a surface point. `to_eye` and `n` are unit
    /// vectors. Colors brighter than 1 are scaled down as a whole, which keeps
    /// their hue.
    pub fn shade(&self, base: Rgb, p: Vec3, n: Vec3, to_eye: Vec3, light: Vec3) -> Rgb {
        let l = (light - p).try_normalize().unwrap_or(to_eye);
        let ndl = n.dot(l).max(0.0) as f32;
        let spec = if ndl > 0.0 {
            let h = (l + to_eye).try_normalize().unwrap_or(n);
            (n.dot(h).max(0.0) as f32).powf(self.shininess)
        } else {
            0.0
        };
        let k = self.ambient + self.diffuse * ndl;
        let s = self.specular * spec;
        let c = base.map(|b| b * k + s);
        let m = c[0].max(c[1]).max(c[2]);
        if m > 1.0 {
            c.map(|v| v / m)
        } else {
            c
        }
    }

    fn highlighted(&self, base: Rgb) -> Rgb {
        [0, 1, 2].map(|i| 0.5 * base[i] + 0.5 * self.highlight[i])
    }
}

pub(crate) fn to_rgba8(c: Rgb) -> [u8; 4] {
    let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    [q(c[0]), q(c[1]), q(c[2]), 255]
}

pub(crate) fn background_rgba8(style: &RenderStyle) -> [u8; 4] {
    let [r, g, b, _] = to_rgba8(style.background);
    [r, g, b, 0]
}

/// Base color of a visible `(id, t)`, `None` when filtered out.
pub fn base_color(
    session: &SessionState,
    style: &RenderStyle,
    vt: &ValueTexture,
    grad: &ColorGradient,
    id: u32,
    t: Time,
) -> Option<Rgb> {
    if !session.visible(vt, id, t) {
        return None;
    }
    let c = grad.color_for(vt, id, t);
    Some(match session.state_of(id) {
        crate::session::ObjectState::Highlighted => style.highlighted(c),
        _ => c,
    })
}

/// Texture and gradient named by the session's active property and gradient.
pub fn session_textures(d: &Dataset, s: &SessionState) -> Result<(ValueTexture, ColorGradient), RenderError> {
    Ok((
        bake_value_texture(d, &s.active_property)?,
        ColorGradient::named(&s.active_gradient)?,
    ))
}
