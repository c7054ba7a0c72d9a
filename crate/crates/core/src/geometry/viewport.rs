use serde::{Deserialize, Serialize};

use super::{Contour, GeometryError};

/// Default padding added around the union of all sections.
pub const DEFAULT_PADDING: f64 = 0.02;
/// Resolution assumed when a viewport's slab half-thickness is set before
/// the capture resolution is known.
pub const DEFAULT_RESOLUTION: usize = 256;

/// Square capture window in plane coordinates, shared by every time step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub center_uv: [f64; 2],
    pub half_extent: f64,
    /// Half-thickness of the capture slab around the plane.
    pub epsilon: f64,
}

impl Viewport {
    /// Plane-space size of one pixel at resolution `res`.
    pub fn pitch(&self, res: usize) -> f64 {
        2.0 * self.half_extent / res as f64
    }

    /// Same window with the slab half-thickness set to half a pixel at `res`.
    pub fn with_resolution(self, res: usize) -> Self {
        Self {
            epsilon: 0.5 * self.pitch(res),
            ..self
        }
    }
}

/// Fits the smallest square window covering every contour in `sections`
/// (one entry per time step), enlarged by `padding` (a fraction of the half-extent).
pub fn fit_viewport_to_contours<'a, I>(sections: I, padding: f64) -> Result<Viewport, GeometryError>
where
    I: IntoIterator<Item = &'a Contour>,
{
    let (lo, hi) = sections
        .into_iter()
        .filter_map(Contour::bounds)
        .reduce(|(a, b), (c, d)| ([a[0].min(c[0]), a[1].min(c[1])], [b[0].max(d[0]), b[1].max(d[1])]))
        .ok_or(GeometryError::NoSection)?;
    let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if half <= 0.0 || !half.is_finite() {
        return Err(GeometryError::NoSection);
    }
    if padding.is_nan() || padding < 0.0 {
        return Err(GeometryError::InvalidPadding(padding));
    }
    let vp = Viewport {
        center_uv: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
        half_extent: half * (1.0 + padding),
        epsilon: 0.0,
    };
    Ok(vp.with_resolution(DEFAULT_RESOLUTION))
}
