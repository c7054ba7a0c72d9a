//! Cutting plane, per-time cross-sections, the time-invariant capture window,
//! and rasterization of sections into object-ID images.

mod plane;
mod raster;
mod section;
mod viewport;

use std::ops::Range;

use rayon::prelude::*;

pub use plane::{CutPlane, PlanePreset};
pub use raster::{rasterize_section, IdImage, PixelTransform};
pub use section::{loop_signed_area, section_contours, Contour, Loop, CLOSE_TOLERANCE, ON_PLANE_NUDGE};
pub use viewport::{fit_viewport_to_contours, Viewport, DEFAULT_PADDING, DEFAULT_RESOLUTION};

use crate::dataset::{Dataset, Time};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("plane normal must be non-zero")]
    ZeroNormal,
    #[error("plane origin must be finite")]
    NonFinite,
    #[error("the plane does not cut any object at any time step")]
    NoSection,
    #[error("resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error("padding must be non-negative, got {0}")]
    InvalidPadding(f64),
}

/// Sections of every object at time `t`, ascending by ID, skipping objects
/// the plane misses.
pub fn section_time_step(d: &Dataset, plane: &CutPlane, t: Time) -> Vec<Contour> {
    d.objects_at(t)
        .map(|(id, mesh)| section_contours(id, mesh, plane))
        .filter(|c| !c.is_empty())
        .collect()
}

/// Sections for each step of `times`, computed in parallel.
pub fn section_time_range(d: &Dataset, plane: &CutPlane, times: Range<Time>) -> Vec<Vec<Contour>> {
    times
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|t| section_time_step(d, plane, t))
        .collect()
}

/// Smallest square window covering the plane's section of every object over
/// all time steps, enlarged by `padding`.
pub fn fit_viewport(d: &Dataset, plane: &CutPlane, padding: f64) -> Result<Viewport, GeometryError> {
    let sections = section_time_range(d, plane, d.time_range());
    fit_viewport_to_contours(sections.iter().flatten(), padding)
}
