use std::ops::Range;

use rayon::prelude::*;

use super::{StcError, StcVolume};
use crate::dataset::{Dataset, Time};
use crate::geometry::{
    fit_viewport_to_contours, rasterize_section, section_time_range, CutPlane, Viewport, DEFAULT_PADDING,
};

#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// Capture resolution; the volume is `resolution × resolution × steps`.
    pub resolution: usize,
    /// Half-open time range; the whole dataset when `None`.
    pub t_range: Option<Range<Time>>,
    pub padding: f64,
    /// Fixed capture window. Fitted to the sections of `t_range` when `None`.
    pub viewport: Option<Viewport>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            resolution: 256,
            t_range: None,
            padding: DEFAULT_PADDING,
            viewport: None,
        }
    }
}

/// Builds the space-time cube of `d` for `plane` at `res × res` per time step.
pub fn build_stc(
    d: &Dataset,
    plane: &CutPlane,
    res: usize,
    t_range: Option<Range<Time>>,
) -> Result<StcVolume, StcError> {
    build_stc_with(
        d,
        plane,
        &BuildOptions {
            resolution: res,
            t_range,
            ..Default::default()
        },
    )
}

pub fn build_stc_with(d: &Dataset, plane: &CutPlane, opts: &BuildOptions) -> Result<StcVolume, StcError> {
    let full = d.time_range();
    let range = opts.t_range.clone().unwrap_or(full.clone());
    if range.is_empty() {
        return Err(StcError::EmptyRange);
    }
    if range.start < full.start || range.end > full.end {
        return Err(StcError::RangeOutsideDataset {
            start: range.start,
            end: range.end,
            dataset_start: full.start,
            dataset_end: full.end,
        });
    }
    let res = opts.resolution;
    if res < 2 {
        return Err(crate::geometry::GeometryError::InvalidResolution(res).into());
    }

    let sections = section_time_range(d, plane, range.clone());
    let viewport = match opts.viewport {
        Some(vp) => vp,
        None => fit_viewport_to_contours(sections.iter().flatten(), opts.padding)?.with_resolution(res),
    };

    let slices = sections
        .par_iter()
        .map(|contours| rasterize_section(contours, &viewport, res))
        .collect::<Result<Vec<_>, _>>()?;

    let depth = slices.len();
    let mut ids = Vec::with_capacity(res * res * depth);
    for s in slices {
        ids.extend_from_slice(&s.pixels);
    }
    Ok(StcVolume {
        width: res,
        height: res,
        depth,
        ids,
        plane: *plane,
        viewport,
        time_map: range.collect(),
    })
}
