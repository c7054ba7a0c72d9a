//! Space-time cube construction: sweep the cutting plane over time, stack the
//! ID captures into a volume whose depth axis is time, and derive normals.

mod build;
mod cache;
mod normals;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use build::{build_stc, build_stc_with, BuildOptions};
pub use cache::{read_cache, read_cache_file, write_cache, write_cache_file, CACHE_MAGIC};
pub use normals::{compute_normals, NormalVolume};

use crate::dataset::Time;
use crate::geometry::{CutPlane, GeometryError, IdImage, PixelTransform, Viewport};

#[derive(Debug, thiserror::Error)]
pub enum StcError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("empty time range")]
    EmptyRange,
    #[error("time range {start}..{end} is outside the dataset's {dataset_start}..{dataset_end}")]
    RangeOutsideDataset {
        start: Time,
        end: Time,
        dataset_start: Time,
        dataset_end: Time,
    },
    #[error("slice index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("volume cache: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `width × height × depth` grid of object IDs (0 = empty). Voxel `(x, y, k)`
/// holds pixel `(x, y)` of the capture at time `time_map[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StcVolume {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub ids: Vec<u32>,
    pub plane: CutPlane,
    pub viewport: Viewport,
    pub time_map: Vec<Time>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceAxis {
    X,
    Y,
    T,
}

impl std::str::FromStr for SliceAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "t" => Ok(Self::T),
            other => Err(format!("unknown axis {other:?}, expected x, y or t")),
        }
    }
}

impl StcVolume {
    pub fn index(&self, x: usize, y: usize, k: usize) -> usize {
        x + self.width * (y + self.height * k)
    }

    pub fn get(&self, x: usize, y: usize, k: usize) -> u32 {
        self.ids[self.index(x, y, k)]
    }

    pub fn voxel_count(&self) -> usize {
        self.ids.len()
    }

    pub fn time_at(&self, k: usize) -> Time {
        self.time_map[k]
    }

    pub fn depth_of(&self, t: Time) -> Option<usize> {
        self.time_map.iter().position(|&x| x == t)
    }

    pub fn time_range(&self) -> Range<Time> {
        match (self.time_map.first(), self.time_map.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => 0..0,
        }
    }

    /// Pixel-to-plane mapping shared by every time slice.
    pub fn transform(&self) -> PixelTransform {
        PixelTransform::for_viewport(&self.viewport, self.width)
    }

    pub fn is_empty(&self) -> bool {
        self.ids.iter().all(|&v| v == 0)
    }

    /// Axis-aligned 2D cut through the volume.
    ///
    /// * `T`: the capture at depth `index` (`width × height`, with plane transform).
    /// * `X`: column `x = index`; pixel `(k, y)`, so the image is `depth × height`.
    /// * `Y`: row `y = index`; pixel `(x, k)`, so the image is `width × depth`.
    pub fn slice(&self, axis: SliceAxis, index: usize) -> Result<IdImage, StcError> {
        let len = match axis {
            SliceAxis::X => self.width,
            SliceAxis::Y => self.height,
            SliceAxis::T => self.depth,
        };
        if index >= len {
            return Err(StcError::IndexOutOfRange { index, len });
        }
        Ok(match axis {
            SliceAxis::T => {
                let plane = self.width * self.height;
                IdImage {
                    width: self.width,
                    height: self.height,
                    pixels: self.ids[index * plane..(index + 1) * plane].to_vec(),
                    transform: Some(self.transform()),
                }
            }
            SliceAxis::X => {
                let mut img = IdImage::new(self.depth, self.height, None);
                for y in 0..self.height {
                    for k in 0..self.depth {
                        img.pixels[y * self.depth + k] = self.get(index, y, k);
                    }
                }
                img
            }
            SliceAxis::Y => {
                let mut img = IdImage::new(self.width, self.depth, None);
                for k in 0..self.depth {
                    for x in 0..self.width {
                        img.pixels[k * self.width + x] = self.get(x, index, k);
                    }
                }
                img
            }
        })
    }
}

/// Free-function form of [`StcVolume::slice`].
pub fn stc_slice(v: &StcVolume, axis: SliceAxis, index: usize) -> Result<IdImage, StcError> {
    v.slice(axis, index)
}
