use serde::{Deserialize, Serialize};

use super::{Contour, GeometryError, Viewport};

/// Affine map from pixel indices to plane coordinates: the center of pixel
/// `(i, j)` is `origin + (i + 0.5, j + 0.5) * step`. Row 0 is the top row
/// (largest `v`), so `step[1]` is negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelTransform {
    pub origin: [f64; 2],
    pub step: [f64; 2],
}

impl PixelTransform {
    pub fn for_viewport(vp: &Viewport, res: usize) -> Self {
        let pitch = vp.pitch(res);
        Self {
            origin: [vp.center_uv[0] - vp.half_extent, vp.center_uv[1] + vp.half_extent],
            step: [pitch, -pitch],
        }
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.step[0],
            self.origin[1] + (j as f64 + 0.5) * self.step[1],
        ]
    }

    /// Continuous pixel coordinates of a plane point (pixel centers at `k + 0.5`).
    pub fn to_pixel(&self, uv: [f64; 2]) -> [f64; 2] {
        [
            (uv[0] - self.origin[0]) / self.step[0],
            (uv[1] - self.origin[1]) / self.step[1],
        ]
    }
}

/// Raster of object IDs; 0 means empty. Row-major, row 0 first.
#[derive(Clone, Debug, PartialEq)]
pub struct IdImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u32>,
    /// Plane mapping; present for captures and time slices of a volume.
    pub transform: Option<PixelTransform>,
}

impl IdImage {
    pub fn new(width: usize, height: usize, transform: Option<PixelTransform>) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
            transform,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.pixels[j * self.width + i]
    }

    pub fn count(&self, id: u32) -> usize {
        self.pixels.iter().filter(|&&p| p == id).count()
    }

    pub fn filled(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }
}

/// Even-odd fill of every contour, sampled at pixel centers over a
/// `res × res` orthographic window. Where objects overlap the smallest ID wins.
pub fn rasterize_section(contours: &[Contour], vp: &Viewport, res: usize) -> Result<IdImage, GeometryError> {
    if res < 2 {
        return Err(GeometryError::InvalidResolution(res));
    }
    let xf = PixelTransform::for_viewport(vp, res);
    let mut img = IdImage::new(res, res, Some(xf));

    let mut order: Vec<&Contour> = contours.iter().filter(|c| !c.is_empty()).collect();
    order.sort_by_key(|c| c.object);

    let mut xs: Vec<f64> = Vec::new();
    for c in order {
        let Some((lo, hi)) = c.bounds() else { continue };
        // Rows whose centers can fall inside the contour's v-range.
        let j0 = ((hi[1] - xf.origin[1]) / xf.step[1] - 0.5).floor().max(0.0) as usize;
        let j1 = (((lo[1] - xf.origin[1]) / xf.step[1] - 0.5).ceil() + 1.0).clamp(0.0, res as f64) as usize;
        let id = c.object.get();
        for j in j0..j1 {
            let vc = xf.origin[1] + (j as f64 + 0.5) * xf.step[1];
            xs.clear();
            for l in &c.loops {
                let n = l.len();
                for k in 0..n {
                    let (a, b) = (l[k], l[(k + 1) % n]);
                    if (a[1] > vc) != (b[1] > vc) {
                        xs.push(a[0] + (vc - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            let row = &mut img.pixels[j * res..(j + 1) * res];
            for span in xs.chunks_exact(2) {
                let i0 = first_center_at_or_after(span[0], &xf, res);
                let i1 = first_center_at_or_after(span[1], &xf, res);
                for p in &mut row[i0..i1] {
                    if *p == 0 {
                        *p = id;
                    }
                }
            }
        }
    }
    Ok(img)
}

/// Index of the first pixel column whose center `u` is `>= x`, clamped to `[0, res]`.
fn first_center_at_or_after(x: f64, xf: &PixelTransform, res: usize) -> usize {
    let k = ((x - xf.origin[0]) / xf.step[0] - 0.5).ceil();
    k.clamp(0.0, res as f64) as usize
}
