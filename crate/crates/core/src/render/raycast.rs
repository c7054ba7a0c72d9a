use rayon::prelude::*;
use serde::Serialize;

use super::{
    background_rgba8, base_color, to_rgba8, Camera, ColorGradient, RenderError, RenderStyle, Rgb, ValueTexture,
};
use crate::dataset::Time;
use crate::image::RgbaImage;
use crate::math::Vec3;
use crate::session::SessionState;
use crate::stc::{NormalVolume, StcVolume};

/// First visible voxel along a ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StcHit {
    pub id: u32,
    pub t: Time,
    #[serde(skip)]
    pub voxel: [usize; 3],
    /// Ray parameter at the voxel entry.
    #[serde(skip)]
    pub distance: f64,
}

/// Visible base colors per (object, depth index), prepared once per render.
struct Lut {
    depth: usize,
    /// Row per object ID; `u32::MAX` for IDs absent from the volume.
    dense: Option<Vec<u32>>,
    ids: Vec<u32>,
    entries: Vec<Option<Rgb>>,
}

const DENSE_LIMIT: u32 = 1 << 22;

impl Lut {
    fn new(
        v: &StcVolume,
        session: &SessionState,
        style: &RenderStyle,
        vt: &ValueTexture,
        grad: &ColorGradient,
    ) -> Self {
        let mut ids = v.ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.retain(|&i| i != 0);
        let mut entries = Vec::with_capacity(ids.len() * v.depth);
        for &id in &ids {
            for &t in &v.time_map {
                entries.push(base_color(session, style, vt, grad, id, t));
            }
        }
        let dense = ids.last().filter(|&&m| m < DENSE_LIMIT).map(|&m| {
            let mut rows = vec![u32::MAX; m as usize + 1];
            for (r, &id) in ids.iter().enumerate() {
                rows[id as usize] = r as u32;
            }
            rows
        });
        Self {
            depth: v.depth,
            dense,
            ids,
            entries,
        }
    }

    fn get(&self, id: u32, k: usize) -> Option<Rgb> {
        let row = match &self.dense {
            Some(rows) => *rows.get(id as usize)? as usize,
            None => self.ids.binary_search(&id).ok()?,
        };
        self.entries.get(row * self.depth + k).copied().flatten()
    }
}

/// Amanatides-Woo traversal of the volume in cube-local coordinates,
/// returning the first voxel accepted by `accept`.
fn traverse(
    v: &StcVolume,
    origin: Vec3,
    dir: Vec3,
    mut accept: impl FnMut(u32, [usize; 3]) -> bool,
) -> Option<([usize; 3], f64)> {
    let dims = [v.width, v.height, v.depth];
    let scale = [v.width as f64, v.height as f64, v.depth as f64];
    let o = [0, 1, 2].map(|a| (origin[a] + 0.5) * scale[a]);
    let d = [0, 1, 2].map(|a| dir[a] * scale[a]);

    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < 0.0 || o[a] > scale[a] {
                return None;
            }
        } else {
            let (mut ta, mut tb) = ((0.0 - o[a]) / d[a], (scale[a] - o[a]) / d[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    if t0 > t1 {
        return None;
    }

    let mut cell = [0usize; 3];
    let mut step = [0isize; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let p = o[a] + d[a] * t0;
        let c = (p.floor().max(0.0) as usize).min(dims[a] - 1);
        cell[a] = c;
        if d[a] > 0.0 {
            step[a] = 1;
            t_max[a] = (c as f64 + 1.0 - o[a]) / d[a];
            t_delta[a] = 1.0 / d[a];
        } else if d[a] < 0.0 {
            step[a] = -1;
            t_max[a] = (c as f64 - o[a]) / d[a];
            t_delta[a] = -1.0 / d[a];
        }
    }

    let mut t_enter = t0;
    loop {
        let id = v.ids[v.index(cell[0], cell[1], cell[2])];
        if id != 0 && accept(id, cell) {
            return Some((cell, t_enter));
        }
        let a = if t_max[0] < t_max[1] {
            if t_max[0] < t_max[2] {
                0
            } else {
                2
            }
        } else if t_max[1] < t_max[2] {
            1
        } else {
            2
        };
        if t_max[a] > t1 {
            return None;
        }
        t_enter = t_max[a];
        let next = cell[a] as isize + step[a];
        if next < 0 || next >= dims[a] as isize {
            return None;
        }
        cell[a] = next as usize;
        t_max[a] += t_delta[a];
    }
}

fn voxel_center(v: &StcVolume, c: [usize; 3]) -> Vec3 {
    Vec3::new(
        (c[0] as f64 + 0.5) / v.width as f64 - 0.5,
        (c[1] as f64 + 0.5) / v.height as f64 - 0.5,
        (c[2] as f64 + 0.5) / v.depth as f64 - 0.5,
    )
}

fn kept(v: &StcVolume, style: &RenderStyle, c: [usize; 3]) -> bool {
    style
        .clip_plane
        .as_ref()
        .is_none_or(|p| p.signed_distance(voxel_center(v, c)) <= 0.0)
}

fn check_volume(v: &StcVolume) -> Result<(), RenderError> {
    if v.width == 0 || v.height == 0 || v.depth == 0 {
        return Err(RenderError::EmptyVolume);
    }
    Ok(())
}

/// Opaque raycast of the cube: each pixel shows the first voxel that is
/// occupied, visible under `session` and kept by the clip plane.
#[allow(clippy::too_many_arguments)]
pub fn render_stc(
    v: &StcVolume,
    n: &NormalVolume,
    cam: &Camera,
    style: &RenderStyle,
    session: &SessionState,
    vt: &ValueTexture,
    grad: &ColorGradient,
) -> Result<RgbaImage, RenderError> {
    check_volume(v)?;
    if (n.width, n.height, n.depth) != (v.width, v.height, v.depth) {
        return Err(RenderError::NormalMismatch);
    }
    style.validate()?;
    let lut = Lut::new(v, session, style, vt, grad);
    let scale = Vec3::new(v.width as f64, v.height as f64, v.depth as f64);
    let bg = background_rgba8(style);
    let mut img = RgbaImage::new(cam.width, cam.height);
    img.data.par_chunks_mut(cam.width * 4).enumerate().for_each(|(j, row)| {
        for i in 0..cam.width {
            let (o, d) = cam.ray(i, j);
            let hit = traverse(v, o, d, |id, c| lut.get(id, c[2]).is_some() && kept(v, style, c));
            let px = match hit {
                None => bg,
                Some((c, t)) => {
                    let base = lut.get(v.get(c[0], c[1], c[2]), c[2]).expect("accepted voxel");
                    let g = n.get(c[0], c[1], c[2]);
                    let to_eye = -d;
                    let normal = Vec3::new(g[0].into(), g[1].into(), g[2].into())
                        .mul_elem(scale)
                        .try_normalize()
                        .map(|nv| if nv.dot(to_eye) < 0.0 { -nv } else { nv })
                        .unwrap_or(to_eye);
                    let p = o + d * t;
                    let light = style.light_position.unwrap_or(cam.position);
                    to_rgba8(style.shade(base, p, normal, to_eye, light))
                }
            };
            row[i * 4..i * 4 + 4].copy_from_slice(&px);
        }
    });
    Ok(img)
}

/// The object instance seen at pixel `(i, j)`, using the same traversal and
/// visibility as [`render_stc`].
#[allow(clippy::too_many_arguments)]
pub fn pick_stc(
    v: &StcVolume,
    cam: &Camera,
    pixel: (usize, usize),
    style: &RenderStyle,
    session: &SessionState,
    vt: &ValueTexture,
) -> Result<Option<StcHit>, RenderError> {
    check_volume(v)?;
    let (i, j) = pixel;
    if i >= cam.width || j >= cam.height {
        return Err(RenderError::PixelOutOfBounds(i, j));
    }
    let (o, d) = cam.ray(i, j);
    let hit = traverse(v, o, d, |id, c| {
        session.visible(vt, id, v.time_map[c[2]]) && kept(v, style, c)
    });
    Ok(hit.map(|(c, distance)| StcHit {
        id: v.get(c[0], c[1], c[2]),
        t: v.time_map[c[2]],
        voxel: c,
        distance,
    }))
}
