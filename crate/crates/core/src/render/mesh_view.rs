use super::{
    background_rgba8, base_color, to_rgba8, Camera, ColorGradient, Projection, RenderError, RenderStyle, ValueTexture,
};
use crate::dataset::{Dataset, Mesh, ObjectId, Time};
use crate::geometry::CutPlane;
use crate::image::RgbaImage;
use crate::math::Vec3;
use crate::session::SessionState;

const NEAR: f64 = 1e-9;

fn check_time(d: &Dataset, t: Time) -> Result<(), RenderError> {
    if d.time_range().contains(&t) {
        Ok(())
    } else {
        Err(RenderError::TimeOutOfRange(t))
    }
}

fn face_normal(a: Vec3, b: Vec3, c: Vec3) -> Option<Vec3> {
    (b - a).cross(c - a).try_normalize()
}

/// Objects at `t` that pass the session filters, with their base colors.
fn visible_objects<'a>(
    d: &'a Dataset,
    t: Time,
    session: &'a SessionState,
    style: &'a RenderStyle,
    vt: &'a ValueTexture,
    grad: &'a ColorGradient,
) -> impl Iterator<Item = (ObjectId, &'a Mesh, super::Rgb)> + 'a {
    d.objects_at(t)
        .filter_map(move |(id, m)| base_color(session, style, vt, grad, id.get(), t).map(|c| (id, m, c)))
}

/// Z-buffered, flat-shaded render of the objects present at `t`. With
/// `marker`, surface points within about a pixel of that plane are drawn in
/// the style's marker color, tracing the current cross-section.
#[allow(clippy::too_many_arguments)]
pub fn render_mesh_view(
    d: &Dataset,
    t: Time,
    cam: &Camera,
    session: &SessionState,
    vt: &ValueTexture,
    grad: &ColorGradient,
    style: &RenderStyle,
    marker: Option<&CutPlane>,
) -> Result<RgbaImage, RenderError> {
    check_time(d, t)?;
    style.validate()?;
    let (w, h) = (cam.width, cam.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut img = RgbaImage::new(w, h);
    let bg = background_rgba8(style);
    for j in 0..h {
        for i in 0..w {
            img.set(i, j, bg);
        }
    }
    let light = style.light_position.unwrap_or(cam.position);

    for (_, mesh, base) in visible_objects(d, t, session, style, vt, grad) {
        for tri in &mesh.triangles {
            let [a, b, c] = tri.map(|k| mesh.vertices[k as usize]);
            let Some(n) = face_normal(a, b, c) else { continue };
            let proj = [a, b, c].map(|p| cam.project(p));
            let [Some(pa), Some(pb), Some(pc)] = proj else { continue };
            if cam.mode == Projection::Perspective && [pa.2, pb.2, pc.2].iter().any(|&z| z <= NEAR) {
                continue;
            }
            let centroid = (a + b + c) * (1.0 / 3.0);
            let to_eye = match cam.mode {
                Projection::Orthographic => -cam.forward(),
                Projection::Perspective => (cam.position - centroid).normalize(),
            };
            let n = if n.dot(to_eye) < 0.0 { -n } else { n };
            let color = to_rgba8(style.shade(base, centroid, n, to_eye, light));
            raster_triangle(cam, [pa, pb, pc], |i, j, z| {
                let k = j * w + i;
                if z < depth[k] {
                    depth[k] = z;
                    img.set(i, j, color);
                }
            });
        }
    }

    if let Some(plane) = marker {
        let marker = to_rgba8(style.marker_color);
        for j in 0..h {
            for i in 0..w {
                let z = depth[j * w + i];
                if !z.is_finite() {
                    continue;
                }
                let (o, dir) = cam.ray(i, j);
                let (p, pixel) = match cam.mode {
                    Projection::Orthographic => (o + dir * z, 2.0 * cam.ortho_half_height / h as f64),
                    Projection::Perspective => {
                        let p = o + dir * (z / dir.dot(cam.forward()));
                        (p, 2.0 * z * (cam.fov_deg.to_radians() * 0.5).tan() / h as f64)
                    }
                };
                if plane.signed_distance(p).abs() <= pixel {
                    img.set(i, j, marker);
                }
            }
        }
    }
    Ok(img)
}

/// Calls `plot(i, j, depth)` for every pixel center covered by the projected
/// triangle, either winding. Depth is interpolated linearly for orthographic
/// and perspective-correctly otherwise.
fn raster_triangle(cam: &Camera, p: [(f64, f64, f64); 3], mut plot: impl FnMut(usize, usize, f64)) {
    let area = edge(p[0], p[1], (p[2].0, p[2].1));
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let min_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
    let i0 = (min_x - 0.5).ceil().max(0.0) as usize;
    let j0 = (min_y - 0.5).ceil().max(0.0) as usize;
    let i1 = ((max_x - 0.5).floor()).min(cam.width as f64 - 1.0);
    let j1 = ((max_y - 0.5).floor()).min(cam.height as f64 - 1.0);
    if i1 < 0.0 || j1 < 0.0 {
        return;
    }
    let persp = cam.mode == Projection::Perspective;
    for j in j0..=j1 as usize {
        for i in i0..=i1 as usize {
            let c = (i as f64 + 0.5, j as f64 + 0.5);
            let w0 = edge(p[1], p[2], c) / area;
            let w1 = edge(p[2], p[0], c) / area;
            let w2 = edge(p[0], p[1], c) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let z = if persp {
                1.0 / (w0 / p[0].2 + w1 / p[1].2 + w2 / p[2].2)
            } else {
                w0 * p[0].2 + w1 * p[1].2 + w2 * p[2].2
            };
            if z >= 0.0 {
                plot(i, j, z);
            }
        }
    }
}

fn edge(a: (f64, f64, f64), b: (f64, f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Möller-Trumbore ray/triangle test; ray parameter of the hit.
fn intersect(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pv = d.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let tv = o - a;
    let u = tv.dot(pv) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = tv.cross(e1);
    let v = d.dot(qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qv) * inv;
    (t >= 0.0).then_some(t)
}

/// Nearest visible object under pixel `(i, j)` of the mesh view at `t`.
#[allow(clippy::too_many_arguments)]
pub fn pick_mesh(
    d: &Dataset,
    t: Time,
    cam: &Camera,
    pixel: (usize, usize),
    session: &SessionState,
    vt: &ValueTexture,
) -> Result<Option<ObjectId>, RenderError> {
    check_time(d, t)?;
    let (i, j) = pixel;
    if i >= cam.width || j >= cam.height {
        return Err(RenderError::PixelOutOfBounds(i, j));
    }
    let (o, dir) = cam.ray(i, j);
    let mut best: Option<(f64, ObjectId)> = None;
    for (id, mesh) in d.objects_at(t) {
        if !session.visible(vt, id.get(), t) {
            continue;
        }
        for tri in &mesh.triangles {
            let [a, b, c] = tri.map(|k| mesh.vertices[k as usize]);
            if cam.mode == Projection::Perspective
                && [a, b, c].iter().any(|&p| (p - cam.position).dot(cam.forward()) <= NEAR)
            {
                continue;
            }
            if let Some(s) = intersect(o, dir, a, b, c) {
                if best.is_none_or(|(bs, _)| s < bs) {
                    best = Some((s, id));
                }
            }
        }
    }
    Ok(best.map(|(_, id)| id))
}
