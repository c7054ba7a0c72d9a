use super::StcVolume;

/// Per-voxel unit normals of the occupancy field; zero where the gradient vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalVolume {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub normals: Vec<[f32; 3]>,
}

impl NormalVolume {
    pub fn get(&self, x: usize, y: usize, k: usize) -> [f32; 3] {
        self.normals[x + self.width * (y + self.height * k)]
    }
}

const SMOOTH: [f32; 3] = [1.0, 2.0, 1.0];
const DERIVE: [f32; 3] = [-1.0, 0.0, 1.0];

/// One 3-tap pass along `axis` with edge-clamped sampling.
fn pass(src: &[f32], dims: [usize; 3], axis: usize, k: [f32; 3]) -> Vec<f32> {
    let [w, h, d] = dims;
    let stride = [1, w, w * h][axis];
    let len = dims[axis];
    let mut out = vec![0.0f32; src.len()];
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let i = x + w * (y + h * z);
                let pos = [x, y, z][axis];
                let prev = if pos == 0 { i } else { i - stride };
                let next = if pos + 1 == len { i } else { i + stride };
                out[i] = k[0] * src[prev] + k[1] * src[i] + k[2] * src[next];
            }
        }
    }
    out
}

/// Gradient of the binary occupancy field (`id != 0`) with 3×3×3 Sobel
/// kernels, turned into outward normals `-g / |g|`.
pub fn compute_normals(v: &StcVolume) -> NormalVolume {
    let dims = [v.width, v.height, v.depth];
    let occ: Vec<f32> = v.ids.iter().map(|&id| if id != 0 { 1.0 } else { 0.0 }).collect();
    let normals = sobel_normals(&occ, dims);
    NormalVolume {
        width: v.width,
        height: v.height,
        depth: v.depth,
        normals,
    }
}

pub(crate) fn sobel_gradient(field: &[f32], dims: [usize; 3]) -> [Vec<f32>; 3] {
    let sz = pass(field, dims, 2, SMOOTH);
    let gx = pass(&pass(&sz, dims, 1, SMOOTH), dims, 0, DERIVE);
    let gy = pass(&pass(&sz, dims, 0, SMOOTH), dims, 1, DERIVE);
    drop(sz);
    let sxy = pass(&pass(field, dims, 0, SMOOTH), dims, 1, SMOOTH);
    let gz = pass(&sxy, dims, 2, DERIVE);
    [gx, gy, gz]
}

fn sobel_normals(field: &[f32], dims: [usize; 3]) -> Vec<[f32; 3]> {
    let [gx, gy, gz] = sobel_gradient(field, dims);
    (0..field.len())
        .map(|i| {
            let g = [gx[i], gy[i], gz[i]];
            let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if len > 1e-6 {
                [-g[0] / len, -g[1] / len, -g[2] / len]
            } else {
                [0.0; 3]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CutPlane, Viewport};
    use crate::math::Vec3;
    use proptest::prelude::*;

    fn volume(w: usize, h: usize, d: usize, f: impl Fn(usize, usize, usize) -> u32) -> StcVolume {
        let mut ids = Vec::with_capacity(w * h * d);
        for k in 0..d {
            for y in 0..h {
                for x in 0..w {
                    ids.push(f(x, y, k));
                }
            }
        }
        StcVolume {
            width: w,
            height: h,
            depth: d,
            ids,
            plane: CutPlane::new(Vec3::ZERO, Vec3::Z).unwrap(),
            viewport: Viewport {
                center_uv: [0.0, 0.0],
                half_extent: 1.0,
                epsilon: 0.1,
            },
            time_map: (0..d as i32).collect(),
        }
    }

    #[test]
    fn half_space_boundary_points_to_minus_x() {
        let v = volume(12, 9, 7, |x, _, _| u32::from(x >= 5));
        let n = compute_normals(&v);
        for k in 0..7 {
            for y in 0..9 {
                for x in [4, 5] {
                    assert_eq!(n.get(x, y, k), [-1.0, 0.0, 0.0], "({x},{y},{k})");
                }
                assert_eq!(n.get(8, y, k), [0.0; 3]);
            }
        }
    }

    #[test]
    fn empty_volume_has_zero_normals() {
        let v = volume(5, 5, 5, |_, _, _| 0);
        assert!(compute_normals(&v).normals.iter().all(|n| *n == [0.0; 3]));
    }

    #[test]
    fn nonzero_normals_are_unit() {
        let v = volume(10, 10, 10, |x, y, k| u32::from((x * 7 + y * 3 + k * 5) % 11 < 4));
        for n in compute_normals(&v).normals {
            let l = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            assert!(l == 0.0 || (l - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn ball_normals_point_radially() {
        let (n, c, r) = (40usize, 19.5f64, 13.0f64);
        let inside = |x: usize, y: usize, k: usize| {
            let d = [x as f64 - c, y as f64 - c, k as f64 - c];
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r * r
        };
        let v = volume(n, n, n, |x, y, k| u32::from(inside(x, y, k)));
        let normals = compute_normals(&v);
        let (mut sum, mut count) = (0.0, 0);
        for k in 1..n - 1 {
            for y in 1..n - 1 {
                for x in 1..n - 1 {
                    let surface = inside(x, y, k)
                        && [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
                            .iter()
                            .any(|&(a, b, e)| !inside(x + a, y + b, k + e) || !inside(x - a, y - b, k - e));
                    if !surface {
                        continue;
                    }
                    let d = Vec3::new(x as f64 - c, y as f64 - c, k as f64 - c).normalize();
                    let g = normals.get(x, y, k);
                    let nv = Vec3::new(g[0].into(), g[1].into(), g[2].into());
                    sum += nv.dot(d).clamp(-1.0, 1.0).acos().to_degrees();
                    count += 1;
                }
            }
        }
        assert!(count > 500);
        let mean = sum / count as f64;
        assert!(mean < 10.0, "mean angular error {mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn complement_flips_gradient(bits in proptest::collection::vec(any::<bool>(), 6 * 5 * 4)) {
            let dims = [6, 5, 4];
            let f: Vec<f32> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let c: Vec<f32> = f.iter().map(|v| 1.0 - v).collect();
            let gf = sobel_gradient(&f, dims);
            let gc = sobel_gradient(&c, dims);
            for a in 0..3 {
                for i in 0..f.len() {
                    prop_assert_eq!(gf[a][i], -gc[a][i]);
                }
            }
        }
    }
}
