//! Binary volume cache, little-endian throughout:
//!
//! ```text
//! "STC1"  u32 width  u32 height  u32 depth
//! f64 x12  plane origin, normal, u, v
//! f64 x4   viewport center u, center v, half extent, epsilon
//! i32 x depth                  time map
//! u32 x width*height*depth     ids
//! u8                           1 if a normal block follows
//! i16 x 3*width*height*depth   normals scaled by 32767
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{NormalVolume, StcError, StcVolume};
use crate::geometry::{CutPlane, Viewport};
use crate::math::Vec3;

pub const CACHE_MAGIC: &[u8; 4] = b"STC1";
const NORMAL_SCALE: f32 = 32767.0;

pub fn write_cache<W: Write>(mut w: W, v: &StcVolume, normals: Option<&NormalVolume>) -> Result<(), StcError> {
    if let Some(n) = normals {
        if (n.width, n.height, n.depth) != (v.width, v.height, v.depth) {
            return Err(StcError::BadCache("normal volume dimensions differ".into()));
        }
    }
    w.write_all(CACHE_MAGIC)?;
    for dim in [v.width, v.height, v.depth] {
        let dim = u32::try_from(dim).map_err(|_| StcError::BadCache("dimension exceeds u32".into()))?;
        w.write_all(&dim.to_le_bytes())?;
    }
    let p = &v.plane;
    for vec in [p.origin, p.normal, p.u, p.v] {
        for c in vec.to_array() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    let vp = &v.viewport;
    for c in [vp.center_uv[0], vp.center_uv[1], vp.half_extent, vp.epsilon] {
        w.write_all(&c.to_le_bytes())?;
    }
    for t in &v.time_map {
        w.write_all(&t.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(v.ids.len() * 4);
    for id in &v.ids {
        buf.extend_from_slice(&id.to_le_bytes());
    }
    w.write_all(&buf)?;
    match normals {
        None => w.write_all(&[0])?,
        Some(n) => {
            w.write_all(&[1])?;
            buf.clear();
            buf.reserve(n.normals.len() * 6);
            for nv in &n.normals {
                for c in nv {
                    let q = (c * NORMAL_SCALE).round().clamp(-NORMAL_SCALE, NORMAL_SCALE) as i16;
                    buf.extend_from_slice(&q.to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], StcError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b)
}

fn truncated(e: std::io::Error) -> StcError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        StcError::BadCache("truncated file".into())
    } else {
        StcError::Io(e)
    }
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, StcError> {
    Ok(f64::from_le_bytes(read_exact(r)?))
}

fn read_vec3<R: Read>(r: &mut R) -> Result<Vec3, StcError> {
    Ok(Vec3::new(read_f64(r)?, read_f64(r)?, read_f64(r)?))
}

pub fn read_cache<R: Read>(mut r: R) -> Result<(StcVolume, Option<NormalVolume>), StcError> {
    let magic: [u8; 4] = read_exact(&mut r)?;
    if &magic != CACHE_MAGIC {
        return Err(StcError::BadCache("bad magic".into()));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    }
    let [width, height, depth] = dims;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(depth))
        .ok_or_else(|| StcError::BadCache("dimensions overflow".into()))?;

    let plane = CutPlane {
        origin: read_vec3(&mut r)?,
        normal: read_vec3(&mut r)?,
        u: read_vec3(&mut r)?,
        v: read_vec3(&mut r)?,
    };
    let viewport = Viewport {
        center_uv: [read_f64(&mut r)?, read_f64(&mut r)?],
        half_extent: read_f64(&mut r)?,
        epsilon: read_f64(&mut r)?,
    };
    let mut time_map = Vec::with_capacity(depth);
    for _ in 0..depth {
        time_map.push(i32::from_le_bytes(read_exact(&mut r)?));
    }

    let mut buf = Vec::new();
    (&mut r).take(count as u64 * 4).read_to_end(&mut buf)?;
    if buf.len() != count * 4 {
        return Err(StcError::BadCache("truncated file".into()));
    }
    let ids = buf
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let flag: [u8; 1] = read_exact(&mut r)?;
    let normals = match flag[0] {
        0 => None,
        1 => {
            buf.clear();
            (&mut r).take(count as u64 * 6).read_to_end(&mut buf)?;
            if buf.len() != count * 6 {
                return Err(StcError::BadCache("truncated file".into()));
            }
            let normals = buf
                .chunks_exact(6)
                .map(|c| {
                    let q = |i: usize| i16::from_le_bytes([c[i], c[i + 1]]) as f32 / NORMAL_SCALE;
                    [q(0), q(2), q(4)]
                })
                .collect();
            Some(NormalVolume {
                width,
                height,
                depth,
                normals,
            })
        }
        other => return Err(StcError::BadCache(format!("bad normal flag {other}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(StcError::BadCache("trailing bytes".into()));
    }
    Ok((
        StcVolume {
            width,
            height,
            depth,
            ids,
            plane,
            viewport,
            time_map,
        },
        normals,
    ))
}

pub fn write_cache_file(path: &Path, v: &StcVolume, normals: Option<&NormalVolume>) -> Result<(), StcError> {
    write_cache(BufWriter::new(File::create(path)?), v, normals)
}

pub fn read_cache_file(path: &Path) -> Result<(StcVolume, Option<NormalVolume>), StcError> {
    read_cache(BufReader::new(File::open(path)?))
}
