use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// Dataset time step index.
pub type Time = i32;

/// Object identifier. Zero is reserved for empty/background voxels and pixels,
/// so a valid `ObjectId` is always positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ObjectId(u32);

impl ObjectId {
    pub fn new(raw: u32) -> Option<Self> {
        (raw != 0).then_some(Self(raw))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for ObjectId {
    type Error = String;

    fn try_from(raw: u32) -> Result<Self, Self::Error> {
        Self::new(raw).ok_or_else(|| "object id 0 is reserved for background".to_string())
    }
}

impl From<ObjectId> for u32 {
    fn from(id: ObjectId) -> u32 {
        id.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One object instance: `(id, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Node {
    pub id: ObjectId,
    pub t: Time,
}

impl Node {
    pub fn new(id: ObjectId, t: Time) -> Self {
        Self { id, t }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, t={})", self.id, self.t)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ObjError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangle { line: usize, count: usize },
    #[error("line {line}: vertex index {index} out of range")]
    IndexOutOfRange { line: usize, index: i64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed triangle surface mesh; triangles wind counter-clockwise seen from outside.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// Enclosed volume together with a flag telling whether the mesh was open,
/// in which case the divergence sum is only an approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshVolume {
    pub value: f64,
    pub approximate: bool,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles }
    }

    /// Axis-aligned cube `[min, min + size]^3` with outward winding.
    pub fn cube(min: Vec3, size: f64) -> Self {
        Self::cuboid(min, min + Vec3::splat(size))
    }

    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let vertices = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { min.x } else { max.x },
                    if i & 2 == 0 { min.y } else { max.y },
                    if i & 4 == 0 { min.z } else { max.z },
                )
            })
            .collect();
        #[rustfmt::skip]
        let triangles = vec![
            [0, 2, 1], [1, 2, 3], // -z
            [4, 5, 6], [5, 7, 6], // +z
            [0, 1, 4], [1, 5, 4], // -y
            [2, 6, 3], [3, 6, 7], // +y
            [0, 4, 2], [2, 4, 6], // -x
            [1, 3, 5], [3, 7, 5], // +x
        ];
        Self { vertices, triangles }
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        )
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn indices_in_range(&self) -> bool {
        let n = self.vertices.len() as u32;
        self.triangles.iter().flatten().all(|&i| i < n)
    }

    /// Number of undirected edges not shared by exactly two triangles.
    pub fn boundary_edge_count(&self) -> usize {
        let mut uses: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        uses.values().filter(|&&n| n != 2).count()
    }

    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.boundary_edge_count() == 0
    }

    /// Signed tetrahedron sum over all faces. Positive for outward winding.
    pub fn volume(&self) -> MeshVolume {
        // Summing relative to the first vertex keeps the result exact under translation
        // up to rounding.
        let anchor = self.vertices.first().copied().unwrap_or_default();
        let six_v: f64 = (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                (a - anchor).dot((b - anchor).cross(c - anchor))
            })
            .sum();
        MeshVolume {
            value: six_v / 6.0,
            approximate: !self.is_closed(),
        }
    }

    /// Parse Wavefront-style ASCII: `v x y z` and `f a b c` records with 1-based
    /// indices (negative indices count from the end). Other records are ignored.
    /// Faces with more than three vertices are rejected.
    pub fn read_obj<R: BufRead>(reader: R) -> Result<Self, ObjError> {
        let mut mesh = Mesh::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let mut c = [0.0; 3];
                    for slot in &mut c {
                        let tok = parts.next().ok_or_else(|| ObjError::Syntax {
                            line: lineno,
                            msg: "vertex needs 3 coordinates".into(),
                        })?;
                        *slot = tok.parse().map_err(|_| ObjError::Syntax {
                            line: lineno,
                            msg: format!("bad coordinate {tok:?}"),
                        })?;
                    }
                    mesh.vertices.push(c.into());
                }
                Some("f") => {
                    let toks: Vec<&str> = parts.collect();
                    if toks.len() != 3 {
                        return Err(ObjError::NonTriangle {
                            line: lineno,
                            count: toks.len(),
                        });
                    }
                    let mut tri = [0u32; 3];
                    for (slot, tok) in tri.iter_mut().zip(&toks) {
                        // "7/1/3" style records carry texture/normal indices we don't need.
                        let head = tok.split('/').next().unwrap_or_default();
                        let idx: i64 = head.parse().map_err(|_| ObjError::Syntax {
                            line: lineno,
                            msg: format!("bad face index {tok:?}"),
                        })?;
                        let n = mesh.vertices.len() as i64;
                        let resolved = match idx {
                            i if i > 0 => i - 1,
                            i if i < 0 => n + i,
                            _ => -1,
                        };
                        if resolved < 0 || resolved >= n {
                            return Err(ObjError::IndexOutOfRange {
                                line: lineno,
                                index: idx,
                            });
                        }
                        *slot = resolved as u32;
                    }
                    mesh.triangles.push(tri);
                }
                _ => {}
            }
        }
        Ok(mesh)
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for [a, b, c] in &self.triangles {
            writeln!(w, "f {} {} {}", a + 1, b + 1, c + 1)?;
        }
        Ok(())
    }
}
