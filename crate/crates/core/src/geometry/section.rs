use std::collections::HashMap;

use super::CutPlane;
use crate::dataset::{Mesh, ObjectId};

/// Vertices lying exactly on the plane are treated as if shifted this far
/// along the normal.
pub const ON_PLANE_NUDGE: f64 = 1e-9;
/// Open chain endpoints closer than this are joined before filling.
pub const CLOSE_TOLERANCE: f64 = 1e-6;

pub type Loop = Vec<[f64; 2]>;

/// Cross-section of one object: closed loops in plane `(u, v)` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    pub object: ObjectId,
    pub loops: Vec<Loop>,
    /// Open chains that could not be closed and were dropped.
    pub discarded_chains: usize,
}

impl Contour {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Sum of the loops' signed (shoelace) areas.
    pub fn signed_area(&self) -> f64 {
        self.loops.iter().map(|l| loop_signed_area(l)).sum()
    }

    /// `(min, max)` corners of the loops' bounding box.
    pub fn bounds(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut pts = self.loops.iter().flatten();
        let first = *pts.next()?;
        Some(pts.fold((first, first), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        }))
    }
}

pub fn loop_signed_area(l: &[[f64; 2]]) -> f64 {
    let n = l.len();
    (0..n)
        .map(|i| {
            let a = l[i];
            let b = l[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

type EdgeKey = (u32, u32);

struct Segment {
    start: EdgeKey,
    end: EdgeKey,
    a: [f64; 2],
    b: [f64; 2],
}

/// Intersects `mesh` with `plane` and chains the crossing segments into loops.
///
/// Loops of an outward-wound closed mesh run counter-clockwise in `(u, v)`,
/// so their signed areas are positive.
pub fn section_contours(object: ObjectId, mesh: &Mesh, plane: &CutPlane) -> Contour {
    let mut contour = Contour {
        object,
        loops: Vec::new(),
        discarded_chains: 0,
    };
    let dist: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|&p| {
            let d = plane.signed_distance(p);
            if d == 0.0 {
                ON_PLANE_NUDGE
            } else {
                d
            }
        })
        .collect();
    if dist.iter().all(|&d| d > 0.0) || dist.iter().all(|&d| d < 0.0) {
        return contour;
    }

    // Crossing point of edge (i, j), computed from the canonical vertex order so
    // both triangles sharing the edge produce bit-identical points.
    let crossing = |i: u32, j: u32| -> (EdgeKey, [f64; 2]) {
        let (lo, hi) = (i.min(j), i.max(j));
        let (dl, dh) = (dist[lo as usize], dist[hi as usize]);
        let s = dl / (dl - dh);
        let pl = mesh.vertices[lo as usize];
        let ph = mesh.vertices[hi as usize];
        ((lo, hi), plane.project(pl + (ph - pl) * s))
    };

    let mut segments = Vec::new();
    for tri in &mesh.triangles {
        let mut down = None;
        let mut up = None;
        for k in 0..3 {
            let (p, q) = (tri[k], tri[(k + 1) % 3]);
            let (dp, dq) = (dist[p as usize], dist[q as usize]);
            if dp > 0.0 && dq < 0.0 {
                down = Some(crossing(p, q));
            } else if dp < 0.0 && dq > 0.0 {
                up = Some(crossing(p, q));
            }
        }
        if let (Some((start, a)), Some((end, b))) = (down, up) {
            segments.push(Segment { start, end, a, b });
        }
    }

    let mut by_start: HashMap<EdgeKey, Vec<usize>> = HashMap::with_capacity(segments.len());
    for (i, s) in segments.iter().enumerate() {
        by_start.entry(s.start).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut open_chains: Vec<Loop> = Vec::new();

    for first in 0..segments.len() {
        if used[first] {
            continue;
        }
        used[first] = true;
        let mut pts = vec![segments[first].a];
        let mut cur = first;
        let closed = loop {
            let end = segments[cur].end;
            if end == segments[first].start {
                break true;
            }
            let next = by_start.get(&end).and_then(|c| c.iter().copied().find(|&i| !used[i]));
            match next {
                Some(n) => {
                    used[n] = true;
                    pts.push(segments[n].a);
                    cur = n;
                }
                None => {
                    pts.push(segments[cur].b);
                    break false;
                }
            }
        };
        if closed {
            push_loop(&mut contour, pts);
        } else {
            open_chains.push(pts);
        }
    }

    close_open_chains(&mut contour, open_chains);
    contour
}

fn push_loop(contour: &mut Contour, pts: Loop) {
    if pts.len() >= 3 {
        contour.loops.push(pts);
    }
}

fn near(a: [f64; 2], b: [f64; 2]) -> bool {
    (a[0] - b[0]).hypot(a[1] - b[1]) < CLOSE_TOLERANCE
}

/// Joins chains whose endpoints nearly coincide; whatever stays open is dropped.
fn close_open_chains(contour: &mut Contour, mut chains: Vec<Loop>) {
    while let Some(mut chain) = chains.pop() {
        loop {
            let (head, tail) = (chain[0], *chain.last().expect("chains are non-empty"));
            if chain.len() > 1 && near(head, tail) {
                chain.pop();
                push_loop(contour, chain);
                break;
            }
            match chains.iter().position(|c| near(tail, c[0])) {
                Some(j) => {
                    let next = chains.swap_remove(j);
                    chain.extend_from_slice(&next[1..]);
                }
                None => {
                    contour.discarded_chains += 1;
                    break;
                }
            }
        }
    }
}
