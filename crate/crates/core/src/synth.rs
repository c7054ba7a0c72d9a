//! Synthetic datasets: analytic shapes for geometric checks and an
//! embryo-like population of dividing cells for end-to-end runs.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{Dataset, DatasetError, Mesh, ObjectId, PropertyValue, Time};
use crate::math::Vec3;

/// Icosahedron refined `subdivisions` times, vertices pushed onto the sphere.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> Mesh {
    let unit = unit_icosphere(subdivisions);
    Mesh {
        vertices: unit.vertices.iter().map(|&v| center + v * radius).collect(),
        triangles: unit.triangles,
    }
}

fn unit_icosphere(subdivisions: u32) -> Mesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    #[rustfmt::skip]
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    Mesh { vertices, triangles }
}

/// One object that does not move: an axis-aligned cube present at every step.
pub fn static_cube(steps: usize, min: Vec3, size: f64) -> Dataset {
    let mut d = Dataset::new("static-cube", 0, steps);
    let id = ObjectId::new(1).expect("nonzero");
    for t in 0..steps as Time {
        d.insert_mesh(id, t, Mesh::cube(min, size)).expect("fresh dataset");
        if t > 0 {
            d.link(id, t - 1, id).expect("both instances exist");
        }
    }
    d
}

/// A single sphere whose center at step `t` is `start + velocity * t`.
pub fn moving_sphere(steps: usize, radius: f64, start: Vec3, velocity: Vec3, subdivisions: u32) -> Dataset {
    let mut d = Dataset::new("moving-sphere", 0, steps);
    let id = ObjectId::new(1).expect("nonzero");
    let unit = unit_icosphere(subdivisions);
    for t in 0..steps as Time {
        let c = start + velocity * f64::from(t);
        let mesh = Mesh {
            vertices: unit.vertices.iter().map(|&v| c + v * radius).collect(),
            triangles: unit.triangles.clone(),
        };
        d.insert_mesh(id, t, mesh).expect("fresh dataset");
        if t > 0 {
            d.link(id, t - 1, id).expect("both instances exist");
        }
    }
    d
}

/// Parameters of the embryo-like generator.
#[derive(Clone, Debug)]
pub struct EmbryoConfig {
    pub steps: usize,
    pub initial_cells: usize,
    /// Steps at which a division wave happens; dividing cells have two
    /// successors at `step + 1`.
    pub wave_steps: Vec<Time>,
    /// Fraction of the living cells dividing in each wave.
    pub wave_fraction: f64,
    /// Per-cell per-step probability of a division outside the waves.
    pub background_rate: f64,
    /// Radius of the ball holding the cells.
    pub embryo_radius: f64,
    pub sphere_subdivisions: u32,
    pub seed: u64,
}

impl Default for EmbryoConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            initial_cells: 160,
            wave_steps: vec![20, 45, 70],
            wave_fraction: 0.25,
            background_rate: 0.0,
            embryo_radius: 10.0,
            sphere_subdivisions: 1,
            seed: 7,
        }
    }
}

/// What the generator produced, tallied while generating.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EmbryoStats {
    pub objects_per_step: Vec<usize>,
    pub divisions_per_step: Vec<usize>,
    pub lineage_edges: usize,
    pub distinct_ids: usize,
}

impl EmbryoStats {
    pub fn total_instances(&self) -> usize {
        self.objects_per_step.iter().sum()
    }
}

struct Cell {
    id: ObjectId,
    center: Vec3,
    radius: f64,
    drift: Vec3,
    fate: &'static str,
}

const FATES: [&str; 3] = ["animal", "marginal", "vegetal"];

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let l = v.length();
        if l > 1e-3 && l <= 1.0 {
            return v / l;
        }
    }
}

/// Generates a population of spherical cells in a ball that drift slowly and
/// divide in waves. Daughters get fresh IDs and inherit the mother's fate
/// label (exposed as the categorical `fate` property).
pub fn embryo(cfg: &EmbryoConfig) -> Result<(Dataset, EmbryoStats), DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d = Dataset::new("synthetic-embryo", 0, cfg.steps);
    d.units = "um".into();
    let unit = unit_icosphere(cfg.sphere_subdivisions);
    let big = cfg.embryo_radius;

    let expected_final = cfg.initial_cells as f64 * (1.0 + cfg.wave_fraction).powi(cfg.wave_steps.len() as i32);
    // Keep the summed cell volume near half the ball over the whole run.
    let r_final = big * (0.5 / expected_final.max(1.0)).cbrt();
    let r0 = r_final * (expected_final / cfg.initial_cells.max(1) as f64).cbrt();

    let mut next_id = 1u32;
    let mut fresh_id = || {
        let id = ObjectId::new(next_id).expect("ids start at 1");
        next_id += 1;
        id
    };

    let mut cells: Vec<Cell> = Vec::with_capacity(cfg.initial_cells);
    for _ in 0..cfg.initial_cells {
        let mut best = Vec3::ZERO;
        let mut best_gap = f64::NEG_INFINITY;
        for _ in 0..30 {
            let c = random_unit(&mut rng) * (big - r0) * rng.gen::<f64>().cbrt();
            let gap = cells
                .iter()
                .map(|o| (o.center - c).length() - o.radius - r0)
                .fold(f64::INFINITY, f64::min);
            if gap > best_gap {
                best_gap = gap;
                best = c;
            }
            if gap > 0.0 {
                break;
            }
        }
        let fate = FATES[((best.z / big + 1.0) * 1.5).clamp(0.0, 2.999) as usize];
        cells.push(Cell {
            id: fresh_id(),
            center: best,
            radius: r0,
            drift: random_unit(&mut rng) * 0.02 * big / cfg.steps.max(1) as f64,
            fate,
        });
    }

    let mut stats = EmbryoStats::default();
    // Edges into step `t`, applied once the successors have been inserted.
    let mut links: Vec<(ObjectId, ObjectId)> = Vec::new();
    for t in 0..cfg.steps as Time {
        for c in &cells {
            let mesh = Mesh {
                vertices: unit.vertices.iter().map(|&v| c.center + v * c.radius).collect(),
                triangles: unit.triangles.clone(),
            };
            d.insert_mesh(c.id, t, mesh)?;
            d.properties
                .insert("fate", c.id, t, PropertyValue::Category(c.fate.into()))?;
        }
        for (parent, child) in links.drain(..) {
            d.link(parent, t - 1, child)?;
        }
        stats.objects_per_step.push(cells.len());
        if t + 1 == cfg.steps as Time {
            stats.divisions_per_step.push(0);
            break;
        }

        let wave = cfg.wave_steps.contains(&t);
        let mut divisions = 0;
        let mut next_cells = Vec::with_capacity(cells.len() * 2);
        for c in cells {
            let divide = if wave {
                rng.gen_bool(cfg.wave_fraction.clamp(0.0, 1.0))
            } else {
                cfg.background_rate > 0.0 && rng.gen_bool(cfg.background_rate.min(1.0))
            };
            if divide {
                divisions += 1;
                let axis = random_unit(&mut rng);
                let r = c.radius * 0.5f64.cbrt();
                for sign in [1.0, -1.0] {
                    let id = fresh_id();
                    links.push((c.id, id));
                    next_cells.push(Cell {
                        id,
                        center: c.center + axis * (sign * 0.5 * c.radius),
                        radius: r,
                        drift: c.drift,
                        fate: c.fate,
                    });
                }
            } else {
                let mut center = c.center + c.drift + random_unit(&mut rng) * (0.01 * big / 10.0);
                let lim = big - c.radius;
                if center.length() > lim {
                    center = center.normalize() * lim;
                }
                links.push((c.id, c.id));
                next_cells.push(Cell { center, ..c });
            }
        }
        stats.divisions_per_step.push(divisions);
        cells = next_cells;
    }
    stats.lineage_edges = d.lineage.edge_count();
    stats.distinct_ids = (next_id - 1) as usize;
    d.add_derived_properties()?;
    Ok((d, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn icosphere_is_closed_with_expected_size() {
        for k in 0..4 {
            let m = icosphere(Vec3::ZERO, 1.0, k);
            assert_eq!(m.triangles.len(), 20 * 4usize.pow(k));
            assert!(m.is_closed());
            assert!(m.vertices.iter().all(|v| (v.length() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn icosphere_volume_approaches_ball() {
        let v = icosphere(Vec3::ZERO, 1.0, 4).volume();
        let ball = 4.0 / 3.0 * PI;
        assert!(!v.approximate);
        assert!((v.value - ball).abs() / ball < 0.005, "{} vs {ball}", v.value);
        // Inscribed polytope: always below the ball.
        assert!(v.value < ball);
    }

    #[test]
    fn embryo_bookkeeping_matches_dataset() {
        let cfg = EmbryoConfig {
            steps: 12,
            initial_cells: 20,
            wave_steps: vec![3, 8],
            wave_fraction: 0.5,
            ..Default::default()
        };
        let (d, stats) = embryo(&cfg).unwrap();
        assert_eq!(d.step_count(), 12);
        for (t, &n) in d.time_steps().zip(&stats.objects_per_step) {
            assert_eq!(d.object_count_at(t), n);
        }
        let hist = d.lineage.division_histogram();
        for (t, c) in hist {
            assert_eq!(c, stats.divisions_per_step[t as usize]);
        }
        assert!(stats.divisions_per_step[3] > 0 && stats.divisions_per_step[8] > 0);
        assert_eq!(
            stats.divisions_per_step.iter().sum::<usize>(),
            stats.divisions_per_step[3] + stats.divisions_per_step[8]
        );
        assert_eq!(stats.lineage_edges, d.lineage.edge_count());
        assert!(d.validate().is_accepted());
    }

    #[test]
    fn embryo_is_reproducible() {
        let cfg = EmbryoConfig {
            steps: 5,
            initial_cells: 10,
            wave_steps: vec![2],
            ..Default::default()
        };
        let (a, sa) = embryo(&cfg).unwrap();
        let (b, sb) = embryo(&cfg).unwrap();
        assert_eq!(sa, sb);
        for t in a.time_steps() {
            assert!(a.objects_at(t).eq(b.objects_at(t)));
        }
    }
}
