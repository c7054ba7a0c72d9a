//! Time-varying segmented mesh datasets: meshes per object per time step,
//! property tables, and the lineage graph linking instances across time.

mod io;
mod lineage;
mod mesh;
mod properties;
mod validate;

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::PathBuf;

use crate::math::Vec3;

pub use io::{load_dataset, write_dataset, Manifest};
pub use lineage::{Lifespan, LineageError, LineageTree};
pub use mesh::{Mesh, MeshVolume, Node, ObjError, ObjectId, Time};
pub use properties::{Property, PropertyError, PropertyKind, PropertyTable, PropertyValue};
pub use validate::{Issue, ValidationReport};

/// Property name under which mesh volumes are exposed.
pub const VOLUME_PROPERTY: &str = "volume";
/// Property name under which remaining lifespans are exposed.
pub const LIFESPAN_PROPERTY: &str = "lifespan";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("missing mesh for {node}: {path}")]
    MissingMesh { node: Node, path: PathBuf },
    #[error("{path}: {source}")]
    Obj { path: PathBuf, source: ObjError },
    #[error("duplicate object {0}")]
    DuplicateObject(Node),
    #[error("time steps must be a non-empty contiguous ascending run")]
    TimeSteps,
    #[error("time step {0} not in dataset")]
    UnknownTime(Time),
    #[error("{file} line {line}: {msg}")]
    Table { file: PathBuf, line: u64, msg: String },
    #[error("malformed lineage edge {parent} -> {child}: {msg}")]
    MalformedLineage { parent: Node, child: Node, msg: String },
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Lineage(#[from] LineageError),
}

/// A loaded dataset. Treat it as immutable once built; all queries take `&self`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub units: String,
    start: Time,
    frames: Vec<BTreeMap<ObjectId, Mesh>>,
    pub properties: PropertyTable,
    pub lineage: LineageTree,
}

impl Dataset {
    /// Empty dataset spanning `steps` time steps starting at `start`.
    pub fn new(name: impl Into<String>, start: Time, steps: usize) -> Self {
        let end = start + steps as Time;
        Self {
            name: name.into(),
            units: String::new(),
            start,
            frames: vec![BTreeMap::new(); steps],
            properties: PropertyTable::default(),
            lineage: LineageTree::new(start..end),
        }
    }

    pub fn time_range(&self) -> Range<Time> {
        self.start..self.start + self.frames.len() as Time
    }

    pub fn time_steps(&self) -> impl Iterator<Item = Time> {
        self.time_range()
    }

    pub fn step_count(&self) -> usize {
        self.frames.len()
    }

    fn frame_index(&self, t: Time) -> Option<usize> {
        self.time_range().contains(&t).then(|| (t - self.start) as usize)
    }

    pub fn insert_mesh(&mut self, id: ObjectId, t: Time, mesh: Mesh) -> Result<(), DatasetError> {
        let k = self.frame_index(t).ok_or(DatasetError::UnknownTime(t))?;
        let node = Node::new(id, t);
        if self.frames[k].contains_key(&id) {
            return Err(DatasetError::DuplicateObject(node));
        }
        self.frames[k].insert(id, mesh);
        self.lineage.add_node(node)?;
        Ok(())
    }

    /// Adds a lineage edge `(id, t) -> (child, t + 1)`; both instances must exist.
    pub fn link(&mut self, id: ObjectId, t: Time, child: ObjectId) -> Result<(), DatasetError> {
        let parent = Node::new(id, t);
        let child_node = Node::new(child, t + 1);
        for n in [parent, child_node] {
            if self.mesh(n.id, n.t).is_none() {
                return Err(DatasetError::MalformedLineage {
                    parent,
                    child: child_node,
                    msg: format!("{n} is not an object of the dataset"),
                });
            }
        }
        self.lineage.add_edge(parent, child)?;
        Ok(())
    }

    /// Objects present at time `t`, in ascending ID order. Empty when out of range.
    pub fn objects_at(&self, t: Time) -> impl Iterator<Item = (ObjectId, &Mesh)> {
        self.frame_index(t)
            .map(|k| &self.frames[k])
            .into_iter()
            .flat_map(|m| m.iter().map(|(&id, mesh)| (id, mesh)))
    }

    pub fn object_count_at(&self, t: Time) -> usize {
        self.frame_index(t).map_or(0, |k| self.frames[k].len())
    }

    pub fn object_count(&self) -> usize {
        self.frames.iter().map(BTreeMap::len).sum()
    }

    pub fn mesh(&self, id: ObjectId, t: Time) -> Option<&Mesh> {
        self.frame_index(t).and_then(|k| self.frames[k].get(&id))
    }

    pub fn contains(&self, id: ObjectId, t: Time) -> bool {
        self.mesh(id, t).is_some()
    }

    /// Time steps at which `id` exists, ascending.
    pub fn lifetime(&self, id: ObjectId) -> Vec<Time> {
        self.time_steps().filter(|&t| self.contains(id, t)).collect()
    }

    /// Largest object ID in the dataset, 0 when empty.
    pub fn max_object_id(&self) -> u32 {
        self.frames
            .iter()
            .filter_map(|f| f.keys().next_back())
            .map(|id| id.get())
            .max()
            .unwrap_or(0)
    }

    pub fn property_value(&self, name: &str, id: ObjectId, t: Time) -> Result<Option<&PropertyValue>, PropertyError> {
        self.properties.value(name, id, t)
    }

    pub fn remaining_lifespan(&self, id: ObjectId, t: Time) -> Result<Lifespan, LineageError> {
        self.lineage.remaining_lifespan(id, t)
    }

    /// Axis-aligned bounds of every mesh vertex over all time.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        self.frames
            .iter()
            .flat_map(|f| f.values())
            .filter_map(Mesh::bounds)
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    /// Fills in `volume` and `lifespan` properties unless the property table
    /// already provides them.
    pub fn add_derived_properties(&mut self) -> Result<(), DatasetError> {
        if !self.properties.contains(VOLUME_PROPERTY) {
            self.properties.declare(VOLUME_PROPERTY, PropertyKind::Continuous)?;
            let rows: Vec<(ObjectId, Time, f64)> = self
                .time_steps()
                .flat_map(|t| self.objects_at(t).map(move |(id, m)| (id, t, m.volume().value)))
                .collect();
            for (id, t, v) in rows {
                if v.is_finite() {
                    self.properties
                        .insert(VOLUME_PROPERTY, id, t, PropertyValue::Scalar(v))?;
                }
            }
        }
        if !self.properties.contains(LIFESPAN_PROPERTY) {
            self.properties.declare(LIFESPAN_PROPERTY, PropertyKind::Continuous)?;
            for (node, ls) in self.lineage.all_lifespans() {
                self.properties.insert(
                    LIFESPAN_PROPERTY,
                    node.id,
                    node.t,
                    PropertyValue::Scalar(f64::from(ls.steps)),
                )?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }
}
