use std::fmt;

use serde::Serialize;

use super::{Dataset, Time};

/// One finding. `code` is a stable machine-readable tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    /// Object count per time step.
    pub counts: Vec<(Time, usize)>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, code: &'static str, message: String) {
        self.errors.push(Issue { code, message });
    }

    fn warn(&mut self, code: &'static str, message: String) {
        self.warnings.push(Issue { code, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let objects: usize = self.counts.iter().map(|c| c.1).sum();
        writeln!(f, "{} time steps, {} object instances", self.counts.len(), objects)?;
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(f, "{} errors, {} warnings", self.errors.len(), self.warnings.len())
    }
}

pub(super) fn validate(d: &Dataset) -> ValidationReport {
    let mut r = ValidationReport::default();

    for t in d.time_steps() {
        r.counts.push((t, d.object_count_at(t)));
        for (id, mesh) in d.objects_at(t) {
            if !mesh.indices_in_range() {
                r.error(
                    "index_out_of_range",
                    format!("object {id} at t={t}: triangle index out of range"),
                );
                continue;
            }
            if mesh.triangles.is_empty() {
                r.warn("empty_mesh", format!("object {id} at t={t}: no triangles"));
                continue;
            }
            let open = mesh.boundary_edge_count();
            if open > 0 {
                r.warn(
                    "open_mesh",
                    format!("object {id} at t={t}: open mesh ({open} unmatched edges)"),
                );
            }
        }
    }

    for node in d.lineage.nodes() {
        if !d.contains(node.id, node.t) {
            r.error(
                "dangling_lineage",
                format!("lineage node {node} has no object in the dataset"),
            );
        }
        let succ = d.lineage.successors(node).len();
        if succ > 2 {
            r.error(
                "too_many_successors",
                format!("lineage node {node} has {succ} successors"),
            );
        }
    }
    for (parent, child) in d.lineage.edges() {
        if child.t != parent.t + 1 {
            r.error(
                "non_adjacent_edge",
                format!("lineage edge {parent} -> {child} does not advance exactly one step"),
            );
        }
    }

    for (name, prop) in d.properties.iter() {
        let unknown = prop.values.keys().filter(|n| !d.contains(n.id, n.t)).count();
        if unknown > 0 {
            r.warn(
                "unknown_property_row",
                format!("property {name:?}: {unknown} rows reference unknown (id, t)"),
            );
        }
    }

    r
}
