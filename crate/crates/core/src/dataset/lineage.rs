use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::ops::Range;

use serde::Serialize;

use super::mesh::{Node, ObjectId, Time};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LineageError {
    #[error("unknown lineage node {0}")]
    UnknownNode(Node),
    #[error("time step {t} out of range {start}..{end}")]
    TimeOutOfRange { t: Time, start: Time, end: Time },
    #[error("edge {parent} -> {child}: successor must be exactly one step later")]
    NonAdjacent { parent: Node, child: Node },
    #[error("node {0} would have more than two successors")]
    TooManySuccessors(Node),
}

/// Steps until the next division. `censored` is set when the track ends
/// before any division, in which case `steps` counts to the track end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Lifespan {
    pub steps: u32,
    pub censored: bool,
}

/// Directed successor graph over object instances.
///
/// Nodes are `(id, t)` instances inside `time_range`; edges link a node to its
/// successors at `t + 1`. A node with two successors is a division.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LineageTree {
    time_range: Range<Time>,
    nodes: BTreeSet<Node>,
    children: BTreeMap<Node, Vec<Node>>,
    parents: BTreeMap<Node, Vec<Node>>,
}

impl LineageTree {
    pub fn new(time_range: Range<Time>) -> Self {
        Self {
            time_range,
            ..Default::default()
        }
    }

    pub fn time_range(&self) -> Range<Time> {
        self.time_range.clone()
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), LineageError> {
        self.check_time(node.t)?;
        self.nodes.insert(node);
        Ok(())
    }

    /// Adds `parent -> (child_id, parent.t + 1)`, creating both nodes as needed.
    pub fn add_edge(&mut self, parent: Node, child_id: ObjectId) -> Result<(), LineageError> {
        let child = Node::new(child_id, parent.t + 1);
        self.check_time(parent.t)?;
        self.check_time(child.t)?;
        let succ = self.children.get(&parent).map_or(0, Vec::len);
        if succ >= 2 {
            return Err(LineageError::TooManySuccessors(parent));
        }
        self.insert_edge_unchecked(parent, child);
        Ok(())
    }

    /// Inserts an arbitrary edge without enforcing any invariant. Intended for
    /// building deliberately malformed structures that `validate` should flag.
    pub fn insert_edge_unchecked(&mut self, parent: Node, child: Node) {
        self.nodes.insert(parent);
        self.nodes.insert(child);
        let kids = self.children.entry(parent).or_default();
        if !kids.contains(&child) {
            kids.push(child);
            kids.sort();
            self.parents.entry(child).or_default().push(parent);
        }
    }

    fn check_time(&self, t: Time) -> Result<(), LineageError> {
        if self.time_range.contains(&t) {
            Ok(())
        } else {
            Err(LineageError::TimeOutOfRange {
                t,
                start: self.time_range.start,
                end: self.time_range.end,
            })
        }
    }

    pub fn contains(&self, node: Node) -> bool {
        self.nodes.contains(&node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Node, Node)> + '_ {
        self.children
            .iter()
            .flat_map(|(&p, kids)| kids.iter().map(move |&c| (p, c)))
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(Vec::len).sum()
    }

    pub fn successors(&self, node: Node) -> &[Node] {
        self.children.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn predecessors(&self, node: Node) -> &[Node] {
        self.parents.get(&node).map_or(&[], Vec::as_slice)
    }

    fn require(&self, node: Node) -> Result<(), LineageError> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(LineageError::UnknownNode(node))
        }
    }

    pub fn remaining_lifespan(&self, id: ObjectId, t: Time) -> Result<Lifespan, LineageError> {
        let mut node = Node::new(id, t);
        self.require(node)?;
        let mut steps = 0;
        loop {
            match self.successors(node) {
                [] => return Ok(Lifespan { steps, censored: true }),
                [next] => {
                    node = *next;
                    steps += 1;
                }
                _ => return Ok(Lifespan { steps, censored: false }),
            }
        }
    }

    /// Remaining lifespan of every node, computed in one backward sweep over time.
    pub fn all_lifespans(&self) -> BTreeMap<Node, Lifespan> {
        let mut out: BTreeMap<Node, Lifespan> = BTreeMap::new();
        let mut by_time: Vec<Node> = self.nodes.iter().copied().collect();
        by_time.sort_by_key(|n| std::cmp::Reverse(n.t));
        for node in by_time {
            let ls = match self.successors(node) {
                [] => Lifespan {
                    steps: 0,
                    censored: true,
                },
                [next] => match out.get(next) {
                    Some(l) => Lifespan {
                        steps: l.steps + 1,
                        censored: l.censored,
                    },
                    // Malformed edge pointing backwards or sideways in time.
                    None => self.remaining_lifespan(node.id, node.t).unwrap_or(Lifespan {
                        steps: 0,
                        censored: true,
                    }),
                },
                _ => Lifespan {
                    steps: 0,
                    censored: false,
                },
            };
            out.insert(node, ls);
        }
        out
    }

    /// Transitive closure of successor edges, including the query node.
    pub fn descendants(&self, id: ObjectId, t: Time) -> Result<BTreeSet<Node>, LineageError> {
        let start = Node::new(id, t);
        self.require(start)?;
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &c in self.successors(n) {
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        Ok(seen)
    }

    /// IDs at time `t` that divide into two successors at `t + 1`.
    pub fn divisions_at(&self, t: Time) -> Result<Vec<ObjectId>, LineageError> {
        self.check_time(t)?;
        self.check_time(t + 1)?;
        let lo = Node::new(ObjectId::new(1).expect("nonzero"), t);
        Ok(self
            .children
            .range(lo..)
            .take_while(|(n, _)| n.t == t)
            .filter(|(_, kids)| kids.len() == 2)
            .map(|(n, _)| n.id)
            .collect())
    }

    /// Division count for every step `t` whose successor step is in range.
    pub fn division_histogram(&self) -> Vec<(Time, usize)> {
        let mut counts: BTreeMap<Time, usize> = self
            .time_range
            .clone()
            .take_while(|t| self.time_range.contains(&(t + 1)))
            .map(|t| (t, 0))
            .collect();
        for (n, kids) in &self.children {
            if kids.len() == 2 {
                if let Some(c) = counts.get_mut(&n.t) {
                    *c += 1;
                }
            }
        }
        counts.into_iter().collect()
    }

    /// Earliest and latest instances of `id`.
    pub fn instances(&self, id: ObjectId) -> impl Iterator<Item = Node> + '_ {
        self.nodes.iter().copied().filter(move |n| n.id == id)
    }
}
