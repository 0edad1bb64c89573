//! Evolving simple undirected graph and the star increments that grow it.
//!
//! Nodes are dense `u32` indices assigned in arrival order, so the arrival
//! rank of node `i` is always `i + 1`. Neighbor lists are kept sorted, which
//! makes edge lookups a binary search and common-neighbor counts a merge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeIdx = u32;

/// One slot of a star increment: either a node that joins with this
/// increment or a node already present in the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    New,
    Existing(NodeIdx),
}

impl NodeRef {
    pub fn existing(self) -> Option<NodeIdx> {
        match self {
            NodeRef::New => None,
            NodeRef::Existing(i) => Some(i),
        }
    }

    pub fn is_new(self) -> bool {
        matches!(self, NodeRef::New)
    }
}

/// A star-shaped growth event: `center` connects to every node in `targets`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Increment {
    pub timestamp: i64,
    pub center: NodeRef,
    pub targets: Vec<NodeRef>,
}

impl Increment {
    pub fn new(timestamp: i64, center: NodeRef, targets: Vec<NodeRef>) -> Self {
        Increment {
            timestamp,
            center,
            targets,
        }
    }

    /// Number of object-model choices, m(i): the existing-tagged slots.
    pub fn choice_count(&self) -> usize {
        usize::from(!self.center.is_new()) + self.existing_targets().count()
    }

    pub fn existing_targets(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.targets.iter().filter_map(|t| t.existing())
    }

    pub fn new_node_count(&self) -> usize {
        usize::from(self.center.is_new()) + self.targets.iter().filter(|t| t.is_new()).count()
    }

    /// An external star has a new center.
    pub fn is_external(&self) -> bool {
        self.center.is_new()
    }
}

/// What `apply_increment` did, in resolved node indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppliedDelta {
    pub center: NodeIdx,
    pub targets: Vec<NodeIdx>,
    /// New nodes occupy `first_new..first_new + new_nodes`.
    pub first_new: NodeIdx,
    pub new_nodes: u32,
}

impl AppliedDelta {
    pub fn is_new(&self, node: NodeIdx) -> bool {
        node >= self.first_new
    }

    /// `(node, degree before, degree after)` for every endpoint touched.
    pub fn degree_changes<'a>(
        &'a self,
        graph: &'a DynamicGraph,
    ) -> impl Iterator<Item = (NodeIdx, usize, usize)> + 'a {
        let star = self.targets.len();
        let center = graph.degree(self.center);
        std::iter::once((self.center, center - star, center)).chain(self.targets.iter().map(
            move |&t| {
                let d = graph.degree(t);
                (t, d - 1, d)
            },
        ))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DynamicGraph {
    adj: Vec<Vec<NodeIdx>>,
    edges: usize,
    time: i64,
}

impl DynamicGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Complete graph on `n` nodes, built edge by edge in arrival order.
    pub fn clique(n: usize) -> Self {
        let mut g = DynamicGraph::new();
        g.adj = (0..n)
            .map(|i| (0..n as NodeIdx).filter(|&j| j != i as NodeIdx).collect())
            .collect();
        g.edges = n * n.saturating_sub(1) / 2;
        g
    }

    /// Builds a graph on `n` nodes from an edge list, rejecting loops and duplicates.
    pub fn from_edges(n: usize, edges: &[(NodeIdx, NodeIdx)]) -> Result<Self> {
        let mut g = DynamicGraph::new();
        g.adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a as usize >= n {
                return Err(Error::UnknownNode(a));
            }
            if b as usize >= n {
                return Err(Error::UnknownNode(b));
            }
            if a == b {
                return Err(Error::RejectedIncrement(format!("self-loop on node {a}")));
            }
            if g.has_edge(a, b) {
                return Err(Error::RejectedIncrement(format!("duplicate edge ({a},{b})")));
            }
            g.insert_edge(a, b);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Timestamp of the last applied increment.
    pub fn time(&self) -> i64 {
        self.time
    }

    pub fn degree(&self, node: NodeIdx) -> usize {
        self.adj[node as usize].len()
    }

    pub fn neighbors(&self, node: NodeIdx) -> &[NodeIdx] {
        &self.adj[node as usize]
    }

    /// 1-based arrival rank R_i.
    pub fn arrival_index(&self, node: NodeIdx) -> usize {
        node as usize + 1
    }

    pub fn contains(&self, node: NodeIdx) -> bool {
        (node as usize) < self.adj.len()
    }

    pub fn has_edge(&self, a: NodeIdx, b: NodeIdx) -> bool {
        let (x, y) = if self.degree(a) <= self.degree(b) {
            (a, b)
        } else {
            (b, a)
        };
        self.adj[x as usize].binary_search(&y).is_ok()
    }

    /// |Γ(a) ∩ Γ(b)| by merging the two sorted neighbor lists.
    pub fn common_neighbors(&self, a: NodeIdx, b: NodeIdx) -> usize {
        let (xs, ys) = (self.neighbors(a), self.neighbors(b));
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Degrees indexed by arrival order.
    pub fn snapshot_degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, ns)| {
            let i = i as NodeIdx;
            ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j))
        })
    }

    /// Validates `inc` against the current graph, then adds its nodes and edges.
    /// New nodes take the next arrival indices: the center first, then new
    /// targets in listed order. Nothing is mutated when validation fails.
    pub fn apply_increment(&mut self, inc: &Increment) -> Result<AppliedDelta> {
        self.validate(inc)?;
        let first_new = self.adj.len() as NodeIdx;
        let mut next = first_new;
        let mut fresh = || {
            let id = next;
            next += 1;
            id
        };
        let center = match inc.center {
            NodeRef::Existing(c) => c,
            NodeRef::New => fresh(),
        };
        let targets: Vec<NodeIdx> = inc
            .targets
            .iter()
            .map(|t| match *t {
                NodeRef::Existing(x) => x,
                NodeRef::New => fresh(),
            })
            .collect();
        let new_nodes = next - first_new;
        self.adj.resize_with(next as usize, Vec::new);
        for &t in &targets {
            self.insert_edge(center, t);
        }
        self.time = inc.timestamp;
        Ok(AppliedDelta {
            center,
            targets,
            first_new,
            new_nodes,
        })
    }

    fn validate(&self, inc: &Increment) -> Result<()> {
        if inc.targets.is_empty() {
            return Err(Error::RejectedIncrement("star has no targets".into()));
        }
        let center = inc.center.existing();
        if let Some(c) = center {
            if !self.contains(c) {
                return Err(Error::UnknownNode(c));
            }
        }
        let mut seen: Vec<NodeIdx> = Vec::with_capacity(inc.targets.len());
        for t in inc.existing_targets() {
            if !self.contains(t) {
                return Err(Error::UnknownNode(t));
            }
            if Some(t) == center {
                return Err(Error::RejectedIncrement(format!("self-loop on node {t}")));
            }
            if seen.contains(&t) {
                return Err(Error::RejectedIncrement(format!("target {t} listed twice")));
            }
            if let Some(c) = center {
                if self.has_edge(c, t) {
                    return Err(Error::RejectedIncrement(format!("duplicate edge ({c},{t})")));
                }
            }
            seen.push(t);
        }
        Ok(())
    }

    fn insert_edge(&mut self, a: NodeIdx, b: NodeIdx) {
        for (x, y) in [(a, b), (b, a)] {
            let ns = &mut self.adj[x as usize];
            let pos = ns.partition_point(|&n| n < y);
            ns.insert(pos, y);
        }
        self.edges += 1;
    }
}
