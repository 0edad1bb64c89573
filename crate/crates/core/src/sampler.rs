//! Weighted node sampling for the generator.
//!
//! Degree-power and rank-preference weights live in a Fenwick tree so a draw
//! costs O(log N). Excluded nodes (the star's center, its neighbors and the
//! nodes already chosen) are zeroed for the draw and restored afterwards,
//! i.e. the distribution is renormalized over the eligible set.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{AppliedDelta, DynamicGraph, NodeIdx};
use crate::model::{degree_weight, rank_weight, Anchor, Component};

const ZERO_TOTAL_RELATIVE: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub(crate) struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
    updates: usize,
}

impl Fenwick {
    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        let mut f = Fenwick {
            tree: Vec::new(),
            values,
            updates: 0,
        };
        f.rebuild();
        f
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        self.tree = vec![0.0; n + 1];
        for i in 1..=n {
            self.tree[i] += self.values[i - 1];
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                let v = self.tree[i];
                self.tree[parent] += v;
            }
        }
        self.updates = 0;
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    pub(crate) fn total(&self) -> f64 {
        self.prefix(self.values.len())
    }

    pub(crate) fn push(&mut self, w: f64) {
        self.values.push(w);
        let i = self.values.len();
        let low = i & i.wrapping_neg();
        let node = w + self.prefix(i - 1) - self.prefix(i - low);
        self.tree.push(node);
    }

    pub(crate) fn set(&mut self, i: usize, w: f64) {
        let delta = w - self.values[i];
        self.values[i] = w;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
        self.updates += 1;
        if self.updates > 4 * self.values.len() + 65_536 {
            self.rebuild();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    pub(crate) fn find(&self, mut u: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n.saturating_sub(1))
    }
}

#[derive(Clone, Debug)]
enum ComponentSampler {
    Uniform,
    Weighted { component: Component, tree: Fenwick, table: Vec<f64> },
    Triangle,
}

impl ComponentSampler {
    fn new(component: Component, graph: &DynamicGraph) -> Self {
        match component {
            Component::Random => ComponentSampler::Uniform,
            Component::TriangleClosure => ComponentSampler::Triangle,
            Component::DegreePower(_) | Component::RankPreference(_) => {
                let mut s = ComponentSampler::Weighted {
                    component,
                    tree: Fenwick::default(),
                    table: Vec::new(),
                };
                let values = (0..graph.node_count() as NodeIdx)
                    .map(|i| s.node_weight(graph, i))
                    .collect();
                if let ComponentSampler::Weighted { tree, .. } = &mut s {
                    *tree = Fenwick::from_values(values);
                }
                s
            }
        }
    }

    fn node_weight(&mut self, graph: &DynamicGraph, node: NodeIdx) -> f64 {
        let ComponentSampler::Weighted { component, table, .. } = self else {
            return 1.0;
        };
        match *component {
            Component::DegreePower(a) => {
                let k = graph.degree(node);
                while table.len() <= k {
                    table.push(degree_weight(table.len(), a));
                }
                table[k]
            }
            Component::RankPreference(a) => rank_weight(graph.arrival_index(node), a),
            _ => 1.0,
        }
    }

    fn after_apply(&mut self, graph: &DynamicGraph, delta: &AppliedDelta) {
        if !matches!(self, ComponentSampler::Weighted { .. }) {
            return;
        }
        let mut updates: Vec<(NodeIdx, f64)> = Vec::new();
        for k in 0..delta.new_nodes {
            let i = delta.first_new + k;
            updates.push((i, self.node_weight(graph, i)));
        }
        let degree_based = matches!(
            self,
            ComponentSampler::Weighted { component: Component::DegreePower(_), .. }
        );
        if degree_based {
            let touched: Vec<NodeIdx> = delta
                .degree_changes(graph)
                .map(|(n, _, _)| n)
                .filter(|&n| !delta.is_new(n))
                .collect();
            for n in touched {
                updates.push((n, self.node_weight(graph, n)));
            }
        }
        if let ComponentSampler::Weighted { tree, .. } = self {
            for (i, w) in updates {
                if (i as usize) < tree.len() {
                    tree.set(i as usize, w);
                } else {
                    tree.push(w);
                }
            }
        }
    }
}

/// Draws one node from a mixture over the eligible set.
#[derive(Clone, Debug)]
pub(crate) struct ChoiceSampler {
    components: Vec<Component>,
    samplers: Vec<ComponentSampler>,
    counts: Vec<u32>,
    touched: Vec<NodeIdx>,
}

impl ChoiceSampler {
    pub(crate) fn new(components: &[Component], graph: &DynamicGraph) -> Self {
        ChoiceSampler {
            components: components.to_vec(),
            samplers: components
                .iter()
                .map(|c| ComponentSampler::new(*c, graph))
                .collect(),
            counts: Vec::new(),
            touched: Vec::new(),
        }
    }

    pub(crate) fn components(&self) -> &[Component] {
        &self.components
    }

    pub(crate) fn after_apply(&mut self, graph: &DynamicGraph, delta: &AppliedDelta) {
        for s in &mut self.samplers {
            s.after_apply(graph, delta);
        }
    }

    /// Picks a component by `weights`, then a node from that component
    /// renormalized over all nodes not in `excluded` (sorted, distinct).
    pub(crate) fn choose<R: Rng>(
        &mut self,
        graph: &DynamicGraph,
        weights: &[f64],
        anchor: Anchor,
        excluded: &[NodeIdx],
        rng: &mut R,
    ) -> Result<NodeIdx> {
        let n = graph.node_count();
        if excluded.len() >= n {
            return Err(Error::GrowthStall(format!(
                "no eligible node: {n} nodes, {} excluded",
                excluded.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut k = 0;
        while k + 1 < weights.len() && (weights[k] == 0.0 || u >= weights[k]) {
            u -= weights[k];
            k += 1;
        }
        while weights[k] == 0.0 && k > 0 {
            k -= 1;
        }
        let sampler = &mut self.samplers[k];
        match sampler {
            ComponentSampler::Uniform => Ok(uniform_excluding(n, excluded, rng)),
            ComponentSampler::Weighted { tree, .. } => {
                let before = tree.total();
                let saved: Vec<(usize, f64)> = excluded
                    .iter()
                    .map(|&e| (e as usize, tree.value(e as usize)))
                    .collect();
                for &(e, _) in &saved {
                    tree.set(e, 0.0);
                }
                let remaining = tree.total();
                let pick = if remaining <= before * ZERO_TOTAL_RELATIVE {
                    uniform_excluding(n, excluded, rng)
                } else {
                    let mut pick = None;
                    for _ in 0..8 {
                        let i = tree.find(rng.random::<f64>() * remaining);
                        if tree.value(i) > 0.0 {
                            pick = Some(i as NodeIdx);
                            break;
                        }
                    }
                    pick.unwrap_or_else(|| {
                        (0..n)
                            .rev()
                            .find(|&i| tree.value(i) > 0.0)
                            .map(|i| i as NodeIdx)
                            .unwrap_or_else(|| uniform_excluding(n, excluded, rng))
                    })
                };
                for (e, v) in saved {
                    tree.set(e, v);
                }
                Ok(pick)
            }
            ComponentSampler::Triangle => {
                let Anchor::Node(a) = anchor else {
                    return Ok(uniform_excluding(n, excluded, rng));
                };
                if self.counts.len() < n {
                    self.counts.resize(n, 0);
                }
                for &v in graph.neighbors(a) {
                    for &i in graph.neighbors(v) {
                        if self.counts[i as usize] == 0 {
                            self.touched.push(i);
                        }
                        self.counts[i as usize] += 1;
                    }
                }
                let candidates: Vec<(NodeIdx, f64)> = self
                    .touched
                    .iter()
                    .filter(|&&i| i != a && excluded.binary_search(&i).is_err())
                    .map(|&i| (i, self.counts[i as usize] as f64))
                    .collect();
                for &i in &self.touched {
                    self.counts[i as usize] = 0;
                }
                self.touched.clear();
                let sum: f64 = candidates.iter().map(|c| c.1).sum();
                if sum <= 0.0 {
                    return Ok(uniform_excluding(n, excluded, rng));
                }
                let mut u = rng.random::<f64>() * sum;
                for &(i, w) in &candidates {
                    if u < w {
                        return Ok(i);
                    }
                    u -= w;
                }
                Ok(candidates.last().expect("nonempty").0)
            }
        }
    }
}

/// Uniform draw from `0..n` skipping the sorted, distinct `excluded` list.
fn uniform_excluding<R: Rng>(n: usize, excluded: &[NodeIdx], rng: &mut R) -> NodeIdx {
    let mut idx = rng.random_range(0..(n - excluded.len())) as NodeIdx;
    for &e in excluded {
        if e <= idx {
            idx += 1;
        } else {
            break;
        }
    }
    idx
}
