//! Network growth under a model schedule.
//!
//! Each step adds one star. Star shapes come either from a fixed rule
//! (external stars of `m` targets, or with probability `q` an internal star
//! of `internal_size` targets) or from replaying an operation schedule
//! extracted from a real stream. Node choices follow the schedule's mixture
//! exactly as the likelihood scores them: centers are drawn from all nodes
//! with the triangle component acting uniformly, external stars draw their
//! first target uniformly under the triangle component and anchor later ones
//! at it, and internal stars anchor every target at the center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Increment, NodeIdx, NodeRef};
use crate::model::{Anchor, MixtureInterval, ModelSchedule};
use crate::sampler::ChoiceSampler;
use crate::stream::{IncrementStream, OperationSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedGraph {
    Clique(usize),
    Empty,
}

impl Default for SeedGraph {
    fn default() -> Self {
        SeedGraph::Clique(5)
    }
}

impl SeedGraph {
    pub fn build(&self) -> DynamicGraph {
        match *self {
            SeedGraph::Clique(n) => DynamicGraph::clique(n),
            SeedGraph::Empty => DynamicGraph::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedRule {
    /// Targets per external star.
    pub m: usize,
    /// Probability that a step is an internal star.
    #[serde(default)]
    pub internal_prob: f64,
    #[serde(default = "one")]
    pub internal_size: usize,
    /// Leading steps that are always external, so internal stars do not
    /// start on a saturated seed.
    #[serde(default)]
    pub external_warmup: usize,
}

fn one() -> usize {
    1
}

impl FixedRule {
    pub fn external(m: usize) -> Self {
        FixedRule {
            m,
            internal_prob: 0.0,
            internal_size: 1,
            external_warmup: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operations {
    Fixed(FixedRule),
    Replay(OperationSchedule),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    /// Stop once the graph holds this many nodes.
    Nodes(usize),
    /// Stop after this many increments.
    Increments(usize),
}

/// Everything `grow` needs; serializable as a JSON recipe file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecipe {
    #[serde(default)]
    pub seed_graph: SeedGraph,
    pub operations: Operations,
    pub schedule: ModelSchedule,
    /// Replays stop when their events run out even without a stop condition.
    #[serde(default)]
    pub stop: Option<StopCondition>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl GrowthRecipe {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        for m in &self.schedule.intervals {
            for c in m.components() {
                c.validate()?;
            }
        }
        match &self.operations {
            Operations::Fixed(r) => {
                if r.m == 0 {
                    return Err(Error::InvalidRecipe("external stars need m >= 1".into()));
                }
                if !(0.0..=1.0).contains(&r.internal_prob) {
                    return Err(Error::InvalidRecipe(format!(
                        "internal probability {} outside [0,1]",
                        r.internal_prob
                    )));
                }
                if r.internal_prob > 0.0 && r.internal_size == 0 {
                    return Err(Error::InvalidRecipe("internal stars need size >= 1".into()));
                }
                let seed_nodes = self.seed_graph.build().node_count();
                if seed_nodes < r.m + 1 {
                    return Err(Error::InvalidRecipe(format!(
                        "seed has {seed_nodes} nodes, external stars of {} need at least {}",
                        r.m,
                        r.m + 1
                    )));
                }
                if self.stop.is_none() {
                    return Err(Error::InvalidRecipe("a fixed rule needs a stop condition".into()));
                }
            }
            Operations::Replay(s) => {
                if let Some(e) = s.events.iter().find(|e| e.new_targets + e.existing_targets == 0) {
                    return Err(Error::InvalidRecipe(format!(
                        "event at timestamp {} has no targets",
                        e.timestamp
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A grown network: the seed, the increments added to it, and the result.
#[derive(Clone, Debug)]
pub struct Growth {
    pub seed: DynamicGraph,
    pub increments: Vec<Increment>,
    pub graph: DynamicGraph,
}

impl Growth {
    /// The whole history as one stream: seed edges as timestamp-0 stars, then
    /// the grown increments. Read it back with the seed cut at timestamp 0.
    pub fn to_stream(&self) -> Result<IncrementStream> {
        let mut increments = seed_increments(&self.seed)?;
        increments.extend(self.increments.iter().cloned());
        Ok(IncrementStream::with_index_labels(
            self.graph.node_count(),
            increments,
        ))
    }
}

/// Expresses a seed graph as stars, node `v` joining to its earlier
/// neighbors. Every node past the first needs an earlier neighbor.
pub fn seed_increments(seed: &DynamicGraph) -> Result<Vec<Increment>> {
    let n = seed.node_count() as NodeIdx;
    let mut out = Vec::new();
    for v in 1..n {
        let earlier: Vec<NodeIdx> = seed.neighbors(v).iter().copied().filter(|&u| u < v).collect();
        if earlier.is_empty() {
            return Err(Error::InvalidRecipe(format!(
                "seed node {v} has no earlier neighbor"
            )));
        }
        if v == 1 {
            out.push(Increment::new(0, NodeRef::New, vec![NodeRef::New]));
        } else {
            out.push(Increment::new(
                0,
                NodeRef::New,
                earlier.into_iter().map(NodeRef::Existing).collect(),
            ));
        }
    }
    Ok(out)
}

pub fn grow(recipe: &GrowthRecipe) -> Result<Growth> {
    recipe.validate()?;
    let seed = recipe.seed_graph.build();
    let mut graph = seed.clone();
    let components = recipe.schedule.distinct_components();
    let mut sampler = ChoiceSampler::new(&components, &graph);
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.rng_seed);
    let mut increments = Vec::new();
    let mut weights = vec![0.0; components.len()];
    let mut step = 0usize;
    loop {
        match recipe.stop {
            Some(StopCondition::Nodes(n)) if graph.node_count() >= n => break,
            Some(StopCondition::Increments(n)) if step >= n => break,
            _ => {}
        }
        let (timestamp, shape) = match &recipe.operations {
            Operations::Fixed(rule) => {
                let internal = step >= rule.external_warmup
                    && rule.internal_prob > 0.0
                    && rng.random::<f64>() < rule.internal_prob;
                let shape = if internal {
                    Shape { center_new: false, new_targets: 0, existing: rule.internal_size }
                } else {
                    Shape { center_new: true, new_targets: 0, existing: rule.m }
                };
                (step as i64 + 1, shape)
            }
            Operations::Replay(s) => {
                let Some(e) = s.events.get(step) else { break };
                let shape = Shape {
                    center_new: e.center_new,
                    new_targets: e.new_targets,
                    existing: e.existing_targets,
                };
                (e.timestamp, shape)
            }
        };
        let t = recipe.schedule.time_of(step, timestamp);
        let model = recipe.schedule.interval_at(t);
        align_weights(model, sampler.components(), &mut weights);
        let inc = draw_increment(&graph, &mut sampler, &weights, timestamp, shape, &mut rng)
            .map_err(|e| match e {
                Error::GrowthStall(m) => Error::GrowthStall(format!("step {}: {m}", step + 1)),
                other => other,
            })?;
        let delta = graph.apply_increment(&inc)?;
        sampler.after_apply(&graph, &delta);
        increments.push(inc);
        step += 1;
        if step.is_multiple_of(10_000) {
            log::info!("grown {step} increments, {} nodes", graph.node_count());
        }
    }
    Ok(Growth {
        seed,
        increments,
        graph,
    })
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    center_new: bool,
    new_targets: usize,
    existing: usize,
}

fn align_weights(model: &MixtureInterval, components: &[crate::model::Component], out: &mut [f64]) {
    out.iter_mut().for_each(|w| *w = 0.0);
    for (w, c) in model.terms() {
        let k = components.iter().position(|x| *x == c).expect("schedule component");
        out[k] += w;
    }
}

fn draw_increment<R: Rng>(
    graph: &DynamicGraph,
    sampler: &mut ChoiceSampler,
    weights: &[f64],
    timestamp: i64,
    shape: Shape,
    rng: &mut R,
) -> Result<Increment> {
    let mut excluded: Vec<NodeIdx> = Vec::new();
    let center = if shape.center_new || graph.node_count() == 0 {
        if !shape.center_new {
            return Err(Error::GrowthStall("internal star on an empty graph".into()));
        }
        NodeRef::New
    } else {
        let c = sampler.choose(graph, weights, Anchor::None, &[], rng)?;
        excluded.extend_from_slice(graph.neighbors(c));
        insert_sorted(&mut excluded, c);
        NodeRef::Existing(c)
    };
    let mut targets = Vec::with_capacity(shape.existing + shape.new_targets);
    let mut first: Option<NodeIdx> = None;
    for _ in 0..shape.existing {
        let anchor = match center {
            NodeRef::Existing(c) => Anchor::Node(c),
            NodeRef::New => first.map_or(Anchor::None, Anchor::Node),
        };
        let x = sampler.choose(graph, weights, anchor, &excluded, rng)?;
        first.get_or_insert(x);
        insert_sorted(&mut excluded, x);
        targets.push(NodeRef::Existing(x));
    }
    targets.extend(std::iter::repeat_n(NodeRef::New, shape.new_targets));
    Ok(Increment::new(timestamp, center, targets))
}

fn insert_sorted(v: &mut Vec<NodeIdx>, x: NodeIdx) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

/// Empirical choice frequencies of the generator's sampler on a frozen
/// graph: `trials` single draws over all nodes not in `excluded`, returned
/// per node index.
pub fn sample_choice_frequencies(
    model: &MixtureInterval,
    graph: &DynamicGraph,
    anchor: Anchor,
    excluded: &[NodeIdx],
    trials: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    let mut ex = excluded.to_vec();
    ex.sort_unstable();
    ex.dedup();
    let mut sampler = ChoiceSampler::new(model.components(), graph);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut counts = vec![0u64; graph.node_count()];
    for _ in 0..trials {
        let x = sampler.choose(graph, model.weights(), anchor, &ex, &mut rng)?;
        counts[x as usize] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / trials as f64).collect())
}
