//! Object models, their time-varying mixtures, and the cosine similarity
//! between two models on a fixed graph.
//!
//! Everything here is the direct, O(|eligible|) evaluation of a model. The
//! likelihood engine and the generator use incremental bookkeeping for speed
//! and are tested against these functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, NodeIdx};
use crate::spec;

/// Tolerance on Σβ for a mixture built in code.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// One object-model component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Component {
    Random,
    /// `p_i ∝ k_i^α`; α = 1 is preferential attachment (BA).
    DegreePower(f64),
    /// `p_i ∝ |Γ(anchor) ∩ Γ(i)|`.
    TriangleClosure,
    /// `p_i ∝ R_i^{-α}` with R the arrival rank, α > 0.
    RankPreference(f64),
}

impl Component {
    pub const BA: Component = Component::DegreePower(1.0);

    pub fn validate(&self) -> Result<()> {
        match *self {
            Component::DegreePower(a) if !a.is_finite() => {
                Err(Error::InvalidModel(format!("degree power exponent {a} is not finite")))
            }
            Component::RankPreference(a) if !(a.is_finite() && a > 0.0) => Err(
                Error::InvalidModel(format!("rank preference exponent must be > 0, got {a}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn needs_anchor(&self) -> bool {
        matches!(self, Component::TriangleClosure)
    }

    /// Anchor-free weight of `node`. Triangle closure has no anchor-free
    /// weight and returns 1, which is how its source choice is made.
    pub fn node_weight(&self, graph: &DynamicGraph, node: NodeIdx) -> f64 {
        match *self {
            Component::Random | Component::TriangleClosure => 1.0,
            Component::DegreePower(a) => degree_weight(graph.degree(node), a),
            Component::RankPreference(a) => rank_weight(graph.arrival_index(node), a),
        }
    }
}

/// `k^α`, with degree-zero nodes weighted 1 when α = 0 and 0 otherwise.
pub fn degree_weight(k: usize, alpha: f64) -> f64 {
    if k == 0 {
        if alpha == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if alpha == 1.0 {
        k as f64
    } else {
        (k as f64).powf(alpha)
    }
}

pub fn rank_weight(rank: usize, alpha: f64) -> f64 {
    (rank as f64).powf(-alpha)
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Component::Random => f.write_str("RAND"),
            Component::DegreePower(1.0) => f.write_str("BA"),
            Component::DegreePower(a) => write!(f, "DP({a})"),
            Component::TriangleClosure => f.write_str("TRI"),
            Component::RankPreference(a) => write!(f, "RP({a})"),
        }
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        spec::parse_component(s)
    }
}

impl Serialize for Component {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Anchor context for one choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    /// No anchor: a source choice, or the first target of a star whose
    /// center is new. Triangle closure picks uniformly here.
    None,
    Node(NodeIdx),
}

impl Anchor {
    fn node(self) -> Option<NodeIdx> {
        match self {
            Anchor::None => None,
            Anchor::Node(a) => Some(a),
        }
    }
}

/// Unnormalized weight each eligible node receives from `component`.
pub fn component_weights(
    component: &Component,
    graph: &DynamicGraph,
    anchor: Option<NodeIdx>,
    eligible: &[NodeIdx],
) -> Result<Vec<f64>> {
    component.validate()?;
    for &i in eligible {
        if !graph.contains(i) {
            return Err(Error::UnknownNode(i));
        }
    }
    match component {
        Component::TriangleClosure => {
            let a = anchor.ok_or(Error::MissingAnchor)?;
            if !graph.contains(a) {
                return Err(Error::UnknownNode(a));
            }
            Ok(eligible
                .iter()
                .map(|&i| graph.common_neighbors(a, i) as f64)
                .collect())
        }
        c => Ok(eligible.iter().map(|&i| c.node_weight(graph, i)).collect()),
    }
}

/// A constant mixture Σ βₗ Mₗ.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureInterval {
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl MixtureInterval {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        Self::with_tolerance(weights, components, WEIGHT_SUM_TOLERANCE)
    }

    pub(crate) fn with_tolerance(
        weights: Vec<f64>,
        components: Vec<Component>,
        tolerance: f64,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidModel("mixture has no components".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::InvalidModel(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        for c in &components {
            c.validate()?;
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidModel(format!("weight {w} outside [0,1]")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tolerance {
            return Err(Error::InvalidModel(format!("weights sum to {sum}, not 1")));
        }
        Ok(MixtureInterval {
            weights,
            components,
        })
    }

    pub fn pure(component: Component) -> Self {
        MixtureInterval {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn terms(&self) -> impl Iterator<Item = (f64, Component)> + '_ {
        self.weights.iter().copied().zip(self.components.iter().copied())
    }

    pub fn has_anchor_dependent(&self) -> bool {
        self.components.iter().any(Component::needs_anchor)
    }
}

impl fmt::Display for MixtureInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (w, c)) in self.terms().enumerate() {
            if k > 0 {
                f.write_str("+")?;
            }
            write!(f, "{w}*{c}")?;
        }
        Ok(())
    }
}

impl FromStr for MixtureInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        spec::parse_model_spec(s)
    }
}

impl Serialize for MixtureInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MixtureInterval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Coordinate in which schedule boundaries are expressed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// 1-based position of the increment in the stream.
    #[default]
    IncrementIndex,
    Timestamp,
}

/// Piecewise-constant mixture. Interval `j` holds every time `t` with
/// `boundaries[j-1] < t <= boundaries[j]`; the first and last are unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSchedule {
    #[serde(default)]
    pub mode: BoundaryMode,
    #[serde(default)]
    pub boundaries: Vec<i64>,
    pub intervals: Vec<MixtureInterval>,
}

impl ModelSchedule {
    pub fn constant(model: MixtureInterval) -> Self {
        ModelSchedule {
            mode: BoundaryMode::IncrementIndex,
            boundaries: Vec::new(),
            intervals: vec![model],
        }
    }

    pub fn new(
        mode: BoundaryMode,
        boundaries: Vec<i64>,
        intervals: Vec<MixtureInterval>,
    ) -> Result<Self> {
        let s = ModelSchedule {
            mode,
            boundaries,
            intervals,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals.is_empty() {
            return Err(Error::InvalidModel("schedule has no intervals".into()));
        }
        if self.boundaries.len() + 1 != self.intervals.len() {
            return Err(Error::InvalidModel(format!(
                "{} boundaries for {} intervals",
                self.boundaries.len(),
                self.intervals.len()
            )));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("boundaries must be strictly increasing".into()));
        }
        Ok(())
    }

    /// F(t): the interval governing time `t`.
    pub fn interval_index(&self, t: i64) -> usize {
        self.boundaries.partition_point(|&b| b < t)
    }

    pub fn interval_at(&self, t: i64) -> &MixtureInterval {
        &self.intervals[self.interval_index(t)]
    }

    /// The time coordinate of increment `position` (0-based) with `timestamp`.
    pub fn time_of(&self, position: usize, timestamp: i64) -> i64 {
        match self.mode {
            BoundaryMode::IncrementIndex => position as i64 + 1,
            BoundaryMode::Timestamp => timestamp,
        }
    }

    /// Distinct components across all intervals, in first-seen order.
    pub fn distinct_components(&self) -> Vec<Component> {
        let mut out: Vec<Component> = Vec::new();
        for c in self.intervals.iter().flat_map(|m| m.components.iter()) {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    }
}

/// Normalized probabilities over an eligible set, plus how many components
/// fell back to uniform because they gave zero total weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Probabilities {
    pub values: Vec<f64>,
    pub fallbacks: usize,
}

/// Normalizes one component over `eligible` under the choice rules: triangle
/// closure without an anchor is uniform, and any component with zero total
/// weight falls back to uniform.
pub fn component_probabilities(
    component: &Component,
    graph: &DynamicGraph,
    anchor: Anchor,
    eligible: &[NodeIdx],
) -> Result<(Vec<f64>, bool)> {
    if eligible.is_empty() {
        return Err(Error::DegenerateModel);
    }
    let uniform = || vec![1.0 / eligible.len() as f64; eligible.len()];
    if component.needs_anchor() && anchor == Anchor::None {
        return Ok((uniform(), false));
    }
    let w = component_weights(component, graph, anchor.node(), eligible)?;
    let total: f64 = w.iter().sum();
    if !total.is_finite() {
        return Err(Error::DegenerateModel);
    }
    if total <= 0.0 {
        return Ok((uniform(), true));
    }
    Ok((w.into_iter().map(|x| x / total).collect(), false))
}

/// Mixture probability p_i(t) = Σₗ β_{l,F(t)} p_i^{Mₗ}(t) over `eligible`.
pub fn node_probabilities(
    schedule: &ModelSchedule,
    t: i64,
    graph: &DynamicGraph,
    anchor: Anchor,
    eligible: &[NodeIdx],
) -> Result<Probabilities> {
    mixture_probabilities(schedule.interval_at(t), graph, anchor, eligible)
}

pub fn mixture_probabilities(
    model: &MixtureInterval,
    graph: &DynamicGraph,
    anchor: Anchor,
    eligible: &[NodeIdx],
) -> Result<Probabilities> {
    let mut values = vec![0.0; eligible.len()];
    let mut fallbacks = 0;
    for (beta, c) in model.terms() {
        let (p, fell_back) = component_probabilities(&c, graph, anchor, eligible)?;
        fallbacks += usize::from(fell_back);
        for (v, x) in values.iter_mut().zip(p) {
            *v += beta * x;
        }
    }
    Ok(Probabilities { values, fallbacks })
}

/// Cosine similarity σ_G(M1, M2) of two models' node distributions over all
/// nodes of `graph`.
pub fn model_similarity(
    m1: &MixtureInterval,
    m2: &MixtureInterval,
    graph: &DynamicGraph,
) -> Result<f64> {
    for m in [m1, m2] {
        if let Some(c) = m.components().iter().find(|c| c.needs_anchor()) {
            return Err(Error::UnsupportedSimilarity(c.to_string()));
        }
    }
    let all: Vec<NodeIdx> = (0..graph.node_count() as NodeIdx).collect();
    let p = mixture_probabilities(m1, graph, Anchor::None, &all)?.values;
    let q = mixture_probabilities(m2, graph, Anchor::None, &all)?.values;
    if p == q {
        return Ok(1.0);
    }
    let dot: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|a| a * a).sum();
    let qq: f64 = q.iter().map(|b| b * b).sum();
    Ok((dot / (pp * qq).sqrt()).clamp(0.0, 1.0))
}
