//! Likelihood of an observed increment stream under an object model.
//!
//! A star increment is scored as a sequence of choices drawn without
//! replacement: the center first when it already exists, then the existing
//! targets. Targets arrive unordered, so their probability is summed over
//! every ordering (or estimated from sampled orderings for large stars).
//!
//! One pass over the stream records, for every ordering and step, the
//! normalized probability each component gives the chosen node. Because a
//! mixture is linear in its weights, any weight vector can then be scored
//! from that cache without replaying the graph.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AppliedDelta, DynamicGraph, Increment, NodeIdx};
use crate::model::{degree_weight, rank_weight, Component, ModelSchedule};

/// Stars with more orderable targets than this are sampled.
pub const EXHAUSTIVE_LIMIT: usize = 5;
pub const DEFAULT_ORDERING_SAMPLES: usize = 120;

/// Below this fraction of the component total, a remaining weight is
/// treated as zero.
const ZERO_TOTAL_RELATIVE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingPolicy {
    /// Enumerate every ordering when the star has at most this many
    /// existing targets.
    pub exhaustive_up_to: usize,
    /// Orderings drawn per sampled star.
    pub samples: usize,
    /// Draw orderings independently (true) or as distinct permutations.
    pub with_replacement: bool,
    /// Sampling for the increment at position `p` uses ChaCha8 seeded with
    /// `seed` on stream `p`.
    pub seed: u64,
}

impl Default for OrderingPolicy {
    fn default() -> Self {
        OrderingPolicy {
            exhaustive_up_to: EXHAUSTIVE_LIMIT,
            samples: DEFAULT_ORDERING_SAMPLES,
            with_replacement: true,
            seed: 0,
        }
    }
}

impl OrderingPolicy {
    pub fn with_seed(seed: u64) -> Self {
        OrderingPolicy {
            seed,
            ..Default::default()
        }
    }

    fn orderings(&self, r: usize, position: usize) -> (Vec<Vec<usize>>, f64) {
        if r <= self.exhaustive_up_to {
            return (all_permutations(r), 0.0);
        }
        let total = factorial_f64(r);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(position as u64);
        let s = self.samples.max(1);
        if !self.with_replacement && (s as f64) >= total {
            return (all_permutations(r), 0.0);
        }
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(s);
        let mut base: Vec<usize> = (0..r).collect();
        while out.len() < s {
            base.shuffle(&mut rng);
            if self.with_replacement || !out.contains(&base) {
                out.push(base.clone());
            }
        }
        (out, total.ln() - (s as f64).ln())
    }
}

pub(crate) fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn all_permutations(r: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(r), &mut vec![false; r], &mut out);
    out
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct RunningSum {
    sum: f64,
    carry: f64,
}

impl RunningSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Total anchor-free weight over all existing nodes for one component,
/// maintained as the graph grows.
#[derive(Clone, Debug)]
pub(crate) struct Tracker {
    component: Component,
    total: RunningSum,
    /// `k^α` by degree for degree power; `R^{-α}` by node for rank preference.
    table: Vec<f64>,
}

impl Tracker {
    pub(crate) fn new(component: Component, graph: &DynamicGraph) -> Self {
        let mut t = Tracker {
            component,
            total: RunningSum::default(),
            table: Vec::new(),
        };
        match component {
            Component::DegreePower(_) => {
                let max = (0..graph.node_count() as NodeIdx)
                    .map(|i| graph.degree(i))
                    .max()
                    .unwrap_or(0);
                t.extend_degrees(max);
            }
            Component::RankPreference(_) => t.extend_ranks(graph.node_count()),
            _ => {}
        }
        for i in 0..graph.node_count() as NodeIdx {
            t.total.add(t.weight(graph, i));
        }
        t
    }

    fn extend_degrees(&mut self, max: usize) {
        if let Component::DegreePower(a) = self.component {
            while self.table.len() <= max {
                let k = self.table.len();
                self.table.push(degree_weight(k, a));
            }
        }
    }

    fn extend_ranks(&mut self, n: usize) {
        if let Component::RankPreference(a) = self.component {
            while self.table.len() < n {
                let r = self.table.len() + 1;
                self.table.push(rank_weight(r, a));
            }
        }
    }

    #[inline]
    pub(crate) fn weight(&self, graph: &DynamicGraph, node: NodeIdx) -> f64 {
        match self.component {
            Component::Random | Component::TriangleClosure => 1.0,
            Component::DegreePower(_) => self.table[graph.degree(node)],
            Component::RankPreference(_) => self.table[node as usize],
        }
    }

    pub(crate) fn total(&self, graph: &DynamicGraph) -> f64 {
        match self.component {
            Component::Random | Component::TriangleClosure => graph.node_count() as f64,
            _ => self.total.value(),
        }
    }

    /// Call after `delta` has been applied to `graph`.
    pub(crate) fn after_apply(&mut self, graph: &DynamicGraph, delta: &AppliedDelta) {
        match self.component {
            Component::DegreePower(_) => {
                let max = delta
                    .degree_changes(graph)
                    .map(|(_, _, new)| new)
                    .max()
                    .unwrap_or(0);
                self.extend_degrees(max);
                for _ in 0..delta.new_nodes {
                    self.total.add(self.table[0]);
                }
                for (_, old, new) in delta.degree_changes(graph) {
                    self.total.add(self.table[new] - self.table[old]);
                }
            }
            Component::RankPreference(_) => {
                self.extend_ranks(graph.node_count());
                for k in 0..delta.new_nodes {
                    self.total.add(self.table[(delta.first_new + k) as usize]);
                }
            }
            _ => {}
        }
    }
}

/// Reusable per-pass buffers.
#[derive(Default)]
struct Scratch {
    counts: Vec<u32>,
    touched: Vec<NodeIdx>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl Scratch {
    fn reserve(&mut self, n: usize) {
        if self.counts.len() < n {
            self.counts.resize(n, 0);
            self.stamp.resize(n, 0);
        }
    }

    fn new_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    fn mark(&mut self, node: NodeIdx) {
        self.stamp[node as usize] = self.epoch;
    }

    fn marked(&self, node: NodeIdx) -> bool {
        self.stamp[node as usize] == self.epoch
    }

    /// Fills `counts` with |Γ(anchor) ∩ Γ(i)| for every i reachable in two hops.
    fn two_hop(&mut self, graph: &DynamicGraph, anchor: NodeIdx) {
        for &u in graph.neighbors(anchor) {
            for &i in graph.neighbors(u) {
                if self.counts[i as usize] == 0 {
                    self.touched.push(i);
                }
                self.counts[i as usize] += 1;
            }
        }
    }

    fn clear_counts(&mut self) {
        for &i in &self.touched {
            self.counts[i as usize] = 0;
        }
        self.touched.clear();
    }
}

#[derive(Clone, Copy, Debug)]
struct CacheEntry {
    offset: usize,
    has_center: bool,
    orderings: u32,
    steps: u32,
    /// ln(r!/S) for sampled stars, 0 when every ordering is summed.
    log_scale: f64,
    choices: u32,
    timestamp: i64,
}

/// Per-component step probabilities for every increment of a stream.
#[derive(Clone, Debug)]
pub struct StreamCache {
    components: Vec<Component>,
    random_index: usize,
    entries: Vec<CacheEntry>,
    values: Vec<f64>,
    /// Step evaluations per component where the component's eligible weight
    /// was zero and it fell back to uniform.
    pub fallbacks: Vec<usize>,
}

impl StreamCache {
    /// Scores `increments` applied in order on top of `seed`. Random is
    /// always included so the c₀ baseline can be read from the same cache.
    pub fn build(
        components: &[Component],
        seed: &DynamicGraph,
        increments: &[Increment],
        policy: &OrderingPolicy,
    ) -> Result<Self> {
        let mut comps: Vec<Component> = Vec::new();
        for c in components {
            c.validate()?;
            if !comps.contains(c) {
                comps.push(*c);
            }
        }
        let random_index = match comps.iter().position(|c| *c == Component::Random) {
            Some(i) => i,
            None => {
                comps.push(Component::Random);
                comps.len() - 1
            }
        };
        let mut graph = seed.clone();
        let mut trackers: Vec<Tracker> = comps.iter().map(|c| Tracker::new(*c, &graph)).collect();
        let mut scorer = IncrementScorer::default();
        let mut cache = StreamCache {
            components: comps,
            random_index,
            entries: Vec::with_capacity(increments.len()),
            values: Vec::new(),
            fallbacks: Vec::new(),
        };
        cache.fallbacks = vec![0; cache.components.len()];
        for (position, inc) in increments.iter().enumerate() {
            if position > 0 && position % 10_000 == 0 {
                log::info!("scored {position}/{} increments", increments.len());
            }
            let entry = scorer.score(
                &graph,
                &trackers,
                inc,
                position,
                policy,
                &mut cache.values,
                &mut cache.fallbacks,
            )?;
            cache.entries.push(entry);
            let delta = graph.apply_increment(inc)?;
            for t in &mut trackers {
                t.after_apply(&graph, &delta);
            }
        }
        Ok(cache)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn random_index(&self) -> usize {
        self.random_index
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        self.entries[i].timestamp
    }

    pub fn choices(&self, i: usize) -> usize {
        self.entries[i].choices as usize
    }

    pub fn choices_in(&self, range: Range<usize>) -> usize {
        self.entries[range].iter().map(|e| e.choices as usize).sum()
    }

    /// Weight vector selecting only the random component.
    pub fn random_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.components.len()];
        w[self.random_index] = 1.0;
        w
    }

    /// Maps a mixture onto this cache's component order.
    pub fn weights_for(&self, model: &crate::model::MixtureInterval) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.components.len()];
        for (beta, c) in model.terms() {
            let k = self
                .components
                .iter()
                .position(|x| *x == c)
                .ok_or_else(|| Error::InvalidModel(format!("component {c} not in cache")))?;
            w[k] += beta;
        }
        Ok(w)
    }

    /// Log-probability of increment `i` under mixture weights `w`;
    /// `-inf` marks an impossible observation.
    pub fn log_prob(&self, i: usize, w: &[f64]) -> f64 {
        let e = &self.entries[i];
        let l = self.components.len();
        let dot = |off: usize| -> f64 {
            let v = &self.values[off..off + l];
            v.iter().zip(w).map(|(a, b)| a * b).sum()
        };
        let mut lp = 0.0;
        let mut off = e.offset;
        if e.has_center {
            let p = dot(off);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += p.ln();
            off += l;
        }
        let steps = e.steps as usize;
        if steps == 0 {
            return lp;
        }
        let orderings = e.orderings as usize;
        if orderings == 1 {
            for s in 0..steps {
                let p = dot(off + s * l);
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                lp += p.ln();
            }
            return lp;
        }
        let stride = steps * l;
        if steps <= 8 {
            let mut sum = 0.0;
            for o in 0..orderings {
                let base = off + o * stride;
                let mut prod = 1.0;
                for s in 0..steps {
                    prod *= dot(base + s * l);
                }
                sum += prod;
            }
            if sum <= 0.0 {
                return f64::NEG_INFINITY;
            }
            return lp + sum.ln() + e.log_scale;
        }
        let mut logs = Vec::with_capacity(orderings);
        for o in 0..orderings {
            let base = off + o * stride;
            let mut acc = 0.0;
            for s in 0..steps {
                let p = dot(base + s * l);
                if p <= 0.0 {
                    acc = f64::NEG_INFINITY;
                    break;
                }
                acc += p.ln();
            }
            logs.push(acc);
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = logs.iter().map(|x| (x - max).exp()).sum();
        lp + max + sum.ln() + e.log_scale
    }

    /// Σ log-probabilities over `range` under fixed weights.
    pub fn log_likelihood(&self, range: Range<usize>, w: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in range {
            let lp = self.log_prob(i, w);
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += lp;
        }
        total
    }

    /// Step probabilities of increment `i`: the center step (if any), then
    /// `orderings × steps` rows, each holding one value per component.
    pub fn step_values(&self, i: usize) -> (Option<&[f64]>, &[f64], usize, usize) {
        let e = &self.entries[i];
        let l = self.components.len();
        let mut off = e.offset;
        let center = if e.has_center {
            off += l;
            Some(&self.values[e.offset..e.offset + l])
        } else {
            None
        };
        let len = e.orderings as usize * e.steps as usize * l;
        (
            center,
            &self.values[off..off + len],
            e.orderings as usize,
            e.steps as usize,
        )
    }
}

#[derive(Default)]
struct IncrementScorer {
    scratch: Scratch,
}

impl IncrementScorer {
    #[allow(clippy::too_many_arguments)]
    fn score(
        &mut self,
        graph: &DynamicGraph,
        trackers: &[Tracker],
        inc: &Increment,
        position: usize,
        policy: &OrderingPolicy,
        values: &mut Vec<f64>,
        fallbacks: &mut [usize],
    ) -> Result<CacheEntry> {
        let n = graph.node_count();
        let l = trackers.len();
        let center = inc.center.existing();
        if let Some(c) = center {
            if !graph.contains(c) {
                return Err(Error::UnknownNode(c));
            }
        }
        let targets: Vec<NodeIdx> = inc.existing_targets().collect();
        if let Some(&bad) = targets.iter().find(|&&t| !graph.contains(t)) {
            return Err(Error::UnknownNode(bad));
        }
        let r = targets.len();
        let offset = values.len();
        let mut entry = CacheEntry {
            offset,
            has_center: center.is_some(),
            orderings: 1,
            steps: r as u32,
            log_scale: 0.0,
            choices: (r + usize::from(center.is_some())) as u32,
            timestamp: inc.timestamp,
        };

        if let Some(c) = center {
            for (k, t) in trackers.iter().enumerate() {
                let p = match t.component {
                    Component::Random | Component::TriangleClosure => 1.0 / n as f64,
                    _ => {
                        let total = t.total(graph);
                        let (p, fell_back) = step_probability(t.weight(graph, c), total, total, n);
                        fallbacks[k] += usize::from(fell_back);
                        p
                    }
                };
                values.push(p);
            }
        }
        if r == 0 {
            return Ok(entry);
        }

        // Base exclusion: the existing center and its neighbors.
        let sc = &mut self.scratch;
        sc.reserve(n);
        sc.new_epoch();
        let mut excluded_count = 0usize;
        let mut excluded = vec![0.0; l];
        if let Some(c) = center {
            sc.mark(c);
            excluded_count = 1 + graph.degree(c);
            for (k, t) in trackers.iter().enumerate() {
                if is_summed(t.component) {
                    let mut s = RunningSum::default();
                    s.add(t.weight(graph, c));
                    for &u in graph.neighbors(c) {
                        s.add(t.weight(graph, u));
                    }
                    excluded[k] = s.value();
                }
            }
            for &u in graph.neighbors(c) {
                sc.mark(u);
            }
        }
        let target_w: Vec<Vec<f64>> = trackers
            .iter()
            .map(|t| targets.iter().map(|&x| t.weight(graph, x)).collect())
            .collect();

        // Triangle-closure tables: for each anchor, Σ common-neighbor counts
        // over the eligible set and the count towards each target.
        let has_tri = trackers.iter().any(|t| t.component == Component::TriangleClosure);
        let anchors: Vec<NodeIdx> = match center {
            Some(c) => vec![c],
            None if r >= 2 => targets.clone(),
            None => Vec::new(),
        };
        let mut tri_base = Vec::new();
        let mut tri_cn: Vec<Vec<f64>> = Vec::new();
        if has_tri {
            for &a in &anchors {
                sc.two_hop(graph, a);
                let mut base = 0.0;
                for &i in &sc.touched {
                    if i != a && !sc.marked(i) {
                        base += sc.counts[i as usize] as f64;
                    }
                }
                tri_base.push(base);
                tri_cn.push(targets.iter().map(|&x| sc.counts[x as usize] as f64).collect());
                sc.clear_counts();
            }
        }

        let (orderings, log_scale) = policy.orderings(r, position);
        entry.orderings = orderings.len() as u32;
        entry.log_scale = log_scale;
        values.reserve(orderings.len() * r * l);
        for perm in &orderings {
            for s in 0..r {
                let x = perm[s];
                let count = n - excluded_count - s;
                for (k, t) in trackers.iter().enumerate() {
                    let p = match t.component {
                        Component::Random => 1.0 / count as f64,
                        Component::TriangleClosure => {
                            let anchor_row = match center {
                                Some(_) => Some((0, 0)),
                                None if s == 0 => None,
                                None => Some((perm[0], 1)),
                            };
                            match anchor_row {
                                None => 1.0 / count as f64,
                                Some((row, skip)) => {
                                    let cn = &tri_cn[row];
                                    let chosen: f64 = perm[skip..s].iter().map(|&y| cn[y]).sum();
                                    let remaining = tri_base[row] - chosen;
                                    if remaining <= 0.0 {
                                        fallbacks[k] += 1;
                                        1.0 / count as f64
                                    } else {
                                        cn[x] / remaining
                                    }
                                }
                            }
                        }
                        _ => {
                            let total = t.total(graph);
                            let chosen: f64 = perm[..s].iter().map(|&y| target_w[k][y]).sum();
                            let remaining = total - excluded[k] - chosen;
                            let (p, fell_back) =
                                step_probability(target_w[k][x], remaining, total, count);
                            fallbacks[k] += usize::from(fell_back);
                            p
                        }
                    };
                    values.push(p);
                }
            }
        }
        Ok(entry)
    }
}

fn is_summed(c: Component) -> bool {
    matches!(c, Component::DegreePower(_) | Component::RankPreference(_))
}

/// `w / remaining`, falling back to uniform over `count` when the remaining
/// weight is zero. The flag reports a fallback.
fn step_probability(w: f64, remaining: f64, total: f64, count: usize) -> (f64, bool) {
    if w > 0.0 {
        if remaining <= w {
            return (1.0, false);
        }
        return (w / remaining, false);
    }
    if remaining <= total * ZERO_TOTAL_RELATIVE {
        return (1.0 / count as f64, true);
    }
    (0.0, false)
}

/// Probability of one increment, with the per-component cache it came from.
#[derive(Clone, Debug)]
pub struct IncrementProbability {
    /// `-inf` when the observation is impossible under the model.
    pub log_prob: f64,
    pub choices: usize,
    pub orderings: usize,
    pub steps: usize,
    pub components: Vec<Component>,
    /// Center step (one value per component), if the center existed.
    pub center: Option<Vec<f64>>,
    /// `orderings × steps × components`, row-major.
    pub cache: Vec<f64>,
    pub fallbacks: usize,
}

impl IncrementProbability {
    pub fn is_impossible(&self) -> bool {
        self.log_prob == f64::NEG_INFINITY
    }

    pub fn probability(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// Scores a single increment against `graph`. `position` is the increment's
/// 0-based place in its stream, used for schedule lookup in index mode and
/// to seed ordering sampling.
pub fn increment_probability(
    schedule: &ModelSchedule,
    graph: &DynamicGraph,
    inc: &Increment,
    position: usize,
    policy: &OrderingPolicy,
) -> Result<IncrementProbability> {
    schedule.validate()?;
    let model = schedule.interval_at(schedule.time_of(position, inc.timestamp));
    let comps = model.components().to_vec();
    let trackers: Vec<Tracker> = comps.iter().map(|c| Tracker::new(*c, graph)).collect();
    let mut values = Vec::new();
    let mut fallbacks = vec![0; comps.len()];
    let entry = IncrementScorer::default().score(
        graph,
        &trackers,
        inc,
        position,
        policy,
        &mut values,
        &mut fallbacks,
    )?;
    let cache = StreamCache {
        components: comps.clone(),
        random_index: usize::MAX,
        entries: vec![CacheEntry { offset: 0, ..entry }],
        values,
        fallbacks: fallbacks.clone(),
    };
    let log_prob = cache.log_prob(0, model.weights());
    let (center, rows, orderings, steps) = cache.step_values(0);
    Ok(IncrementProbability {
        log_prob,
        choices: inc.choice_count(),
        orderings,
        steps,
        components: comps,
        center: center.map(<[f64]>::to_vec),
        cache: rows.to_vec(),
        fallbacks: fallbacks.iter().sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementTrace {
    pub index: usize,
    pub timestamp: i64,
    pub choices: usize,
    pub log_prob_model: f64,
    pub log_prob_rand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSummary {
    pub log_likelihood: f64,
    pub baseline_log_likelihood: f64,
    pub choices: usize,
    /// 0 when the stream is impossible under the model.
    pub c0: f64,
    pub impossible: bool,
    pub fallbacks: usize,
    #[serde(skip)]
    pub trace: Vec<IncrementTrace>,
}

/// Per-choice likelihood ratio c₀ against the random baseline.
pub fn per_choice_ratio(log_l_model: f64, log_l_rand: f64, choices: usize) -> Result<f64> {
    if choices == 0 {
        return Err(Error::UndefinedRatio("no object-model choices".into()));
    }
    if !log_l_model.is_finite() || !log_l_rand.is_finite() {
        return Err(Error::UndefinedRatio("log-likelihood is not finite".into()));
    }
    Ok(((log_l_model - log_l_rand) / choices as f64).exp())
}

/// Summarizes a schedule against an already built cache.
pub fn summarize(cache: &StreamCache, schedule: &ModelSchedule) -> Result<LikelihoodSummary> {
    let weights: Vec<Vec<f64>> = schedule
        .intervals
        .iter()
        .map(|m| cache.weights_for(m))
        .collect::<Result<_>>()?;
    let base_w = cache.random_weights();
    let mut trace = Vec::with_capacity(cache.len());
    let (mut logl, mut base) = (0.0, 0.0);
    let mut choices = 0;
    for i in 0..cache.len() {
        let j = schedule.interval_index(schedule.time_of(i, cache.timestamp(i)));
        let lp = cache.log_prob(i, &weights[j]);
        let lr = cache.log_prob(i, &base_w);
        logl += lp;
        base += lr;
        choices += cache.choices(i);
        trace.push(IncrementTrace {
            index: i,
            timestamp: cache.timestamp(i),
            choices: cache.choices(i),
            log_prob_model: lp,
            log_prob_rand: lr,
        });
    }
    let active: Vec<bool> = cache
        .components
        .iter()
        .map(|c| schedule.intervals.iter().any(|m| m.terms().any(|(b, x)| x == *c && b > 0.0)))
        .collect();
    let fallbacks = cache
        .fallbacks
        .iter()
        .zip(&active)
        .filter(|(_, a)| **a)
        .map(|(f, _)| *f)
        .sum();
    let impossible = logl == f64::NEG_INFINITY;
    let c0 = if impossible {
        0.0
    } else if choices == 0 {
        1.0
    } else {
        per_choice_ratio(logl, base, choices)?
    };
    Ok(LikelihoodSummary {
        log_likelihood: logl,
        baseline_log_likelihood: base,
        choices,
        c0,
        impossible,
        fallbacks,
        trace,
    })
}

/// Log-likelihood of `increments` applied in order on `seed` under `schedule`.
pub fn stream_log_likelihood(
    schedule: &ModelSchedule,
    seed: &DynamicGraph,
    increments: &[Increment],
    policy: &OrderingPolicy,
) -> Result<LikelihoodSummary> {
    schedule.validate()?;
    let cache = StreamCache::build(&schedule.distinct_components(), seed, increments, policy)?;
    summarize(&cache, schedule)
}

/// CSV trace: increment_index, timestamp, m, log_prob_model, log_prob_rand.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[IncrementTrace]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "increment_index,timestamp,m,log_prob_model,log_prob_rand").map_err(io)?;
    for t in trace {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.index, t.timestamp, t.choices, t.log_prob_model, t.log_prob_rand
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef::{Existing, New};
    use crate::model::MixtureInterval;

    fn path(n: usize) -> DynamicGraph {
        let edges: Vec<_> = (1..n as NodeIdx).map(|i| (i - 1, i)).collect();
        DynamicGraph::from_edges(n, &edges).unwrap()
    }

    fn pure(c: Component) -> ModelSchedule {
        ModelSchedule::constant(MixtureInterval::pure(c))
    }

    #[test]
    fn worked_example_two_orderings() {
        let g = path(3);
        let inc = Increment::new(1, New, vec![Existing(1), Existing(2)]);
        let ba = increment_probability(&pure(Component::BA), &g, &inc, 0, &OrderingPolicy::default())
            .unwrap();
        assert!((ba.probability() - 5.0 / 12.0).abs() < 1e-12);
        assert_eq!(ba.orderings, 2);
        assert_eq!(ba.choices, 2);
        let rand =
            increment_probability(&pure(Component::Random), &g, &inc, 0, &OrderingPolicy::default())
                .unwrap();
        assert!((rand.probability() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_target_degree_power_term() {
        let g = DynamicGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let inc = Increment::new(1, New, vec![Existing(0)]);
        let a = 1.3;
        let p = increment_probability(
            &pure(Component::DegreePower(a)),
            &g,
            &inc,
            0,
            &OrderingPolicy::default(),
        )
        .unwrap();
        let denom: f64 = g.snapshot_degrees().iter().map(|&k| (k as f64).powf(a)).sum();
        assert!((p.probability() - 3f64.powf(a) / denom).abs() < 1e-14);
        assert_eq!(p.orderings, 1);
    }

    #[test]
    fn no_choices_means_zero_log_prob() {
        let g = path(2);
        let inc = Increment::new(1, New, vec![New]);
        let p = increment_probability(&pure(Component::BA), &g, &inc, 0, &OrderingPolicy::default())
            .unwrap();
        assert_eq!(p.log_prob, 0.0);
        assert_eq!(p.choices, 0);
    }

    #[test]
    fn impossible_observation_is_marked() {
        // Pure triangle closure from center 0 to node 3 with no common
        // neighbor, while node 2 shares neighbor 1 with 0.
        let g = DynamicGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let inc = Increment::new(1, Existing(0), vec![Existing(3)]);
        let p = increment_probability(
            &pure(Component::TriangleClosure),
            &g,
            &inc,
            0,
            &OrderingPolicy::default(),
        )
        .unwrap();
        assert!(p.is_impossible());
    }

    #[test]
    fn triangle_fallback_is_counted() {
        // Path 0-1-2-3: center 0 next to 1; eligible {2,3}: 2 shares 1 with 0.
        // Use center 0 on a star 0-1, 2-3 so no eligible node shares a neighbor.
        let g = DynamicGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let inc = Increment::new(1, Existing(0), vec![Existing(2)]);
        let s = stream_log_likelihood(
            &pure(Component::TriangleClosure),
            &g,
            &[inc],
            &OrderingPolicy::default(),
        )
        .unwrap();
        assert!(s.log_likelihood.is_finite());
        assert_eq!(s.fallbacks, 1);
        // center 1/4, target uniform over {2,3}
        assert!((s.log_likelihood - (0.25f64 * 0.5).ln()).abs() < 1e-14);
    }

    #[test]
    fn worked_example_c0() {
        let g = path(3);
        let inc = Increment::new(1, New, vec![Existing(1), Existing(2)]);
        let s = stream_log_likelihood(&pure(Component::BA), &g, &[inc], &OrderingPolicy::default())
            .unwrap();
        assert!((s.log_likelihood - (5.0f64 / 12.0).ln()).abs() < 1e-12);
        assert_eq!(s.choices, 2);
        assert!((s.c0 - 1.118_033_988_749_895).abs() < 1e-12);
    }

    #[test]
    fn per_choice_ratio_cases() {
        assert_eq!(per_choice_ratio(-3.0, -3.0, 4).unwrap(), 1.0);
        let r = per_choice_ratio((5.0f64 / 12.0).ln(), (1.0f64 / 3.0).ln(), 2).unwrap();
        assert!((r - 1.118_033_988_749_895).abs() < 1e-12);
        let r = per_choice_ratio(-12.0, -10.0, 2).unwrap();
        assert!((r - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(per_choice_ratio(0.0, 0.0, 0), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn inconsistent_increment_propagates() {
        let g = path(3);
        let bad = Increment::new(1, Existing(0), vec![Existing(1)]);
        assert!(matches!(
            stream_log_likelihood(&pure(Component::Random), &g, &[bad], &OrderingPolicy::default()),
            Err(Error::RejectedIncrement(_))
        ));
    }

    #[test]
    fn permutation_enumeration() {
        assert_eq!(all_permutations(0), vec![Vec::<usize>::new()]);
        assert_eq!(all_permutations(3).len(), 6);
        assert_eq!(all_permutations(5).len(), 120);
    }

    #[test]
    fn running_sum_tracks_degree_updates() {
        let mut g = DynamicGraph::clique(5);
        let mut t = Tracker::new(Component::DegreePower(1.7), &g);
        for step in 0..200u32 {
            let n = g.node_count() as NodeIdx;
            let inc = Increment::new(
                step as i64,
                New,
                vec![Existing(step % n), Existing((step * 7 + 1) % n)]
                    .into_iter()
                    .fold(Vec::new(), |mut v, x| {
                        if !v.contains(&x) {
                            v.push(x)
                        }
                        v
                    }),
            );
            let d = g.apply_increment(&inc).unwrap();
            t.after_apply(&g, &d);
        }
        let direct: f64 = g.snapshot_degrees().iter().map(|&k| degree_weight(k, 1.7)).sum();
        assert!((t.total(&g) - direct).abs() <= 1e-12 * direct);
    }
}
