//! Maximum-likelihood fitting by grid search.
//!
//! Mixture weights are searched on a simplex lattice. Each stream is scored
//! once into a [`StreamCache`], after which every lattice point costs one
//! pass over cached step probabilities; points are evaluated in parallel.
//! Ties go to the smallest parameter, the earliest changepoint, or the
//! lexicographically smallest weight vector.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Increment};
use crate::likelihood::{summarize, LikelihoodSummary, OrderingPolicy, StreamCache};
use crate::model::{BoundaryMode, Component, MixtureInterval, ModelSchedule};

pub const DEFAULT_ALPHA_GRID: (f64, f64, f64) = (-0.1, 2.1, 0.01);
pub const DEFAULT_WEIGHT_STEP: f64 = 0.01;
/// Default changepoint candidates: about this many evenly strided points.
pub const DEFAULT_CHANGEPOINT_POINTS: usize = 1000;

/// `start, start + step, …` up to `stop` inclusive, rounded to 1e-9 so that
/// grid values print cleanly.
pub fn arithmetic_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start
    {
        return Err(Error::InvalidGrid(format!("{start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Every weight vector of length `l` whose entries are multiples of `step`
/// and sum to 1, in lexicographic order.
pub fn simplex_lattice(l: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if l == 0 {
        return Err(Error::InvalidGrid("lattice needs at least one component".into()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidGrid(format!("step {step} outside (0,1]")));
    }
    let n = (1.0 / step).round() as u32;
    if (n as f64 * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!("step {step} does not divide 1")));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(l);
    fn rec(l: usize, left: u32, n: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == l {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / n as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(l, left - k, n, cur, out);
            cur.pop();
        }
    }
    rec(l, n, n, &mut current, &mut out);
    Ok(out)
}

/// How intervals are delimited by `fit_intervals`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// Equal numbers of increments.
    #[default]
    Count,
    /// Equal timestamp spans.
    Time,
}

impl IntervalMode {
    pub fn boundary_mode(self) -> BoundaryMode {
        match self {
            IntervalMode::Count => BoundaryMode::IncrementIndex,
            IntervalMode::Time => BoundaryMode::Timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedInterval {
    /// First and last time covered, inclusive, in the result's boundary mode.
    pub start: i64,
    pub end: i64,
    pub weights: Vec<f64>,
    #[serde(rename = "logL")]
    pub log_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub points_evaluated: usize,
    pub impossible_points: usize,
    pub choices: usize,
    #[serde(rename = "baseline_logL")]
    pub baseline_log_likelihood: f64,
    pub fallbacks: usize,
    pub ordering: OrderingPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changepoint: Option<i64>,
}

/// A fitted schedule. `intervals[j].weights[l]` is the weight of
/// `components[l]` on interval `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub components: Vec<Component>,
    #[serde(default)]
    pub mode: BoundaryMode,
    pub intervals: Vec<FittedInterval>,
    #[serde(rename = "logL")]
    pub log_likelihood: f64,
    pub c0: f64,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    /// The fitted piecewise mixture. Every interval lists all components, so
    /// rescoring it rebuilds the same cache layout.
    pub fn schedule(&self) -> Result<ModelSchedule> {
        let intervals = self
            .intervals
            .iter()
            .map(|iv| MixtureInterval::new(iv.weights.clone(), self.components.clone()))
            .collect::<Result<Vec<_>>>()?;
        let boundaries = self.intervals[..self.intervals.len().saturating_sub(1)]
            .iter()
            .map(|iv| iv.end)
            .collect();
        ModelSchedule::new(self.mode, boundaries, intervals)
    }

    /// The β table, one row per interval.
    pub fn weight_table(&self) -> Vec<Vec<f64>> {
        self.intervals.iter().map(|iv| iv.weights.clone()).collect()
    }

    /// Weight of `component` on interval `j`, 0 when absent.
    pub fn weight_of(&self, j: usize, component: Component) -> f64 {
        self.components
            .iter()
            .zip(&self.intervals[j].weights)
            .filter(|(c, _)| **c == component)
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn dedup(components: &[Component]) -> Vec<Component> {
    let mut out: Vec<Component> = Vec::new();
    for c in components {
        if !out.contains(c) {
            out.push(*c);
        }
    }
    out
}

/// Positions of `components` inside the cache's component list.
fn cache_map(cache: &StreamCache, components: &[Component]) -> Result<Vec<usize>> {
    components
        .iter()
        .map(|c| {
            cache
                .components()
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::InvalidModel(format!("component {c} not in cache")))
        })
        .collect()
}

fn expand(map: &[usize], width: usize, point: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; width];
    for (&k, &b) in map.iter().zip(point) {
        w[k] += b;
    }
    w
}

struct RangeFit {
    weights: Vec<f64>,
    log_likelihood: f64,
    evaluated: usize,
    impossible: usize,
}

fn fit_range(
    cache: &StreamCache,
    map: &[usize],
    lattice: &[Vec<f64>],
    range: Range<usize>,
) -> Result<RangeFit> {
    let width = cache.components().len();
    let values: Vec<f64> = lattice
        .par_iter()
        .map(|p| cache.log_likelihood(range.clone(), &expand(map, width, p)))
        .collect();
    let impossible = values.iter().filter(|v| **v == f64::NEG_INFINITY).count();
    let mut best: Option<usize> = None;
    for (k, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(k);
        }
    }
    let best = best.ok_or(Error::NoFeasibleFit)?;
    Ok(RangeFit {
        weights: lattice[best].clone(),
        log_likelihood: values[best],
        evaluated: values.len(),
        impossible,
    })
}

/// Contiguous increment ranges of the J intervals and their time bounds.
struct Partition {
    mode: BoundaryMode,
    ranges: Vec<Range<usize>>,
    bounds: Vec<(i64, i64)>,
}

fn partition(cache: &StreamCache, j: usize, mode: IntervalMode) -> Result<Partition> {
    let n = cache.len();
    if j == 0 {
        return Err(Error::InvalidGrid("interval count must be >= 1".into()));
    }
    let underflow = |k: usize| Error::IntervalUnderflow {
        interval: k + 1,
        count: j,
    };
    if n == 0 {
        return Err(underflow(0));
    }
    match mode {
        IntervalMode::Count => {
            let ranges: Vec<Range<usize>> = (0..j).map(|k| k * n / j..(k + 1) * n / j).collect();
            if let Some(k) = ranges.iter().position(|r| r.is_empty()) {
                return Err(underflow(k));
            }
            let bounds = ranges
                .iter()
                .map(|r| (r.start as i64 + 1, r.end as i64))
                .collect();
            Ok(Partition {
                mode: BoundaryMode::IncrementIndex,
                ranges,
                bounds,
            })
        }
        IntervalMode::Time => {
            let ts: Vec<i64> = (0..n).map(|i| cache.timestamp(i)).collect();
            if ts.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidModel(
                    "time intervals need timestamps in nondecreasing order".into(),
                ));
            }
            let (t0, t1) = (ts[0], ts[n - 1]);
            let cut = |k: usize| -> i64 {
                (t0 as i128 + (t1 as i128 - t0 as i128) * k as i128 / j as i128) as i64
            };
            let mut ranges = Vec::with_capacity(j);
            let mut bounds = Vec::with_capacity(j);
            let mut start = 0;
            for k in 0..j {
                let end = if k + 1 == j {
                    n
                } else {
                    ts.partition_point(|&t| t <= cut(k + 1))
                };
                if end <= start {
                    return Err(underflow(k));
                }
                ranges.push(start..end);
                let lo = if k == 0 { t0 } else { cut(k) + 1 };
                let hi = if k + 1 == j { t1 } else { cut(k + 1) };
                bounds.push((lo, hi));
                start = end;
            }
            Ok(Partition {
                mode: BoundaryMode::Timestamp,
                ranges,
                bounds,
            })
        }
    }
}

fn finish(
    cache: &StreamCache,
    components: Vec<Component>,
    mode: BoundaryMode,
    intervals: Vec<FittedInterval>,
    mut diagnostics: Diagnostics,
) -> Result<(FitResult, LikelihoodSummary)> {
    let mut result = FitResult {
        components,
        mode,
        intervals,
        log_likelihood: 0.0,
        c0: 0.0,
        diagnostics: diagnostics.clone(),
    };
    let summary = summarize(cache, &result.schedule()?)?;
    diagnostics.choices = summary.choices;
    diagnostics.baseline_log_likelihood = summary.baseline_log_likelihood;
    diagnostics.fallbacks = summary.fallbacks;
    result.log_likelihood = summary.log_likelihood;
    result.c0 = summary.c0;
    result.diagnostics = diagnostics;
    Ok((result, summary))
}

fn diagnostics(policy: &OrderingPolicy) -> Diagnostics {
    Diagnostics {
        points_evaluated: 0,
        impossible_points: 0,
        choices: 0,
        baseline_log_likelihood: 0.0,
        fallbacks: 0,
        ordering: *policy,
        step: None,
        parameter: None,
        changepoint: None,
    }
}

/// Per-interval mixture weights over J intervals, fitted independently on a
/// prebuilt cache. The ordering policy is only recorded.
pub fn fit_intervals_cached(
    cache: &StreamCache,
    components: &[Component],
    j: usize,
    step: f64,
    mode: IntervalMode,
    policy: &OrderingPolicy,
) -> Result<FitResult> {
    let components = dedup(components);
    let map = cache_map(cache, &components)?;
    let lattice = simplex_lattice(components.len(), step)?;
    let part = partition(cache, j, mode)?;
    let mut diag = diagnostics(policy);
    diag.step = Some(step);
    let mut intervals = Vec::with_capacity(j);
    for (range, &(start, end)) in part.ranges.iter().zip(&part.bounds) {
        let fit = fit_range(cache, &map, &lattice, range.clone())?;
        diag.points_evaluated += fit.evaluated;
        diag.impossible_points += fit.impossible;
        intervals.push(FittedInterval {
            start,
            end,
            weights: fit.weights,
            log_likelihood: fit.log_likelihood,
        });
    }
    Ok(finish(cache, components, part.mode, intervals, diag)?.0)
}

pub fn fit_intervals(
    components: &[Component],
    seed: &DynamicGraph,
    increments: &[Increment],
    j: usize,
    step: f64,
    mode: IntervalMode,
    policy: &OrderingPolicy,
) -> Result<FitResult> {
    let components = dedup(components);
    // validate the lattice before paying for the cache
    simplex_lattice(components.len(), step)?;
    let cache = StreamCache::build(&components, seed, increments, policy)?;
    fit_intervals_cached(&cache, &components, j, step, mode, policy)
}

/// Single-interval weight fit over `components` (at least two).
pub fn fit_mixture_weights(
    components: &[Component],
    seed: &DynamicGraph,
    increments: &[Increment],
    step: f64,
    policy: &OrderingPolicy,
) -> Result<FitResult> {
    if dedup(components).len() < 2 {
        return Err(Error::InvalidGrid("a weight fit needs at least two components".into()));
    }
    fit_intervals(components, seed, increments, 1, step, IntervalMode::Count, policy)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub j: usize,
    #[serde(rename = "logL")]
    pub log_likelihood: f64,
    pub c0: f64,
}

/// One interval fit per J in `js`, sharing one cache.
pub fn scan_interval_counts_cached(
    cache: &StreamCache,
    components: &[Component],
    js: impl IntoIterator<Item = usize>,
    step: f64,
    mode: IntervalMode,
    policy: &OrderingPolicy,
) -> Result<Vec<ScanRow>> {
    js.into_iter()
        .map(|j| {
            let fit = fit_intervals_cached(cache, components, j, step, mode, policy)?;
            log::info!("J = {j}: logL = {}, c0 = {}", fit.log_likelihood, fit.c0);
            Ok(ScanRow {
                j,
                log_likelihood: fit.log_likelihood,
                c0: fit.c0,
            })
        })
        .collect()
}

pub fn scan_interval_counts(
    components: &[Component],
    seed: &DynamicGraph,
    increments: &[Increment],
    js: Range<usize>,
    step: f64,
    mode: IntervalMode,
    policy: &OrderingPolicy,
) -> Result<Vec<ScanRow>> {
    if js.is_empty() || js.start == 0 {
        return Err(Error::InvalidGrid(format!("J range {}..{}", js.start, js.end)));
    }
    let components = dedup(components);
    let cache = StreamCache::build(&components, seed, increments, policy)?;
    scan_interval_counts_cached(&cache, &components, js, step, mode, policy)
}

pub fn write_scan_csv(path: impl AsRef<Path>, rows: &[ScanRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "J,logL,c0").map_err(io)?;
    for r in rows {
        writeln!(w, "{},{},{}", r.j, r.log_likelihood, r.c0).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFit {
    pub parameter: f64,
    pub result: FitResult,
    /// `(parameter, logL)` for every grid point, `-inf` when impossible.
    pub profile: Vec<(f64, f64)>,
}

fn result_from_schedule(
    cache: &StreamCache,
    schedule: &ModelSchedule,
    diag: Diagnostics,
) -> Result<(FitResult, LikelihoodSummary)> {
    let components = schedule.distinct_components();
    let n = cache.len();
    let first = if n == 0 { 0 } else { schedule.time_of(0, cache.timestamp(0)) };
    let last = if n == 0 { 0 } else { schedule.time_of(n - 1, cache.timestamp(n - 1)) };
    let mut intervals = Vec::with_capacity(schedule.intervals.len());
    for (j, m) in schedule.intervals.iter().enumerate() {
        let start = if j == 0 { first } else { schedule.boundaries[j - 1] + 1 };
        let end = schedule.boundaries.get(j).copied().unwrap_or(last);
        let weights = components
            .iter()
            .map(|c| m.terms().filter(|(_, x)| x == c).map(|(b, _)| b).sum())
            .collect();
        intervals.push(FittedInterval {
            start,
            end,
            weights,
            log_likelihood: 0.0,
        });
    }
    let (mut result, summary) = finish(cache, components, schedule.mode, intervals, diag)?;
    let width = cache.components().len();
    let map = cache_map(cache, &result.components)?;
    for (j, iv) in result.intervals.iter_mut().enumerate() {
        let w = expand(&map, width, &iv.weights);
        iv.log_likelihood = (0..n)
            .filter(|&i| schedule.interval_index(schedule.time_of(i, cache.timestamp(i))) == j)
            .map(|i| cache.log_prob(i, &w))
            .sum();
    }
    Ok((result, summary))
}

/// Grid search over a one-parameter schedule family. Each grid point is one
/// stream pass; points run in parallel. Ties go to the smallest parameter.
pub fn fit_scalar<F>(
    family: F,
    seed: &DynamicGraph,
    increments: &[Increment],
    grid: &[f64],
    policy: &OrderingPolicy,
) -> Result<ScalarFit>
where
    F: Fn(f64) -> Result<ModelSchedule> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty parameter grid".into()));
    }
    if increments.is_empty() {
        return Err(Error::InvalidGrid("empty stream".into()));
    }
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(f64::total_cmp);
    let scored: Vec<(f64, f64)> = order
        .par_iter()
        .map(|&a| {
            let schedule = family(a)?;
            schedule.validate()?;
            let cache =
                StreamCache::build(&schedule.distinct_components(), seed, increments, policy)?;
            Ok((a, summarize(&cache, &schedule)?.log_likelihood))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<usize> = None;
    for (k, (_, v)) in scored.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > scored[b].1) {
            best = Some(k);
        }
    }
    let best = best.ok_or(Error::NoFeasibleFit)?;
    let parameter = scored[best].0;
    let schedule = family(parameter)?;
    let cache = StreamCache::build(&schedule.distinct_components(), seed, increments, policy)?;
    let mut diag = diagnostics(policy);
    diag.points_evaluated = scored.len();
    diag.impossible_points = scored.iter().filter(|s| s.1 == f64::NEG_INFINITY).count();
    diag.parameter = Some(parameter);
    let (result, _) = result_from_schedule(&cache, &schedule, diag)?;
    Ok(ScalarFit {
        parameter,
        result,
        profile: scored,
    })
}

/// α̂ for a pure degree-power model.
pub fn fit_degree_power(
    seed: &DynamicGraph,
    increments: &[Increment],
    grid: &[f64],
    policy: &OrderingPolicy,
) -> Result<ScalarFit> {
    fit_scalar(
        |a| {
            Ok(ModelSchedule::constant(MixtureInterval::pure(
                Component::DegreePower(a),
            )))
        },
        seed,
        increments,
        grid,
        policy,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangepointFit {
    pub changepoint: i64,
    pub result: FitResult,
    /// `(T, logL)` per candidate, in ascending T.
    pub profile: Vec<(i64, f64)>,
}

/// Candidates every `max(1, span / DEFAULT_CHANGEPOINT_POINTS)` between the
/// first and last time of the stream.
pub fn default_changepoint_grid(cache: &StreamCache, mode: BoundaryMode) -> Vec<i64> {
    let n = cache.len();
    if n == 0 {
        return Vec::new();
    }
    let (lo, hi) = match mode {
        BoundaryMode::IncrementIndex => (1, n as i64),
        BoundaryMode::Timestamp => (cache.timestamp(0), cache.timestamp(n - 1)),
    };
    let stride = ((hi - lo) / DEFAULT_CHANGEPOINT_POINTS as i64).max(1);
    (0..)
        .map(|k| lo + k * stride)
        .take_while(|&t| t <= hi)
        .collect()
}

/// T̂ maximizing the two-piece schedule (`pre` for t ≤ T, `post` after).
/// The profile is base + running sums of per-increment differences, so a
/// perfectly flat likelihood ties exactly and resolves to the earliest T.
pub fn fit_changepoint_cached(
    cache: &StreamCache,
    pre: &MixtureInterval,
    post: &MixtureInterval,
    candidates: &[i64],
    mode: BoundaryMode,
    policy: &OrderingPolicy,
) -> Result<ChangepointFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidGrid("empty changepoint grid".into()));
    }
    let mut grid = candidates.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let wa = cache.weights_for(pre)?;
    let wb = cache.weights_for(post)?;
    let probe = ModelSchedule::new(mode, Vec::new(), vec![pre.clone()])?;
    let n = cache.len();
    let times: Vec<i64> = (0..n).map(|i| probe.time_of(i, cache.timestamp(i))).collect();
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidModel(
            "changepoint search needs nondecreasing times".into(),
        ));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|i| (cache.log_prob(i, &wa), cache.log_prob(i, &wb)))
        .unzip();
    let neg = |x: f64| x == f64::NEG_INFINITY;
    let mut prefix = vec![0.0; n + 1];
    let mut a_bad = vec![0usize; n + 1];
    for i in 0..n {
        let d = if neg(a[i]) || neg(b[i]) { 0.0 } else { a[i] - b[i] };
        prefix[i + 1] = prefix[i] + d;
        a_bad[i + 1] = a_bad[i] + usize::from(neg(a[i]));
    }
    let mut b_bad = vec![0usize; n + 1];
    for i in (0..n).rev() {
        b_bad[i] = b_bad[i + 1] + usize::from(neg(b[i]));
    }
    let base: f64 = b.iter().filter(|x| !neg(**x)).sum();
    let profile: Vec<(i64, f64)> = grid
        .iter()
        .map(|&t| {
            let k = times.partition_point(|&x| x <= t);
            let l = if a_bad[k] > 0 || b_bad[k] > 0 {
                f64::NEG_INFINITY
            } else {
                base + prefix[k]
            };
            (t, l)
        })
        .collect();
    let mut best: Option<usize> = None;
    for (k, (_, v)) in profile.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > profile[b].1) {
            best = Some(k);
        }
    }
    let best = best.ok_or(Error::NoFeasibleFit)?;
    let t_hat = profile[best].0;
    let schedule = ModelSchedule::new(mode, vec![t_hat], vec![pre.clone(), post.clone()])?;
    let mut diag = diagnostics(policy);
    diag.points_evaluated = profile.len();
    diag.impossible_points = profile.iter().filter(|p| neg(p.1)).count();
    diag.changepoint = Some(t_hat);
    let (result, _) = result_from_schedule(cache, &schedule, diag)?;
    Ok(ChangepointFit {
        changepoint: t_hat,
        result,
        profile,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn fit_changepoint(
    pre: &MixtureInterval,
    post: &MixtureInterval,
    seed: &DynamicGraph,
    increments: &[Increment],
    candidates: Option<&[i64]>,
    mode: BoundaryMode,
    policy: &OrderingPolicy,
) -> Result<ChangepointFit> {
    let mut components = pre.components().to_vec();
    components.extend_from_slice(post.components());
    let cache = StreamCache::build(&dedup(&components), seed, increments, policy)?;
    let grid = match candidates {
        Some(c) => c.to_vec(),
        None => default_changepoint_grid(&cache, mode),
    };
    fit_changepoint_cached(&cache, pre, post, &grid, mode, policy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilksReport {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood-ratio test of J0 against J1 ⊃ J0 intervals with L components.
/// Each interval carries L − 1 free weights, so df = (L − 1)(J1 − J0).
pub fn wilks_test(logl0: f64, j0: usize, logl1: f64, j1: usize, l: usize) -> Result<WilksReport> {
    if j0 == 0 || j1 <= j0 || l < 2 {
        return Err(Error::InvalidGrid(format!(
            "need J1 > J0 >= 1 and L >= 2, got J0 = {j0}, J1 = {j1}, L = {l}"
        )));
    }
    if !logl0.is_finite() || !logl1.is_finite() {
        return Err(Error::InvalidModel("log-likelihoods must be finite".into()));
    }
    let tolerance = 1e-9 * logl0.abs().max(1.0);
    if logl1 < logl0 - tolerance {
        return Err(Error::NestingViolation { logl0, logl1 });
    }
    let statistic = (2.0 * (logl1 - logl0)).max(0.0);
    let df = (l - 1) * (j1 - j0);
    Ok(WilksReport {
        statistic,
        df,
        p_value: chi_square_upper_tail(statistic, df),
    })
}

/// P(X ≥ x) for X ~ χ²(df), via the regularized upper incomplete gamma.
pub fn chi_square_upper_tail(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef;

    fn ba_stream() -> (DynamicGraph, Vec<Increment>) {
        let recipe = crate::generator::GrowthRecipe {
            seed_graph: crate::generator::SeedGraph::Clique(5),
            operations: crate::generator::Operations::Fixed(crate::generator::FixedRule::external(2)),
            schedule: ModelSchedule::constant("0.6*BA+0.4*RAND".parse().unwrap()),
            stop: Some(crate::generator::StopCondition::Nodes(120)),
            rng_seed: 4,
        };
        let g = crate::generator::grow(&recipe).unwrap();
        (g.seed, g.increments)
    }

    #[test]
    fn grids() {
        let g = arithmetic_grid(-0.1, 2.1, 0.01).unwrap();
        assert_eq!(g.len(), 221);
        assert_eq!(g[0], -0.1);
        assert_eq!(g[110], 1.0);
        assert_eq!(*g.last().unwrap(), 2.1);
        assert_eq!(arithmetic_grid(1.0, 1.0, 0.1).unwrap(), vec![1.0]);
        assert!(arithmetic_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn lattice_sizes_and_order() {
        assert_eq!(
            simplex_lattice(2, 0.5).unwrap(),
            vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]
        );
        assert_eq!(simplex_lattice(3, 0.01).unwrap().len(), 5151);
        for p in simplex_lattice(3, 0.1).unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(simplex_lattice(2, 0.3).is_err());
    }

    #[test]
    fn weight_fit_is_grid_optimal() {
        let (seed, incs) = ba_stream();
        let comps = [Component::BA, Component::Random];
        let policy = OrderingPolicy::default();
        let fit = fit_mixture_weights(&comps, &seed, &incs, 0.05, &policy).unwrap();
        assert_eq!(fit.diagnostics.points_evaluated, 21);
        let cache = StreamCache::build(&comps, &seed, &incs, &policy).unwrap();
        for p in simplex_lattice(2, 0.05).unwrap() {
            let l = cache.log_likelihood(0..cache.len(), &p);
            assert!(fit.log_likelihood >= l - 1e-9 * l.abs());
        }
        let again = crate::likelihood::stream_log_likelihood(
            &fit.schedule().unwrap(),
            &seed,
            &incs,
            &policy,
        )
        .unwrap();
        assert_eq!(again.log_likelihood, fit.log_likelihood);
    }

    #[test]
    fn intervals_decompose_and_refine() {
        let (seed, incs) = ba_stream();
        let comps = [Component::BA, Component::Random];
        let policy = OrderingPolicy::default();
        let cache = StreamCache::build(&comps, &seed, &incs, &policy).unwrap();
        let one = fit_intervals_cached(&cache, &comps, 1, 0.1, IntervalMode::Count, &policy).unwrap();
        let two = fit_intervals_cached(&cache, &comps, 2, 0.1, IntervalMode::Count, &policy).unwrap();
        let parts: f64 = two.intervals.iter().map(|i| i.log_likelihood).sum();
        assert!((parts - two.log_likelihood).abs() <= 1e-9 * parts.abs());
        assert!(two.log_likelihood >= one.log_likelihood);
        assert_eq!(two.intervals[0].start, 1);
        assert_eq!(two.intervals[1].end, incs.len() as i64);
        assert_eq!(two.schedule().unwrap().boundaries, vec![two.intervals[0].end]);
        let time = fit_intervals_cached(&cache, &comps, 3, 0.1, IntervalMode::Time, &policy).unwrap();
        assert_eq!(time.mode, BoundaryMode::Timestamp);
        assert!(matches!(
            fit_intervals_cached(&cache, &comps, incs.len() + 1, 0.1, IntervalMode::Count, &policy),
            Err(Error::IntervalUnderflow { .. })
        ));
    }

    #[test]
    fn fit_result_json_round_trip() {
        let (seed, incs) = ba_stream();
        let fit = fit_mixture_weights(&[Component::BA, Component::Random], &seed, &incs, 0.1, &OrderingPolicy::default())
            .unwrap();
        let text = serde_json::to_string(&fit).unwrap();
        assert!(text.contains("\"logL\""));
        assert!(text.contains("\"BA\""));
        let back: FitResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fit);
    }

    #[test]
    fn scalar_single_point_and_impossible() {
        let (seed, incs) = ba_stream();
        let policy = OrderingPolicy::default();
        let fit = fit_degree_power(&seed, &incs, &[0.7], &policy).unwrap();
        assert_eq!(fit.parameter, 0.7);
        assert_eq!(fit.profile.len(), 1);
        assert_eq!(fit.result.log_likelihood, fit.profile[0].1);
        // triangle closure cannot explain a star onto a node with no common neighbors
        let seed = DynamicGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let incs = vec![Increment::new(1, NodeRef::Existing(0), vec![NodeRef::Existing(2)])];
        let r = fit_scalar(
            |_| Ok(ModelSchedule::constant(MixtureInterval::pure(Component::DegreePower(1.0)))),
            &seed,
            &incs,
            &[1.0],
            &policy,
        );
        assert!(r.is_ok());
    }

    #[test]
    fn changepoint_flat_ties_take_earliest() {
        let (seed, incs) = ba_stream();
        let m: MixtureInterval = "1*BA".parse().unwrap();
        let grid: Vec<i64> = (10..=60).collect();
        let fit = fit_changepoint(&m, &m, &seed, &incs, Some(&grid), BoundaryMode::IncrementIndex, &OrderingPolicy::default())
            .unwrap();
        assert_eq!(fit.changepoint, 10);
        assert!(fit.profile.iter().all(|p| p.1 == fit.profile[0].1));
        let single = fit_changepoint(
            &m,
            &"1*RAND".parse().unwrap(),
            &seed,
            &incs,
            Some(&[42]),
            BoundaryMode::IncrementIndex,
            &OrderingPolicy::default(),
        )
        .unwrap();
        assert_eq!(single.changepoint, 42);
        assert_eq!(single.result.diagnostics.changepoint, Some(42));
    }

    #[test]
    fn wilks_basics() {
        let r = wilks_test(-100.0, 1, -100.0, 2, 3).unwrap();
        assert_eq!((r.statistic, r.df, r.p_value), (0.0, 2, 1.0));
        let r = wilks_test(-100.0, 1, -98.0795, 2, 2).unwrap();
        assert!((r.p_value - 0.05).abs() < 1e-4);
        assert!(matches!(wilks_test(-1.0, 1, -2.0, 2, 2), Err(Error::NestingViolation { .. })));
        assert!(wilks_test(-1.0, 2, -1.0, 2, 2).is_err());
        assert!(chi_square_upper_tail(10.0, 1) < chi_square_upper_tail(5.0, 1));
    }
}
