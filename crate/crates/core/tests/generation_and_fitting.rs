//! Generator invariants and estimator properties on generated streams.

use netgrowth::estimation::{
    arithmetic_grid, fit_degree_power, fit_intervals, fit_intervals_cached, fit_mixture_weights,
    scan_interval_counts_cached, simplex_lattice, wilks_test, IntervalMode,
};
use netgrowth::generator::{
    grow, sample_choice_frequencies, FixedRule, GrowthRecipe, Operations, SeedGraph, StopCondition,
};
use netgrowth::likelihood::{stream_log_likelihood, OrderingPolicy, StreamCache};
use netgrowth::model::Anchor;
use netgrowth::netstats::{assortativity, stats_series, StatCheckpoint};
use netgrowth::{Component, DynamicGraph, MixtureInterval, ModelSchedule};

fn external(model: &str, m: usize, nodes: usize, seed: u64) -> GrowthRecipe {
    GrowthRecipe {
        seed_graph: SeedGraph::Clique(5),
        operations: Operations::Fixed(FixedRule::external(m)),
        schedule: ModelSchedule::constant(model.parse().unwrap()),
        stop: Some(StopCondition::Nodes(nodes)),
        rng_seed: seed,
    }
}

fn policy() -> OrderingPolicy {
    OrderingPolicy::default()
}

#[test]
fn external_growth_degree_and_count_invariants() {
    for (model, seed) in [("1*BA", 1), ("0.5*RAND+0.5*TRI", 2), ("1*RP(0.5)", 3)] {
        let g = grow(&external(model, 3, 600, seed)).unwrap();
        assert_eq!(g.graph.node_count(), 600);
        assert_eq!(g.increments.len(), 600 - 5);
        let min_deg = (5..600u32).map(|v| g.graph.degree(v)).min().unwrap();
        assert!(min_deg >= 3, "{model}: min degree {min_deg}");
        assert_eq!(g.graph.edge_count(), 10 + 3 * 595);
    }
}

#[test]
fn ba_growth_never_leaves_singletons() {
    let g = grow(&external("1*BA", 3, 2000, 9)).unwrap();
    let series = stats_series(&g.seed, &g.increments, Some(25)).unwrap();
    assert!(series.iter().all(|c| c.singletons == 0));
    let last = series.last().unwrap();
    assert_eq!(*last, StatCheckpoint::of(&g.graph, g.increments.len()));
}

#[test]
fn fixed_seed_gives_identical_star_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = external("0.7*BA+0.3*TRI", 3, 400, 21);
    let a = dir.path().join("a.stars");
    let b = dir.path().join("b.stars");
    grow(&r).unwrap().to_stream().unwrap().write_star_file(&a).unwrap();
    grow(&r).unwrap().to_stream().unwrap().write_star_file(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn true_schedule_outscores_swapped_weights() {
    let mut wins = 0;
    for seed in 0..10 {
        let g = grow(&external("0.8*BA+0.2*RAND", 3, 800, 100 + seed)).unwrap();
        let score = |s: &str| {
            stream_log_likelihood(
                &ModelSchedule::constant(s.parse().unwrap()),
                &g.seed,
                &g.increments,
                &policy(),
            )
            .unwrap()
            .log_likelihood
        };
        if score("0.8*BA+0.2*RAND") > score("0.2*BA+0.8*RAND") {
            wins += 1;
        }
    }
    assert!(wins >= 9, "true schedule won {wins} of 10");
}

#[test]
fn choice_frequencies_follow_model_probabilities() {
    // path 0-1-2: DP(1) gives 1/4, 1/2, 1/4
    let path = DynamicGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let dp = MixtureInterval::pure(Component::DegreePower(1.0));
    let f = sample_choice_frequencies(&dp, &path, Anchor::None, &[], 200_000, 4).unwrap();
    for (got, want) in f.iter().zip([0.25, 0.5, 0.25]) {
        assert!((got - want).abs() < 0.006, "{f:?}");
    }
    // three isolated nodes ranked by arrival: RP(1) gives 6/11, 3/11, 2/11
    let empty = DynamicGraph::from_edges(3, &[]).unwrap();
    let rp = MixtureInterval::pure(Component::RankPreference(1.0));
    let f = sample_choice_frequencies(&rp, &empty, Anchor::None, &[], 200_000, 5).unwrap();
    for (got, want) in f.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
        assert!((got - want).abs() < 0.006, "{f:?}");
    }
    // excluded nodes are never drawn
    let f = sample_choice_frequencies(&dp, &path, Anchor::None, &[1], 10_000, 6).unwrap();
    assert_eq!(f[1], 0.0);
    assert!((f[0] - 0.5).abs() < 0.03);
}

#[test]
fn regular_graph_has_undefined_assortativity() {
    let cycle: Vec<(u32, u32)> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
    let g = DynamicGraph::from_edges(10, &cycle).unwrap();
    assert_eq!(assortativity(&g), None);
    assert_eq!(assortativity(&DynamicGraph::clique(6)), None);
}

#[test]
fn grid_fit_beats_every_lattice_point() {
    let g = grow(&external("0.6*BA+0.4*TRI", 3, 500, 31)).unwrap();
    let comps = [Component::BA, Component::TriangleClosure, Component::Random];
    let cache = StreamCache::build(&comps, &g.seed, &g.increments, &policy()).unwrap();
    let fit = fit_intervals_cached(&cache, &comps, 1, 0.05, IntervalMode::Count, &policy()).unwrap();
    for w in simplex_lattice(3, 0.05).unwrap() {
        let model = MixtureInterval::new(w, comps.to_vec()).unwrap();
        let ll = cache.log_likelihood(0..cache.len(), &cache.weights_for(&model).unwrap());
        assert!(ll <= fit.log_likelihood + 1e-9, "{model}: {ll} > {}", fit.log_likelihood);
    }
}

#[test]
fn interval_fits_decompose_and_nest() {
    let g = grow(&external("0.5*BA+0.5*RAND", 3, 700, 41)).unwrap();
    let comps = [Component::BA, Component::Random];
    let cache = StreamCache::build(&comps, &g.seed, &g.increments, &policy()).unwrap();
    let one = fit_intervals_cached(&cache, &comps, 1, 0.01, IntervalMode::Count, &policy()).unwrap();
    let weights = fit_mixture_weights(&comps, &g.seed, &g.increments, 0.01, &policy()).unwrap();
    assert_eq!(one.intervals[0].weights, weights.intervals[0].weights);
    assert_eq!(one.log_likelihood, weights.log_likelihood);

    let rows =
        scan_interval_counts_cached(&cache, &comps, [1, 2, 4, 8], 0.01, IntervalMode::Count, &policy())
            .unwrap();
    for pair in rows.windows(2) {
        assert!(pair[1].log_likelihood >= pair[0].log_likelihood - 1e-9);
    }
    let four = fit_intervals_cached(&cache, &comps, 4, 0.01, IntervalMode::Count, &policy()).unwrap();
    let sum: f64 = four.intervals.iter().map(|i| i.log_likelihood).sum();
    assert!((sum - four.log_likelihood).abs() < 1e-6 * sum.abs());
    let report = wilks_test(rows[0].log_likelihood, 1, rows[3].log_likelihood, 8, 2).unwrap();
    assert_eq!(report.df, 7);
    assert!(report.p_value > 0.0 && report.p_value <= 1.0);
}

#[test]
fn time_mode_intervals_cover_the_stream() {
    let g = grow(&external("1*BA", 3, 300, 8)).unwrap();
    let comps = [Component::BA, Component::Random];
    let fit = fit_intervals(&comps, &g.seed, &g.increments, 3, 0.1, IntervalMode::Time, &policy()).unwrap();
    assert_eq!(fit.intervals.len(), 3);
    let rescored = netgrowth::likelihood::summarize(
        &StreamCache::build(&comps, &g.seed, &g.increments, &policy()).unwrap(),
        &fit.schedule().unwrap(),
    )
    .unwrap();
    assert_eq!(rescored.log_likelihood, fit.log_likelihood);
}

#[test]
fn pure_sources_are_recovered() {
    let ba = grow(&external("1*BA", 3, 1500, 51)).unwrap();
    let grid = arithmetic_grid(-0.1, 2.1, 0.05).unwrap();
    let alpha = fit_degree_power(&ba.seed, &ba.increments, &grid, &policy()).unwrap();
    assert!((alpha.parameter - 1.0).abs() <= 0.15, "alpha {}", alpha.parameter);

    let rand = grow(&external("1*RAND", 3, 1500, 52)).unwrap();
    let alpha = fit_degree_power(&rand.seed, &rand.increments, &grid, &policy()).unwrap();
    assert!(alpha.parameter.abs() <= 0.15, "alpha {}", alpha.parameter);

    let comps = [Component::BA, Component::Random];
    let fit = fit_mixture_weights(&comps, &ba.seed, &ba.increments, 0.01, &policy()).unwrap();
    assert!(fit.weight_of(0, Component::BA) >= 0.9, "{:?}", fit.weight_table());
}
