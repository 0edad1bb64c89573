use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netgrowth::estimation::{
    self, arithmetic_grid, FitResult, IntervalMode, DEFAULT_ALPHA_GRID, DEFAULT_WEIGHT_STEP,
};
use netgrowth::generator::{self, FixedRule, GrowthRecipe, Operations, SeedGraph, StopCondition};
use netgrowth::likelihood::{self, OrderingPolicy, StreamCache, DEFAULT_ORDERING_SAMPLES};
use netgrowth::model::{model_similarity, BoundaryMode};
use netgrowth::netstats;
use netgrowth::spec::{parse_component_list, parse_model_spec};
use netgrowth::stream::{self, IncrementStream, OperationSchedule};
use netgrowth::{Component, DynamicGraph, Error, Increment, MixtureInterval, ModelSchedule, Result};

#[derive(Parser)]
#[command(name = "netgrowth", version, about = "Grow networks from mixture models and fit mixtures to edge streams")]
struct Cli {
    /// Cap on worker threads for grid searches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// source<TAB>dest<TAB>timestamp, one edge per line; cleaned and grouped on load.
    Edges,
    /// timestamp<TAB>center<TAB>t1,t2,..., one star per line.
    Stars,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Count,
    Time,
}

impl From<ModeArg> for IntervalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Count => IntervalMode::Count,
            ModeArg::Time => IntervalMode::Time,
        }
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input stream.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "edges")]
    format: Format,
    /// Increments with timestamp <= T form the seed graph and are not scored.
    #[arg(long, allow_hyphen_values = true)]
    seed_through: Option<i64>,
    /// Orderings sampled for stars with more than five existing targets.
    #[arg(long)]
    ordering_samples: Option<usize>,
    /// Seed for ordering sampling.
    #[arg(long)]
    seed: Option<u64>,
}

impl DataArgs {
    fn policy(&self) -> OrderingPolicy {
        let mut p = OrderingPolicy::with_seed(self.seed.unwrap_or(0));
        p.samples = self.ordering_samples.unwrap_or(DEFAULT_ORDERING_SAMPLES);
        p
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean an edge file and write it as a star file.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        /// Star file to write.
        #[arg(long)]
        out: PathBuf,
        /// Also write the extracted operation schedule as JSON.
        #[arg(long)]
        operations_out: Option<PathBuf>,
    },
    /// Grow a synthetic stream; the seed graph is written as timestamp-0 stars.
    Generate {
        /// JSON growth recipe; the flags below override its fields.
        #[arg(long)]
        recipe: Option<PathBuf>,
        /// Object model for every step.
        #[arg(long)]
        model: Option<String>,
        /// JSON model schedule, for time-varying models.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Targets per external star.
        #[arg(long)]
        m: Option<usize>,
        /// Probability of an internal star per step.
        #[arg(long)]
        internal_prob: Option<f64>,
        /// Existing targets per internal star.
        #[arg(long)]
        internal_size: Option<usize>,
        /// Leading steps that are always external.
        #[arg(long)]
        warmup: Option<usize>,
        /// Replay the star shapes of this operation schedule JSON.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Seed clique size; 0 starts from an empty graph.
        #[arg(long)]
        clique: Option<usize>,
        /// Stop at this many nodes.
        #[arg(long)]
        nodes: Option<usize>,
        /// Stop after this many increments.
        #[arg(long)]
        increments: Option<usize>,
        /// Generator RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Star file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-likelihood and c0 of a stream under a model.
    Score {
        #[command(flatten)]
        data: DataArgs,
        /// Model spec applied at every step, e.g. 0.9*BA+0.1*RAND.
        #[arg(long, conflicts_with_all = ["schedule", "fit"])]
        model: Option<String>,
        /// JSON model schedule.
        #[arg(long, conflicts_with = "fit")]
        schedule: Option<PathBuf>,
        /// A fit result JSON; its ordering settings are reused unless overridden.
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Per-increment CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fit α of a degree-power model, or mixture weights with --components.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// start:stop:step
        #[arg(long, allow_hyphen_values = true)]
        grid_alpha: Option<String>,
        /// Comma-separated components, e.g. BA,TRI,RAND.
        #[arg(long)]
        components: Option<String>,
        /// Simplex lattice step.
        #[arg(long, default_value_t = DEFAULT_WEIGHT_STEP)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit mixture weights independently on J intervals.
    FitIntervals {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        components: String,
        /// Number of intervals J.
        #[arg(long)]
        intervals: usize,
        #[arg(long, default_value_t = DEFAULT_WEIGHT_STEP)]
        step: f64,
        #[arg(long, value_enum, default_value = "count")]
        interval_mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate a single changepoint between two known models.
    FitChangepoint {
        #[command(flatten)]
        data: DataArgs,
        /// Model before the changepoint.
        #[arg(long)]
        pre: String,
        /// Model after the changepoint.
        #[arg(long)]
        post: String,
        /// start:stop:step candidates (default: about 1000 evenly strided).
        #[arg(long, allow_hyphen_values = true)]
        changepoint_grid: Option<String>,
        /// count: T is an increment index; time: T is a timestamp.
        #[arg(long, value_enum, default_value = "count")]
        interval_mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// c0 for each interval count J in jmin..=jmax.
    ScanJ {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        components: String,
        #[arg(long, default_value_t = 1)]
        jmin: usize,
        #[arg(long)]
        jmax: usize,
        #[arg(long, default_value_t = DEFAULT_WEIGHT_STEP)]
        step: f64,
        #[arg(long, value_enum, default_value = "count")]
        interval_mode: ModeArg,
        /// CSV output (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Likelihood-ratio test of J0 against J1 intervals.
    Wilks {
        /// Fit J0 and J1 on this stream instead of taking logL values.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "edges")]
        format: Format,
        #[arg(long, allow_hyphen_values = true)]
        seed_through: Option<i64>,
        #[arg(long)]
        ordering_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        components: Option<String>,
        #[arg(long, default_value_t = DEFAULT_WEIGHT_STEP)]
        step: f64,
        #[arg(long, value_enum, default_value = "count")]
        interval_mode: ModeArg,
        /// logL of the J0 fit.
        #[arg(long, allow_hyphen_values = true)]
        logl0: Option<f64>,
        /// logL of the J1 fit.
        #[arg(long, allow_hyphen_values = true)]
        logl1: Option<f64>,
        /// Component count when logL values are given directly.
        #[arg(long)]
        l: Option<usize>,
        /// Intervals in the null fit.
        #[arg(long, alias = "jmin", default_value_t = 1)]
        j0: usize,
        /// Intervals in the alternative fit; a multiple of J0.
        #[arg(long, alias = "jmax", default_value_t = 2)]
        j1: usize,
    },
    /// Network statistics every --stride increments, or merge runs with --merge.
    Stats {
        #[arg(long, required_unless_present = "merge")]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "edges")]
        format: Format,
        #[arg(long, allow_hyphen_values = true)]
        seed_through: Option<i64>,
        #[arg(long)]
        stride: Option<usize>,
        /// Statistics CSVs to merge into mean and 95% CI columns.
        #[arg(long, num_args = 1..)]
        merge: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cosine similarity of two models' choice distributions on a graph.
    Similarity {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "edges")]
        format: Format,
        /// Use the graph formed by increments with timestamp <= T.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<i64>,
        #[arg(long)]
        model: String,
        #[arg(long)]
        other: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[threads]: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path, format: Format) -> Result<IncrementStream> {
    match format {
        Format::Stars => stream::read_star_file(path),
        Format::Edges => {
            let records = stream::parse_edge_file(path)?;
            let (clean, report) = stream::clean_stream(records);
            for line in report.to_string().lines() {
                log::info!("{line}");
            }
            Ok(stream::group_increments(&clean))
        }
    }
}

struct Loaded {
    seed: DynamicGraph,
    stream: IncrementStream,
    first: usize,
}

impl Loaded {
    fn increments(&self) -> &[Increment] {
        &self.stream.increments[self.first..]
    }
}

fn load_split(path: &Path, format: Format, seed_through: Option<i64>) -> Result<Loaded> {
    let stream = load(path, format)?;
    let (seed, first) = stream.split_seed(seed_through)?;
    log::info!(
        "{} increments, {} in the seed ({} nodes)",
        stream.len(),
        first,
        seed.node_count()
    );
    Ok(Loaded { seed, stream, first })
}

fn parse_triple(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::InvalidGrid(format!("expected start:stop:step, got '{text}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    Ok((v[0], v[1], v[2]))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn weights_line(fit: &FitResult) -> String {
    fit.intervals
        .iter()
        .map(|iv| {
            fit.components
                .iter()
                .zip(&iv.weights)
                .map(|(c, w)| format!("{c}:{w}"))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn write_fit(fit: &FitResult, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => fit.write_json(p),
        None => Ok(()),
    }
}

fn components(text: &str) -> Result<Vec<Component>> {
    parse_component_list(text)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            data,
            out,
            operations_out,
        } => {
            let s = load(&data, Format::Edges)?;
            s.write_star_file(&out)?;
            if let Some(p) = operations_out {
                let ops = stream::extract_operation_schedule(&s.increments);
                std::fs::write(&p, serde_json::to_string_pretty(&ops)?)
                    .map_err(|source| Error::Io { path: p.clone(), source })?;
            }
            println!("increments={} nodes={}", s.len(), s.labels.len());
        }
        Command::Generate {
            recipe,
            model,
            schedule,
            m,
            internal_prob,
            internal_size,
            warmup,
            replay,
            clique,
            nodes,
            increments,
            seed,
            out,
        } => {
            let mut r: GrowthRecipe = match &recipe {
                Some(p) => read_json(p)?,
                None => GrowthRecipe {
                    seed_graph: SeedGraph::default(),
                    operations: Operations::Fixed(FixedRule::external(m.unwrap_or(1))),
                    schedule: ModelSchedule::constant(MixtureInterval::pure(Component::BA)),
                    stop: None,
                    rng_seed: 0,
                },
            };
            if let Some(text) = model {
                r.schedule = ModelSchedule::constant(parse_model_spec(&text)?);
            }
            if let Some(p) = schedule {
                r.schedule = read_json(&p)?;
            }
            if let Some(p) = replay {
                let ops: OperationSchedule = read_json(&p)?;
                r.operations = Operations::Replay(ops);
            }
            if let Operations::Fixed(rule) = &mut r.operations {
                if let Some(v) = m {
                    rule.m = v;
                }
                if let Some(v) = internal_prob {
                    rule.internal_prob = v;
                }
                if let Some(v) = internal_size {
                    rule.internal_size = v;
                }
                if let Some(v) = warmup {
                    rule.external_warmup = v;
                }
            }
            if let Some(n) = clique {
                r.seed_graph = if n == 0 { SeedGraph::Empty } else { SeedGraph::Clique(n) };
            }
            if let Some(n) = nodes {
                r.stop = Some(StopCondition::Nodes(n));
            }
            if let Some(n) = increments {
                r.stop = Some(StopCondition::Increments(n));
            }
            if let Some(s) = seed {
                r.rng_seed = s;
            }
            let g = generator::grow(&r)?;
            g.to_stream()?.write_star_file(&out)?;
            println!(
                "nodes={} edges={} increments={}",
                g.graph.node_count(),
                g.graph.edge_count(),
                g.increments.len()
            );
        }
        Command::Score {
            data,
            model,
            schedule,
            fit,
            trace,
        } => {
            let loaded = load_split(&data.data, data.format, data.seed_through)?;
            let (sched, policy, components) = if let Some(p) = &fit {
                let f = FitResult::read_json(p)?;
                let mut policy = f.diagnostics.ordering;
                if let Some(s) = data.ordering_samples {
                    policy.samples = s;
                }
                if let Some(s) = data.seed {
                    policy.seed = s;
                }
                let sched = f.schedule()?;
                (sched, policy, f.components.clone())
            } else {
                let sched = match (&model, &schedule) {
                    (Some(text), _) => ModelSchedule::constant(parse_model_spec(text)?),
                    (None, Some(p)) => read_json(p)?,
                    (None, None) => {
                        return Err(Error::InvalidModel(
                            "one of --model, --schedule or --fit is required".into(),
                        ))
                    }
                };
                sched.validate()?;
                let comps = sched.distinct_components();
                (sched, data.policy(), comps)
            };
            let cache = StreamCache::build(&components, &loaded.seed, loaded.increments(), &policy)?;
            let s = likelihood::summarize(&cache, &sched)?;
            if let Some(p) = trace {
                likelihood::write_trace_csv(p, &s.trace)?;
            }
            println!(
                "logL={} c0={} choices={} impossible={} fallbacks={}",
                s.log_likelihood, s.c0, s.choices, s.impossible, s.fallbacks
            );
        }
        Command::Fit {
            data,
            grid_alpha,
            components: comps,
            step,
            out,
        } => {
            let loaded = load_split(&data.data, data.format, data.seed_through)?;
            let policy = data.policy();
            if let Some(text) = comps {
                if grid_alpha.is_some() {
                    return Err(Error::InvalidGrid(
                        "--grid-alpha and --components are exclusive".into(),
                    ));
                }
                let f = estimation::fit_mixture_weights(
                    &components(&text)?,
                    &loaded.seed,
                    loaded.increments(),
                    step,
                    &policy,
                )?;
                write_fit(&f, &out)?;
                println!("weights={} logL={} c0={}", weights_line(&f), f.log_likelihood, f.c0);
            } else {
                let (a, b, s) = match grid_alpha {
                    Some(t) => parse_triple(&t)?,
                    None => DEFAULT_ALPHA_GRID,
                };
                let grid = arithmetic_grid(a, b, s)?;
                let f = estimation::fit_degree_power(&loaded.seed, loaded.increments(), &grid, &policy)?;
                write_fit(&f.result, &out)?;
                println!(
                    "alpha={} logL={} c0={}",
                    f.parameter, f.result.log_likelihood, f.result.c0
                );
            }
        }
        Command::FitIntervals {
            data,
            components: comps,
            intervals,
            step,
            interval_mode,
            out,
        } => {
            let loaded = load_split(&data.data, data.format, data.seed_through)?;
            let f = estimation::fit_intervals(
                &components(&comps)?,
                &loaded.seed,
                loaded.increments(),
                intervals,
                step,
                interval_mode.into(),
                &data.policy(),
            )?;
            write_fit(&f, &out)?;
            println!(
                "J={} logL={} c0={} weights={}",
                intervals,
                f.log_likelihood,
                f.c0,
                weights_line(&f)
            );
        }
        Command::FitChangepoint {
            data,
            pre,
            post,
            changepoint_grid,
            interval_mode,
            out,
        } => {
            let loaded = load_split(&data.data, data.format, data.seed_through)?;
            let grid = match changepoint_grid {
                Some(t) => {
                    let (a, b, s) = parse_triple(&t)?;
                    Some(
                        arithmetic_grid(a, b, s)?
                            .into_iter()
                            .map(|x| x.round() as i64)
                            .collect::<Vec<_>>(),
                    )
                }
                None => None,
            };
            let mode = match interval_mode {
                ModeArg::Count => BoundaryMode::IncrementIndex,
                ModeArg::Time => BoundaryMode::Timestamp,
            };
            let f = estimation::fit_changepoint(
                &parse_model_spec(&pre)?,
                &parse_model_spec(&post)?,
                &loaded.seed,
                loaded.increments(),
                grid.as_deref(),
                mode,
                &data.policy(),
            )?;
            write_fit(&f.result, &out)?;
            println!(
                "T={} logL={} c0={}",
                f.changepoint, f.result.log_likelihood, f.result.c0
            );
        }
        Command::ScanJ {
            data,
            components: comps,
            jmin,
            jmax,
            step,
            interval_mode,
            out,
        } => {
            let loaded = load_split(&data.data, data.format, data.seed_through)?;
            let rows = estimation::scan_interval_counts(
                &components(&comps)?,
                &loaded.seed,
                loaded.increments(),
                jmin..jmax + 1,
                step,
                interval_mode.into(),
                &data.policy(),
            )?;
            match out {
                Some(p) => {
                    estimation::write_scan_csv(&p, &rows)?;
                    let best = rows
                        .iter()
                        .max_by(|a, b| a.c0.total_cmp(&b.c0))
                        .expect("nonempty scan");
                    println!("rows={} best_J={} best_c0={}", rows.len(), best.j, best.c0);
                }
                None => {
                    println!("J,logL,c0");
                    for r in rows {
                        println!("{},{},{}", r.j, r.log_likelihood, r.c0);
                    }
                }
            }
        }
        Command::Wilks {
            data,
            format,
            seed_through,
            ordering_samples,
            seed,
            components: comps,
            step,
            interval_mode,
            logl0,
            logl1,
            l,
            j0,
            j1,
        } => {
            let (l0, l1, count) = match (data, logl0, logl1) {
                (Some(path), None, None) => {
                    let comps = components(comps.as_deref().ok_or_else(|| {
                        Error::InvalidModel("--components is required with --data".into())
                    })?)?;
                    if j0 == 0 || j1 % j0 != 0 {
                        return Err(Error::InvalidGrid(format!(
                            "J1 = {j1} must be a multiple of J0 = {j0} for nested intervals"
                        )));
                    }
                    let args = DataArgs {
                        data: path,
                        format,
                        seed_through,
                        ordering_samples,
                        seed,
                    };
                    let loaded = load_split(&args.data, format, seed_through)?;
                    let policy = args.policy();
                    let cache = StreamCache::build(&comps, &loaded.seed, loaded.increments(), &policy)?;
                    let mode: IntervalMode = interval_mode.into();
                    let f0 = estimation::fit_intervals_cached(&cache, &comps, j0, step, mode, &policy)?;
                    let f1 = estimation::fit_intervals_cached(&cache, &comps, j1, step, mode, &policy)?;
                    (f0.log_likelihood, f1.log_likelihood, f0.components.len())
                }
                (None, Some(a), Some(b)) => {
                    let count = l.ok_or_else(|| {
                        Error::InvalidModel("--l is required with --logl0/--logl1".into())
                    })?;
                    (a, b, count)
                }
                _ => {
                    return Err(Error::InvalidModel(
                        "give either --data or both --logl0 and --logl1".into(),
                    ))
                }
            };
            let r = estimation::wilks_test(l0, j0, l1, j1, count)?;
            println!(
                "statistic={} df={} p={} logL0={} logL1={}",
                r.statistic, r.df, r.p_value, l0, l1
            );
        }
        Command::Stats {
            data,
            format,
            seed_through,
            stride,
            merge,
            out,
        } => {
            if !merge.is_empty() {
                let runs = merge
                    .iter()
                    .map(netstats::read_series_csv)
                    .collect::<Result<Vec<_>>>()?;
                let rows = netstats::aggregate_runs(&runs)?;
                netstats::write_aggregate_csv(&out, &rows)?;
                println!("runs={} checkpoints={}", runs.len(), rows.len());
            } else {
                let path = data.expect("clap enforces --data");
                let loaded = load_split(&path, format, seed_through)?;
                let series = netstats::stats_series(&loaded.seed, loaded.increments(), stride)?;
                netstats::write_series_csv(&out, &series)?;
                let last = series.last().expect("at least one checkpoint");
                println!(
                    "checkpoints={} nodes={} edges={} k_max={} clustering={} singletons={}",
                    series.len(),
                    last.nodes,
                    last.edges,
                    last.k_max,
                    last.clustering,
                    last.singletons
                );
            }
        }
        Command::Similarity {
            data,
            format,
            at,
            model,
            other,
        } => {
            let s = load(&data, format)?;
            let (graph, _) = match at {
                Some(t) => s.split_seed(Some(t))?,
                None => s.split_seed(Some(i64::MAX))?,
            };
            let sigma = model_similarity(&parse_model_spec(&model)?, &parse_model_spec(&other)?, &graph)?;
            println!("sigma={sigma}");
        }
    }
    Ok(())
}
