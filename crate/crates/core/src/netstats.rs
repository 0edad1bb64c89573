//! Network statistics over a growing graph, and aggregation across runs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Increment, NodeIdx};

/// Statistics of one graph snapshot. `assortativity` is `None` when every
/// edge endpoint has the same degree (zero variance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatCheckpoint {
    /// Increments applied after the seed.
    pub position: usize,
    pub nodes: usize,
    pub edges: usize,
    pub k_max: usize,
    pub mean_sq_degree: f64,
    pub assortativity: Option<f64>,
    pub clustering: f64,
    pub singletons: usize,
}

pub const COLUMNS: [&str; 8] = [
    "position",
    "nodes",
    "edges",
    "k_max",
    "mean_sq_degree",
    "assortativity",
    "clustering",
    "singletons",
];

impl StatCheckpoint {
    pub fn of(graph: &DynamicGraph, position: usize) -> Self {
        let n = graph.node_count();
        let degrees = graph.snapshot_degrees();
        let sq: u128 = degrees.iter().map(|&d| (d * d) as u128).sum();
        StatCheckpoint {
            position,
            nodes: n,
            edges: graph.edge_count(),
            k_max: degrees.iter().copied().max().unwrap_or(0),
            mean_sq_degree: if n == 0 { 0.0 } else { sq as f64 / n as f64 },
            assortativity: assortativity(graph),
            clustering: average_clustering(graph),
            singletons: degrees.iter().filter(|&&d| d == 1).count(),
        }
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes == 0 {
            0.0
        } else {
            2.0 * self.edges as f64 / self.nodes as f64
        }
    }
}

/// Pearson correlation of endpoint degrees over both orientations of every
/// edge, from exact integer sums.
pub fn assortativity(graph: &DynamicGraph) -> Option<f64> {
    let (mut s1, mut s2, mut sxy) = (0u128, 0u128, 0u128);
    for (a, b) in graph.edges() {
        let (x, y) = (graph.degree(a) as u128, graph.degree(b) as u128);
        s1 += x + y;
        s2 += x * x + y * y;
        sxy += 2 * x * y;
    }
    let n = 2 * graph.edge_count() as u128;
    let den = n * s2 - s1 * s1;
    if n == 0 || den == 0 {
        return None;
    }
    let num = if n * sxy >= s1 * s1 {
        (n * sxy - s1 * s1) as f64
    } else {
        -((s1 * s1 - n * sxy) as f64)
    };
    Some((num / den as f64).clamp(-1.0, 1.0))
}

pub fn local_clustering(graph: &DynamicGraph, v: NodeIdx) -> f64 {
    let d = graph.degree(v);
    if d < 2 {
        return 0.0;
    }
    let links: usize = graph
        .neighbors(v)
        .iter()
        .map(|&u| graph.common_neighbors(u, v))
        .sum();
    links as f64 / (d * (d - 1)) as f64
}

/// Mean local clustering over all nodes; nodes of degree below 2 count as 0.
pub fn average_clustering(graph: &DynamicGraph) -> f64 {
    let n = graph.node_count();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = (0..n as NodeIdx)
        .into_par_iter()
        .map(|v| local_clustering(graph, v))
        .sum();
    sum / n as f64
}

pub fn default_stride(total: usize) -> usize {
    (total / 200).max(1)
}

/// Replays `increments` onto `seed`, recording statistics every `stride`
/// increments and after the last one.
pub fn stats_series(
    seed: &DynamicGraph,
    increments: &[Increment],
    stride: Option<usize>,
) -> Result<Vec<StatCheckpoint>> {
    let stride = stride.unwrap_or_else(|| default_stride(increments.len()));
    if stride == 0 {
        return Err(Error::InvalidGrid("checkpoint stride must be >= 1".into()));
    }
    let mut g = seed.clone();
    let mut out = Vec::new();
    for (k, inc) in increments.iter().enumerate() {
        g.apply_increment(inc)?;
        let position = k + 1;
        if position % stride == 0 || position == increments.len() {
            out.push(StatCheckpoint::of(&g, position));
        }
    }
    if increments.is_empty() {
        out.push(StatCheckpoint::of(&g, 0));
    }
    Ok(out)
}

pub fn write_series_csv(path: impl AsRef<Path>, series: &[StatCheckpoint]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", COLUMNS.join(",")).map_err(io)?;
    for c in series {
        let assort = c.assortativity.map_or("NA".to_string(), |a| a.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.position, c.nodes, c.edges, c.k_max, c.mean_sq_degree, assort, c.clustering, c.singletons
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<StatCheckpoint>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != COLUMNS.len() {
            return Err(bad(format!("expected {} columns, found {}", COLUMNS.len(), f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("'{s}': {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
        out.push(StatCheckpoint {
            position: int(f[0])?,
            nodes: int(f[1])?,
            edges: int(f[2])?,
            k_max: int(f[3])?,
            mean_sq_degree: real(f[4])?,
            assortativity: if f[5] == "NA" { None } else { Some(real(f[5])?) },
            clustering: real(f[6])?,
            singletons: int(f[7])?,
        });
    }
    Ok(out)
}

/// Mean and two-sided 95% confidence interval of one statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval95 {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    /// Runs in which the statistic was defined.
    pub runs: usize,
}

impl Interval95 {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Some(Interval95 { mean, lo: mean, hi: mean, runs: 1 });
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        let half = t * (var / n as f64).sqrt();
        Some(Interval95 { mean, lo: mean - half, hi: mean + half, runs: n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub position: usize,
    /// One entry per column after `position`, in `COLUMNS` order.
    pub stats: Vec<Option<Interval95>>,
}

/// Merges runs checkpoint by checkpoint. Runs must share checkpoint positions.
pub fn aggregate_runs(runs: &[Vec<StatCheckpoint>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    for (r, run) in runs.iter().enumerate() {
        if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.position != b.position) {
            return Err(Error::InvalidGrid(format!(
                "run {r} checkpoints differ from run 0"
            )));
        }
    }
    let columns = |c: &StatCheckpoint| -> [Option<f64>; 7] {
        [
            Some(c.nodes as f64),
            Some(c.edges as f64),
            Some(c.k_max as f64),
            Some(c.mean_sq_degree),
            c.assortativity,
            Some(c.clustering),
            Some(c.singletons as f64),
        ]
    };
    Ok((0..first.len())
        .map(|k| {
            let stats = (0..7)
                .map(|s| {
                    let vals: Vec<f64> = runs.iter().filter_map(|run| columns(&run[k])[s]).collect();
                    Interval95::of(&vals)
                })
                .collect();
            AggregateRow { position: first[k].position, stats }
        })
        .collect())
}

pub fn write_aggregate_csv(path: impl AsRef<Path>, rows: &[AggregateRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = vec!["position".to_string()];
    for c in &COLUMNS[1..] {
        header.extend([format!("{c}_mean"), format!("{c}_lo"), format!("{c}_hi")]);
    }
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let mut fields = vec![row.position.to_string()];
        for s in &row.stats {
            match s {
                Some(i) => fields.extend([i.mean, i.lo, i.hi].map(|v| v.to_string())),
                None => fields.extend(["NA", "NA", "NA"].map(String::from)),
            }
        }
        writeln!(w, "{}", fields.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRef;

    #[test]
    fn triangle() {
        let s = StatCheckpoint::of(&DynamicGraph::clique(3), 0);
        assert_eq!(s.clustering, 1.0);
        assert_eq!(s.singletons, 0);
        assert_eq!(s.assortativity, None);
        assert_eq!(s.k_max, 2);
    }

    #[test]
    fn star_k14() {
        let g = DynamicGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let s = StatCheckpoint::of(&g, 0);
        assert_eq!(s.assortativity, Some(-1.0));
        assert_eq!(s.clustering, 0.0);
        assert_eq!(s.k_max, 4);
        assert_eq!(s.singletons, 4);
        assert_eq!(s.mean_sq_degree, 20.0 / 5.0);
    }

    #[test]
    fn path_assortativity_by_hand() {
        // endpoint pairs both ways: (1,2),(2,1),(2,2),(2,2),(2,1),(1,2)
        // mean 5/3, var 2/9, cov (16/6 - 25/9) = -1/9 -> r = -1/2
        let g = DynamicGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!((assortativity(&g).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn partial_clustering() {
        // triangle 0-1-2 plus pendant 3 on 0: C0 = 1/3, C1 = C2 = 1, C3 = 0
        let g = DynamicGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (0, 3)]).unwrap();
        assert!((average_clustering(&g) - (1.0 / 3.0 + 2.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn series_ends_with_final_graph() {
        let seed = DynamicGraph::clique(3);
        let incs: Vec<Increment> = (0..7)
            .map(|i| Increment::new(i, NodeRef::New, vec![NodeRef::Existing(i as NodeIdx % 3)]))
            .collect();
        let series = stats_series(&seed, &incs, Some(3)).unwrap();
        let positions: Vec<usize> = series.iter().map(|c| c.position).collect();
        assert_eq!(positions, vec![3, 6, 7]);
        let mut g = seed.clone();
        for i in &incs {
            g.apply_increment(i).unwrap();
        }
        assert_eq!(series.last().unwrap(), &StatCheckpoint::of(&g, 7));
        assert!(stats_series(&seed, &incs, Some(0)).is_err());
        assert_eq!(default_stride(1000), 5);
        assert_eq!(default_stride(10), 1);
    }

    #[test]
    fn confidence_interval() {
        let i = Interval95::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(i.mean, 2.0);
        // t(0.975, 2) = 4.302652729911275
        let half = 4.302652729911275 * (1.0f64 / 3.0).sqrt();
        assert!((i.hi - 2.0 - half).abs() < 1e-9);
        assert_eq!(Interval95::of(&[5.0]).unwrap().lo, 5.0);
        assert!(Interval95::of(&[]).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let g = DynamicGraph::from_edges(4, &[(0, 1), (1, 2), (0, 2), (0, 3)]).unwrap();
        let series = vec![StatCheckpoint::of(&DynamicGraph::clique(3), 0), StatCheckpoint::of(&g, 1)];
        write_series_csv(&p, &series).unwrap();
        assert_eq!(read_series_csv(&p).unwrap(), series);
        let rows = aggregate_runs(&[series.clone(), series]).unwrap();
        assert_eq!(rows[0].stats[4], None);
        write_aggregate_csv(dir.path().join("a.csv"), &rows).unwrap();
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn jensen_and_ranges(edges in proptest::collection::vec((0u32..12, 0u32..12), 1..40)) {
                let edges: Vec<(u32, u32)> = edges.into_iter().filter(|(a, b)| a != b).collect();
                let mut uniq: Vec<(u32, u32)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
                uniq.sort_unstable();
                uniq.dedup();
                let g = DynamicGraph::from_edges(12, &uniq).unwrap();
                let s = StatCheckpoint::of(&g, 0);
                prop_assert!(s.mean_sq_degree + 1e-12 >= s.mean_degree().powi(2));
                prop_assert!((0.0..=1.0).contains(&s.clustering));
                if let Some(r) = s.assortativity {
                    prop_assert!((-1.0..=1.0).contains(&r));
                }
                prop_assert!(s.k_max < s.nodes);
            }
        }
    }
}
