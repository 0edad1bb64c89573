//! Edge-list ingestion: parsing, cleaning, grouping into star increments,
//! internal/external classification and operation-schedule extraction.
//!
//! Edge files are tab separated, one link per line:
//! `SOURCE_NODE<TAB>DEST_NODE<TAB>TIMESTAMP` with UTF-8 node ids and integer
//! Unix-epoch timestamps. Star files hold one increment per line:
//! `timestamp<TAB>center<TAB>target1,target2,...`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Increment, NodeIdx, NodeRef};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeRecord {
    pub source: String,
    pub dest: String,
    pub timestamp: i64,
}

impl EdgeRecord {
    pub fn new(source: impl Into<String>, dest: impl Into<String>, timestamp: i64) -> Self {
        EdgeRecord {
            source: source.into(),
            dest: dest.into(),
            timestamp,
        }
    }
}

pub fn parse_edge_file(path: impl AsRef<Path>) -> Result<Vec<EdgeRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edges(BufReader::new(file), path)
}

/// Parses edge records in file order. Blank lines are skipped.
pub fn parse_edges(reader: impl BufRead, path: &Path) -> Result<Vec<EdgeRecord>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let timestamp = fields[2]
            .trim()
            .parse::<i64>()
            .map_err(|_| err(format!("timestamp '{}' is not an integer", fields[2])))?;
        out.push(EdgeRecord::new(fields[0], fields[1], timestamp));
    }
    Ok(out)
}

pub fn write_edge_file(path: impl AsRef<Path>, records: &[EdgeRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.source, r.dest, r.timestamp).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Counts of what `clean_stream` changed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub records_in: usize,
    /// Records that arrived with a timestamp earlier than their predecessor.
    pub out_of_order: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    /// Edges dropped because neither endpoint was in the connected component.
    pub disconnected: usize,
    pub records_out: usize,
}

impl fmt::Display for CleaningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records_in={}", self.records_in)?;
        writeln!(f, "out_of_order={}", self.out_of_order)?;
        writeln!(f, "self_loops={}", self.self_loops)?;
        writeln!(f, "duplicates={}", self.duplicates)?;
        writeln!(f, "disconnected={}", self.disconnected)?;
        write!(f, "records_out={}", self.records_out)
    }
}

/// Stable-sorts by timestamp, then drops self-loops, repeated undirected
/// pairs (first occurrence wins) and edges that would not touch the growing
/// component. Every admitted edge touches the component, so it stays the
/// single, and therefore largest, connected component; a node seen only in
/// dropped edges can still join later through an admitted one.
pub fn clean_stream(mut records: Vec<EdgeRecord>) -> (Vec<EdgeRecord>, CleaningReport) {
    let mut report = CleaningReport {
        records_in: records.len(),
        out_of_order: records
            .windows(2)
            .filter(|w| w[1].timestamp < w[0].timestamp)
            .count(),
        ..Default::default()
    };
    records.sort_by_key(|r| r.timestamp);
    let mut present: HashSet<String> = HashSet::new();
    let mut seen_pairs: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if r.source == r.dest {
            report.self_loops += 1;
            continue;
        }
        let key = if r.source <= r.dest {
            (r.source.clone(), r.dest.clone())
        } else {
            (r.dest.clone(), r.source.clone())
        };
        if seen_pairs.contains(&key) {
            report.duplicates += 1;
            continue;
        }
        let joins = present.is_empty() || present.contains(&r.source) || present.contains(&r.dest);
        if !joins {
            report.disconnected += 1;
            continue;
        }
        seen_pairs.insert(key);
        present.insert(r.source.clone());
        present.insert(r.dest.clone());
        out.push(r);
    }
    report.records_out = out.len();
    (out, report)
}

/// Star increments with the node labels they were built from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IncrementStream {
    /// Label of node `i`, in arrival order.
    pub labels: Vec<String>,
    pub increments: Vec<Increment>,
}

impl IncrementStream {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Generated streams label nodes by their index.
    pub fn with_index_labels(node_count: usize, increments: Vec<Increment>) -> Self {
        IncrementStream {
            labels: (0..node_count).map(|i| i.to_string()).collect(),
            increments,
        }
    }

    /// Applies every increment with timestamp `<= through` to an empty graph
    /// and returns it as the seed together with the position of the first
    /// remaining increment.
    pub fn split_seed(&self, through: Option<i64>) -> Result<(DynamicGraph, usize)> {
        let mut g = DynamicGraph::new();
        let Some(through) = through else {
            return Ok((g, 0));
        };
        let mut k = 0;
        while k < self.increments.len() && self.increments[k].timestamp <= through {
            g.apply_increment(&self.increments[k])?;
            k += 1;
        }
        Ok((g, k))
    }

    /// Flattens back to edge records, one per star edge.
    pub fn to_edge_records(&self) -> Result<Vec<EdgeRecord>> {
        let mut g = DynamicGraph::new();
        let mut out = Vec::new();
        for inc in &self.increments {
            let d = g.apply_increment(inc)?;
            for t in &d.targets {
                out.push(EdgeRecord::new(
                    self.label(d.center),
                    self.label(*t),
                    inc.timestamp,
                ));
            }
        }
        Ok(out)
    }

    fn label(&self, node: NodeIdx) -> String {
        self.labels
            .get(node as usize)
            .cloned()
            .unwrap_or_else(|| node.to_string())
    }

    pub fn write_star_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut g = DynamicGraph::new();
        for inc in &self.increments {
            let d = g.apply_increment(inc)?;
            let targets: Vec<String> = d.targets.iter().map(|&t| self.label(t)).collect();
            writeln!(
                w,
                "{}\t{}\t{}",
                inc.timestamp,
                self.label(d.center),
                targets.join(",")
            )
            .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a star file; a label is new at its first appearance.
pub fn read_star_file(path: impl AsRef<Path>) -> Result<IncrementStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids: HashMap<String, NodeIdx> = HashMap::new();
    let mut stream = IncrementStream::default();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let timestamp = fields[0]
            .trim()
            .parse::<i64>()
            .map_err(|_| err(format!("timestamp '{}' is not an integer", fields[0])))?;
        let mut line_labels: Vec<&str> = vec![fields[1]];
        line_labels.extend(fields[2].split(',').filter(|s| !s.is_empty()));
        let mut refs = Vec::with_capacity(line_labels.len());
        for (j, label) in line_labels.iter().enumerate() {
            if line_labels[..j].contains(label) {
                return Err(err(format!("node '{label}' appears twice in one star")));
            }
            refs.push(match ids.get(*label) {
                Some(&i) => NodeRef::Existing(i),
                None => NodeRef::New,
            });
        }
        for label in &line_labels {
            if !ids.contains_key(*label) {
                ids.insert(label.to_string(), stream.labels.len() as NodeIdx);
                stream.labels.push(label.to_string());
            }
        }
        let center = refs[0];
        stream
            .increments
            .push(Increment::new(timestamp, center, refs[1..].to_vec()));
    }
    Ok(stream)
}

/// Groups maximal runs of records sharing `(timestamp, source)` into one star
/// centered on the source. Unrelated simultaneous links become separate
/// increments in input order.
pub fn group_increments(records: &[EdgeRecord]) -> IncrementStream {
    let mut ids: HashMap<&str, NodeIdx> = HashMap::new();
    let mut stream = IncrementStream::default();
    let mut k = 0;
    while k < records.len() {
        let head = &records[k];
        let mut end = k + 1;
        while end < records.len()
            && records[end].timestamp == head.timestamp
            && records[end].source == head.source
        {
            end += 1;
        }
        // Labels are registered only after the whole star is tagged.
        let slot = |label: &str| match ids.get(label) {
            Some(&i) => NodeRef::Existing(i),
            None => NodeRef::New,
        };
        let center = slot(&head.source);
        let targets: Vec<NodeRef> = records[k..end].iter().map(|r| slot(&r.dest)).collect();
        for label in std::iter::once(head.source.as_str()).chain(records[k..end].iter().map(|r| r.dest.as_str())) {
            if !ids.contains_key(label) {
                ids.insert(label, stream.labels.len() as NodeIdx);
                stream.labels.push(label.to_string());
            }
        }
        stream
            .increments
            .push(Increment::new(head.timestamp, center, targets));
        k = end;
    }
    stream
}

/// Cumulative edge counts after each increment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClassCounts {
    pub timestamp: i64,
    pub internal: usize,
    pub external: usize,
}

/// An edge is external when at least one endpoint joins with its increment.
pub fn classify_edges(increments: &[Increment]) -> Vec<EdgeClassCounts> {
    let mut acc = EdgeClassCounts::default();
    increments
        .iter()
        .map(|inc| {
            if inc.center.is_new() {
                acc.external += inc.targets.len();
            } else {
                let new = inc.targets.iter().filter(|t| t.is_new()).count();
                acc.external += new;
                acc.internal += inc.targets.len() - new;
            }
            acc.timestamp = inc.timestamp;
            acc
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationEvent {
    pub timestamp: i64,
    pub center_new: bool,
    pub new_targets: usize,
    pub existing_targets: usize,
}

impl OperationEvent {
    pub fn of(inc: &Increment) -> Self {
        let new_targets = inc.targets.iter().filter(|t| t.is_new()).count();
        OperationEvent {
            timestamp: inc.timestamp,
            center_new: inc.center.is_new(),
            new_targets,
            existing_targets: inc.targets.len() - new_targets,
        }
    }
}

/// Star shapes and timestamps of a stream, replayable by the generator.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationSchedule {
    pub events: Vec<OperationEvent>,
}

pub fn extract_operation_schedule(increments: &[Increment]) -> OperationSchedule {
    OperationSchedule {
        events: increments.iter().map(OperationEvent::of).collect(),
    }
}
