//! Dataset files.
//!
//! A dataset directory `<root>/<name>/` holds
//!
//! * `edges.txt`: one whitespace-separated `u v` pair per line (`#` comments allowed),
//! * `features.csv`: header `node,x0,...`, then one row per node,
//! * `labels.csv`: header `node,label`, then one row per node.
//!
//! Node ids must cover `0..n` exactly once in both CSV files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{HerbError, Result};
use crate::graph::Graph;
use crate::tensor::Matrix;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> HerbError {
    HerbError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| HerbError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn parse_node_id(path: &Path, line: usize, field: Option<&str>) -> Result<usize> {
    field
        .ok_or_else(|| parse_err(path, line, "missing node id"))?
        .parse::<usize>()
        .map_err(|e| parse_err(path, line, format!("bad node id: {e}")))
}

/// Places per-node rows by id and checks that ids cover `0..n` exactly once.
fn order_by_id<T>(path: &Path, rows: Vec<(usize, usize, T)>) -> Result<Vec<T>> {
    let n = rows.len();
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (line, id, value) in rows {
        if id >= n {
            return Err(parse_err(path, line, format!("node id {id} outside 0..{n}")));
        }
        if slots[id].is_some() {
            return Err(parse_err(path, line, format!("node id {id} listed twice")));
        }
        slots[id] = Some(value);
    }
    Ok(slots.into_iter().map(|s| s.expect("ids are a permutation")).collect())
}

fn read_features(path: &Path) -> Result<Matrix> {
    let mut reader = csv_reader(path)?;
    let width = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .len()
        .checked_sub(1)
        .ok_or_else(|| parse_err(path, 1, "empty header"))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, format!("ragged or unreadable row: {e}"))
        })?;
        let line = record_line(&rec);
        if rec.len() != width + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} feature values, found {}", width, rec.len().saturating_sub(1)),
            ));
        }
        let id = parse_node_id(path, line, rec.get(0))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(path, line, format!("bad feature '{s}': {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, id, values));
    }
    let ordered = order_by_id(path, rows)?;
    let n = ordered.len();
    Matrix::new(n, width, ordered.into_iter().flatten().collect())
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut reader = csv_reader(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(parse_err(path, line, "expected 'node,label'"));
        }
        let id = parse_node_id(path, line, rec.get(0))?;
        let y = rec[1]
            .parse::<usize>()
            .map_err(|e| parse_err(path, line, format!("bad label '{}': {e}", &rec[1])))?;
        rows.push((line, id, (line, y)));
    }
    let ordered = order_by_id(path, rows)?;
    Ok(ordered.into_iter().map(|(_, y)| y).collect())
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| HerbError::io(path, e))?;
    let mut edges = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let mut endpoint = || -> Result<usize> {
            let tok = parts.next().ok_or_else(|| parse_err(path, line, "expected 'u v'"))?;
            let v = tok
                .parse::<usize>()
                .map_err(|e| parse_err(path, line, format!("bad node id '{tok}': {e}")))?;
            if v >= n {
                return Err(parse_err(path, line, format!("dangling endpoint {v}: graph has {n} nodes")));
            }
            Ok(v)
        };
        let u = endpoint()?;
        let v = endpoint()?;
        if parts.next().is_some() {
            return Err(parse_err(path, line, "expected exactly two node ids"));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

/// Reads the three dataset files. The class count is `max(label) + 1`.
pub fn load_graph(edges_path: impl AsRef<Path>, features_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Graph> {
    let features = read_features(features_path.as_ref())?;
    let labels_path = labels_path.as_ref();
    let labels = read_labels(labels_path)?;
    if labels.len() != features.rows() {
        return Err(parse_err(
            labels_path,
            0,
            format!("{} labels for {} feature rows", labels.len(), features.rows()),
        ));
    }
    let class_count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let edges = read_edges(edges_path.as_ref(), labels.len())?;
    Graph::from_edges(labels.len(), &edges, features, labels, class_count)
}

pub fn dataset_dir(root: impl AsRef<Path>, name: &str) -> PathBuf {
    root.as_ref().join(name)
}

/// Loads `<root>/<name>/{edges.txt,features.csv,labels.csv}`.
pub fn load_dataset(root: impl AsRef<Path>, name: &str) -> Result<Graph> {
    let dir = dataset_dir(root, name);
    if !dir.is_dir() {
        return Err(HerbError::Config(format!(
            "dataset directory {} does not exist",
            dir.display()
        )));
    }
    load_graph(dir.join("edges.txt"), dir.join("features.csv"), dir.join("labels.csv"))
}

/// Writes a graph in the dataset layout (used for synthetic benchmarks).
pub fn write_dataset(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HerbError::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).map_err(|e| HerbError::io(&p, e))?;
        f.write_all(body.as_bytes()).map_err(|e| HerbError::io(&p, e))
    };
    let mut edges = String::new();
    for (u, v) in g.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    write("edges.txt", edges)?;

    let f = g.feature_dim();
    let mut feats = String::from("node");
    for j in 0..f {
        feats.push_str(&format!(",x{j}"));
    }
    feats.push('\n');
    for i in 0..g.n() {
        feats.push_str(&i.to_string());
        for v in g.features().row(i) {
            feats.push(',');
            feats.push_str(&v.to_string());
        }
        feats.push('\n');
    }
    write("features.csv", feats)?;

    let mut labels = String::from("node,label\n");
    for (i, y) in g.labels().iter().enumerate() {
        labels.push_str(&format!("{i},{y}\n"));
    }
    write("labels.csv", labels)
}
