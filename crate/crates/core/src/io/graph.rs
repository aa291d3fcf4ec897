use std::path::Path;

use super::{fmt_f64, read_all, schema, write_atomic, IoError};
use crate::graph::Graph;
use crate::netbuild::FunctionalNetwork;

fn encode(g: &Graph, target_density: Option<f64>) -> String {
    let mut out = format!("# nodes={} edges={}", g.node_count(), g.edge_count());
    if let Some(d) = target_density {
        out.push_str(&format!(" target_density={}", fmt_f64(d)));
    }
    out.push('\n');
    for &(a, b) in g.edges() {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

fn decode(path: &Path, text: &str) -> Result<(Graph, Option<f64>), IoError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| schema(path, "empty edge-list file"))?;
    let fields = header.strip_prefix('#').ok_or_else(|| schema(path, "missing `# nodes=…` header"))?;
    let (mut nodes, mut edges, mut density) = (None, None, None);
    for token in fields.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| schema(path, format!("bad header token {token:?}")))?;
        let bad = || schema(path, format!("bad header value {token:?}"));
        match key {
            "nodes" => nodes = Some(value.parse::<usize>().map_err(|_| bad())?),
            "edges" => edges = Some(value.parse::<usize>().map_err(|_| bad())?),
            "target_density" => density = Some(value.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(schema(path, format!("unknown header key {key:?}"))),
        }
    }
    let n = nodes.ok_or_else(|| schema(path, "header lacks `nodes`"))?;
    let mut list = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        match parts.as_slice() {
            [a, b] => match (parse(a), parse(b)) {
                (Some(a), Some(b)) => list.push((a, b)),
                _ => return Err(schema(path, format!("line {}: bad edge {line:?}", lineno + 2))),
            },
            _ => return Err(schema(path, format!("line {}: expected two node ids", lineno + 2))),
        }
    }
    if let Some(m) = edges.filter(|&m| m != list.len()) {
        return Err(schema(path, format!("header announces {m} edges, file lists {}", list.len())));
    }
    let g = Graph::from_edges(n, list).map_err(|e| schema(path, e.to_string()))?;
    Ok((g, density))
}

/// Edge list: a `# nodes=… edges=…` header, then one `a b` line per edge
/// (`a < b`, lexicographic order).
pub fn save_graph(g: &Graph, path: &Path) -> Result<(), IoError> {
    write_atomic(path, encode(g, None).as_bytes())
}

/// Loads an edge list. Self-loops and duplicate edges are schema errors.
pub fn load_graph(path: &Path) -> Result<Graph, IoError> {
    let bytes = read_all(path)?;
    let text = String::from_utf8(bytes).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to() as u64,
        message: "edge list is not UTF-8".into(),
    })?;
    decode(path, &text).map(|(g, _)| g)
}

/// Edge list with the network's target density in the header.
pub fn save_network(net: &FunctionalNetwork, path: &Path) -> Result<(), IoError> {
    write_atomic(path, encode(net.graph(), Some(net.target_density())).as_bytes())
}

pub fn load_network(path: &Path) -> Result<FunctionalNetwork, IoError> {
    let text = String::from_utf8(read_all(path)?).map_err(|_| schema(path, "edge list is not UTF-8"))?;
    let (g, density) = decode(path, &text)?;
    let density = density.ok_or_else(|| schema(path, "header lacks `target_density`"))?;
    FunctionalNetwork::from_graph(g, density).map_err(|e| schema(path, e.to_string()))
}
