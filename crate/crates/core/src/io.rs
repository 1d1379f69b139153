//! Text formats: whitespace-separated edge lists and `node label` files.
//!
//! Edge lists hold one `u v` pair per line; lines starting with `#` and
//! blank lines are skipped. Label files hold one `node label` pair per
//! line with an optional header line (detected by a non-numeric first
//! token). Arbitrary integer ids are remapped to dense `0..n` in ascending
//! order of the original id; [`IdMap`] keeps the mapping.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Dense id → original id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    original: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl IdMap {
    pub fn from_ids(ids: impl IntoIterator<Item = u64>) -> Self {
        let original: Vec<u64> = ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = original.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        IdMap { original, index }
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn dense(&self, original: u64) -> Option<usize> {
        self.index.get(&original).copied()
    }

    pub fn original(&self, dense: usize) -> u64 {
        self.original[dense]
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_id(path: &Path, line: usize, token: &str) -> Result<u64> {
    token.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected a non-negative integer node id, found {token:?}"),
    })
}

/// Raw `(u, v)` pairs from an edge-list file, with original ids.
pub fn read_edge_pairs(path: &Path) -> Result<Vec<(u64, u64)>> {
    let text = read_to_string(path)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(u), Some(v)) = (tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected two node ids".into(),
            });
        };
        pairs.push((parse_id(path, i + 1, u)?, parse_id(path, i + 1, v)?));
    }
    Ok(pairs)
}

/// Reads an undirected (or directed) edge list, remapping ids densely.
pub fn read_edge_list(path: &Path, directed: bool) -> Result<(Graph, IdMap)> {
    let pairs = read_edge_pairs(path)?;
    let ids = IdMap::from_ids(pairs.iter().flat_map(|&(u, v)| [u, v]));
    let dense: Vec<_> = pairs
        .iter()
        .map(|&(u, v)| (ids.index[&u], ids.index[&v]))
        .collect();
    if dense.is_empty() {
        return Err(Error::EmptyEdgeList);
    }
    let g = Graph::with_node_count(ids.len(), &dense, directed)?;
    Ok((g, ids))
}

/// `(node, label)` pairs from a label file.
pub fn read_label_pairs(path: &Path) -> Result<Vec<(u64, usize)>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(node), Some(label)) = (tokens.next(), tokens.next()) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected `node label`".into(),
            });
        };
        if first && node.parse::<u64>().is_err() {
            first = false;
            continue;
        }
        first = false;
        let node = parse_id(path, i + 1, node)?;
        let label = label.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected an integer label, found {label:?}"),
        })?;
        out.push((node, label));
    }
    Ok(out)
}

/// Loads an undirected labeled network such as the airport graphs.
///
/// Nodes present in either file are kept; every node must carry a label.
pub fn load_labeled_graph(edges_path: &Path, labels_path: &Path) -> Result<(Graph, IdMap)> {
    let pairs = read_edge_pairs(edges_path)?;
    if pairs.is_empty() {
        return Err(Error::EmptyEdgeList);
    }
    let labels = read_label_pairs(labels_path)?;
    let ids = IdMap::from_ids(
        pairs
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .chain(labels.iter().map(|&(n, _)| n)),
    );
    let dense: Vec<_> = pairs
        .iter()
        .map(|&(u, v)| (ids.index[&u], ids.index[&v]))
        .collect();
    let mut per_node = vec![None; ids.len()];
    for (node, label) in labels {
        per_node[ids.index[&node]] = Some(label);
    }
    let labels = per_node
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| Error::MissingLabel(ids.original(v).to_string())))
        .collect::<Result<Vec<_>>>()?;
    let g = Graph::with_node_count(ids.len(), &dense, false)?.with_labels(labels)?;
    Ok((g, ids))
}

/// Writes each undirected edge once (`u < v`), or every arc for directed
/// graphs.
pub fn write_edge_list(g: &Graph, path: &Path) -> Result<()> {
    write_edge_list_with_comments(g, path, &[])
}

/// As [`write_edge_list`], with extra `# ` comment lines up front.
pub fn write_edge_list_with_comments(g: &Graph, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = Vec::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    writeln!(out, "# nodes {} edges {}", g.node_count(), g.edge_count()).unwrap();
    for &(u, v) in g.edges() {
        if g.is_directed() || u < v {
            writeln!(out, "{u} {v}").unwrap();
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remaps_sparse_ids_and_skips_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edgelist");
        fs::write(&path, "# comment\n10 20\n\n20 35\n10 20\n").unwrap();
        let (g, ids) = read_edge_list(&path, false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(ids.dense(35), Some(2));
        assert_eq!(ids.original(1), 20);
    }

    #[test]
    fn labels_with_header_and_missing_label() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("e");
        let labels = dir.path().join("l");
        fs::write(&edges, "1 2\n2 3\n").unwrap();
        fs::write(&labels, "node label\n1 0\n2 3\n3 1\n").unwrap();
        let (g, _) = load_labeled_graph(&edges, &labels).unwrap();
        assert_eq!(g.labels(), Some(&[0, 3, 1][..]));

        fs::write(&labels, "1 0\n3 1\n").unwrap();
        let err = load_labeled_graph(&edges, &labels).unwrap_err();
        assert!(matches!(err, Error::MissingLabel(ref n) if n == "2"), "{err}");
    }

    #[test]
    fn bad_token_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g");
        fs::write(&path, "0 1\n1 x\n").unwrap();
        match read_edge_list(&path, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_read_preserves_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g");
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (2, 0), (2, 3)], false).unwrap();
        write_edge_list(&g, &path).unwrap();
        let (back, _) = read_edge_list(&path, false).unwrap();
        assert_eq!(back, g);
    }
}
