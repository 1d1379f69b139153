//! Immutable graph container and per-node feature matrices.
//!
//! Node ids are dense (`0..node_count`). Edges are kept sorted by
//! `(source, target)`; undirected graphs store both orientations of every
//! edge. Self-loops are never stored.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    directed: bool,
    edges: Vec<(usize, usize)>,
    /// CSR offsets into `edges` by source node.
    offsets: Vec<usize>,
    /// Union of in- and out-neighbours, sorted; equals the out-neighbours
    /// for undirected graphs.
    adjacent: Vec<Vec<usize>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from `(source, target)` pairs. Duplicates and
    /// self-loops are dropped; undirected input is symmetrized.
    pub fn from_edge_list(pairs: &[(usize, usize)], directed: bool) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyEdgeList);
        }
        let node_count = pairs.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) + 1;
        Self::with_node_count(node_count, pairs, directed)
    }

    /// Like [`Graph::from_edge_list`] but with an explicit node count, so
    /// isolated trailing nodes survive.
    pub fn with_node_count(
        node_count: usize,
        pairs: &[(usize, usize)],
        directed: bool,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len() * if directed { 1 } else { 2 });
        for &(u, v) in pairs {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if u == v {
                continue;
            }
            edges.push((u, v));
            if !directed {
                edges.push((v, u));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut offsets = vec![0; node_count + 1];
        for &(u, _) in &edges {
            offsets[u + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }

        let mut adjacent = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adjacent[u].push(v);
            if directed {
                adjacent[v].push(u);
            }
        }
        if directed {
            for list in &mut adjacent {
                list.sort_unstable();
                list.dedup();
            }
        }

        Ok(Graph {
            node_count,
            directed,
            edges,
            offsets,
            adjacent,
            labels: None,
        })
    }

    /// Attaches one class label per node.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.node_count {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.node_count
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Stored edge records, sorted by `(source, target)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of undirected edges (each symmetric pair counted once) for
    /// undirected graphs; number of arcs for directed graphs.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.edges.len()
        } else {
            self.edges.len() / 2
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Out-neighbours of `v` (all neighbours for undirected graphs), ascending.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[self.offsets[v]..self.offsets[v + 1]]
            .iter()
            .map(|&(_, t)| t)
    }

    /// Neighbours ignoring direction.
    pub fn adjacent(&self, v: usize) -> &[usize] {
        &self.adjacent[v]
    }

    /// Out-degree for directed graphs, degree for undirected graphs.
    pub fn degree(&self, v: usize) -> Result<usize> {
        if v >= self.node_count {
            return Err(Error::NodeOutOfRange {
                node: v,
                node_count: self.node_count,
            });
        }
        Ok(self.offsets[v + 1] - self.offsets[v])
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count)
            .map(|v| self.offsets[v + 1] - self.offsets[v])
            .collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count
            && self.edges[self.offsets[u]..self.offsets[u + 1]]
                .binary_search(&(u, v))
                .is_ok()
    }

    /// Returns a copy with node `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.node_count {
            return Err(Error::InvalidParameter(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.node_count
            )));
        }
        let pairs: Vec<_> = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut g = Graph::with_node_count(self.node_count, &pairs, self.directed)?;
        if let Some(labels) = &self.labels {
            let mut relabeled = vec![0; self.node_count];
            for (v, &l) in labels.iter().enumerate() {
                relabeled[perm[v]] = l;
            }
            g.labels = Some(relabeled);
        }
        Ok(g)
    }
}

/// Row-major per-node feature matrix; row `v` belongs to node `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(FeatureMatrix { values })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        FeatureMatrix {
            values: Array2::zeros((rows, dim)),
        }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, r: usize) -> ArrayView1<'_, f64> {
        self.values.row(r)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Checks that this matrix annotates `g`.
    pub fn check_rows(&self, g: &Graph) -> Result<()> {
        if self.rows() != g.node_count() {
            return Err(Error::InvalidParameter(format!(
                "feature matrix has {} rows for a graph with {} nodes",
                self.rows(),
                g.node_count()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_graph_is_symmetrized() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2)], false).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert_eq!(g.degree(1).unwrap(), 2);
    }

    #[test]
    fn duplicates_and_self_loops_dropped() {
        let g = Graph::from_edge_list(&[(0, 1), (0, 1), (1, 1)], true).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.degree(0).unwrap(), 1);
        assert_eq!(g.degree(1).unwrap(), 0);
        assert_eq!(g.adjacent(1), &[0]);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            Graph::from_edge_list(&[], false),
            Err(Error::EmptyEdgeList)
        ));
    }

    #[test]
    fn star_center_degree() {
        let g = Graph::from_edge_list(&[(0, 1), (0, 2), (0, 3), (0, 4)], false).unwrap();
        assert_eq!(g.degree(0).unwrap(), 4);
        assert!(matches!(
            g.degree(5),
            Err(Error::NodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn degree_matches_adjacency_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20;
        let mut adj = vec![vec![0usize; n]; n];
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < 0.3 {
                    adj[u][v] = 1;
                    adj[v][u] = 1;
                    pairs.push((u, v));
                }
            }
        }
        // keep node 19 in range even if isolated
        let g = Graph::with_node_count(n, &pairs, false).unwrap();
        for v in 0..n {
            let row_sum: usize = adj[v].iter().sum();
            assert_eq!(g.degree(v).unwrap(), row_sum);
        }
        let total: usize = g.degrees().iter().sum();
        assert_eq!(total, 2 * g.edge_count());
    }

    #[test]
    fn construction_order_does_not_matter() {
        let a = Graph::from_edge_list(&[(2, 0), (0, 1), (3, 1)], false).unwrap();
        let b = Graph::from_edge_list(&[(1, 3), (1, 0), (0, 2)], false).unwrap();
        assert_eq!(a, b);
    }
}
