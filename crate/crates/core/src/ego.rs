//! k-hop ego-graphs: BFS hop partitions, typed edge sequences, canonical
//! within-hop ordering and neighbourhood padding.
//!
//! Nodes inside an ego-graph are addressed either as `(hop, index)` or by
//! a hop-major local index. Within each hop the real members come first,
//! followed by any isolated padding nodes.

use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Between hop `p - 1` and hop `p`.
    TypeA,
    /// Inside hop `p`.
    TypeB,
}

/// One ego edge. For type-a edges `src` indexes hop `hop - 1` and `dst`
/// indexes hop `hop`; for type-b edges both index hop `hop` and
/// `src < dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TypedEdge {
    pub hop: usize,
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgoGraph {
    center: usize,
    k: usize,
    directed: bool,
    hops: Vec<Vec<usize>>,
    padding: Vec<usize>,
    local_id: HashMap<usize, (usize, usize)>,
    edges: Vec<TypedEdge>,
}

impl EgoGraph {
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Whether the source graph was directed. Egos of undirected graphs
    /// have identical forward and reversed adjacency.
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Real members of each hop, `hops()[0] == [center]`.
    pub fn hops(&self) -> &[Vec<usize>] {
        &self.hops
    }

    /// Padding nodes appended to each hop.
    pub fn padding(&self) -> &[usize] {
        &self.padding
    }

    /// BFS-ordered typed edges: type-a by hop, then type-b by hop.
    pub fn edges(&self) -> &[TypedEdge] {
        &self.edges
    }

    pub fn type_a_edges(&self) -> impl Iterator<Item = &TypedEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::TypeA)
    }

    pub fn local_id(&self, original: usize) -> Option<(usize, usize)> {
        self.local_id.get(&original).copied()
    }

    /// Real plus padding node count of every hop.
    pub fn hop_sizes(&self) -> Vec<usize> {
        self.hops
            .iter()
            .zip(&self.padding)
            .map(|(h, p)| h.len() + p)
            .collect()
    }

    /// Start of every hop in the hop-major local numbering.
    pub fn hop_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.k + 2);
        let mut acc = 0;
        offsets.push(0);
        for s in self.hop_sizes() {
            acc += s;
            offsets.push(acc);
        }
        offsets
    }

    /// Total node count including padding.
    pub fn size(&self) -> usize {
        self.hop_sizes().iter().sum()
    }

    pub fn real_size(&self) -> usize {
        self.hops.iter().map(Vec::len).sum()
    }

    /// Local index of `(hop, index)`.
    pub fn local(&self, hop: usize, index: usize) -> usize {
        self.hop_offsets()[hop] + index
    }

    /// Whether local node `i` is a padding node.
    pub fn is_padding(&self, i: usize) -> bool {
        let offsets = self.hop_offsets();
        (0..=self.k).any(|p| {
            let real_end = offsets[p] + self.hops[p].len();
            i >= real_end && i < offsets[p + 1]
        })
    }

    /// Arcs of the reversed ego-graph as `(source, target)` local indices,
    /// without self-loops. For directed source graphs type-a edges point
    /// from the centre outwards; type-b edges, and every edge of an
    /// undirected ego, appear in both orientations.
    pub fn reversed_arcs(&self) -> Vec<(usize, usize)> {
        let offsets = self.hop_offsets();
        let mut arcs = Vec::with_capacity(self.edges.len() * 2);
        for e in &self.edges {
            let (a, b) = match e.kind {
                EdgeKind::TypeA => (offsets[e.hop - 1] + e.src, offsets[e.hop] + e.dst),
                EdgeKind::TypeB => (offsets[e.hop] + e.src, offsets[e.hop] + e.dst),
            };
            arcs.push((a, b));
            if e.kind == EdgeKind::TypeB || !self.directed {
                arcs.push((b, a));
            }
        }
        arcs
    }

    /// Arcs of the forward ego-graph (leaves towards the centre); the
    /// transpose of [`EgoGraph::reversed_arcs`].
    pub fn forward_arcs(&self) -> Vec<(usize, usize)> {
        self.reversed_arcs().into_iter().map(|(a, b)| (b, a)).collect()
    }

    /// Dense adjacency with self-loops on real nodes; `adj[[i, j]] = 1`
    /// for an arc `i -> j`.
    pub fn reversed_adjacency(&self) -> Array2<f64> {
        self.adjacency(self.reversed_arcs())
    }

    pub fn forward_adjacency(&self) -> Array2<f64> {
        self.adjacency(self.forward_arcs())
    }

    fn adjacency(&self, arcs: Vec<(usize, usize)>) -> Array2<f64> {
        let n = self.size();
        let mut adj = Array2::zeros((n, n));
        for i in 0..n {
            if !self.is_padding(i) {
                adj[[i, i]] = 1.0;
            }
        }
        for (a, b) in arcs {
            adj[[a, b]] = 1.0;
        }
        adj
    }

    /// Number of ego edges touching each real member, hop-major.
    fn ego_degrees(&self) -> Vec<Vec<usize>> {
        let mut deg: Vec<Vec<usize>> = self.hops.iter().map(|h| vec![0; h.len()]).collect();
        for e in &self.edges {
            match e.kind {
                EdgeKind::TypeA => {
                    deg[e.hop - 1][e.src] += 1;
                    deg[e.hop][e.dst] += 1;
                }
                EdgeKind::TypeB => {
                    deg[e.hop][e.src] += 1;
                    deg[e.hop][e.dst] += 1;
                }
            }
        }
        deg
    }

    /// Builds an ego from hop member lists, collecting induced edges between
    /// equal or adjacent hops.
    fn assemble(g: &Graph, center: usize, k: usize, hops: Vec<Vec<usize>>) -> Self {
        let directed = g.is_directed();
        let mut local_id = HashMap::new();
        for (p, members) in hops.iter().enumerate() {
            for (q, &v) in members.iter().enumerate() {
                local_id.insert(v, (p, q));
            }
        }
        let mut edges = Vec::new();
        for (p, members) in hops.iter().enumerate() {
            for (q, &u) in members.iter().enumerate() {
                for &w in g.adjacent(u) {
                    let Some(&(pw, qw)) = local_id.get(&w) else {
                        continue;
                    };
                    if p > 0 && pw == p - 1 {
                        edges.push(TypedEdge {
                            hop: p,
                            src: qw,
                            dst: q,
                            kind: EdgeKind::TypeA,
                        });
                    } else if pw == p && qw > q {
                        edges.push(TypedEdge {
                            hop: p,
                            src: q,
                            dst: qw,
                            kind: EdgeKind::TypeB,
                        });
                    }
                }
            }
        }
        let mut ego = EgoGraph {
            center,
            k,
            directed,
            padding: vec![0; hops.len()],
            hops,
            local_id,
            edges,
        };
        ego.sort_edges();
        ego
    }

    fn sort_edges(&mut self) {
        self.edges
            .sort_unstable_by_key(|e| (e.kind, e.hop, e.src, e.dst));
    }

    /// Reorders hop `p` by `order` (new position -> old index).
    fn permute_hops(&self, orders: &[Vec<usize>]) -> Self {
        let inverse: Vec<Vec<usize>> = orders
            .iter()
            .map(|order| {
                let mut inv = vec![0; order.len()];
                for (new, &old) in order.iter().enumerate() {
                    inv[old] = new;
                }
                inv
            })
            .collect();
        let hops: Vec<Vec<usize>> = orders
            .iter()
            .zip(&self.hops)
            .map(|(order, members)| order.iter().map(|&i| members[i]).collect())
            .collect();
        let mut local_id = HashMap::new();
        for (p, members) in hops.iter().enumerate() {
            for (q, &v) in members.iter().enumerate() {
                local_id.insert(v, (p, q));
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let src_hop = match e.kind {
                    EdgeKind::TypeA => e.hop - 1,
                    EdgeKind::TypeB => e.hop,
                };
                let (src, dst) = (inverse[src_hop][e.src], inverse[e.hop][e.dst]);
                let (src, dst) = match e.kind {
                    EdgeKind::TypeB if src > dst => (dst, src),
                    _ => (src, dst),
                };
                TypedEdge { src, dst, ..*e }
            })
            .collect();
        let mut ego = EgoGraph {
            center: self.center,
            k: self.k,
            directed: self.directed,
            hops,
            padding: self.padding.clone(),
            local_id,
            edges,
        };
        ego.sort_edges();
        ego
    }

    /// Within-hop shuffle, for invariance tests.
    pub fn shuffled(&self, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orders: Vec<Vec<usize>> = self
            .hops
            .iter()
            .map(|h| {
                let mut o: Vec<usize> = (0..h.len()).collect();
                o.shuffle(&mut rng);
                o
            })
            .collect();
        self.permute_hops(&orders)
    }
}

/// Extracts the k-hop ego-graph of `center`.
///
/// With `cap = Some(c)` each expanded node keeps at most `c` uniformly
/// sampled neighbours (training mode); edges that would then span more
/// than one hop are dropped. `cap = None` gives the exact ego-graph.
/// Hops are listed in discovery order; see [`canonical_order`].
pub fn extract_ego(
    g: &Graph,
    center: usize,
    k: usize,
    cap: Option<usize>,
    seed: u64,
) -> Result<EgoGraph> {
    if k == 0 {
        return Err(Error::InvalidParameter("ego-graph hop count must be at least 1".into()));
    }
    if center >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            node: center,
            node_count: g.node_count(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashMap::new();
    seen.insert(center, 0usize);
    let mut hops = vec![vec![center]];
    for p in 0..k {
        let mut next = Vec::new();
        for &u in &hops[p] {
            let neigh = g.adjacent(u);
            let mut visit = |w: usize| {
                if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(w) {
                    slot.insert(p + 1);
                    next.push(w);
                }
            };
            match cap {
                Some(c) if neigh.len() > c => {
                    let mut picked = index::sample(&mut rng, neigh.len(), c).into_vec();
                    picked.sort_unstable();
                    for i in picked {
                        visit(neigh[i]);
                    }
                }
                _ => neigh.iter().for_each(|&w| visit(w)),
            }
        }
        hops.push(next);
    }
    Ok(EgoGraph::assemble(g, center, k, hops))
}

/// Sorts each hop by (ego degree descending, original id ascending) and
/// regenerates the edge sequence. Idempotent and independent of the
/// input's within-hop order.
pub fn canonical_order(ego: &EgoGraph) -> EgoGraph {
    let deg = ego.ego_degrees();
    let orders: Vec<Vec<usize>> = ego
        .hops
        .iter()
        .enumerate()
        .map(|(p, members)| {
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.sort_by_key(|&i| (std::cmp::Reverse(deg[p][i]), members[i]));
            order
        })
        .collect();
    ego.permute_hops(&orders)
}

/// Pads both ego-graphs with isolated nodes so every hop has the larger of
/// the two sizes.
pub fn pad_pair(a: &EgoGraph, b: &EgoGraph) -> Result<(EgoGraph, EgoGraph)> {
    if a.k != b.k {
        return Err(Error::HopMismatch(a.k, b.k));
    }
    let (sa, sb) = (a.hop_sizes(), b.hop_sizes());
    let mut pa = a.clone();
    let mut pb = b.clone();
    for p in 0..=a.k {
        let target = sa[p].max(sb[p]);
        pa.padding[p] += target - sa[p];
        pb.padding[p] += target - sb[p];
    }
    Ok((pa, pb))
}

/// An ego-graph with its members' features in hop-major order; padding
/// rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoSample {
    pub ego: EgoGraph,
    pub features: Array2<f64>,
}

impl EgoSample {
    pub fn new(ego: EgoGraph, feats: &FeatureMatrix) -> Self {
        let mut features = Array2::zeros((ego.size(), feats.dim()));
        let offsets = ego.hop_offsets();
        for (p, members) in ego.hops.iter().enumerate() {
            for (q, &v) in members.iter().enumerate() {
                features.row_mut(offsets[p] + q).assign(&feats.row(v));
            }
        }
        EgoSample { ego, features }
    }
}
