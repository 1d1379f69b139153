//! The EGI model: a GIN centre-node encoder, a discriminator that scores
//! ego-graph edges against a centre embedding, the per-edge JSD loss with
//! in-batch negatives, and the training loop.
//!
//! Egos in a batch are stacked into one disjoint union. Rows are ordered
//! ego by ego and hop-major inside each ego, so the nodes of hops
//! `0..=p` of every ego form a prefix of that ego's block.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ego::{canonical_order, extract_ego, EgoSample};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::tensor::{init_rng, Adam, ParamId, ParamStore, SparseMatrix, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Neighbours sampled per node while building training egos.
    pub neighbor_cap: usize,
    pub seed: u64,
    /// Stop once the epoch loss has improved by less than `min_delta` for
    /// `patience` epochs in a row.
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 2,
            hidden_dim: 32,
            lr: 0.01,
            batch_size: 32,
            epochs: 100,
            neighbor_cap: 10,
            seed: 0,
            patience: 5,
            min_delta: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("hidden_dim", self.hidden_dim),
            ("batch_size", self.batch_size),
            ("neighbor_cap", self.neighbor_cap),
            ("patience", self.patience),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidParameter(
                "batch_size must be at least 2 for in-batch negatives".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("lr {} must be positive", self.lr)));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::InvalidParameter("min_delta must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GinLayer {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub eps: ParamId,
}

/// One GIN layer per hop. Layer `l` updates only nodes within `k - l`
/// hops of the centre; the centre's final row is the embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: Vec<GinLayer>,
}

/// Per-hop propagation weights and the edge scoring function
/// `t = U^T relu(W^T [h || x || z] + b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscriminatorParams {
    pub hop_weights: Vec<ParamId>,
    /// Maps input features into the hidden space for hops beyond the first,
    /// where the incoming message is already a hidden vector.
    pub feature_proj: Option<ParamId>,
    pub w: ParamId,
    pub b: ParamId,
    pub u: ParamId,
}

/// Encoder and discriminator sharing one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct EgiModel {
    pub store: ParamStore,
    pub encoder: EncoderParams,
    pub disc: DiscriminatorParams,
}

impl EgiModel {
    /// Glorot-initialized weights, zero biases and zero GIN epsilons.
    pub fn new(input_dim: usize, hidden_dim: usize, k: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "input_dim, hidden_dim and k must all be positive".into(),
            ));
        }
        let mut rng = init_rng(seed);
        let mut store = ParamStore::new();
        let mut layers = Vec::with_capacity(k);
        for l in 0..k {
            let fan_in = if l == 0 { input_dim } else { hidden_dim };
            layers.push(GinLayer {
                w1: store.add_glorot(format!("enc.{l}.w1"), fan_in, hidden_dim, &mut rng),
                b1: store.add_zeros(format!("enc.{l}.b1"), 1, hidden_dim),
                w2: store.add_glorot(format!("enc.{l}.w2"), hidden_dim, hidden_dim, &mut rng),
                b2: store.add_zeros(format!("enc.{l}.b2"), 1, hidden_dim),
                eps: store.add_zeros(format!("enc.{l}.eps"), 1, 1),
            });
        }
        let hop_weights = (1..=k)
            .map(|p| {
                let fan_in = if p == 1 { input_dim } else { hidden_dim };
                store.add_glorot(format!("disc.hop{p}"), fan_in, hidden_dim, &mut rng)
            })
            .collect();
        let feature_proj =
            (k >= 2).then(|| store.add_glorot("disc.proj", input_dim, hidden_dim, &mut rng));
        let width = 2 * hidden_dim + input_dim;
        let disc = DiscriminatorParams {
            hop_weights,
            feature_proj,
            w: store.add_glorot("disc.w", width, hidden_dim, &mut rng),
            b: store.add_zeros("disc.b", 1, hidden_dim),
            u: store.add_glorot("disc.u", hidden_dim, 1, &mut rng),
        };
        Ok(EgiModel {
            store,
            encoder: EncoderParams {
                input_dim,
                hidden_dim,
                layers,
            },
            disc,
        })
    }

    pub fn k(&self) -> usize {
        self.encoder.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim
    }
}

/// A batch of canonical egos stacked into one disjoint union.
#[derive(Debug)]
pub struct EgoBatch {
    k: usize,
    features: Array2<f64>,
    /// Per ego: first row of its block and the block-relative hop offsets.
    starts: Vec<usize>,
    hop_offsets: Vec<Vec<usize>>,
    /// Per ego: incoming `(src, dst)` arcs of the forward ego-graph, local.
    arcs: Vec<Vec<(usize, usize)>>,
    /// Per hop `p` (index `p - 1`): type-a edges as (ego, src row, dst row),
    /// rows local to the ego's block.
    hop_edges: Vec<Vec<(usize, usize, usize)>>,
}

impl EgoBatch {
    pub fn new(samples: &[EgoSample], input_dim: usize, k: usize) -> Result<Self> {
        let mut starts = Vec::with_capacity(samples.len());
        let mut hop_offsets = Vec::with_capacity(samples.len());
        let mut arcs = Vec::with_capacity(samples.len());
        let mut hop_edges = vec![Vec::new(); k];
        let mut blocks = Vec::with_capacity(samples.len());
        let mut total = 0;
        for (b, s) in samples.iter().enumerate() {
            if s.ego.k() != k {
                return Err(Error::HopMismatch(s.ego.k(), k));
            }
            if s.features.ncols() != input_dim {
                return Err(Error::FeatureDim {
                    expected: input_dim,
                    got: s.features.ncols(),
                });
            }
            let ego = canonical_order(&s.ego);
            let sample = if ego == s.ego {
                s.features.clone()
            } else {
                reorder_features(s, &ego)
            };
            let offsets = ego.hop_offsets();
            for e in ego.type_a_edges() {
                hop_edges[e.hop - 1].push((b, offsets[e.hop - 1] + e.src, offsets[e.hop] + e.dst));
            }
            starts.push(total);
            total += ego.size();
            arcs.push(ego.forward_arcs());
            hop_offsets.push(offsets);
            blocks.push(sample);
        }
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        let features = if views.is_empty() {
            Array2::zeros((0, input_dim))
        } else {
            ndarray::concatenate(ndarray::Axis(0), &views).expect("equal widths")
        };
        Ok(EgoBatch {
            k,
            features,
            starts,
            hop_offsets,
            arcs,
            hop_edges,
        })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn type_a_count(&self) -> usize {
        self.hop_edges.iter().map(Vec::len).sum()
    }

    /// Number of leading rows of ego `b` that lie within `depth` hops.
    fn prefix(&self, b: usize, depth: usize) -> usize {
        self.hop_offsets[b][depth + 1]
    }

    /// Global row of local row `r` of ego `b` in the stacked feature matrix.
    fn row(&self, b: usize, r: usize) -> usize {
        self.starts[b] + r
    }
}

/// Features of `s` rearranged into the row order of `canon` (the same ego,
/// canonically ordered).
fn reorder_features(s: &EgoSample, canon: &crate::ego::EgoGraph) -> Array2<f64> {
    let mut out = Array2::zeros((canon.size(), s.features.ncols()));
    let src_offsets = s.ego.hop_offsets();
    let dst_offsets = canon.hop_offsets();
    for (p, members) in canon.hops().iter().enumerate() {
        for (q, &v) in members.iter().enumerate() {
            let (sp, sq) = s.ego.local_id(v).expect("same ego");
            out.row_mut(dst_offsets[p] + q)
                .assign(&s.features.row(src_offsets[sp] + sq));
        }
    }
    out
}

/// Centre embeddings of every ego in the batch, one row each.
pub fn encode_batch(tape: &mut Tape, model: &EgiModel, batch: &EgoBatch) -> Result<Var> {
    let k = batch.k;
    if model.k() != k {
        return Err(Error::HopMismatch(model.k(), k));
    }
    if batch.features.ncols() != model.input_dim() {
        return Err(Error::FeatureDim {
            expected: model.input_dim(),
            got: batch.features.ncols(),
        });
    }
    let one = tape.constant(Array2::ones((1, 1)));
    let mut h = tape.constant(batch.features.clone());
    // rows currently held in `h`: per ego, the first `held[b]` local rows
    let mut held: Vec<usize> = (0..batch.len()).map(|b| batch.prefix(b, k)).collect();
    for (l, layer) in model.encoder.layers.iter().enumerate() {
        let depth = k - (l + 1);
        let mut held_start = Vec::with_capacity(batch.len());
        let mut acc = 0;
        for &n in &held {
            held_start.push(acc);
            acc += n;
        }
        let mut self_rows = Vec::new();
        let mut triplets = Vec::new();
        let mut next = Vec::with_capacity(batch.len());
        for b in 0..batch.len() {
            let keep = batch.prefix(b, depth);
            let out_start = self_rows.len();
            self_rows.extend((0..keep).map(|r| held_start[b] + r));
            for &(src, dst) in &batch.arcs[b] {
                if dst < keep && src < held[b] {
                    triplets.push((out_start + dst, held_start[b] + src, 1.0));
                }
            }
            next.push(keep);
        }
        let agg = SparseMatrix::from_triplets(self_rows.len(), acc, triplets)?;
        let neighbours = tape.spmm(agg, h)?;
        let own = tape.gather_rows(h, &self_rows)?;
        let eps = tape.param(&model.store, layer.eps);
        let one_plus_eps = tape.add(eps, one)?;
        let own = tape.scale_by(own, one_plus_eps)?;
        let pre = tape.add(own, neighbours)?;
        let w1 = tape.param(&model.store, layer.w1);
        let b1 = tape.param(&model.store, layer.b1);
        let w2 = tape.param(&model.store, layer.w2);
        let b2 = tape.param(&model.store, layer.b2);
        let x = tape.matmul(pre, w1)?;
        let x = tape.add_row(x, b1)?;
        let x = tape.relu(x);
        let x = tape.matmul(x, w2)?;
        h = tape.add_row(x, b2)?;
        if l + 1 < k {
            h = tape.relu(h);
        }
        held = next;
    }
    Ok(h)
}

/// Hidden representation of the source side of every type-a edge, one
/// tape node per hop (rows in the batch's edge order for that hop).
pub fn encode_neighbors(tape: &mut Tape, model: &EgiModel, batch: &EgoBatch) -> Result<Vec<Var>> {
    let k = batch.k;
    let x_all = tape.constant(batch.features.clone());
    let mut out: Vec<Var> = Vec::with_capacity(k);
    for p in 1..=k {
        let edges = &batch.hop_edges[p - 1];
        let dst_rows: Vec<usize> = edges.iter().map(|&(b, _, d)| batch.row(b, d)).collect();
        let x_dst = tape.gather_rows(x_all, &dst_rows)?;
        let message = if p == 1 {
            let src_rows: Vec<usize> = edges.iter().map(|&(b, s, _)| batch.row(b, s)).collect();
            let m = tape.gather_rows(x_all, &src_rows)?;
            tape.add(m, x_dst)?
        } else {
            // mean of the h-values on edges entering each source node
            let prev = &batch.hop_edges[p - 2];
            let mut incoming: std::collections::HashMap<(usize, usize), Vec<usize>> =
                std::collections::HashMap::new();
            for (i, &(b, _, d)) in prev.iter().enumerate() {
                incoming.entry((b, d)).or_default().push(i);
            }
            let mut triplets = Vec::new();
            for (e, &(b, s, _)) in edges.iter().enumerate() {
                if let Some(list) = incoming.get(&(b, s)) {
                    let w = 1.0 / list.len() as f64;
                    triplets.extend(list.iter().map(|&i| (e, i, w)));
                }
            }
            let mean = SparseMatrix::from_triplets(edges.len(), prev.len(), triplets)?;
            let m = tape.spmm(mean, out[p - 2])?;
            let proj_id = model
                .disc
                .feature_proj
                .expect("projection exists for k >= 2");
            let proj = tape.param(&model.store, proj_id);
            let x = tape.matmul(x_dst, proj)?;
            tape.add(m, x)?
        };
        let w = tape.param(&model.store, model.disc.hop_weights[p - 1]);
        let h = tape.matmul(message, w)?;
        out.push(tape.relu(h));
    }
    Ok(out)
}

/// Pre-activation scores `U^T relu(W^T [h || x || z] + b)`, one per row.
pub fn edge_scores(tape: &mut Tape, model: &EgiModel, h: Var, x: Var, z: Var) -> Result<Var> {
    let cat = tape.concat_cols(&[h, x, z])?;
    let w = tape.param(&model.store, model.disc.w);
    let b = tape.param(&model.store, model.disc.b);
    let u = tape.param(&model.store, model.disc.u);
    let pre = tape.matmul(cat, w)?;
    let pre = tape.add_row(pre, b)?;
    let act = tape.relu(pre);
    tape.matmul(act, u)
}

/// A uniformly random permutation without fixed points, found by
/// resampling.
pub fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "in-batch negatives need at least 2 samples, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Mean per-edge JSD loss `softplus(-t_pos) + softplus(t_neg)` over every
/// type-a edge of the batch. Negatives pair each ego with the embedding of
/// another batch member chosen by a seeded derangement.
pub fn egi_loss(tape: &mut Tape, model: &EgiModel, batch: &EgoBatch, seed: u64) -> Result<Var> {
    let perm = derangement(batch.len(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    let edge_count = batch.type_a_count();
    if edge_count == 0 {
        return Err(Error::InvalidParameter(
            "batch has no cross-hop edges to score".into(),
        ));
    }
    let z = encode_batch(tape, model, batch)?;
    let hs = encode_neighbors(tape, model, batch)?;
    let x_all = tape.constant(batch.features.clone());
    let mut total: Option<Var> = None;
    for (p, &h) in hs.iter().enumerate() {
        let edges = &batch.hop_edges[p];
        if edges.is_empty() {
            continue;
        }
        let dst_rows: Vec<usize> = edges.iter().map(|&(b, _, d)| batch.row(b, d)).collect();
        let x = tape.gather_rows(x_all, &dst_rows)?;
        let pos_idx: Vec<usize> = edges.iter().map(|&(b, _, _)| b).collect();
        let neg_idx: Vec<usize> = pos_idx.iter().map(|&b| perm[b]).collect();
        let z_pos = tape.gather_rows(z, &pos_idx)?;
        let z_neg = tape.gather_rows(z, &neg_idx)?;
        let t_pos = edge_scores(tape, model, h, x, z_pos)?;
        let t_neg = edge_scores(tape, model, h, x, z_neg)?;
        let neg_t_pos = tape.scale(t_pos, -1.0);
        let lp = tape.softplus(neg_t_pos);
        let ln = tape.softplus(t_neg);
        let lp = tape.sum_all(lp);
        let ln = tape.sum_all(ln);
        let hop_total = tape.add(lp, ln)?;
        total = Some(match total {
            Some(t) => tape.add(t, hop_total)?,
            None => hop_total,
        });
    }
    let total = total.expect("at least one hop has edges");
    Ok(tape.scale(total, 1.0 / edge_count as f64))
}

/// Forward + backward on one batch; returns the loss value. Gradients are
/// accumulated into the model's store.
pub fn loss_and_grad(model: &mut EgiModel, batch: &EgoBatch, seed: u64) -> Result<f64> {
    let mut tape = Tape::new();
    let loss = egi_loss(&mut tape, model, batch, seed)?;
    let value = tape.scalar(loss)?;
    tape.backward(loss, &mut model.store)?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Mean batch loss of every completed epoch.
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

/// Splits shuffled centres into batches of `size`; a trailing singleton is
/// merged into the previous batch because it has no negatives of its own.
fn make_batches(order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().map_or(false, |b| b.len() == 1) {
        let last = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(last);
    }
    batches
}

/// Pretrains a fresh model on `g`.
pub fn train(g: &Graph, feats: &FeatureMatrix, cfg: &TrainConfig) -> Result<(EgiModel, TrainOutcome)> {
    cfg.validate()?;
    let mut model = EgiModel::new(feats.dim(), cfg.hidden_dim, cfg.k, cfg.seed)?;
    let outcome = train_model(&mut model, g, feats, cfg)?;
    Ok((model, outcome))
}

/// Continues training `model` in place.
pub fn train_model(
    model: &mut EgiModel,
    g: &Graph,
    feats: &FeatureMatrix,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    feats.check_rows(g)?;
    if feats.dim() != model.input_dim() {
        return Err(Error::FeatureDim {
            expected: model.input_dim(),
            got: feats.dim(),
        });
    }
    if model.k() != cfg.k {
        return Err(Error::HopMismatch(model.k(), cfg.k));
    }
    if g.node_count() < 2 {
        return Err(Error::InvalidParameter("training needs at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7a11_u64.rotate_left(40));
    let mut adam = Adam::new(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut stale = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for centers in make_batches(&order, cfg.batch_size) {
            let samples = centers
                .iter()
                .map(|&c| {
                    let ego = extract_ego(g, c, cfg.k, Some(cfg.neighbor_cap), rng.gen())?;
                    Ok(EgoSample::new(canonical_order(&ego), feats))
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = EgoBatch::new(&samples, model.input_dim(), cfg.k)?;
            let neg_seed = rng.gen();
            if batch.type_a_count() == 0 {
                continue;
            }
            losses.push(loss_and_grad(model, &batch, neg_seed)?);
            adam.step(&mut model.store);
        }
        if losses.is_empty() {
            return Err(Error::InvalidParameter("graph has no edges to train on".into()));
        }
        let epoch_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if let Some(&prev) = trace.last() {
            if prev - epoch_loss < cfg.min_delta {
                stale += 1;
            } else {
                stale = 0;
            }
        }
        trace.push(epoch_loss);
        if stale >= cfg.patience {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome {
        loss_trace: trace,
        converged,
    })
}

const EMBED_CHUNK: usize = 64;

/// Centre embedding of every node's exact `k`-hop ego-graph.
pub fn embed_all(g: &Graph, feats: &FeatureMatrix, model: &EgiModel) -> Result<FeatureMatrix> {
    feats.check_rows(g)?;
    if feats.dim() != model.input_dim() {
        return Err(Error::FeatureDim {
            expected: model.input_dim(),
            got: feats.dim(),
        });
    }
    let k = model.k();
    let nodes: Vec<usize> = (0..g.node_count()).collect();
    let chunks: Vec<Array2<f64>> = nodes
        .par_chunks(EMBED_CHUNK)
        .map(|chunk| {
            let samples = chunk
                .iter()
                .map(|&c| {
                    let ego = extract_ego(g, c, k, None, 0)?;
                    Ok(EgoSample::new(canonical_order(&ego), feats))
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = EgoBatch::new(&samples, model.input_dim(), k)?;
            let mut tape = Tape::new();
            let z = encode_batch(&mut tape, model, &batch)?;
            Ok(tape.value(z).clone())
        })
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((g.node_count(), model.hidden_dim()));
    let mut row = 0;
    for c in chunks {
        for r in c.rows() {
            out.row_mut(row).assign(&r);
            row += 1;
        }
    }
    FeatureMatrix::new(out)
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub input_dim: usize,
    /// Free-form description of the training data (graph and features).
    pub source: String,
    pub config_hash: String,
    pub loss_trace: Vec<f64>,
    pub params: Vec<Tensor>,
}

/// Hex SHA-256 of any serializable configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("configs serialize");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn new(model: &EgiModel, config: &TrainConfig, source: &str, loss_trace: &[f64]) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            input_dim: model.input_dim(),
            source: source.to_string(),
            config_hash: Self::hash_for(config, model.input_dim(), source),
            loss_trace: loss_trace.to_vec(),
            params: model.store.tensors(),
        }
    }

    /// The hash a checkpoint trained with these settings carries.
    pub fn hash_for(config: &TrainConfig, input_dim: usize, source: &str) -> String {
        config_hash(&(config, input_dim, source))
    }

    /// Rebuilds the model, checking every tensor against the architecture.
    pub fn model(&self) -> Result<EgiModel> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let mut model = EgiModel::new(self.input_dim, self.config.hidden_dim, self.config.k, 0)?;
        let loaded = ParamStore::from_tensors(&self.params)?;
        if loaded.len() != model.store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.store.len(),
                loaded.len()
            )));
        }
        for (a, b) in model.store.ids().zip(loaded.ids()) {
            if model.store.name(a) != loaded.name(b)
                || model.store.value(a).dim() != loaded.value(b).dim()
            {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    loaded.name(b),
                    loaded.value(b).dim(),
                    model.store.name(a),
                    model.store.value(a).dim()
                )));
            }
        }
        model.store = loaded;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
