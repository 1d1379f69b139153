//! Downstream evaluation of frozen embeddings and direct-transfer reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::model::{embed_all, train, EgiModel, TrainConfig};
use crate::spectral::{ego_laplacians, egi_gap_repeated, mean_std, GapEstimate};
use crate::tensor::{Adam, ParamStore, Tape};

/// Structural-equivalence k-NN score: for every node whose class has
/// `c >= 2` members, the fraction of its `c - 1` nearest other rows
/// (Euclidean, ties by lower index) sharing its label, averaged over
/// those nodes.
pub fn knn_accuracy(emb: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    let n = emb.rows();
    if labels.len() != n {
        return Err(Error::Evaluation(format!(
            "{} labels for {n} embedding rows",
            labels.len()
        )));
    }
    let mut class_size: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *class_size.entry(l).or_default() += 1;
    }
    let x = emb.values();
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .filter_map(|v| {
            let c = class_size[&labels[v]];
            if c < 2 {
                return None;
            }
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&u| u != v)
                .map(|u| {
                    let d: f64 = x
                        .row(v)
                        .iter()
                        .zip(x.row(u))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d, u)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let hits = others[..c - 1]
                .iter()
                .filter(|&&(_, u)| labels[u] == labels[v])
                .count();
            Some(hits as f64 / (c - 1) as f64)
        })
        .collect();
    if scores.is_empty() {
        return Err(Error::Evaluation(
            "no class has two or more members, k-NN accuracy is undefined".into(),
        ));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub train_fraction: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 32,
            lr: 0.01,
            epochs: 300,
            train_fraction: 0.8,
        }
    }
}

/// Per-class shuffled split; each class keeps at least one node on both
/// sides.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(v);
    }
    if by_class.len() < 2 {
        return Err(Error::Evaluation("classification needs at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class {
        if members.len() < 2 {
            return Err(Error::Evaluation(format!(
                "class {class} has a single member and cannot be split"
            )));
        }
        members.shuffle(&mut rng);
        let cut = ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Dense class indices `0..C` in order of first appearance of the sorted
/// distinct labels.
fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let index: BTreeMap<usize, usize> = distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), distinct.len())
}

/// Test accuracy of one seeded split + one-hidden-layer perceptron trained
/// full-batch on the frozen embeddings.
pub fn mlp_run(emb: &FeatureMatrix, labels: &[usize], cfg: &MlpConfig, seed: u64) -> Result<f64> {
    if labels.len() != emb.rows() {
        return Err(Error::Evaluation(format!(
            "{} labels for {} embedding rows",
            labels.len(),
            emb.rows()
        )));
    }
    let (classes, count) = compact_labels(labels);
    let (train_idx, test_idx) = stratified_split(&classes, cfg.train_fraction, seed)?;
    let x = emb.values();
    let select = |idx: &[usize]| {
        let mut out = Array2::zeros((idx.len(), x.ncols()));
        for (r, &v) in idx.iter().enumerate() {
            out.row_mut(r).assign(&x.row(v));
        }
        out
    };
    let x_train = select(&train_idx);
    let y_train: Vec<usize> = train_idx.iter().map(|&v| classes[v]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6c_7000);
    let mut store = ParamStore::new();
    let w1 = store.add_glorot("mlp.w1", x.ncols(), cfg.hidden, &mut rng);
    let b1 = store.add_zeros("mlp.b1", 1, cfg.hidden);
    let w2 = store.add_glorot("mlp.w2", cfg.hidden, count, &mut rng);
    let b2 = store.add_zeros("mlp.b2", 1, count);
    let forward = |tape: &mut Tape, store: &ParamStore, input: Array2<f64>| -> Result<_> {
        let inp = tape.constant(input);
        let (w1, b1, w2, b2) = (
            tape.param(store, w1),
            tape.param(store, b1),
            tape.param(store, w2),
            tape.param(store, b2),
        );
        let h = tape.matmul(inp, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.relu(h);
        let o = tape.matmul(h, w2)?;
        tape.add_row(o, b2)
    };
    let mut adam = Adam::new(cfg.lr);
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let logits = forward(&mut tape, &store, x_train.clone())?;
        let loss = tape.softmax_cross_entropy(logits, &y_train)?;
        if !tape.scalar(loss)?.is_finite() {
            return Err(Error::NonFinite);
        }
        tape.backward(loss, &mut store)?;
        adam.step(&mut store);
    }
    let mut tape = Tape::new();
    let logits = forward(&mut tape, &store, select(&test_idx))?;
    let out = tape.value(logits);
    let correct = test_idx
        .iter()
        .enumerate()
        .filter(|&(r, &v)| {
            let row = out.row(r);
            let best = (0..count).fold(0, |b, j| if row[j] > row[b] { j } else { b });
            best == classes[v]
        })
        .count();
    Ok(correct as f64 / test_idx.len() as f64)
}

/// Mean and standard deviation of `runs` independent split + train runs
/// seeded `seed, seed + 1, ...`.
pub fn mlp_eval(emb: &FeatureMatrix, labels: &[usize], runs: usize, seed: u64) -> Result<(f64, f64)> {
    mlp_eval_with(emb, labels, runs, seed, &MlpConfig::default())
}

pub fn mlp_eval_with(
    emb: &FeatureMatrix,
    labels: &[usize],
    runs: usize,
    seed: u64,
    cfg: &MlpConfig,
) -> Result<(f64, f64)> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let accs: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map(|r| mlp_run(emb, labels, cfg, seed.wrapping_add(r)))
        .collect::<Result<_>>()?;
    Ok(mean_std(&accs))
}

/// A graph with its node features and ground-truth labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: Graph, features: FeatureMatrix, labels: Vec<usize>) -> Result<Self> {
        features.check_rows(&graph)?;
        if labels.len() != graph.node_count() {
            return Err(Error::MissingLabel(format!(
                "{} labels for {} nodes",
                labels.len(),
                graph.node_count()
            )));
        }
        Ok(Dataset {
            name: name.into(),
            graph,
            features,
            labels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    /// Deterministic structural-equivalence k-NN accuracy (one run).
    Knn,
    Mlp { runs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub train: TrainConfig,
    pub metric: Metric,
    pub eval_seed: u64,
    /// `None` skips the gap; `Some(0)` enumerates every ego pair,
    /// otherwise that many sampled pairs per repeat.
    pub gap_pairs: Option<usize>,
    pub gap_repeats: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub target: String,
    pub egi: Accuracy,
    pub untrained: Accuracy,
    pub gap: Option<GapEstimate>,
}

impl TargetRecord {
    pub fn gain(&self) -> f64 {
        self.egi.mean - self.untrained.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub source: String,
    pub feature_kind: String,
    pub k: usize,
    pub records: Vec<TargetRecord>,
    pub loss_trace: Vec<f64>,
}

impl TransferReport {
    pub fn mean_accuracy(&self) -> f64 {
        self.records.iter().map(|r| r.egi.mean).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_baseline(&self) -> f64 {
        self.records.iter().map(|r| r.untrained.mean).sum::<f64>() / self.records.len() as f64
    }

    /// Mean gap over the targets that carry one.
    pub fn mean_gap(&self) -> Option<f64> {
        let gaps: Vec<f64> = self.records.iter().filter_map(|r| r.gap.map(|g| g.value)).collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }
}

fn evaluate(emb: &FeatureMatrix, labels: &[usize], metric: Metric, seed: u64) -> Result<Accuracy> {
    match metric {
        Metric::Knn => Ok(Accuracy {
            mean: knn_accuracy(emb, labels)?,
            std: 0.0,
            runs: 1,
        }),
        Metric::Mlp { runs } => {
            let (mean, std) = mlp_eval(emb, labels, runs, seed)?;
            Ok(Accuracy { mean, std, runs })
        }
    }
}

/// Pretrains on `source`, then evaluates the frozen encoder (and the same
/// encoder at its initialization) on every target.
pub fn direct_transfer(source: &Dataset, targets: &[Dataset], cfg: &TransferConfig) -> Result<TransferReport> {
    let (model, outcome) = train(&source.graph, &source.features, &cfg.train)?;
    transfer_with_model(source, targets, cfg, &model, outcome.loss_trace)
}

/// As [`direct_transfer`] with an already trained model (e.g. a loaded
/// checkpoint).
pub fn transfer_with_model(
    source: &Dataset,
    targets: &[Dataset],
    cfg: &TransferConfig,
    model: &EgiModel,
    loss_trace: Vec<f64>,
) -> Result<TransferReport> {
    let dim = source.features.dim();
    for t in targets {
        if t.features.dim() != dim {
            return Err(Error::FeatureDim {
                expected: dim,
                got: t.features.dim(),
            });
        }
    }
    let baseline = EgiModel::new(dim, cfg.train.hidden_dim, cfg.train.k, cfg.train.seed)?;
    let source_laps = match cfg.gap_pairs {
        Some(_) => Some(ego_laplacians(&source.graph, cfg.train.k)?),
        None => None,
    };
    let records = targets
        .iter()
        .map(|t| {
            let trained = embed_all(&t.graph, &t.features, model)?;
            let untrained = embed_all(&t.graph, &t.features, &baseline)?;
            let gap = match (&source_laps, cfg.gap_pairs) {
                (Some(ls), Some(pairs)) => {
                    let lt = ego_laplacians(&t.graph, cfg.train.k)?;
                    Some(egi_gap_repeated(ls, &lt, cfg.train.k, pairs, cfg.eval_seed, cfg.gap_repeats)?)
                }
                _ => None,
            };
            Ok(TargetRecord {
                target: t.name.clone(),
                egi: evaluate(&trained, &t.labels, cfg.metric, cfg.eval_seed)?,
                untrained: evaluate(&untrained, &t.labels, cfg.metric, cfg.eval_seed)?,
                gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferReport {
        source: source.name.clone(),
        feature_kind: String::new(),
        k: cfg.train.k,
        records,
        loss_trace,
    })
}

pub const REPORT_HEADER: &str =
    "experiment,source,target,method,feature_kind,k,acc_mean,acc_std,runs,gap_mean,gap_std";

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

/// CSV rows (no header), two per target: the trained encoder and the
/// untrained baseline.
pub fn report_rows(experiment: &str, report: &TransferReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        for (method, acc) in [("egi", r.egi), ("untrained", r.untrained)] {
            writeln!(
                out,
                "{experiment},{},{},{method},{},{},{:.6},{:.6},{},{},{}",
                report.source,
                r.target,
                report.feature_kind,
                report.k,
                acc.mean,
                acc.std,
                acc.runs,
                fmt_opt(r.gap.map(|g| g.value)),
                fmt_opt(r.gap.map(|g| g.dispersion)),
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Population Pearson correlation; `None` when fewer than two points or
/// either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// `source,target,gap,gain` rows for every report record carrying a gap,
/// followed by a `correlation` line (`NA` when undefined).
pub fn gap_gain_table(reports: &[TransferReport]) -> String {
    let mut out = String::from("source,target,gap,gain\n");
    let (mut gaps, mut gains) = (Vec::new(), Vec::new());
    for rep in reports {
        for r in &rep.records {
            let Some(gap) = r.gap else { continue };
            writeln!(out, "{},{},{:.6},{:.6}", rep.source, r.target, gap.value, r.gain())
                .expect("writing to a String");
            gaps.push(gap.value);
            gains.push(r.gain());
        }
    }
    writeln!(out, "correlation,,,{}", fmt_opt(pearson(&gaps, &gains))).expect("writing to a String");
    out
}
