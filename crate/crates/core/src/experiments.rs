//! End-to-end experiment pipelines: the synthetic forest-fire / Barabási
//! study and the airport role-identification study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{direct_transfer, transfer_with_model, Dataset, Metric, TransferConfig, TransferReport};
use crate::features::FeatureKind;
use crate::generators::{generate_suite, GenSpec};
use crate::graph::Graph;
use crate::io::load_labeled_graph;
use crate::model::{EgiModel, TrainConfig};
use crate::spectral::{ego_laplacians, gap_full_precomputed, egi_gap_repeated, mean_std};
use crate::wl::wl_labels;

/// Two graph families of equal size. The first graph of each family is the
/// pretraining source; the remaining forest-fire graphs are the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSetup {
    pub node_count: usize,
    pub graphs: usize,
    pub forward: f64,
    pub backward: f64,
    pub attach: usize,
    pub ff_base_seed: u64,
    pub ba_base_seed: u64,
    /// Rounds of WL refinement used for the equivalence labels.
    pub wl_rounds: usize,
}

impl Default for SyntheticSetup {
    fn default() -> Self {
        SyntheticSetup {
            node_count: 100,
            graphs: 40,
            forward: 0.4,
            backward: 0.3,
            attach: 2,
            ff_base_seed: 0,
            ba_base_seed: 1000,
            wl_rounds: 2,
        }
    }
}

pub struct Families {
    pub forest_fire: Vec<Graph>,
    pub barabasi: Vec<Graph>,
}

impl SyntheticSetup {
    pub fn ff_spec(&self) -> GenSpec {
        GenSpec::forest_fire(self.node_count, self.forward, self.backward, self.ff_base_seed)
    }

    pub fn ba_spec(&self) -> GenSpec {
        GenSpec::barabasi(self.node_count, self.attach, self.ba_base_seed)
    }

    pub fn families(&self) -> Result<Families> {
        if self.graphs < 2 {
            return Err(Error::InvalidParameter(
                "the synthetic study needs a source and at least one target per family".into(),
            ));
        }
        Ok(Families {
            forest_fire: generate_suite(&self.ff_spec(), self.graphs, self.ff_base_seed)?,
            barabasi: generate_suite(&self.ba_spec(), self.graphs, self.ba_base_seed)?,
        })
    }
}

/// Per-target gaps from the forest-fire source and from the Barabási
/// source to every held-out forest-fire graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGaps {
    pub k: usize,
    pub from_ff: Vec<f64>,
    pub from_ba: Vec<f64>,
}

impl SyntheticGaps {
    pub fn ff_mean(&self) -> f64 {
        mean_std(&self.from_ff).0
    }

    pub fn ba_mean(&self) -> f64 {
        mean_std(&self.from_ba).0
    }

    /// Targets on which the forest-fire source is strictly closer.
    pub fn ff_closer(&self) -> usize {
        self.from_ff.iter().zip(&self.from_ba).filter(|(f, b)| f < b).count()
    }
}

/// `pairs == 0` enumerates every ego pair.
pub fn synthetic_gaps(families: &Families, k: usize, pairs: usize, seed: u64) -> Result<SyntheticGaps> {
    let lf = ego_laplacians(&families.forest_fire[0], k)?;
    let lb = ego_laplacians(&families.barabasi[0], k)?;
    let (mut from_ff, mut from_ba) = (Vec::new(), Vec::new());
    for target in &families.forest_fire[1..] {
        let lt = ego_laplacians(target, k)?;
        let gap = |ls| {
            if pairs == 0 {
                gap_full_precomputed(ls, &lt, k).map(|g| g.value)
            } else {
                egi_gap_repeated(ls, &lt, k, pairs, seed, 1).map(|g| g.value)
            }
        };
        from_ff.push(gap(&lf)?);
        from_ba.push(gap(&lb)?);
    }
    Ok(SyntheticGaps { k, from_ff, from_ba })
}

fn synthetic_dataset(name: String, g: &Graph, feature: FeatureKind, rounds: usize, seed: u64) -> Result<Dataset> {
    Dataset::new(name, g.clone(), feature.build(g, seed)?, wl_labels(g, rounds))
}

/// Forest-fire-source and Barabási-source transfer reports on the same
/// forest-fire targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTransfer {
    pub ff: TransferReport,
    pub ba: TransferReport,
}

impl SyntheticTransfer {
    /// Trained forest-fire-source accuracy minus the untrained baseline.
    pub fn gain(&self) -> f64 {
        self.ff.mean_accuracy() - self.ff.mean_baseline()
    }

    /// Accuracy difference between the two sources.
    pub fn delta(&self) -> f64 {
        self.ff.mean_accuracy() - self.ba.mean_accuracy()
    }
}

/// Pretraining sources and evaluation targets of the synthetic study.
pub struct SyntheticData {
    pub ff_source: Dataset,
    pub ba_source: Dataset,
    pub targets: Vec<Dataset>,
}

pub fn synthetic_datasets(setup: &SyntheticSetup, families: &Families, feature: FeatureKind) -> Result<SyntheticData> {
    // feature seeds only matter for random features; each graph gets its own
    let targets = families.forest_fire[1..]
        .iter()
        .enumerate()
        .map(|(i, g)| synthetic_dataset(format!("ff{}", i + 1), g, feature, setup.wl_rounds, i as u64 + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticData {
        ff_source: synthetic_dataset("ff0".into(), &families.forest_fire[0], feature, setup.wl_rounds, 0)?,
        ba_source: synthetic_dataset("ba0".into(), &families.barabasi[0], feature, setup.wl_rounds, 0)?,
        targets,
    })
}

pub fn synthetic_transfer(
    setup: &SyntheticSetup,
    families: &Families,
    feature: FeatureKind,
    cfg: &TransferConfig,
) -> Result<SyntheticTransfer> {
    let data = synthetic_datasets(setup, families, feature)?;
    let mut ff = direct_transfer(&data.ff_source, &data.targets, cfg)?;
    let mut ba = direct_transfer(&data.ba_source, &data.targets, cfg)?;
    ff.feature_kind = feature.to_string();
    ba.feature_kind = feature.to_string();
    Ok(SyntheticTransfer { ff, ba })
}

pub fn synthetic_transfer_config(train: TrainConfig, gap_pairs: Option<usize>) -> TransferConfig {
    TransferConfig {
        train,
        metric: Metric::Knn,
        eval_seed: 0,
        gap_pairs,
        gap_repeats: 1,
    }
}

pub const AIRPORTS: [&str; 3] = ["europe", "usa", "brazil"];

pub const AIRPORT_HINT: &str = "place the struc2vec airport files ({name}-airports.edgelist and \
labels-{name}-airports.txt for europe, usa and brazil) in data/airport/ or point EGI_AIRPORT_DIR at them";

/// `EGI_AIRPORT_DIR` if set, otherwise `<root>/data/airport`.
pub fn airport_dir(root: &Path) -> PathBuf {
    std::env::var_os("EGI_AIRPORT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("data").join("airport"))
}

pub fn airport_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{name}-airports.edgelist")),
        dir.join(format!("labels-{name}-airports.txt")),
    )
}

pub fn airports_present(dir: &Path) -> bool {
    AIRPORTS.iter().all(|name| {
        let (e, l) = airport_paths(dir, name);
        e.is_file() && l.is_file()
    })
}

/// Loads Europe, USA and Brazil (in that order) with the given features.
pub fn load_airports(dir: &Path, feature: FeatureKind) -> Result<Vec<Dataset>> {
    AIRPORTS
        .iter()
        .map(|name| {
            let (edges, labels) = airport_paths(dir, name);
            for p in [&edges, &labels] {
                if !p.is_file() {
                    return Err(Error::MissingDataset {
                        path: p.clone(),
                        hint: AIRPORT_HINT.into(),
                    });
                }
            }
            let (g, _) = load_labeled_graph(&edges, &labels)?;
            let labels = g.labels().expect("airport graphs carry labels").to_vec();
            let feats = feature.build(&g, 0)?;
            Dataset::new(*name, g, feats, labels)
        })
        .collect()
}

pub fn airport_transfer_config(train: TrainConfig, runs: usize, gap_pairs: Option<usize>) -> TransferConfig {
    TransferConfig {
        train,
        metric: Metric::Mlp { runs },
        eval_seed: 0,
        gap_pairs,
        gap_repeats: 1,
    }
}

/// Europe-source transfer to all three airport networks, MLP-evaluated.
/// Pass a trained model to skip pretraining.
pub fn airport_transfer(
    airports: &[Dataset],
    feature: FeatureKind,
    cfg: &TransferConfig,
    pretrained: Option<(&EgiModel, Vec<f64>)>,
) -> Result<TransferReport> {
    let mut report = match pretrained {
        Some((model, trace)) => transfer_with_model(&airports[0], airports, cfg, model, trace)?,
        None => direct_transfer(&airports[0], airports, cfg)?,
    };
    report.feature_kind = feature.to_string();
    Ok(report)
}
