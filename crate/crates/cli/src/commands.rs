use std::path::{Path, PathBuf};

use egi::checks::{self, Check};
use egi::eval::{gap_gain_table, report_rows, transfer_with_model, Dataset, Metric, TransferConfig, TransferReport, REPORT_HEADER};
use egi::experiments::{
    airport_dir, airport_transfer_config, load_airports, synthetic_datasets, synthetic_gaps, SyntheticSetup,
    SyntheticTransfer, AIRPORTS,
};
use egi::features::FeatureKind;
use egi::generators::{generate_suite, Family, GenSpec};
use egi::io::{read_edge_list, write_edge_list_with_comments};
use egi::model::{config_hash, train, Checkpoint, EgiModel, TrainConfig};
use egi::spectral::{egi_gap_repeated, ego_laplacians, GapEstimate};
use serde::Serialize;

use crate::output::{create_dir, csv_with_hash, write_file, write_stdout, CliResult};
use crate::{GapArgs, GenerateArgs, PretrainArgs, ReproArgs, Study, TrainArgs};

pub enum Status {
    Done,
    ChecksFailed,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            k: self.k,
            hidden_dim: self.hidden,
            lr: self.lr,
            batch_size: self.batch,
            epochs: self.epochs,
            neighbor_cap: self.cap,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    seed: u64,
    nodes: usize,
    edges: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    spec: &'a GenSpec,
    count: usize,
    graphs: Vec<ManifestEntry>,
}

pub fn generate(a: &GenerateArgs) -> CliResult<Status> {
    let spec = match a.family {
        Family::ForestFire => GenSpec::forest_fire(a.n, a.forward, a.backward, a.seed),
        Family::Barabasi => GenSpec::barabasi(a.n, a.m, a.seed),
    };
    let graphs = generate_suite(&spec, a.count, a.seed)?;
    let hash = config_hash(&(&spec, a.count));
    create_dir(&a.out)?;
    let mut entries = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        let seed = a.seed + i as u64;
        let file = format!("{}_{i:03}.edgelist", spec.family.short_name());
        write_edge_list_with_comments(
            g,
            &a.out.join(&file),
            &[format!("config-hash: {hash}"), format!("seed {seed}")],
        )?;
        entries.push(ManifestEntry {
            file,
            seed,
            nodes: g.node_count(),
            edges: g.edge_count(),
        });
    }
    let manifest = Manifest {
        config_hash: hash,
        spec: &spec,
        count: a.count,
        graphs: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&a.out.join("manifest.json"), &(json + "\n"))?;
    eprintln!("wrote {} graphs to {}", a.count, a.out.display());
    Ok(Status::Done)
}

fn display_name(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

pub fn gap(a: &GapArgs) -> CliResult<Status> {
    let (source, _) = read_edge_list(&a.source, a.directed)?;
    let ls = ego_laplacians(&source, a.k)?;
    let mut rows = String::new();
    for t in &a.targets {
        let (target, _) = read_edge_list(t, a.directed)?;
        let lt = ego_laplacians(&target, a.k)?;
        let est = egi_gap_repeated(&ls, &lt, a.k, a.pairs, a.seed, a.repeats)?;
        rows += &format!(
            "{},{},{},{},{:.6},{:.6}\n",
            display_name(&a.source),
            display_name(t),
            a.k,
            est.pairs_used,
            est.value,
            est.dispersion
        );
    }
    let hash = config_hash(&(a.k, a.pairs, a.repeats, a.seed, a.directed, &a.source, &a.targets));
    let text = csv_with_hash(&hash, "source,target,k,pairs,mean,std", &rows);
    match &a.out {
        Some(path) => write_file(path, &text)?,
        None => write_stdout(&text)?,
    }
    Ok(Status::Done)
}

fn loss_csv(hash: &str, trace: &[f64]) -> String {
    let rows: String = trace
        .iter()
        .enumerate()
        .map(|(e, l)| format!("{},{l:.10}\n", e + 1))
        .collect();
    csv_with_hash(hash, "epoch,loss", &rows)
}

pub fn pretrain(a: &PretrainArgs) -> CliResult<Status> {
    let (g, _) = read_edge_list(&a.graph, false)?;
    let feats = a.feature.build(&g, a.train.seed)?;
    let cfg = a.train.config();
    let source = source_tag(&display_name(&a.graph), a.feature, &g);
    let (model, outcome) = train(&g, &feats, &cfg)?;
    let ckpt = Checkpoint::new(&model, &cfg, &source, &outcome.loss_trace);
    create_dir(&a.out)?;
    ckpt.save(&a.out.join("checkpoint.json"))?;
    write_file(&a.out.join("loss.csv"), &loss_csv(&ckpt.config_hash, &outcome.loss_trace))?;
    let last = outcome.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} epochs (converged: {}), final loss {last:.6}, checkpoint {}",
        outcome.loss_trace.len(),
        outcome.converged,
        a.out.join("checkpoint.json").display()
    );
    Ok(Status::Done)
}

fn source_tag(name: &str, feature: FeatureKind, g: &egi::Graph) -> String {
    format!("{name} {feature} graph-{}", config_hash(&g.edges()))
}

/// Reuses a checkpoint whose configuration hash matches, otherwise trains
/// and saves one.
fn load_or_train(dir: &Path, data: &Dataset, feature: FeatureKind, cfg: &TrainConfig) -> CliResult<(EgiModel, Vec<f64>)> {
    let tag = source_tag(&data.name, feature, &data.graph);
    let kind = feature.to_string().replace(':', "");
    let path = dir.join(format!("{}_{kind}_s{}.json", data.name, cfg.seed));
    let want = Checkpoint::hash_for(cfg, data.features.dim(), &tag);
    if path.is_file() {
        if let Ok(ckpt) = Checkpoint::load(&path) {
            if ckpt.config_hash == want {
                eprintln!("reusing {}", path.display());
                return Ok((ckpt.model()?, ckpt.loss_trace));
            }
        }
    }
    eprintln!("pretraining on {} ({feature}, seed {})", data.name, cfg.seed);
    let (model, outcome) = train(&data.graph, &data.features, cfg)?;
    Checkpoint::new(&model, cfg, &tag, &outcome.loss_trace).save(&path)?;
    Ok((model, outcome.loss_trace))
}

fn report_checks(out: &Path, hash: &str, checks: &[Check]) -> CliResult<Status> {
    let mut text = format!("# config-hash: {hash}\n");
    for c in checks {
        println!("{c}");
        text += &format!("{c}\n");
    }
    write_file(&out.join("checks.txt"), &text)?;
    Ok(if checks.iter().all(|c| c.pass) {
        Status::Done
    } else {
        Status::ChecksFailed
    })
}

fn attach_gaps(report: &mut TransferReport, gaps: &[f64], k: usize, pairs: usize) {
    for (r, &g) in report.records.iter_mut().zip(gaps) {
        r.gap = Some(GapEstimate {
            value: g,
            pairs_used: pairs,
            dispersion: 0.0,
            k,
        });
    }
}

pub fn repro(a: &ReproArgs) -> CliResult<Status> {
    create_dir(&a.out)?;
    match a.study {
        Study::Synthetic => repro_synthetic(a),
        Study::Airport => repro_airport(a),
    }
}

fn repro_synthetic(a: &ReproArgs) -> CliResult<Status> {
    let setup = SyntheticSetup::default();
    let features = match a.feature {
        Some(f) => vec![f],
        None => vec![FeatureKind::Degree(3), FeatureKind::Constant(3)],
    };
    let runs = a.runs.unwrap_or(5).max(1);
    let base = a.train.config();
    let hash = config_hash(&(&setup, &base, runs, a.pairs, &features));
    let ckpt_dir = a.out.join("checkpoints");
    create_dir(&ckpt_dir)?;

    let families = setup.families()?;
    eprintln!("computing gaps (k = {}, pairs = {})", base.k, a.pairs);
    let gaps = synthetic_gaps(&families, base.k, a.pairs, base.seed)?;
    let per_pair = if a.pairs == 0 { setup.node_count * setup.node_count } else { a.pairs };
    let gap_rows: String = gaps
        .from_ff
        .iter()
        .zip(&gaps.from_ba)
        .enumerate()
        .map(|(i, (f, b))| format!("ff{},{f:.6},{b:.6}\n", i + 1))
        .collect();
    write_file(&a.out.join("gaps.csv"), &csv_with_hash(&hash, "target,gap_from_ff,gap_from_ba", &gap_rows))?;

    let mut checks = vec![checks::gap_ordering(&gaps)];
    let mut rows = String::new();
    let mut reports = Vec::new();
    for &feature in &features {
        let data = synthetic_datasets(&setup, &families, feature)?;
        let mut studies = Vec::with_capacity(runs);
        for seed in base.seed..base.seed + runs as u64 {
            let train_cfg = TrainConfig { seed, ..base.clone() };
            let cfg = TransferConfig {
                train: train_cfg.clone(),
                metric: Metric::Knn,
                eval_seed: 0,
                gap_pairs: None,
                gap_repeats: 1,
            };
            let run = |source: &Dataset, source_gaps: &[f64]| -> CliResult<TransferReport> {
                let (model, trace) = load_or_train(&ckpt_dir, source, feature, &train_cfg)?;
                let mut report = transfer_with_model(source, &data.targets, &cfg, &model, trace)?;
                report.feature_kind = feature.to_string();
                attach_gaps(&mut report, source_gaps, base.k, per_pair);
                Ok(report)
            };
            let study = SyntheticTransfer {
                ff: run(&data.ff_source, &gaps.from_ff)?,
                ba: run(&data.ba_source, &gaps.from_ba)?,
            };
            let experiment = format!("synthetic-seed{seed}");
            rows += &report_rows(&experiment, &study.ff);
            rows += &report_rows(&experiment, &study.ba);
            eprintln!(
                "{feature} seed {seed}: F->F {:.4}, B->F {:.4}, untrained {:.4}",
                study.ff.mean_accuracy(),
                study.ba.mean_accuracy(),
                study.ff.mean_baseline()
            );
            reports.push(study.ff.clone());
            reports.push(study.ba.clone());
            studies.push(study);
        }
        checks.push(match feature {
            FeatureKind::Degree(_) => checks::transfer_with_structural_features(&studies),
            _ => checks::transfer_with_uninformative_features(&studies),
        });
    }
    write_file(&a.out.join("report.csv"), &csv_with_hash(&hash, REPORT_HEADER, &rows))?;
    write_file(&a.out.join("gap_gain.csv"), &format!("# config-hash: {hash}\n{}", gap_gain_table(&reports)))?;
    report_checks(&a.out, &hash, &checks)
}

fn repro_airport(a: &ReproArgs) -> CliResult<Status> {
    let dir: PathBuf = match &a.data {
        Some(d) => d.clone(),
        None => airport_dir(Path::new(".")),
    };
    let feature = a.feature.unwrap_or(FeatureKind::Degree(10));
    let runs = a.runs.unwrap_or(100).max(1);
    let train_cfg = a.train.config();
    let k = train_cfg.k;
    let airports = load_airports(&dir, feature)?;
    let hash = config_hash(&(&train_cfg, runs, a.pairs, feature, "airport"));
    let ckpt_dir = a.out.join("checkpoints");
    create_dir(&ckpt_dir)?;

    eprintln!("computing airport gaps");
    let laps = |k| airports.iter().map(|d| ego_laplacians(&d.graph, k)).collect::<egi::Result<Vec<_>>>();
    let lk = laps(k)?;
    let gap_from_europe: Vec<GapEstimate> = lk
        .iter()
        .map(|lt| egi_gap_repeated(&lk[0], lt, k, a.pairs, train_cfg.seed, 1))
        .collect::<egi::Result<_>>()?;
    let mut gap_rows: String = AIRPORTS
        .iter()
        .zip(&gap_from_europe)
        .map(|(name, g)| format!("europe,{name},{k},{},{:.6},{:.6}\n", g.pairs_used, g.value, g.dispersion))
        .collect();

    let mut sweep = [0.0; 3];
    for (i, kk) in (1..=3).enumerate() {
        let l = laps(kk)?;
        let g = egi_gap_repeated(&l[0], &l[1], kk, 0, 0, 1)?;
        gap_rows += &format!("europe,usa,{kk},{},{:.6},0.000000\n", g.pairs_used, g.value);
        sweep[i] = g.value;
    }
    let (lu_e, lu_u) = (&lk[0], &lk[1]);
    let exact = egi_gap_repeated(lu_e, lu_u, k, 0, 0, 1)?.value;
    let few = egi_gap_repeated(lu_e, lu_u, k, 100, train_cfg.seed, 10)?;
    let many = egi_gap_repeated(lu_e, lu_u, k, 1000, train_cfg.seed, 10)?;
    for g in [&few, &many] {
        gap_rows += &format!("europe,usa,{k},{},{:.6},{:.6}\n", g.pairs_used, g.value, g.dispersion);
    }
    write_file(&a.out.join("gaps.csv"), &csv_with_hash(&hash, "source,target,k,pairs,mean,std", &gap_rows))?;

    let (model, trace) = load_or_train(&ckpt_dir, &airports[0], feature, &train_cfg)?;
    let cfg = airport_transfer_config(train_cfg.clone(), runs, None);
    let mut report = transfer_with_model(&airports[0], &airports, &cfg, &model, trace)?;
    report.feature_kind = feature.to_string();
    for (r, g) in report.records.iter_mut().zip(&gap_from_europe) {
        r.gap = Some(*g);
    }
    write_file(&a.out.join("report.csv"), &csv_with_hash(&hash, REPORT_HEADER, &report_rows("airport", &report)))?;
    write_file(
        &a.out.join("gap_gain.csv"),
        &format!("# config-hash: {hash}\n{}", gap_gain_table(std::slice::from_ref(&report))),
    )?;

    let checks = vec![
        checks::airport_gaps(gap_from_europe[1].value, gap_from_europe[2].value),
        checks::sampling_convergence((few.value, few.dispersion), (many.value, many.dispersion), exact),
        checks::k_sweep(&sweep),
        checks::airport_transfer(&report),
    ];
    report_checks(&a.out, &hash, &checks)
}
