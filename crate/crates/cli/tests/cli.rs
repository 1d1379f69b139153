use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use egi::model::Checkpoint;

fn egi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egi"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EGI_AIRPORT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_writes_graphs_and_manifest_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let o = egi(&["generate", "--family", "ba", "--n", "30", "--count", "3", "--seed", "7", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run("a");
    run("b");
    let mut files: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["ba_000.edgelist", "ba_001.edgelist", "ba_002.edgelist", "manifest.json"]);
    for f in &files {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    let seeds: Vec<u64> = manifest["graphs"].as_array().unwrap().iter().map(|g| g["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, [7, 8, 9]);
    let hash = manifest["config_hash"].as_str().unwrap();
    let first = fs::read_to_string(dir.path().join("a/ba_000.edgelist")).unwrap();
    assert!(first.starts_with(&format!("# config-hash: {hash}\n")));
}

#[test]
fn generate_single_graph() {
    let dir = tempfile::tempdir().unwrap();
    let o = egi(&["generate", "--family", "ff", "--n", "20", "--count", "1", "--out", "g"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(dir.path().join("g")).unwrap().count(), 2);
}

#[test]
fn gap_between_relabelled_complete_graphs_is_zero() {
    // every canonical ordering of a complete-graph ego gives the same matrix
    let dir = tempfile::tempdir().unwrap();
    let complete = |ids: &[usize]| {
        let mut s = String::new();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                s += &format!("{a} {b}\n");
            }
        }
        s
    };
    fs::write(dir.path().join("k5.txt"), complete(&[0, 1, 2, 3, 4])).unwrap();
    fs::write(dir.path().join("k5b.txt"), complete(&[4, 2, 0, 3, 1])).unwrap();
    let o = egi(&["gap", "k5.txt", "k5b.txt", "--k", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config-hash: "));
    assert_eq!(lines[1], "source,target,k,pairs,mean,std");
    assert_eq!(lines[2], "k5,k5b,1,25,0.000000,0.000000");
}

#[test]
fn pretrain_is_deterministic_and_checkpoints_load() {
    let dir = tempfile::tempdir().unwrap();
    let o = egi(&["generate", "--family", "ff", "--n", "40", "--count", "1", "--out", "g"], dir.path());
    assert!(o.status.success());
    for out in ["p1", "p2"] {
        let o = egi(&["pretrain", "g/ff_000.edgelist", "--epochs", "3", "--seed", "4", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("p1/checkpoint.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("p2/checkpoint.json")).unwrap());
    let ckpt = Checkpoint::load(&dir.path().join("p1/checkpoint.json")).unwrap();
    assert_eq!(ckpt.loss_trace.len(), 3);
    ckpt.model().unwrap();
    let loss = fs::read_to_string(dir.path().join("p1/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 5);
    assert!(loss.starts_with(&format!("# config-hash: {}\nepoch,loss\n", ckpt.config_hash)));

    let o = egi(&["pretrain", "g/ff_000.edgelist", "--epochs", "0", "--out", "p0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(egi(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(egi(&["gap", "a.txt"], dir.path()).status.code(), Some(1));
    assert_eq!(egi(&["pretrain", "g.txt", "--feature", "colour:3", "--out", "o"], dir.path()).status.code(), Some(1));
    assert_eq!(egi(&["--help"], dir.path()).status.code(), Some(0));

    let o = egi(&["gap", "missing.txt", "also-missing.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = egi(&["repro", "airport", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dataset not found"), "{}", stderr(&o));
    assert!(stderr(&o).contains("EGI_AIRPORT_DIR"));
}
