//! Slow trend checks beyond the acceptance gate: isolated (local) training
//! degrades as the client count grows. Run with `--include-ignored`.

use std::sync::OnceLock;

use flbench::config::parse_config_str;
use flbench::experiment::run_experiment;
use flbench_core::data::{fixture_csv, Provenance, AI4I_FIXTURE_SEED};

fn fixture() -> &'static (tempfile::TempDir, std::path::PathBuf) {
    static FIX: OnceLock<(tempfile::TempDir, std::path::PathBuf)> = OnceLock::new();
    FIX.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ai4i2020.csv");
        let csv = fixture_csv(Provenance::Ai4i2020, 10_000, 0, 0.0, AI4I_FIXTURE_SEED).unwrap();
        std::fs::write(&path, csv).unwrap();
        (dir, path)
    })
}

fn local_fbeta(clients: usize, seed: u64) -> f64 {
    let (dir, path) = fixture();
    let cfg = parse_config_str(&format!(
        "mode = \"local\"\nseed = {seed}\n[dataset]\npreset = \"ai4i2020\"\npath = \"{}\"\n[partition]\nclients = {clients}\n",
        path.display()
    ))
    .unwrap();
    run_experiment(&cfg, &dir.path().join("out")).unwrap().0.fbeta
}

#[test]
#[ignore = "slow suite: six full local-training sweeps"]
fn local_training_degrades_from_5_to_15_clients() {
    let seeds = [1u64, 2, 3];
    let k5: Vec<f64> = seeds.iter().map(|&s| local_fbeta(5, s)).collect();
    let k15: Vec<f64> = seeds.iter().map(|&s| local_fbeta(15, s)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "local mean F-beta: K=5 {:.4} {k5:?}, K=15 {:.4} {k15:?}",
        mean(&k5),
        mean(&k15)
    );
    assert!(
        mean(&k15) < mean(&k5),
        "local K=15 mean {:.4} should fall below K=5 mean {:.4}",
        mean(&k15),
        mean(&k5)
    );
}
