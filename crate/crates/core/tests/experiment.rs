use std::fs;
use std::path::Path;

use horizon_core::experiment::{
    dump_config, load_checkpoint, parse_config, parse_config_str, read_trace_dir, run_analyze, run_meta_test,
    run_meta_train, ExperimentConfig, ObjectiveKind, SUMMARY_HEADER,
};
use horizon_core::Error;

fn config(text: &str, out: &Path) -> ExperimentConfig {
    parse_config_str(&format!("{text}\nout_dir = {}\n", out.display()), "test", Path::new(".")).unwrap()
}

fn tiny_drift(out: &Path) -> ExperimentConfig {
    config(
        "objective = ta-lpo\nenv = dense\nseeds = 3\nhorizons = 256\npopulation_size = 2\ngenerations = 2\n\
         checkpoint_every = 1\ndrift_hidden = 4",
        out,
    )
}

#[test]
fn config_file_round_trips_through_dump() {
    let dir = tempfile::tempdir().unwrap();
    let original = config("objective = lpg\nseeds = 1,2\nhorizons = 2048,4096\nlr = 0.002", dir.path());
    let path = dir.path().join("exp.cfg");
    fs::write(&path, dump_config(&original)).unwrap();
    let parsed = parse_config(&path).unwrap();
    assert_eq!(dump_config(&parsed), dump_config(&original));
    assert_eq!(parsed.seeds, vec![1, 2]);
    assert_eq!(parsed.horizons, vec![2048, 4096]);
}

#[test]
fn meta_test_writes_one_trace_per_horizon_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("objective = ppo-ref\nenv = dense\nseeds = 0,1\nhorizons = 2048,4096", dir.path());
    let records = run_meta_test(&cfg, None).unwrap();
    assert_eq!(records.len(), 4);
    let out = dir.path().join("meta-test");
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "manifest.txt",
            "summary.csv",
            "trace_N2048_seed0.csv",
            "trace_N2048_seed1.csv",
            "trace_N4096_seed0.csv",
            "trace_N4096_seed1.csv"
        ]
    );
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    assert_eq!(lines.count(), 4);
    let traces = read_trace_dir(&out).unwrap();
    assert_eq!(traces.len(), 4);
    for t in &traces {
        assert!(t.is_complete(), "trace for N={} seed={} is incomplete", t.horizon, t.seed);
    }
}

#[test]
fn ppo_reference_heatmap_is_the_clipped_surrogate_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("objective = ppo-ref\nclip_eps = 0.2", dir.path());
    let out = run_analyze(&cfg, None, None).unwrap();
    assert!(out.metrics.is_none());
    for k in 0..3 {
        let text = fs::read_to_string(dir.path().join(format!("analyze/grid_{k}.csv"))).unwrap();
        let mut rows = 0;
        for line in text.lines().skip(2) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            let (p, a) = (v[0], v[1]);
            let clipped = (a > 0.0 && p > 1.2) || (a < 0.0 && p < 0.8);
            assert_eq!(v[2], if clipped { 0.0 } else { a }, "p={p} A={a}");
            rows += 1;
        }
        assert_eq!(rows, 64 * 64);
        assert!(dir.path().join(format!("analyze/grid_{k}.svg")).exists());
    }
}

#[test]
fn meta_train_checkpoints_feed_meta_test_and_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_drift(dir.path());
    let runs = run_meta_train(&cfg).unwrap();
    assert_eq!(runs.len(), 1);
    let seed_dir = dir.path().join("meta-train/seed_3");
    for name in ["generations.csv", "checkpoint_00001.txt", "checkpoint_00002.txt", "final.txt"] {
        assert!(seed_dir.join(name).exists(), "{name}");
    }
    let final_ck = load_checkpoint(&seed_dir.join("final.txt")).unwrap();
    assert_eq!(final_ck.params, runs[0].params);
    let gens = fs::read_to_string(seed_dir.join("generations.csv")).unwrap();
    assert_eq!(gens.lines().count(), 3);

    let ck = seed_dir.join("final.txt");
    run_meta_test(&cfg, Some(&ck)).unwrap();
    let out = run_analyze(&cfg, Some(&ck), Some(&dir.path().join("meta-test"))).unwrap();
    let metrics = out.metrics.unwrap();
    assert_eq!(metrics.per_horizon.len(), 1);
    assert_eq!(metrics.per_horizon[0].lifetimes, 1);
    assert!(dir.path().join("analyze/metrics.csv").exists());
    assert!(dir.path().join("analyze/grid_2.csv").exists());
}

#[test]
fn checkpoint_from_another_objective_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_drift(dir.path());
    run_meta_train(&cfg).unwrap();
    let ck = dir.path().join("meta-train/seed_3/final.txt");
    let mut other = cfg.clone();
    other.objective = ObjectiveKind::Lpo;
    assert!(run_meta_test(&other, Some(&ck)).is_err());
    let mut wider = cfg.clone();
    wider.drift_hidden = 5;
    assert!(run_meta_test(&wider, Some(&ck)).is_err());
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ppo = config("objective = ppo-ref", dir.path());
    assert!(matches!(run_meta_train(&ppo), Err(Error::Usage(_))));
    let lpo = config("objective = lpo", dir.path());
    assert!(matches!(run_meta_test(&lpo, None), Err(Error::Usage(_))));
    let lpg = config("objective = lpg\npopulation_size = 2\ngenerations = 1\nhorizons = 64\nlpg_hidden = 2", dir.path());
    run_meta_train(&lpg).unwrap();
    let ck = dir.path().join("meta-train/seed_0/final.txt");
    assert!(matches!(run_analyze(&lpg, Some(&ck), None), Err(Error::Usage(_))));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_meta_train(&tiny_drift(a.path())).unwrap();
    let again = parse_config(&a.path().join("meta-train/manifest.txt")).unwrap();
    let again = ExperimentConfig { out_dir: b.path().to_path_buf(), ..again };
    run_meta_train(&again).unwrap();
    for name in ["generations.csv", "checkpoint_00001.txt", "checkpoint_00002.txt", "final.txt"] {
        let rel = Path::new("meta-train/seed_3").join(name);
        assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap(), "{name}");
    }
}
