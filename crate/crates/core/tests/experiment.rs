use std::path::Path;

use oran_edrl::experiment::{
    export_cdf, load_config, read_cdf_csv, read_metrics, run, save_config, series, Mode, RunConfig,
};
use serde_json::json;

fn tiny(mode: Mode, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_json_value(json!({
        "edrl": {"generations": 3, "episode_length": 4, "grad_steps_per_generation": 6, "early_stop": false, "seed": 5},
        "ddpg": {"hidden": [16, 16], "batch_size": 8},
        "evo": {"population_size": 4},
        "env": {"ttis_per_step": 2}
    }))
    .unwrap();
    cfg.mode = mode;
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::Edrl, Mode::Drl] {
        let a = run(&tiny(mode, &dir.path().join(format!("{mode}-a")))).unwrap();
        let b = run(&tiny(mode, &dir.path().join(format!("{mode}-b")))).unwrap();
        assert_eq!(a.run_id, b.run_id);
        let bytes = std::fs::read(&a.metrics_path).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(bytes, std::fs::read(&b.metrics_path).unwrap());
    }
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&tiny(Mode::Edrl, &dir.path().join("a"))).unwrap();
    let mut cfg = tiny(Mode::Edrl, &dir.path().join("b"));
    cfg.edrl.seed = 6;
    let b = run(&cfg).unwrap();
    let (ra, rb) = (read_metrics(&a.metrics_path).unwrap(), read_metrics(&b.metrics_path).unwrap());
    assert_ne!(series(&ra, "best_fitness"), series(&rb, "best_fitness"));
}

#[test]
fn run_writes_all_artifacts_into_a_fresh_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run");
    let summary = run(&tiny(Mode::Edrl, &out)).unwrap();
    assert_eq!(summary.records, 3);
    for file in ["config.json", "metrics.csv", "agent.ckpt", "champion.net", "cdf_qos_1_mtc.csv", "cdf_throughput_2_urllc.csv"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let resolved = load_config(&out.join("config.json")).unwrap();
    assert_eq!(resolved, tiny(Mode::Edrl, &out));

    let rows = read_metrics(&summary.metrics_path).unwrap();
    assert!(rows.iter().all(|r| r.run_id == "edrl-s5"));
    let returns = series(&rows, "discounted_return");
    assert_eq!(returns.iter().map(|r| r.0).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(returns[2].1, summary.final_discounted_return);
    assert_eq!(series(&rows, "throughput_ue29").len(), 3);
    let cdf = read_cdf_csv(&out.join("cdf_qos_0_embb.csv")).unwrap();
    assert_eq!(cdf.last().unwrap().1, 1.0);
    let qos: Vec<f64> = series(&rows, "qos_0_embb").into_iter().map(|r| r.1).collect();
    assert_eq!(cdf, export_cdf(&qos, 100).unwrap());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&tiny(Mode::Drl, &dir.path().join("first"))).unwrap();
    let mut again = load_config(&dir.path().join("first/config.json")).unwrap();
    again.output_dir = dir.path().join("second");
    let second = run(&again).unwrap();
    assert_eq!(std::fs::read(first.metrics_path).unwrap(), std::fs::read(second.metrics_path).unwrap());
}

#[test]
fn eval_only_emits_samples_without_training() {
    let dir = tempfile::tempdir().unwrap();
    let trained = dir.path().join("train");
    run(&tiny(Mode::Edrl, &trained)).unwrap();
    for ckpt in ["agent.ckpt", "champion.net"] {
        let out = dir.path().join(format!("eval-{ckpt}"));
        let mut cfg = tiny(Mode::EvalOnly, &out);
        cfg.checkpoint = Some(trained.join(ckpt));
        cfg.eval_episodes = 3;
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.records, 3);
        assert!(!out.join("agent.ckpt").exists());
        let rows = read_metrics(&summary.metrics_path).unwrap();
        assert!(rows.iter().all(|r| r.metric != "critic_loss" && r.metric != "updates"));
        assert_eq!(series(&rows, "qos_2_urllc").len(), 3);
    }
}

#[test]
fn eval_only_rejects_mismatched_policy() {
    let dir = tempfile::tempdir().unwrap();
    let trained = dir.path().join("train");
    run(&tiny(Mode::Edrl, &trained)).unwrap();
    let mut cfg = tiny(Mode::EvalOnly, &dir.path().join("eval"));
    cfg.checkpoint = Some(trained.join("champion.net"));
    cfg.env.slices.pop();
    assert!(run(&cfg).is_err());
}

#[test]
fn config_round_trip_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"evo": {"mutation_strength": 0.2}, "edrl": {"seed": 11}}"#).unwrap();
    let loaded = load_config(&path).unwrap();
    assert_eq!(loaded.evo.mutation_strength, 0.2);
    let saved = dir.path().join("saved.json");
    save_config(&loaded, &saved).unwrap();
    assert_eq!(load_config(&saved).unwrap(), loaded);
}

#[test]
fn invalid_file_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"env": {"cell": {"num_rbs": 0}}}"#).unwrap();
    let err = load_config(&path).unwrap_err();
    assert!(err.is_config() && err.to_string().contains("num_rbs"));
}
