use std::fs;
use std::path::Path;
use std::process::Command;

use taskfree_cli::commands::{artifact, mode_dir, seed_dir, STREAM_FILE};
use taskfree_cli::config::Overrides;
use taskfree_cli::{cmd_eval, cmd_gen_stream, cmd_inspect, cmd_report, cmd_run, RunConfig};
use taskfree_core::graph::{synth_dataset, write_dataset, SynthSpec};
use taskfree_core::learners::LearnerKind;
use taskfree_core::metrics::PREDICTION_LOG_HEADER;
use taskfree_core::stream_io::{read_stream, DIGEST_ALGORITHM, FORMAT_VERSION};

fn config_in(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.output_dir = Some(out.to_path_buf());
    cfg
}

fn with(cfg: &RunConfig, ov: Overrides) -> RunConfig {
    let mut cfg = cfg.clone();
    ov.apply(&mut cfg).unwrap();
    cfg
}

fn modes() -> Vec<Overrides> {
    let mode = |m: &str| Overrides {
        mode: Some(m.into()),
        sigma: Some(20.0),
        mix_fraction: Some(0.3),
        window: Some(1),
        ..Overrides::default()
    };
    vec![mode("hard"), mode("gaussian"), mode("global-mix"), mode("boundary-local")]
}

#[test]
fn gen_stream_is_deterministic_in_every_mode() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for ov in modes() {
        let ca = with(&config_in(a.path()), ov.clone());
        let cb = with(&config_in(b.path()), ov);
        cmd_gen_stream(&ca).unwrap();
        cmd_gen_stream(&cb).unwrap();
        for &seed in &ca.seeds {
            let fa = fs::read(seed_dir(&ca, "synthetic", seed).join(STREAM_FILE)).unwrap();
            let fb = fs::read(seed_dir(&cb, "synthetic", seed).join(STREAM_FILE)).unwrap();
            assert_eq!(fa, fb, "{}", ca.mode_label());
        }
    }
}

#[test]
fn inspect_reports_zero_overlap_for_hard_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path());
    let report: serde_json::Value = serde_json::from_str(&cmd_inspect(&cfg).unwrap()).unwrap();
    assert_eq!(report["overlap_index"], 0.0);
    let curve = fs::read_to_string(mode_dir(&cfg, "synthetic").join("mixing_curve.csv")).unwrap();
    assert!(curve.starts_with("t,alpha_0,alpha_1,alpha_2,alpha_3,alpha_4\n"));
    let gaussian = with(
        &cfg,
        Overrides {
            mode: Some("gaussian".into()),
            sigma: Some(20.0),
            ..Overrides::default()
        },
    );
    let report: serde_json::Value = serde_json::from_str(&cmd_inspect(&gaussian).unwrap()).unwrap();
    assert!(report["overlap_index"].as_f64().unwrap() > 0.5);
}

#[test]
fn full_pipeline_reports_three_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path());
    cmd_run(&cfg).unwrap();
    let table = cmd_report(&cfg).unwrap();
    for metric in ["AA", "AF", "AUC", "AF_s"] {
        assert!(table.lines().any(|l| l.starts_with(metric)), "{table}");
    }
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(artifact(&mode_dir(&cfg, "synthetic"), "report", LearnerKind::Er, "json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["per_seed"].as_object().unwrap().len(), 3);
    for key in ["aa", "af", "auc", "af_s"] {
        assert!(report["mean"][key].is_number());
        assert!(report["std"][key].as_f64().unwrap() >= 0.0);
    }
    let csv = fs::read_to_string(artifact(&mode_dir(&cfg, "synthetic"), "report", LearnerKind::Er, "csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);

    // Re-scoring the written logs reproduces the metrics from the run.
    let seed1 = seed_dir(&cfg, "synthetic", 1);
    let before = fs::read_to_string(artifact(&seed1, "metrics", LearnerKind::Er, "json")).unwrap();
    cmd_eval(&cfg, None, None).unwrap();
    let after = fs::read_to_string(artifact(&seed1, "metrics", LearnerKind::Er, "json")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn persisted_config_reproduces_artifacts() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let cfg = with(
        &config_in(first.path()),
        Overrides {
            seeds: vec![2],
            learner: Some("agem".into()),
            mode: Some("gaussian".into()),
            sigma: Some(4.0),
            ..Overrides::default()
        },
    );
    cmd_run(&cfg).unwrap();
    let dir = seed_dir(&cfg, "synthetic", 2);
    let mut echoed = RunConfig::load(&dir.join("config.json")).unwrap();
    echoed.output_dir = Some(second.path().to_path_buf());
    cmd_run(&echoed).unwrap();
    let again = seed_dir(&echoed, "synthetic", 2);
    for name in [STREAM_FILE, "predictions_agem.csv", "model_agem.ckpt", "metrics_agem.json", "matrix_agem.csv"] {
        assert_eq!(fs::read(dir.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn external_prediction_log_is_scored_like_internal_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(
        &config_in(dir.path()),
        Overrides {
            seeds: vec![1],
            learner: Some("bare".into()),
            ..Overrides::default()
        },
    );
    cmd_run(&cfg).unwrap();
    let seed1 = seed_dir(&cfg, "synthetic", 1);
    let external = dir.path().join("external.csv");
    // An external trainer may order rows however it likes.
    let log = fs::read_to_string(artifact(&seed1, "predictions", LearnerKind::Bare, "csv")).unwrap();
    let mut lines: Vec<&str> = log.lines().skip(1).collect();
    lines.reverse();
    fs::write(&external, format!("{PREDICTION_LOG_HEADER}\n{}\n", lines.join("\n"))).unwrap();
    let scored: serde_json::Value =
        serde_json::from_str(&cmd_eval(&cfg, Some(&external), Some(&seed1.join(STREAM_FILE))).unwrap())
            .unwrap();
    let internal: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(artifact(&seed1, "metrics", LearnerKind::Bare, "json")).unwrap())
            .unwrap();
    assert_eq!(scored, internal);
}

#[test]
fn stream_file_layout_matches_the_documented_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with(
        &config_in(dir.path()),
        Overrides {
            seeds: vec![3],
            mode: Some("gaussian".into()),
            sigma: Some(2.5),
            ..Overrides::default()
        },
    );
    cmd_gen_stream(&cfg).unwrap();
    let path = seed_dir(&cfg, "synthetic", 3).join(STREAM_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let (header, body) = text.split_once('\n').unwrap();
    let h: serde_json::Value = serde_json::from_str(header).unwrap();
    let keys: Vec<&String> = h.as_object().unwrap().keys().collect();
    assert_eq!(
        keys,
        [
            "batch_size", "dataset", "digest", "digest_algorithm", "format_version", "mode", "rng", "sampling", "seed",
            "sigma", "stream_length", "task_count"
        ]
    );
    assert_eq!(h["format_version"], FORMAT_VERSION);
    assert_eq!(h["digest_algorithm"], DIGEST_ALGORITHM);
    assert_eq!(h["sigma"], "2.5");
    assert!(!header.contains(' '), "header is compact JSON");
    let stream = read_stream(&path).unwrap();
    assert_eq!(body.lines().count(), stream.len());
    for (t, line) in body.lines().enumerate() {
        let (index, items) = line.split_once('|').unwrap();
        assert_eq!(index.parse::<usize>().unwrap(), t);
        for item in items.split(',') {
            let (node, task) = item.split_once(':').unwrap();
            node.parse::<usize>().unwrap();
            assert!(task.parse::<usize>().unwrap() < 5);
        }
    }
}

fn taskfree(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_taskfree"))
        .args(args)
        .env("TASKFREE_OUT", out)
        .output()
        .unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = taskfree(&["gen-stream", "--seed", "1"], dir.path());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("synthetic/hard/1/stream.tfs").exists(), "env var sets the output root");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"batch_size": 0}"#).unwrap();
    let out = taskfree(&["gen-stream", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));

    let stream = dir.path().join("synthetic/hard/1/stream.tfs");
    let text = fs::read_to_string(&stream).unwrap();
    fs::write(&stream, text.replacen("|", "|9", 1)).unwrap();
    let log = dir.path().join("log.csv");
    fs::write(&log, format!("{PREDICTION_LOG_HEADER}\n")).unwrap();
    let out = taskfree(
        &["eval", "--seed", "1", "--log", log.to_str().unwrap(), "--stream", stream.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest"));
}

#[test]
fn ingest_reads_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_dataset(&SynthSpec {
        name: "ring".into(),
        classes: 4,
        nodes_per_class: 10,
        feature_dim: 3,
        class_center_separation: 2.0,
        intra_edge_prob: 0.3,
        inter_edge_prob: 0.05,
        test_fraction: 0.2,
        seed: 1,
    })
    .unwrap();
    let nodes = dir.path().join("ring_nodes.csv");
    let edges = dir.path().join("ring_edges.csv");
    write_dataset(&ds, &nodes, &edges).unwrap();
    let out = taskfree(
        &["ingest", "--nodes", nodes.to_str().unwrap(), "--edges", edges.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["name"], "ring");
    assert_eq!(summary["node_count"], 40);
    assert_eq!(summary["task_count"], 2);
    assert_eq!(summary["edge_count"], ds.edges.len());
    assert!(dir.path().join("ring/dataset.json").exists());
}
