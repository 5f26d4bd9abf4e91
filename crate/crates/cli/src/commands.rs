use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use taskfree_core::graph::{graph_stats, load_dataset, partition_tasks, GraphDataset, TaskPartition};
use taskfree_core::learners::{propagate, train_joint, FrozenLearner, Learner, LearnerKind, OnlineLearner};
use taskfree_core::metrics::{aggregate_seeds, evaluate_stream, read_prediction_log, MetricReport, RunMetrics};
use taskfree_core::sampler::{empirical_overlap, generate_stream, Stream};
use taskfree_core::schedule::{build_schedule, export_mixing_curve, overlap_index};
use taskfree_core::stream_io::{read_stream, write_stream};
use taskfree_core::{Error, Result};

use crate::config::{DatasetSource, RunConfig};

pub const STREAM_FILE: &str = "stream.tfs";
pub const CONFIG_FILE: &str = "config.json";

/// Environment variable naming the output root when the config has none.
pub const OUT_ENV: &str = "TASKFREE_OUT";

pub fn output_root(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// `<out>/<dataset>/<mode>`
pub fn mode_dir(cfg: &RunConfig, dataset: &str) -> PathBuf {
    output_root(cfg).join(dataset).join(cfg.mode_label())
}

/// `<out>/<dataset>/<mode>/<seed>`
pub fn seed_dir(cfg: &RunConfig, dataset: &str, seed: u64) -> PathBuf {
    mode_dir(cfg, dataset).join(seed.to_string())
}

pub fn artifact(dir: &Path, stem: &str, learner: LearnerKind, ext: &str) -> PathBuf {
    dir.join(format!("{stem}_{}.{ext}", learner.name()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("json value serializes") + "\n"
}

/// The effective configuration of a single seed, written next to its outputs.
fn persist_config(cfg: &RunConfig, dir: &Path, seed: u64) -> Result<()> {
    let single = RunConfig {
        seeds: vec![seed],
        output_dir: Some(output_root(cfg)),
        ..cfg.clone()
    };
    write_text(&dir.join(CONFIG_FILE), &single.to_canonical())
}

struct Prepared {
    ds: GraphDataset,
    partition: TaskPartition,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let ds = cfg.dataset()?;
    let partition = partition_tasks(&ds, cfg.classes_per_task)?;
    Ok(Prepared { ds, partition })
}

fn stream_for(cfg: &RunConfig, p: &Prepared, seed: u64) -> Result<Stream> {
    generate_stream(&p.ds, &p.partition, &cfg.schedule(seed), cfg.sampling)
}

/// Loads the dataset, reports its structure, and writes `dataset.json`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<String> {
    let p = prepare(cfg)?;
    let (duplicates, loops) = match &cfg.dataset {
        DatasetSource::Files { nodes, edges } => {
            let (_, report) = load_dataset(nodes, edges)?;
            (report.duplicate_edges, report.self_loops)
        }
        DatasetSource::Synthetic(_) => (0, 0),
    };
    let stats = graph_stats(&p.ds, &p.partition);
    let summary = json!({
        "name": p.ds.name,
        "node_count": p.ds.node_count,
        "edge_count": p.ds.edges.len(),
        "feature_dim": p.ds.feature_dim,
        "class_count": p.ds.class_count,
        "task_count": p.partition.len(),
        "task_sizes": p.partition.sizes(),
        "train_count": p.ds.train_nodes().count(),
        "test_count": p.ds.test_nodes().count(),
        "duplicate_edges": duplicates,
        "self_loops": loops,
        "stats": stats,
    });
    let dir = output_root(cfg).join(&p.ds.name);
    create_dir(&dir)?;
    let text = pretty(&summary);
    write_text(&dir.join("dataset.json"), &text)?;
    Ok(text)
}

/// Writes one stream file per seed and returns `seed path digest` lines.
pub fn cmd_gen_stream(cfg: &RunConfig) -> Result<String> {
    let p = prepare(cfg)?;
    let mut out = String::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(cfg, &p.ds.name, seed);
        create_dir(&dir)?;
        let stream = stream_for(cfg, &p, seed)?;
        let path = dir.join(STREAM_FILE);
        let digest = write_stream(&stream, &path)?;
        persist_config(cfg, &dir, seed)?;
        let _ = writeln!(out, "seed {seed}\t{}\tdigest {digest}", path.display());
    }
    Ok(out)
}

/// Overlap index, mixing curve, and graph statistics for the configured
/// schedule. Modes without explicit weights report the overlap measured on
/// the first seed's stream instead.
pub fn cmd_inspect(cfg: &RunConfig) -> Result<String> {
    let p = prepare(cfg)?;
    let seed = cfg.seeds[0];
    let dir = mode_dir(cfg, &p.ds.name);
    create_dir(&dir)?;
    let schedule_cfg = cfg.schedule(seed);
    let (overlap, source, curve) = if cfg.transition.has_weights() {
        let schedule = build_schedule(&p.partition, &schedule_cfg)?;
        let curve = dir.join("mixing_curve.csv");
        export_mixing_curve(&schedule, &curve)?;
        (overlap_index(&schedule, cfg.dominance_threshold)?, "schedule", Some(curve))
    } else {
        let stream = stream_for(cfg, &p, seed)?;
        (empirical_overlap(&stream, cfg.dominance_threshold)?, "stream", None)
    };
    let report = json!({
        "dataset": p.ds.name,
        "mode": cfg.mode_label(),
        "dominance_threshold": cfg.dominance_threshold,
        "overlap_index": overlap,
        "overlap_source": source,
        "mixing_curve": curve.map(|c| c.display().to_string()),
        "stats": graph_stats(&p.ds, &p.partition),
    });
    let text = pretty(&report);
    write_text(&dir.join("inspect.json"), &text)?;
    Ok(text)
}

/// Trains the configured learner on each seed's stream, writing the stream,
/// prediction log, checkpoint, accuracy matrix, and per-run metrics.
pub fn cmd_run(cfg: &RunConfig) -> Result<String> {
    let p = prepare(cfg)?;
    let features = propagate(&p.ds, cfg.hops)?;
    let mut out = String::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(cfg, &p.ds.name, seed);
        create_dir(&dir)?;
        let stream = stream_for(cfg, &p, seed)?;
        write_stream(&stream, &dir.join(STREAM_FILE))?;
        persist_config(cfg, &dir, seed)?;

        let train = cfg.train_config(seed);
        let mut learner: Box<dyn Learner> = match cfg.learner {
            LearnerKind::Joint => Box::new(FrozenLearner(train_joint(&p.ds, &p.partition, &features, &train)?)),
            kind => Box::new(OnlineLearner::new(kind, p.ds.class_count, features.dim(), train)?),
        };
        let log_path = artifact(&dir, "predictions", cfg.learner, "csv");
        let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let mut log = BufWriter::new(file);
        let eval = evaluate_stream(
            learner.as_mut(),
            &stream,
            &p.ds,
            &p.partition,
            &features,
            cfg.eval_interval,
            Some(&mut log),
        )?;
        log.flush().map_err(|e| Error::io(&log_path, e))?;

        learner.model().save(&artifact(&dir, "model", cfg.learner, "ckpt"))?;
        write_text(&artifact(&dir, "matrix", cfg.learner, "csv"), &eval.matrix.to_csv())?;
        let metrics = RunMetrics::from_matrix(&eval.matrix);
        write_metrics(&dir, cfg.learner, &metrics)?;
        let _ = writeln!(
            out,
            "seed {seed}\t{}\tAA {:.4}  AF {:.4}  AUC {:.4}  AF_s {:.4}",
            cfg.learner.name(),
            metrics.aa,
            metrics.af,
            metrics.auc,
            metrics.af_s
        );
    }
    Ok(out)
}

fn write_metrics(dir: &Path, learner: LearnerKind, metrics: &RunMetrics) -> Result<()> {
    let value = serde_json::to_value(metrics).expect("metrics serialize");
    write_text(&artifact(dir, "metrics", learner, "json"), &pretty(&value))
}

/// Scores prediction logs. With `log` set, that single file is scored against
/// `stream` (default: the first seed's stream); otherwise every seed's
/// in-layout log is re-scored and its metrics file rewritten.
pub fn cmd_eval(cfg: &RunConfig, log: Option<&Path>, stream: Option<&Path>) -> Result<String> {
    let p = prepare(cfg)?;
    if let Some(log) = log {
        let stream_path = stream
            .map(Path::to_path_buf)
            .unwrap_or_else(|| seed_dir(cfg, &p.ds.name, cfg.seeds[0]).join(STREAM_FILE));
        let s = read_stream(&stream_path)?;
        check_stream_matches(&s, &p)?;
        let matrix = read_prediction_log(log, &p.ds, &p.partition, Some(s.len()))?;
        let value = serde_json::to_value(RunMetrics::from_matrix(&matrix)).expect("metrics serialize");
        return Ok(pretty(&value));
    }
    let mut out = String::new();
    for &seed in &cfg.seeds {
        let dir = seed_dir(cfg, &p.ds.name, seed);
        let s = read_stream(&dir.join(STREAM_FILE))?;
        check_stream_matches(&s, &p)?;
        let matrix = read_prediction_log(
            &artifact(&dir, "predictions", cfg.learner, "csv"),
            &p.ds,
            &p.partition,
            Some(s.len()),
        )?;
        let metrics = RunMetrics::from_matrix(&matrix);
        write_metrics(&dir, cfg.learner, &metrics)?;
        let _ = writeln!(
            out,
            "seed {seed}\t{}\tAA {:.4}  AF {:.4}  AUC {:.4}  AF_s {:.4}",
            cfg.learner.name(),
            metrics.aa,
            metrics.af,
            metrics.auc,
            metrics.af_s
        );
    }
    Ok(out)
}

fn check_stream_matches(stream: &Stream, p: &Prepared) -> Result<()> {
    let prov = &stream.provenance;
    if prov.dataset != p.ds.name || prov.task_count != p.partition.len() {
        return Err(Error::Validation(format!(
            "stream was built for {} with {} tasks, config describes {} with {}",
            prov.dataset,
            prov.task_count,
            p.ds.name,
            p.partition.len()
        )));
    }
    Ok(())
}

/// Aggregates per-seed metrics into `report_<learner>.json`/`.csv` and
/// returns a text table.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let name = match &cfg.dataset {
        DatasetSource::Synthetic(spec) => spec.name.clone(),
        DatasetSource::Files { .. } => cfg.dataset()?.name,
    };
    let mut runs = BTreeMap::new();
    for &seed in &cfg.seeds {
        let path = artifact(&seed_dir(cfg, &name, seed), "metrics", cfg.learner, "json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: RunMetrics = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&path, e.line(), format!("bad metrics file: {e}")))?;
        runs.insert(seed, m);
    }
    let report = aggregate_seeds(&runs)?;
    let dir = mode_dir(cfg, &name);
    write_text(&artifact(&dir, "report", cfg.learner, "json"), &report.to_json())?;
    write_text(&artifact(&dir, "report", cfg.learner, "csv"), &report_csv(&report))?;
    Ok(report_table(&report, cfg.learner, &name, &cfg.mode_label()))
}

pub fn report_csv(r: &MetricReport) -> String {
    let mut out = String::from("seed,aa,af,auc,af_s\n");
    let mut row = |label: &str, m: &RunMetrics| {
        let _ = writeln!(out, "{label},{},{},{},{}", m.aa, m.af, m.auc, m.af_s);
    };
    for (seed, m) in &r.per_seed {
        row(&seed.to_string(), m);
    }
    row("mean", &r.mean);
    row("std", &r.std);
    out
}

pub fn report_table(r: &MetricReport, learner: LearnerKind, dataset: &str, mode: &str) -> String {
    let mut out = format!(
        "{} on {dataset} ({mode}), {} seed(s)\n{:<6}{:>10}{:>10}\n",
        learner.name(),
        r.per_seed.len(),
        "metric",
        "mean",
        "std"
    );
    for (label, mean, std) in [
        ("AA", r.mean.aa, r.std.aa),
        ("AF", r.mean.af, r.std.af),
        ("AUC", r.mean.auc, r.std.auc),
        ("AF_s", r.mean.af_s, r.std.af_s),
    ] {
        let _ = writeln!(out, "{label:<6}{mean:>10.4}{std:>10.4}");
    }
    out
}
