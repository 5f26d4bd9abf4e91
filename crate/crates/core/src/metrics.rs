//! Accuracy-matrix recording along a stream and the stream-level metrics
//! computed from it: AA, signed AF, A_AUC, and AF_s, plus seed aggregation.
//!
//! Row `i` of the matrix holds per-task test accuracy after `steps[i]`
//! batches. Rows sit at every `interval`-th batch, and a final row after the
//! last batch is always present.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, TaskPartition};
use crate::learners::{predict, LabeledBatch, Learner, PropagatedFeatures, StepReport};
use crate::sampler::Stream;

pub const PREDICTION_LOG_HEADER: &str = "eval_step,node_index,predicted_class";

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    /// Batches processed before each row was measured, strictly increasing.
    pub steps: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub interval: usize,
    pub total: usize,
}

/// Evaluation points for a stream of `total` batches.
pub fn eval_steps(total: usize, interval: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (1..=total / interval).map(|j| j * interval).collect();
    if steps.last() != Some(&total) {
        steps.push(total);
    }
    steps
}

impl AccuracyMatrix {
    pub fn new(steps: Vec<usize>, rows: Vec<Vec<f64>>, interval: usize, total: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::Config("evaluation interval must be at least 1".into()));
        }
        if steps != eval_steps(total, interval) {
            return Err(Error::Validation(format!(
                "evaluation steps do not match interval {interval} over {total} batches"
            )));
        }
        let width = rows.first().map_or(0, Vec::len);
        if rows.len() != steps.len() || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Validation("accuracy matrix rows are ragged or empty".into()));
        }
        if rows.iter().flatten().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Validation("accuracy entries must lie in [0, 1]".into()));
        }
        Ok(AccuracyMatrix {
            steps,
            rows,
            interval,
            total,
        })
    }

    pub fn task_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn final_row(&self) -> &[f64] {
        self.rows.last().expect("matrix has at least one row")
    }

    /// Rows on the regular grid, excluding an appended off-grid final row.
    pub fn grid_rows(&self) -> &[Vec<f64>] {
        let m = self.total / self.interval;
        &self.rows[..m]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for k in 0..self.task_count() {
            let _ = write!(out, ",task_{k}");
        }
        out.push('\n');
        for (step, row) in self.steps.iter().zip(&self.rows) {
            let _ = write!(out, "{step}");
            for a in row {
                let _ = write!(out, ",{a}");
            }
            out.push('\n');
        }
        out
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Average accuracy over tasks after the final batch.
pub fn compute_aa(m: &AccuracyMatrix) -> f64 {
    mean(m.final_row().iter().copied())
}

fn forgetting(rows: &[Vec<f64>], last: &[f64]) -> f64 {
    mean((0..last.len()).map(|k| {
        let best = rows.iter().map(|r| r[k]).fold(last[k], f64::max);
        last[k] - best
    }))
}

/// Signed forgetting: mean over tasks of final minus best accuracy, so it is
/// never positive. The unsigned magnitude is `compute_af(m).abs()`.
pub fn compute_af(m: &AccuracyMatrix) -> f64 {
    forgetting(&m.rows, m.final_row())
}

/// Area under the task-averaged accuracy curve sampled on the regular grid.
/// A stream shorter than one interval falls back to the final row.
pub fn compute_auc(m: &AccuracyMatrix) -> f64 {
    let grid = m.grid_rows();
    if grid.is_empty() {
        return compute_aa(m);
    }
    mean(grid.iter().map(|r| mean(r.iter().copied())))
}

/// Boundary-free forgetting: the AF formula restricted to the regular
/// evaluation grid plus the final row. On matrices built here it equals
/// [`compute_af`], since those hold no other rows.
pub fn compute_af_s(m: &AccuracyMatrix) -> f64 {
    forgetting(m.grid_rows(), m.final_row())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub aa: f64,
    pub af: f64,
    pub auc: f64,
    pub af_s: f64,
}

impl RunMetrics {
    pub fn from_matrix(m: &AccuracyMatrix) -> Self {
        RunMetrics {
            aa: compute_aa(m),
            af: compute_af(m),
            auc: compute_auc(m),
            af_s: compute_af_s(m),
        }
    }

    fn fields(&self) -> [f64; 4] {
        [self.aa, self.af, self.auc, self.af_s]
    }

    fn from_fields(f: [f64; 4]) -> Self {
        RunMetrics {
            aa: f[0],
            af: f[1],
            auc: f[2],
            af_s: f[3],
        }
    }
}

/// Sample mean and unbiased standard deviation; one value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values.iter().copied());
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_seed: BTreeMap<u64, RunMetrics>,
    pub mean: RunMetrics,
    pub std: RunMetrics,
}

pub fn aggregate_seeds(runs: &BTreeMap<u64, RunMetrics>) -> Result<MetricReport> {
    if runs.is_empty() {
        return Err(Error::Validation("cannot aggregate zero seeds".into()));
    }
    let mut mean_f = [0.0; 4];
    let mut std_f = [0.0; 4];
    for i in 0..4 {
        let values: Vec<f64> = runs.values().map(|r| r.fields()[i]).collect();
        (mean_f[i], std_f[i]) = mean_std(&values);
    }
    Ok(MetricReport {
        per_seed: runs.clone(),
        mean: RunMetrics::from_fields(mean_f),
        std: RunMetrics::from_fields(std_f),
    })
}

impl MetricReport {
    /// Pretty JSON with keys in sorted order.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("value serializes") + "\n"
    }
}

/// Outcome of feeding a stream to a learner while recording accuracies.
#[derive(Debug, Clone)]
pub struct StreamEvaluation {
    pub matrix: AccuracyMatrix,
    pub reports: Vec<StepReport>,
}

fn task_test_sets(partition: &TaskPartition) -> Result<Vec<&[usize]>> {
    partition
        .tasks
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if t.test_nodes.is_empty() {
                Err(Error::Validation(format!("task {k} has an empty test set")))
            } else {
                Ok(t.test_nodes.as_slice())
            }
        })
        .collect()
}

/// Streams every batch through `learner`, measuring all task test sets after
/// each `interval`-th batch and after the last. When `log` is given, every
/// test prediction is written as a prediction-log row.
pub fn evaluate_stream(
    learner: &mut dyn Learner,
    stream: &Stream,
    ds: &GraphDataset,
    partition: &TaskPartition,
    features: &PropagatedFeatures,
    interval: usize,
    mut log: Option<&mut dyn Write>,
) -> Result<StreamEvaluation> {
    if interval == 0 {
        return Err(Error::Config("evaluation interval must be at least 1".into()));
    }
    let tests = task_test_sets(partition)?;
    let total = stream.len();
    let interval = interval.min(total.max(1));
    let steps = eval_steps(total, interval);
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "{PREDICTION_LOG_HEADER}").map_err(|e| Error::io("<prediction log>", e))?;
    }
    let mut rows = Vec::with_capacity(steps.len());
    let mut reports = Vec::with_capacity(total);
    let mut next = steps.iter().peekable();
    for (t, batch) in stream.batches.iter().enumerate() {
        let view = LabeledBatch::from_stream_batch(batch, &ds.labels);
        reports.push(learner.observe(view.view(features))?);
        if next.peek() == Some(&&(t + 1)) {
            next.next();
            let model = learner.model();
            let mut row = Vec::with_capacity(tests.len());
            for nodes in &tests {
                let preds = predict(model, features, nodes);
                let hits = nodes.iter().zip(&preds).filter(|(&n, &p)| ds.labels[n] == p).count();
                row.push(hits as f64 / nodes.len() as f64);
                if let Some(w) = log.as_deref_mut() {
                    let mut chunk = String::new();
                    for (n, p) in nodes.iter().zip(&preds) {
                        let _ = writeln!(chunk, "{},{n},{p}", t + 1);
                    }
                    w.write_all(chunk.as_bytes()).map_err(|e| Error::io("<prediction log>", e))?;
                }
            }
            rows.push(row);
        }
    }
    Ok(StreamEvaluation {
        matrix: AccuracyMatrix::new(steps, rows, interval, total)?,
        reports,
    })
}

/// Rebuilds the accuracy matrix from prediction-log text. The interval is
/// the first logged step and the stream length the last, unless `total` is
/// given, in which case the log must reach it.
pub fn score_prediction_log(
    text: &str,
    ds: &GraphDataset,
    partition: &TaskPartition,
    total: Option<usize>,
) -> Result<AccuracyMatrix> {
    let tests = task_test_sets(partition)?;
    let mut task_of = HashMap::new();
    for (k, nodes) in tests.iter().enumerate() {
        for &n in *nodes {
            task_of.insert(n, k);
        }
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PREDICTION_LOG_HEADER => {}
        _ => return Err(Error::parse("<prediction log>", 1, "missing header")),
    }
    let mut by_step: BTreeMap<usize, HashMap<usize, usize>> = BTreeMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::parse("<prediction log>", i + 1, msg);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [step, node, class] = fields[..] else {
            return Err(bad("expected three fields"));
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("expected a nonnegative integer"));
        let (step, node, class) = (parse(step)?, parse(node)?, parse(class)?);
        if step == 0 {
            return Err(bad("eval_step starts at 1"));
        }
        if node >= ds.node_count {
            return Err(Error::Validation(format!("line {}: unknown node {node}", i + 1)));
        }
        if !task_of.contains_key(&node) {
            return Err(Error::Validation(format!(
                "line {}: node {node} is not a test node; only test predictions may be logged",
                i + 1
            )));
        }
        if class >= ds.class_count {
            return Err(Error::Validation(format!("line {}: class {class} out of range", i + 1)));
        }
        if by_step.entry(step).or_default().insert(node, class).is_some() {
            return Err(Error::Validation(format!(
                "line {}: duplicate prediction for node {node} at step {step}",
                i + 1
            )));
        }
    }
    let (&first, _) = by_step.first_key_value().ok_or_else(|| Error::Validation("empty prediction log".into()))?;
    let last = *by_step.keys().next_back().unwrap();
    let total = total.unwrap_or(last);
    let interval = first.min(total);
    let expected = eval_steps(total, interval);
    for step in &expected {
        if !by_step.contains_key(step) {
            return Err(Error::Validation(format!("missing eval step {step}")));
        }
    }
    if let Some(extra) = by_step.keys().find(|s| !expected.contains(s)) {
        return Err(Error::Validation(format!(
            "eval step {extra} is off the grid of interval {interval} over {total} batches"
        )));
    }
    let mut rows = Vec::with_capacity(expected.len());
    for step in &expected {
        let preds = &by_step[step];
        let mut row = Vec::with_capacity(tests.len());
        for nodes in &tests {
            let mut hits = 0;
            for n in *nodes {
                let p = preds
                    .get(n)
                    .ok_or_else(|| Error::Validation(format!("missing prediction for node {n} at step {step}")))?;
                hits += usize::from(*p == ds.labels[*n]);
            }
            row.push(hits as f64 / nodes.len() as f64);
        }
        rows.push(row);
    }
    AccuracyMatrix::new(expected, rows, interval, total)
}

pub fn read_prediction_log(
    path: &Path,
    ds: &GraphDataset,
    partition: &TaskPartition,
    total: Option<usize>,
) -> Result<AccuracyMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    score_prediction_log(&text, ds, partition, total).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::parse(path, line, msg),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>, interval: usize, total: usize) -> AccuracyMatrix {
        AccuracyMatrix::new(eval_steps(total, interval), rows, interval, total).unwrap()
    }

    #[test]
    fn grid_includes_final_step() {
        assert_eq!(eval_steps(10, 3), vec![3, 6, 9, 10]);
        assert_eq!(eval_steps(9, 3), vec![3, 6, 9]);
        assert_eq!(eval_steps(5, 5), vec![5]);
        assert_eq!(eval_steps(4, 9), vec![4]);
    }

    #[test]
    fn hand_computed_metrics() {
        let single = matrix(vec![vec![0.7]], 1, 1);
        assert_eq!(compute_aa(&single), 0.7);
        let m = matrix(vec![vec![0.1, 0.3], vec![0.2, 0.4]], 1, 2);
        assert!((compute_aa(&m) - 0.3).abs() < 1e-15);
        assert!((compute_auc(&m) - 0.25).abs() < 1e-15);
        assert_eq!(compute_af(&m), 0.0);
        let forgot = matrix(vec![vec![0.5], vec![0.9], vec![0.4]], 1, 3);
        assert!((compute_af(&forgot) + 0.5).abs() < 1e-15);
        assert!((compute_af_s(&forgot) + 0.5).abs() < 1e-15);
        assert!((compute_af(&forgot).abs() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn auc_uses_grid_rows_only() {
        // Interval 2 over 5 batches: grid rows at 2 and 4, final row at 5.
        let m = matrix(vec![vec![0.2], vec![0.4], vec![1.0]], 2, 5);
        assert!((compute_auc(&m) - 0.3).abs() < 1e-15);
        assert_eq!(compute_aa(&m), 1.0);
        let constant = matrix(vec![vec![0.5, 0.5]; 4], 1, 4);
        assert_eq!(compute_auc(&constant), 0.5);
    }

    #[test]
    fn aggregation() {
        let run = |aa| RunMetrics {
            aa,
            af: -aa,
            auc: aa,
            af_s: 0.0,
        };
        let runs: BTreeMap<u64, RunMetrics> = [(1, run(0.1)), (2, run(0.2)), (3, run(0.3))].into();
        let r = aggregate_seeds(&runs).unwrap();
        assert!((r.mean.aa - 0.2).abs() < 1e-15);
        assert!((r.std.aa - 0.1).abs() < 1e-15);
        assert_eq!(r.std.af_s, 0.0);
        let one: BTreeMap<u64, RunMetrics> = [(7, run(0.4))].into();
        assert_eq!(aggregate_seeds(&one).unwrap().std.aa, 0.0);
        assert!(aggregate_seeds(&BTreeMap::new()).is_err());
        let json = r.to_json();
        let keys: Vec<usize> = ["\"mean\"", "\"per_seed\"", "\"std\""].iter().map(|k| json.find(k).unwrap()).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn matrix_rejects_bad_shapes() {
        assert!(AccuracyMatrix::new(vec![1, 2], vec![vec![0.5]], 1, 2).is_err());
        assert!(AccuracyMatrix::new(vec![2], vec![vec![0.5]], 1, 2).is_err());
        assert!(AccuracyMatrix::new(vec![1], vec![vec![1.5]], 1, 1).is_err());
    }

    #[test]
    fn csv_export() {
        let m = matrix(vec![vec![0.5, 0.25]], 1, 1);
        assert_eq!(m.to_csv(), "step,task_0,task_1\n1,0.5,0.25\n");
    }
}
