//! Task centers, stream length, and per-step mixture weights.
//!
//! Time is measured in zero-based batch indices. Task `k` owns the hard window
//! `[start_k, start_k + len_k)` with `len_k = ceil(N_k / B)`; its center is
//! `start_k + len_k / 2`, the window midpoint. Batch `t` spans `[t, t + 1)` on
//! that axis, so Gaussian weights for batch `t` are evaluated at its midpoint
//! `t + 0.5`. This keeps every batch strictly inside one window, which is what
//! lets small `sigma` collapse onto the hard schedule.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TaskPartition;

/// Default dominance threshold for [`overlap_index`].
pub const DEFAULT_DOMINANCE_THRESHOLD: f64 = 0.95;

/// Offset from a batch index to the point where its weights are evaluated.
pub const BATCH_MIDPOINT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TransitionMode {
    Hard,
    Gaussian { sigma: f64 },
    GlobalMix { mix_fraction: f64 },
    BoundaryLocal { window: usize },
}

impl TransitionMode {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionMode::Hard => "hard",
            TransitionMode::Gaussian { .. } => "gaussian",
            TransitionMode::GlobalMix { .. } => "global_mix",
            TransitionMode::BoundaryLocal { .. } => "boundary_local",
        }
    }

    /// True when the schedule carries an explicit weight matrix.
    pub fn has_weights(&self) -> bool {
        matches!(self, TransitionMode::Hard | TransitionMode::Gaussian { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub batch_size: usize,
    #[serde(flatten)]
    pub mode: TransitionMode,
    pub seed: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        match self.mode {
            TransitionMode::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Config(format!("sigma must be positive and finite, got {sigma}")))
            }
            TransitionMode::GlobalMix { mix_fraction } if !(0.0..=1.0).contains(&mix_fraction) => {
                Err(Error::Config(format!("mix_fraction must lie in [0, 1], got {mix_fraction}")))
            }
            _ => Ok(()),
        }
    }
}

/// Contiguous run of batch indices a task owns under hard transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskWindow {
    pub start: usize,
    pub len: usize,
}

impl TaskWindow {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..self.end()).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSchedule {
    pub centers: Vec<f64>,
    pub windows: Vec<TaskWindow>,
    pub task_sizes: Vec<usize>,
    pub stream_length: usize,
    /// `stream_length x K` weights; `None` for modes whose mixing is defined
    /// on sample pools rather than per-step weights.
    pub weights: Option<Vec<Vec<f64>>>,
    pub config: ScheduleConfig,
}

impl TransitionSchedule {
    pub fn task_count(&self) -> usize {
        self.centers.len()
    }

    /// Task whose hard window contains batch `t`.
    pub fn hard_task_at(&self, t: usize) -> Option<usize> {
        self.windows.iter().position(|w| w.contains(t))
    }
}

fn check_sizes(sizes: &[usize], batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if sizes.is_empty() {
        return Err(Error::Validation("partition has no tasks".into()));
    }
    if let Some(k) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::Validation(format!("task {k} has no train nodes")));
    }
    Ok(())
}

/// Hard windows: `len_k = ceil(N_k / B)`, laid end to end from zero.
pub fn task_windows(sizes: &[usize], batch_size: usize) -> Result<Vec<TaskWindow>> {
    check_sizes(sizes, batch_size)?;
    let mut start = 0;
    Ok(sizes
        .iter()
        .map(|&n| {
            let w = TaskWindow {
                start,
                len: n.div_ceil(batch_size),
            };
            start += w.len;
            w
        })
        .collect())
}

/// `mu_k = sum_{i<k} ceil(N_i/B) + ceil(N_k/B) / 2`.
pub fn task_centers(partition: &TaskPartition, batch_size: usize) -> Result<Vec<f64>> {
    Ok(task_windows(&partition.sizes(), batch_size)?
        .iter()
        .map(|w| w.start as f64 + w.len as f64 / 2.0)
        .collect())
}

/// `T = sum_k ceil(N_k / B)`.
pub fn stream_length(partition: &TaskPartition, batch_size: usize) -> Result<usize> {
    Ok(task_windows(&partition.sizes(), batch_size)?.last().map_or(0, TaskWindow::end))
}

/// Normalized Gaussian kernel weights at time `t`.
///
/// The kernel exponents are shifted by their maximum before exponentiation,
/// so the dominant task always has kernel value 1 and the sum never
/// underflows; far-away tasks underflow to exactly zero.
pub fn gaussian_weights(t: f64, centers: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive and finite, got {sigma}")));
    }
    if centers.is_empty() {
        return Err(Error::Validation("no task centers".into()));
    }
    let denom = 2.0 * sigma * sigma;
    let exponents: Vec<f64> = centers.iter().map(|mu| -(t - mu) * (t - mu) / denom).collect();
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kernels: Vec<f64> = exponents.iter().map(|e| (e - top).exp()).collect();
    let total: f64 = kernels.iter().sum();
    Ok(kernels.into_iter().map(|k| k / total).collect())
}

/// One-hot weights selecting the task whose hard window contains `t`.
pub fn hard_weights(t: usize, partition: &TaskPartition, batch_size: usize) -> Result<Vec<f64>> {
    let windows = task_windows(&partition.sizes(), batch_size)?;
    let total = windows.last().map_or(0, TaskWindow::end);
    let k = windows.iter().position(|w| w.contains(t)).ok_or_else(|| {
        Error::Validation(format!("batch index {t} is outside the stream of length {total}"))
    })?;
    let mut w = vec![0.0; windows.len()];
    w[k] = 1.0;
    Ok(w)
}

pub fn build_schedule(partition: &TaskPartition, config: &ScheduleConfig) -> Result<TransitionSchedule> {
    config.validate()?;
    let task_sizes = partition.sizes();
    let windows = task_windows(&task_sizes, config.batch_size)?;
    let centers: Vec<f64> = windows
        .iter()
        .map(|w| w.start as f64 + w.len as f64 / 2.0)
        .collect();
    let stream_length = windows.last().map_or(0, TaskWindow::end);
    let k = windows.len();
    let weights = match config.mode {
        TransitionMode::Hard => Some(
            (0..stream_length)
                .map(|t| {
                    let mut row = vec![0.0; k];
                    // Windows tile [0, T) so exactly one matches.
                    row[windows.iter().position(|w| w.contains(t)).unwrap_or(0)] = 1.0;
                    row
                })
                .collect(),
        ),
        TransitionMode::Gaussian { sigma } => Some(
            (0..stream_length)
                .map(|t| gaussian_weights(t as f64 + BATCH_MIDPOINT, &centers, sigma))
                .collect::<Result<Vec<_>>>()?,
        ),
        TransitionMode::GlobalMix { .. } | TransitionMode::BoundaryLocal { .. } => None,
    };
    Ok(TransitionSchedule {
        centers,
        windows,
        task_sizes,
        stream_length,
        weights,
        config: *config,
    })
}

/// Fraction of steps at which no task's weight reaches `tau`.
pub fn overlap_index(schedule: &TransitionSchedule, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("dominance threshold must lie in (0, 1], got {tau}")));
    }
    let weights = schedule.weights.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "overlap index needs explicit weights; {} schedules have none",
            schedule.config.mode.name()
        ))
    })?;
    if weights.is_empty() {
        return Ok(0.0);
    }
    let mixed = weights
        .iter()
        .filter(|row| row.iter().copied().fold(0.0, f64::max) < tau)
        .count();
    Ok(mixed as f64 / weights.len() as f64)
}

/// Writes `t,alpha_0,...,alpha_{K-1}` rows with 9 significant digits.
pub fn export_mixing_curve(schedule: &TransitionSchedule, path: &Path) -> Result<()> {
    let weights = schedule.weights.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "{} schedules have no mixing curve to export",
            schedule.config.mode.name()
        ))
    })?;
    let mut out = String::from("t");
    for k in 0..schedule.task_count() {
        let _ = write!(out, ",alpha_{k}");
    }
    out.push('\n');
    for (t, row) in weights.iter().enumerate() {
        let _ = write!(out, "{t}");
        for a in row {
            let _ = write!(out, ",{a:.8e}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a mixing-curve CSV back into its weight matrix.
pub fn read_mixing_curve(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let width = match lines.next() {
        Some((_, h)) if h.starts_with("t,") || h == "t" => h.split(',').count() - 1,
        _ => return Err(Error::parse(path, 1, "expected `t,alpha_0,...` header")),
    };
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width + 1 {
            return Err(Error::parse(path, idx + 1, "wrong number of columns"));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "bad step index"))?;
        if t != rows.len() {
            return Err(Error::parse(path, idx + 1, format!("expected step {}, found {t}", rows.len())));
        }
        let row = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::parse(path, idx + 1, format!("bad weight {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
