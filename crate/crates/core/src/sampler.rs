//! Materializes schedules into fixed sequences of mini-batches.
//!
//! Randomness is drawn from named sub-streams of the configuration seed:
//! `queue(k, epoch)` shuffles task `k`'s sample queue, `draw(k, t)` feeds
//! with-replacement picks, `perm(t)` permutes batch `t`, and the pool-based
//! variants use `pool`, `inject`, and `boundary(k)`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, TaskPartition};
use crate::rng::substream;
use crate::schedule::{build_schedule, ScheduleConfig, TaskWindow, TransitionMode, TransitionSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    WithReplacement,
    WithoutReplacement,
}

impl Sampling {
    pub fn name(&self) -> &'static str {
        match self {
            Sampling::WithReplacement => "with_replacement",
            Sampling::WithoutReplacement => "without_replacement",
        }
    }
}

/// A sampled node plus the latent task it was drawn from. The origin is for
/// evaluation and analysis only; learners never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamItem {
    pub node: usize,
    pub origin_task: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamBatch {
    pub index: usize,
    pub items: Vec<StreamItem>,
}

impl StreamBatch {
    /// Items per origin task, indexed by task id.
    pub fn task_counts(&self, task_count: usize) -> Vec<usize> {
        let mut counts = vec![0; task_count];
        for item in &self.items {
            counts[item.origin_task] += 1;
        }
        counts
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|i| i.node)
    }
}

/// Everything needed to regenerate a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub dataset: String,
    pub task_count: usize,
    pub config: ScheduleConfig,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub batches: Vec<StreamBatch>,
    pub provenance: Provenance,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn item_count(&self) -> usize {
        self.batches.iter().map(|b| b.items.len()).sum()
    }
}

/// Splits `batch_size` slots across tasks: floors of `alpha_k * B`, then one
/// extra slot each to the largest fractional remainders (ties to the lower
/// task index) until the total is exactly `B`.
pub fn allocate_counts(weights: &[f64], batch_size: usize) -> Vec<usize> {
    let b = batch_size as f64;
    let scaled: Vec<f64> = weights.iter().map(|&a| a.max(0.0) * b).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (ri, rj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let mut total: usize = counts.iter().sum();
    let mut cursor = 0;
    while total < batch_size && !order.is_empty() {
        counts[order[cursor % order.len()]] += 1;
        total += 1;
        cursor += 1;
    }
    // Only reachable when the weights overshoot the simplex by >= 1/B.
    for &k in order.iter().rev().cycle() {
        if total <= batch_size {
            break;
        }
        if counts[k] > 0 {
            counts[k] -= 1;
            total -= 1;
        }
    }
    counts
}

/// Per-task sample queues and the seeded generators that drive them.
#[derive(Debug, Clone)]
pub struct SamplerState {
    seed: u64,
    pools: Vec<Vec<usize>>,
    queues: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    epochs: Vec<u64>,
}

impl SamplerState {
    pub fn new(partition: &TaskPartition, seed: u64) -> Self {
        let pools: Vec<Vec<usize>> = partition.tasks.iter().map(|t| t.train_nodes.clone()).collect();
        let queues = pools
            .iter()
            .enumerate()
            .map(|(k, pool)| shuffled(pool, seed, k, 0))
            .collect();
        SamplerState {
            seed,
            cursors: vec![0; pools.len()],
            epochs: vec![0; pools.len()],
            pools,
            queues,
        }
    }

    /// Current queue order of task `k`.
    pub fn queue(&self, k: usize) -> &[usize] {
        &self.queues[k]
    }

    pub fn cursor(&self, k: usize) -> usize {
        self.cursors[k]
    }

    fn check(&self, counts: &[usize]) -> Result<()> {
        if counts.len() != self.pools.len() {
            return Err(Error::Validation(format!(
                "{} counts for {} tasks",
                counts.len(),
                self.pools.len()
            )));
        }
        for (k, (&n, pool)) in counts.iter().zip(&self.pools).enumerate() {
            if n > 0 && pool.is_empty() {
                return Err(Error::Validation(format!("task {k} has no train nodes to sample")));
            }
        }
        Ok(())
    }

    fn pop(&mut self, k: usize) -> usize {
        if self.cursors[k] == self.queues[k].len() {
            self.epochs[k] += 1;
            self.queues[k] = shuffled(&self.pools[k], self.seed, k, self.epochs[k]);
            self.cursors[k] = 0;
        }
        let node = self.queues[k][self.cursors[k]];
        self.cursors[k] += 1;
        node
    }

    fn finish(&self, t: usize, mut items: Vec<StreamItem>) -> StreamBatch {
        items.shuffle(&mut substream(self.seed, "perm", t as u64, 0));
        StreamBatch { index: t, items }
    }
}

fn shuffled(pool: &[usize], seed: u64, task: usize, epoch: u64) -> Vec<usize> {
    let mut q = pool.to_vec();
    q.shuffle(&mut substream(seed, "queue", task as u64, epoch));
    q
}

/// Pops `counts[k]` items from each task queue, reshuffling a queue whenever
/// it runs dry, and returns them in a uniformly random order.
pub fn next_batch_without_replacement(state: &mut SamplerState, counts: &[usize], t: usize) -> Result<StreamBatch> {
    state.check(counts)?;
    let mut items = Vec::with_capacity(counts.iter().sum());
    for (k, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            items.push(StreamItem {
                node: state.pop(k),
                origin_task: k,
            });
        }
    }
    Ok(state.finish(t, items))
}

/// Draws each item independently and uniformly from its task's train nodes.
pub fn next_batch_with_replacement(state: &mut SamplerState, counts: &[usize], t: usize) -> Result<StreamBatch> {
    state.check(counts)?;
    let mut items = Vec::with_capacity(counts.iter().sum());
    for (k, &n) in counts.iter().enumerate() {
        let pool = &state.pools[k];
        let mut rng = substream(state.seed, "draw", k as u64, t as u64);
        for _ in 0..n {
            let idx = rng.gen_range(0..pool.len() as u64) as usize;
            items.push(StreamItem {
                node: pool[idx],
                origin_task: k,
            });
        }
    }
    Ok(state.finish(t, items))
}

/// Item count of every batch under hard transitions: full batches, with a
/// possibly short final batch closing each task window.
fn hard_counts(window: &TaskWindow, task_size: usize, batch_size: usize, t: usize) -> usize {
    let offset = (t - window.start) * batch_size;
    batch_size.min(task_size - offset)
}

/// Runs the schedule through the sampler. Handles the modes that carry
/// explicit weights (hard and Gaussian); the seed is `schedule.config.seed`.
pub fn build_stream(
    ds: &GraphDataset,
    partition: &TaskPartition,
    schedule: &TransitionSchedule,
    sampling: Sampling,
) -> Result<Stream> {
    let config = schedule.config;
    let weights = match (&schedule.weights, config.mode) {
        (Some(w), TransitionMode::Hard | TransitionMode::Gaussian { .. }) => w,
        _ => {
            return Err(Error::Config(format!(
                "{} streams are built by their dedicated builder",
                config.mode.name()
            )))
        }
    };
    let mut state = SamplerState::new(partition, config.seed);
    let k = partition.len();
    let mut batches = Vec::with_capacity(schedule.stream_length);
    for (t, row) in weights.iter().enumerate() {
        let counts = match config.mode {
            TransitionMode::Hard => {
                let task = schedule
                    .hard_task_at(t)
                    .ok_or_else(|| Error::Validation(format!("batch {t} outside every window")))?;
                let mut c = vec![0; k];
                c[task] = hard_counts(&schedule.windows[task], schedule.task_sizes[task], config.batch_size, t);
                c
            }
            _ => allocate_counts(row, config.batch_size),
        };
        let batch = match sampling {
            Sampling::WithoutReplacement => next_batch_without_replacement(&mut state, &counts, t)?,
            Sampling::WithReplacement => next_batch_with_replacement(&mut state, &counts, t)?,
        };
        batches.push(batch);
    }
    Ok(Stream {
        batches,
        provenance: Provenance {
            dataset: ds.name.clone(),
            task_count: k,
            config,
            sampling,
        },
    })
}

/// Flat hard-order item sequence: each task's epoch-0 queue, tasks in order.
fn hard_sequence(partition: &TaskPartition, seed: u64) -> Vec<StreamItem> {
    let state = SamplerState::new(partition, seed);
    (0..partition.len())
        .flat_map(|k| {
            state.queue(k).iter().map(move |&node| StreamItem {
                node,
                origin_task: k,
            })
        })
        .collect()
}

/// Cuts a flat sequence into hard-layout batches and permutes each one.
fn chunk_hard_layout(
    seq: Vec<StreamItem>,
    schedule: &TransitionSchedule,
    seed: u64,
) -> Vec<StreamBatch> {
    let b = schedule.config.batch_size;
    let mut batches = Vec::with_capacity(schedule.stream_length);
    let mut items = seq.into_iter();
    for (task, window) in schedule.windows.iter().enumerate() {
        for t in window.start..window.end() {
            let n = hard_counts(window, schedule.task_sizes[task], b, t);
            let mut batch: Vec<StreamItem> = items.by_ref().take(n).collect();
            batch.shuffle(&mut substream(seed, "perm", t as u64, 0));
            batches.push(StreamBatch { index: t, items: batch });
        }
    }
    batches
}

/// Global mixing: `round(p * N_k)` nodes of every task are set aside in a
/// shared pool and scattered over uniformly random slots of the whole
/// stream; the remaining nodes fill the other slots in hard order. Batch
/// sizes follow the hard layout.
pub fn build_global_mix_stream(
    ds: &GraphDataset,
    partition: &TaskPartition,
    batch_size: usize,
    mix_fraction: f64,
    seed: u64,
) -> Result<Stream> {
    let config = ScheduleConfig {
        batch_size,
        mode: TransitionMode::GlobalMix { mix_fraction },
        seed,
    };
    let schedule = build_schedule(partition, &config)?;
    let (pool, rest) = global_mix_split(partition, mix_fraction, seed);

    let total = pool.len() + rest.len();
    let mut slots = vec![false; total];
    slots[..pool.len()].fill(true);
    slots.shuffle(&mut substream(seed, "inject", 0, 0));

    let (mut pool, mut rest) = (pool.into_iter(), rest.into_iter());
    let seq: Vec<StreamItem> = slots
        .into_iter()
        .map(|from_pool| if from_pool { pool.next() } else { rest.next() })
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Validation("global-mix slot accounting failed".into()))?;

    Ok(Stream {
        batches: chunk_hard_layout(seq, &schedule, seed),
        provenance: Provenance {
            dataset: ds.name.clone(),
            task_count: partition.len(),
            config,
            sampling: Sampling::WithoutReplacement,
        },
    })
}

/// Splits every task's epoch-0 queue into the shared pool (its last
/// `round(p * N_k)` entries, then shuffled together) and the remainder kept
/// in hard order. Returns `(pool, rest)`.
pub fn global_mix_split(partition: &TaskPartition, mix_fraction: f64, seed: u64) -> (Vec<StreamItem>, Vec<StreamItem>) {
    let state = SamplerState::new(partition, seed);
    let mut pool = Vec::new();
    let mut rest = Vec::new();
    for k in 0..partition.len() {
        let queue = state.queue(k);
        let keep = queue.len() - reserved_count(queue.len(), mix_fraction);
        let tag = |&node: &usize| StreamItem { node, origin_task: k };
        rest.extend(queue[..keep].iter().map(tag));
        pool.extend(queue[keep..].iter().map(tag));
    }
    pool.shuffle(&mut substream(seed, "pool", 0, 0));
    (pool, rest)
}

/// Pool size for a task of `n` nodes at mix fraction `p`.
pub fn reserved_count(n: usize, p: f64) -> usize {
    ((p * n as f64).round() as usize).min(n)
}

/// Boundary-local mixing: around each boundary `k | k+1` the last
/// `window * B` hard-order items of task `k` and the first `window * B` of
/// task `k+1` are pooled and shuffled back into the same slots. Everything
/// else stays in hard order.
pub fn build_boundary_local_stream(
    ds: &GraphDataset,
    partition: &TaskPartition,
    batch_size: usize,
    window: usize,
    seed: u64,
) -> Result<Stream> {
    let config = ScheduleConfig {
        batch_size,
        mode: TransitionMode::BoundaryLocal { window },
        seed,
    };
    let schedule = build_schedule(partition, &config)?;
    let span = window * batch_size;
    let sizes = partition.sizes();
    for k in 0..sizes.len().saturating_sub(1) {
        for side in [k, k + 1] {
            if 2 * span > sizes[side] {
                return Err(Error::Config(format!(
                    "boundary {k}|{}: task {side} has {} nodes, fewer than the {} needed for \
                     non-overlapping windows of {window} batches",
                    k + 1,
                    sizes[side],
                    2 * span
                )));
            }
        }
    }

    let mut seq = hard_sequence(partition, seed);
    let mut offset = 0;
    for k in 0..sizes.len().saturating_sub(1) {
        offset += sizes[k];
        seq[offset - span..offset + span].shuffle(&mut substream(seed, "boundary", k as u64, 0));
    }

    Ok(Stream {
        batches: chunk_hard_layout(seq, &schedule, seed),
        provenance: Provenance {
            dataset: ds.name.clone(),
            task_count: partition.len(),
            config,
            sampling: Sampling::WithoutReplacement,
        },
    })
}

/// Dispatches on the transition mode in `config`.
pub fn generate_stream(
    ds: &GraphDataset,
    partition: &TaskPartition,
    config: &ScheduleConfig,
    sampling: Sampling,
) -> Result<Stream> {
    match config.mode {
        TransitionMode::Hard | TransitionMode::Gaussian { .. } => {
            let schedule = build_schedule(partition, config)?;
            build_stream(ds, partition, &schedule, sampling)
        }
        TransitionMode::GlobalMix { mix_fraction } => {
            build_global_mix_stream(ds, partition, config.batch_size, mix_fraction, config.seed)
        }
        TransitionMode::BoundaryLocal { window } => {
            build_boundary_local_stream(ds, partition, config.batch_size, window, config.seed)
        }
    }
}

/// Share of batches in which no single origin task supplies at least `tau`
/// of the items: the overlap index measured on a realized stream, usable
/// for modes that have no explicit mixing weights.
pub fn empirical_overlap(stream: &Stream, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("dominance threshold must lie in (0, 1], got {tau}")));
    }
    if stream.is_empty() {
        return Ok(0.0);
    }
    let k = stream.provenance.task_count;
    let mixed = stream
        .batches
        .iter()
        .filter(|b| {
            let top = b.task_counts(k).into_iter().max().unwrap_or(0);
            (top as f64) < tau * b.items.len() as f64
        })
        .count();
    Ok(mixed as f64 / stream.len() as f64)
}
