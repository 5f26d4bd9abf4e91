//! Reference online learners: a linear softmax classifier over propagated
//! node features, trained by Bare fine-tuning, experience replay (ER),
//! A-GEM gradient projection, or offline Joint training.
//!
//! Learners only ever see a [`BatchView`], which carries node ids and labels
//! but has no field for the originating task.

mod model;
mod optim;
mod propagate;
mod reservoir;

pub use model::{predict, LinearModel};
pub use optim::{Optimizer, OptimizerKind};
pub use propagate::{propagate, PropagatedFeatures};
pub use reservoir::ReservoirBuffer;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, TaskPartition};
use crate::rng::substream;
use crate::sampler::StreamBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Bare,
    Er,
    Agem,
    Joint,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Bare => "bare",
            LearnerKind::Er => "er",
            LearnerKind::Agem => "agem",
            LearnerKind::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Replay items drawn per incoming item.
    pub replay_ratio: f64,
    pub memory_size: usize,
    pub joint_epochs: usize,
    pub joint_batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-3,
            optimizer: OptimizerKind::Sgd,
            replay_ratio: 1.0,
            memory_size: 100,
            joint_epochs: 20,
            joint_batch_size: 10,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.replay_ratio >= 0.0 && self.replay_ratio.is_finite()) {
            return Err(Error::Config(format!("replay_ratio must be nonnegative, got {}", self.replay_ratio)));
        }
        if self.joint_batch_size == 0 {
            return Err(Error::Config("joint_batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// What a learner is allowed to see of one stream batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchView<'a> {
    pub nodes: &'a [usize],
    pub labels: &'a [usize],
    pub features: &'a PropagatedFeatures,
}

/// Owned node/label pairs for one batch, stripped of task annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledBatch {
    pub nodes: Vec<usize>,
    pub labels: Vec<usize>,
}

impl LabeledBatch {
    pub fn from_stream_batch(batch: &StreamBatch, labels: &[usize]) -> Self {
        let nodes: Vec<usize> = batch.nodes().collect();
        let labels = nodes.iter().map(|&n| labels[n]).collect();
        LabeledBatch { nodes, labels }
    }

    pub fn view<'a>(&'a self, features: &'a PropagatedFeatures) -> BatchView<'a> {
        BatchView {
            nodes: &self.nodes,
            labels: &self.labels,
            features,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    /// A-GEM only: whether the incoming gradient was projected.
    pub projected: bool,
    /// A-GEM only: inner product of the applied direction with the
    /// reference gradient, when a reference gradient existed.
    pub reference_dot: Option<f64>,
}

pub trait Learner: Send {
    fn observe(&mut self, batch: BatchView<'_>) -> Result<StepReport>;
    fn model(&self) -> &LinearModel;
}

/// Replacement direction for `g` when it conflicts with `g_ref`.
/// Returns `(direction, projected)`; a zero reference leaves `g` as is.
pub fn agem_project(g: &[f64], g_ref: &[f64]) -> (Vec<f64>, bool) {
    let dot = dot(g, g_ref);
    let norm2 = dot_self(g_ref);
    if dot >= 0.0 || norm2 == 0.0 {
        return (g.to_vec(), false);
    }
    let scale = dot / norm2;
    (g.iter().zip(g_ref).map(|(a, r)| a - scale * r).collect(), true)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_self(a: &[f64]) -> f64 {
    dot(a, a)
}

fn require_nonempty(batch: &BatchView<'_>) -> Result<()> {
    if batch.nodes.is_empty() {
        return Err(Error::Validation("cannot observe an empty batch".into()));
    }
    Ok(())
}

/// One gradient step on the incoming batch alone.
pub fn observe_bare(
    model: &mut LinearModel,
    opt: &mut Optimizer,
    batch: BatchView<'_>,
    config: &TrainConfig,
) -> Result<StepReport> {
    require_nonempty(&batch)?;
    let (loss, grad) = model.loss_and_grad(batch.features, batch.nodes, batch.labels)?;
    opt.step(model.params_mut(), &grad, config.learning_rate);
    Ok(StepReport {
        loss,
        ..StepReport::default()
    })
}

fn offer_all(buffer: &mut ReservoirBuffer<(usize, usize)>, batch: &BatchView<'_>, rng: &mut ChaCha8Rng) {
    for (&n, &y) in batch.nodes.iter().zip(batch.labels) {
        buffer.offer((n, y), rng);
    }
}

/// One gradient step on the incoming batch joined with a replay sample,
/// then the incoming items are offered to the reservoir.
pub fn observe_er(
    model: &mut LinearModel,
    opt: &mut Optimizer,
    buffer: &mut ReservoirBuffer<(usize, usize)>,
    rng: &mut ChaCha8Rng,
    batch: BatchView<'_>,
    config: &TrainConfig,
) -> Result<StepReport> {
    require_nonempty(&batch)?;
    let want = (config.replay_ratio * batch.nodes.len() as f64).round() as usize;
    let mut nodes = batch.nodes.to_vec();
    let mut labels = batch.labels.to_vec();
    for (n, y) in buffer.sample(want, rng) {
        nodes.push(n);
        labels.push(y);
    }
    let (loss, grad) = model.loss_and_grad(batch.features, &nodes, &labels)?;
    opt.step(model.params_mut(), &grad, config.learning_rate);
    offer_all(buffer, &batch, rng);
    Ok(StepReport {
        loss,
        ..StepReport::default()
    })
}

/// One projected gradient step. The reference gradient uses the whole buffer.
pub fn observe_agem(
    model: &mut LinearModel,
    opt: &mut Optimizer,
    buffer: &mut ReservoirBuffer<(usize, usize)>,
    rng: &mut ChaCha8Rng,
    batch: BatchView<'_>,
    config: &TrainConfig,
) -> Result<StepReport> {
    require_nonempty(&batch)?;
    let (loss, grad) = model.loss_and_grad(batch.features, batch.nodes, batch.labels)?;
    let mut report = StepReport {
        loss,
        ..StepReport::default()
    };
    let direction = if buffer.is_empty() {
        grad
    } else {
        let (nodes, labels): (Vec<usize>, Vec<usize>) = buffer.items().iter().copied().unzip();
        let (_, g_ref) = model.loss_and_grad(batch.features, &nodes, &labels)?;
        let (direction, projected) = agem_project(&grad, &g_ref);
        report.projected = projected;
        report.reference_dot = Some(dot(&direction, &g_ref));
        direction
    };
    opt.step(model.params_mut(), &direction, config.learning_rate);
    offer_all(buffer, &batch, rng);
    Ok(report)
}

/// Stateful online learner for the Bare, ER, and A-GEM strategies.
#[derive(Debug, Clone)]
pub struct OnlineLearner {
    kind: LearnerKind,
    model: LinearModel,
    optimizer: Optimizer,
    buffer: ReservoirBuffer<(usize, usize)>,
    rng: ChaCha8Rng,
    config: TrainConfig,
}

impl OnlineLearner {
    pub fn new(kind: LearnerKind, classes: usize, dim: usize, config: TrainConfig) -> Result<Self> {
        if kind == LearnerKind::Joint {
            return Err(Error::Config("joint is an offline learner; use train_joint".into()));
        }
        let model = LinearModel::zeros(classes, dim);
        Ok(OnlineLearner {
            kind,
            optimizer: Optimizer::new(config.optimizer, model.params().len()),
            model,
            buffer: ReservoirBuffer::new(config.memory_size),
            rng: substream(config.seed, "learner", 0, 0),
            config,
        })
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn buffer(&self) -> &ReservoirBuffer<(usize, usize)> {
        &self.buffer
    }
}

impl Learner for OnlineLearner {
    fn observe(&mut self, batch: BatchView<'_>) -> Result<StepReport> {
        let cfg = &self.config;
        match self.kind {
            LearnerKind::Bare => observe_bare(&mut self.model, &mut self.optimizer, batch, cfg),
            LearnerKind::Er => observe_er(
                &mut self.model,
                &mut self.optimizer,
                &mut self.buffer,
                &mut self.rng,
                batch,
                cfg,
            ),
            LearnerKind::Agem => observe_agem(
                &mut self.model,
                &mut self.optimizer,
                &mut self.buffer,
                &mut self.rng,
                batch,
                cfg,
            ),
            LearnerKind::Joint => unreachable!("rejected in OnlineLearner::new"),
        }
    }

    fn model(&self) -> &LinearModel {
        &self.model
    }
}

/// A fixed model that ignores the stream, e.g. a trained Joint reference.
#[derive(Debug, Clone)]
pub struct FrozenLearner(pub LinearModel);

impl Learner for FrozenLearner {
    fn observe(&mut self, _batch: BatchView<'_>) -> Result<StepReport> {
        Ok(StepReport::default())
    }

    fn model(&self) -> &LinearModel {
        &self.0
    }
}

/// Offline upper bound: minibatch training over every train node, reshuffled
/// each epoch.
pub fn train_joint(
    ds: &GraphDataset,
    partition: &TaskPartition,
    features: &PropagatedFeatures,
    config: &TrainConfig,
) -> Result<LinearModel> {
    let mut pool: Vec<usize> = partition.tasks.iter().flat_map(|t| t.train_nodes.iter().copied()).collect();
    if pool.is_empty() {
        return Err(Error::Validation("joint training needs a nonempty train set".into()));
    }
    let mut model = LinearModel::zeros(ds.class_count, features.dim());
    let mut opt = Optimizer::new(config.optimizer, model.params().len());
    for epoch in 0..config.joint_epochs {
        pool.shuffle(&mut substream(config.seed, "joint", epoch as u64, 0));
        for chunk in pool.chunks(config.joint_batch_size.max(1)) {
            let labels: Vec<usize> = chunk.iter().map(|&n| ds.labels[n]).collect();
            let (_, grad) = model.loss_and_grad(features, chunk, &labels)?;
            opt.step(model.params_mut(), &grad, config.learning_rate);
        }
    }
    Ok(model)
}
