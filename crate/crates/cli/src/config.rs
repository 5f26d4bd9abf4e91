use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use taskfree_core::graph::{load_dataset, split_train_test, synth_dataset, GraphDataset, SynthSpec};
use taskfree_core::learners::{LearnerKind, TrainConfig};
use taskfree_core::sampler::Sampling;
use taskfree_core::schedule::{ScheduleConfig, TransitionMode, DEFAULT_DOMINANCE_THRESHOLD};
use taskfree_core::{Error, Result};

/// Configuration used when no `--config` is given.
pub const BUNDLED_SYNTHETIC: &str = include_str!("../configs/synthetic.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SynthSpec),
    Files { nodes: PathBuf, edges: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub classes_per_task: usize,
    /// Per-class test share; overrides the synthetic spec's own value.
    pub test_fraction: f64,
    /// Seed of the train/test split for file datasets.
    pub split_seed: u64,
    pub batch_size: usize,
    pub transition: TransitionMode,
    pub sampling: Sampling,
    pub learner: LearnerKind,
    /// `train.seed` is replaced by each run seed.
    pub train: TrainConfig,
    pub hops: usize,
    pub eval_interval: usize,
    pub dominance_threshold: f64,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str(BUNDLED_SYNTHETIC).expect("bundled config parses")
    }
}

// Field-wise defaults for partial config files. `Default` above delegates to
// the bundled file, so this builds the bare fallback explicitly.
impl RunConfig {
    pub fn fallback() -> Self {
        RunConfig {
            dataset: DatasetSource::Files {
                nodes: PathBuf::from("nodes.csv"),
                edges: PathBuf::from("edges.csv"),
            },
            classes_per_task: 2,
            test_fraction: 0.2,
            split_seed: 0,
            batch_size: 10,
            transition: TransitionMode::Hard,
            sampling: Sampling::WithoutReplacement,
            learner: LearnerKind::Er,
            train: TrainConfig::default(),
            hops: 1,
            eval_interval: 1,
            dominance_threshold: DEFAULT_DOMINANCE_THRESHOLD,
            seeds: vec![1, 2, 3],
            output_dir: None,
        }
    }

    /// Parses config text; fields absent from the text take fallback values.
    /// Relative dataset paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut merged = serde_json::to_value(Self::fallback()).expect("config serializes");
        let given: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let serde_json::Value::Object(given) = given else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        for (k, v) in given {
            merged[k] = v;
        }
        let mut cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(base), DatasetSource::Files { nodes, edges }) = (base, &mut cfg.dataset) {
            for p in [nodes, edges] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.classes_per_task == 0 {
            return Err(Error::Config("classes_per_task must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be at least 1".into()));
        }
        if !(self.dominance_threshold > 0.0 && self.dominance_threshold <= 1.0) {
            return Err(Error::Config("dominance_threshold must lie in (0, 1]".into()));
        }
        self.schedule(self.seeds[0]).validate()?;
        self.train.validate()
    }

    pub fn schedule(&self, seed: u64) -> ScheduleConfig {
        ScheduleConfig {
            batch_size: self.batch_size,
            mode: self.transition,
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    /// Loads or synthesizes the dataset, split into train and test nodes.
    pub fn dataset(&self) -> Result<GraphDataset> {
        match &self.dataset {
            DatasetSource::Synthetic(spec) => synth_dataset(&SynthSpec {
                test_fraction: self.test_fraction,
                ..spec.clone()
            }),
            DatasetSource::Files { nodes, edges } => {
                let (ds, _) = load_dataset(nodes, edges)?;
                split_train_test(&ds, self.test_fraction, self.split_seed)
            }
        }
    }

    /// Directory label for the transition mode, parameter included so runs
    /// with different settings never share a directory.
    pub fn mode_label(&self) -> String {
        match self.transition {
            TransitionMode::Hard => "hard".into(),
            TransitionMode::Gaussian { sigma } => format!("gaussian-sigma{sigma}"),
            TransitionMode::GlobalMix { mix_fraction } => format!("global_mix-p{mix_fraction}"),
            TransitionMode::BoundaryLocal { window } => format!("boundary_local-w{window}"),
        }
    }

    /// Canonical text: pretty JSON with sorted keys.
    pub fn to_canonical(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&value).expect("value serializes") + "\n"
    }
}

/// Command-line values that replace config file fields when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub mode: Option<String>,
    pub sigma: Option<f64>,
    pub mix_fraction: Option<f64>,
    pub window: Option<usize>,
    pub batch_size: Option<usize>,
    pub learner: Option<String>,
    pub sampling: Option<String>,
    pub optimizer: Option<String>,
    pub classes_per_task: Option<usize>,
    pub eval_interval: Option<usize>,
    pub learning_rate: Option<f64>,
    pub hops: Option<usize>,
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
}

fn parse_name<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(name.replace('-', "_")))
        .map_err(|_| Error::Config(format!("unknown {what} {name:?}")))
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = Some(dir.clone());
        }
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        match (&self.nodes, &self.edges) {
            (Some(nodes), Some(edges)) => {
                cfg.dataset = DatasetSource::Files {
                    nodes: nodes.clone(),
                    edges: edges.clone(),
                }
            }
            (None, None) => {}
            _ => return Err(Error::Config("--nodes and --edges must be given together".into())),
        }
        let mode = self.mode.as_deref().map(|m| m.replace('-', "_"));
        let mode = mode.as_deref().unwrap_or(cfg.transition.name());
        cfg.transition = match (mode, cfg.transition) {
            ("hard", _) => TransitionMode::Hard,
            ("gaussian", current) => TransitionMode::Gaussian {
                sigma: self
                    .sigma
                    .or(match current {
                        TransitionMode::Gaussian { sigma } => Some(sigma),
                        _ => None,
                    })
                    .ok_or_else(|| Error::Config("gaussian mode needs --sigma".into()))?,
            },
            ("global_mix", current) => TransitionMode::GlobalMix {
                mix_fraction: self
                    .mix_fraction
                    .or(match current {
                        TransitionMode::GlobalMix { mix_fraction } => Some(mix_fraction),
                        _ => None,
                    })
                    .ok_or_else(|| Error::Config("global_mix mode needs --mix-fraction".into()))?,
            },
            ("boundary_local", current) => TransitionMode::BoundaryLocal {
                window: self
                    .window
                    .or(match current {
                        TransitionMode::BoundaryLocal { window } => Some(window),
                        _ => None,
                    })
                    .ok_or_else(|| Error::Config("boundary_local mode needs --window".into()))?,
            },
            (other, _) => return Err(Error::Config(format!("unknown transition mode {other:?}"))),
        };
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(l) = &self.learner {
            cfg.learner = parse_name("learner", l)?;
        }
        if let Some(s) = &self.sampling {
            cfg.sampling = parse_name("sampling strategy", s)?;
        }
        if let Some(o) = &self.optimizer {
            cfg.train.optimizer = parse_name("optimizer", o)?;
        }
        if let Some(c) = self.classes_per_task {
            cfg.classes_per_task = c;
        }
        if let Some(d) = self.eval_interval {
            cfg.eval_interval = d;
        }
        if let Some(lr) = self.learning_rate {
            cfg.train.learning_rate = lr;
        }
        if let Some(h) = self.hops {
            cfg.hops = h;
        }
        Ok(())
    }
}
