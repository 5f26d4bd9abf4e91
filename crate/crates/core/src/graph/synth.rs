use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{split_train_test, GraphDataset};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Parameters of a synthetic stochastic-block graph with Gaussian features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub classes: usize,
    pub nodes_per_class: usize,
    pub feature_dim: usize,
    pub class_center_separation: f64,
    pub intra_edge_prob: f64,
    pub inter_edge_prob: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    pub seed: u64,
}

fn default_name() -> String {
    "synthetic".into()
}

fn default_test_fraction() -> f64 {
    0.2
}

impl SynthSpec {
    fn check(&self) -> Result<()> {
        if self.classes == 0 || self.feature_dim == 0 {
            return Err(Error::Config("classes and feature_dim must be positive".into()));
        }
        if self.nodes_per_class < 2 {
            return Err(Error::Config(format!(
                "nodes_per_class must be at least 2 to split train/test, got {}",
                self.nodes_per_class
            )));
        }
        for (name, p) in [("intra_edge_prob", self.intra_edge_prob), ("inter_edge_prob", self.inter_edge_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !self.class_center_separation.is_finite() || self.class_center_separation < 0.0 {
            return Err(Error::Config("class_center_separation must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Samples a dataset: each class is an isotropic unit-variance blob around a
/// random unit direction scaled by `class_center_separation`; each node pair
/// is joined independently with the intra- or inter-class probability.
/// Nodes are laid out class by class.
pub fn synth_dataset(spec: &SynthSpec) -> Result<GraphDataset> {
    spec.check()?;
    let d = spec.feature_dim;
    let n = spec.classes * spec.nodes_per_class;

    let mut rng = substream(spec.seed, "synth-centers", 0, 0);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            dir.into_iter().map(|x| x / norm * spec.class_center_separation).collect()
        })
        .collect();

    let labels: Vec<usize> = (0..n).map(|i| i / spec.nodes_per_class).collect();
    let mut rng = substream(spec.seed, "synth-features", 0, 0);
    let mut features = Vec::with_capacity(n * d);
    for &label in &labels {
        for center in &centers[label] {
            let noise: f64 = rng.sample(StandardNormal);
            features.push(center + noise);
        }
    }

    let mut rng = substream(spec.seed, "synth-edges", 0, 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] {
                spec.intra_edge_prob
            } else {
                spec.inter_edge_prob
            };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let unsplit = GraphDataset {
        name: spec.name.clone(),
        node_count: n,
        feature_dim: d,
        features,
        labels,
        edges,
        class_count: spec.classes,
        train_mask: vec![false; n],
        test_mask: vec![false; n],
    };
    split_train_test(&unsplit, spec.test_fraction, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(classes: usize, intra: f64, inter: f64) -> SynthSpec {
        SynthSpec {
            name: "t".into(),
            classes,
            nodes_per_class: 20,
            feature_dim: 4,
            class_center_separation: 3.0,
            intra_edge_prob: intra,
            inter_edge_prob: inter,
            test_fraction: 0.2,
            seed: 9,
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = synth_dataset(&spec(3, 0.2, 0.05)).unwrap();
        let b = synth_dataset(&spec(3, 0.2, 0.05)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(3, 0.2, 0.05);
        other.seed = 10;
        assert_ne!(a.features, synth_dataset(&other).unwrap().features);
    }

    #[test]
    fn no_inter_edges_when_probability_zero() {
        let ds = synth_dataset(&spec(2, 0.3, 0.0)).unwrap();
        assert!(!ds.edges.is_empty());
        assert!(ds.edges.iter().all(|&(u, v)| ds.labels[u] == ds.labels[v]));
        ds.validate().unwrap();
    }

    #[test]
    fn centers_sit_at_requested_radius() {
        let mut s = spec(2, 0.0, 0.0);
        s.nodes_per_class = 2000;
        s.feature_dim = 3;
        let ds = synth_dataset(&s).unwrap();
        let mean: Vec<f64> = (0..3)
            .map(|j| (0..2000).map(|i| ds.feature_row(i)[j]).sum::<f64>() / 2000.0)
            .collect();
        let r = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((r - 3.0).abs() < 0.15, "radius {r}");
    }

    #[test]
    fn rejects_tiny_classes_and_bad_probabilities() {
        let mut s = spec(2, 0.1, 0.1);
        s.nodes_per_class = 1;
        assert!(synth_dataset(&s).is_err());
        let s = spec(2, 1.5, 0.1);
        assert!(synth_dataset(&s).is_err());
    }
}
