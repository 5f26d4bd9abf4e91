//! Graph datasets: loading, synthesis, splitting, statistics, and the
//! decomposition into latent class-incremental tasks.

mod io;
mod partition;
mod split;
mod stats;
mod synth;

pub use io::{load_dataset, write_dataset, LoadReport};
pub use partition::{partition_tasks, Task, TaskPartition};
pub use split::{split_train_test, test_count_for};
pub use stats::{graph_stats, GraphStats};
pub use synth::{synth_dataset, SynthSpec};

use crate::error::{Error, Result};

/// Static node-classification graph.
///
/// Edges are stored once per undirected pair as `(min, max)`, sorted, with no
/// self loops. Features are dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub node_count: usize,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub class_count: usize,
    pub train_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl GraphDataset {
    pub fn feature_row(&self, node: usize) -> &[f64] {
        &self.features[node * self.feature_dim..(node + 1) * self.feature_dim]
    }

    pub fn train_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count).filter(|&i| self.train_mask[i])
    }

    pub fn test_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count).filter(|&i| self.test_mask[i])
    }

    /// Nodes of each class, in ascending node order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.class_count];
        for (node, &label) in self.labels.iter().enumerate() {
            members[label].push(node);
        }
        members
    }

    /// Checks every structural invariant, including the split.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if self.train_mask.len() != self.node_count || self.test_mask.len() != self.node_count {
            return Err(Error::Validation("mask length differs from node count".into()));
        }
        let mut train = vec![0usize; self.class_count];
        let mut test = vec![0usize; self.class_count];
        for i in 0..self.node_count {
            if self.train_mask[i] && self.test_mask[i] {
                return Err(Error::Validation(format!("node {i} is in both train and test")));
            }
            if self.train_mask[i] {
                train[self.labels[i]] += 1;
            }
            if self.test_mask[i] {
                test[self.labels[i]] += 1;
            }
        }
        for c in 0..self.class_count {
            if train[c] == 0 || test[c] == 0 {
                return Err(Error::Validation(format!(
                    "class {c} has {} train and {} test nodes; both must be positive",
                    train[c], test[c]
                )));
            }
        }
        Ok(())
    }

    /// Invariants that do not depend on the train/test split.
    pub(crate) fn validate_structure(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::Validation("feature_dim must be positive".into()));
        }
        if self.class_count == 0 {
            return Err(Error::Validation("dataset has no classes".into()));
        }
        if self.features.len() != self.node_count * self.feature_dim {
            return Err(Error::Validation(format!(
                "feature matrix has {} entries, expected {}x{}",
                self.features.len(),
                self.node_count,
                self.feature_dim
            )));
        }
        if self.labels.len() != self.node_count {
            return Err(Error::Validation("label vector length differs from node count".into()));
        }
        let mut seen = vec![false; self.class_count];
        for (i, &label) in self.labels.iter().enumerate() {
            if label >= self.class_count {
                return Err(Error::Validation(format!(
                    "node {i} has label {label} outside [0, {})",
                    self.class_count
                )));
            }
            seen[label] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!("class {empty} has no nodes")));
        }
        for &(u, v) in &self.edges {
            if u >= self.node_count || v >= self.node_count {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside [0, {})",
                    self.node_count
                )));
            }
        }
        Ok(())
    }
}

/// Canonicalizes an edge list into sorted unique `(min, max)` pairs.
///
/// Returns the edges plus the number of dropped duplicates and self loops.
pub(crate) fn canonical_edges(raw: impl IntoIterator<Item = (usize, usize)>) -> (Vec<(usize, usize)>, usize, usize) {
    let mut self_loops = 0;
    let mut edges: Vec<(usize, usize)> = raw
        .into_iter()
        .filter_map(|(u, v)| {
            if u == v {
                self_loops += 1;
                None
            } else {
                Some((u.min(v), u.max(v)))
            }
        })
        .collect();
    let before = edges.len();
    edges.sort_unstable();
    edges.dedup();
    let duplicates = before - edges.len();
    (edges, duplicates, self_loops)
}
