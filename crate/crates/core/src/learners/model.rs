use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::PropagatedFeatures;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "linear-model/1";

/// Multinomial logistic regression over (propagated) node features.
///
/// Parameters live in one flat vector: the `classes x dim` weight matrix in
/// row-major order followed by `classes` biases. Gradients share the layout,
/// so projection and optimizer code can treat both as plain vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    classes: usize,
    dim: usize,
    params: Vec<f64>,
}

impl LinearModel {
    /// All-zero initialization.
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LinearModel {
            classes,
            dim,
            params: vec![0.0; classes * dim + classes],
        }
    }

    pub fn from_parts(classes: usize, dim: usize, weights: &[f64], bias: &[f64]) -> Result<Self> {
        if weights.len() != classes * dim || bias.len() != classes {
            return Err(Error::Validation(format!(
                "expected {classes}x{dim} weights and {classes} biases, got {} and {}",
                weights.len(),
                bias.len()
            )));
        }
        let mut params = weights.to_vec();
        params.extend_from_slice(bias);
        Ok(LinearModel { classes, dim, params })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.classes * self.dim]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.classes * self.dim..]
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.params.split_at(self.classes * self.dim);
        (0..self.classes)
            .map(|c| {
                let row = &w[c * self.dim..(c + 1) * self.dim];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[c]
            })
            .collect()
    }

    /// Argmax of the logits; ties go to the lowest class id.
    pub fn predict_one(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, &z) in logits.iter().enumerate().skip(1) {
            if z > logits[best] {
                best = c;
            }
        }
        best
    }

    /// Mean cross-entropy over `(node, label)` pairs and its gradient with
    /// respect to the flat parameter vector.
    pub fn loss_and_grad(
        &self,
        features: &PropagatedFeatures,
        nodes: &[usize],
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        if nodes.is_empty() {
            return Ok((0.0, grad));
        }
        let (c, d) = (self.classes, self.dim);
        let mut loss = 0.0;
        for (&node, &label) in nodes.iter().zip(labels) {
            let x = features.row(node);
            let logits = self.logits(x);
            let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
            let total: f64 = exps.iter().sum();
            loss += total.ln() + top - logits[label];
            for k in 0..c {
                let delta = exps[k] / total - if k == label { 1.0 } else { 0.0 };
                let row = &mut grad[k * d..(k + 1) * d];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += delta * xi;
                }
                grad[c * d + k] += delta;
            }
        }
        let n = nodes.len() as f64;
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite loss {loss} on a batch of {}", nodes.len())));
        }
        Ok((loss, grad))
    }

    /// Checkpoint text: a header line, one line per weight row, one bias line.
    /// Values use shortest round-trip formatting.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} classes={} dim={}\n", self.classes, self.dim);
        let rows = self
            .weights()
            .chunks(self.dim.max(1))
            .take(self.classes)
            .chain(std::iter::once(self.bias()));
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::parse("<checkpoint>", line, msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad(1, "not a linear-model/1 checkpoint"));
        }
        let mut field = |name: &str| -> Result<usize> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(name))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(1, "malformed header"))
        };
        let classes = field("classes=")?;
        let dim = field("dim=")?;
        let mut params = Vec::with_capacity(classes * dim + classes);
        for (i, line) in lines.enumerate() {
            for v in line.split_whitespace() {
                params.push(v.parse::<f64>().map_err(|_| bad(i + 2, "bad parameter value"))?);
            }
        }
        if params.len() != classes * dim + classes {
            return Err(bad(1, "parameter count does not match header"));
        }
        Ok(LinearModel { classes, dim, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text)
    }
}

/// Predicted class per node.
pub fn predict(model: &LinearModel, features: &PropagatedFeatures, nodes: &[usize]) -> Vec<usize> {
    nodes.iter().map(|&n| model.predict_one(features.row(n))).collect()
}
