use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// First-order update rule applied to a flat parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam {
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, len: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: vec![0.0; len],
                v: vec![0.0; len],
                t: 0,
            },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - BETA1.powi(*t);
                let c2 = 1.0 - BETA2.powi(*t);
                for i in 0..params.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = vec![1.0, 2.0];
        Optimizer::new(OptimizerKind::Sgd, 2).step(&mut p, &[0.5, -1.0], 0.1);
        assert_eq!(p, vec![0.95, 2.1]);
    }

    #[test]
    fn adam_first_step_has_unit_magnitude() {
        let mut p = vec![0.0, 0.0];
        Optimizer::new(OptimizerKind::Adam, 2).step(&mut p, &[3.0, -0.01], 0.1);
        assert!((p[0] + 0.1).abs() < 1e-6);
        assert!((p[1] - 0.1).abs() < 1e-4);
    }
}
