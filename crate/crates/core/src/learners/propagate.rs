use crate::error::{Error, Result};
use crate::graph::GraphDataset;

/// Node features after `hops` rounds of mean aggregation over closed
/// neighbourhoods, `X' = D̃⁻¹ (A + I) X`. Computed once per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedFeatures {
    node_count: usize,
    dim: usize,
    hops: usize,
    matrix: Vec<f64>,
}

impl PropagatedFeatures {
    pub fn from_matrix(node_count: usize, dim: usize, matrix: Vec<f64>, hops: usize) -> Self {
        assert_eq!(matrix.len(), node_count * dim);
        PropagatedFeatures {
            node_count,
            dim,
            hops,
            matrix,
        }
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.matrix[node * self.dim..(node + 1) * self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn hops(&self) -> usize {
        self.hops
    }
}

pub fn propagate(ds: &GraphDataset, hops: usize) -> Result<PropagatedFeatures> {
    if hops > 2 {
        return Err(Error::Config(format!("hops must be 0, 1, or 2, got {hops}")));
    }
    let (n, d) = (ds.node_count, ds.feature_dim);
    let mut neighbours = vec![Vec::new(); n];
    for &(u, v) in &ds.edges {
        neighbours[u].push(v);
        neighbours[v].push(u);
    }
    let mut current = ds.features.clone();
    for _ in 0..hops {
        let mut next = vec![0.0; n * d];
        for i in 0..n {
            let out = &mut next[i * d..(i + 1) * d];
            for &j in neighbours[i].iter().chain(std::iter::once(&i)) {
                for (o, x) in out.iter_mut().zip(&current[j * d..(j + 1) * d]) {
                    *o += x;
                }
            }
            let scale = 1.0 / (neighbours[i].len() + 1) as f64;
            out.iter_mut().for_each(|o| *o *= scale);
        }
        current = next;
    }
    Ok(PropagatedFeatures::from_matrix(n, d, current, hops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::tiny;

    #[test]
    fn zero_hops_is_identity() {
        let ds = tiny(&[0, 1, 0], &[(0, 1)]);
        let f = propagate(&ds, 0).unwrap();
        assert_eq!(f.row(2), ds.feature_row(2));
    }

    #[test]
    fn one_hop_on_a_path() {
        // Features are (0,1), (2,3), (4,5); path 0-1-2.
        let ds = tiny(&[0, 1, 0], &[(0, 1), (1, 2)]);
        let f = propagate(&ds, 1).unwrap();
        assert_eq!(f.row(0), &[1.0, 2.0]);
        assert_eq!(f.row(1), &[2.0, 3.0]);
        assert_eq!(f.row(2), &[3.0, 4.0]);
        let f2 = propagate(&ds, 2).unwrap();
        assert_eq!(f2.row(0), &[1.5, 2.5]);
        assert!(propagate(&ds, 3).is_err());
    }
}
