use serde::Serialize;

use super::{GraphDataset, TaskPartition};

/// Structural summary of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    /// Fraction of edges joining same-label endpoints. NaN when the graph has
    /// no edges; check `homophily_defined`.
    pub homophily: f64,
    pub homophily_defined: bool,
    pub avg_degree: f64,
    pub density: f64,
    pub node_count: usize,
    pub edge_count: usize,
    pub class_count: usize,
    pub task_count: usize,
}

pub fn graph_stats(ds: &GraphDataset, partition: &TaskPartition) -> GraphStats {
    let n = ds.node_count;
    let e = ds.edges.len();
    let same = ds
        .edges
        .iter()
        .filter(|&&(u, v)| ds.labels[u] == ds.labels[v])
        .count();
    let (homophily, homophily_defined) = if e == 0 {
        (f64::NAN, false)
    } else {
        (same as f64 / e as f64, true)
    };
    let avg_degree = if n == 0 { 0.0 } else { 2.0 * e as f64 / n as f64 };
    let density = if n < 2 {
        0.0
    } else {
        2.0 * e as f64 / (n as f64 * (n as f64 - 1.0))
    };
    GraphStats {
        homophily,
        homophily_defined,
        avg_degree,
        density,
        node_count: n,
        edge_count: e,
        class_count: ds.class_count,
        task_count: partition.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::tiny;

    #[test]
    fn triangle_with_two_labels() {
        let ds = tiny(&[0, 0, 1], &[(0, 1), (1, 2), (0, 2)]);
        let s = graph_stats(&ds, &TaskPartition { tasks: vec![] });
        assert!((s.homophily - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.avg_degree, 2.0);
        assert_eq!(s.density, 1.0);
    }

    #[test]
    fn all_intra_edges() {
        let ds = tiny(&[0, 0, 1, 1], &[(0, 1), (2, 3)]);
        let s = graph_stats(&ds, &TaskPartition { tasks: vec![] });
        assert_eq!(s.homophily, 1.0);
        assert!(s.homophily_defined);
    }

    #[test]
    fn edgeless_graph_flags_homophily() {
        let ds = tiny(&[0, 1], &[]);
        let s = graph_stats(&ds, &TaskPartition { tasks: vec![] });
        assert!(s.homophily.is_nan());
        assert!(!s.homophily_defined);
        assert_eq!(s.density, 0.0);
    }
}
