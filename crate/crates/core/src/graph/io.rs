use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{canonical_edges, GraphDataset};
use crate::error::{Error, Result};

/// Edge clean-up performed while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub duplicate_edges: usize,
    pub self_loops: usize,
}

/// Reads a node CSV (`id,label,f_0,...`) and edge CSV (`src,dst`), both with a
/// header row.
///
/// Node ids may be any unique non-negative integers; they are mapped to row
/// order. Directed edge lists are symmetrized. The returned dataset carries
/// empty train/test masks; run [`split_train_test`](super::split_train_test) before partitioning.
pub fn load_dataset(nodes_path: &Path, edges_path: &Path) -> Result<(GraphDataset, LoadReport)> {
    let nodes_text = fs::read_to_string(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    let edges_text = fs::read_to_string(edges_path).map_err(|e| Error::io(edges_path, e))?;

    let mut lines = nodes_text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => return Err(Error::parse(nodes_path, 1, "missing header row")),
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns[0] != "id" || columns[1] != "label" {
        return Err(Error::parse(
            nodes_path,
            1,
            "header must be `id,label,f_0,...` with at least one feature column",
        ));
    }
    let feature_dim = columns.len() - 2;

    let mut ids = HashMap::new();
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                nodes_path,
                line_no,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(nodes_path, line_no, format!("bad node id {:?}", fields[0])))?;
        let label: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(nodes_path, line_no, format!("bad label {:?}", fields[1])))?;
        if ids.insert(id, labels.len()).is_some() {
            return Err(Error::parse(nodes_path, line_no, format!("duplicate node id {id}")));
        }
        labels.push(label);
        for f in &fields[2..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(nodes_path, line_no, format!("bad feature value {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(nodes_path, line_no, "non-finite feature value"));
            }
            features.push(v);
        }
    }

    let mut raw_edges = Vec::new();
    let mut edge_lines = edges_text.lines().enumerate();
    match edge_lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == "src,dst" => {}
        _ => return Err(Error::parse(edges_path, 1, "header must be `src,dst`")),
    }
    for (idx, line) in edge_lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::parse(edges_path, line_no, "edge row must be `src,dst`"));
        }
        let mut ends = [0usize; 2];
        for (slot, f) in ends.iter_mut().zip(&fields) {
            let id: u64 = f
                .parse()
                .map_err(|_| Error::parse(edges_path, line_no, format!("bad node id {f:?}")))?;
            *slot = *ids.get(&id).ok_or_else(|| {
                Error::Validation(format!(
                    "{}:{line_no}: edge endpoint {id} is not a known node",
                    edges_path.display()
                ))
            })?;
        }
        raw_edges.push((ends[0], ends[1]));
    }

    let (edges, duplicate_edges, self_loops) = canonical_edges(raw_edges);
    let node_count = labels.len();
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let name = nodes_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .trim_end_matches("_nodes")
        .trim_end_matches(".nodes")
        .to_string();
    let ds = GraphDataset {
        name,
        node_count,
        feature_dim,
        features,
        labels,
        edges,
        class_count,
        train_mask: vec![false; node_count],
        test_mask: vec![false; node_count],
    };
    ds.validate_structure()?;
    Ok((
        ds,
        LoadReport {
            duplicate_edges,
            self_loops,
        },
    ))
}

/// Writes the dataset in the same two-file layout `load_dataset` reads.
/// Feature values use shortest round-trip formatting, so reloading is exact.
pub fn write_dataset(ds: &GraphDataset, nodes_path: &Path, edges_path: &Path) -> Result<()> {
    let mut out = String::from("id,label");
    for j in 0..ds.feature_dim {
        let _ = write!(out, ",f_{j}");
    }
    out.push('\n');
    for i in 0..ds.node_count {
        let _ = write!(out, "{i},{}", ds.labels[i]);
        for v in ds.feature_row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    fs::write(nodes_path, out).map_err(|e| Error::io(nodes_path, e))?;

    let mut out = String::from("src,dst\n");
    for &(u, v) in &ds.edges {
        let _ = writeln!(out, "{u},{v}");
    }
    fs::write(edges_path, out).map_err(|e| Error::io(edges_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn files(nodes: &str, edges: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let n = dir.path().join("g_nodes.csv");
        let e = dir.path().join("g_edges.csv");
        fs::File::create(&n).unwrap().write_all(nodes.as_bytes()).unwrap();
        fs::File::create(&e).unwrap().write_all(edges.as_bytes()).unwrap();
        (dir, n, e)
    }

    #[test]
    fn minimal_file_loads() {
        let (_d, n, e) = files("id,label,f_0\n0,0,1\n1,0,2\n2,1,3\n", "src,dst\n0,1\n1,2\n");
        let (ds, report) = load_dataset(&n, &e).unwrap();
        assert_eq!(ds.class_count, 2);
        assert_eq!(ds.node_count, 3);
        assert_eq!(ds.edges.len(), 2);
        assert_eq!(ds.name, "g");
        assert_eq!(report, LoadReport::default());
        // A singleton class loads but cannot be split.
        assert!(crate::graph::split_train_test(&ds, 0.5, 0).is_err());
    }

    #[test]
    fn dangling_endpoint() {
        let (_d, n, e) = files("id,label,f_0\n0,0,1\n1,0,2\n2,1,3\n", "src,dst\n0,3\n");
        assert!(matches!(load_dataset(&n, &e), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_row_reports_line() {
        let (_d, n, e) = files("id,label,f_0\n0,0,1\n1,zero,2\n", "src,dst\n");
        match load_dataset(&n, &e) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_class_rejected() {
        let (_d, n, e) = files("id,label,f_0\n0,0,1\n1,0,2\n2,2,3\n3,2,3\n", "src,dst\n");
        let err = load_dataset(&n, &e).unwrap_err();
        assert!(err.to_string().contains("class 1 has no nodes"), "{err}");
    }

    #[test]
    fn duplicates_and_loops_are_counted() {
        let (_d, n, e) = files(
            "id,label,f_0\n10,0,1\n11,0,2\n12,1,3\n13,1,4\n",
            "src,dst\n10,11\n11,10\n12,12\n12,13\n",
        );
        let (ds, report) = load_dataset(&n, &e).unwrap();
        assert_eq!(ds.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(report.duplicate_edges, 1);
        assert_eq!(report.self_loops, 1);
    }
}
