use rand::seq::SliceRandom;

use super::GraphDataset;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Number of test nodes drawn from a class of `class_size` nodes.
///
/// Rounds half up, then clamps so both sides keep at least one node.
pub fn test_count_for(class_size: usize, test_fraction: f64) -> usize {
    let rounded = (test_fraction * class_size as f64 + 0.5).floor() as usize;
    rounded.min(class_size.saturating_sub(1)).max(1)
}

/// Stratified per-class split. Deterministic under `seed`.
pub fn split_train_test(ds: &GraphDataset, test_fraction: f64, seed: u64) -> Result<GraphDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    ds.validate_structure()?;
    let mut train_mask = vec![false; ds.node_count];
    let mut test_mask = vec![false; ds.node_count];
    for (class, mut members) in ds.class_members().into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Validation(format!(
                "class {class} has {} node(s); at least 2 are needed to split",
                members.len()
            )));
        }
        let n_test = test_count_for(members.len(), test_fraction);
        members.shuffle(&mut substream(seed, "split", class as u64, 0));
        for (j, &node) in members.iter().enumerate() {
            if j < n_test {
                test_mask[node] = true;
            } else {
                train_mask[node] = true;
            }
        }
    }
    Ok(GraphDataset {
        train_mask,
        test_mask,
        ..ds.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::tiny;

    #[test]
    fn ten_nodes_at_one_fifth() {
        assert_eq!(test_count_for(10, 0.2), 2);
        let ds = tiny(&[0; 10], &[]);
        let split = split_train_test(&ds, 0.2, 1).unwrap();
        assert_eq!(split.test_nodes().count(), 2);
        assert_eq!(split.train_nodes().count(), 8);
    }

    #[test]
    fn three_nodes_never_leave_a_side_empty() {
        // floor(1.5 + 0.5) = 2 test, 1 train.
        assert_eq!(test_count_for(3, 0.5), 2);
        assert_eq!(test_count_for(3, 0.01), 1);
        assert_eq!(test_count_for(3, 0.99), 2);
        assert_eq!(test_count_for(2, 0.5), 1);
    }

    #[test]
    fn same_seed_same_masks() {
        let ds = tiny(&[0, 0, 0, 0, 1, 1, 1, 1, 1], &[]);
        let a = split_train_test(&ds, 0.3, 42).unwrap();
        let b = split_train_test(&ds, 0.3, 42).unwrap();
        assert_eq!(a.train_mask, b.train_mask);
        assert_eq!(a.test_mask, b.test_mask);
        a.validate().unwrap();
    }

    #[test]
    fn singleton_class_is_rejected() {
        let ds = tiny(&[0, 0, 1], &[]);
        assert!(matches!(split_train_test(&ds, 0.5, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn fraction_bounds() {
        let ds = tiny(&[0, 0, 1, 1], &[]);
        assert!(split_train_test(&ds, 0.0, 0).is_err());
        assert!(split_train_test(&ds, 1.0, 0).is_err());
    }
}
