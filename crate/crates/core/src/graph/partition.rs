use serde::{Deserialize, Serialize};

use super::GraphDataset;
use crate::error::{Error, Result};

/// One latent task: a contiguous block of class ids and the nodes they own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub class_ids: Vec<usize>,
    pub train_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
}

impl Task {
    /// Train-node count, the task's sample size in the stream.
    pub fn size(&self) -> usize {
        self.train_nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPartition {
    pub tasks: Vec<Task>,
}

impl TaskPartition {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.tasks.iter().map(Task::size).collect()
    }

    /// Builds a partition directly from per-task train-node counts, with
    /// synthetic node ids and one class per task. Handy for schedule work
    /// where only the sizes matter.
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut next = 0;
        let tasks = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let train_nodes = (next..next + n).collect();
                next += n;
                Task {
                    class_ids: vec![k],
                    train_nodes,
                    test_nodes: Vec::new(),
                }
            })
            .collect();
        TaskPartition { tasks }
    }
}

/// Groups classes in ascending id order, `classes_per_task` at a time. When
/// the count does not divide evenly the final task holds the leftover
/// classes, so no class is ever dropped.
pub fn partition_tasks(ds: &GraphDataset, classes_per_task: usize) -> Result<TaskPartition> {
    ds.validate()?;
    let c = ds.class_count;
    if classes_per_task == 0 || classes_per_task > c {
        return Err(Error::Config(format!(
            "classes_per_task must lie in [1, {c}], got {classes_per_task}"
        )));
    }
    let k = task_count(c, classes_per_task);
    let mut tasks: Vec<Task> = (0..k)
        .map(|t| {
            let lo = t * classes_per_task;
            let hi = if t + 1 == k { c } else { lo + classes_per_task };
            Task {
                class_ids: (lo..hi).collect(),
                train_nodes: Vec::new(),
                test_nodes: Vec::new(),
            }
        })
        .collect();
    for node in 0..ds.node_count {
        let task = (ds.labels[node] / classes_per_task).min(k - 1);
        if ds.train_mask[node] {
            tasks[task].train_nodes.push(node);
        } else if ds.test_mask[node] {
            tasks[task].test_nodes.push(node);
        }
    }
    Ok(TaskPartition { tasks })
}

/// `ceil(classes / classes_per_task)`: the number of tasks produced.
pub(crate) fn task_count(classes: usize, classes_per_task: usize) -> usize {
    classes.div_ceil(classes_per_task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::tiny;
    use crate::graph::split_train_test;

    fn labelled(class_count: usize, per_class: usize) -> GraphDataset {
        let labels: Vec<usize> = (0..class_count).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
        split_train_test(&tiny(&labels, &[]), 0.5, 3).unwrap()
    }

    #[test]
    fn table_task_counts() {
        for (classes, expected) in [(70, 35), (40, 20), (18, 9)] {
            let p = partition_tasks(&labelled(classes, 2), 2).unwrap();
            assert_eq!(p.len(), expected);
        }
    }

    #[test]
    fn remainder_goes_to_final_task() {
        let p = partition_tasks(&labelled(5, 4), 2).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.tasks[2].class_ids, vec![4]);
        assert_eq!(p.tasks[0].class_ids, vec![0, 1]);
    }

    #[test]
    fn partition_covers_train_nodes_once() {
        let ds = labelled(7, 6);
        let p = partition_tasks(&ds, 3).unwrap();
        let mut all: Vec<usize> = p.tasks.iter().flat_map(|t| t.train_nodes.clone()).collect();
        all.sort_unstable();
        let expected: Vec<usize> = ds.train_nodes().collect();
        assert_eq!(all, expected);
        assert_eq!(p.sizes().iter().sum::<usize>(), expected.len());
        // classes_per_task=3 over 7 classes: {0,1,2} {3,4,5} {6}
        assert_eq!(p.len(), 3);
        assert_eq!(p.tasks[2].class_ids, vec![6]);
    }

    #[test]
    fn rejects_bad_task_width() {
        let ds = labelled(4, 2);
        assert!(partition_tasks(&ds, 0).is_err());
        assert!(partition_tasks(&ds, 5).is_err());
        assert_eq!(partition_tasks(&ds, 4).unwrap().len(), 1);
    }
}
