use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

/// Disjoint train and test node indices, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn validate(&self, n: usize) -> Result<(), DataError> {
        let mut owner = vec![0u8; n];
        for (set, tag) in [(&self.train, 1u8), (&self.test, 2u8)] {
            for &i in set.iter() {
                if i >= n {
                    return Err(DataError::Split(format!("index {i} out of range for {n} nodes")));
                }
                if owner[i] != 0 {
                    let what = if owner[i] == tag {
                        "repeated"
                    } else {
                        "in both train and test"
                    };
                    return Err(DataError::Split(format!("node {i} is {what}")));
                }
                owner[i] = tag;
            }
        }
        Ok(())
    }
}

fn shuffled_by_class(labels: &[usize], num_classes: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for nodes in &mut by_class {
        nodes.shuffle(rng);
    }
    by_class
}

fn check_class_sizes(by_class: &[Vec<usize>], needed: usize) -> Result<(), DataError> {
    for (class, nodes) in by_class.iter().enumerate() {
        if nodes.len() < needed {
            return Err(DataError::InsufficientClass {
                class,
                available: nodes.len(),
                needed,
            });
        }
    }
    Ok(())
}

/// `per_class` training nodes from every class, then `test_size` test nodes
/// drawn uniformly from the rest. Labels must be `< num_classes`.
pub fn make_split(
    labels: &[usize],
    num_classes: usize,
    per_class: usize,
    test_size: usize,
    seed: u64,
) -> Result<Split, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(labels, num_classes, &mut rng);
    check_class_sizes(&by_class, per_class)?;
    let mut train = Vec::with_capacity(per_class * num_classes);
    let mut rest = Vec::new();
    for nodes in &by_class {
        train.extend_from_slice(&nodes[..per_class]);
        rest.extend_from_slice(&nodes[per_class..]);
    }
    if rest.len() < test_size {
        return Err(DataError::Split(format!(
            "{test_size} test nodes requested, {} remain after training",
            rest.len()
        )));
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let mut test = rest[..test_size].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Fixed per-class counts for both sets.
pub fn make_stratified_split(
    labels: &[usize],
    num_classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<Split, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(labels, num_classes, &mut rng);
    check_class_sizes(&by_class, train_per_class + test_per_class)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for nodes in &by_class {
        train.extend_from_slice(&nodes[..train_per_class]);
        test.extend_from_slice(&nodes[train_per_class..train_per_class + test_per_class]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
