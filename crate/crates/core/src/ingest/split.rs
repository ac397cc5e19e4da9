use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of the non-test pool used for training; the rest validates.
pub const TRAIN_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded partition into train/validation/test. Each list keeps input order.
pub fn split_dataset(ids: &[String], seed: u64, test_fraction: f64) -> Result<DatasetSplit> {
    if ids.is_empty() {
        return Err(Error::Config("cannot split an empty id list".into()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!("test fraction must be in [0, 1), got {test_fraction}")));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::Config(format!("duplicate id '{dup}'")));
    }

    let n = ids.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let n_pool = n - n_test;
    let n_val = (n_pool as f64 * (1.0 - TRAIN_SHARE)).round() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // 0 = train, 1 = validation, 2 = test
    let mut role = vec![0u8; n];
    for &i in &order[..n_test] {
        role[i] = 2;
    }
    for &i in &order[n_test..n_test + n_val] {
        role[i] = 1;
    }
    let pick = |r: u8| -> Vec<String> {
        ids.iter()
            .zip(&role)
            .filter(|(_, &x)| x == r)
            .map(|(id, _)| id.clone())
            .collect()
    };
    Ok(DatasetSplit {
        train: pick(0),
        validation: pick(1),
        test: pick(2),
    })
}
