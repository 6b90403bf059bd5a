use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of test examples drawn from a class of size `n`.
fn test_count(n: usize, test_fraction: f64) -> usize {
    ((n as f64) * test_fraction).round().clamp(1.0, (n - 1) as f64) as usize
}

/// Stratified train/test tagging. Each class contributes
/// `round(test_fraction * class_size)` examples to the test split, clamped so
/// both splits see the class.
pub fn split_dataset<T: Scalar>(ds: &Dataset<T>, test_fraction: f64, seed: u64) -> Result<Dataset<T>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("test_fraction {test_fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = vec![Some(Split::Train); ds.len()];
    for label in [0u8, 1] {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == label).collect();
        if members.len() < 2 {
            return Err(Error::InsufficientClass { label, count: members.len(), needed: 2 });
        }
        members.shuffle(&mut rng);
        for &i in &members[..test_count(members.len(), test_fraction)] {
            splits[i] = Some(Split::Test);
        }
    }
    ds.clone().with_splits(splits)
}
