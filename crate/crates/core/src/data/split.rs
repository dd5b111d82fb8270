use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub eval: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded 8:1:1 partition; eval and test get `floor(n / 10)` each.
///
/// Ids are sorted before shuffling so the split depends only on the id set and the seed.
pub fn split_cohort(ids: &[String], seed: u64) -> CohortSplit {
    let mut ids = ids.to_vec();
    ids.sort();
    ids.dedup();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let n_train = n * 8 / 10;
    let n_eval = n / 10;
    let test = ids.split_off(n_train + n_eval);
    let eval = ids.split_off(n_train);
    CohortSplit {
        seed,
        train: ids,
        eval,
        test,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i:04}")).collect()
    }

    #[test]
    fn sizes() {
        for (n, expect) in [(2310, (1848, 231, 231)), (10, (8, 1, 1)), (11, (8, 1, 2)), (0, (0, 0, 0)), (3, (2, 0, 1))] {
            let s = split_cohort(&ids(n), 1);
            assert_eq!((s.train.len(), s.eval.len(), s.test.len()), expect, "n = {n}");
        }
    }

    #[test]
    fn deterministic_partition() {
        let a = split_cohort(&ids(100), 9);
        assert_eq!(a, split_cohort(&ids(100), 9));
        assert_ne!(a, split_cohort(&ids(100), 10));
        let mut all: Vec<String> = a.train.iter().chain(&a.eval).chain(&a.test).cloned().collect();
        all.sort();
        assert_eq!(all, ids(100));
    }
}
