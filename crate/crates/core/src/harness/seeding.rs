//! Deterministic seed derivation for Monte Carlo trials.

use sha2::{Digest, Sha256};

/// Counter-mode hash fanout: collision-free over any practical index range
/// and identical across platforms.
pub fn seed_fanout(base_seed: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn distinct_indices_give_distinct_seeds() {
        assert_ne!(seed_fanout(42, 0), seed_fanout(42, 1));
        assert_eq!(seed_fanout(42, 0), seed_fanout(42, 0));
    }

    #[test]
    fn no_collisions_over_ten_thousand() {
        let seeds: HashSet<u64> = (0..10_000).map(|i| seed_fanout(7, i)).collect();
        assert_eq!(seeds.len(), 10_000);
    }

    #[test]
    fn different_bases_decorrelate() {
        let a: Vec<u64> = (0..100).map(|i| seed_fanout(1, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| seed_fanout(2, i)).collect();
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }
}
