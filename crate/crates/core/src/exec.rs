//! Execution strategy and reproducible random substreams.
//!
//! Every data-parallel loop in the crate goes through [`map_indices`], which
//! runs on the rayon pool when the `parallel` feature is enabled and the
//! caller asks for [`Execution::Parallel`]. Work items draw randomness only
//! from [`substream`], keyed by the item index, so results never depend on
//! scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run loops in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Evaluates `f(0), f(1), .., f(n - 1)` and collects the results in index order.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Counter-based substream: ChaCha8 keyed by `seed`, with `stream` selecting
/// an independent stream and `block` jumping to a disjoint 2^36-word window
/// inside it.
pub fn substream(seed: u64, stream: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(block) << 36);
    rng
}

/// Mixes two words into a derived seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| {
            let mut rng = substream(7, i as u64, 0);
            rng.random::<u64>()
        };
        let a = map_indices(Execution::Sequential, 64, f);
        let b = map_indices(Execution::Parallel, 64, f);
        assert_eq!(a, b);
    }

    #[test]
    fn substreams_are_distinct() {
        let mut a = substream(1, 0, 0);
        let mut b = substream(1, 1, 0);
        let mut c = substream(1, 0, 1);
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
    }
}
