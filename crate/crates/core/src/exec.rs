//! Ensemble execution. Every ensemble loop in the crate goes through
//! [`Execution::fold`], which runs on rayon when the `parallel` feature is on
//! and falls back to a plain sequential fold otherwise.
//!
//! Results are independent of the worker count as long as the merge is exact
//! (integer histograms and counters) or the items are collected in index order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually run work in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Fold `0..n` into per-worker accumulators and merge them.
    pub fn fold<T, Id, F, M>(self, n: usize, identity: Id, fold: F, merge: M) -> T
    where
        T: Send,
        Id: Fn() -> T + Sync + Send,
        F: Fn(T, usize) -> T + Sync + Send,
        M: Fn(T, T) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n)
                    .into_par_iter()
                    .fold(&identity, &fold)
                    .reduce(&identity, &merge)
            }
            _ => {
                let _ = &merge;
                (0..n).fold(identity(), fold)
            }
        }
    }

    /// Map `0..n` and collect the results in index order.
    pub fn map_collect<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Counter-based random stream for ensemble member `index` under `seed`.
///
/// Each member owns an independent ChaCha stream, so draws do not depend on
/// which worker processes the member or in which order.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
