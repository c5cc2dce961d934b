//! Per-replicate random streams and order-preserving parallel execution.
//!
//! Every replicate draws from its own ChaCha stream selected by
//! `(master seed, replicate index)`, so results never depend on how
//! replicates are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Random stream for one replicate.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent master seed for a named sub-experiment, e.g. one
/// threshold of a sweep that cannot share samples with the others.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `job` for replicates `0..replicates` on `workers` threads (0 means the
/// rayon default) and returns the results in replicate order.
///
/// `init` builds per-worker scratch state that `job` may reuse between
/// replicates.
pub fn run_replicates<T, S, I, F>(replicates: usize, seed: u64, workers: usize, init: I, job: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut ChaCha8Rng) -> Result<T> + Sync + Send,
{
    let run = || {
        (0..replicates as u64)
            .into_par_iter()
            .map_init(&init, |scratch, index| {
                let mut rng = replicate_rng(seed, index);
                job(scratch, &mut rng)
            })
            .collect::<Result<Vec<T>>>()
    };
    if workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?
            .install(run)
    }
}
