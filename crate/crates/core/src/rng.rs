//! Seed-derived random streams.
//!
//! Every replica, feature or sample block owns a ChaCha8 stream selected by
//! `(seed, stream)`, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Independent stream number `stream` under a master `seed`.
pub fn stream(seed: u64, stream: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-level stream id: e.g. (replica, feature). Keeps the low 24 bits for `minor`.
pub fn substream(seed: u64, major: u64, minor: u64) -> Stream {
    debug_assert!(minor < (1 << 24));
    stream(seed, (major << 24) | minor)
}

/// Run `f(replica)` for `0..count` on the worker pool and return results in
/// replica order. The pool size comes from `CURVFLOW_THREADS` when set.
pub fn map_replicas<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        if let Some(n) = std::env::var("CURVFLOW_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
            // a pool may already exist if the host application built one
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    });
    (0..count as u64).into_par_iter().map(f).collect()
}
