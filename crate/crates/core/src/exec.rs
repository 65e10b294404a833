//! Deterministic execution of independent work items.
//!
//! Every batch computation in this crate (solver restarts, candidate
//! batteries, sweep points, Monte Carlo strata) is expressed as a map over an
//! index range. Items are computed independently and collected back in index
//! order, so the combined result is bit-identical no matter how many threads
//! ran the map. With the `parallel` feature (default) the map runs on rayon;
//! without it the same code degrades to a sequential loop.

use serde::{Deserialize, Serialize};

/// Worker-thread policy for batch maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Parallelism {
    /// One item at a time on the calling thread.
    Sequential,
    /// A pool of exactly `n` threads.
    Threads(usize),
    /// Let the runtime pick (number of logical CPUs).
    #[default]
    Auto,
}

impl Parallelism {
    /// Parse `"1"`, `"4"`, `"auto"`, `"seq"`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Parallelism::Auto),
            "seq" | "sequential" => Some(Parallelism::Sequential),
            _ => s.parse::<usize>().ok().map(|n| {
                if n <= 1 {
                    Parallelism::Sequential
                } else {
                    Parallelism::Threads(n)
                }
            }),
        }
    }
}

#[cfg(feature = "parallel")]
mod imp {
    use super::Parallelism;
    use rayon::prelude::*;

    /// Run `body` under the requested thread policy.
    pub fn scope<R: Send>(par: Parallelism, body: impl FnOnce() -> R + Send) -> R {
        match par {
            Parallelism::Auto => body(),
            Parallelism::Sequential => pooled(1, body),
            Parallelism::Threads(n) => pooled(n.max(1), body),
        }
    }

    fn pooled<R: Send>(n: usize, body: impl FnOnce() -> R + Send) -> R {
        match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(_) => body(),
        }
    }

    /// Map `f` over `0..len`, collecting results in index order.
    pub fn map_indexed<R: Send>(len: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
        (0..len).into_par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use super::Parallelism;

    pub fn scope<R: Send>(_par: Parallelism, body: impl FnOnce() -> R + Send) -> R {
        body()
    }

    pub fn map_indexed<R: Send>(len: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
        (0..len).map(f).collect()
    }
}

pub use imp::{map_indexed, scope};
