//! Replica scheduling for the Monte Carlo loops.
//!
//! Work is cut into fixed-size replicas; replica `r` always draws from the
//! stream `(seed, r)` and results are merged in replica order, so the output
//! does not depend on thread count or on whether the `parallel` feature is on.

/// Shots handled by one replica.
pub const REPLICA_SHOTS: u64 = 8192;

/// How replica work is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise sequential.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run replicas concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(replica_index, shots_in_replica)` for a total shot budget.
pub fn replica_plan(shots: u64) -> Vec<(u64, u64)> {
    let full = shots / REPLICA_SHOTS;
    let rest = shots % REPLICA_SHOTS;
    let mut plan: Vec<(u64, u64)> = (0..full).map(|r| (r, REPLICA_SHOTS)).collect();
    if rest > 0 {
        plan.push((full, rest));
    }
    plan
}

/// Runs `f(replica, shots)` for every replica and returns results in replica order.
pub fn map_replicas<T, F>(exec: Execution, shots: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    let plan = replica_plan(shots);
    map_ordered(exec, &plan, |&(r, n)| f(r, n))
}

/// Order-preserving map over a slice, concurrent when allowed.
pub fn map_ordered<I, T, F>(exec: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = exec;
    items.iter().map(f).collect()
}
