//! Data-parallel map over independent work items. With the `parallel` feature
//! (on by default) the work runs on the rayon global pool; without it the
//! same API degrades to a sequential loop, so callers never branch on the
//! feature themselves. Output order always matches input order.

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    map_items_seq(items, f)
}

/// Sequential map with the same shape, kept available under every feature
/// set for baseline comparisons.
pub fn map_items_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Size the rayon global pool. Call once, before any parallel work; later
/// calls cannot resize the pool and are reported and ignored. Without the
/// `parallel` feature a requested job count other than 1 is reported and
/// ignored too.
pub fn configure_jobs(jobs: Option<usize>) {
    let Some(jobs) = jobs else { return };
    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::warn!("could not set worker count to {jobs}: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if jobs != 1 {
            log::warn!("built without the `parallel` feature; --jobs {jobs} ignored");
        }
    }
}
