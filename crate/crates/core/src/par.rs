//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the default [`map`] fans out over rayon's
//! pool; without it, or through [`map_seq`], it runs on the caller's thread.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the feature is enabled.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always sequential; same results as [`map`].
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Whether [`map`] runs in parallel in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
