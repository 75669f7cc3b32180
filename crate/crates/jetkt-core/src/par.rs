//! Data-parallel dispatch with a sequential fallback.
//!
//! The heavy loops in this crate — assembling ansatz matrices column by
//! column, applying operators to basis monomials — are embarrassingly
//! parallel over independent inputs.  [`map_collect`] runs them through
//! rayon when the `parallel` feature is enabled and falls back to a plain
//! iterator otherwise.  [`map_collect_seq`] is always sequential; the
//! criterion bench suite uses it as the baseline for speedup comparisons.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order, in parallel when available.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving order, in parallel when available.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Sequential map with the same signature as [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
