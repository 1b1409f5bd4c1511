//! Order-preserving data-parallel helpers. Results never depend on the
//! thread count: work items are mapped independently and collected in index
//! order, and reductions happen sequentially afterwards.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<I, T, F>(range: Range<I>, f: F) -> Vec<T>
where
    Range<I>: IntoParallelIterator<Item = I>,
    F: Fn(I) -> T + Sync + Send,
    T: Send,
{
    range.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<I, T, F>(range: Range<I>, f: F) -> Vec<T>
where
    Range<I>: Iterator<Item = I>,
    F: Fn(I) -> T,
{
    range.map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn flat_map_collect<I, T, F>(range: Range<I>, f: F) -> Vec<T>
where
    Range<I>: IntoParallelIterator<Item = I>,
    F: Fn(I) -> Vec<T> + Sync + Send,
    T: Send,
{
    range.into_par_iter().flat_map_iter(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn flat_map_collect<I, T, F>(range: Range<I>, f: F) -> Vec<T>
where
    Range<I>: Iterator<Item = I>,
    F: Fn(I) -> Vec<T>,
{
    range.flat_map(f).collect()
}
