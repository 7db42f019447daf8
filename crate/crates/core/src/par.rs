//! Order-preserving map/reduce helpers that run on rayon when the `parallel`
//! feature is enabled and fall back to plain iterators otherwise.
//!
//! The `*_sequential` variants are always single-threaded so callers (and the
//! benches) can compare both paths within one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, keeping input order in the output.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    map_sequential(items, f)
}

pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Folds each item into a per-worker accumulator and merges the partials.
///
/// `merge` must be associative and commutative with `identity` as its unit;
/// the result is then independent of how the work was split.
#[cfg(feature = "parallel")]
pub fn fold_merge<T, A, I, F, M>(items: &[T], identity: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    items
        .par_iter()
        .fold(&identity, &fold)
        .reduce(&identity, &merge)
}

#[cfg(not(feature = "parallel"))]
pub fn fold_merge<T, A, I, F, M>(items: &[T], identity: I, fold: F, _merge: M) -> A
where
    I: Fn() -> A,
    F: Fn(A, &T) -> A,
    M: Fn(A, A) -> A,
{
    fold_sequential(items, identity, fold)
}

pub fn fold_sequential<T, A, I, F>(items: &[T], identity: I, fold: F) -> A
where
    I: Fn() -> A,
    F: Fn(A, &T) -> A,
{
    items.iter().fold(identity(), fold)
}

/// True when this build dispatches work to rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keeps_order() {
        let xs: Vec<u32> = (0..1000).collect();
        let ys = map(&xs, |x| x * 2);
        assert_eq!(ys, map_sequential(&xs, |x| x * 2));
    }

    #[test]
    fn fold_merge_matches_sequential() {
        let xs: Vec<u64> = (1..=5000).collect();
        let total = fold_merge(&xs, || 0u64, |a, x| a + x, |a, b| a + b);
        assert_eq!(total, fold_sequential(&xs, || 0u64, |a, x| a + x));
        assert_eq!(total, 5000 * 5001 / 2);
    }
}
