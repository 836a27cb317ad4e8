//! Data-parallel map helpers with an explicit sequential fallback.
//!
//! Every parallel site in the crate funnels through [`map_indexed`], which
//! dispatches to rayon when the `parallel` feature is enabled (the default)
//! and to a plain loop otherwise. Both variants stay available as named
//! functions so benchmarks can compare them directly. Work items are indexed
//! and results collected in index order, so the two paths produce identical
//! bytes.

/// Sequential map over `0..n`.
pub fn seq_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    (0..n).map(f).collect()
}

/// Rayon map over `0..n`, results in index order.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map over `0..n` with the configured execution strategy.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    par_map_indexed(n, f)
}

/// Map over `0..n` with the configured execution strategy.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    seq_map_indexed(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_by_index() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let a = seq_map_indexed(257, |i| (i as f64).sin());
        let b = par_map_indexed(257, |i| (i as f64).sin());
        assert_eq!(a, b);
    }
}
