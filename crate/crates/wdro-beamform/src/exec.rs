//! Parallel execution of independent, index-addressed work items.
//!
//! Results are always collected in index order, so aggregates computed from
//! them are identical whether the work ran sequentially or on a rayon pool.
//! Building with `--no-default-features` removes rayon entirely and every
//! call degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution mode for embarrassingly parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Use the rayon pool when the `parallel` feature is enabled.
    #[default]
    Auto,
    /// Force single-threaded execution.
    Sequential,
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(mode: Parallelism, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        Parallelism::Sequential => (0..len).map(f).collect(),
        Parallelism::Auto => {
            #[cfg(feature = "parallel")]
            {
                (0..len).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..len).map(f).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let f = |i: usize| (i as f64).sin() * (i as f64 + 1.0).sqrt();
        let seq = map_indexed(Parallelism::Sequential, 1000, f);
        let auto = map_indexed(Parallelism::Auto, 1000, f);
        assert_eq!(seq, auto);
    }

    #[test]
    fn preserves_index_order() {
        let out = map_indexed(Parallelism::Auto, 64, |i| i);
        assert_eq!(out, (0..64).collect::<Vec<_>>());
    }
}
