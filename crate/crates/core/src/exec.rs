//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces the same result in both modes: maps preserve input
//! order and reductions fold fixed-size chunks that are merged left to right.

/// Execution mode for batch work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Uses the rayon global pool; identical to `Sequential` when the
    /// `parallel` feature is off.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<U, F>(self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Folds `chunk`-sized slices into accumulators and merges them in order.
    pub fn fold_chunks<T, A, Init, Fold, Merge>(self, items: &[T], chunk: usize, init: Init, fold: Fold, merge: Merge) -> A
    where
        T: Sync,
        A: Send,
        Init: Fn() -> A + Sync + Send,
        Fold: Fn(&mut A, &T) + Sync + Send,
        Merge: Fn(A, A) -> A + Sync + Send,
    {
        let chunk = chunk.max(1);
        let fold_one = |slice: &[T]| {
            let mut acc = init();
            for item in slice {
                fold(&mut acc, item);
            }
            acc
        };
        let partials: Vec<A> = {
            #[cfg(feature = "parallel")]
            {
                if self.is_parallel() {
                    use rayon::prelude::*;
                    items.par_chunks(chunk).map(fold_one).collect()
                } else {
                    items.chunks(chunk).map(fold_one).collect()
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.chunks(chunk).map(fold_one).collect()
            }
        };
        partials.into_iter().fold(init(), merge)
    }
}
