//! Data-parallel helpers for batch work (verification batches, parameter
//! search, pass-fraction measurement). Query execution itself is always
//! single-threaded.
//!
//! Without the `parallel` feature every batch runs sequentially.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// What [`map`] will actually do in this build.
    pub fn effective(self) -> Parallelism {
        if cfg!(feature = "parallel") {
            self
        } else {
            Parallelism::Sequential
        }
    }
}

/// `items.iter().map(f)`, in input order, on the rayon pool when requested.
pub fn map<T, R, F>(par: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match par.effective() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
