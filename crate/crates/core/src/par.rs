//! Replica-level parallelism.
//!
//! With the `parallel` feature (default) replica maps run on the rayon pool;
//! without it, or after [`set_mode`] with [`Mode::Sequential`], they run in a
//! plain loop. Results are always returned in index order.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Parallel,
    Sequential,
}

static MODE: AtomicU8 = AtomicU8::new(0);

/// Selects how subsequent replica maps execute.
pub fn set_mode(mode: Mode) {
    MODE.store(matches!(mode, Mode::Sequential) as u8, Ordering::SeqCst);
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::SeqCst) == 0 {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// Maps `f` over `start..end`, returning results ordered by index.
pub fn map_indexed<T, F>(start: u64, end: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            (start..end).into_par_iter().map(f).collect()
        }
        _ => (start..end).map(f).collect(),
    }
}

/// Sequential reference path, always available.
pub fn map_indexed_sequential<T, F>(start: u64, end: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (start..end).map(f).collect()
}

/// Maps over a slice, returning results in slice order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(3, 200, |i| i * i + 1);
        let b = map_indexed_sequential(3, 200, |i| i * i + 1);
        assert_eq!(a, b);
    }
}
