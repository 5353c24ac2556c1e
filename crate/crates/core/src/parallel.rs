//! Thread-count control for the data-parallel parts of the crate.

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `n` workers, or on the current pool when
/// `n` is `None`. Results never depend on the worker count.
pub fn with_threads<T, F>(n: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match n {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::BadConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}
