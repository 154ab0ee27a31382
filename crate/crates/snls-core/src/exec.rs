use crate::error::{Error, Result};

/// Environment variable fixing the worker-thread count; unset means one
/// thread per available core.
pub const WORKERS_ENV: &str = "SNLS_WORKERS";

/// Worker count from the environment, None when unset.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .map_err(|_| Error::invalid(WORKERS_ENV, format!("{raw:?} (expected a positive integer)")))?;
            if n == 0 {
                return Err(Error::invalid(WORKERS_ENV, "0 (expected a positive integer)"));
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::invalid(WORKERS_ENV, e.to_string())),
    }
}

/// Runs `job` on every index in 0..count and collects the outputs in index
/// order, failing on the first error. `workers` = Some(1) forces the
/// sequential path; Some(n) uses a dedicated n-thread pool; None uses the
/// process-wide default.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, workers: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    use rayon::prelude::*;

    let run = || (0..count).into_par_iter().map(&job).collect::<Result<Vec<T>>>();
    match workers {
        Some(1) => map_indexed_seq(count, job),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, _workers: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    map_indexed_seq(count, job)
}

/// Sequential reference path, also the benchmark baseline.
pub fn map_indexed_seq<T, F>(count: usize, job: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..count).map(job).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let sq = |i: usize| Ok(i * i);
        let par = map_indexed(100, None, sq).unwrap();
        let seq = map_indexed_seq(100, sq).unwrap();
        assert_eq!(par, seq, "outputs must come back in index order");
        assert_eq!(par[7], 49);
    }

    #[test]
    fn explicit_worker_counts_are_honored() {
        let v = map_indexed(10, Some(2), |i| Ok(i + 1)).unwrap();
        assert_eq!(v, (1..=10).collect::<Vec<_>>());
        let v1 = map_indexed(10, Some(1), |i| Ok(i + 1)).unwrap();
        assert_eq!(v1, v);
    }

    #[test]
    fn first_error_wins() {
        let r = map_indexed(10, Some(1), |i| {
            if i >= 3 {
                Err(crate::Error::invalid("i", format!("{i}")))
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err(), "an erroring job must fail the whole map");
    }

    #[test]
    fn env_parsing_accepts_integers_and_rejects_junk() {
        // Serialized against other env tests by running in one process; the
        // variable is restored before returning.
        let saved = std::env::var(WORKERS_ENV).ok();
        std::env::set_var(WORKERS_ENV, "4");
        assert_eq!(workers_from_env().unwrap(), Some(4));
        std::env::set_var(WORKERS_ENV, "0");
        assert!(workers_from_env().is_err(), "zero workers is meaningless");
        std::env::set_var(WORKERS_ENV, "many");
        assert!(workers_from_env().is_err());
        std::env::remove_var(WORKERS_ENV);
        assert_eq!(workers_from_env().unwrap(), None);
        if let Some(v) = saved {
            std::env::set_var(WORKERS_ENV, v);
        }
    }
}
