//! Optional worker pool. Runs are sequential unless `NOON_THREADS` asks for
//! more than one thread; results always come back in input order, so output
//! does not depend on the thread count.

use rayon::prelude::*;

/// Environment variable selecting the worker count.
pub const THREADS_VAR: &str = "NOON_THREADS";

pub struct Pool {
    threads: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Pool {
    pub fn sequential() -> Pool {
        Pool { threads: 1, pool: None }
    }

    pub fn new(threads: usize) -> Result<Pool, String> {
        if threads == 0 {
            return Err("thread count must be at least 1".into());
        }
        if threads == 1 {
            return Ok(Pool::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Pool {
            threads,
            pool: Some(pool),
        })
    }

    /// Reads [`THREADS_VAR`]; unset or empty means sequential.
    pub fn from_env() -> Result<Pool, String> {
        match std::env::var(THREADS_VAR) {
            Err(std::env::VarError::NotPresent) => Ok(Pool::sequential()),
            Err(e) => Err(format!("{THREADS_VAR}: {e}")),
            Ok(v) if v.trim().is_empty() => Ok(Pool::sequential()),
            Ok(v) => {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| format!("{THREADS_VAR} must be a positive integer, got `{v}`"))?;
                Pool::new(n).map_err(|e| format!("{THREADS_VAR}: {e}"))
            }
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.iter().map(f).collect(),
            Some(p) => p.install(|| items.par_iter().map(f).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..200).collect();
        let f = |x: &u64| (0..*x).fold(*x, |a, b| a.wrapping_mul(31).wrapping_add(b));
        let seq = Pool::sequential().map(&items, f);
        let par = Pool::new(4).unwrap().map(&items, f);
        assert_eq!(seq, par);
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(Pool::new(0).is_err());
    }
}
