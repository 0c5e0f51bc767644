use rayon::prelude::*;
use viewtrace_core::exec::Executor;

/// Rayon-backed executor. Results come back in input order, so output does
/// not depend on the number of workers.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `None` uses every available core.
    pub fn new(jobs: Option<usize>) -> anyhow::Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            builder = builder.num_threads(n.max(1));
        }
        Ok(Self { pool: builder.build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(&self, items: &[T], f: F) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use viewtrace_core::exec::Sequential;

    #[test]
    fn order_matches_sequential() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x.wrapping_mul(2654435761) % 97;
        for jobs in [1, 3, 8] {
            let p = Parallel::new(Some(jobs)).unwrap();
            assert_eq!(p.map(&items, f), Sequential.map(&items, f));
        }
    }
}
