//! Scenario-level execution: a rayon pool when the `parallel` feature is on,
//! a plain loop otherwise. Results always come back in index order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// `workers = None` uses the available parallelism.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Runner {
    pub mode: Execution,
    pub workers: Option<usize>,
}

impl Runner {
    pub fn sequential() -> Self {
        Runner {
            mode: Execution::Sequential,
            workers: None,
        }
    }

    pub fn parallel(workers: Option<usize>) -> Self {
        Runner {
            mode: Execution::Parallel,
            workers,
        }
    }

    /// Whether work will actually be spread over threads.
    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.mode == Execution::Parallel && self.workers != Some(1)
    }

    /// `f(0), f(1), ..., f(count - 1)` collected in order.
    pub fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if !self.is_parallel() {
            return (0..count).map(f).collect();
        }
        self.map_parallel(count, f)
    }

    #[cfg(feature = "parallel")]
    fn map_parallel<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        use rayon::prelude::*;

        match self.workers {
            Some(workers) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .expect("thread pool");
                pool.install(|| (0..count).into_par_iter().map(&f).collect())
            }
            None => (0..count).into_par_iter().map(f).collect(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn map_parallel<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
