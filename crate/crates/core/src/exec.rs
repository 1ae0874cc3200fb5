//! Data-parallel helpers. With the `parallel` feature and more than one job,
//! work runs on a dedicated rayon pool; otherwise it runs sequentially.
//! Results are always returned in input order, so callers that reduce them
//! sequentially get identical output for every job count.

/// Number of worker threads; `0` means one per available core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jobs(pub usize);

impl Default for Jobs {
    fn default() -> Self {
        Jobs(1)
    }
}

impl Jobs {
    pub fn sequential() -> Self {
        Jobs(1)
    }

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items`, preserving order.
pub fn par_map<T, R, F>(jobs: Jobs, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !jobs.is_sequential() && items.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.0)
            .build()
            .expect("thread pool");
        return pool.install(|| items.par_iter().map(&f).collect());
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v: Vec<u64> = (0..1000).collect();
        let seq = par_map(Jobs(1), &v, |x| x * x);
        let par = par_map(Jobs(4), &v, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 999 * 999);
    }
}
