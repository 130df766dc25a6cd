//! Execution policy for data-parallel sweeps.
//!
//! Every sweep in the crate maps an independent closure over a slice of
//! sample points and merges the results in input order, so the parallel and
//! sequential paths produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Rayon's global pool. Falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
}

impl Exec {
    pub fn from_jobs(jobs: usize) -> Self {
        if jobs <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Ordered map over `items`.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Ordered map over `0..n`.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Ordered fallible map; the first error in input order is returned.
pub fn try_map<T, R, E, F>(exec: Exec, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(exec, items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Exec::Sequential, &xs, |x| x * x + 1);
        let b = map(Exec::Parallel, &xs, |x| x * x + 1);
        assert_eq!(a, b);
        assert_eq!(map_range(Exec::Parallel, 5, |i| i * 2), vec![0, 2, 4, 6, 8]);
    }

    #[test]
    fn try_map_reports_first_error() {
        let xs = [1, 2, 3, 4];
        let r: Result<Vec<i32>, i32> =
            try_map(Exec::Parallel, &xs, |&x| if x >= 3 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(3));
    }

    #[test]
    fn jobs_policy() {
        assert_eq!(Exec::from_jobs(1), Exec::Sequential);
        assert_eq!(Exec::from_jobs(0), Exec::Sequential);
        assert_eq!(Exec::from_jobs(4), Exec::Parallel);
    }
}
