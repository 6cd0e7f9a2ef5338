//! Parallel map over trajectory ids with results kept in id order, plus the
//! small sample statistics every estimator needs.

use crate::error::{invalid, Result};
use rayon::prelude::*;

/// Runs `task(id)` for `id in 0..count` on `threads` workers (all cores when
/// `None`) and returns the results ordered by id. Reductions over the output
/// are therefore independent of the worker count.
pub fn run_ordered<T, F>(count: u64, threads: Option<usize>, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let go = || (0..count).into_par_iter().map(&task).collect::<Vec<T>>();
    match threads {
        None => Ok(go()),
        Some(0) => Err(invalid("thread count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(go))
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// |self − other| in units of the combined standard error.
    pub fn z_against(&self, other: &MeanEstimate) -> f64 {
        let se = (self.se * self.se + other.se * other.se).sqrt();
        (self.mean - other.mean).abs() / se
    }

    /// |self − value| in units of the standard error.
    pub fn z_value(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.se
    }
}

/// Mean and standard error of `xs`, summed in order.
pub fn mean_se(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    MeanEstimate { mean, se, n }
}

/// Delete-one jackknife of a statistic of per-sample rows.
///
/// `stat` maps a slice of rows to a value; it is evaluated once on all rows
/// and once with each row left out. Returns the full-sample value and the
/// jackknife standard error.
pub fn jackknife<R: Clone, F: Fn(&[R]) -> f64>(rows: &[R], stat: F) -> (f64, f64) {
    let n = rows.len();
    let full = stat(rows);
    if n < 2 {
        return (full, f64::INFINITY);
    }
    let mut buf: Vec<R> = Vec::with_capacity(n - 1);
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend_from_slice(&rows[..i]);
        buf.extend_from_slice(&rows[i + 1..]);
        loo.push(stat(&buf));
    }
    let m = loo.iter().sum::<f64>() / n as f64;
    let var = loo.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (full, var.sqrt())
}
