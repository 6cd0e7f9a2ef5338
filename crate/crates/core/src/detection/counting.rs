use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Counts of one trajectory in the window `[t0, t0 + t]`, with its
/// reference-law weight `p` (1 for physical-law samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSample {
    pub count: f64,
    pub weight: f64,
}

impl CountSample {
    pub fn physical(count: f64) -> Self {
        Self { count, weight: 1.0 }
    }
}

/// Number of `events` in `[t0, t1)`.
pub fn count_in_window(events: &[f64], t0: f64, t1: f64) -> usize {
    events.iter().filter(|&&t| t >= t0 && t < t1).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingStats {
    pub t0: f64,
    pub window: f64,
    pub samples: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub q: f64,
    /// Delete-one jackknife standard error of `q`.
    pub q_se: f64,
}

/// Mean, variance and Mandel Q of window counts.
///
/// Moments are `E[w·N]`, `E[w·N²]`, which are the physical-law moments both
/// for physical samples (`w = 1`) and for reference samples carrying `w = p`.
pub fn estimate_counting(samples: &[CountSample], t0: f64, window: f64) -> Result<CountingStats> {
    let n = samples.len();
    if n < 3 {
        return Err(invalid("counting statistics need at least three trajectories"));
    }
    if samples
        .iter()
        .any(|s| !(s.weight >= 0.0) || !s.weight.is_finite() || !(s.count >= 0.0))
    {
        return Err(invalid("weights and counts must be finite and nonnegative"));
    }
    let s1: f64 = samples.iter().map(|s| s.weight * s.count).sum();
    let s2: f64 = samples.iter().map(|s| s.weight * s.count * s.count).sum();
    let stats = |a1: f64, a2: f64, m: usize| {
        let mean = a1 / m as f64;
        let var = (a2 / m as f64 - mean * mean) * m as f64 / (m - 1) as f64;
        (mean, var)
    };
    let (mean, variance) = stats(s1, s2, n);
    if !(mean > 0.0) {
        return Err(Error::QUndefined);
    }
    let q = variance / mean - 1.0;
    let mut loo = Vec::with_capacity(n);
    for s in samples {
        let (m, v) = stats(s1 - s.weight * s.count, s2 - s.weight * s.count * s.count, n - 1);
        loo.push(if m > 0.0 { v / m - 1.0 } else { q });
    }
    let lm = loo.iter().sum::<f64>() / n as f64;
    let q_se = (loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64).sqrt();
    let wn: Vec<f64> = samples.iter().map(|s| s.weight * s.count).collect();
    let mean_se = crate::ensemble::mean_se(&wn).se;
    Ok(CountingStats {
        t0,
        window,
        samples: n,
        mean,
        mean_se,
        variance,
        q,
        q_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::jackknife;
    use crate::rng::stream;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn poisson_counts_have_zero_q() {
        let mut rng = stream(1, 0, "poisson");
        let d = Poisson::new(7.5).unwrap();
        let s: Vec<CountSample> = (0..4000).map(|_| CountSample::physical(d.sample(&mut rng))).collect();
        let st = estimate_counting(&s, 0.0, 1.0).unwrap();
        assert!(st.q.abs() < 3.0 * st.q_se, "{} {}", st.q, st.q_se);
        assert!((st.mean - 7.5).abs() < 3.0 * st.mean_se);
    }

    #[test]
    fn zero_counts_leave_q_undefined() {
        let s = vec![CountSample::physical(0.0); 5];
        assert_eq!(estimate_counting(&s, 0.0, 1.0), Err(Error::QUndefined));
    }

    #[test]
    fn fast_jackknife_matches_generic() {
        let s: Vec<CountSample> = (0..40)
            .map(|i| CountSample {
                count: ((i * 7) % 5) as f64,
                weight: 0.5 + ((i * 3) % 4) as f64 * 0.25,
            })
            .collect();
        let st = estimate_counting(&s, 0.0, 1.0).unwrap();
        let (q, se) = jackknife(&s, |r| {
            let m = r.len() as f64;
            let a = r.iter().map(|x| x.weight * x.count).sum::<f64>() / m;
            let b = r.iter().map(|x| x.weight * x.count * x.count).sum::<f64>() / m;
            (b - a * a) * m / (m - 1.0) / a - 1.0
        });
        assert!((q - st.q).abs() < 1e-12);
        assert!((se - st.q_se).abs() < 1e-12);
    }

    #[test]
    fn window_counting() {
        assert_eq!(count_in_window(&[0.5, 1.0, 1.5, 2.0], 1.0, 2.0), 2);
    }
}
