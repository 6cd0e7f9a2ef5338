use crate::error::{invalid, Result};
use crate::fock::C64;
use crate::noise::linear_segment_transform;
use serde::{Deserialize, Serialize};

/// Causal detector response `F(t)`, `t ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseFilter {
    /// `F(t) = gain · Γ e^{−Γt}`; unit area at gain 1.
    Exponential {
        rate: f64,
        #[serde(default = "unit")]
        gain: f64,
    },
    /// Piecewise-linear `F` through `(times, values)`, zero outside.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "unit")]
        gain: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl Default for ResponseFilter {
    fn default() -> Self {
        ResponseFilter::Exponential { rate: 20.0, gain: 1.0 }
    }
}

impl ResponseFilter {
    pub fn exponential(rate: f64) -> Self {
        ResponseFilter::Exponential { rate, gain: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ResponseFilter::Exponential { rate, gain } => {
                if !(*rate > 0.0) || !rate.is_finite() || !gain.is_finite() {
                    return Err(invalid("exponential filter needs a positive finite rate"));
                }
            }
            ResponseFilter::Tabulated { times, values, gain } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(invalid("tabulated filter needs at least two matching times and values"));
                }
                if !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("tabulated filter times must start at or after 0 and increase"));
                }
                if values.iter().chain(times.iter()).any(|v| !v.is_finite()) || !gain.is_finite() {
                    return Err(invalid("tabulated filter entries must be finite"));
                }
            }
        }
        Ok(())
    }

    /// `F(t)`; zero for `t < 0`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            ResponseFilter::Exponential { rate, gain } => gain * rate * (-rate * t).exp(),
            ResponseFilter::Tabulated { times, values, gain } => gain * interp(times, values, t),
        }
    }

    /// Time beyond which `F` vanishes (∞ for the exponential).
    fn support_end(&self) -> f64 {
        match self {
            ResponseFilter::Exponential { .. } => f64::INFINITY,
            ResponseFilter::Tabulated { times, .. } => *times.last().unwrap_or(&0.0),
        }
    }

    /// Mean of `F` over the cell `[k dt, (k+1) dt]`.
    fn cell_average(&self, k: usize, dt: f64) -> f64 {
        match self {
            ResponseFilter::Exponential { rate, gain } => {
                let x = rate * dt;
                gain * rate * (-(k as f64) * x).exp() * (-(-x).exp_m1()) / x
            }
            ResponseFilter::Tabulated { times, values, gain } => {
                let (a, b) = (k as f64 * dt, (k + 1) as f64 * dt);
                // Exact for the piecewise-linear table.
                let mut pts = vec![a];
                pts.extend(times.iter().copied().filter(|&t| t > a && t < b));
                pts.push(b);
                let mut s = 0.0;
                for w in pts.windows(2) {
                    let f0 = interp(times, values, w[0]);
                    let f1 = interp(times, values, w[1]);
                    s += 0.5 * (f0 + f1) * (w[1] - w[0]);
                }
                gain * s / dt
            }
        }
    }
}

fn interp(times: &[f64], values: &[f64], t: f64) -> f64 {
    let last = times.len() - 1;
    if t < times[0] || t > times[last] {
        return 0.0;
    }
    let k = times.partition_point(|&x| x <= t).clamp(1, last);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// `G(μ) = ∫₀^∞ e^{iμt} F(t) dt`.
pub fn transfer_function(filter: &ResponseFilter, mu: f64) -> C64 {
    match filter {
        ResponseFilter::Exponential { rate, gain } => *gain * *rate / C64::new(*rate, -mu),
        ResponseFilter::Tabulated { times, values, gain } => {
            let mut g = C64::new(0.0, 0.0);
            for k in 0..times.len() - 1 {
                g += linear_segment_transform(
                    times[k],
                    times[k + 1],
                    C64::new(values[k], 0.0),
                    C64::new(values[k + 1], 0.0),
                    mu,
                );
            }
            g * *gain
        }
    }
}

/// `J(t) = Σ_k F(t − t_k)` over events `t_k ≤ t`, at each grid time.
pub fn filter_events(filter: &ResponseFilter, events: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    filter.validate()?;
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("grid must be nondecreasing"));
    }
    let mut ev: Vec<f64> = events.to_vec();
    ev.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(grid.len());
    if let ResponseFilter::Exponential { rate, .. } = filter {
        let mut acc = 0.0;
        let mut prev = f64::NEG_INFINITY;
        let mut next = 0usize;
        for &t in grid {
            if prev.is_finite() {
                acc *= (-rate * (t - prev)).exp();
            }
            while next < ev.len() && ev[next] <= t {
                acc += filter.value(t - ev[next]);
                next += 1;
            }
            prev = t;
            out.push(acc);
        }
        return Ok(out);
    }
    let reach = filter.support_end();
    let mut first = 0usize;
    let mut last = 0usize;
    for &t in grid {
        while last < ev.len() && ev[last] <= t {
            last += 1;
        }
        while first < last && t - ev[first] > reach {
            first += 1;
        }
        out.push(ev[first..last].iter().map(|&tk| filter.value(t - tk)).sum());
    }
    Ok(out)
}

/// `I(t_n) = ∫₀^{t_n} F(t_n − r) dB(r)` from per-step increments, `t_n = n·dt`,
/// with `F` replaced by its cell averages. Returns one value per increment.
pub fn filter_increments(filter: &ResponseFilter, increments: &[f64], dt: f64) -> Result<Vec<f64>> {
    filter.validate()?;
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    match filter {
        ResponseFilter::Exponential { rate, .. } => {
            let decay = (-rate * dt).exp();
            let w0 = filter.cell_average(0, dt);
            let mut acc = 0.0;
            Ok(increments
                .iter()
                .map(|&db| {
                    acc = decay * acc + w0 * db;
                    acc
                })
                .collect())
        }
        ResponseFilter::Tabulated { .. } => {
            let cells = ((filter.support_end() / dt).ceil() as usize).max(1);
            let w: Vec<f64> = (0..cells).map(|k| filter.cell_average(k, dt)).collect();
            Ok((0..increments.len())
                .map(|n| {
                    w.iter()
                        .enumerate()
                        .take(n + 1)
                        .map(|(k, wk)| wk * increments[n - k])
                        .sum()
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadConfig};
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn single_jump_response() {
        let f = ResponseFilter::exponential(2.0);
        let grid: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let j = filter_events(&f, &[1.0], &grid).unwrap();
        for (t, v) in grid.iter().zip(&j) {
            let want = if *t >= 1.0 { 2.0 * (-2.0 * (t - 1.0)).exp() } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "{t} {v} {want}");
        }
        assert!(filter_events(&f, &[], &grid).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_transfer_closed_form() {
        let f = ResponseFilter::exponential(3.0);
        assert!((transfer_function(&f, 0.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        for mu in [0.5, 2.0, -7.0] {
            let g2 = transfer_function(&f, mu).norm_sqr();
            assert!((g2 - 9.0 / (9.0 + mu * mu)).abs() < 1e-14);
        }
    }

    #[test]
    fn tabulated_transfer_matches_quadrature() {
        let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| t * (-t).exp()).collect();
        let f = ResponseFilter::Tabulated {
            times: times.clone(),
            values,
            gain: 1.0,
        };
        let cfg = QuadConfig::with_tolerance(1e-13, 1e-12);
        for mu in [0.0, 0.7, 3.0, 25.0] {
            let g = transfer_function(&f, mu);
            let re = integrate(|t| f.value(t) * (mu * t).cos(), 0.0, 3.9, cfg).unwrap();
            let im = integrate(|t| f.value(t) * (mu * t).sin(), 0.0, 3.9, cfg).unwrap();
            assert!((g - C64::new(re, im)).norm() < 1e-8, "{mu} {g} {re} {im}");
        }
    }

    #[test]
    fn campbell_mean_of_poisson_stream() {
        let rate = 3.0;
        let mut rng = stream(4, 0, "campbell");
        let mut t = 0.0;
        let mut ev = Vec::new();
        while t < 4000.0 {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate;
            ev.push(t);
        }
        let f = ResponseFilter::exponential(1.5);
        let grid: Vec<f64> = (100..4000).map(|k| k as f64).collect();
        let j = filter_events(&f, &ev, &grid).unwrap();
        let mean = j.iter().sum::<f64>() / j.len() as f64;
        // Var J = rate ∫F² = rate Γ/2; samples one time unit apart are nearly independent.
        let se = (rate * 1.5 / 2.0 / j.len() as f64).sqrt() * 2.0;
        assert!((mean - rate).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn tabulated_and_exponential_increment_filters_agree() {
        let dt = 0.01;
        let rate = 4.0;
        let times: Vec<f64> = (0..=1200).map(|k| k as f64 * 0.005).collect();
        let values: Vec<f64> = times.iter().map(|t| rate * (-rate * t).exp()).collect();
        let tab = ResponseFilter::Tabulated { times, values, gain: 1.0 };
        let exp = ResponseFilter::exponential(rate);
        let mut rng = stream(2, 0, "inc");
        let inc: Vec<f64> = (0..800).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = filter_increments(&exp, &inc, dt).unwrap();
        let b = filter_increments(&tab, &inc, dt).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-3, "{x} {y}");
        }
    }
}
