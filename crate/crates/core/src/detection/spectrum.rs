use crate::error::{invalid, Result};
use crate::fock::C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // Periodic Hann: a constant leaks only into bins 0 and ±1.
            Window::Hann => (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Samples per segment.
    pub segment_length: usize,
    /// Fractional overlap of consecutive segments, in `[0, 1)`.
    #[serde(default = "half")]
    pub overlap: f64,
    #[serde(default)]
    pub window: Window,
}

fn half() -> f64 {
    0.5
}

/// Averaged windowed periodogram of `(1/T)|∫ e^{iμt} x(t) dt|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Angular frequencies, ascending.
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub se: Vec<f64>,
    pub segments: usize,
    pub segment_length: usize,
    pub dt: f64,
    pub window: Window,
    /// Weight `w` of a `w·δ(μ)` component, from windowed segment means with
    /// the regular part near zero removed.
    pub spike_weight: f64,
    pub spike_se: f64,
}

impl SpectrumEstimate {
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / (self.segment_length as f64 * self.dt)
    }
}

/// Welch estimate from sampled records `x(t_n)`, `t_n = n·dt`.
///
/// Standard errors come from the scatter of per-record averages, so they
/// need at least two records; with one record the segment scatter is used.
pub fn estimate_spectrum<S: AsRef<[C64]>>(records: &[S], dt: f64, cfg: &SpectrumConfig) -> Result<SpectrumEstimate> {
    let n = cfg.segment_length;
    if n < 8 {
        return Err(invalid("segment length must be at least 8 samples"));
    }
    if !(dt > 0.0) {
        return Err(invalid("sampling step must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(invalid("overlap must lie in [0, 1)"));
    }
    if records.is_empty() {
        return Err(invalid("no records"));
    }
    if records.iter().any(|r| r.as_ref().len() < n) {
        return Err(invalid("segment longer than record"));
    }
    let hop = (((1.0 - cfg.overlap) * n as f64).round() as usize).max(1);
    let w = cfg.window.weights(n);
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let norm = dt / sw2;
    // Effective duration of a windowed mean, for the regular part at μ = 0.
    let t_eff = sw * sw * dt / sw2;

    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut per_record: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    let mut per_segment: Vec<Vec<f64>> = Vec::new();
    let mut spike_rec: Vec<f64> = Vec::with_capacity(records.len());
    let mut segments = 0usize;
    for rec in records {
        let x = rec.as_ref();
        let mut acc = vec![0.0; n];
        let mut mean_sq = 0.0;
        let mut k = 0usize;
        let mut start = 0usize;
        while start + n <= x.len() {
            let mut m = C64::new(0.0, 0.0);
            for (j, b) in buf.iter_mut().enumerate() {
                *b = x[start + j] * w[j];
                m += *b;
            }
            mean_sq += (m / sw).norm_sqr();
            fft.process(&mut buf);
            let p: Vec<f64> = buf.iter().map(|v| v.norm_sqr() * norm).collect();
            for (a, v) in acc.iter_mut().zip(&p) {
                *a += v;
            }
            if records.len() == 1 {
                per_segment.push(p);
            }
            k += 1;
            start += hop;
        }
        segments += k;
        for a in acc.iter_mut() {
            *a /= k as f64;
        }
        let s0 = regular_at_zero(&acc);
        spike_rec.push(2.0 * PI * (mean_sq / k as f64 - s0 / t_eff));
        per_record.push(acc);
    }

    let groups = if records.len() == 1 { &per_segment } else { &per_record };
    let g = groups.len() as f64;
    let mut power = vec![0.0; n];
    let mut se = vec![0.0; n];
    for i in 0..n {
        let m = groups.iter().map(|r| r[i]).sum::<f64>() / g;
        let v = if g > 1.0 {
            groups.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / (g - 1.0)
        } else {
            f64::INFINITY
        };
        power[i] = m;
        se[i] = (v / g).sqrt();
    }
    let sm = crate::ensemble::mean_se(&spike_rec);

    // Reorder FFT bins to ascending frequency.
    let lo = -((n as i64 - 1) / 2);
    let hi = n as i64 / 2;
    let dmu = 2.0 * PI / (n as f64 * dt);
    let mut freqs = Vec::with_capacity(n);
    let mut pw = Vec::with_capacity(n);
    let mut ses = Vec::with_capacity(n);
    for k in lo..=hi {
        let idx = k.rem_euclid(n as i64) as usize;
        freqs.push(k as f64 * dmu);
        pw.push(power[idx]);
        ses.push(se[idx]);
    }
    Ok(SpectrumEstimate {
        freqs,
        power: pw,
        se: ses,
        segments,
        segment_length: n,
        dt,
        window: cfg.window,
        spike_weight: sm.mean,
        spike_se: if records.len() > 1 { sm.se } else { f64::INFINITY },
    })
}

/// Real-valued convenience wrapper.
pub fn estimate_spectrum_real<S: AsRef<[f64]>>(records: &[S], dt: f64, cfg: &SpectrumConfig) -> Result<SpectrumEstimate> {
    let cx: Vec<Vec<C64>> = records
        .iter()
        .map(|r| r.as_ref().iter().map(|&v| C64::new(v, 0.0)).collect())
        .collect();
    estimate_spectrum(&cx, dt, cfg)
}

/// Regular part at μ = 0 from bins ±2, ±3, which a constant does not reach
/// through the Hann window.
fn regular_at_zero(p: &[f64]) -> f64 {
    let n = p.len();
    let at = |k: i64| p[k.rem_euclid(n as i64) as usize];
    (at(2) + at(-2) + at(3) + at(-3)) / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn cfg(n: usize) -> SpectrumConfig {
        SpectrumConfig {
            segment_length: n,
            overlap: 0.5,
            window: Window::Hann,
        }
    }

    #[test]
    fn white_increments_have_unit_spectrum() {
        let dt: f64 = 0.05;
        let mut rng = stream(3, 0, "white");
        let recs: Vec<Vec<f64>> = (0..16)
            .map(|_| {
                (0..4096)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * dt.sqrt() / dt)
                    .collect()
            })
            .collect();
        let s = estimate_spectrum_real(&recs, dt, &cfg(256)).unwrap();
        let mean = s.power.iter().sum::<f64>() / s.power.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        let bad = s.power.iter().zip(&s.se).filter(|(p, e)| (*p - 1.0).abs() > 4.0 * *e).count();
        assert!(bad <= 2, "{bad}");
        assert!(s.spike_weight.abs() < 3.0 * s.spike_se, "{} {}", s.spike_weight, s.spike_se);
    }

    #[test]
    fn sinusoid_peaks_at_its_frequency() {
        let dt = 0.01;
        let n = 1024;
        let mu0 = 2.0 * PI * 40.0 / (n as f64 * dt);
        let recs = vec![(0..4 * n).map(|k| (mu0 * k as f64 * dt).cos()).collect::<Vec<f64>>()];
        let s = estimate_spectrum_real(&recs, dt, &cfg(n)).unwrap();
        let (imax, _) = s
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((s.freqs[imax].abs() - mu0).abs() < 1e-9);
    }

    #[test]
    fn real_input_is_symmetric() {
        let mut rng = stream(5, 0, "sym");
        let recs = vec![(0..2000).map(|_| rng.random::<f64>()).collect::<Vec<f64>>()];
        let s = estimate_spectrum_real(&recs, 0.1, &cfg(200)).unwrap();
        let n = s.freqs.len();
        // Even length: last bin is the Nyquist bin, the rest pair up.
        for k in 0..(n - 1) / 2 {
            let (a, b) = (s.power[k], s.power[n - 2 - k]);
            assert!((s.freqs[k] + s.freqs[n - 2 - k]).abs() < 1e-9);
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn constant_offset_shows_as_spike() {
        let dt: f64 = 0.05;
        let c0 = 0.7;
        let mut rng = stream(6, 0, "spike");
        let recs: Vec<Vec<f64>> = (0..24)
            .map(|_| {
                (0..4096)
                    .map(|_| c0 + rng.sample::<f64, _>(StandardNormal) / dt.sqrt())
                    .collect()
            })
            .collect();
        let s = estimate_spectrum_real(&recs, dt, &cfg(512)).unwrap();
        let want = 2.0 * PI * c0 * c0;
        assert!((s.spike_weight - want).abs() < 3.0 * s.spike_se, "{} {want} {}", s.spike_weight, s.spike_se);
    }

    #[test]
    fn rejects_long_segments() {
        let recs = vec![vec![0.0; 100]];
        assert!(estimate_spectrum_real(&recs, 0.1, &cfg(128)).is_err());
    }
}
