use super::{autocorrelation, AnalyticConfig, Moment};
use crate::detection::ResponseFilter;
use crate::ensemble::{mean_se, run_ordered, MeanEstimate};
use crate::error::{invalid, Result};
use crate::fock::C64;
use crate::oscillator::{Mode, OscillatorSimulator};
use crate::quad::{integrate_pieces, QuadConfig};
use crate::rng::TrajectorySeed;
use serde::Serialize;

/// `E m₁(s)`: mean of the drift of the heterodyne output.
fn mean_drift(cfg: &AnalyticConfig, s: f64, quad: QuadConfig) -> Result<f64> {
    let p = &cfg.model.params;
    let k = cfg.model.relax();
    let lo_bar = autocorrelation(cfg, Moment::LoMean { t: s })?.conj();
    let free = lo_bar * (-k * s).exp() * p.initial_amplitude;
    let mut driven = C64::new(0.0, 0.0);
    if p.laser.is_on() && s > 0.0 {
        let part = |r: f64, im: bool| -> f64 {
            let m = autocorrelation(cfg, Moment::LoLaserCross { s, r }).unwrap_or(C64::new(f64::NAN, 0.0));
            let v = (-k * (s - r)).exp() * m;
            if im {
                v.im
            } else {
                v.re
            }
        };
        let pts = [0.0, s];
        let re = integrate_pieces(&|r| part(r, false), &pts, quad)?;
        let im = integrate_pieces(&|r| part(r, true), &pts, quad)?;
        driven = C64::new(re, im);
    }
    let inner = free - C64::new(0.0, 1.0) * p.alpha2 * driven;
    Ok(2.0 * (p.alpha1.conj() * inner).im)
}

fn filter_breakpoints(filter: &ResponseFilter, t: f64) -> Vec<f64> {
    let mut pts = vec![0.0, t];
    match filter {
        ResponseFilter::Exponential { rate, .. } => {
            for k in [1.0, 4.0, 16.0] {
                let x = t - k / rate;
                if x > 0.0 {
                    pts.push(x);
                }
            }
        }
        ResponseFilter::Tabulated { times, .. } => {
            pts.extend(times.iter().map(|&u| t - u).filter(|&x| x > 0.0 && x < t));
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// Mean output current `E I(t) = ∫₀ᵗ F(t − s) E m₁(s) ds`.
pub fn mean_current(cfg: &AnalyticConfig, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("time must be nonnegative"));
    }
    if cfg.model.params.alpha1.norm_sqr() == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let inner = QuadConfig::with_tolerance(cfg.quad.abs_tol * 0.1, cfg.quad.rel_tol);
    let g = |s: f64| cfg.filter.value(t - s) * mean_drift(cfg, s, inner).unwrap_or(f64::NAN);
    integrate_pieces(&g, &filter_breakpoints(&cfg.filter, t), cfg.quad)
}

/// `|∫₀ᵀ e^{iμt} E I(t) dt|² / T`, the share of the mean current in a
/// periodogram over `[0, T]`. Tends to zero with `T` when the mean decays.
pub fn mean_current_power(cfg: &AnalyticConfig, mu: f64, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon must be positive"));
    }
    let loose = cfg.clone().with_quad(QuadConfig::with_tolerance(1e-9, 1e-7));
    // E I on a fine grid, then a composite Simpson rule for the transform.
    let scale = 1.0 / cfg.model.gamma0.max(1e-3);
    let mut n = ((horizon / scale) * 16.0).ceil() as usize;
    n = n.clamp(64, 20_000);
    if n % 2 == 1 {
        n += 1;
    }
    let h = horizon / n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..=n {
        let t = i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * C64::from_polar(mean_current(&loose, t)?, mu * t);
    }
    let v = acc * h / 3.0;
    Ok(v.norm_sqr() / horizon)
}

/// Monte-Carlo estimates of the counting generating functional and its
/// moments, using the exact Poisson formulas conditional on the amplitude
/// path.
#[derive(Debug, Clone, Serialize)]
pub struct CountingFunctional {
    /// `Re Φ_T[k]`, `Im Φ_T[k]`.
    pub phi_re: f64,
    pub phi_im: f64,
    pub phi_re_se: f64,
    pub phi_im_se: f64,
    /// Probability of no count in `[0, T]`.
    pub p_zero: f64,
    pub p_zero_se: f64,
    /// `E N_T`.
    pub mean: f64,
    pub mean_se: f64,
    /// `E N_T²`.
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub trajectories: u64,
}

impl CountingFunctional {
    pub fn phi(&self) -> C64 {
        C64::new(self.phi_re, self.phi_im)
    }

    pub fn p_zero_estimate(&self) -> MeanEstimate {
        MeanEstimate {
            mean: self.p_zero,
            se: self.p_zero_se,
            n: self.trajectories as usize,
        }
    }
}

/// `Φ_T[k] = E exp(∫₀ᵀ (e^{ik(t)} − 1) j(t) dt)` with the outer expectation
/// over classical noise paths. The intensity integral uses the trapezoid
/// rule on the simulation grid.
pub fn counting_functional<K>(
    cfg: &AnalyticConfig,
    k: K,
    horizon: f64,
    dt: f64,
    trajectories: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<CountingFunctional>
where
    K: Fn(f64) -> f64 + Sync,
{
    if trajectories < 2 {
        return Err(invalid("counting functional needs at least two trajectories"));
    }
    if !(horizon >= 0.0) || !(dt > 0.0) {
        return Err(invalid("horizon must be nonnegative and dt positive"));
    }
    let steps = (horizon / dt).round() as usize;
    let rows = run_ordered(trajectories, threads, |id| -> Result<[f64; 4]> {
        let mut sim = OscillatorSimulator::new(&cfg.model, dt, Mode::Physical, TrajectorySeed::new(seed, id))?;
        let mut prev_j = sim.intensity();
        let mut prev_w = C64::from_polar(1.0, k(0.0)) - 1.0;
        let mut total = 0.0;
        let mut expo = C64::new(0.0, 0.0);
        for step in 1..=steps {
            sim.step();
            let t = step as f64 * dt;
            let j = sim.intensity();
            let w = C64::from_polar(1.0, k(t)) - 1.0;
            total += 0.5 * dt * (prev_j + j);
            expo += 0.5 * dt * (prev_w * prev_j + w * j);
            prev_j = j;
            prev_w = w;
        }
        let phi = expo.exp();
        Ok([phi.re, phi.im, total, total * total + total])
    })?;
    let rows: Vec<[f64; 4]> = rows.into_iter().collect::<Result<_>>()?;
    let col = |c: usize| mean_se(&rows.iter().map(|r| r[c]).collect::<Vec<_>>());
    let p0 = mean_se(&rows.iter().map(|r| (-r[2]).exp()).collect::<Vec<_>>());
    let (re, im, m1, m2) = (col(0), col(1), col(2), col(3));
    Ok(CountingFunctional {
        phi_re: re.mean,
        phi_im: im.mean,
        phi_re_se: re.se,
        phi_im_se: im.se,
        p_zero: p0.mean,
        p_zero_se: p0.se,
        mean: m1.mean,
        mean_se: m1.se,
        second_moment: m2.mean,
        second_moment_se: m2.se,
        trajectories,
    })
}
