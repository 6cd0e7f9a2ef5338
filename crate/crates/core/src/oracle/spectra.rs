use super::AnalyticConfig;
use crate::detection::transfer_function;
use crate::error::{Error, Result};
use crate::fock::C64;
use crate::noise::{classical_spectrum, ClassicalSpectrum, LocalOscillatorSpec};
use crate::quad::integrate_real_line;
use serde::Serialize;
use std::f64::consts::PI;

/// Oracle spectrum of the hetero/homodyne current on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralTable {
    pub mu: Vec<f64>,
    /// `|G_I(μ)|²`.
    pub gain: Vec<f64>,
    /// Laser contribution to `S_m`.
    pub laser: Vec<f64>,
    /// Environment contribution to `S_m`.
    pub environment: Vec<f64>,
    pub s_m: Vec<f64>,
    /// `S_I = |G_I|²(1 + S_m)`.
    pub s_i: Vec<f64>,
    /// Coefficient of `δ(μ)` in `S_I`.
    pub spike_weight: f64,
}

/// Limits of the homodyne path difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomodyneRegime {
    /// Delay far beyond the laser coherence time.
    DelayInfinite,
    /// Zero delay.
    Balanced,
}

/// Laser line `S₁(x)` seen through a local oscillator at frequency `x` with
/// linewidth `κ`.
pub fn laser_line(cfg: &AnalyticConfig, x: f64, kappa: f64) -> f64 {
    let p = &cfg.model.params;
    let g0 = cfg.model.gamma0;
    let eps = p.laser.bandwidth;
    let (nu0, nu3) = (p.mode_frequency, p.laser.frequency);
    let dnu = nu0 - nu3;
    let pref = p.alpha1.norm_sqr() * p.alpha2.norm_sqr() * p.laser.amplitude.norm_sqr();
    if pref == 0.0 || kappa + eps == 0.0 {
        return 0.0;
    }
    let lo_laser = (kappa + eps).powi(2) / 4.0 + (nu3 - x).powi(2);
    let mode_laser = (g0 + eps).powi(2) / 4.0 + dnu * dnu;
    let mode_lo = (g0 + kappa).powi(2) / 4.0 + (x - nu0).powi(2);
    pref * ((kappa / mode_laser + eps / mode_lo) / lo_laser
        + kappa * eps / (mode_laser * mode_lo) * (1.0 / g0 + (g0 + kappa + eps) / lo_laser))
}

/// The same line from its complex partial-fraction form.
pub fn laser_line_dual(cfg: &AnalyticConfig, x: f64, kappa: f64) -> f64 {
    let p = &cfg.model.params;
    let g0 = cfg.model.gamma0;
    let eps = p.laser.bandwidth;
    let nu3 = p.laser.frequency;
    let k0 = cfg.model.kappa0;
    let k0b = k0.conj();
    let i = C64::new(0.0, 1.0);
    let pref = 2.0 * p.alpha1.norm_sqr() * p.alpha2.norm_sqr() * p.laser.amplitude.norm_sqr();
    let outer = pref / (k0b + kappa / 2.0 - i * x);
    let a = 1.0 / (k0 + eps / 2.0 + i * nu3) * (1.0 / ((kappa + eps) / 2.0 + i * (nu3 - x)) + 1.0 / g0);
    let b = 1.0 / ((k0b + eps / 2.0 - i * nu3) * g0);
    (outer * (a + b)).re
}

/// Environment line `S₂(x)`: `S_Y/|κ₀+ix|²` smoothed by a Lorentzian of
/// full width `γ₄`. `γ₄ = 0` gives the pointwise limit.
pub fn environment_line(cfg: &AnalyticConfig, x: f64, gamma4: f64) -> Result<f64> {
    let p = &cfg.model.params;
    let a1 = p.alpha1.norm_sqr();
    if p.channels.is_empty() || a1 == 0.0 {
        return Ok(0.0);
    }
    let k0 = cfg.model.kappa0;
    let window = |y: f64| classical_spectrum(ClassicalSpectrum::Colored(&p.channels), y) / (k0 + C64::new(0.0, y)).norm_sqr();
    if gamma4 == 0.0 {
        return Ok(a1 * window(x));
    }
    let f = |y: f64| 2.0 * gamma4 * a1 * window(y) / (PI * (gamma4 * gamma4 + 4.0 * (x - y).powi(2)));
    let mut bp = cfg.features();
    for k in [-4.0, -1.0, -0.25, 0.0, 0.25, 1.0, 4.0] {
        bp.push(x + k * gamma4);
    }
    integrate_real_line(f, &bp, cfg.width().max(gamma4), cfg.quad)
}

/// `S_m(μ)` pieces for an LO at `ν₄` with linewidth `γ₄`, LO independent of
/// the laser.
fn independent_lo(cfg: &AnalyticConfig, mus: &[f64], nu4: f64, gamma4: f64, perfect: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = &cfg.model.params;
    let g0 = cfg.model.gamma0;
    let nu0 = p.mode_frequency;
    let line = |x: f64| {
        if perfect {
            let sf = classical_spectrum(ClassicalSpectrum::Laser(&p.laser), x);
            p.alpha1.norm_sqr() * p.alpha2.norm_sqr() * sf / ((x - nu0).powi(2) + g0 * g0 / 4.0)
        } else {
            laser_line(cfg, x, gamma4)
        }
    };
    let g4 = if perfect { 0.0 } else { gamma4 };
    let mut laser = Vec::with_capacity(mus.len());
    let mut env = Vec::with_capacity(mus.len());
    for &mu in mus {
        laser.push(line(nu4 + mu) + line(nu4 - mu));
        env.push(environment_line(cfg, nu4 + mu, g4)? + environment_line(cfg, nu4 - mu, g4)?);
    }
    Ok((laser, env))
}

fn assemble(cfg: &AnalyticConfig, mus: &[f64], laser: Vec<f64>, environment: Vec<f64>, spike_m: f64) -> SpectralTable {
    let gain: Vec<f64> = mus.iter().map(|&m| transfer_function(&cfg.filter, m).norm_sqr()).collect();
    let s_m: Vec<f64> = laser.iter().zip(&environment).map(|(a, b)| a + b).collect();
    let s_i = gain.iter().zip(&s_m).map(|(g, s)| g * (1.0 + s)).collect();
    let g0 = transfer_function(&cfg.filter, 0.0).norm_sqr();
    SpectralTable {
        mu: mus.to_vec(),
        gain,
        laser,
        environment,
        s_m,
        s_i,
        spike_weight: g0 * spike_m,
    }
}

/// Heterodyne spectrum. `perfect_lo` replaces the LO linewidth by its
/// vanishing limit.
pub fn heterodyne_spectrum(cfg: &AnalyticConfig, mus: &[f64], perfect_lo: bool) -> Result<SpectralTable> {
    let LocalOscillatorSpec::Heterodyne {
        frequency, linewidth, ..
    } = cfg.model.params.local_oscillator
    else {
        return Err(Error::InvalidConfiguration("heterodyne spectrum needs a heterodyne local oscillator".into()));
    };
    let (laser, env) = independent_lo(cfg, mus, frequency, linewidth, perfect_lo)?;
    Ok(assemble(cfg, mus, laser, env, 0.0))
}

/// `ζ = arg(α₁ᾱ₂ / ((γ₀+ε)/2 − iΔν)) + θ`.
pub fn homodyne_phase(cfg: &AnalyticConfig) -> Result<f64> {
    let p = &cfg.model.params;
    let LocalOscillatorSpec::Homodyne { phase, .. } = p.local_oscillator else {
        return Err(Error::InvalidConfiguration("homodyne phase needs a homodyne local oscillator".into()));
    };
    let w = C64::new(0.5 * (cfg.model.gamma0 + p.laser.bandwidth), -(p.mode_frequency - p.laser.frequency));
    Ok((p.alpha1 * p.alpha2.conj() / w).arg() + phase)
}

/// `l(μ) = 16|α₁α₂g|² / (γ₀((γ₀+ε)²/4 + μ²))`.
pub fn homodyne_l(cfg: &AnalyticConfig, mu: f64) -> f64 {
    let p = &cfg.model.params;
    let g0 = cfg.model.gamma0;
    16.0 * p.alpha1.norm_sqr() * p.alpha2.norm_sqr() * p.laser.amplitude.norm_sqr()
        / (g0 * ((g0 + p.laser.bandwidth).powi(2) / 4.0 + mu * mu))
}

/// Homodyne spectrum in one of the two delay limits. The regime, not the
/// configured delay, selects the formula.
pub fn homodyne_spectrum(cfg: &AnalyticConfig, mus: &[f64], regime: HomodyneRegime) -> Result<SpectralTable> {
    let p = &cfg.model.params;
    if !matches!(p.local_oscillator, LocalOscillatorSpec::Homodyne { .. }) {
        return Err(Error::InvalidConfiguration("homodyne spectrum needs a homodyne local oscillator".into()));
    }
    let (nu3, eps) = (p.laser.frequency, p.laser.bandwidth);
    match regime {
        HomodyneRegime::DelayInfinite => {
            let (laser, env) = independent_lo(cfg, mus, nu3, eps, false)?;
            Ok(assemble(cfg, mus, laser, env, 0.0))
        }
        HomodyneRegime::Balanced => {
            let g0 = cfg.model.gamma0;
            let dnu = p.mode_frequency - nu3;
            let a = 0.5 * (g0 + eps);
            let big_p = p.alpha1.norm_sqr() * p.alpha2.norm_sqr() * p.laser.amplitude.norm_sqr() / (a * a + dnu * dnu);
            let zeta = homodyne_phase(cfg)?;
            let i = C64::new(0.0, 1.0);
            let phase_factor = 1.0 - g0 * (2.0 * i * zeta).exp() / (g0 + 2.0 * eps - 2.0 * i * dnu);
            let mut laser = Vec::with_capacity(mus.len());
            let mut env = Vec::with_capacity(mus.len());
            for &mu in mus {
                let lor = 1.0 / (a - i * (dnu - mu)) + 1.0 / (a - i * (dnu + mu));
                laser.push(2.0 * big_p * eps / g0 * (lor * phase_factor).re);
                env.push(environment_line(cfg, nu3 + mu, eps)? + environment_line(cfg, nu3 - mu, eps)?);
            }
            let spike = 8.0 * PI * big_p * zeta.cos().powi(2);
            Ok(assemble(cfg, mus, laser, env, spike))
        }
    }
}
