use super::AnalyticConfig;
use crate::error::Result;
use crate::noise::{ColoredChannelSpec, Kernel};
use crate::quad::integrate_real_line;
use serde::Serialize;
use std::f64::consts::PI;

/// Stationary `E|ξ|²` split by source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaBreakdown {
    pub total: f64,
    pub laser: f64,
    pub channels: Vec<f64>,
}

/// `Λ = Λ_f + Σ_j Λ_j`; the count rate is `λ|β|²Λ`.
pub fn lambda_total(cfg: &AnalyticConfig) -> Result<LambdaBreakdown> {
    let laser = lambda_laser(cfg);
    let mut channels = Vec::with_capacity(cfg.model.params.channels.len());
    for j in 0..cfg.model.params.channels.len() {
        let v = match lambda_channel_closed(cfg, j) {
            Some(v) => v,
            None => lambda_channel_quadrature(cfg, j)?,
        };
        channels.push(v);
    }
    Ok(LambdaBreakdown {
        total: laser + channels.iter().sum::<f64>(),
        laser,
        channels,
    })
}

fn lambda_laser(cfg: &AnalyticConfig) -> f64 {
    let p = &cfg.model.params;
    let g0 = cfg.model.gamma0;
    let eps = p.laser.bandwidth;
    let dnu = p.mode_frequency - p.laser.frequency;
    p.alpha2.norm_sqr() * p.laser.amplitude.norm_sqr() * (g0 + eps) / (g0 * ((g0 + eps).powi(2) / 4.0 + dnu * dnu))
}

/// Closed form for white channels and for exponential kernels without a
/// white part; `None` otherwise.
pub fn lambda_channel_closed(cfg: &AnalyticConfig, j: usize) -> Option<f64> {
    let ch = cfg.model.params.channels.get(j)?;
    let g0 = cfg.model.gamma0;
    match ch.kernel {
        Kernel::None => Some(ch.b.norm_sqr() / g0),
        Kernel::Exponential {
            amplitude,
            decay,
            center,
        } if ch.b.norm_sqr() == 0.0 => {
            let w = 0.5 * (g0 + decay);
            let d = cfg.model.params.mode_frequency - center;
            Some(amplitude.norm_sqr() * (g0 + decay) / (g0 * decay * (w * w + d * d)))
        }
        _ => None,
    }
}

/// `(1/2π) ∫ |b_j + s_j(−ix)|² / |κ₀ + ix|² dx` by adaptive quadrature.
pub fn lambda_channel_quadrature(cfg: &AnalyticConfig, j: usize) -> Result<f64> {
    let ch: &ColoredChannelSpec = cfg
        .model
        .params
        .channels
        .get(j)
        .ok_or_else(|| crate::error::invalid(format!("no channel {j}")))?;
    let k0 = cfg.model.kappa0;
    let f = |x: f64| (ch.b + ch.kernel_transform(x)).norm_sqr() / (k0 + crate::fock::C64::new(0.0, x)).norm_sqr();
    let v = integrate_real_line(f, &cfg.features(), cfg.width(), cfg.quad)?;
    Ok(v / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::C64;
    use crate::noise::{ColoredChannelSpec, LaserSpec};
    use crate::oracle::environment_response;
    use crate::oscillator::OscillatorParams;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn params() -> OscillatorParams {
        OscillatorParams {
            mode_frequency: 0.4,
            alpha1: c(0.5, 0.0),
            alpha2: c(0.5, 0.0),
            beta: c(1.0, 0.0),
            count_rate: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn quiet_model_has_zero_lambda() {
        let cfg = AnalyticConfig::new(&params()).unwrap();
        assert_eq!(lambda_total(&cfg).unwrap().total, 0.0);
    }

    #[test]
    fn white_channels_give_photon_number() {
        let mut p = params();
        let b6 = c(0.3, 0.2);
        p.channels = vec![ColoredChannelSpec::white(b6), ColoredChannelSpec::white(c(0.0, 1.0) * b6)];
        let cfg = AnalyticConfig::new(&p).unwrap();
        let (n, m) = cfg.model.white.unwrap();
        assert!(m.norm() < 1e-15);
        let l = lambda_total(&cfg).unwrap();
        assert!((l.total - n).abs() < 1e-15 * n);
        for j in 0..2 {
            let q = lambda_channel_quadrature(&cfg, j).unwrap();
            assert!((q - l.channels[j]).abs() < 1e-9 * q, "{q} {}", l.channels[j]);
        }
    }

    #[test]
    fn ou_closed_form_matches_quadrature() {
        for (decay, center) in [(0.3, 0.4), (0.3, 2.0), (5.0, -1.0), (1.0, 0.4)] {
            let mut p = params();
            p.channels = vec![ColoredChannelSpec::exponential(c(0.0, 0.0), c(0.2, 0.05), decay, center)];
            let cfg = AnalyticConfig::new(&p).unwrap();
            let a = lambda_channel_closed(&cfg, 0).unwrap();
            let b = lambda_channel_quadrature(&cfg, 0).unwrap();
            assert!((a - b).abs() < 1e-8 * a, "{decay} {center} {a} {b}");
            // Stationary variance of the amplitude's environment part.
            let (cc, _) = environment_response(&cfg, 0.0).unwrap();
            assert!((cc.re - a).abs() < 1e-12 * a && cc.im.abs() < 1e-14);
        }
    }

    #[test]
    fn laser_term_matches_stationary_response() {
        let mut p = params();
        p.laser = LaserSpec {
            amplitude: c(0.3, 0.1),
            frequency: 1.0,
            bandwidth: 0.05,
        };
        let cfg = AnalyticConfig::new(&p).unwrap();
        let l = lambda_total(&cfg).unwrap();
        let r = super::super::moments::laser_response(&cfg, 0.0);
        assert!((r.re - l.laser).abs() < 1e-14 && r.im.abs() < 1e-14);
    }

    #[test]
    fn mixed_exponential_channel_uses_quadrature() {
        let mut p = params();
        p.channels = vec![ColoredChannelSpec::exponential(c(0.1, 0.0), c(0.2, 0.0), 0.5, 1.0)];
        let cfg = AnalyticConfig::new(&p).unwrap();
        assert!(lambda_channel_closed(&cfg, 0).is_none());
        let l = lambda_total(&cfg).unwrap();
        let (cc, _) = environment_response(&cfg, 0.0).unwrap();
        assert!((l.total - cc.re).abs() < 1e-9 * l.total);
    }
}
