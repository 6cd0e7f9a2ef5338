//! The noisy driven oscillator whose linear SSE keeps coherent states
//! coherent, simulated on its exact amplitude track.

mod crossval;
mod sim;

pub use crossval::{cross_validate_fock, cross_validate_fock_substeps, model_channel_set, FidelityReport};
pub use sim::{simulate_trajectory, Mode, OscillatorSimulator, RecordOptions, StepSnapshot, TrajectoryRecord};

use crate::error::{Error, Result};
use crate::fock::{FockOperator, C64};
use crate::noise::{ColoredChannelSpec, LaserSpec, LocalOscillatorSpec};
use serde::{Deserialize, Serialize};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Every scalar of the model. Rates and frequencies are angular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    /// Mode frequency ν₀.
    #[serde(default)]
    pub mode_frequency: f64,
    /// Coupling of the heterodyne/homodyne output channel.
    #[serde(with = "crate::config::cplx", default = "zero")]
    pub alpha1: C64,
    /// Coupling of the unobserved loss channel (also the laser input port).
    #[serde(with = "crate::config::cplx", default = "zero")]
    pub alpha2: C64,
    /// Jump coupling of the photon counter.
    #[serde(with = "crate::config::cplx", default = "zero")]
    pub beta: C64,
    /// Reference count rate λ.
    #[serde(default)]
    pub count_rate: f64,
    #[serde(default)]
    pub laser: LaserSpec,
    #[serde(default)]
    pub local_oscillator: LocalOscillatorSpec,
    #[serde(default)]
    pub channels: Vec<ColoredChannelSpec>,
    /// Initial coherent amplitude ξ₀.
    #[serde(with = "crate::config::cplx", default = "zero")]
    pub initial_amplitude: C64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            mode_frequency: 0.0,
            alpha1: zero(),
            alpha2: zero(),
            beta: zero(),
            count_rate: 0.0,
            laser: LaserSpec::default(),
            local_oscillator: LocalOscillatorSpec::default(),
            channels: Vec::new(),
            initial_amplitude: zero(),
        }
    }
}

/// Parameters together with their derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub params: OscillatorParams,
    /// Mode width γ₀ = |α₁|² + |α₂|² + |β|²λ.
    pub gamma0: f64,
    /// κ₀ = −iν₀ + γ₀/2. Amplitudes relax as e^{−κ̄₀t}.
    pub kappa0: C64,
    /// q = Σ b_j².
    pub q: C64,
    /// k = Σ |b_j|².
    pub k: f64,
    /// Effective photon number n and squeezing parameter m of the white channels.
    pub white: Option<(f64, C64)>,
}

impl DerivedParams {
    /// κ̄₀, the rate in e^{−κ̄₀t}.
    pub fn relax(&self) -> C64 {
        self.kappa0.conj()
    }

    /// D = 2k a†a + k + q̄ a² + q a†².
    pub fn dissipator_d(&self, dim: usize) -> FockOperator {
        let a = FockOperator::annihilation(dim);
        let ad = a.adjoint();
        let n = FockOperator::number(dim);
        let id = FockOperator::identity(dim);
        let mut d = n.scaled(C64::new(2.0 * self.k, 0.0));
        d = &d + &id.scaled(C64::new(self.k, 0.0));
        d = &d + &(&a * &a).scaled(self.q.conj());
        &d + &(&ad * &ad).scaled(self.q)
    }
}

fn finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Validates the parameters and computes derived constants.
pub fn derive_params(raw: &OscillatorParams) -> Result<DerivedParams> {
    let p = raw;
    let bad = |m: &str| Err(Error::InvalidConfiguration(m.to_string()));
    if !p.mode_frequency.is_finite()
        || !finite(p.alpha1)
        || !finite(p.alpha2)
        || !finite(p.beta)
        || !finite(p.initial_amplitude)
    {
        return bad("model parameters must be finite");
    }
    if !(p.count_rate >= 0.0) || !p.count_rate.is_finite() {
        return bad("count rate must be nonnegative");
    }
    if !(p.laser.bandwidth >= 0.0) || !finite(p.laser.amplitude) || !p.laser.frequency.is_finite() {
        return bad("laser bandwidth must be nonnegative and parameters finite");
    }
    match p.local_oscillator {
        LocalOscillatorSpec::Heterodyne { linewidth, frequency, phase } => {
            if !(linewidth >= 0.0) || !frequency.is_finite() || !phase.is_finite() {
                return bad("local oscillator linewidth must be nonnegative");
            }
        }
        LocalOscillatorSpec::Homodyne { delay, phase } => {
            if !p.laser.is_on() {
                return bad("homodyne detection needs a nonzero laser amplitude");
            }
            if !(delay >= 0.0) || !phase.is_finite() {
                return bad("homodyne delay must be nonnegative");
            }
        }
    }
    for (j, ch) in p.channels.iter().enumerate() {
        ch.validate()
            .map_err(|e| Error::InvalidConfiguration(format!("channel {j}: {e}")))?;
        if !finite(ch.b) {
            return bad("channel coefficients must be finite");
        }
    }
    let gamma0 = p.alpha1.norm_sqr() + p.alpha2.norm_sqr() + p.beta.norm_sqr() * p.count_rate;
    if !(gamma0 > 0.0) {
        return bad("mode width must be positive");
    }
    let kappa0 = C64::new(gamma0 / 2.0, -p.mode_frequency);
    let q = p.channels.iter().map(|c| c.b * c.b).sum();
    let k = p.channels.iter().map(|c| c.b.norm_sqr()).sum();
    let whites: Vec<&ColoredChannelSpec> = p.channels.iter().filter(|c| c.is_white()).collect();
    let white = if whites.is_empty() {
        None
    } else {
        let n = whites.iter().map(|c| c.b.norm_sqr()).sum::<f64>() / gamma0;
        let m = -whites.iter().map(|c| c.b * c.b).sum::<C64>() / gamma0;
        Some((n, m))
    };
    Ok(DerivedParams {
        params: raw.clone(),
        gamma0,
        kappa0,
        q,
        k,
        white,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mode_width_from_couplings() {
        let p = OscillatorParams {
            alpha1: c(1.0, 0.0),
            alpha2: c(1.0, 0.0),
            beta: c(1.0, 0.0),
            count_rate: 2.0,
            ..Default::default()
        };
        let d = derive_params(&p).unwrap();
        assert_eq!(d.gamma0, 4.0);
        assert_eq!(d.kappa0, c(2.0, 0.0));
    }

    #[test]
    fn thermal_pair_has_no_squeezing() {
        let b6 = c(0.4, 0.3);
        let p = OscillatorParams {
            alpha1: c(0.8, 0.0),
            channels: vec![ColoredChannelSpec::white(b6), ColoredChannelSpec::white(b6 * c(0.0, 1.0))],
            ..Default::default()
        };
        let d = derive_params(&p).unwrap();
        let (n, m) = d.white.unwrap();
        assert!(m.norm() < 1e-15);
        assert!((d.gamma0 * n - 2.0 * b6.norm_sqr()).abs() < 1e-15);
        let p = OscillatorParams {
            channels: vec![ColoredChannelSpec::white(c(1.0, 0.0)), ColoredChannelSpec::white(c(0.0, 1.0))],
            alpha1: c(1.0, 0.0),
            ..Default::default()
        };
        let d = derive_params(&p).unwrap();
        assert!(d.q.norm() < 1e-15);
        assert_eq!(d.k, 2.0);
    }

    #[test]
    fn rejects_zero_width_and_bad_homodyne() {
        assert!(matches!(
            derive_params(&OscillatorParams::default()),
            Err(Error::InvalidConfiguration(_))
        ));
        let p = OscillatorParams {
            alpha1: c(1.0, 0.0),
            local_oscillator: LocalOscillatorSpec::Homodyne { phase: 0.0, delay: 0.0 },
            ..Default::default()
        };
        assert!(derive_params(&p).is_err());
    }

    #[test]
    fn dissipator_matches_channel_sum() {
        let dim = 6;
        let chs = vec![
            ColoredChannelSpec::white(c(0.3, 0.2)),
            ColoredChannelSpec::exponential(c(-0.1, 0.5), c(0.2, 0.0), 1.0, 0.0),
        ];
        let p = OscillatorParams {
            alpha1: c(1.0, 0.0),
            channels: chs.clone(),
            ..Default::default()
        };
        let d = derive_params(&p).unwrap();
        let a = FockOperator::annihilation(dim);
        let mut sum = FockOperator::zeros(dim);
        for ch in &chs {
            let l = (&a.scaled(ch.b.conj()) + &a.adjoint().scaled(ch.b)).scaled(c(0.0, -1.0));
            sum = &sum + &(&l.adjoint() * &l);
        }
        let want = d.dissipator_d(dim);
        // Agreement away from the truncated top corner.
        for i in 0..dim - 2 {
            for j in 0..dim - 2 {
                assert!((sum.0[(i, j)] - want.0[(i, j)]).norm() < 1e-12);
            }
        }
    }
}
