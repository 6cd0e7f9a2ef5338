//! Classical driving processes: Wiener and Poisson increments, colored
//! Gaussian environment noise, the phase-diffusing laser and local oscillators.

mod bank;
mod gauss;
mod laser;

pub use bank::{ChannelIncrement, NoiseBank, NoiseBankState};
pub use gauss::GaussStep;
pub use laser::{LaserSpec, LaserState, LocalOscillatorSpec, LocalOscillatorState};

use crate::error::{invalid, Error, Result};
use crate::fock::C64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// Memory kernel of one environment channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// Purely white channel.
    None,
    /// `c(t) = amplitude · exp(−(decay/2 + i·center) t)`.
    Exponential {
        #[serde(with = "crate::config::cplx")]
        amplitude: C64,
        decay: f64,
        center: f64,
    },
    /// Piecewise-linear kernel through `(times, values)`, zero after the last
    /// time. `window` bounds the stored history (defaults to the table span).
    Tabulated {
        times: Vec<f64>,
        #[serde(with = "crate::config::cplx_vec")]
        values: Vec<C64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<f64>,
    },
}

/// One environment channel: white coefficient `b` plus memory kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColoredChannelSpec {
    #[serde(with = "crate::config::cplx", default = "zero")]
    pub b: C64,
    #[serde(default = "no_kernel")]
    pub kernel: Kernel,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn no_kernel() -> Kernel {
    Kernel::None
}

/// Fraction of a tabulated kernel's L¹ mass allowed beyond its memory window.
pub const TABULATED_TAIL_LIMIT: f64 = 1e-4;

impl ColoredChannelSpec {
    pub fn white(b: C64) -> Self {
        Self { b, kernel: Kernel::None }
    }

    pub fn exponential(b: C64, amplitude: C64, decay: f64, center: f64) -> Self {
        Self {
            b,
            kernel: Kernel::Exponential {
                amplitude,
                decay,
                center,
            },
        }
    }

    pub fn is_white(&self) -> bool {
        matches!(self.kernel, Kernel::None)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kernel {
            Kernel::None => Ok(()),
            Kernel::Exponential { decay, center, amplitude } => {
                if !(*decay > 0.0) || !decay.is_finite() {
                    return Err(invalid("exponential kernel decay must be positive"));
                }
                if !center.is_finite() || !amplitude.re.is_finite() || !amplitude.im.is_finite() {
                    return Err(invalid("exponential kernel parameters must be finite"));
                }
                Ok(())
            }
            Kernel::Tabulated { times, values, window } => {
                let table = TabulatedKernel::new(times, values)?;
                let w = window.unwrap_or(table.span());
                if !(w > 0.0) {
                    return Err(invalid("tabulated kernel window must be positive"));
                }
                let tail = table.tail_fraction(w);
                if tail >= TABULATED_TAIL_LIMIT {
                    return Err(Error::InvalidConfiguration(format!(
                        "tabulated kernel keeps {tail:.2e} of its mass beyond the memory window"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Value of the kernel at lag `t ≥ 0`.
    pub fn kernel_at(&self, t: f64) -> C64 {
        match &self.kernel {
            Kernel::None => zero(),
            Kernel::Exponential {
                amplitude,
                decay,
                center,
            } => *amplitude * (-C64::new(0.5 * decay, *center) * t).exp(),
            Kernel::Tabulated { times, values, .. } => interpolate(times, values, t),
        }
    }

    /// Transform `∫₀^∞ e^{iμt} c(t) dt`, i.e. the Laplace transform at `z = −iμ`.
    pub fn kernel_transform(&self, mu: f64) -> C64 {
        match &self.kernel {
            Kernel::None => zero(),
            Kernel::Exponential {
                amplitude,
                decay,
                center,
            } => *amplitude / (C64::new(0.0, -mu) + C64::new(0.5 * decay, *center)),
            Kernel::Tabulated { times, values, .. } => {
                let mut total = zero();
                for k in 0..times.len().saturating_sub(1) {
                    total += linear_segment_transform(times[k], times[k + 1], values[k], values[k + 1], mu);
                }
                total
            }
        }
    }
}

/// Exact `∫_{t0}^{t1} e^{iμt} ℓ(t) dt` for the linear ℓ through `(t0,c0),(t1,c1)`.
pub(crate) fn linear_segment_transform(t0: f64, t1: f64, c0: C64, c1: C64, mu: f64) -> C64 {
    let h = t1 - t0;
    if h <= 0.0 {
        return zero();
    }
    let x = mu * h;
    if x.abs() < 1e-4 {
        // Series to third order avoids cancellation at small μh.
        let e0 = C64::new(0.0, mu * t0).exp();
        let i = C64::new(0.0, 1.0);
        // ∫₀¹ e^{ixs}(c0(1−s) + c1 s) ds expanded in x.
        let a0 = (c0 + c1) / 2.0;
        let a1 = (c0 + c1 * 2.0) / 6.0;
        let a2 = (c0 + c1 * 3.0) / 24.0;
        let a3 = (c0 + c1 * 4.0) / 120.0;
        return e0 * h * (a0 + i * x * a1 - x * x * a2 - i * x * x * x * a3);
    }
    let i = C64::new(0.0, 1.0);
    let e0 = (i * mu * t0).exp();
    let e1 = (i * mu * t1).exp();
    let slope = (c1 - c0) / h;
    // ∫ e^{iμt}(c0 + slope (t−t0)) dt by parts.
    let first = (e1 * c1 - e0 * c0) / (i * mu);
    let second = slope * (e1 - e0) / (i * mu * i * mu);
    first - second
}

fn interpolate(times: &[f64], values: &[C64], t: f64) -> C64 {
    if times.is_empty() || t < times[0] || t > *times.last().unwrap() {
        return zero();
    }
    let k = match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => return values[k],
        Err(k) => k,
    };
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// Validated view of a tabulated kernel.
pub(crate) struct TabulatedKernel<'a> {
    times: &'a [f64],
    values: &'a [C64],
}

impl<'a> TabulatedKernel<'a> {
    pub(crate) fn new(times: &'a [f64], values: &'a [C64]) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(invalid("tabulated kernel needs at least two matching times and values"));
        }
        if !(times[0] >= 0.0) {
            return Err(invalid("tabulated kernel times must start at or after 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("tabulated kernel times must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("tabulated kernel values must be finite"));
        }
        let table = Self { times, values };
        if !(table.l1_mass(f64::INFINITY) > 0.0) {
            return Err(invalid("tabulated kernel is identically zero"));
        }
        Ok(table)
    }

    fn span(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Trapezoidal mass of |c| on `[0, upto]`.
    fn l1_mass(&self, upto: f64) -> f64 {
        let mut m = 0.0;
        for k in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            if t0 >= upto {
                break;
            }
            let t1c = t1.min(upto);
            let c1 = interpolate(self.times, self.values, t1c);
            m += 0.5 * (self.values[k].norm() + c1.norm()) * (t1c - t0);
        }
        m
    }

    fn tail_fraction(&self, window: f64) -> f64 {
        let total = self.l1_mass(f64::INFINITY);
        ((total - self.l1_mass(window)) / total).max(0.0)
    }
}

/// I.i.d. N(0, dt) increments for `n` channels.
pub fn sample_wiener_increments<R: Rng + ?Sized>(dt: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let s = dt.sqrt();
    Ok((0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * s
        })
        .collect())
}

/// Poisson(λ·dt) count for one step.
pub fn sample_reference_count<R: Rng + ?Sized>(lambda: f64, dt: f64, rng: &mut R) -> Result<u64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("count rate must be nonnegative"));
    }
    if !(dt > 0.0) {
        return Err(invalid("time step must be positive"));
    }
    let mean = lambda * dt;
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid(e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// Which classical spectrum to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum ClassicalSpectrum<'a> {
    Laser(&'a LaserSpec),
    Colored(&'a [ColoredChannelSpec]),
}

/// Power spectrum `∫ e^{iμs} E[ẋ(t+s) ẋ(t)*] ds` of a classical driving process.
pub fn classical_spectrum(which: ClassicalSpectrum<'_>, mu: f64) -> f64 {
    match which {
        ClassicalSpectrum::Laser(l) => {
            let eps = l.bandwidth;
            if eps == 0.0 {
                return 0.0;
            }
            eps * l.amplitude.norm_sqr() / ((mu - l.frequency).powi(2) + 0.25 * eps * eps)
        }
        ClassicalSpectrum::Colored(chs) => chs.iter().map(|c| (c.b + c.kernel_transform(mu)).norm_sqr()).sum(),
    }
}
