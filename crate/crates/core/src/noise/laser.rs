use crate::error::{Error, Result};
use crate::fock::C64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Phase-diffusing laser `f(t) = g·exp(−iν₃t + i√ε B₃(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSpec {
    #[serde(with = "crate::config::cplx", default = "zero")]
    pub amplitude: C64,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub bandwidth: f64,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl Default for LaserSpec {
    fn default() -> Self {
        Self {
            amplitude: zero(),
            frequency: 0.0,
            bandwidth: 0.0,
        }
    }
}

impl LaserSpec {
    pub fn is_on(&self) -> bool {
        self.amplitude != zero()
    }

    /// Laser value for a given time and accumulated phase noise.
    pub fn value(&self, t: f64, phase_noise: f64) -> C64 {
        let phase = -self.frequency * t + self.bandwidth.sqrt() * phase_noise;
        self.amplitude * C64::from_polar(1.0, phase)
    }

    /// `E f(t) = g e^{−iν₃t − εt/2}`.
    pub fn mean(&self, t: f64) -> C64 {
        self.amplitude * (C64::new(-0.5 * self.bandwidth * t, -self.frequency * t)).exp()
    }

    /// `E[f(r) f̄(s)] = |g|² e^{iν₃(s−r) − ε|s−r|/2}`.
    pub fn autocorrelation(&self, r: f64, s: f64) -> C64 {
        let d = s - r;
        self.amplitude.norm_sqr() * C64::new(-0.5 * self.bandwidth * d.abs(), self.frequency * d).exp()
    }

    /// `E[f(r) f(s)] = g² e^{−iν₃(r+s) − ε(r+s)/2 − ε min(r,s)}`.
    pub fn pair_moment(&self, r: f64, s: f64) -> C64 {
        let g2 = self.amplitude * self.amplitude;
        g2 * C64::new(
            -0.5 * self.bandwidth * (r + s) - self.bandwidth * r.min(s),
            -self.frequency * (r + s),
        )
        .exp()
    }
}

#[derive(Debug, Clone)]
pub struct LaserState {
    spec: LaserSpec,
    phase_noise: f64,
    time: f64,
}

impl LaserState {
    pub fn new(spec: LaserSpec) -> Self {
        Self {
            spec,
            phase_noise: 0.0,
            time: 0.0,
        }
    }

    pub fn spec(&self) -> &LaserSpec {
        &self.spec
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn phase_noise(&self) -> f64 {
        self.phase_noise
    }

    pub fn value(&self) -> C64 {
        self.spec.value(self.time, self.phase_noise)
    }

    /// Advances by `dt` with increment `db3` of B₃ and returns the new value.
    pub fn step(&mut self, dt: f64, db3: f64) -> C64 {
        self.phase_noise += db3;
        self.time += dt;
        self.value()
    }
}

/// Local oscillator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LocalOscillatorSpec {
    /// `h(t) = exp(iϑ − iνt + i√κ B₄(t))`.
    Heterodyne {
        frequency: f64,
        #[serde(default)]
        linewidth: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `h(t) = e^{iθ} f(t−Δt)/|f(t−Δt)|`, split off the laser.
    Homodyne {
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        delay: f64,
    },
}

impl Default for LocalOscillatorSpec {
    fn default() -> Self {
        Self::Heterodyne {
            frequency: 0.0,
            linewidth: 0.0,
            phase: 0.0,
        }
    }
}

impl LocalOscillatorSpec {
    /// `E[h̄(t) h(s)]` for the heterodyne mode.
    pub fn heterodyne_autocorrelation(frequency: f64, linewidth: f64, t: f64, s: f64) -> C64 {
        C64::new(-0.5 * linewidth * (t - s).abs(), frequency * (t - s)).exp()
    }
}

#[derive(Debug, Clone)]
pub enum LocalOscillatorState {
    Heterodyne {
        frequency: f64,
        linewidth: f64,
        phase: f64,
        phase_noise: f64,
        time: f64,
    },
    Homodyne {
        phase: f64,
        delay_steps: usize,
        laser: LaserSpec,
        /// Laser phase noise samples, newest last; holds `delay_steps + 1` values.
        history: VecDeque<f64>,
        time: f64,
        dt: f64,
    },
}

impl LocalOscillatorState {
    /// Builds the oscillator state on a grid of step `dt`. A homodyne delay is
    /// rounded to the nearest multiple of `dt`.
    pub fn new(spec: LocalOscillatorSpec, laser: &LaserSpec, dt: f64) -> Result<Self> {
        match spec {
            LocalOscillatorSpec::Heterodyne {
                frequency,
                linewidth,
                phase,
            } => {
                if !(linewidth >= 0.0) {
                    return Err(Error::InvalidConfiguration("local oscillator linewidth must be ≥ 0".into()));
                }
                Ok(Self::Heterodyne {
                    frequency,
                    linewidth,
                    phase,
                    phase_noise: 0.0,
                    time: 0.0,
                })
            }
            LocalOscillatorSpec::Homodyne { phase, delay } => {
                if !laser.is_on() {
                    return Err(Error::InvalidConfiguration(
                        "homodyne detection needs a nonzero laser amplitude".into(),
                    ));
                }
                if !(delay >= 0.0) {
                    return Err(Error::InvalidConfiguration("homodyne delay must be ≥ 0".into()));
                }
                let delay_steps = (delay / dt).round() as usize;
                let mut history = VecDeque::with_capacity(delay_steps + 1);
                history.push_back(0.0);
                Ok(Self::Homodyne {
                    phase,
                    delay_steps,
                    laser: *laser,
                    history,
                    time: 0.0,
                    dt,
                })
            }
        }
    }

    /// Current value of h; always of unit modulus.
    pub fn value(&self) -> C64 {
        match self {
            Self::Heterodyne {
                frequency,
                linewidth,
                phase,
                phase_noise,
                time,
            } => C64::from_polar(1.0, phase - frequency * time + linewidth.sqrt() * phase_noise),
            Self::Homodyne {
                phase,
                delay_steps,
                laser,
                history,
                time,
                dt,
            } => {
                let lag = *delay_steps as f64 * dt;
                let t = time - lag;
                // Before the delayed light arrives the laser phase is taken as
                // its deterministic rotation.
                let noise = if history.len() > *delay_steps {
                    history[0]
                } else {
                    0.0
                };
                let f = laser.value(t, noise);
                C64::from_polar(1.0, phase + f.arg())
            }
        }
    }

    /// Advances one step. `db4` drives the heterodyne phase noise; the
    /// homodyne mode needs the laser's phase noise at the new time instead.
    pub fn step(&mut self, dt: f64, db4: f64, laser_phase_noise: f64) -> C64 {
        match self {
            Self::Heterodyne { phase_noise, time, .. } => {
                *phase_noise += db4;
                *time += dt;
            }
            Self::Homodyne {
                delay_steps,
                history,
                time,
                ..
            } => {
                history.push_back(laser_phase_noise);
                while history.len() > *delay_steps + 1 {
                    history.pop_front();
                }
                *time += dt;
            }
        }
        self.value()
    }

    /// Delay actually applied after rounding to the grid.
    pub fn effective_delay(&self) -> f64 {
        match self {
            Self::Heterodyne { .. } => 0.0,
            Self::Homodyne { delay_steps, dt, .. } => *delay_steps as f64 * dt,
        }
    }
}
