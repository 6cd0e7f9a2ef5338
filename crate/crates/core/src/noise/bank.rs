use super::gauss::GaussStep;
use super::{ColoredChannelSpec, Kernel};
use crate::error::{invalid, Result};
use crate::fock::C64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::collections::VecDeque;

/// Per-step output of the noise bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelIncrement {
    /// ΔY over the step.
    pub dy: C64,
    /// Relaxed convolution `∫ e^{−κ(t−s)} dY(s)` at the end of the step, when tracked.
    pub relaxed: C64,
}

/// Observable state of the bank.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBankState {
    /// X_j at the current time.
    pub x: Vec<C64>,
    pub time: f64,
    /// Set once a tabulated channel has dropped history beyond its window.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
enum Stepper {
    White {
        b: C64,
        relax: Option<(GaussStep, DVector<f64>)>,
    },
    Exponential {
        b: C64,
        amplitude: C64,
        step: GaussStep,
        z: DVector<f64>,
        tracks_relaxed: bool,
    },
    Tabulated {
        b: C64,
        weights: Vec<C64>,
        history: VecDeque<f64>,
        relaxed: C64,
        relax_factor: Option<C64>,
    },
}

/// Generator of the colored environment noise Y(t) and the processes X_j(t).
///
/// Exponential kernels are stepped exactly: the state `(u, ∫u, U)` of each
/// channel is a linear SDE in the channel's Wiener process, so its one-step
/// law conditional on ΔB_j is Gaussian and is sampled with an auxiliary stream.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    dt: f64,
    channels: Vec<Stepper>,
    state: NoiseBankState,
}

fn complex_mul_block(m: &mut DMatrix<f64>, row: usize, col: usize, z: C64) {
    // Real 2×2 block of multiplication by z.
    m[(row, col)] += z.re;
    m[(row, col + 1)] -= z.im;
    m[(row + 1, col)] += z.im;
    m[(row + 1, col + 1)] += z.re;
}

impl NoiseBank {
    /// `relax`, when given, is the rate κ with which the bank also tracks
    /// `∫ e^{−κ(t−s)} dY(s)` (exactly for white and exponential channels).
    pub fn new(channels: &[ColoredChannelSpec], dt: f64, relax: Option<C64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        let mut steppers = Vec::with_capacity(channels.len());
        for ch in channels {
            ch.validate()?;
            let b = ch.b;
            let stepper = match &ch.kernel {
                Kernel::None => {
                    let relax = match relax {
                        Some(k) => {
                            let mut a = DMatrix::zeros(2, 2);
                            complex_mul_block(&mut a, 0, 0, -k);
                            let w = DVector::from_vec(vec![b.re, b.im]);
                            Some((GaussStep::new(&a, &w, dt)?, DVector::zeros(2)))
                        }
                        None => None,
                    };
                    Stepper::White { b, relax }
                }
                Kernel::Exponential {
                    amplitude,
                    decay,
                    center,
                } => {
                    let kb = C64::new(0.5 * decay, *center);
                    let n = if relax.is_some() { 6 } else { 4 };
                    let mut a = DMatrix::zeros(n, n);
                    let mut w = DVector::zeros(n);
                    complex_mul_block(&mut a, 0, 0, -kb);
                    w[0] = 1.0;
                    // ∫u dt
                    a[(2, 0)] = 1.0;
                    a[(3, 1)] = 1.0;
                    if let Some(k) = relax {
                        complex_mul_block(&mut a, 4, 4, -k);
                        complex_mul_block(&mut a, 4, 0, *amplitude);
                        w[4] = b.re;
                        w[5] = b.im;
                    }
                    Stepper::Exponential {
                        b,
                        amplitude: *amplitude,
                        step: GaussStep::new(&a, &w, dt)?,
                        z: DVector::zeros(n),
                        tracks_relaxed: relax.is_some(),
                    }
                }
                Kernel::Tabulated { window, times, .. } => {
                    let span = window.unwrap_or(*times.last().expect("validated"));
                    let steps = ((span / dt).ceil() as usize).max(1);
                    let weights = (1..=steps)
                        .map(|k| (ch.kernel_at(k as f64 * dt) + ch.kernel_at((k - 1) as f64 * dt)) * 0.5)
                        .collect();
                    Stepper::Tabulated {
                        b,
                        weights,
                        history: VecDeque::with_capacity(steps),
                        relaxed: C64::new(0.0, 0.0),
                        relax_factor: relax.map(|k| (-k * dt).exp()),
                    }
                }
            };
            steppers.push(stepper);
        }
        let n = steppers.len();
        Ok(Self {
            dt,
            channels: steppers,
            state: NoiseBankState {
                x: vec![C64::new(0.0, 0.0); n],
                time: 0.0,
                truncated: false,
            },
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn state(&self) -> &NoiseBankState {
        &self.state
    }

    /// Sum of the X_j at the current time.
    pub fn x_total(&self) -> C64 {
        self.state.x.iter().sum()
    }

    /// Advances one step given each channel's Wiener increment. `aux` supplies
    /// one independent stream per channel for the part of the exact step not
    /// determined by ΔB_j.
    pub fn step<R: Rng>(&mut self, db: &[f64], aux: &mut [R]) -> ChannelIncrement {
        assert_eq!(db.len(), self.channels.len(), "one increment per channel");
        assert_eq!(aux.len(), self.channels.len(), "one auxiliary stream per channel");
        let dt = self.dt;
        let mut dy = C64::new(0.0, 0.0);
        let mut relaxed_total = C64::new(0.0, 0.0);
        for (j, ch) in self.channels.iter_mut().enumerate() {
            let dbj = db[j];
            match ch {
                Stepper::White { b, relax } => {
                    dy += *b * dbj;
                    if let Some((step, z)) = relax {
                        step.advance(z, dbj, &mut aux[j]);
                        relaxed_total += C64::new(z[0], z[1]);
                    }
                }
                Stepper::Exponential {
                    b,
                    amplitude,
                    step,
                    z,
                    tracks_relaxed,
                } => {
                    z[2] = 0.0;
                    z[3] = 0.0;
                    step.advance(z, dbj, &mut aux[j]);
                    let du_int = C64::new(z[2], z[3]);
                    dy += *b * dbj + *amplitude * du_int;
                    self.state.x[j] = *amplitude * C64::new(z[0], z[1]);
                    if *tracks_relaxed {
                        relaxed_total += C64::new(z[4], z[5]);
                    }
                }
                Stepper::Tabulated {
                    b,
                    weights,
                    history,
                    relaxed,
                    relax_factor,
                } => {
                    let dyj = *b * dbj + self.state.x[j] * dt;
                    dy += dyj;
                    if let Some(e) = relax_factor {
                        *relaxed = *e * (*relaxed + dyj);
                        relaxed_total += *relaxed;
                    }
                    history.push_back(dbj);
                    if history.len() > weights.len() {
                        history.pop_front();
                        self.state.truncated = true;
                    }
                    self.state.x[j] = history.iter().rev().zip(weights.iter()).map(|(d, w)| *w * *d).sum();
                }
            }
        }
        self.state.time += dt;
        ChannelIncrement {
            dy,
            relaxed: relaxed_total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_wiener_increments;
    use crate::rng::{stream, StreamRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn aux(n: usize, tag: u64) -> Vec<StreamRng> {
        (0..n).map(|j| stream(tag, j as u64, "aux")).collect()
    }

    #[test]
    fn white_channels_combine_linearly() {
        let chs = [ColoredChannelSpec::white(c(1.0, 0.0)), ColoredChannelSpec::white(c(0.0, 1.0))];
        let mut bank = NoiseBank::new(&chs, 0.1, None).unwrap();
        let mut a = aux(2, 1);
        let inc = bank.step(&[0.3, -0.2], &mut a);
        assert!((inc.dy - c(0.3, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn white_relaxed_matches_exact_recursion_mean() {
        // With zero auxiliary part the relaxed value is e^{-κdt}U + regression·ΔB.
        let k = c(0.5, 1.0);
        let chs = [ColoredChannelSpec::white(c(0.7, 0.0))];
        let mut bank = NoiseBank::new(&chs, 1e-3, Some(k)).unwrap();
        let mut a = aux(1, 2);
        let mut u = c(0.0, 0.0);
        let mut rng = stream(9, 0, "B");
        for _ in 0..2000 {
            let db = sample_wiener_increments(1e-3, 1, &mut rng).unwrap();
            let inc = bank.step(&db, &mut a);
            u = (-k * 1e-3).exp() * (u + c(0.7, 0.0) * db[0]);
            // Conditional spread is O(dt^{3/2}) per step.
            assert!((inc.relaxed - u).norm() < 5e-3);
        }
    }

    #[test]
    fn exponential_matches_discrete_convolution_on_matched_paths() {
        let g = c(0.3, -0.2);
        let spec = ColoredChannelSpec::exponential(c(0.0, 0.0), g, 1.0, 2.0);
        let dt = 1e-3;
        let times: Vec<f64> = (0..=12_000).map(|k| k as f64 * 1e-3).collect();
        let values: Vec<C64> = times.iter().map(|&t| spec.kernel_at(t)).collect();
        let tab = ColoredChannelSpec {
            b: c(0.0, 0.0),
            kernel: Kernel::Tabulated {
                times,
                values,
                window: None,
            },
        };
        let mut exact = NoiseBank::new(&[spec], dt, None).unwrap();
        let mut conv = NoiseBank::new(&[tab], dt, None).unwrap();
        let mut a1 = aux(1, 3);
        let mut a2 = aux(1, 4);
        let mut rng = stream(5, 0, "B5");
        let mut worst: f64 = 0.0;
        for _ in 0..5000 {
            let db = sample_wiener_increments(dt, 1, &mut rng).unwrap();
            exact.step(&db, &mut a1);
            conv.step(&db, &mut a2);
            worst = worst.max((exact.state().x[0] - conv.state().x[0]).norm());
        }
        assert!(worst < 0.02, "{worst}");
        assert!(!conv.state().truncated);
    }

    #[test]
    fn ou_stationary_variance() {
        // E|X|² → |g|²/γ for c(t) = g e^{−(γ/2+iν)t}.
        let g = c(0.2, 0.1);
        let gamma = 2.0;
        let spec = ColoredChannelSpec::exponential(c(0.0, 0.0), g, gamma, 1.0);
        let dt = 0.05;
        let mut bank = NoiseBank::new(&[spec], dt, None).unwrap();
        let mut a = aux(1, 6);
        let mut rng = stream(6, 0, "B5");
        let mut acc = 0.0;
        let mut n = 0;
        for k in 0..400_000 {
            let db = sample_wiener_increments(dt, 1, &mut rng).unwrap();
            bank.step(&db, &mut a);
            if k > 100 {
                acc += bank.state().x[0].norm_sqr();
                n += 1;
            }
        }
        let want = g.norm_sqr() / gamma;
        assert!((acc / n as f64 - want).abs() < 0.03 * want, "{}", acc / n as f64);
    }
}
