//! Moments of the driving processes and of the amplitude components they
//! induce. Environment correlations use exponential sums where the kernel
//! allows it and time-domain quadrature for tabulated kernels.

use super::AnalyticConfig;
use crate::error::Result;
use crate::fock::C64;
use crate::noise::{Kernel, LocalOscillatorSpec};
use crate::quad::integrate_pieces;

/// Selects one closed-form moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    /// `E f(t)`.
    LaserMean { t: f64 },
    /// `E[f(r) f̄(s)]`.
    LaserAutocorrelation { r: f64, s: f64 },
    /// `E[f(r) f(s)]`.
    LaserPair { r: f64, s: f64 },
    /// Stationary `E[U_f(t₀+lag) Ū_f(t₀)]`.
    LaserResponse { lag: f64 },
    /// Stationary `E[U_f(t₀+lag) U_f(t₀)]`; vanishes.
    LaserResponsePair { lag: f64 },
    /// Stationary `E[U_Y(t₀+lag) Ū_Y(t₀)]`.
    EnvironmentResponse { lag: f64 },
    /// Stationary `E[U_Y(t₀+lag) U_Y(t₀)]`.
    EnvironmentResponsePair { lag: f64 },
    /// `E h(t)`.
    LoMean { t: f64 },
    /// `E[h̄(t) h(s)]`.
    LoAutocorrelation { t: f64, s: f64 },
    /// `E[h̄(t) h̄(s)]`.
    LoConjugatePair { t: f64, s: f64 },
    /// `E[f(r₁) f̄(r₂) h̄(t) h(s)]`.
    FourthMixed { r1: f64, r2: f64, t: f64, s: f64 },
    /// `E[f(r₁) f(r₂) h̄(t) h̄(s)]`.
    FourthPlain { r1: f64, r2: f64, t: f64, s: f64 },
    /// `E[h̄(s) f(r)]`.
    LoLaserCross { s: f64, r: f64 },
}

/// Evaluates the selected moment.
pub fn autocorrelation(cfg: &AnalyticConfig, which: Moment) -> Result<C64> {
    let laser = &cfg.model.params.laser;
    Ok(match which {
        Moment::LaserMean { t } => laser.mean(t),
        Moment::LaserAutocorrelation { r, s } => laser.autocorrelation(r, s),
        Moment::LaserPair { r, s } => laser.pair_moment(r, s),
        Moment::LaserResponse { lag } => laser_response(cfg, lag),
        Moment::LaserResponsePair { .. } => C64::new(0.0, 0.0),
        Moment::EnvironmentResponse { lag } => environment_response(cfg, lag)?.0,
        Moment::EnvironmentResponsePair { lag } => environment_response(cfg, lag)?.1,
        Moment::LoMean { t } => lo_moment(cfg, &[], &[(t, 1)]),
        Moment::LoAutocorrelation { t, s } => lo_moment(cfg, &[], &[(t, -1), (s, 1)]),
        Moment::LoConjugatePair { t, s } => lo_moment(cfg, &[], &[(t, -1), (s, -1)]),
        Moment::FourthMixed { r1, r2, t, s } => lo_moment(cfg, &[(r1, 1), (r2, -1)], &[(t, -1), (s, 1)]),
        Moment::FourthPlain { r1, r2, t, s } => lo_moment(cfg, &[(r1, 1), (r2, 1)], &[(t, -1), (s, -1)]),
        Moment::LoLaserCross { s, r } => lo_moment(cfg, &[(r, 1)], &[(s, -1)]),
    })
}

/// `Var(B(t₁) − B(t₂) + B(t₃) − B(t₄))` for a standard Wiener process with
/// `B(u) = 0` for `u ≤ 0`.
pub fn phase_variance(t: [f64; 4]) -> f64 {
    let w = [1.0, -1.0, 1.0, -1.0];
    let mut v = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            v += w[i] * w[j] * t[i].max(0.0).min(t[j].max(0.0));
        }
    }
    v.max(0.0)
}

/// The same variance from the case table over orderings of positive times.
/// Ties take the limit from either side, where the cases agree.
pub fn phase_variance_table(t: [f64; 4]) -> f64 {
    let [t1, t2, t3, t4] = t;
    let lt = |a: f64, b: f64| a <= b;
    if lt(t1.max(t2), t3.min(t4)) || lt(t3.max(t4), t1.min(t2)) {
        (t4 - t3).abs() + (t2 - t1).abs()
    } else if lt(t1.max(t4), t2.min(t3)) || lt(t2.max(t3), t1.min(t4)) {
        (t4 - t1).abs() + (t3 - t2).abs()
    } else if (t4 < t2 && t2 < t3 && t3 < t1) || (t1 < t3 && t3 < t2 && t2 < t4) {
        (t4 - t1).abs() + 3.0 * (t3 - t2).abs()
    } else if (t4 < t2 && t2 < t1 && t1 < t3) || (t3 < t1 && t1 < t2 && t2 < t4) {
        (t4 - t3).abs() + 3.0 * (t2 - t1).abs()
    } else if (t2 < t4 && t4 < t1 && t1 < t3) || (t3 < t1 && t1 < t4 && t4 < t2) {
        (t2 - t3).abs() + 3.0 * (t4 - t1).abs()
    } else {
        (t2 - t1).abs() + 3.0 * (t3 - t4).abs()
    }
}

/// Variance of `Σ_k w_k B(u_k)`, `B(u) = 0` for `u ≤ 0`.
fn weighted_variance(terms: &[(f64, f64)]) -> f64 {
    let mut v = 0.0;
    for &(ui, wi) in terms {
        for &(uj, wj) in terms {
            v += wi * wj * ui.max(0.0).min(uj.max(0.0));
        }
    }
    v.max(0.0)
}

/// `E[Π f^{±}(r) Π h^{±}(t)]` where a sign of −1 means conjugate.
fn lo_moment(cfg: &AnalyticConfig, laser_factors: &[(f64, i32)], lo_factors: &[(f64, i32)]) -> C64 {
    let p = &cfg.model.params;
    let g = p.laser.amplitude;
    let (nu3, eps) = (p.laser.frequency, p.laser.bandwidth);
    let mut amp = C64::new(1.0, 0.0);
    let mut phase = 0.0;
    let mut b3: Vec<(f64, f64)> = Vec::new();
    for &(r, sgn) in laser_factors {
        let sg = sgn as f64;
        amp *= if sgn > 0 { g } else { g.conj() };
        phase += -sg * nu3 * r;
        b3.push((r, sg));
    }
    match p.local_oscillator {
        LocalOscillatorSpec::Heterodyne {
            frequency,
            linewidth,
            phase: vartheta,
        } => {
            let mut b4: Vec<(f64, f64)> = Vec::new();
            for &(t, sgn) in lo_factors {
                let sg = sgn as f64;
                phase += sg * (vartheta - frequency * t);
                b4.push((t, sg));
            }
            let v = eps * weighted_variance(&b3) + linewidth * weighted_variance(&b4);
            amp * C64::from_polar((-0.5 * v).exp(), phase)
        }
        LocalOscillatorSpec::Homodyne { phase: theta, delay } => {
            let unit = if g.norm() > 0.0 { g / g.norm() } else { C64::new(1.0, 0.0) };
            for &(t, sgn) in lo_factors {
                let sg = sgn as f64;
                let u = t - delay;
                amp *= if sgn > 0 { unit } else { unit.conj() };
                phase += sg * (theta - nu3 * u);
                b3.push((u, sg));
            }
            amp * C64::from_polar((-0.5 * eps * weighted_variance(&b3)).exp(), phase)
        }
    }
}

/// Stationary `E[U_f(t₀+τ) Ū_f(t₀)]`.
pub(crate) fn laser_response(cfg: &AnalyticConfig, lag: f64) -> C64 {
    if lag < 0.0 {
        return laser_response(cfg, -lag).conj();
    }
    let p = &cfg.model.params;
    let g0 = cfg.model.gamma0;
    let k0 = cfg.model.kappa0;
    let k0b = k0.conj();
    let k3 = C64::new(0.5 * p.laser.bandwidth, -p.laser.frequency);
    let k3b = k3.conj();
    let pref = p.alpha2.norm_sqr() * p.laser.amplitude.norm_sqr() / g0;
    let e0 = (-k0b * lag).exp();
    let e3 = (-k3b * lag).exp();
    let diff = k0b - k3b;
    // (e^{−κ̄₃τ} − e^{−κ̄₀τ})/(κ̄₀ − κ̄₃), continuous through κ̄₀ = κ̄₃.
    let third = if (diff * lag).norm() < 1e-6 {
        let x = diff * lag;
        e0 * lag * (C64::new(1.0, 0.0) + x / 2.0 + x * x / 6.0)
    } else {
        (e3 - e0) / diff
    };
    pref * (e0 / (k0b + k3) + e3 / (k0 + k3b) + third)
}

/// Response `g_j(t) = Σ c t^m e^{−p t}` of the amplitude to channel `j`.
#[derive(Debug, Clone, Copy)]
struct ExpTerm {
    c: C64,
    p: C64,
    linear: bool,
}

fn exp_terms(cfg: &AnalyticConfig, b: C64, kernel: &Kernel) -> Option<Vec<ExpTerm>> {
    let k0b = cfg.model.relax();
    let mut out = vec![ExpTerm {
        c: b,
        p: k0b,
        linear: false,
    }];
    match kernel {
        Kernel::None => {}
        Kernel::Exponential {
            amplitude,
            decay,
            center,
        } => {
            let k5b = C64::new(0.5 * decay, *center);
            let d = k0b - k5b;
            if d.norm() < 1e-9 * (k0b.norm() + k5b.norm()) {
                out.push(ExpTerm {
                    c: *amplitude,
                    p: k0b,
                    linear: true,
                });
            } else {
                out.push(ExpTerm {
                    c: *amplitude / d,
                    p: k5b,
                    linear: false,
                });
                out.push(ExpTerm {
                    c: -*amplitude / d,
                    p: k0b,
                    linear: false,
                });
            }
        }
        Kernel::Tabulated { .. } => return None,
    }
    Some(out)
}

/// `∫₀^∞ (u+τ)^{m₁} e^{−p₁(u+τ)} u^{m₂} e^{−p₂u} du`.
fn pair_integral(a: ExpTerm, b_p: C64, b_linear: bool, lag: f64) -> C64 {
    let big = a.p + b_p;
    let e = (-a.p * lag).exp();
    let one = C64::new(1.0, 0.0);
    e * match (a.linear, b_linear) {
        (false, false) => one / big,
        (false, true) => one / (big * big),
        (true, false) => one / (big * big) + lag / big,
        (true, true) => 2.0 / (big * big * big) + lag / (big * big),
    }
}

/// Stationary `(E[U_Y(t₀+τ) Ū_Y(t₀)], E[U_Y(t₀+τ) U_Y(t₀)])`.
pub fn environment_response(cfg: &AnalyticConfig, lag: f64) -> Result<(C64, C64)> {
    if lag < 0.0 {
        let (c, d) = environment_response(cfg, -lag)?;
        return Ok((c.conj(), d));
    }
    let mut c = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    for ch in &cfg.model.params.channels {
        match exp_terms(cfg, ch.b, &ch.kernel) {
            Some(terms) => {
                for a in &terms {
                    for b in &terms {
                        c += a.c * b.c.conj() * pair_integral(*a, b.p.conj(), b.linear, lag);
                        d += a.c * b.c * pair_integral(*a, b.p, b.linear, lag);
                    }
                }
            }
            None => {
                let (cj, dj) = tabulated_response(cfg, ch.b, &ch.kernel, lag)?;
                c += cj;
                d += dj;
            }
        }
    }
    Ok((c, d))
}

/// `∫₀¹ e^{−z v} v dv` and `∫₀¹ e^{−z v} dv`.
fn psi(z: C64) -> (C64, C64) {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        let p0 = 1.0 - z / 2.0 + z2 / 6.0 - z2 * z / 24.0;
        let p1 = 0.5 - z / 3.0 + z2 / 8.0 - z2 * z / 30.0;
        (p1, p0)
    } else {
        let e = (-z).exp();
        ((1.0 - e * (1.0 + z)) / (z * z), (1.0 - e) / z)
    }
}

/// `g(t) = b e^{−κ̄₀t} + ∫₀ᵗ e^{−κ̄₀(t−r)} c(r) dr` for a piecewise-linear `c`.
fn tabulated_response_fn(k: C64, b: C64, times: &[f64], values: &[C64], t: f64) -> C64 {
    let mut g = b * (-k * t).exp();
    for i in 0..times.len() - 1 {
        let a = times[i];
        if a >= t {
            break;
        }
        let end = times[i + 1].min(t);
        let h = end - a;
        if h <= 0.0 {
            continue;
        }
        let ca = values[i];
        let ce = if end < times[i + 1] {
            let w = (end - a) / (times[i + 1] - a);
            values[i] * (1.0 - w) + values[i + 1] * w
        } else {
            values[i + 1]
        };
        let (p1, p0) = psi(k * h);
        // ∫₀¹ e^{−kh(1−s)} (ca(1−s) + ce s) ds
        let j = ca * p1 + ce * (p0 - p1);
        g += (-k * (t - end)).exp() * h * j;
    }
    g
}

fn tabulated_response(cfg: &AnalyticConfig, b: C64, kernel: &Kernel, lag: f64) -> Result<(C64, C64)> {
    let Kernel::Tabulated { times, values, .. } = kernel else {
        unreachable!("only tabulated kernels reach the numeric path")
    };
    let k = cfg.model.relax();
    let end = *times.last().expect("validated table");
    let g = |t: f64| tabulated_response_fn(k, b, times, values, t);
    let pts: Vec<f64> = (0..=16).map(|i| end * i as f64 / 16.0).collect();
    let q = cfg.quad;
    let cr = integrate_pieces(&|u: f64| (g(u + lag) * g(u).conj()).re, &pts, q)?;
    let ci = integrate_pieces(&|u: f64| (g(u + lag) * g(u).conj()).im, &pts, q)?;
    let dr = integrate_pieces(&|u: f64| (g(u + lag) * g(u)).re, &pts, q)?;
    let di = integrate_pieces(&|u: f64| (g(u + lag) * g(u)).im, &pts, q)?;
    // Past the table g is a pure exponential.
    let (ge, gl) = (g(end), g(end + lag));
    let c = C64::new(cr, ci) + gl * ge.conj() / (k + k.conj());
    let d = C64::new(dr, di) + gl * ge / (k + k);
    Ok((c, d))
}
