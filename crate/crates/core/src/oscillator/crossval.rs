use super::sim::{Mode, OscillatorSimulator};
use super::DerivedParams;
use crate::engine::{build_drift_k, step_linear_sse_with_drift, ChannelSet, CountingChannel, StepNoise, WeightedState};
use crate::error::{invalid, Result};
use crate::fock::{make_coherent_vector, FockOperator, C64};
use crate::rng::TrajectorySeed;
use std::f64::consts::PI;

/// The model's operators at one time, given the laser value `f`, the local
/// oscillator value `h` and `x = Σ X_j`.
pub fn model_channel_set(p: &DerivedParams, dim: usize, f: C64, h: C64, x: C64) -> ChannelSet {
    let pp = &p.params;
    let a = FockOperator::annihilation(dim);
    let ad = a.adjoint();
    let drive = pp.alpha2 * f + x;
    let h_op = &FockOperator::number(dim).scaled(C64::new(pp.mode_frequency, 0.0))
        + &(&a.scaled(drive.conj()) + &ad.scaled(drive));
    let mi = C64::new(0.0, -1.0);
    let mut diffusive = vec![
        a.scaled(mi * pp.alpha1.conj() * h.conj()),
        a.scaled(mi * pp.alpha2.conj()),
    ];
    for ch in &pp.channels {
        diffusive.push((&a.scaled(ch.b.conj()) + &ad.scaled(ch.b)).scaled(mi));
    }
    ChannelSet {
        hamiltonian: h_op,
        diffusive,
        counting: vec![CountingChannel {
            op: a.scaled(pp.beta.conj()),
            intensity: pp.count_rate,
        }],
    }
}

/// Agreement between the generic Fock integrator and the exact amplitude
/// track on one noise path.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub dt: f64,
    pub times: Vec<f64>,
    /// |⟨ψ_num(t)|e(ξ(t))⟩|² on the grid.
    pub fidelity: Vec<f64>,
    /// Signed ln p_num − ln p_exact on the grid.
    pub log_weight_gap: Vec<f64>,
    /// Signed wrapped phase gap on the grid.
    pub phase_gap: Vec<f64>,
    pub min_fidelity: f64,
    /// Time average of 1 − fidelity.
    pub mean_deficit: f64,
    /// Largest |ln p_num − ln p_exact|.
    pub max_log_weight_gap: f64,
    /// Largest |arg⟨e(ξ)|ψ_num⟩ − (arg V + Im Z/2)|, wrapped to (−π, π].
    pub max_phase_gap: f64,
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Runs both integrators on the same reference-law noise path.
pub fn cross_validate_fock(p: &DerivedParams, horizon: f64, dt: f64, seed: TrajectorySeed, dim: usize) -> Result<FidelityReport> {
    cross_validate_fock_substeps(p, horizon, dt, seed, dim, 1)
}

/// As [`cross_validate_fock`], with the driving path sampled on a grid
/// `substeps` times finer than `dt`. Runs at `dt` with `2k` substeps and at
/// `dt/2` with `k` substeps share one path.
pub fn cross_validate_fock_substeps(
    p: &DerivedParams,
    horizon: f64,
    dt: f64,
    seed: TrajectorySeed,
    dim: usize,
    substeps: u32,
) -> Result<FidelityReport> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let mut sim = OscillatorSimulator::new(p, dt, Mode::Reference, seed)?.with_substeps(substeps);
    let mut state = WeightedState::new(make_coherent_vector(p.params.initial_amplitude, dim)?, 1)?;
    // K is affine in the drive; |h| = 1 so the L₁†L₁ part is fixed.
    let a = FockOperator::annihilation(dim);
    let ad = a.adjoint();
    let base_set = model_channel_set(p, dim, C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let base_k = build_drift_k(&base_set.hamiltonian, &base_set.diffusive, &base_set.counting)?;
    let steps = (horizon / dt).round() as usize;
    let mut times = Vec::with_capacity(steps);
    let mut fidelity = Vec::with_capacity(steps);
    let mut lw_gap = Vec::with_capacity(steps);
    let mut ph_gap = Vec::with_capacity(steps);
    let mut max_lw: f64 = 0.0;
    let mut max_phase: f64 = 0.0;
    for _ in 0..steps {
        let snap = sim.step();
        let set = model_channel_set(p, dim, snap.laser, snap.local_osc, snap.x_total);
        let mut diffusive = vec![snap.db1, snap.db2];
        diffusive.extend_from_slice(sim.last_channel_increments());
        let noise = StepNoise {
            diffusive,
            counts: vec![snap.jumps],
        };
        let drive = p.params.alpha2 * snap.laser + snap.x_total;
        let k = &base_k + &(&a.scaled(drive.conj()) + &ad.scaled(drive)).scaled(C64::new(0.0, -1.0));
        step_linear_sse_with_drift(&mut state, &set, &k, dt, &noise)?;
        if state.absorbed || snap.absorbed {
            break;
        }
        let target = make_coherent_vector(snap.xi, dim)?;
        let overlap = target.inner(&state.vector);
        times.push(snap.time);
        fidelity.push(overlap.norm_sqr());
        let g = state.log_weight - snap.log_weight;
        let ph = wrap(overlap.arg() - sim.phase());
        lw_gap.push(g);
        ph_gap.push(ph);
        max_lw = max_lw.max(g.abs());
        max_phase = max_phase.max(ph.abs());
    }
    let min_fidelity = fidelity.iter().copied().fold(1.0, f64::min);
    let mean_deficit = if fidelity.is_empty() {
        0.0
    } else {
        fidelity.iter().map(|f| 1.0 - f).sum::<f64>() / fidelity.len() as f64
    };
    Ok(FidelityReport {
        dt,
        times,
        fidelity,
        log_weight_gap: lw_gap,
        phase_gap: ph_gap,
        min_fidelity,
        mean_deficit,
        max_log_weight_gap: max_lw,
        max_phase_gap: max_phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ColoredChannelSpec, LaserSpec, LocalOscillatorSpec};
    use crate::oscillator::{derive_params, OscillatorParams};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn quiet_model_has_unit_fidelity() {
        let p = derive_params(&OscillatorParams {
            mode_frequency: 1.0,
            alpha1: c(1.0, 0.0),
            ..Default::default()
        })
        .unwrap();
        let r = cross_validate_fock(&p, 2.0, 0.01, TrajectorySeed::new(1, 0), 8).unwrap();
        assert!(r.fidelity.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn affine_drift_matches_generic() {
        let p = derive_params(&OscillatorParams {
            mode_frequency: 0.7,
            alpha1: c(0.6, 0.1),
            alpha2: c(0.5, 0.2),
            beta: c(0.7, 0.0),
            count_rate: 0.5,
            channels: vec![ColoredChannelSpec::white(c(0.2, 0.1))],
            ..Default::default()
        })
        .unwrap();
        let dim = 6;
        let base = model_channel_set(&p, dim, c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let base_k = build_drift_k(&base.hamiltonian, &base.diffusive, &base.counting).unwrap();
        let (f, h, x) = (c(0.3, -0.2), C64::from_polar(1.0, 0.8), c(-0.1, 0.4));
        let drive = p.params.alpha2 * f + x;
        let a = FockOperator::annihilation(dim);
        let k = &base_k + &(&a.scaled(drive.conj()) + &a.adjoint().scaled(drive)).scaled(c(0.0, -1.0));
        let want = model_channel_set(&p, dim, f, h, x).drift().unwrap();
        assert!((&k.0 - &want.0).norm() < 1e-13);
    }

    #[test]
    fn weak_drive_tracks_coherent_state() {
        let p = derive_params(&OscillatorParams {
            mode_frequency: 1.0,
            alpha1: c(0.6, 0.0),
            alpha2: c(0.5, 0.2),
            beta: c(0.7, 0.0),
            count_rate: 0.5,
            laser: LaserSpec {
                amplitude: c(0.4, 0.0),
                frequency: 0.9,
                bandwidth: 0.1,
            },
            local_oscillator: LocalOscillatorSpec::Heterodyne {
                frequency: 1.0,
                linewidth: 0.2,
                phase: 0.3,
            },
            channels: vec![
                ColoredChannelSpec::exponential(c(0.1, 0.0), c(0.2, 0.1), 0.5, 1.0),
                ColoredChannelSpec::white(c(0.2, 0.1)),
            ],
            initial_amplitude: c(0.3, -0.1),
        })
        .unwrap();
        let r = cross_validate_fock(&p, 5.0, 1e-3, TrajectorySeed::new(2, 0), 24).unwrap();
        assert!(r.min_fidelity > 0.999, "{}", r.min_fidelity);
        // Weight and phase errors of Euler-Maruyama are strong order 1/2 here.
        assert!(r.max_phase_gap < 0.15, "{}", r.max_phase_gap);
        assert!(r.max_log_weight_gap < 0.25, "{}", r.max_log_weight_gap);
    }

    #[test]
    fn weight_gap_shrinks_on_matched_paths() {
        let p = derive_params(&OscillatorParams {
            mode_frequency: 1.0,
            alpha1: c(0.6, 0.0),
            alpha2: c(0.5, 0.2),
            channels: vec![ColoredChannelSpec::white(c(0.2, 0.1))],
            laser: LaserSpec {
                amplitude: c(0.6, 0.0),
                frequency: 1.0,
                bandwidth: 0.0,
            },
            initial_amplitude: c(0.0, -0.8),
            ..Default::default()
        })
        .unwrap();
        let rms = |dt: f64, k: u32| {
            let s: f64 = (0..12)
                .map(|i| {
                    let r = cross_validate_fock_substeps(&p, 2.0, dt, TrajectorySeed::new(5, i), 16, k).unwrap();
                    r.log_weight_gap.iter().map(|g| g * g).sum::<f64>() / r.log_weight_gap.len() as f64
                })
                .sum();
            (s / 12.0).sqrt()
        };
        let coarse = rms(4e-3, 4);
        let fine = rms(1e-3, 1);
        // √4 = 2 expected.
        assert!(coarse / fine > 1.4, "{coarse} {fine}");
    }
}
