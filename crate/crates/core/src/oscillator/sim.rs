use super::DerivedParams;
use crate::error::{invalid, Result};
use crate::fock::C64;
use crate::noise::{
    sample_reference_count, sample_wiener_increments, LaserState, LocalOscillatorState, NoiseBank,
};
use crate::rng::{names, StreamRng, TrajectorySeed};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Probability law under which a trajectory is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Counts are Poisson(λ), the output current is B₁, and the trajectory
    /// carries its density p(t) as a log-weight.
    Reference,
    /// Counts have intensity j(t) and the output current is m₁dt + dW₁.
    Physical,
}

/// Scalars describing one integrator step `[t_n, t_{n+1}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSnapshot {
    /// End time t_{n+1}.
    pub time: f64,
    /// Amplitude at the start and end of the step.
    pub xi_start: C64,
    pub xi: C64,
    /// Laser, local oscillator and Σ X_j at the start of the step.
    pub laser: C64,
    pub local_osc: C64,
    pub x_total: C64,
    /// ΔY over the step.
    pub dy: C64,
    /// Raw driving increments of B₁ and B₂ (W₁, W₂ in physical mode).
    pub db1: f64,
    pub db2: f64,
    /// Output increments of the two diffusive channels.
    pub out1: f64,
    pub out2: f64,
    /// Signals at the start of the step.
    pub m1: f64,
    pub m2: f64,
    pub intensity: f64,
    /// Jumps during the step; their times are in [`OscillatorSimulator::last_jumps`].
    pub jumps: u32,
    /// `ln p(t_{n+1})` (reference mode; 0 in physical mode).
    pub log_weight: f64,
    pub absorbed: bool,
}

/// Exact-track simulator of one trajectory on a fixed grid.
pub struct OscillatorSimulator {
    p: DerivedParams,
    dt: f64,
    mode: Mode,
    b1: StreamRng,
    b2: StreamRng,
    b3: StreamRng,
    b4: StreamRng,
    channel_rngs: Vec<StreamRng>,
    aux_rngs: Vec<StreamRng>,
    counts: StreamRng,
    thinning: StreamRng,
    bank: NoiseBank,
    laser: LaserState,
    lo: LocalOscillatorState,
    steps: u64,
    free: C64,
    u_f: C64,
    u_y: C64,
    xi: C64,
    decay: C64,
    laser_gain: C64,
    re_z: f64,
    im_z: f64,
    log_v2: f64,
    arg_v: f64,
    absorbed: bool,
    total_jumps: u64,
    channel_db: Vec<f64>,
    jump_times: Vec<f64>,
    substeps: u32,
}

impl OscillatorSimulator {
    pub fn new(p: &DerivedParams, dt: f64, mode: Mode, seed: TrajectorySeed) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("time step must be positive"));
        }
        let relax = p.relax();
        let bank = NoiseBank::new(&p.params.channels, dt, Some(relax))?;
        let laser = LaserState::new(p.params.laser);
        let lo = LocalOscillatorState::new(p.params.local_oscillator, &p.params.laser, dt)?;
        let nch = p.params.channels.len();
        let iv3 = C64::new(0.0, p.params.laser.frequency);
        let decay = (-relax * dt).exp();
        // ∫₀^dt e^{−κ̄₀(dt−s)} e^{−iν₃s} ds, times α₂.
        let laser_gain = p.params.alpha2 * ((-iv3 * dt).exp() - decay) / (relax - iv3);
        Ok(Self {
            p: p.clone(),
            dt,
            mode,
            b1: seed.stream(names::B1),
            b2: seed.stream(names::B2),
            b3: seed.stream(names::LASER),
            b4: seed.stream(names::LOCAL_OSC),
            channel_rngs: (0..nch).map(|j| seed.stream(&names::channel(j))).collect(),
            aux_rngs: (0..nch).map(|j| seed.stream(&names::channel_aux(j))).collect(),
            counts: seed.stream(names::COUNTS),
            thinning: seed.stream(names::THINNING),
            bank,
            laser,
            lo,
            steps: 0,
            free: p.params.initial_amplitude,
            u_f: C64::new(0.0, 0.0),
            u_y: C64::new(0.0, 0.0),
            xi: p.params.initial_amplitude,
            decay,
            laser_gain,
            re_z: 0.0,
            im_z: 0.0,
            log_v2: 0.0,
            arg_v: 0.0,
            absorbed: false,
            total_jumps: 0,
            channel_db: vec![0.0; nch],
            jump_times: Vec::new(),
            substeps: 1,
        })
    }

    /// Draws every Gaussian increment as a sum of `k` finer increments, and
    /// reference-law counts on the finer grid. A run with step `dt` and
    /// `k = 2` then sees the same driving path as a run with step `dt/2`.
    pub fn with_substeps(mut self, k: u32) -> Self {
        self.substeps = k.max(1);
        self
    }

    pub fn params(&self) -> &DerivedParams {
        &self.p
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn xi(&self) -> C64 {
        self.xi
    }

    /// Relaxed initial amplitude e^{−κ̄₀t}ξ₀.
    pub fn free_part(&self) -> C64 {
        self.free
    }

    pub fn laser_part(&self) -> C64 {
        self.u_f
    }

    pub fn environment_part(&self) -> C64 {
        self.u_y
    }

    pub fn laser_value(&self) -> C64 {
        self.laser.value()
    }

    pub fn local_osc_value(&self) -> C64 {
        self.lo.value()
    }

    pub fn x_total(&self) -> C64 {
        self.bank.x_total()
    }

    pub fn m1(&self) -> f64 {
        2.0 * (self.p.params.alpha1.conj() * self.lo.value().conj() * self.xi).im
    }

    pub fn m2(&self) -> f64 {
        2.0 * (self.p.params.alpha2.conj() * self.xi).im
    }

    pub fn intensity(&self) -> f64 {
        intensity_of(&self.p, self.xi)
    }

    /// `ln p(t) = Re Z + ln|V|²`; −∞ once absorbed.
    pub fn log_weight(&self) -> f64 {
        if self.absorbed {
            f64::NEG_INFINITY
        } else {
            self.re_z + self.log_v2
        }
    }

    pub fn re_z(&self) -> f64 {
        self.re_z
    }

    pub fn log_v2(&self) -> f64 {
        self.log_v2
    }

    /// Global phase `arg V + Im Z / 2` of the linear-mode vector.
    pub fn phase(&self) -> f64 {
        self.arg_v + 0.5 * self.im_z
    }

    pub fn absorbed(&self) -> bool {
        self.absorbed
    }

    pub fn total_jumps(&self) -> u64 {
        self.total_jumps
    }

    /// Environment-channel increments of the last step.
    pub fn last_channel_increments(&self) -> &[f64] {
        &self.channel_db
    }

    /// Jump times of the last step.
    pub fn last_jumps(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn tabulated_history_truncated(&self) -> bool {
        self.bank.state().truncated
    }

    pub fn step(&mut self) -> StepSnapshot {
        let dt = self.dt;
        let t0 = self.time();
        let pp = &self.p.params;
        let xi0 = self.xi;
        let f0 = self.laser.value();
        let h0 = self.lo.value();
        let x0 = self.bank.x_total();
        let m1 = 2.0 * (pp.alpha1.conj() * h0.conj() * xi0).im;
        let m2 = 2.0 * (pp.alpha2.conj() * xi0).im;
        let j0 = intensity_of(&self.p, xi0);

        let k = self.substeps;
        let db1 = gauss(&mut self.b1, dt, k);
        let db2 = gauss(&mut self.b2, dt, k);
        let db3 = gauss(&mut self.b3, dt, k);
        let db4 = gauss(&mut self.b4, dt, k);
        for (d, r) in self.channel_db.iter_mut().zip(self.channel_rngs.iter_mut()) {
            *d = gauss(r, dt, k);
        }
        let inc = self.bank.step(&self.channel_db, &mut self.aux_rngs);
        let dy = inc.dy;

        self.u_f = self.decay * self.u_f + self.laser_gain * f0;
        self.u_y = inc.relaxed;
        self.free *= self.decay;
        let i = C64::new(0.0, 1.0);
        let xi1 = self.free - i * self.u_f - i * self.u_y;
        self.laser.step(dt, db3);
        self.lo.step(dt, db4, self.laser.phase_noise());
        let j1 = intensity_of(&self.p, xi1);

        // Phase ledger, Itô left point.
        let a1h = pp.alpha1.conj() * h0.conj();
        let a2 = pp.alpha2.conj();
        self.im_z += -2.0 * (xi0 * (a1h * db1 + a2 * db2)).re - 2.0 * (xi0.conj() * (pp.alpha2 * f0 * dt + dy)).re
            + ((a1h * a1h + a2 * a2) * xi0 * xi0).im * dt;

        self.jump_times.clear();
        let (out1, out2) = match self.mode {
            Mode::Reference => {
                if !self.absorbed {
                    self.re_z += m1 * db1 + m2 * db2 - 0.5 * (m1 * m1 + m2 * m2) * dt;
                    // Trapezoid of the linear interpolant of j; with Poisson(λ)
                    // jumps at uniform times this keeps |V|² an exact martingale.
                    self.log_v2 += (pp.count_rate - 0.5 * (j0 + j1)) * dt;
                }
                let sub = dt / k as f64;
                let mut fractions = Vec::new();
                for q in 0..k {
                    let n = sample_reference_count(pp.count_rate, sub, &mut self.counts).unwrap_or(0);
                    for _ in 0..n {
                        let u: f64 = self.counts.random();
                        fractions.push((q as f64 + u) / k as f64);
                    }
                }
                for s in fractions {
                    self.jump_times.push(t0 + s * dt);
                    if self.absorbed {
                        continue;
                    }
                    let jr = j0 + (j1 - j0) * s;
                    let xr = xi0 + (xi1 - xi0) * s;
                    if jr > 0.0 {
                        self.log_v2 += (jr / pp.count_rate).ln();
                        self.arg_v += (pp.beta.conj() * xr).arg();
                    } else {
                        self.absorbed = true;
                    }
                }
                (db1, db2)
            }
            Mode::Physical => {
                let bound = j0.max(j1);
                if bound > 0.0 {
                    let n = sample_reference_count(bound, dt, &mut self.counts).unwrap_or(0);
                    for _ in 0..n {
                        let s: f64 = self.counts.random();
                        let u: f64 = self.thinning.random();
                        let jr = j0 + (j1 - j0) * s;
                        if u * bound < jr {
                            self.jump_times.push(t0 + s * dt);
                        }
                    }
                    self.jump_times.sort_by(f64::total_cmp);
                }
                (m1 * dt + db1, m2 * dt + db2)
            }
        };
        self.total_jumps += self.jump_times.len() as u64;
        self.xi = xi1;
        self.steps += 1;
        if self.mode == Mode::Reference {
            self.jump_times.sort_by(f64::total_cmp);
        }
        StepSnapshot {
            time: self.time(),
            xi_start: xi0,
            xi: xi1,
            laser: f0,
            local_osc: h0,
            x_total: x0,
            dy,
            db1,
            db2,
            out1,
            out2,
            m1,
            m2,
            intensity: j0,
            jumps: self.jump_times.len() as u32,
            log_weight: self.log_weight(),
            absorbed: self.absorbed,
        }
    }
}

fn gauss(r: &mut StreamRng, dt: f64, substeps: u32) -> f64 {
    let sub = dt / substeps as f64;
    (0..substeps)
        .map(|_| sample_wiener_increments(sub, 1, r).map(|v| v[0]).unwrap_or(0.0))
        .sum()
}

fn intensity_of(p: &DerivedParams, xi: C64) -> f64 {
    p.params.count_rate * p.params.beta.norm_sqr() * xi.norm_sqr()
}

/// What to keep from a simulated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOptions {
    /// Keep every `stride`-th grid point; output increments are summed over the stride.
    pub stride: usize,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self { stride: 1 }
    }
}

/// Sampled history of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub mode: Mode,
    pub dt: f64,
    pub times: Vec<f64>,
    pub xi: Vec<C64>,
    pub laser: Vec<C64>,
    pub local_osc: Vec<C64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Output increments of channel 1 accumulated between kept points.
    pub output1: Vec<f64>,
    pub output2: Vec<f64>,
    pub log_weight: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub absorbed: bool,
    pub history_truncated: bool,
}

/// Runs one trajectory to `horizon` and records it.
pub fn simulate_trajectory(
    p: &DerivedParams,
    horizon: f64,
    dt: f64,
    mode: Mode,
    seed: TrajectorySeed,
    opts: RecordOptions,
) -> Result<TrajectoryRecord> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid("horizon must be positive"));
    }
    if opts.stride == 0 {
        return Err(invalid("record stride must be at least 1"));
    }
    let mut sim = OscillatorSimulator::new(p, dt, mode, seed)?;
    let steps = (horizon / dt).round() as usize;
    let cap = steps / opts.stride + 1;
    let mut rec = TrajectoryRecord {
        mode,
        dt,
        times: Vec::with_capacity(cap),
        xi: Vec::with_capacity(cap),
        laser: Vec::with_capacity(cap),
        local_osc: Vec::with_capacity(cap),
        m1: Vec::with_capacity(cap),
        m2: Vec::with_capacity(cap),
        intensity: Vec::with_capacity(cap),
        output1: Vec::with_capacity(cap),
        output2: Vec::with_capacity(cap),
        log_weight: Vec::with_capacity(cap),
        jump_times: Vec::new(),
        absorbed: false,
        history_truncated: false,
    };
    let push = |rec: &mut TrajectoryRecord, sim: &OscillatorSimulator, o1: f64, o2: f64| {
        rec.times.push(sim.time());
        rec.xi.push(sim.xi());
        rec.laser.push(sim.laser_value());
        rec.local_osc.push(sim.local_osc_value());
        rec.m1.push(sim.m1());
        rec.m2.push(sim.m2());
        rec.intensity.push(sim.intensity());
        rec.output1.push(o1);
        rec.output2.push(o2);
        rec.log_weight.push(if mode == Mode::Reference { sim.log_weight() } else { 0.0 });
    };
    push(&mut rec, &sim, 0.0, 0.0);
    let (mut acc1, mut acc2) = (0.0, 0.0);
    for n in 1..=steps {
        let snap = sim.step();
        acc1 += snap.out1;
        acc2 += snap.out2;
        rec.jump_times.extend_from_slice(sim.last_jumps());
        if n % opts.stride == 0 {
            push(&mut rec, &sim, acc1, acc2);
            acc1 = 0.0;
            acc2 = 0.0;
        }
    }
    rec.absorbed = sim.absorbed();
    rec.history_truncated = sim.tabulated_history_truncated();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ColoredChannelSpec, LaserSpec, LocalOscillatorSpec};
    use crate::oscillator::{derive_params, OscillatorParams};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn base() -> OscillatorParams {
        OscillatorParams {
            mode_frequency: 1.0,
            alpha1: c(0.5, 0.0),
            alpha2: c(0.5, 0.0),
            beta: c(1.0, 0.0),
            count_rate: 0.5,
            local_oscillator: LocalOscillatorSpec::Heterodyne {
                frequency: 1.0,
                linewidth: 0.1,
                phase: 0.0,
            },
            ..Default::default()
        }
    }

    #[test]
    fn free_decay_is_exact() {
        let p = derive_params(&OscillatorParams {
            initial_amplitude: c(0.7, -0.2),
            ..base()
        })
        .unwrap();
        let mut sim = OscillatorSimulator::new(&p, 0.01, Mode::Reference, TrajectorySeed::new(1, 0)).unwrap();
        for _ in 0..500 {
            sim.step();
        }
        let want = (-p.relax() * sim.time()).exp() * c(0.7, -0.2);
        assert!((sim.xi() - want).norm() < 1e-12);
    }

    #[test]
    fn quiet_model_stays_at_vacuum() {
        let p = derive_params(&base()).unwrap();
        let mut sim = OscillatorSimulator::new(&p, 0.01, Mode::Reference, TrajectorySeed::new(2, 0)).unwrap();
        for _ in 0..300 {
            let s = sim.step();
            assert_eq!(s.xi, c(0.0, 0.0));
            assert_eq!((s.m1, s.m2, s.intensity), (0.0, 0.0, 0.0));
            assert!(s.jumps == 0 || s.absorbed);
        }
    }

    #[test]
    fn closed_count_channel_never_jumps() {
        let p = derive_params(&OscillatorParams {
            count_rate: 0.0,
            laser: LaserSpec {
                amplitude: c(0.5, 0.0),
                frequency: 1.0,
                bandwidth: 0.1,
            },
            ..base()
        })
        .unwrap();
        for mode in [Mode::Reference, Mode::Physical] {
            let rec = simulate_trajectory(&p, 20.0, 0.01, mode, TrajectorySeed::new(3, 0), RecordOptions::default()).unwrap();
            assert!(rec.jump_times.is_empty());
        }
    }

    #[test]
    fn modes_share_driving_paths() {
        let p = derive_params(&OscillatorParams {
            laser: LaserSpec {
                amplitude: c(0.3, 0.0),
                frequency: 1.0,
                bandwidth: 0.05,
            },
            channels: vec![ColoredChannelSpec::exponential(c(0.0, 0.0), c(0.2, 0.0), 0.3, 1.0)],
            ..base()
        })
        .unwrap();
        let seed = TrajectorySeed::new(4, 7);
        let r = simulate_trajectory(&p, 5.0, 0.01, Mode::Reference, seed, RecordOptions::default()).unwrap();
        let q = simulate_trajectory(&p, 5.0, 0.01, Mode::Physical, seed, RecordOptions::default()).unwrap();
        assert_eq!(r.xi, q.xi);
        assert_eq!(r.laser, q.laser);
        assert_eq!(r.local_osc, q.local_osc);
    }

    #[test]
    fn amplitude_decomposition_closes() {
        let p = derive_params(&OscillatorParams {
            initial_amplitude: c(0.2, 0.1),
            laser: LaserSpec {
                amplitude: c(0.3, 0.0),
                frequency: 1.2,
                bandwidth: 0.05,
            },
            channels: vec![
                ColoredChannelSpec::exponential(c(0.1, 0.0), c(0.2, 0.1), 0.3, 0.8),
                ColoredChannelSpec::white(c(0.0, 0.3)),
            ],
            ..base()
        })
        .unwrap();
        let dt = 1e-3;
        let mut sim = OscillatorSimulator::new(&p, dt, Mode::Physical, TrajectorySeed::new(5, 0)).unwrap();
        let i = c(0.0, 1.0);
        let relax = p.relax();
        let decay = (-relax * dt).exp();
        // Direct recursion on ξ alone, and an Euler solution of dξ on the same increments.
        let mut direct = p.params.initial_amplitude;
        let mut euler = direct;
        let mut u_y = c(0.0, 0.0);
        let mut worst_euler: f64 = 0.0;
        for _ in 0..5000 {
            let f0 = sim.laser_value();
            let snap = sim.step();
            let gain = p.params.alpha2 * ((-i * p.params.laser.frequency * dt).exp() - decay)
                / (relax - i * p.params.laser.frequency);
            let du = sim.environment_part() - decay * u_y;
            u_y = sim.environment_part();
            direct = decay * direct - i * gain * f0 - i * du;
            euler += -relax * euler * dt - i * (p.params.alpha2 * f0 * dt + snap.dy);
            assert!((direct - sim.xi()).norm() < 1e-12);
            worst_euler = worst_euler.max((euler - sim.xi()).norm());
        }
        assert!(worst_euler < 5e-3, "{worst_euler}");
    }

    #[test]
    fn invalid_horizon_rejected() {
        let p = derive_params(&base()).unwrap();
        assert!(simulate_trajectory(&p, 0.0, 0.01, Mode::Reference, TrajectorySeed::new(0, 0), RecordOptions::default()).is_err());
    }
}
