//! Generic integrators for linear and nonlinear stochastic Schrödinger and
//! master equations over user-supplied operator processes.
//!
//! All integrators are Euler–Maruyama in the diffusive part. Linear-mode
//! states are stored normalized together with `ln ‖φ‖²` so long horizons do
//! not underflow.

mod apriori;
mod sme;

pub use apriori::{estimate_apriori_state, AprioriEstimate, EnsembleMember};
pub use sme::{integrate_nonlinear_sme, step_sme, SmeMode};

use crate::error::{invalid, Error, Result};
use crate::fock::{FockOperator, FockVector, C64, DEFAULT_LEAKAGE_CAP};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

/// A jump channel: operator R_k with reference intensity i_k.
#[derive(Debug, Clone)]
pub struct CountingChannel {
    pub op: FockOperator,
    pub intensity: f64,
}

/// Operators of all channels, evaluated at one time.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub hamiltonian: FockOperator,
    pub diffusive: Vec<FockOperator>,
    pub counting: Vec<CountingChannel>,
}

/// Tolerance used when checking that a Hamiltonian is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

impl ChannelSet {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.diffusive.iter().any(|l| l.dim() != d) || self.counting.iter().any(|c| c.op.dim() != d) {
            return Err(invalid("channel operators have mismatched dimensions"));
        }
        if !self.hamiltonian.is_hermitian(HERMITIAN_TOL) {
            return Err(invalid("Hamiltonian is not Hermitian"));
        }
        if let Some(c) = self.counting.iter().find(|c| !(c.intensity >= 0.0)) {
            return Err(invalid(format!("negative reference intensity {}", c.intensity)));
        }
        Ok(())
    }

    pub fn drift(&self) -> Result<FockOperator> {
        build_drift_k(&self.hamiltonian, &self.diffusive, &self.counting)
    }
}

/// `K = −iH − ½ΣL†L + ½Σ i_k(1 − R†R)`.
pub fn build_drift_k(h: &FockOperator, ls: &[FockOperator], counting: &[CountingChannel]) -> Result<FockOperator> {
    if let Some(c) = counting.iter().find(|c| !(c.intensity >= 0.0)) {
        return Err(invalid(format!("negative reference intensity {}", c.intensity)));
    }
    let d = h.dim();
    let mut k = h.scaled(C64::new(0.0, -1.0)).0;
    for l in ls {
        k -= l.0.adjoint() * &l.0 * C64::new(0.5, 0.0);
    }
    let id = FockOperator::identity(d).0;
    for c in counting {
        let rr = c.op.0.adjoint() * &c.op.0;
        k += (&id - rr) * C64::new(0.5 * c.intensity, 0.0);
    }
    Ok(FockOperator(k))
}

/// State carried along a trajectory.
#[derive(Debug, Clone)]
pub struct WeightedState {
    /// Unit vector; the linear-mode norm lives in `log_weight`.
    pub vector: FockVector,
    /// `ln ‖φ‖²` in linear mode; unused (0) in nonlinear mode.
    pub log_weight: f64,
    pub jump_counts: Vec<u64>,
    pub time: f64,
    pub absorbed: bool,
    /// Largest tolerated top-level occupation of the truncated basis.
    pub leakage_cap: f64,
}

impl WeightedState {
    pub fn new(initial: FockVector, counting_channels: usize) -> Result<Self> {
        let n2 = initial.norm_sqr();
        let vector = initial.normalized()?;
        Ok(Self {
            vector,
            log_weight: n2.ln(),
            jump_counts: vec![0; counting_channels],
            time: 0.0,
            absorbed: false,
            leakage_cap: DEFAULT_LEAKAGE_CAP,
        })
    }

    /// Disables or changes the truncation check, e.g. for genuinely
    /// finite-dimensional systems.
    pub fn with_leakage_cap(mut self, cap: f64) -> Self {
        self.leakage_cap = cap;
        self
    }

    /// `p = ‖φ‖²`, zero once absorbed.
    pub fn weight(&self) -> f64 {
        if self.absorbed {
            0.0
        } else {
            self.log_weight.exp()
        }
    }

    /// Unnormalized linear-mode vector φ.
    pub fn unnormalized(&self) -> FockVector {
        let mut v = self.vector.clone();
        v.scale(C64::new(self.weight().sqrt(), 0.0));
        v
    }
}

/// Noise increments of one step.
#[derive(Debug, Clone, Default)]
pub struct StepNoise {
    /// Wiener increments, one per diffusive channel.
    pub diffusive: Vec<f64>,
    /// Jump counts, one per counting channel.
    pub counts: Vec<u32>,
}

/// Underflow threshold for ‖φ‖² relative to the previous step.
const ABSORB_NORM_SQR: f64 = 1e-300;

fn check_leakage(v: &FockVector, cap: f64) -> Result<()> {
    let top = v.top_occupation();
    if top > cap {
        return Err(Error::TruncationOverflow { leakage: top, cap });
    }
    Ok(())
}

/// One Euler–Maruyama step of `dφ = Kφdt + Σ L_iφ dB_i + Σ(R_k − 1)φ dN_k`.
/// Jumps are applied after the continuous part.
pub fn step_linear_sse(state: &mut WeightedState, set: &ChannelSet, dt: f64, noise: &StepNoise) -> Result<()> {
    if state.absorbed {
        state.time += dt;
        return Ok(());
    }
    let k = set.drift()?;
    step_linear_sse_with_drift(state, set, &k, dt, noise)
}

/// [`step_linear_sse`] with the drift operator `K` of `set` supplied by the
/// caller, for models whose `K` is cheap to update between steps.
pub fn step_linear_sse_with_drift(
    state: &mut WeightedState,
    set: &ChannelSet,
    k: &FockOperator,
    dt: f64,
    noise: &StepNoise,
) -> Result<()> {
    if state.absorbed {
        state.time += dt;
        return Ok(());
    }
    if noise.diffusive.len() != set.diffusive.len() || noise.counts.len() != set.counting.len() {
        return Err(invalid("noise increments do not match channel counts"));
    }
    if k.dim() != state.vector.dim() {
        return Err(invalid("drift dimension does not match state"));
    }
    let phi = state.vector.amplitudes();
    let mut next = phi + &k.0 * phi * C64::new(dt, 0.0);
    for (l, db) in set.diffusive.iter().zip(&noise.diffusive) {
        next += &l.0 * phi * C64::new(*db, 0.0);
    }
    for (c, &n) in set.counting.iter().zip(&noise.counts) {
        for _ in 0..n {
            next = &c.op.0 * next;
        }
    }
    for (count, &n) in state.jump_counts.iter_mut().zip(&noise.counts) {
        *count += n as u64;
    }
    state.time += dt;
    let v = FockVector::from_dvector(next, state.vector.leakage());
    let n2 = v.norm_sqr();
    if !(n2 > ABSORB_NORM_SQR) || !n2.is_finite() {
        state.absorbed = true;
        state.log_weight = f64::NEG_INFINITY;
        return Ok(());
    }
    check_leakage(&v, state.leakage_cap)?;
    state.log_weight += n2.ln();
    state.vector = v.normalized()?;
    Ok(())
}

/// Diffusive signals `m_i = 2Re⟨ψ|L_iψ⟩`.
pub fn diffusive_signals(psi: &FockVector, set: &ChannelSet) -> Vec<f64> {
    set.diffusive.iter().map(|l| 2.0 * psi.expect(l).re).collect()
}

/// Physical intensities `j_k = i_k ‖R_kψ‖²`.
pub fn jump_intensities(psi: &FockVector, set: &ChannelSet) -> Vec<f64> {
    set.counting
        .iter()
        .map(|c| c.intensity * c.op.apply(psi).norm_sqr())
        .collect()
}

/// Continuous part of the nonlinear SSE step; returns the renormalized vector.
fn nonlinear_continuous(psi: &FockVector, set: &ChannelSet, dt: f64, dw: &[f64], cap: f64) -> Result<FockVector> {
    let m = diffusive_signals(psi, set);
    let j = jump_intensities(psi, set);
    let k = set.drift()?;
    let a = psi.amplitudes();
    let m2: f64 = m.iter().map(|x| x * x).sum();
    let jump_shift: f64 = set.counting.iter().zip(&j).map(|(c, jk)| jk - c.intensity).sum();
    let mut drift = &k.0 * a + a * C64::new(-m2 / 8.0 + 0.5 * jump_shift, 0.0);
    for (l, mi) in set.diffusive.iter().zip(&m) {
        drift += &l.0 * a * C64::new(0.5 * mi, 0.0);
    }
    let mut next = a + drift * C64::new(dt, 0.0);
    for ((l, mi), w) in set.diffusive.iter().zip(&m).zip(dw) {
        next += (&l.0 * a - a * C64::new(0.5 * mi, 0.0)) * C64::new(*w, 0.0);
    }
    let v = FockVector::from_dvector(next, psi.leakage());
    check_leakage(&v, cap)?;
    v.normalized()
}

/// Outcome of an attempted nonlinear step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Accepted { jumps: Vec<bool> },
    /// The end-of-step intensity exceeded the thinning bound; retry with a smaller step.
    Rejected,
}

/// Safety factor on the local thinning bound.
pub const THINNING_SAFETY: f64 = 1.5;
/// Additive floor on the thinning bound so channels with j = 0 can still fire
/// if their intensity grows during the step.
pub const THINNING_FLOOR: f64 = 1e-3;

/// One thinning decision on `[0, dt]` for an intensity interpolated linearly
/// from `j0` to `j1` under the bound `bound`. At most one jump is accepted.
pub fn thinning_accepts<R: Rng + ?Sized>(j0: f64, j1: f64, bound: f64, dt: f64, rng: &mut R) -> bool {
    if bound <= 0.0 {
        return false;
    }
    let mut tau = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        tau += e / bound;
        if tau >= dt {
            return false;
        }
        let j = j0 + (j1 - j0) * tau / dt;
        let u: f64 = rng.random();
        if u * bound < j {
            return true;
        }
    }
}

/// One step of the nonlinear SSE with thinning-sampled jumps.
pub fn step_nonlinear_sse<R: Rng + ?Sized>(
    state: &mut WeightedState,
    set: &ChannelSet,
    dt: f64,
    dw: &[f64],
    thinning: &mut R,
) -> Result<StepOutcome> {
    if dw.len() != set.diffusive.len() {
        return Err(invalid("noise increments do not match channel counts"));
    }
    let j0 = jump_intensities(&state.vector, set);
    let bounds: Vec<f64> = j0.iter().map(|j| THINNING_SAFETY * j + THINNING_FLOOR).collect();
    let mut next = nonlinear_continuous(&state.vector, set, dt, dw, state.leakage_cap)?;
    let j1 = jump_intensities(&next, set);
    if j1.iter().zip(&bounds).zip(&set.counting).any(|((j, b), c)| c.intensity > 0.0 && j > b) {
        return Ok(StepOutcome::Rejected);
    }
    let mut jumps = vec![false; set.counting.len()];
    for (k, c) in set.counting.iter().enumerate() {
        if c.intensity == 0.0 {
            continue;
        }
        if thinning_accepts(j0[k], j1[k], bounds[k], dt, thinning) {
            let jumped = c.op.apply(&next);
            if jumped.norm_sqr() == 0.0 {
                return Err(Error::NumericalDegeneracy(format!(
                    "accepted jump on channel {k} maps the state to zero"
                )));
            }
            next = jumped.normalized()?;
            jumps[k] = true;
            state.jump_counts[k] += 1;
        }
    }
    state.vector = next;
    state.time += dt;
    Ok(StepOutcome::Accepted { jumps })
}

/// Source of operators along a trajectory.
pub trait OperatorProcess {
    fn channels(&mut self, t: f64) -> ChannelSet;
}

/// A fixed channel set.
impl OperatorProcess for ChannelSet {
    fn channels(&mut self, _t: f64) -> ChannelSet {
        self.clone()
    }
}

/// Maximum number of step halvings before giving up.
pub const MAX_HALVINGS: u32 = 20;

/// Advances `state` over one base step `dt` with increments `dw`, halving on
/// thinning-bound violations. Halved increments come from a Brownian bridge.
pub fn advance_nonlinear_sse<P, R>(
    state: &mut WeightedState,
    process: &mut P,
    dt: f64,
    dw: &[f64],
    bridge: &mut R,
    thinning: &mut R,
) -> Result<u32>
where
    P: OperatorProcess + ?Sized,
    R: Rng + ?Sized,
{
    fn go<P, R>(
        state: &mut WeightedState,
        process: &mut P,
        dt: f64,
        dw: &[f64],
        depth: u32,
        bridge: &mut R,
        thinning: &mut R,
    ) -> Result<u32>
    where
        P: OperatorProcess + ?Sized,
        R: Rng + ?Sized,
    {
        let set = process.channels(state.time);
        match step_nonlinear_sse(state, &set, dt, dw, thinning)? {
            StepOutcome::Accepted { .. } => Ok(0),
            StepOutcome::Rejected if depth >= MAX_HALVINGS => Err(Error::NumericalDegeneracy(
                "thinning bound still violated after maximal step halving".into(),
            )),
            StepOutcome::Rejected => {
                let (first, second) = split_increments(dw, dt, bridge);
                let a = go(state, process, dt / 2.0, &first, depth + 1, bridge, thinning)?;
                let b = go(state, process, dt / 2.0, &second, depth + 1, bridge, thinning)?;
                Ok(1 + a + b)
            }
        }
    }
    go(state, process, dt, dw, 0, bridge, thinning)
}

/// Brownian-bridge split of increments over `dt` into two halves.
pub fn split_increments<R: Rng + ?Sized>(dw: &[f64], dt: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let s = (dt / 4.0).sqrt();
    let first: Vec<f64> = dw
        .iter()
        .map(|w| {
            let z: f64 = rng.sample(StandardNormal);
            0.5 * w + s * z
        })
        .collect();
    let second = dw.iter().zip(&first).map(|(w, a)| w - a).collect();
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockOperator;
    use crate::noise::{sample_reference_count, sample_wiener_increments};
    use crate::rng::stream;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag(v: &[f64]) -> DMatrix<C64> {
        DMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { c(v[i], 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn drift_examples() {
        let a = FockOperator::annihilation(2);
        let h = FockOperator::zeros(2);
        let k = build_drift_k(&h, &[a.clone()], &[]).unwrap();
        assert!((k.0 - diag(&[0.0, -0.5])).norm() < 1e-15);
        let r = CountingChannel { op: a.clone(), intensity: 2.0 };
        let k = build_drift_k(&h, &[a.clone()], &[r]).unwrap();
        assert!((k.0 - diag(&[1.0, -0.5])).norm() < 1e-15);
        let bad = CountingChannel { op: a, intensity: -1.0 };
        assert!(build_drift_k(&h, &[], &[bad]).is_err());
    }

    #[test]
    fn trivial_linear_step_keeps_state() {
        let set = ChannelSet {
            hamiltonian: FockOperator::zeros(3),
            diffusive: vec![FockOperator::zeros(3)],
            counting: vec![],
        };
        let v = FockVector::basis(3, 1).unwrap();
        let mut s = WeightedState::new(v.clone(), 0).unwrap();
        let noise = StepNoise {
            diffusive: vec![0.4],
            counts: vec![],
        };
        step_linear_sse(&mut s, &set, 0.1, &noise).unwrap();
        assert_eq!(s.vector, v);
        assert_eq!(s.log_weight, 0.0);
    }

    #[test]
    fn single_jump_applies_operator() {
        let a = FockOperator::annihilation(4);
        let set = ChannelSet {
            hamiltonian: FockOperator::zeros(4),
            diffusive: vec![],
            counting: vec![CountingChannel {
                op: a.clone(),
                intensity: 0.0,
            }],
        };
        let v = FockVector::basis(4, 2).unwrap();
        let mut s = WeightedState::new(v.clone(), 1).unwrap();
        let noise = StepNoise {
            diffusive: vec![],
            counts: vec![1],
        };
        step_linear_sse(&mut s, &set, 1e-3, &noise).unwrap();
        let want = a.apply(&v);
        assert!((s.unnormalized().amplitudes() - want.amplitudes()).norm() < 1e-12);
        assert_eq!(s.jump_counts, vec![1]);
    }

    #[test]
    fn jump_to_zero_absorbs() {
        let a = FockOperator::annihilation(3);
        let set = ChannelSet {
            hamiltonian: FockOperator::zeros(3),
            diffusive: vec![],
            counting: vec![CountingChannel { op: a, intensity: 1.0 }],
        };
        let mut s = WeightedState::new(FockVector::basis(3, 0).unwrap(), 1).unwrap();
        let noise = StepNoise {
            diffusive: vec![],
            counts: vec![1],
        };
        step_linear_sse(&mut s, &set, 1e-3, &noise).unwrap();
        assert!(s.absorbed);
        assert_eq!(s.weight(), 0.0);
    }

    #[test]
    fn self_adjoint_il_gives_zero_signal() {
        // L = i·X with X Hermitian.
        let d = 5;
        let a = FockOperator::annihilation(d);
        let x = &a + &a.adjoint();
        let l = x.scaled(c(0.0, 1.0));
        let set = ChannelSet {
            hamiltonian: FockOperator::number(d),
            diffusive: vec![l],
            counting: vec![],
        };
        let mut s = WeightedState::new(FockVector::basis(d, 1).unwrap(), 0).unwrap().with_leakage_cap(1.0);
        let mut rng = stream(1, 0, "W");
        let mut thin = stream(1, 0, "T");
        for _ in 0..200 {
            let dw = sample_wiener_increments(1e-3, 1, &mut rng).unwrap();
            assert!(diffusive_signals(&s.vector, &set)[0].abs() < 1e-12);
            let out = step_nonlinear_sse(&mut s, &set, 1e-3, &dw, &mut thin).unwrap();
            assert!(matches!(out, StepOutcome::Accepted { .. }));
            assert!((s.vector.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn thinning_rate_matches_intensity() {
        let mut rng = stream(2, 0, "T");
        let n = 200_000;
        let hits = (0..n).filter(|_| thinning_accepts(2.0, 2.0, 3.0, 0.01, &mut rng)).count();
        let p = 1.0 - (-0.02f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn linear_martingale_small_system() {
        // Two-level decay with a diffusive channel and a counting channel.
        let d = 3;
        let a = FockOperator::annihilation(d);
        let set = ChannelSet {
            hamiltonian: &FockOperator::number(d) + &(&a + &a.adjoint()).scaled(c(0.3, 0.0)),
            diffusive: vec![a.scaled(c(0.5, 0.2))],
            counting: vec![CountingChannel {
                op: a.scaled(c(0.8, 0.0)),
                intensity: 1.0,
            }],
        };
        let dt = 2e-3;
        let steps = 500;
        let n = 4000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for traj in 0..n {
            let mut s = WeightedState::new(FockVector::basis(d, 1).unwrap(), 1).unwrap().with_leakage_cap(1.0);
            let mut wr = stream(3, traj, "B");
            let mut nr = stream(3, traj, "N");
            for _ in 0..steps {
                let noise = StepNoise {
                    diffusive: sample_wiener_increments(dt, 1, &mut wr).unwrap(),
                    counts: vec![sample_reference_count(1.0, dt, &mut nr).unwrap() as u32],
                };
                step_linear_sse(&mut s, &set, dt, &noise).unwrap();
            }
            let w = s.weight();
            sum += w;
            sum2 += w * w;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se + 5e-3, "mean {mean} se {se}");
    }
}
