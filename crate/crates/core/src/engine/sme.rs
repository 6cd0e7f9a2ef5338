use super::{split_increments, thinning_accepts, ChannelSet, OperatorProcess, StepNoise, MAX_HALVINGS, THINNING_FLOOR, THINNING_SAFETY};
use crate::error::{invalid, Error, Result};
use crate::fock::{apply_liouvillian, DensityMatrix, Lindblad, C64};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmeMode {
    /// `dσ = L[σ]dt + Σ(Lσ + σL†)dB + Σ(RσR† − σ)(dN − i dt)` under the reference law.
    Linear,
    /// Trace-preserving filter equation under the physical law.
    Nonlinear,
}

fn liouvillian(set: &ChannelSet, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let mut lind: Vec<Lindblad> = set
        .diffusive
        .iter()
        .map(|l| Lindblad { op: l.clone(), rate: 1.0 })
        .collect();
    lind.extend(set.counting.iter().map(|c| Lindblad {
        op: c.op.clone(),
        rate: c.intensity,
    }));
    apply_liouvillian(&set.hamiltonian, &lind, rho)
}

/// One Euler–Maruyama step of the linear or nonlinear SME.
///
/// In nonlinear mode `noise.diffusive` are the physical-law innovations dW
/// and `noise.counts` the observed jumps; the state is renormalized to unit
/// trace. Jumps are applied after the continuous part, matching the SSE step.
pub fn step_sme(rho: &DensityMatrix, set: &ChannelSet, mode: SmeMode, dt: f64, noise: &StepNoise) -> Result<DensityMatrix> {
    if noise.diffusive.len() != set.diffusive.len() || noise.counts.len() != set.counting.len() {
        return Err(invalid("noise increments do not match channel counts"));
    }
    let s = &rho.0;
    let mut next = s + liouvillian(set, rho)?.0 * C64::new(dt, 0.0);
    let trace = rho.trace().re;
    for (l, db) in set.diffusive.iter().zip(&noise.diffusive) {
        let mut term = &l.0 * s + s * l.0.adjoint();
        if mode == SmeMode::Nonlinear {
            let m = 2.0 * rho.expect(l).re / trace;
            term -= s * C64::new(m, 0.0);
        }
        next += term * C64::new(*db, 0.0);
    }
    for c in &set.counting {
        let rr = c.op.0.adjoint() * &c.op.0;
        match mode {
            // −(RσR† − σ) i dt
            SmeMode::Linear => {
                let jump = &c.op.0 * s * c.op.0.adjoint();
                next -= (jump - s) * C64::new(c.intensity * dt, 0.0);
            }
            // −(RρR†/Tr(R†Rρ) − ρ) j dt = −(i RρR† − jρ) dt
            SmeMode::Nonlinear => {
                let j = c.intensity * (&rr * s).trace().re / trace;
                let jump = &c.op.0 * s * c.op.0.adjoint();
                next -= (jump * C64::new(c.intensity, 0.0) - s * C64::new(j, 0.0)) * C64::new(dt, 0.0);
            }
        }
    }
    for (c, &n) in set.counting.iter().zip(&noise.counts) {
        for _ in 0..n {
            next = &c.op.0 * next * c.op.0.adjoint();
            if mode == SmeMode::Nonlinear {
                let tr = next.trace().re;
                if !(tr > 0.0) {
                    return Err(Error::NumericalDegeneracy("jump denominator Tr(R†Rρ) vanished".into()));
                }
                next /= C64::new(tr, 0.0);
            }
        }
    }
    let mut out = DensityMatrix(next);
    out.symmetrize();
    if mode == SmeMode::Nonlinear {
        let tr = out.trace().re;
        if !(tr > 0.0) {
            return Err(Error::NumericalDegeneracy("trace collapsed in nonlinear SME".into()));
        }
        out.0 /= C64::new(tr, 0.0);
    }
    Ok(out)
}

fn intensities(rho: &DensityMatrix, set: &ChannelSet) -> Vec<f64> {
    let tr = rho.trace().re;
    set.counting
        .iter()
        .map(|c| c.intensity * (c.op.0.adjoint() * &c.op.0 * &rho.0).trace().re / tr)
        .collect()
}

/// Advances the nonlinear SME over one base step, sampling jumps by thinning
/// and halving the step when the end-of-step intensity exceeds its bound.
/// Returns the number of jumps per channel.
pub fn integrate_nonlinear_sme<P, R>(
    rho: &mut DensityMatrix,
    process: &mut P,
    t: f64,
    dt: f64,
    dw: &[f64],
    bridge: &mut R,
    thinning: &mut R,
) -> Result<Vec<u32>>
where
    P: OperatorProcess + ?Sized,
    R: Rng + ?Sized,
{
    #[allow(clippy::too_many_arguments)]
    fn go<P, R>(
        rho: &mut DensityMatrix,
        process: &mut P,
        t: f64,
        dt: f64,
        dw: &[f64],
        depth: u32,
        bridge: &mut R,
        thinning: &mut R,
        counts: &mut [u32],
    ) -> Result<()>
    where
        P: OperatorProcess + ?Sized,
        R: Rng + ?Sized,
    {
        let set = process.channels(t);
        let j0 = intensities(rho, &set);
        let bounds: Vec<f64> = j0.iter().map(|j| THINNING_SAFETY * j + THINNING_FLOOR).collect();
        let quiet = StepNoise {
            diffusive: dw.to_vec(),
            counts: vec![0; set.counting.len()],
        };
        let cont = step_sme(rho, &set, SmeMode::Nonlinear, dt, &quiet)?;
        let j1 = intensities(&cont, &set);
        let violated = j1
            .iter()
            .zip(&bounds)
            .zip(&set.counting)
            .any(|((j, b), c)| c.intensity > 0.0 && j > b);
        if violated {
            if depth >= MAX_HALVINGS {
                return Err(Error::NumericalDegeneracy(
                    "thinning bound still violated after maximal step halving".into(),
                ));
            }
            let (a, b) = split_increments(dw, dt, bridge);
            go(rho, process, t, dt / 2.0, &a, depth + 1, bridge, thinning, counts)?;
            return go(rho, process, t + dt / 2.0, dt / 2.0, &b, depth + 1, bridge, thinning, counts);
        }
        let mut out = cont;
        for (k, c) in set.counting.iter().enumerate() {
            if c.intensity > 0.0 && thinning_accepts(j0[k], j1[k], bounds[k], dt, thinning) {
                let next = &c.op.0 * &out.0 * c.op.0.adjoint();
                let tr = next.trace().re;
                if !(tr > 0.0) {
                    return Err(Error::NumericalDegeneracy("jump denominator Tr(R†Rρ) vanished".into()));
                }
                out = DensityMatrix(next / C64::new(tr, 0.0));
                out.symmetrize();
                counts[k] += 1;
            }
        }
        *rho = out;
        Ok(())
    }
    let n = process.channels(t).counting.len();
    let mut counts = vec![0; n];
    go(rho, process, t, dt, dw, 0, bridge, thinning, &mut counts)?;
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{step_linear_sse, CountingChannel, WeightedState};
    use crate::fock::{FockOperator, FockVector};
    use crate::noise::{sample_reference_count, sample_wiener_increments};
    use crate::rng::stream;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn model(d: usize) -> ChannelSet {
        let a = FockOperator::annihilation(d);
        ChannelSet {
            hamiltonian: &FockOperator::number(d) + &(&a + &a.adjoint()).scaled(c(0.2, 0.0)),
            diffusive: vec![a.scaled(c(0.0, -0.6)), a.scaled(c(0.3, 0.0))],
            counting: vec![CountingChannel {
                op: a.scaled(c(0.9, 0.0)),
                intensity: 0.8,
            }],
        }
    }

    #[test]
    fn pure_state_linear_sme_matches_sse() {
        let d = 6;
        let set = model(d);
        let v = FockVector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.5), c(0.3, 0.2), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap()
            .normalized()
            .unwrap();
        let mut psi = WeightedState::new(v.clone(), 1).unwrap().with_leakage_cap(1.0);
        let mut sigma = v.projector();
        let dt = 1e-4;
        let mut wr = stream(1, 0, "B");
        let mut nr = stream(1, 0, "N");
        for _ in 0..5000 {
            let noise = StepNoise {
                diffusive: sample_wiener_increments(dt, 2, &mut wr).unwrap(),
                counts: vec![sample_reference_count(0.8, dt, &mut nr).unwrap() as u32],
            };
            step_linear_sse(&mut psi, &set, dt, &noise).unwrap();
            sigma = step_sme(&sigma, &set, SmeMode::Linear, dt, &noise).unwrap();
        }
        let phi = psi.unnormalized();
        let proj = phi.projector();
        let rel = (&proj.0 - &sigma.0).norm() / proj.0.norm();
        assert!(rel < 0.02, "relative mismatch {rel}");
    }

    #[test]
    fn nonlinear_trace_is_one() {
        let d = 5;
        let mut set = model(d);
        let mut rho = FockVector::basis(d, 2).unwrap().projector();
        let mut wr = stream(2, 0, "W");
        let mut br = stream(2, 0, "bridge");
        let mut tr = stream(2, 0, "thin");
        let dt = 1e-3;
        for k in 0..500 {
            let dw = sample_wiener_increments(dt, 2, &mut wr).unwrap();
            integrate_nonlinear_sme(&mut rho, &mut set, k as f64 * dt, dt, &dw, &mut br, &mut tr).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-9);
        }
        let low = rho.eigenvalues()[0];
        assert!(low > -1e-2, "{low}");
    }

    #[test]
    fn unitary_case_preserves_spectrum() {
        let d = 4;
        let a = FockOperator::annihilation(d);
        let set = ChannelSet {
            hamiltonian: &FockOperator::number(d) + &(&a + &a.adjoint()).scaled(c(0.4, 0.0)),
            diffusive: vec![],
            counting: vec![],
        };
        let mut rho = DensityMatrix(
            FockVector::basis(d, 0).unwrap().projector().0 * c(0.7, 0.0)
                + FockVector::basis(d, 1).unwrap().projector().0 * c(0.3, 0.0),
        );
        let before = rho.eigenvalues();
        let quiet = StepNoise::default();
        for _ in 0..2000 {
            rho = step_sme(&rho, &set, SmeMode::Nonlinear, 1e-4, &quiet).unwrap();
        }
        let after = rho.eigenvalues();
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() < 1e-3, "{x} vs {y}");
        }
    }
}
