//! Exact one-step transition of a linear SDE `dz = A z dt + w dB` driven by a
//! single real Wiener process, conditioned on the increment ΔB.
//!
//! The step covariance comes from Van Loan's block exponential. Sampling the
//! part of the transition not explained by ΔB needs an independent auxiliary
//! normal stream.

use crate::error::{invalid, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest state dimension supported by [`GaussStep`].
pub const MAX_STATE: usize = 8;

#[derive(Debug, Clone)]
pub struct GaussStep {
    phi: DMatrix<f64>,
    regress: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussStep {
    pub fn new(drift: &DMatrix<f64>, diffusion: &DVector<f64>, dt: f64) -> Result<Self> {
        let n = drift.nrows();
        if drift.ncols() != n || diffusion.len() != n {
            return Err(invalid("drift/diffusion shape mismatch"));
        }
        if n > MAX_STATE {
            return Err(invalid(format!("linear Gaussian state of dimension {n} exceeds {MAX_STATE}")));
        }
        if !(dt > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        // Augment with B itself so the covariance with ΔB comes out of the
        // same exponential.
        let m = n + 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        a.view_mut((0, 0), (n, n)).copy_from(drift);
        let mut w = DVector::<f64>::zeros(m);
        w.rows_mut(0, n).copy_from(diffusion);
        w[n] = 1.0;

        let mut big = DMatrix::<f64>::zeros(2 * m, 2 * m);
        big.view_mut((0, 0), (m, m)).copy_from(&(-&a * dt));
        big.view_mut((0, m), (m, m)).copy_from(&(&w * w.transpose() * dt));
        big.view_mut((m, m), (m, m)).copy_from(&(a.transpose() * dt));
        let e = big.exp();
        let f12 = e.view((0, m), (m, m)).into_owned();
        let f22 = e.view((m, m), (m, m)).into_owned();
        let phi_aug = f22.transpose();
        let mut sigma = &phi_aug * f12;
        sigma = (&sigma + sigma.transpose()) * 0.5;

        let phi = phi_aug.view((0, 0), (n, n)).into_owned();
        let s_rb = sigma.view((0, n), (n, 1)).column(0).into_owned();
        let s_bb = sigma[(n, n)];
        let regress = &s_rb / s_bb;
        let cond = sigma.view((0, 0), (n, n)).into_owned() - &s_rb * s_rb.transpose() / s_bb;
        let cond = (&cond + cond.transpose()) * 0.5;
        let eig = cond.symmetric_eigen();
        let mut factor = eig.eigenvectors.clone();
        for (j, lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            factor.column_mut(j).scale_mut(s);
        }
        Ok(Self { phi, regress, factor })
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Advances `state` over one step given the driving increment `db`.
    pub fn advance<R: Rng + ?Sized>(&self, state: &mut DVector<f64>, db: f64, aux: &mut R) {
        // Runs once per channel per step in every trajectory; stays allocation free.
        let n = self.dim();
        let mut eta = [0.0; MAX_STATE];
        for e in eta.iter_mut().take(n) {
            *e = aux.sample(StandardNormal);
        }
        let mut next = [0.0; MAX_STATE];
        for (i, out) in next.iter_mut().enumerate().take(n) {
            let mut s = self.regress[i] * db;
            for j in 0..n {
                s += self.phi[(i, j)] * state[j] + self.factor[(i, j)] * eta[j];
            }
            *out = s;
        }
        state.as_mut_slice().copy_from_slice(&next[..n]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_ou_moments() {
        // dz = −k z dt + dB: stationary variance 1/(2k); Cov(Δz-part, ΔB) known.
        let k = 0.8;
        let dt = 0.1;
        let step = GaussStep::new(&DMatrix::from_element(1, 1, -k), &DVector::from_element(1, 1.0), dt).unwrap();
        assert!((step.phi[(0, 0)] - (-k * dt).exp()).abs() < 1e-14);
        // Cov(∫e^{-k(dt-s)}dB, ΔB) = (1 − e^{−k dt})/k.
        let want = (1.0 - (-k * dt).exp()) / k / dt;
        assert!((step.regress[0] - want).abs() < 1e-12);
        // Residual variance: (1−e^{−2k dt})/(2k) − ((1−e^{−k dt})/k)²/dt.
        let var = (1.0 - (-2.0 * k * dt).exp()) / (2.0 * k) - ((1.0 - (-k * dt).exp()) / k).powi(2) / dt;
        assert!((step.factor[(0, 0)].powi(2) - var).abs() < 1e-12);
    }

    #[test]
    fn integrated_brownian_is_exact() {
        // z = (B, ∫B): ΔJ conditional on ΔB has mean B dt + ΔB dt/2 and variance dt³/12.
        let dt = 0.5;
        let drift = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let diff = DVector::from_vec(vec![1.0, 0.0]);
        let step = GaussStep::new(&drift, &diff, dt).unwrap();
        assert!((step.regress[1] - dt / 2.0).abs() < 1e-12);
        let cov = &step.factor * step.factor.transpose();
        assert!((cov[(1, 1)] - dt.powi(3) / 12.0).abs() < 1e-12);
        assert!(cov[(0, 0)].abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = DVector::from_vec(vec![0.3, 0.0]);
        step.advance(&mut s, 0.2, &mut rng);
        assert!((s[0] - 0.5).abs() < 1e-12);
    }
}
