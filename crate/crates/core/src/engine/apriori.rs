use crate::error::{invalid, Result};
use crate::fock::{DensityMatrix, C64};
use nalgebra::DMatrix;

/// One trajectory's contribution: its unit-trace state and, for reference-law
/// ensembles, its log-weight `ln p`.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub state: DensityMatrix,
    pub log_weight: Option<f64>,
}

/// Ensemble estimate of the mean state.
#[derive(Debug, Clone)]
pub struct AprioriEstimate {
    pub mean: DensityMatrix,
    /// Standard errors of the real and imaginary parts, elementwise.
    pub se_re: DMatrix<f64>,
    pub se_im: DMatrix<f64>,
    /// Kish effective sample size (equals the count when unweighted).
    pub effective_size: f64,
    /// Set when `effective_size` fell below the requested floor.
    pub low_effective_size: bool,
}

/// Mean state from an ensemble: `E_Q[p ρ]` when log-weights are present,
/// otherwise the plain average.
pub fn estimate_apriori_state(members: &[EnsembleMember], ess_floor: f64) -> Result<AprioriEstimate> {
    if members.len() < 2 {
        return Err(invalid("need at least two trajectories"));
    }
    let d = members[0].state.dim();
    if members.iter().any(|m| m.state.dim() != d) {
        return Err(invalid("ensemble members have different dimensions"));
    }
    let weighted = members.iter().any(|m| m.log_weight.is_some());
    let w: Vec<f64> = members
        .iter()
        .map(|m| if weighted { m.log_weight.unwrap_or(0.0).exp() } else { 1.0 })
        .collect();
    let n = members.len() as f64;
    let mut sum = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    let mut sq_re = DMatrix::from_element(d, d, 0.0);
    let mut sq_im = DMatrix::from_element(d, d, 0.0);
    for (m, wi) in members.iter().zip(&w) {
        let x = &m.state.0 * C64::new(*wi, 0.0);
        for (k, z) in x.iter().enumerate() {
            sq_re[k] += z.re * z.re;
            sq_im[k] += z.im * z.im;
        }
        sum += x;
    }
    let mean = sum / C64::new(n, 0.0);
    let se = |sq: &DMatrix<f64>, part: fn(&C64) -> f64| {
        DMatrix::from_fn(d, d, |i, j| {
            let mu = part(&mean[(i, j)]);
            let var = (sq[(i, j)] / n - mu * mu).max(0.0) * n / (n - 1.0);
            (var / n).sqrt()
        })
    };
    let se_re = se(&sq_re, |z| z.re);
    let se_im = se(&sq_im, |z| z.im);
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let effective_size = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    Ok(AprioriEstimate {
        mean: DensityMatrix(mean),
        se_re,
        se_im,
        effective_size,
        low_effective_size: effective_size < ess_floor,
    })
}
