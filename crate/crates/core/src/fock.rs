//! Dense linear algebra on a truncated boson number basis `|0⟩ … |dim−1⟩`.

use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Default cap on weight lost through the top of the basis.
pub const DEFAULT_LEAKAGE_CAP: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A state vector with a running estimate of norm² lost to truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: DVector<C64>,
    leakage: f64,
}

impl FockVector {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            amps: DVector::from_element(dim, ZERO),
            leakage: 0.0,
        })
    }

    /// Number state `|n⟩`.
    pub fn basis(dim: usize, n: usize) -> Result<Self> {
        let mut v = Self::zeros(dim)?;
        if n >= dim {
            return Err(invalid(format!("basis index {n} outside dimension {dim}")));
        }
        v.amps[n] = ONE;
        Ok(v)
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(invalid("non-finite amplitude"));
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
            leakage: 0.0,
        })
    }

    pub(crate) fn from_dvector(amps: DVector<C64>, leakage: f64) -> Self {
        Self { amps, leakage }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩, antilinear in `self`.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn scale(&mut self, s: C64) {
        self.amps *= s;
    }

    /// Occupation of the top basis level relative to the total norm².
    pub fn top_occupation(&self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return 0.0;
        }
        self.amps[self.dim() - 1].norm_sqr() / n2
    }

    /// Returns `self/‖self‖`; a zero vector is an error.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NumericalDegeneracy("cannot normalize zero vector".into()));
        }
        let mut out = self.clone();
        out.amps /= C64::new(n, 0.0);
        Ok(out)
    }

    /// Outer product `|self⟩⟨self|`.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(&self.amps * self.amps.adjoint())
    }

    /// Expectation ⟨self|A|self⟩.
    pub fn expect(&self, op: &FockOperator) -> C64 {
        self.amps.dotc(&(&op.0 * &self.amps))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

/// Coherent vector e(ξ) truncated to `dim`, rejecting truncations that lose
/// more than `cap` of the norm².
pub fn make_coherent_vector_capped(xi: C64, dim: usize, cap: f64) -> Result<FockVector> {
    check_dim(dim)?;
    let r2 = xi.norm_sqr();
    let mut amps = Vec::with_capacity(dim);
    let mut a = C64::new((-0.5 * r2).exp(), 0.0);
    amps.push(a);
    for n in 1..dim {
        a = a * xi / (n as f64).sqrt();
        amps.push(a);
    }
    // Poisson tail Σ_{n≥dim} e^{-r2} r2^n/n!, summed forward from the last term.
    let mut term = amps[dim - 1].norm_sqr();
    let mut tail = 0.0;
    let mut n = dim;
    loop {
        term *= r2 / n as f64;
        tail += term;
        n += 1;
        if term <= tail * 1e-17 || term == 0.0 || n > dim + 100_000 {
            break;
        }
    }
    if tail > cap {
        return Err(Error::TruncationOverflow { leakage: tail, cap });
    }
    Ok(FockVector {
        amps: DVector::from_vec(amps),
        leakage: tail,
    })
}

/// Coherent vector with the default leakage cap.
pub fn make_coherent_vector(xi: C64, dim: usize) -> Result<FockVector> {
    make_coherent_vector_capped(xi, dim, DEFAULT_LEAKAGE_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Annihilate,
    Create,
}

/// Applies `a` or `a†` directly on amplitudes. Weight pushed past the top
/// level by `a†` is added to the leakage estimate.
pub fn apply_ladder(kind: Ladder, v: &FockVector) -> FockVector {
    let dim = v.dim();
    let mut out = DVector::from_element(dim, ZERO);
    let mut leakage = v.leakage;
    match kind {
        Ladder::Annihilate => {
            for n in 0..dim - 1 {
                out[n] = v.amps[n + 1] * ((n + 1) as f64).sqrt();
            }
        }
        Ladder::Create => {
            for n in 1..dim {
                out[n] = v.amps[n - 1] * (n as f64).sqrt();
            }
            leakage += v.amps[dim - 1].norm_sqr() * dim as f64;
        }
    }
    FockVector { amps: out, leakage }
}

/// Square complex matrix acting on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator(pub DMatrix<C64>);

impl FockOperator {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::from_element(dim, dim, ZERO))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn annihilation(dim: usize) -> Self {
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for n in 1..dim {
            m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        Self(m)
    }

    pub fn creation(dim: usize) -> Self {
        Self::annihilation(dim).adjoint()
    }

    pub fn number(dim: usize) -> Self {
        Self(DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        FockVector {
            amps: &self.0 * &v.amps,
            leakage: v.leakage,
        }
    }

    /// Largest |A − A†| entry.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }
}

impl std::ops::Add for &FockOperator {
    type Output = FockOperator;
    fn add(self, rhs: &FockOperator) -> FockOperator {
        FockOperator(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &FockOperator {
    type Output = FockOperator;
    fn sub(self, rhs: &FockOperator) -> FockOperator {
        FockOperator(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        FockOperator(&self.0 * &rhs.0)
    }
}

/// Hermitian matrix representing a (possibly unnormalized) state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub DMatrix<C64>);

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::from_element(dim, dim, ZERO))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Replaces the matrix by `(ρ + ρ†)/2`.
    pub fn symmetrize(&mut self) {
        let adj = self.0.adjoint();
        self.0 = (&self.0 + adj) * C64::new(0.5, 0.0);
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let adj = self.0.adjoint();
        let h = (&self.0 + adj) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Tr(Aρ).
    pub fn expect(&self, op: &FockOperator) -> C64 {
        (&op.0 * &self.0).trace()
    }
}

/// A dissipator term: Lindblad operator with a nonnegative rate.
#[derive(Debug, Clone)]
pub struct Lindblad {
    pub op: FockOperator,
    pub rate: f64,
}

/// `−i[H,ρ] + Σ rate (LρL† − ½{L†L,ρ})`.
pub fn apply_liouvillian(h: &FockOperator, lindblads: &[Lindblad], rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if h.dim() != dim || lindblads.iter().any(|l| l.op.dim() != dim) {
        return Err(invalid("operator and state dimensions differ"));
    }
    if let Some(l) = lindblads.iter().find(|l| !(l.rate >= 0.0)) {
        return Err(invalid(format!("negative dissipation rate {}", l.rate)));
    }
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (&h.0 * &rho.0 - &rho.0 * &h.0) * minus_i;
    for l in lindblads {
        let ldag = l.op.0.adjoint();
        let ldl = &ldag * &l.op.0;
        let jump = &l.op.0 * &rho.0 * &ldag;
        let anti = &ldl * &rho.0 + &rho.0 * &ldl;
        out += (jump - anti * C64::new(0.5, 0.0)) * C64::new(l.rate, 0.0);
    }
    Ok(DensityMatrix(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_coherent() {
        let v = make_coherent_vector(c(0.0, 0.0), 4).unwrap();
        assert_eq!(v.amplitudes()[0], ONE);
        assert!(v.amplitudes().iter().skip(1).all(|a| *a == ZERO));
        assert_eq!(v.leakage(), 0.0);
    }

    #[test]
    fn coherent_norm_matches_brute_force_series() {
        let xi = c(0.5, 0.0);
        let v = make_coherent_vector(xi, 16).unwrap();
        // Brute force: e^{-r2} Σ r2^n / n! with explicit factorials.
        let r2: f64 = 0.25;
        let mut brute = 0.0;
        let mut fact = 1.0;
        for n in 0..16 {
            if n > 0 {
                fact *= n as f64;
            }
            brute += (-r2).exp() * r2.powi(n) / fact;
        }
        assert!((v.norm_sqr() - brute).abs() < 1e-15);
        assert!(v.norm_sqr() >= 1.0 - 1e-12);
        assert!((v.norm_sqr() + v.leakage() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_is_annihilation_eigenvector() {
        let xi = c(0.5, 0.0);
        let v = make_coherent_vector(xi, 16).unwrap();
        let av = apply_ladder(Ladder::Annihilate, &v);
        let mut diff = v.clone();
        diff.scale(xi);
        let d: f64 = (av.amplitudes() - diff.amplitudes()).norm();
        // Only the top component of ξ·e(ξ) is missing from a·e(ξ).
        let bound = (v.leakage().sqrt() + v.amplitudes()[15].norm()) * xi.norm() + 1e-15;
        assert!(d <= bound, "{d} > {bound}");
    }

    #[test]
    fn overflow_is_reported() {
        let err = make_coherent_vector(c(5.0, 0.0), 8).unwrap_err();
        assert!(matches!(err, Error::TruncationOverflow { .. }));
        assert!(make_coherent_vector(c(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn ladder_basics() {
        let vac = FockVector::basis(5, 0).unwrap();
        assert_eq!(apply_ladder(Ladder::Annihilate, &vac).norm_sqr(), 0.0);
        let one = apply_ladder(Ladder::Create, &vac);
        assert_eq!(one, FockVector::basis(5, 1).unwrap());
        let two = FockVector::basis(5, 2).unwrap();
        let n = two.expect(&FockOperator::number(5));
        assert!((n - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn create_on_top_level_records_leakage() {
        let top = FockVector::basis(3, 2).unwrap();
        let out = apply_ladder(Ladder::Create, &top);
        assert_eq!(out.norm_sqr(), 0.0);
        assert!((out.leakage() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn liouvillian_examples() {
        let dim = 3;
        let zero = FockOperator::zeros(dim);
        let rho = FockVector::basis(dim, 1).unwrap().projector();
        let out = apply_liouvillian(&zero, &[], &rho).unwrap();
        assert!(out.0.iter().all(|z| *z == ZERO));

        let gamma = 0.7;
        let l = Lindblad {
            op: FockOperator::annihilation(dim),
            rate: gamma,
        };
        let out = apply_liouvillian(&zero, &[l.clone()], &rho).unwrap();
        let mut want = DMatrix::from_element(dim, dim, ZERO);
        want[(0, 0)] = c(gamma, 0.0);
        want[(1, 1)] = c(-gamma, 0.0);
        assert!((out.0 - want).norm() < 1e-15);

        let bad = Lindblad { rate: -1.0, ..l };
        assert!(apply_liouvillian(&zero, &[bad], &rho).is_err());
    }
}
