//! Compass-state family: component amplitudes, the closed-form
//! normalization, and an explicit number-basis construction that serves as
//! the brute-force reference for everything analytic.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::CompassParams;
use crate::special::{bivariate_hermite, log_factorial, CompensatedSum};

/// Relative size of the imaginary part tolerated in analytically real sums.
pub const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-9;

/// Number of top basis levels inspected by the truncation guard.
pub const TAIL_WINDOW: usize = 10;
/// Largest admissible probability mass in the top [`TAIL_WINDOW`] levels.
pub const TAIL_MASS_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(X0/√2, -X0/√2, i X0/√2, -i X0/√2)`.
pub fn component_amplitudes(params: &CompassParams) -> [Complex64; 4] {
    let a = params.x0 * FRAC_1_SQRT_2;
    [
        Complex64::new(a, 0.0),
        Complex64::new(-a, 0.0),
        Complex64::new(0.0, a),
        Complex64::new(0.0, -a),
    ]
}

/// `exp(-(|α_i|² + |α_j|²)/2)`.
pub(crate) fn gaussian_overlap_factor(ai: Complex64, aj: Complex64) -> f64 {
    (-0.5 * (ai.norm_sqr() + aj.norm_sqr())).exp()
}

/// `(p!)² / (n! ((p-n)!)²)`, formed in the log domain.
pub(crate) fn photon_series_weight(p: usize, n: usize) -> f64 {
    (2.0 * log_factorial(p) - log_factorial(n) - 2.0 * log_factorial(p - n)).exp()
}

/// Normalization constant `ℵ = ⟨Ψ|Ψ⟩` of the unnormalized superposition
/// `Σ_i a^q a†^p |α_i⟩`, as a double sum of bivariate Hermite products.
pub fn normalization(params: &CompassParams) -> Result<f64> {
    params.validate()?;
    let (p, q) = (params.p, params.q);
    let alphas = component_amplitudes(params);
    let overall_sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
    let mut acc = CompensatedSum::default();
    let mut scale = 0.0;
    for &ai in &alphas {
        for &aj in &alphas {
            let prefactor = gaussian_overlap_factor(ai, aj) * (ai.conj() * aj).exp();
            for n in 0..=p {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let h1 = bivariate_hermite(p - n, q, I * aj, I * ai.conj())?;
                let h2 = bivariate_hermite(p - n, q, I * ai.conj(), I * aj)?;
                let term = prefactor * h1 * h2 * (overall_sign * sign * photon_series_weight(p, n));
                scale += term.norm();
                acc.add(term);
            }
        }
    }
    let value = acc.value();
    if !value.re.is_finite() || value.im.abs() > IMAGINARY_RESIDUE_TOLERANCE * value.re.abs() {
        return Err(Error::NumericalInstability(format!(
            "normalization sum is not real: {value} (term scale {scale:.3e})"
        )));
    }
    if value.re <= 0.0 {
        return Err(Error::NumericalInstability(format!(
            "normalization sum is not positive: {}",
            value.re
        )));
    }
    Ok(value.re)
}

/// Default number-basis dimension:
/// `ceil(X0²/2) + p + q + 8·sqrt(ceil(X0²/2) + p) + 20`.
pub fn default_cutoff(params: &CompassParams) -> usize {
    let mean = (params.x0 * params.x0 / 2.0).ceil();
    let spread = 8.0 * (mean + params.p as f64).sqrt();
    (mean + (params.p + params.q) as f64 + spread + 20.0).ceil() as usize
}

/// Normalized state vector in a truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    /// Normalizes `amplitudes` and applies the truncation guard.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let cutoff = amplitudes.len();
        if cutoff == 0 {
            return Err(Error::Domain("empty Fock vector".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(norm_sq > 0.0 && norm_sq.is_finite()) {
            return Err(Error::DegenerateState(format!("vector norm² = {norm_sq}")));
        }
        let tail: f64 = amplitudes[cutoff.saturating_sub(TAIL_WINDOW)..]
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            / norm_sq;
        if tail >= TAIL_MASS_TOLERANCE {
            return Err(Error::CutoffTooSmall {
                cutoff,
                tail_mass: tail,
            });
        }
        let inv = 1.0 / norm_sq.sqrt();
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a * inv).collect(),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`; the shorter basis bounds the sum.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }
}

/// Coherent-state coefficients `e^{-|α|²/2} α^n / √n!` for `n < len`.
pub fn coherent_coefficients(alpha: Complex64, len: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(len);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        out.push(c);
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    out
}

fn apply_creation(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); v.len() + 1];
    for (n, &a) in v.iter().enumerate() {
        out[n + 1] = a * ((n + 1) as f64).sqrt();
    }
    out
}

fn apply_annihilation(v: &[Complex64]) -> Vec<Complex64> {
    if v.is_empty() {
        return Vec::new();
    }
    (1..v.len()).map(|n| v[n] * (n as f64).sqrt()).collect()
}

/// `a^q a†^p |α⟩` on indices `< cutoff`. The starting coherent vector is
/// long enough that every returned entry is exact.
pub fn photon_operated_coherent(
    alpha: Complex64,
    p: usize,
    q: usize,
    cutoff: usize,
) -> Vec<Complex64> {
    let mut v = coherent_coefficients(alpha, cutoff + q);
    for _ in 0..p {
        v = apply_creation(&v);
    }
    for _ in 0..q {
        v = apply_annihilation(&v);
    }
    v.truncate(cutoff);
    v.resize(cutoff, Complex64::new(0.0, 0.0));
    v
}

/// Unnormalized superposition `Σ_i a^q a†^p |α_i⟩`; its squared norm is `ℵ`.
pub fn unnormalized_fock_state(params: &CompassParams, cutoff: usize) -> Result<Vec<Complex64>> {
    params.validate()?;
    if cutoff == 0 {
        return Err(Error::Domain("cutoff must be positive".into()));
    }
    let mut total = vec![Complex64::new(0.0, 0.0); cutoff];
    for alpha in component_amplitudes(params) {
        let component = photon_operated_coherent(alpha, params.p, params.q, cutoff);
        for (t, c) in total.iter_mut().zip(component) {
            *t += c;
        }
    }
    Ok(total)
}

pub fn build_fock_state(params: &CompassParams, cutoff: usize) -> Result<FockVector> {
    FockVector::from_amplitudes(unnormalized_fock_state(params, cutoff)?)
}

/// `F = |⟨C|⋉⟩|²` against the plain compass state with the same `X0`.
pub fn overlap_f(params: &CompassParams, cutoff: usize) -> Result<f64> {
    let reference = build_fock_state(&CompassParams::compass(params.x0)?, cutoff)?;
    let state = build_fock_state(params, cutoff)?;
    Ok(reference.inner(&state).norm_sqr().min(1.0))
}
