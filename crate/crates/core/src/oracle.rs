//! Brute-force reference path: a truncated number-basis density matrix,
//! the thermal master equation integrated with RK4, and Wigner values from
//! the displaced-parity expectation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{check_tau, ReservoirParams};
use crate::special::log_factorial;
use crate::states::{FockVector, TAIL_WINDOW};
use crate::wigner::PhasePoint;

pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-10;
/// Most negative eigenvalue tolerated as truncation slack.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Largest population allowed in the top basis levels before the parity
/// evaluation is considered truncated.
pub const LEAKAGE_TOLERANCE: f64 = 1e-8;
/// Agreement required between the `dt` and `dt/2` runs, in trace norm.
pub const STEP_HALVING_TOLERANCE: f64 = 1e-8;

/// Default RK4 step `1e-3 / (1 + n̄)`.
pub fn default_dt(reservoir: &ReservoirParams) -> f64 {
    1e-3 / (1.0 + reservoir.n_bar)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    entries: DMatrix<Complex64>,
}

impl FockDensityMatrix {
    /// Wraps `entries` after checking Hermiticity, trace and positivity.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::Domain(
                "density matrix must be square and non-empty".into(),
            ));
        }
        let rho = Self { entries };
        rho.check_invariants()?;
        Ok(rho)
    }

    pub fn from_pure(state: &FockVector) -> Self {
        let v = state.amplitudes();
        let n = v.len();
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()),
        }
    }

    /// Thermal populations `n̄^m / (1 + n̄)^{m+1}`, renormalized on the
    /// truncated basis.
    pub fn thermal(n_bar: f64, cutoff: usize) -> Result<Self> {
        ReservoirParams::new(n_bar)?;
        if cutoff == 0 {
            return Err(Error::Domain("cutoff must be positive".into()));
        }
        let ratio = n_bar / (1.0 + n_bar);
        let pops: Vec<f64> = (0..cutoff)
            .map(|m| ratio.powi(m as i32) / (1.0 + n_bar))
            .collect();
        let total: f64 = pops.iter().sum();
        Ok(Self {
            entries: DMatrix::from_fn(cutoff, cutoff, |i, j| {
                if i == j {
                    Complex64::new(pops[i] / total, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        })
    }

    pub fn number_state(n: usize, cutoff: usize) -> Result<Self> {
        if n >= cutoff {
            return Err(Error::Domain(format!(
                "|{n}> does not fit in cutoff {cutoff}"
            )));
        }
        Ok(Self {
            entries: DMatrix::from_fn(cutoff, cutoff, |i, j| {
                Complex64::new(if i == n && j == n { 1.0 } else { 0.0 }, 0.0)
            }),
        })
    }

    pub fn maximally_mixed(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        let p = 1.0 / dimension as f64;
        Ok(Self {
            entries: DMatrix::from_fn(dimension, dimension, |i, j| {
                Complex64::new(if i == j { p } else { 0.0 }, 0.0)
            }),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.cutoff())
            .map(|m| self.entries[(m, m)].re)
            .collect()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, state: &FockVector) -> f64 {
        let v = state.amplitudes();
        let n = self.cutoff().min(v.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += v[i].conj() * self.entries[(i, j)] * v[j];
            }
        }
        acc.re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.cutoff();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        if worst > HERMITICITY_TOLERANCE {
            return Err(Error::Instability(format!(
                "Hermiticity defect {worst:.3e}"
            )));
        }
        let trace = self.trace();
        if (trace - 1.0).norm() > TRACE_TOLERANCE {
            return Err(Error::Instability(format!("trace {trace}")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < POSITIVITY_FLOOR {
            return Err(Error::Instability(format!(
                "minimum eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    /// Population in the top basis levels.
    pub fn tail_population(&self) -> f64 {
        let n = self.cutoff();
        (n.saturating_sub(TAIL_WINDOW)..n)
            .map(|m| self.entries[(m, m)].re.abs())
            .sum()
    }

    fn hermitize(&mut self) {
        let adjoint = self.entries.adjoint();
        self.entries = (&self.entries + adjoint) * Complex64::new(0.5, 0.0);
    }
}

/// Master-equation generator
/// `(n̄+1)(2aρa† − a†aρ − ρa†a) + n̄(2a†ρa − aa†ρ − ρaa†)` on the truncated
/// basis. Truncated `a a†` is `diag(1, …, N−1, 0)`, which keeps the
/// generator exactly trace-free.
pub fn lindblad_rhs(rho: &FockDensityMatrix, reservoir: &ReservoirParams) -> DMatrix<Complex64> {
    rhs_matrix(&rho.entries, reservoir.n_bar)
}

fn rhs_matrix(r: &DMatrix<Complex64>, n_bar: f64) -> DMatrix<Complex64> {
    let n = r.nrows();
    let sq: Vec<f64> = (0..=n).map(|k| (k as f64).sqrt()).collect();
    let aa_dag = |m: usize| if m + 1 < n { (m + 1) as f64 } else { 0.0 };
    let down = n_bar + 1.0;
    DMatrix::from_fn(n, n, |i, j| {
        let rij = r[(i, j)];
        let mut out = Complex64::new(0.0, 0.0);
        // Emission.
        if i + 1 < n && j + 1 < n {
            out += r[(i + 1, j + 1)] * (2.0 * down * sq[i + 1] * sq[j + 1]);
        }
        out -= rij * (down * (i + j) as f64);
        // Absorption.
        if n_bar > 0.0 {
            if i > 0 && j > 0 {
                out += r[(i - 1, j - 1)] * (2.0 * n_bar * sq[i] * sq[j]);
            }
            out -= rij * (n_bar * (aa_dag(i) + aa_dag(j)));
        }
        out
    })
}

fn rk4_step(r: &DMatrix<Complex64>, n_bar: f64, dt: f64) -> DMatrix<Complex64> {
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let k1 = rhs_matrix(r, n_bar);
    let k2 = rhs_matrix(&(r + &k1 * half), n_bar);
    let k3 = rhs_matrix(&(r + &k2 * half), n_bar);
    let k4 = rhs_matrix(&(r + &k3 * h), n_bar);
    let sixth = Complex64::new(dt / 6.0, 0.0);
    r + (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * sixth
}

fn integrate(rho0: &FockDensityMatrix, n_bar: f64, tau: f64, dt: f64) -> FockDensityMatrix {
    let steps = (tau / dt).ceil().max(1.0) as usize;
    let step = tau / steps as f64;
    let mut rho = rho0.clone();
    for _ in 0..steps {
        rho.entries = rk4_step(&rho.entries, n_bar, step);
        rho.hermitize();
    }
    rho
}

/// Fixed-step RK4 to time `tau` with steps no longer than `dt`.
pub fn evolve(
    rho0: &FockDensityMatrix,
    reservoir: &ReservoirParams,
    tau: f64,
    dt: f64,
) -> Result<FockDensityMatrix> {
    check_tau(tau)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::StepSize(format!("dt must be positive, got {dt}")));
    }
    if tau == 0.0 {
        return Ok(rho0.clone());
    }
    let rho = integrate(rho0, reservoir.n_bar, tau, dt);
    rho.check_invariants()?;
    Ok(rho)
}

/// [`evolve`] at `dt` and `dt/2`; the runs must agree in trace norm.
/// Returns the finer result.
pub fn evolve_verified(
    rho0: &FockDensityMatrix,
    reservoir: &ReservoirParams,
    tau: f64,
    dt: f64,
) -> Result<FockDensityMatrix> {
    let coarse = evolve(rho0, reservoir, tau, dt)?;
    let fine = evolve(rho0, reservoir, tau, 0.5 * dt)?;
    let gap = trace_distance(&coarse, &fine);
    if gap > STEP_HALVING_TOLERANCE {
        return Err(Error::StepSize(format!(
            "dt = {dt:.3e} and dt/2 disagree by {gap:.3e} in trace norm"
        )));
    }
    Ok(fine)
}

/// Trace norm `‖a − b‖₁` of the difference.
pub fn trace_distance(a: &FockDensityMatrix, b: &FockDensityMatrix) -> f64 {
    let d = &a.entries - &b.entries;
    d.symmetric_eigenvalues().iter().map(|l| l.abs()).sum()
}

/// `tr ρ²`.
pub fn purity(rho: &FockDensityMatrix) -> f64 {
    rho.entries.iter().map(|z| z.norm_sqr()).sum()
}

/// Normalized Laguerre functions
/// `ℓ_n^{(k)}(x) = √(n!/(n+k)!) x^{k/2} e^{−x/2} L_n^{(k)}(x)` for
/// `n < len`, by the three-term recurrence.
fn normalized_laguerre(k: usize, x: f64, len: usize, out: &mut Vec<f64>) {
    out.clear();
    if len == 0 {
        return;
    }
    let l0 = if k == 0 {
        (-0.5 * x).exp()
    } else if x == 0.0 {
        0.0
    } else {
        (0.5 * k as f64 * x.ln() - 0.5 * x - 0.5 * log_factorial(k)).exp()
    };
    out.push(l0);
    if len == 1 {
        return;
    }
    let kf = k as f64;
    out.push((1.0 + kf - x) * l0 / (1.0 + kf).sqrt());
    for n in 1..len - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - x) * out[n] - (nf * (nf + kf)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
        out.push(next);
    }
}

/// `tr[ρ D(2β) Π] / π` with closed-form displacement matrix elements.
pub fn wigner_from_density(rho: &FockDensityMatrix, point: PhasePoint) -> Result<f64> {
    let tail = rho.tail_population();
    if tail > LEAKAGE_TOLERANCE {
        return Err(Error::CutoffTooSmall {
            cutoff: rho.cutoff(),
            tail_mass: tail,
        });
    }
    let n = rho.cutoff();
    let alpha = point.beta() * 2.0;
    let x = alpha.norm_sqr();
    let phase = if x == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        alpha / alpha.norm()
    };
    let mut ell = Vec::with_capacity(n);
    let mut total = 0.0;
    let mut rotation = Complex64::new(1.0, 0.0);
    for k in 0..n {
        normalized_laguerre(k, x, n - k, &mut ell);
        let mut band = Complex64::new(0.0, 0.0);
        for (m, l) in ell.iter().enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            band += rho.entries[(m, m + k)] * (sign * l);
        }
        let contribution = (rotation * band).re;
        total += if k == 0 {
            contribution
        } else {
            2.0 * contribution
        };
        rotation *= phase;
    }
    Ok(total / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CompassParams;
    use crate::states::{build_fock_state, coherent_coefficients, component_amplitudes};

    const HALF: ReservoirParams = ReservoirParams { n_bar: 0.5 };

    fn coherent(alpha: Complex64, cutoff: usize) -> FockVector {
        FockVector::from_amplitudes(coherent_coefficients(alpha, cutoff)).unwrap()
    }

    #[test]
    fn vacuum_is_zero_temperature_fixed_point() {
        let rho = FockDensityMatrix::number_state(0, 12).unwrap();
        let rhs = lindblad_rhs(&rho, &ReservoirParams::zero_temperature());
        assert!(rhs.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn thermal_state_is_stationary() {
        let rho = FockDensityMatrix::thermal(0.5, 60).unwrap();
        let rhs = lindblad_rhs(&rho, &HALF);
        let worst = rhs.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(worst < 1e-14, "{worst}");
        assert!((purity(&FockDensityMatrix::thermal(0.5, 80).unwrap()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn generator_is_trace_free() {
        let ps = CompassParams::new(1.5, 3, 2).unwrap();
        let rho = FockDensityMatrix::from_pure(&build_fock_state(&ps, 50).unwrap());
        for n_bar in [0.0, 0.5, 1.0] {
            let rhs = lindblad_rhs(&rho, &ReservoirParams::new(n_bar).unwrap());
            assert!(rhs.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn purity_examples() {
        let ps = CompassParams::compass(3.0).unwrap();
        let rho = FockDensityMatrix::from_pure(&build_fock_state(&ps, 60).unwrap());
        assert!((purity(&rho) - 1.0).abs() < 1e-10);
        assert!(
            (purity(&FockDensityMatrix::maximally_mixed(7).unwrap()) - 1.0 / 7.0).abs() < 1e-15
        );
    }

    #[test]
    fn damped_coherent_state() {
        let alpha = component_amplitudes(&CompassParams::compass(3.0).unwrap())[0];
        let rho0 = FockDensityMatrix::from_pure(&coherent(alpha, 40));
        let dt = default_dt(&ReservoirParams::zero_temperature());
        let rho = evolve(&rho0, &ReservoirParams::zero_temperature(), 1.0, dt).unwrap();
        let target = coherent(alpha * (-1.0f64).exp(), 40);
        assert!(rho.fidelity_with(&target) > 1.0 - 1e-6);
        assert_eq!(evolve(&rho0, &HALF, 0.0, dt).unwrap(), rho0);
    }

    #[test]
    fn step_halving_accepts_default_step() {
        let ps = CompassParams::new(1.5, 2, 2).unwrap();
        let rho0 = FockDensityMatrix::from_pure(&build_fock_state(&ps, 40).unwrap());
        let rho = evolve_verified(&rho0, &HALF, 0.12, default_dt(&HALF)).unwrap();
        assert!(purity(&rho) < 1.0);
    }

    #[test]
    fn parity_values() {
        let vacuum = FockDensityMatrix::number_state(0, 20).unwrap();
        let one = FockDensityMatrix::number_state(1, 20).unwrap();
        let o = PhasePoint::origin();
        assert!((wigner_from_density(&vacuum, o).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((wigner_from_density(&one, o).unwrap() + 1.0 / PI).abs() < 1e-15);
        // |1⟩ away from the origin: (2r² − 1) e^{−r²} / π.
        let (x, y) = (0.6, -0.9);
        let r2: f64 = x * x + y * y;
        let expected = (2.0 * r2 - 1.0) * (-r2).exp() / PI;
        assert!(
            (wigner_from_density(&one, PhasePoint::new(x, y)).unwrap() - expected).abs() < 1e-14
        );
    }

    #[test]
    fn coherent_wigner_from_density() {
        let alpha = Complex64::new(0.8, -1.1);
        let rho = FockDensityMatrix::from_pure(&coherent(alpha, 50));
        for (x, y) in [(0.0, 0.0), (1.2, -1.5), (-0.5, 0.4)] {
            let d = PhasePoint::new(x, y).beta() - alpha;
            let expected = (-2.0 * d.norm_sqr()).exp() / PI;
            assert!(
                (wigner_from_density(&rho, PhasePoint::new(x, y)).unwrap() - expected).abs()
                    < 1e-13
            );
        }
    }

    #[test]
    fn leakage_guard() {
        let rho = FockDensityMatrix::number_state(15, 20).unwrap();
        assert!(matches!(
            wigner_from_density(&rho, PhasePoint::origin()),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn invariant_checks() {
        let mut bad = FockDensityMatrix::maximally_mixed(3)
            .unwrap()
            .entries()
            .clone();
        bad[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(FockDensityMatrix::new(bad).is_err());
        let negative = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.1, 0.0),
            Complex64::new(-0.1, 0.0),
        ]));
        assert!(FockDensityMatrix::new(negative).is_err());
    }
}
