//! Closed-form Wigner functions of the compass family, at the initial time
//! and after thermal damping, plus numerical derivatives and an independent
//! Gaussian-convolution propagator for sampled grids.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{simpson_weights, GridSpec, Integrand, WignerGrid};
use crate::params::{check_tau, CompassParams, ReservoirParams};
use crate::special::{CompensatedSum, HermiteCoefficients};
use crate::states::{
    component_amplitudes, gaussian_overlap_factor, normalization, photon_series_weight,
    IMAGINARY_RESIDUE_TOLERANCE,
};

/// Default finite-difference step for [`gradient`], [`laplacian`] and
/// [`local_derivatives`].
pub const DERIVATIVE_STEP: f64 = 1e-3;

/// Largest allowed deviation of a grid's normalization from 1 before the
/// convolution propagator refuses it.
pub const GRID_NORMALIZATION_TOLERANCE: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0 }
    }

    /// `β = (x + i y)/√2`.
    pub fn beta(&self) -> Complex64 {
        Complex64::new(self.x, self.y) * FRAC_1_SQRT_2
    }
}

/// Anything that can be evaluated pointwise on phase space.
pub trait PhaseSpaceFunction: Sync {
    fn value(&self, x: f64, y: f64) -> Result<f64>;

    fn at_point(&self, point: PhasePoint) -> Result<f64> {
        self.value(point.x, point.y)
    }

    fn sample(&self, spec: GridSpec) -> Result<WignerGrid>
    where
        Self: Sized,
    {
        WignerGrid::sample(spec, |x, y| self.value(x, y))
    }
}

/// Adapts a closure to [`PhaseSpaceFunction`].
pub struct FnWigner<F>(pub F);

impl<F> PhaseSpaceFunction for FnWigner<F>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    fn value(&self, x: f64, y: f64) -> Result<f64> {
        (self.0)(x, y)
    }
}

/// Time-dependent quantities of the thermal damping kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolvedKernelParams {
    pub tau: f64,
    /// `1 - e^{-2τ}`.
    pub t: f64,
    /// `(1 + 2n̄) T`.
    pub t_bar: f64,
    /// Amplitude damping `e^{-τ}`.
    pub decay: f64,
    /// `2 e^{-2τ} / T̄`; infinite at `τ = 0`.
    pub k3: f64,
}

impl EvolvedKernelParams {
    pub fn new(reservoir: &ReservoirParams, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        let t = -(-2.0 * tau).exp_m1();
        let t_bar = (1.0 + 2.0 * reservoir.n_bar) * t;
        let decay = (-tau).exp();
        let k3 = 2.0 * decay * decay / t_bar;
        Ok(Self {
            tau,
            t,
            t_bar,
            decay,
            k3,
        })
    }

    /// `2 e^{-τ} η / T̄`.
    pub fn k1(&self, eta: Complex64) -> Complex64 {
        eta * (2.0 * self.decay / self.t_bar)
    }

    /// `2 e^{-τ} η* / T̄`.
    pub fn k2(&self, eta: Complex64) -> Complex64 {
        eta.conj() * (2.0 * self.decay / self.t_bar)
    }

    /// Total Gaussian width `T̄ + e^{-2τ}` of an evolved coherent component.
    pub fn spread(&self) -> f64 {
        self.t_bar + self.decay * self.decay
    }

    /// `4 / (2 + k3) = 2T̄ / (T̄ + e^{-2τ})`.
    pub fn e(&self) -> f64 {
        2.0 * self.t_bar / self.spread()
    }
}

/// Precomputed closed-form evaluator for one set of state parameters.
#[derive(Debug, Clone)]
pub struct CompassWigner {
    params: CompassParams,
    alphas: [Complex64; 4],
    aleph: f64,
    /// `tables[k]` holds the coefficients of degree `(p - k, q)`.
    tables: Vec<HermiteCoefficients>,
    /// `(p!)² / (k! ((p-k)!)²)`.
    weights: Vec<f64>,
}

impl CompassWigner {
    pub fn new(params: CompassParams) -> Result<Self> {
        params.validate()?;
        let aleph = normalization(&params)?;
        let tables = (0..=params.p)
            .map(|k| HermiteCoefficients::new(params.p - k, params.q))
            .collect::<Result<Vec<_>>>()?;
        let weights = (0..=params.p)
            .map(|k| photon_series_weight(params.p, k))
            .collect();
        Ok(Self {
            params,
            alphas: component_amplitudes(&params),
            aleph,
            tables,
            weights,
        })
    }

    pub fn params(&self) -> &CompassParams {
        &self.params
    }

    /// The normalization constant `ℵ`.
    pub fn aleph(&self) -> f64 {
        self.aleph
    }

    /// Initial Wigner function as the full sum over all 16 component pairs,
    /// each a coherent cross term times a Hermite series in
    /// `γ_k = 2β - α_k`.
    pub fn initial(&self, x: f64, y: f64) -> Result<f64> {
        let beta = PhasePoint::new(x, y).beta();
        let mut total = CompensatedSum::default();
        let mut scale = 0.0;
        for &ai in &self.alphas {
            for &aj in &self.alphas {
                let term = self.initial_pair(ai, aj, beta);
                scale += term.norm();
                total.add(term);
            }
        }
        self.finish(total.value(), scale)
    }

    fn initial_pair(&self, ai: Complex64, aj: Complex64, beta: Complex64) -> Complex64 {
        let gamma_i = 2.0 * beta - ai;
        let gamma_j = 2.0 * beta - aj;
        let exponent = -ai * aj.conj() - 2.0 * beta.norm_sqr()
            + 2.0 * aj.conj() * beta
            + 2.0 * ai * beta.conj();
        let mut series = CompensatedSum::default();
        for (k, (table, w)) in self.tables.iter().zip(&self.weights).enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            series.add(
                table.eval_plus(gamma_j.conj(), ai)
                    * table.eval_plus(gamma_i, aj.conj())
                    * (sign * w),
            );
        }
        combine(gaussian_overlap_factor(ai, aj), exponent, series.value())
    }

    /// Wigner function after damping time `τ`; `τ = 0` uses [`Self::initial`].
    pub fn evolved(&self, reservoir: &ReservoirParams, tau: f64, x: f64, y: f64) -> Result<f64> {
        check_tau(tau)?;
        if tau == 0.0 {
            return self.initial(x, y);
        }
        self.evolved_with(&EvolvedKernelParams::new(reservoir, tau)?, x, y)
    }

    /// Evolved value for a prepared kernel. Each pair term carries a single
    /// Hermite series whose ratio `E - 1` interpolates between `-1` at `τ = 0`
    /// and `+1` at equilibrium; `W_ji = conj(W_ij)` halves the pair count.
    pub fn evolved_with(&self, kernel: &EvolvedKernelParams, x: f64, y: f64) -> Result<f64> {
        let eta = PhasePoint::new(x, y).beta();
        let mut total = CompensatedSum::default();
        let mut diagonal_im = 0.0;
        let mut scale = 0.0;
        for i in 0..4 {
            for j in i..4 {
                let term = self.evolved_pair(kernel, i, j, eta, SeriesForm::Collapsed);
                scale += term.norm();
                if i == j {
                    diagonal_im += term.im;
                    total.add(Complex64::new(term.re, 0.0));
                } else {
                    total.add(Complex64::new(2.0 * term.re, 0.0));
                }
            }
        }
        self.finish(Complex64::new(total.value().re, diagonal_im), scale)
    }

    /// Same quantity as [`Self::evolved_with`] summed as the double series
    /// over `n` (weight `(-1)^n`) and `n'` (weight `E^{n'}`), with the
    /// factorial `((p - n - n')!)²` terminating the inner sum. Slower; kept
    /// as a reference form.
    pub fn evolved_double_sum(&self, kernel: &EvolvedKernelParams, x: f64, y: f64) -> Result<f64> {
        let eta = PhasePoint::new(x, y).beta();
        let mut total = CompensatedSum::default();
        let mut scale = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let term = self.evolved_pair(kernel, i, j, eta, SeriesForm::Double);
                scale += term.norm();
                total.add(term);
            }
        }
        self.finish(total.value(), scale)
    }

    fn evolved_pair(
        &self,
        kernel: &EvolvedKernelParams,
        i: usize,
        j: usize,
        eta: Complex64,
        form: SeriesForm,
    ) -> Complex64 {
        let (ai, aj) = (self.alphas[i], self.alphas[j]);
        let c = kernel.decay;
        let s = kernel.spread();
        let excess = kernel.t_bar - c * c;
        let exponent = (-2.0 * eta.norm_sqr()
            + 2.0 * c * (ai * eta.conj() + aj.conj() * eta)
            + 2.0 * kernel.t_bar * ai * aj.conj())
            / s
            - ai * aj.conj();
        let p_arg = (2.0 * c * eta.conj() + aj.conj() * excess) / s;
        let q_arg = (2.0 * c * eta + ai * excess) / s;
        let hermite = |k: usize| {
            self.tables[k].eval_plus(p_arg, ai) * self.tables[k].eval_plus(q_arg, aj.conj())
        };
        let series = match form {
            SeriesForm::Collapsed => {
                let ratio = excess / s;
                let mut power = 1.0;
                let mut acc = CompensatedSum::default();
                for (k, w) in self.weights.iter().enumerate() {
                    acc.add(hermite(k) * (power * w));
                    power *= ratio;
                }
                acc.value()
            }
            SeriesForm::Double => {
                let e = kernel.e();
                let p = self.params.p;
                let mut acc = CompensatedSum::default();
                for n in 0..=p {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    for n_prime in 0..=(p - n) {
                        let k = n + n_prime;
                        let log_w = 2.0 * crate::special::log_factorial(p)
                            - crate::special::log_factorial(n)
                            - crate::special::log_factorial(n_prime)
                            - 2.0 * crate::special::log_factorial(p - k);
                        acc.add(hermite(k) * (sign * e.powi(n_prime as i32) * log_w.exp()));
                    }
                }
                acc.value()
            }
        };
        combine(gaussian_overlap_factor(ai, aj) / s, exponent, series)
    }

    fn finish(&self, total: Complex64, scale: f64) -> Result<f64> {
        if !total.re.is_finite() {
            return Err(Error::NumericalInstability(format!(
                "non-finite Wigner sum {total} for {:?}",
                self.params
            )));
        }
        if total.im.abs() > IMAGINARY_RESIDUE_TOLERANCE * scale {
            return Err(Error::NumericalInstability(format!(
                "imaginary residue {:.3e} against term scale {scale:.3e}",
                total.im
            )));
        }
        Ok(total.re / (PI * self.aleph))
    }

    /// Pointwise evaluator at a fixed time.
    pub fn at_time(&self, reservoir: &ReservoirParams, tau: f64) -> Result<EvolvedCompass<'_>> {
        check_tau(tau)?;
        let kernel = if tau == 0.0 {
            None
        } else {
            Some(EvolvedKernelParams::new(reservoir, tau)?)
        };
        Ok(EvolvedCompass {
            wigner: self,
            kernel,
        })
    }
}

#[derive(Clone, Copy)]
enum SeriesForm {
    Collapsed,
    Double,
}

/// `g · exp(exponent) · series`, guarding against `0 · ∞` far from the state.
fn combine(g: f64, exponent: Complex64, series: Complex64) -> Complex64 {
    let envelope = g * exponent.re.exp();
    if envelope == 0.0 && series.is_finite() {
        return Complex64::new(0.0, 0.0);
    }
    let phase = Complex64::from_polar(1.0, exponent.im);
    series * phase * envelope
}

/// A [`CompassWigner`] frozen at one time.
#[derive(Debug, Clone, Copy)]
pub struct EvolvedCompass<'a> {
    wigner: &'a CompassWigner,
    kernel: Option<EvolvedKernelParams>,
}

impl EvolvedCompass<'_> {
    pub fn kernel(&self) -> Option<&EvolvedKernelParams> {
        self.kernel.as_ref()
    }
}

impl PhaseSpaceFunction for EvolvedCompass<'_> {
    fn value(&self, x: f64, y: f64) -> Result<f64> {
        match &self.kernel {
            None => self.wigner.initial(x, y),
            Some(k) => self.wigner.evolved_with(k, x, y),
        }
    }
}

pub fn wigner_initial(params: &CompassParams, point: PhasePoint) -> Result<f64> {
    CompassWigner::new(*params)?.initial(point.x, point.y)
}

pub fn wigner_evolved(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
    point: PhasePoint,
) -> Result<f64> {
    CompassWigner::new(*params)?.evolved(reservoir, tau, point.x, point.y)
}

/// Equilibrium Wigner function `[π(2n̄+1)]⁻¹ exp(-(x²+y²)/(2n̄+1))`.
pub fn wigner_thermal(n_bar: f64, point: PhasePoint) -> f64 {
    let w = 2.0 * n_bar + 1.0;
    (-(point.x * point.x + point.y * point.y) / w).exp() / (PI * w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalWigner {
    pub n_bar: f64,
}

impl PhaseSpaceFunction for ThermalWigner {
    fn value(&self, x: f64, y: f64) -> Result<f64> {
        Ok(wigner_thermal(self.n_bar, PhasePoint::new(x, y)))
    }
}

/// A single coherent component `|α⟩`, optionally after thermal damping:
/// a Gaussian of width `T̄ + e^{-2τ}` centred on `α e^{-τ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentWigner {
    pub alpha: Complex64,
    pub decay: f64,
    pub spread: f64,
}

impl CoherentWigner {
    pub fn new(alpha: Complex64) -> Self {
        Self {
            alpha,
            decay: 1.0,
            spread: 1.0,
        }
    }

    pub fn evolved(alpha: Complex64, reservoir: &ReservoirParams, tau: f64) -> Result<Self> {
        let k = EvolvedKernelParams::new(reservoir, tau)?;
        Ok(Self {
            alpha,
            decay: k.decay,
            spread: k.spread(),
        })
    }
}

impl PhaseSpaceFunction for CoherentWigner {
    fn value(&self, x: f64, y: f64) -> Result<f64> {
        let d = PhasePoint::new(x, y).beta() - self.alpha * self.decay;
        Ok((-2.0 * d.norm_sqr() / self.spread).exp() / (PI * self.spread))
    }
}

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDerivatives {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

impl LocalDerivatives {
    pub fn laplacian(&self) -> f64 {
        self.hessian[0][0] + self.hessian[1][1]
    }

    pub fn gradient_norm(&self) -> f64 {
        self.gradient[0].hypot(self.gradient[1])
    }
}

fn stencil<F: PhaseSpaceFunction + ?Sized>(
    f: &F,
    x: f64,
    y: f64,
    h: f64,
    centre: f64,
) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let fxp = f.value(x + h, y)?;
    let fxm = f.value(x - h, y)?;
    let fyp = f.value(x, y + h)?;
    let fym = f.value(x, y - h)?;
    let fpp = f.value(x + h, y + h)?;
    let fpm = f.value(x + h, y - h)?;
    let fmp = f.value(x - h, y + h)?;
    let fmm = f.value(x - h, y - h)?;
    let gx = (fxp - fxm) / (2.0 * h);
    let gy = (fyp - fym) / (2.0 * h);
    let hxx = (fxp - 2.0 * centre + fxm) / (h * h);
    let hyy = (fyp - 2.0 * centre + fym) / (h * h);
    let hxy = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    Ok(([gx, gy], [[hxx, hxy], [hxy, hyy]]))
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Central differences at steps `h` and `h/2`, Richardson-combined.
pub fn local_derivatives<F: PhaseSpaceFunction + ?Sized>(
    f: &F,
    x: f64,
    y: f64,
    h: f64,
) -> Result<LocalDerivatives> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!(
            "derivative step must be positive, got {h}"
        )));
    }
    let value = f.value(x, y)?;
    let (g1, h1) = stencil(f, x, y, h, value)?;
    let (g2, h2) = stencil(f, x, y, 0.5 * h, value)?;
    let mut hessian = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            hessian[a][b] = richardson(h1[a][b], h2[a][b]);
        }
    }
    Ok(LocalDerivatives {
        value,
        gradient: [richardson(g1[0], g2[0]), richardson(g1[1], g2[1])],
        hessian,
    })
}

pub fn gradient<F: PhaseSpaceFunction + ?Sized>(f: &F, x: f64, y: f64, h: f64) -> Result<[f64; 2]> {
    let central = |h: f64| -> Result<[f64; 2]> {
        Ok([
            (f.value(x + h, y)? - f.value(x - h, y)?) / (2.0 * h),
            (f.value(x, y + h)? - f.value(x, y - h)?) / (2.0 * h),
        ])
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok([
        richardson(coarse[0], fine[0]),
        richardson(coarse[1], fine[1]),
    ])
}

pub fn laplacian<F: PhaseSpaceFunction + ?Sized>(f: &F, x: f64, y: f64, h: f64) -> Result<f64> {
    let centre = f.value(x, y)?;
    let second = |h: f64| -> Result<f64> {
        Ok(
            (f.value(x + h, y)? + f.value(x - h, y)? + f.value(x, y + h)? + f.value(x, y - h)?
                - 4.0 * centre)
                / (h * h),
        )
    };
    Ok(richardson(second(h)?, second(0.5 * h)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeKind {
    Gradient,
    Laplacian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivative {
    Gradient([f64; 2]),
    Laplacian(f64),
}

pub fn wigner_derivatives(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
    point: PhasePoint,
    which: DerivativeKind,
) -> Result<Derivative> {
    let w = CompassWigner::new(*params)?;
    let f = w.at_time(reservoir, tau)?;
    Ok(match which {
        DerivativeKind::Gradient => {
            Derivative::Gradient(gradient(&f, point.x, point.y, DERIVATIVE_STEP)?)
        }
        DerivativeKind::Laplacian => {
            Derivative::Laplacian(laplacian(&f, point.x, point.y, DERIVATIVE_STEP)?)
        }
    })
}

/// Evolves a sampled grid by direct quadrature of the Gaussian damping
/// kernel `(πT̄)⁻¹ exp(-|r - e^{-τ} r'|²/T̄)`. The kernel is separable, so
/// each axis is one dense matrix product.
pub fn propagate_convolution(
    initial: &WignerGrid,
    reservoir: &ReservoirParams,
    tau: f64,
) -> Result<WignerGrid> {
    check_tau(tau)?;
    let norm = initial.integrate(Integrand::Identity)?;
    if (norm - 1.0).abs() > GRID_NORMALIZATION_TOLERANCE {
        return Err(Error::DomainTooSmall(format!(
            "input grid integrates to {norm:.6}, not 1"
        )));
    }
    if tau == 0.0 {
        return Ok(initial.clone());
    }
    let kernel = EvolvedKernelParams::new(reservoir, tau)?;
    let spec = *initial.spec();
    let c = kernel.decay;
    let kx = convolution_matrix(
        &spec.xs(),
        &simpson_weights(spec.nx, spec.dx()),
        c,
        kernel.t_bar,
    );
    let ky = convolution_matrix(
        &spec.ys(),
        &simpson_weights(spec.ny, spec.dy()),
        c,
        kernel.t_bar,
    );
    let (nx, ny) = (spec.nx, spec.ny);

    use rayon::prelude::*;
    // Along x: rows of the input.
    let stage: Vec<f64> = initial
        .values()
        .par_chunks(nx)
        .flat_map_iter(|row| {
            kx.chunks(nx)
                .map(|weights| weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>())
                .collect::<Vec<_>>()
        })
        .collect();
    // Along y: columns of the intermediate result.
    let columns: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            ky.chunks(ny)
                .map(|weights| (0..ny).map(|j| weights[j] * stage[j * nx + i]).sum::<f64>())
                .collect()
        })
        .collect();
    let mut values = vec![0.0; nx * ny];
    for (i, column) in columns.iter().enumerate() {
        for (j, v) in column.iter().enumerate() {
            values[j * nx + i] = v / (c * c);
        }
    }
    WignerGrid::new(spec, values)
}

/// Row `a` holds the weights of output node `nodes[a]` over the input nodes,
/// summing to 1 (the continuum factor `1/c` per axis is applied by the
/// caller). A resolved kernel uses its analytic normalization; a kernel
/// narrower than the lattice is normalized discretely, which turns it into
/// the identity as `τ → 0`.
fn convolution_matrix(nodes: &[f64], quad: &[f64], c: f64, t_bar: f64) -> Vec<f64> {
    let n = nodes.len();
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    let width = (0.5 * t_bar).sqrt() / c;
    let resolved = width >= 2.0 * h;
    let mut m = vec![0.0; n * n];
    for (a, &out) in nodes.iter().enumerate() {
        let row = &mut m[a * n..(a + 1) * n];
        let centre = out / c;
        if resolved {
            let norm = c / (PI * t_bar).sqrt();
            for (r, (&x, w)) in row.iter_mut().zip(nodes.iter().zip(quad)) {
                *r = w * norm * (-(c * (centre - x)).powi(2) / t_bar).exp();
            }
        } else {
            // Relative to the nearest node so the row cannot underflow.
            let exps: Vec<f64> = nodes
                .iter()
                .map(|&x| -(c * (centre - x)).powi(2) / t_bar)
                .collect();
            let peak = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (r, (e, w)) in row.iter_mut().zip(exps.iter().zip(quad)) {
                *r = w * (e - peak).exp();
                total += *r;
            }
            row.iter_mut().for_each(|r| *r /= total);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(x0: f64, p: usize, q: usize) -> CompassParams {
        CompassParams::new(x0, p, q).unwrap()
    }

    const HALF: ReservoirParams = ReservoirParams { n_bar: 0.5 };

    #[test]
    fn vacuum_origin() {
        let w = wigner_initial(&params(0.0, 0, 0), PhasePoint::origin()).unwrap();
        assert!((w - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn parity_anchor() {
        for (x0, p) in [(3.0, 0), (1.5, 14), (0.5, 14), (1.5, 20)] {
            let w = wigner_initial(&params(x0, p, p), PhasePoint::origin()).unwrap();
            assert!((w - 1.0 / PI).abs() < 1e-8, "{x0} {p}: {w}");
        }
    }

    #[test]
    fn vacuum_matches_gaussian_everywhere() {
        let w = CompassWigner::new(params(0.0, 0, 0)).unwrap();
        for (x, y) in [(0.3f64, -1.2f64), (2.0, 2.0), (-0.7, 0.1)] {
            let expected = (-(x * x + y * y)).exp() / PI;
            assert!((w.initial(x, y).unwrap() - expected).abs() < 1e-15);
            let evolved = w.evolved(&HALF, 0.3, x, y).unwrap();
            let g = CoherentWigner::evolved(Complex64::new(0.0, 0.0), &HALF, 0.3).unwrap();
            assert!((evolved - g.value(x, y).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn small_tau_continuity() {
        for ps in [params(3.0, 0, 0), params(1.5, 14, 14), params(1.5, 20, 14)] {
            let w = CompassWigner::new(ps).unwrap();
            for (x, y) in [(0.0, 0.0), (0.4, -0.9), (1.7, 1.1), (-2.5, 0.3)] {
                let a = w.initial(x, y).unwrap();
                let b = w.evolved(&HALF, 1e-8, x, y).unwrap();
                assert!((a - b).abs() < 1e-5, "{ps:?} ({x},{y}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn collapsed_and_double_series_agree() {
        for ps in [params(3.0, 0, 0), params(1.5, 6, 4), params(1.5, 14, 14)] {
            let w = CompassWigner::new(ps).unwrap();
            for tau in [0.01, 0.12, 1.0] {
                let k = EvolvedKernelParams::new(&HALF, tau).unwrap();
                for (x, y) in [(0.0, 0.0), (0.8, -0.3), (-1.9, 2.2)] {
                    let a = w.evolved_with(&k, x, y).unwrap();
                    let b = w.evolved_double_sum(&k, x, y).unwrap();
                    assert!((a - b).abs() < 1e-10, "{ps:?} tau={tau}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn long_time_limit_is_thermal() {
        for ps in [params(3.0, 0, 0), params(1.5, 20, 14)] {
            let w = CompassWigner::new(ps).unwrap();
            for (x, y) in [(0.0, 0.0), (1.0, -2.0), (3.5, 3.5)] {
                let a = w.evolved(&HALF, 10.0, x, y).unwrap();
                let b = wigner_thermal(0.5, PhasePoint::new(x, y));
                assert!((a - b).abs() < 1e-7, "{a} vs {b}");
            }
        }
        assert!((wigner_thermal(0.5, PhasePoint::origin()) - 0.5 / PI).abs() < 1e-16);
    }

    #[test]
    fn four_fold_symmetry() {
        let w = CompassWigner::new(params(1.5, 20, 14)).unwrap();
        for tau in [0.0, 0.06] {
            let f = w.at_time(&HALF, tau).unwrap();
            for (x, y) in [(0.3, 1.1), (2.2, -0.4)] {
                let a = f.value(x, y).unwrap();
                let b = f.value(-y, x).unwrap();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kernel_parameters() {
        let k = EvolvedKernelParams::new(&HALF, 0.06).unwrap();
        assert!((k.t - (1.0 - (-0.12f64).exp())).abs() < 1e-15);
        assert!((k.t_bar - 2.0 * k.t).abs() < 1e-15);
        assert!((k.k3 - 2.0 * (-0.12f64).exp() / k.t_bar).abs() < 1e-12);
        assert!((k.e() - 4.0 / (2.0 + k.k3)).abs() < 1e-12);
        let eta = Complex64::new(0.3, -0.2);
        assert_eq!(k.k2(eta), k.k1(eta).conj());
        assert!(EvolvedKernelParams::new(&HALF, -1.0).is_err());
    }

    #[test]
    fn thermal_derivatives() {
        for n_bar in [0.0, 0.5, 1.0] {
            let f = ThermalWigner { n_bar };
            let w = 2.0 * n_bar + 1.0;
            for (x, y) in [(0.0, 0.0), (0.7, -0.4)] {
                let r2 = x * x + y * y;
                let value = wigner_thermal(n_bar, PhasePoint::new(x, y));
                let exact = value * (4.0 * r2 / (w * w) - 4.0 / w);
                let lap = laplacian(&f, x, y, DERIVATIVE_STEP).unwrap();
                assert!(((lap - exact) / exact).abs() < 1e-6, "{lap} vs {exact}");
                let g = gradient(&f, x, y, DERIVATIVE_STEP).unwrap();
                assert!((g[0] + 2.0 * x / w * value).abs() < 1e-9);
                let d = local_derivatives(&f, x, y, DERIVATIVE_STEP).unwrap();
                assert!((d.hessian[0][1] - 4.0 * x * y / (w * w) * value).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn compass_origin_is_stationary() {
        let d = wigner_derivatives(
            &params(3.0, 0, 0),
            &HALF,
            0.0,
            PhasePoint::origin(),
            DerivativeKind::Gradient,
        )
        .unwrap();
        match d {
            Derivative::Gradient(g) => assert!(g[0].abs() < 1e-9 && g[1].abs() < 1e-9),
            _ => unreachable!(),
        }
    }

    #[test]
    fn convolution_of_vacuum() {
        let spec = GridSpec::square(7.0, 281).unwrap();
        let vacuum = ThermalWigner { n_bar: 0.0 }.sample(spec).unwrap();
        let out = propagate_convolution(&vacuum, &HALF, 1.0).unwrap();
        let expected = CoherentWigner::evolved(Complex64::new(0.0, 0.0), &HALF, 1.0)
            .unwrap()
            .sample(spec)
            .unwrap();
        assert!(out.max_abs_diff(&expected).unwrap() < 1e-5);
        let tiny = propagate_convolution(&vacuum, &HALF, 1e-9).unwrap();
        assert!(tiny.max_abs_diff(&vacuum).unwrap() < 1e-6);
    }
}
