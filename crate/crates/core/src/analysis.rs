//! Scalar and one-dimensional diagnostics built on sampled Wigner grids:
//! negativity, tomograms, the central-peak ratio and linear entropy.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{format_sci, simpson_weights, GridSpec, Integrand, WignerGrid};
use crate::params::{CompassParams, ReservoirParams};
use crate::wigner::{CompassWigner, PhaseSpaceFunction};

/// Default analysis grid points per axis.
pub const DEFAULT_GRID_POINTS: usize = 601;

/// Base step of the entropy-rate difference quotients.
pub const ENTROPY_RATE_STEP: f64 = 1e-3;
/// Largest relative gap between the two extrapolated entropy rates.
pub const ENTROPY_RATE_AGREEMENT: f64 = 0.01;

/// Half-width `L = X0 + 2√p + 6` of the default square grid.
pub fn default_half_width(params: &CompassParams) -> f64 {
    params.x0 + 2.0 * (params.p as f64).sqrt() + 6.0
}

pub fn default_grid(params: &CompassParams) -> Result<GridSpec> {
    GridSpec::square(default_half_width(params), DEFAULT_GRID_POINTS)
}

pub fn integrate_2d(grid: &WignerGrid, integrand: Integrand) -> Result<f64> {
    grid.integrate(integrand)
}

/// Samples the state at time `tau`.
pub fn wigner_grid(
    wigner: &CompassWigner,
    reservoir: &ReservoirParams,
    tau: f64,
    spec: GridSpec,
) -> Result<WignerGrid> {
    wigner.at_time(reservoir, tau)?.sample(spec)
}

/// `∫|W| − ∫W`. Both integrals share the Simpson weights, so the result is
/// exactly zero for a non-negative grid and otherwise equals `∫|W| − 1` up
/// to the normalization error.
pub fn negativity_of_grid(grid: &WignerGrid) -> Result<f64> {
    let abs = grid.integrate(Integrand::Abs)?;
    let plain = grid.integrate(Integrand::Identity)?;
    Ok((abs - plain).max(0.0))
}

pub fn negativity(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
    spec: GridSpec,
) -> Result<f64> {
    let w = CompassWigner::new(*params)?;
    negativity_of_grid(&wigner_grid(&w, reservoir, tau, spec)?)
}

/// How linear entropy is read off a grid: `S = 1 − prefactor · ∫W² dx dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConvention {
    pub prefactor: f64,
}

impl Default for EntropyConvention {
    /// `2π`, the purity relation for `∫W dx dy = 1`.
    fn default() -> Self {
        Self {
            prefactor: 2.0 * PI,
        }
    }
}

impl EntropyConvention {
    pub fn linear_entropy(&self, grid: &WignerGrid) -> Result<f64> {
        Ok(1.0 - self.prefactor * grid.integrate(Integrand::Square)?)
    }
}

pub fn linear_entropy_of_grid(grid: &WignerGrid) -> Result<f64> {
    EntropyConvention::default().linear_entropy(grid)
}

pub fn linear_entropy(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
    spec: GridSpec,
) -> Result<f64> {
    let w = CompassWigner::new(*params)?;
    linear_entropy_of_grid(&wigner_grid(&w, reservoir, tau, spec)?)
}

/// Initial entropy production rate `dS/dτ` at `τ = 0`.
///
/// With `D(h) = (S(h) − S(0))/h`, two Richardson estimates
/// `2D(h/2) − D(h)` and `2D(h/4) − D(h/2)` are formed at `h = 1e-3`; they
/// must agree to 1%. The second is returned.
pub fn entropy_rate_s0(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    spec: GridSpec,
    convention: EntropyConvention,
) -> Result<f64> {
    let w = CompassWigner::new(*params)?;
    let s = |tau: f64| -> Result<f64> {
        convention.linear_entropy(&wigner_grid(&w, reservoir, tau, spec)?)
    };
    let h = ENTROPY_RATE_STEP;
    let s0 = s(0.0)?;
    let d = |step: f64| -> Result<f64> { Ok((s(step)? - s0) / step) };
    let (d1, d2, d4) = (d(h)?, d(0.5 * h)?, d(0.25 * h)?);
    let coarse = 2.0 * d2 - d1;
    let fine = 2.0 * d4 - d2;
    if !fine.is_finite() || (coarse - fine).abs() > ENTROPY_RATE_AGREEMENT * fine.abs() {
        return Err(Error::StepSize(format!(
            "entropy-rate extrapolations disagree: {coarse:.6} vs {fine:.6}"
        )));
    }
    Ok(fine)
}

/// `(b − a)/|a|` in percent.
pub fn relative_change(s0_a: f64, s0_b: f64) -> Result<f64> {
    if s0_a == 0.0 || !s0_a.is_finite() || !s0_b.is_finite() {
        return Err(Error::Domain(format!(
            "relative change from {s0_a} is undefined"
        )));
    }
    Ok((s0_b - s0_a) / s0_a.abs() * 100.0)
}

/// `d(τ) = W(0, τ) / |W(0, 0)|`.
pub fn central_ratio_d(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
) -> Result<f64> {
    let w = CompassWigner::new(*params)?;
    let initial = w.initial(0.0, 0.0)?;
    if initial.abs() < 1e-14 {
        return Err(Error::DegenerateState(format!("W(0,0) = {initial:.3e}")));
    }
    Ok(w.evolved(reservoir, tau, 0.0, 0.0)? / initial.abs())
}

/// Radon projection `R(x_θ)` sampled on an odd number of equally spaced
/// abscissae.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tomogram {
    pub theta: f64,
    pub x_values: Vec<f64>,
    pub r_values: Vec<f64>,
}

impl Tomogram {
    fn weights(&self) -> Result<Vec<f64>> {
        let n = self.x_values.len();
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "tomogram needs an odd sample count >= 3, got {n}"
            )));
        }
        Ok(simpson_weights(
            n,
            (self.x_values[n - 1] - self.x_values[0]) / (n - 1) as f64,
        ))
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        Ok(self
            .weights()?
            .iter()
            .zip(&self.x_values)
            .zip(&self.r_values)
            .map(|((w, &x), r)| w * f(x) * r)
            .sum())
    }

    pub fn normalization(&self) -> Result<f64> {
        self.moment(|_| 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.moment(|x| x)? / self.normalization()?)
    }

    pub fn variance(&self) -> Result<f64> {
        let mean = self.mean()?;
        Ok(self.moment(|x| (x - mean) * (x - mean))? / self.normalization()?)
    }

    pub fn max_abs_diff(&self, other: &Tomogram) -> f64 {
        self.r_values
            .iter()
            .zip(&other.r_values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Integration range and resolution of a projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomogramSpec {
    /// Abscissae span `[-half_width, half_width]`, as does the integration
    /// along `y_θ`.
    pub half_width: f64,
    pub x_points: usize,
    pub y_points: usize,
}

impl TomogramSpec {
    pub fn for_params(params: &CompassParams) -> Self {
        Self {
            half_width: default_half_width(params),
            x_points: DEFAULT_GRID_POINTS,
            y_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// `R(x_θ) = ∫ W(x_θ cosθ − y_θ sinθ, x_θ sinθ + y_θ cosθ) dy_θ`.
pub fn tomogram_of<F: PhaseSpaceFunction>(
    f: &F,
    theta: f64,
    spec: TomogramSpec,
) -> Result<Tomogram> {
    use rayon::prelude::*;
    if spec.x_points < 3
        || spec.x_points.is_multiple_of(2)
        || spec.y_points < 3
        || spec.y_points.is_multiple_of(2)
    {
        return Err(Error::Config(
            "tomogram sample counts must be odd and >= 3".into(),
        ));
    }
    if !(spec.half_width > 0.0 && spec.half_width.is_finite()) || !theta.is_finite() {
        return Err(Error::Config(
            "tomogram range and angle must be finite".into(),
        ));
    }
    let xs: Vec<f64> = GridSpec::square(spec.half_width, spec.x_points)?.xs();
    let ys: Vec<f64> = GridSpec::square(spec.half_width, spec.y_points)?.xs();
    let wy = simpson_weights(ys.len(), ys[1] - ys[0]);
    let (sin, cos) = theta.sin_cos();
    let mut edge: f64 = 0.0;
    let mut peak: f64 = 0.0;
    let rows: Result<Vec<(f64, f64, f64)>> = xs
        .par_iter()
        .map(|&xt| {
            let mut acc = 0.0;
            let mut row_peak: f64 = 0.0;
            let mut row_edge: f64 = 0.0;
            for (k, (&yt, w)) in ys.iter().zip(&wy).enumerate() {
                let v = f.value(xt * cos - yt * sin, xt * sin + yt * cos)?;
                acc += w * v;
                row_peak = row_peak.max(v.abs());
                if k == 0 || k + 1 == ys.len() {
                    row_edge = row_edge.max(v.abs());
                }
            }
            Ok((acc, row_peak, row_edge))
        })
        .collect();
    let rows = rows?;
    for &(_, p, e) in &rows {
        peak = peak.max(p);
        edge = edge.max(e);
    }
    if peak > 0.0 && edge / peak > crate::grid::COVERAGE_TOLERANCE {
        return Err(Error::DomainTooSmall(format!(
            "projection line ends reach {:.3e} of the peak",
            edge / peak
        )));
    }
    Ok(Tomogram {
        theta,
        x_values: xs,
        r_values: rows.into_iter().map(|r| r.0).collect(),
    })
}

pub fn tomogram(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
    theta: f64,
    spec: TomogramSpec,
) -> Result<Tomogram> {
    let w = CompassWigner::new(*params)?;
    tomogram_of(&w.at_time(reservoir, tau)?, theta, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub tau_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub s0: Option<f64>,
    pub s_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativityReport {
    pub tau_values: Vec<f64>,
    pub delta_values: Vec<f64>,
}

fn check_schedule(taus: &[f64]) -> Result<()> {
    if taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Config("tau values must be finite and >= 0".into()));
    }
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("tau schedule must be sorted".into()));
    }
    Ok(())
}

/// Linear entropy along `taus`; `with_rate` also computes the initial rate.
pub fn entropy_report(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    taus: &[f64],
    spec: GridSpec,
    with_rate: bool,
) -> Result<EntropyReport> {
    check_schedule(taus)?;
    let w = CompassWigner::new(*params)?;
    let s_values = taus
        .iter()
        .map(|&t| linear_entropy_of_grid(&wigner_grid(&w, reservoir, t, spec)?))
        .collect::<Result<Vec<_>>>()?;
    let s0 = if with_rate {
        Some(entropy_rate_s0(
            params,
            reservoir,
            spec,
            EntropyConvention::default(),
        )?)
    } else {
        None
    };
    Ok(EntropyReport {
        tau_values: taus.to_vec(),
        s_values,
        s0,
        s_inf: reservoir.equilibrium_linear_entropy(),
    })
}

pub fn negativity_report(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    taus: &[f64],
    spec: GridSpec,
) -> Result<NegativityReport> {
    check_schedule(taus)?;
    let w = CompassWigner::new(*params)?;
    let delta_values = taus
        .iter()
        .map(|&t| negativity_of_grid(&wigner_grid(&w, reservoir, t, spec)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(NegativityReport {
        tau_values: taus.to_vec(),
        delta_values,
    })
}

/// `n` logarithmically spaced times from `start` to `end`.
pub fn log_spaced(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), end.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn tomogram_csv(tomograms: &[Tomogram]) -> String {
    let mut out = String::from("theta,x,R\n");
    for t in tomograms {
        for (x, r) in t.x_values.iter().zip(&t.r_values) {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_sci(t.theta),
                format_sci(*x),
                format_sci(*r)
            );
        }
    }
    out
}

pub fn entropy_csv(report: &EntropyReport) -> String {
    let mut out = String::from("tau,S\n");
    for (t, s) in report.tau_values.iter().zip(&report.s_values) {
        let _ = writeln!(out, "{},{}", format_sci(*t), format_sci(*s));
    }
    out
}

pub fn negativity_csv(report: &NegativityReport) -> String {
    let mut out = String::from("tau,delta\n");
    for (t, d) in report.tau_values.iter().zip(&report.delta_values) {
        let _ = writeln!(out, "{},{}", format_sci(*t), format_sci(*d));
    }
    out
}

/// One row of the entropy-production table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyRateRow {
    pub i: usize,
    pub params: CompassParams,
    pub n_bar: f64,
    /// Index of the row this one is compared against.
    pub baseline: Option<usize>,
}

/// Published entropy-rate table: state, bath, `S0` and the relative change
/// against the preceding comparable row.
pub const ENTROPY_RATE_REFERENCE: [(usize, f64, usize, usize, f64, f64, Option<f64>); 7] = [
    (1, 3.0, 0, 0, 0.5, 38.945, None),
    (2, 5.0, 0, 0, 0.5, 101.999, Some(161.90)),
    (3, 5.0, 0, 0, 1.0, 153.999, Some(50.98)),
    (4, 1.5, 14, 14, 0.5, 66.760, None),
    (5, 1.5, 20, 14, 0.5, 112.563, Some(68.61)),
    (6, 1.5, 20, 20, 0.5, 79.784, Some(-29.12)),
    (7, 1.5, 20, 20, 1.0, 120.676, Some(51.25)),
];

pub fn entropy_rate_rows() -> Vec<EntropyRateRow> {
    ENTROPY_RATE_REFERENCE
        .iter()
        .map(|&(i, x0, p, q, n_bar, _, delta)| EntropyRateRow {
            i,
            params: CompassParams { x0, p, q },
            n_bar,
            baseline: delta.map(|_| i - 1),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::{CoherentWigner, ThermalWigner};
    use num_complex::Complex64;

    const HALF: ReservoirParams = ReservoirParams { n_bar: 0.5 };

    #[test]
    fn grid_integrals() {
        let spec = GridSpec::square(6.0, 301).unwrap();
        let vacuum = ThermalWigner { n_bar: 0.0 }.sample(spec).unwrap();
        assert!((integrate_2d(&vacuum, Integrand::Identity).unwrap() - 1.0).abs() < 1e-6);
        assert!((integrate_2d(&vacuum, Integrand::Square).unwrap() - 0.5 / PI).abs() < 1e-6);
        let spec = GridSpec::square(8.0, 301).unwrap();
        let thermal = ThermalWigner { n_bar: 0.5 }.sample(spec).unwrap();
        assert!((integrate_2d(&thermal, Integrand::Square).unwrap() - 0.25 / PI).abs() < 1e-6);
        assert!((linear_entropy_of_grid(&thermal).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn coherent_negativity_is_zero() {
        let spec = GridSpec::square(8.0, 301).unwrap();
        let g = CoherentWigner::new(Complex64::new(2.0, 0.0))
            .sample(spec)
            .unwrap();
        assert!(negativity_of_grid(&g).unwrap() < 1e-12);
    }

    #[test]
    fn relative_change_examples() {
        assert!((relative_change(38.945, 101.999).unwrap() - 161.90).abs() < 0.01);
        assert!((relative_change(112.563, 79.784).unwrap() + 29.12).abs() < 0.01);
        assert_eq!(relative_change(7.0, 7.0).unwrap(), 0.0);
        assert!(relative_change(0.0, 1.0).is_err());
    }

    #[test]
    fn reference_table_is_self_consistent() {
        for row in entropy_rate_rows() {
            if let Some(b) = row.baseline {
                let (.., s_prev, _) = ENTROPY_RATE_REFERENCE[b - 1];
                let (.., s, delta) = ENTROPY_RATE_REFERENCE[row.i - 1];
                assert!((relative_change(s_prev, s).unwrap() - delta.unwrap()).abs() < 0.01);
            }
        }
    }

    #[test]
    fn central_ratio_starts_at_one() {
        let ps = CompassParams::new(1.5, 14, 14).unwrap();
        assert!((central_ratio_d(&ps, &HALF, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let vacuum = CompassParams::compass(0.0).unwrap();
        // The vacuum relaxes to the thermal peak 1/(2π).
        let d = central_ratio_d(&vacuum, &HALF, 10.0).unwrap();
        assert!((d - 0.5).abs() < 1e-8);
    }

    #[test]
    fn thermal_tomogram_variance() {
        let f = ThermalWigner { n_bar: 0.5 };
        let spec = TomogramSpec {
            half_width: 8.0,
            x_points: 201,
            y_points: 201,
        };
        for theta in [0.0, 0.7] {
            let t = tomogram_of(&f, theta, spec).unwrap();
            assert!((t.normalization().unwrap() - 1.0).abs() < 1e-9);
            assert!((t.variance().unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tomogram_matches_grid_marginals() {
        let ps = CompassParams::compass(3.0).unwrap();
        let w = CompassWigner::new(ps).unwrap();
        let f = w.at_time(&HALF, 0.0).unwrap();
        let spec = TomogramSpec {
            half_width: 9.0,
            x_points: 181,
            y_points: 181,
        };
        let grid = f.sample(GridSpec::square(9.0, 181).unwrap()).unwrap();
        let t0 = tomogram_of(&f, 0.0, spec).unwrap();
        let mx = grid.x_marginal().unwrap();
        for (a, b) in t0.r_values.iter().zip(&mx) {
            assert!((a - b).abs() < 1e-12);
        }
        let t90 = tomogram_of(&f, std::f64::consts::FRAC_PI_2, spec).unwrap();
        assert!(t90.max_abs_diff(&t0) < 1e-8);
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced(1e-3, 10.0, 5);
        assert!((v[0] - 1e-3).abs() < 1e-15 && (v[4] - 10.0).abs() < 1e-12);
        assert!((v[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn csv_layouts() {
        let r = NegativityReport {
            tau_values: vec![0.0, 1.0],
            delta_values: vec![0.5, 0.25],
        };
        assert_eq!(
            negativity_csv(&r),
            "tau,delta\n0.000000e+00,5.000000e-01\n1.000000e+00,2.500000e-01\n"
        );
    }
}
