//! Subcommand implementations.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;
use std::path::Path;

use compass_core::analysis::{
    central_ratio_d, entropy_report, linear_entropy_of_grid, negativity_report, tomogram_of,
    wigner_grid, Tomogram, TomogramSpec,
};
use compass_core::grid::{format_sci, GridSpec, Integrand, WignerGrid};
use compass_core::oracle::{
    default_dt, evolve_verified, purity, wigner_from_density, FockDensityMatrix,
};
use compass_core::patch::{central_patch, metrics_of_contour, Contour};
use compass_core::states::{build_fock_state, default_cutoff, overlap_f};
use compass_core::wigner::{CompassWigner, PhasePoint, PhaseSpaceFunction};
use compass_core::CompassParams;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::table::Table;
use crate::{reproduce, row, CliError, Command, Invocation};

pub const ORACLE_TOL_LOW_ORDER: f64 = 1e-6;
pub const ORACLE_TOL_HIGH_ORDER: f64 = 1e-4;
/// Above this order the looser tolerance and a larger basis apply.
pub const HIGH_ORDER: usize = 14;
pub const HIGH_ORDER_MIN_CUTOFF: usize = 160;
pub const ORACLE_PURITY_TOL: f64 = 1e-4;
pub const ORACLE_TAUS: [f64; 3] = [0.0, 0.06, 0.12];

/// Where results go: files under `dir`, or `stdout`.
pub struct Sink<'a> {
    pub dir: Option<&'a Path>,
    pub format: Format,
    pub meta: Value,
    pub stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        match self.dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{name}.{}", self.format.extension()));
                std::fs::write(&path, bytes)?;
                log::info!("wrote {}", path.display());
            }
            None => self.stdout.write_all(bytes)?,
        }
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let text = match self.format {
            Format::Csv => table.to_csv(),
            Format::Json => json_text(&table.to_json(self.meta.clone())),
            Format::Bin => {
                return Err(CliError::Usage("--format bin applies only to grids".into()))
            }
        };
        self.write(name, text.as_bytes())
    }

    pub fn grid(&mut self, name: &str, grid: &WignerGrid) -> Result<(), CliError> {
        let bytes = match self.format {
            Format::Csv => grid.to_csv(true).into_bytes(),
            Format::Json => json_text(&grid.to_json(self.meta.clone())).into_bytes(),
            Format::Bin => grid.to_binary(),
        };
        self.write(name, &bytes)
    }
}

fn json_text(value: &Value) -> String {
    let mut text = serde_json::to_string(value).expect("serializable");
    text.push('\n');
    text
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Wigner { .. } => "wigner",
        Command::Evolve => "evolve",
        Command::Tomogram => "tomogram",
        Command::Negativity => "negativity",
        Command::Entropy { .. } => "entropy",
        Command::CentralPeak => "central-peak",
        Command::Patch => "patch",
        Command::OverlapSweep { .. } => "overlap-sweep",
        Command::OracleCompare => "oracle-compare",
        Command::Reproduce { .. } => "reproduce",
    }
}

pub fn dispatch(inv: &Invocation, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &inv.config;
    let name = command_name(&inv.command);
    log::info!("{name}: {:?}", cfg.state);
    let mut sink = Sink {
        dir: cfg.output_dir.as_deref(),
        format: cfg.format,
        meta: cfg.meta(name),
        stdout,
    };
    match &inv.command {
        Command::Wigner { point: Some(xy) } => wigner_point(cfg, xy[0], xy[1], sink.stdout),
        Command::Wigner { point: None } => wigner(cfg, &mut sink),
        Command::Evolve => evolve(cfg, &mut sink),
        Command::Tomogram => tomograms(cfg, &mut sink),
        Command::Negativity => {
            let report = negativity_report(
                &cfg.state,
                &cfg.reservoir,
                &cfg.taus_or(&[0.0]),
                cfg.analysis_grid()?,
            )?;
            let mut t = Table::new(&["tau", "delta"]);
            for (tau, d) in report.tau_values.iter().zip(&report.delta_values) {
                t.push(row![*tau, *d]);
            }
            sink.table("negativity", &t)
        }
        Command::Entropy { rate } => {
            let report = entropy_report(
                &cfg.state,
                &cfg.reservoir,
                &cfg.taus_or(&[0.0]),
                cfg.analysis_grid()?,
                *rate,
            )?;
            let mut t = Table::new(&["tau", "S"]);
            for (tau, s) in report.tau_values.iter().zip(&report.s_values) {
                t.push(row![*tau, *s]);
            }
            sink.table("entropy", &t)?;
            if let Some(s0) = report.s0 {
                let mut r = Table::new(&["S0", "S_inf"]);
                r.push(row![s0, report.s_inf]);
                sink.table("entropy_rate", &r)?;
            }
            Ok(())
        }
        Command::CentralPeak => {
            let mut t = Table::new(&["tau", "d"]);
            for tau in cfg.taus_or(&[0.0]) {
                t.push(row![tau, central_ratio_d(&cfg.state, &cfg.reservoir, tau)?]);
            }
            sink.table("central_peak", &t)
        }
        Command::Patch => patch(cfg, &mut sink),
        Command::OverlapSweep {
            x0_min,
            x0_max,
            steps,
        } => overlap_sweep(cfg, *x0_min, *x0_max, *steps, &mut sink),
        Command::OracleCompare => oracle_compare(cfg, &mut sink),
        Command::Reproduce {
            target,
            row,
            entropy_prefactor,
        } => reproduce::run(*target, *row, *entropy_prefactor, cfg, &mut sink),
    }
}

fn wigner_point(cfg: &RunConfig, x: f64, y: f64, out: &mut dyn Write) -> Result<(), CliError> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(CliError::Usage("--point coordinates must be finite".into()));
    }
    let w = CompassWigner::new(cfg.state)?;
    for tau in cfg.taus_or(&[0.0]) {
        writeln!(out, "{}", format_sci(w.evolved(&cfg.reservoir, tau, x, y)?))?;
    }
    Ok(())
}

fn wigner(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let tau = cfg.single_tau()?;
    let w = CompassWigner::new(cfg.state)?;
    let grid = wigner_grid(&w, &cfg.reservoir, tau, cfg.analysis_grid()?)?;
    sink.grid("wigner", &grid)
}

fn evolve(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    if sink.dir.is_none() {
        return Err(CliError::Usage(
            "evolve writes one file per time and needs --out".into(),
        ));
    }
    let w = CompassWigner::new(cfg.state)?;
    let spec = cfg.analysis_grid()?;
    let mut index = Table::new(&["step", "tau", "normalization"]);
    for (k, tau) in cfg.taus_or(&[0.0]).into_iter().enumerate() {
        let grid = wigner_grid(&w, &cfg.reservoir, tau, spec)?;
        index.push(row![k, tau, grid.integrate_unchecked(Integrand::Identity)?]);
        sink.grid(&format!("wigner_{k:03}"), &grid)?;
    }
    let format = sink.format;
    if format == Format::Bin {
        sink.format = Format::Csv;
    }
    let result = sink.table("evolve", &index);
    sink.format = format;
    result
}

fn tomogram_spec(cfg: &RunConfig) -> TomogramSpec {
    let mut spec = TomogramSpec::for_params(&cfg.state);
    if let Some(l) = cfg.grid_l {
        spec.half_width = l;
    }
    if let Some(n) = cfg.grid_n {
        spec.x_points = n;
        spec.y_points = n;
    }
    spec
}

pub fn tomogram_table(tomograms: &[(f64, Tomogram)]) -> Table {
    let mut t = Table::new(&["tau", "theta", "x", "R"]);
    for (tau, tomo) in tomograms {
        for (x, r) in tomo.x_values.iter().zip(&tomo.r_values) {
            t.push(row![*tau, tomo.theta, *x, *r]);
        }
    }
    t
}

fn tomograms(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let tau = cfg.single_tau()?;
    let thetas = cfg.theta.clone().unwrap_or_else(|| vec![0.0, FRAC_PI_4]);
    let w = CompassWigner::new(cfg.state)?;
    let f = w.at_time(&cfg.reservoir, tau)?;
    let spec = tomogram_spec(cfg);
    let list = thetas
        .iter()
        .map(|&theta| Ok((tau, tomogram_of(&f, theta, spec)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    sink.table("tomogram", &tomogram_table(&list))
}

fn contour_table(contour: &Contour) -> Table {
    let mut t = Table::new(&["x", "y", "contour_id"]);
    for p in contour.points.iter().chain(contour.points.first()) {
        t.push(row![p.x, p.y, 0usize]);
    }
    t
}

fn patch(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let tau = cfg.single_tau()?;
    let w = CompassWigner::new(cfg.state)?;
    let f = w.at_time(&cfg.reservoir, tau)?;
    let contour = central_patch(&f)?;
    let m = metrics_of_contour(&contour, &f, &cfg.reservoir, 1.0)?;
    let mut t = Table::new(&[
        "X0",
        "p",
        "q",
        "nbar",
        "tau",
        "a_plus",
        "v",
        "vdot",
        "vdot_over_v",
        "adot_laplacian",
        "adot_hessian",
        "vertices",
    ]);
    t.push(row![
        cfg.state.x0,
        cfg.state.p,
        cfg.state.q,
        cfg.reservoir.n_bar,
        tau,
        m.area,
        m.volume,
        m.volume_rate,
        m.volume_rate_ratio(),
        m.area_rate.laplacian_form,
        m.area_rate.hessian_form,
        m.vertices,
    ]);
    sink.table("patch", &t)?;
    if sink.dir.is_some() {
        sink.table("patch_contour", &contour_table(&contour))?;
    }
    Ok(())
}

/// `steps + 1` evenly spaced values from `lo` to `hi`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .collect()
}

pub fn overlap_rows(
    p: usize,
    q: usize,
    x0s: &[f64],
    cutoff: Option<usize>,
) -> Result<Vec<(f64, f64)>, CliError> {
    x0s.par_iter()
        .map(|&x0| {
            let params = CompassParams::new(x0, p, q)?;
            let f = overlap_f(&params, cutoff.unwrap_or_else(|| default_cutoff(&params)))?;
            Ok((x0, f))
        })
        .collect()
}

fn overlap_sweep(
    cfg: &RunConfig,
    lo: f64,
    hi: f64,
    steps: usize,
    sink: &mut Sink,
) -> Result<(), CliError> {
    let rows = overlap_rows(
        cfg.state.p,
        cfg.state.q,
        &linspace(lo, hi, steps),
        cfg.cutoff,
    )?;
    let mut t = Table::new(&["X0", "F"]);
    for (x0, f) in rows {
        t.push(row![x0, f]);
    }
    sink.table("overlap", &t)
}

/// Deviation statistics of the analytic function against the oracle on
/// `probe`.
pub fn oracle_deviation<F: PhaseSpaceFunction>(
    f: &F,
    rho: &FockDensityMatrix,
    probe: GridSpec,
) -> Result<(f64, f64), CliError> {
    let diffs = (0..probe.len())
        .into_par_iter()
        .map(|k| {
            let point = PhasePoint::new(probe.x(k % probe.nx), probe.y(k / probe.nx));
            Ok(f.at_point(point)? - wigner_from_density(rho, point)?)
        })
        .collect::<Result<Vec<f64>, compass_core::Error>>()?;
    let max = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    Ok((max, rms))
}

/// Extra levels for the bath's geometric tail `(n̄/(1+n̄))^k` to fall
/// below `1e-10`.
pub fn thermal_levels(n_bar: f64) -> usize {
    if n_bar <= 0.0 {
        return 0;
    }
    let ratio = n_bar / (1.0 + n_bar);
    (1e-10f64.ln() / ratio.ln()).ceil() as usize
}

fn oracle_compare(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let s = cfg.state;
    let high = s.p.max(s.q) > HIGH_ORDER;
    let tol = if high {
        ORACLE_TOL_HIGH_ORDER
    } else {
        ORACLE_TOL_LOW_ORDER
    };
    let cutoff = cfg.cutoff.unwrap_or_else(|| {
        let c = default_cutoff(&s) + thermal_levels(cfg.reservoir.n_bar);
        if high {
            c.max(HIGH_ORDER_MIN_CUTOFF)
        } else {
            c
        }
    });
    let probe = cfg.grid_or(GridSpec::square(4.0, 41)?)?;
    let entropy_grid = compass_core::analysis::default_grid(&s)?;
    let rho0 = FockDensityMatrix::from_pure(&build_fock_state(&s, cutoff)?);
    let w = CompassWigner::new(s)?;
    let mut t = Table::new(&["tau", "max_abs", "rms", "S_wigner", "S_oracle", "pass"]);
    let mut failures = Vec::new();
    for tau in cfg.taus_or(&ORACLE_TAUS) {
        let rho = evolve_verified(&rho0, &cfg.reservoir, tau, default_dt(&cfg.reservoir))?;
        let f = w.at_time(&cfg.reservoir, tau)?;
        let (max, rms) = oracle_deviation(&f, &rho, probe)?;
        let s_wigner = linear_entropy_of_grid(&f.sample(entropy_grid)?)?;
        let s_oracle = 1.0 - purity(&rho);
        let pass = max <= tol && (s_wigner - s_oracle).abs() <= ORACLE_PURITY_TOL;
        if !pass {
            failures.push(format!(
                "tau={tau}: max |dW| {max:.3e} (tol {tol:.0e}), S {s_wigner:.6e} vs {s_oracle:.6e}"
            ));
        }
        t.push(row![tau, max, rms, s_wigner, s_oracle, pass]);
    }
    sink.meta["cutoff"] = cutoff.into();
    sink.meta["tolerance"] = tol.into();
    sink.table("oracle_compare", &t)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failures.join("; ")))
    }
}
