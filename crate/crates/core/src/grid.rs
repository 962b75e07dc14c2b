//! Rectangular phase-space lattices, Simpson quadrature on them, and the
//! on-disk encodings (CSV, JSON, JSON-header binary).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every grid stores Wigner values normalized so that `∫∫ W dx dy = 1`.
pub const CONVENTION_TAG: &str = "normalized-dxdy";

/// Largest edge value, relative to the peak magnitude, for a grid to count
/// as covering the state.
pub const COVERAGE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// `[-l, l]²` with `n` points per axis.
    pub fn square(l: f64, n: usize) -> Result<Self> {
        let spec = Self {
            x_min: -l,
            x_max: l,
            y_min: -l,
            y_max: l,
            nx: n,
            ny: n,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = [self.x_min, self.x_max, self.y_min, self.y_max];
        if bounds.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::Config("grid bounds must satisfy min < max".into()));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per axis (got {}x{})",
                self.nx, self.ny
            )));
        }
        if self.nx.checked_mul(self.ny).is_none_or(|n| n > 1 << 28) {
            return Err(Error::Config("grid too large".into()));
        }
        Ok(())
    }

    /// Simpson's rule needs an odd point count on both axes.
    pub fn validate_simpson(&self) -> Result<()> {
        self.validate()?;
        if self.nx.is_multiple_of(2) || self.ny.is_multiple_of(2) || self.nx < 3 || self.ny < 3 {
            return Err(Error::Config(format!(
                "Simpson quadrature needs odd point counts >= 3 (got {}x{})",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Composite Simpson weights for `n` (odd) equally spaced nodes at spacing `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let w = if i == 0 || i + 1 == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    Identity,
    Abs,
    Square,
}

impl Integrand {
    fn apply(self, w: f64) -> f64 {
        match self {
            Integrand::Identity => w,
            Integrand::Abs => w.abs(),
            Integrand::Square => w * w,
        }
    }
}

/// Wigner values on a lattice, row-major by `y` then `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl WignerGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::Config(format!(
                "grid expects {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability(format!(
                "non-finite grid value {bad}"
            )));
        }
        Ok(Self { spec, values })
    }

    /// Fills the grid from `f(x, y)`, one rayon task per row.
    pub fn sample<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        spec.validate()?;
        let xs = spec.xs();
        let rows: Result<Vec<Vec<f64>>> = (0..spec.ny)
            .into_par_iter()
            .map(|j| {
                let y = spec.y(j);
                xs.iter().map(|&x| f(x, y)).collect()
            })
            .collect();
        Self::new(spec, rows?.concat())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn convention(&self) -> &'static str {
        CONVENTION_TAG
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &WignerGrid) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::Config("grids have different layouts".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> WignerGrid {
        WignerGrid {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest boundary magnitude relative to the largest overall magnitude.
    pub fn edge_ratio(&self) -> f64 {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let mut edge: f64 = 0.0;
        for i in 0..nx {
            edge = edge.max(self.at(i, 0).abs()).max(self.at(i, ny - 1).abs());
        }
        for j in 0..ny {
            edge = edge.max(self.at(0, j).abs()).max(self.at(nx - 1, j).abs());
        }
        let peak = self.max_abs();
        if peak == 0.0 {
            0.0
        } else {
            edge / peak
        }
    }

    pub fn check_coverage(&self) -> Result<()> {
        let ratio = self.edge_ratio();
        if ratio > COVERAGE_TOLERANCE {
            return Err(Error::DomainTooSmall(format!(
                "boundary values reach {ratio:.3e} of the peak"
            )));
        }
        Ok(())
    }

    /// Composite Simpson quadrature of `f(W) dx dy`, without a coverage check.
    pub fn integrate_unchecked(&self, integrand: Integrand) -> Result<f64> {
        self.spec.validate_simpson()?;
        let wx = simpson_weights(self.spec.nx, self.spec.dx());
        let wy = simpson_weights(self.spec.ny, self.spec.dy());
        let total = self
            .values
            .chunks(self.spec.nx)
            .zip(&wy)
            .map(|(row, wyj)| {
                wyj * row
                    .iter()
                    .zip(&wx)
                    .map(|(&v, w)| w * integrand.apply(v))
                    .sum::<f64>()
            })
            .sum();
        Ok(total)
    }

    /// Composite Simpson quadrature of `f(W) dx dy`.
    pub fn integrate(&self, integrand: Integrand) -> Result<f64> {
        self.check_coverage()?;
        self.integrate_unchecked(integrand)
    }

    /// `∫ W dy` at every `x` node.
    pub fn x_marginal(&self) -> Result<Vec<f64>> {
        self.spec.validate_simpson()?;
        let wy = simpson_weights(self.spec.ny, self.spec.dy());
        let nx = self.spec.nx;
        Ok((0..nx)
            .map(|i| (0..self.spec.ny).map(|j| wy[j] * self.at(i, j)).sum())
            .collect())
    }

    /// `∫ W dx` at every `y` node.
    pub fn y_marginal(&self) -> Result<Vec<f64>> {
        self.spec.validate_simpson()?;
        let wx = simpson_weights(self.spec.nx, self.spec.dx());
        Ok(self
            .values
            .chunks(self.spec.nx)
            .map(|row| row.iter().zip(&wx).map(|(v, w)| v * w).sum())
            .collect())
    }
}

/// C-style `%.6e`: six fractional digits and an exponent of at least two
/// digits, e.g. `3.183099e-01`.
pub fn format_sci(value: f64) -> String {
    if !value.is_finite() {
        return format!("{value}");
    }
    let s = format!("{value:.6e}");
    let (mantissa, exponent) = s.split_once('e').expect("exponent present");
    let (sign, digits) = match exponent.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exponent),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BinaryHeader {
    pub convention: String,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl WignerGrid {
    /// CSV with columns `x,y,W`, rows ordered by `y` then `x`. The optional
    /// footer records the normalization integral.
    pub fn to_csv(&self, with_footer: bool) -> String {
        let mut out = String::with_capacity(self.values.len() * 42 + 16);
        out.push_str("x,y,W\n");
        let xs = self.spec.xs();
        for j in 0..self.spec.ny {
            let y = format_sci(self.spec.y(j));
            for (i, x) in xs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    format_sci(*x),
                    y,
                    format_sci(self.at(i, j))
                );
            }
        }
        if with_footer {
            if let Ok(norm) = self.integrate_unchecked(Integrand::Identity) {
                let _ = writeln!(out, "# normalization,{}", format_sci(norm));
            }
        }
        out
    }

    /// Parses the output of [`WignerGrid::to_csv`]. Lines starting with `#`
    /// are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.replace(' ', "") == "x,y,W" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header 'x,y,W', got {other:?}"
                )));
            }
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {}: expected 3 fields", n + 1)));
            }
            let mut parsed = [0.0; 3];
            for (slot, field) in parsed.iter_mut().zip(&fields) {
                *slot = field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?;
                if !slot.is_finite() {
                    return Err(Error::Parse(format!("row {}: non-finite value", n + 1)));
                }
            }
            rows.push(parsed);
        }
        if rows.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        let y0 = rows[0][1];
        let nx = rows.iter().take_while(|r| r[1] == y0).count();
        if nx < 2 || rows.len() % nx != 0 {
            return Err(Error::Parse(
                "rows do not form a rectangular lattice".into(),
            ));
        }
        let ny = rows.len() / nx;
        let xs: Vec<f64> = rows[..nx].iter().map(|r| r[0]).collect();
        let ys: Vec<f64> = rows.iter().step_by(nx).map(|r| r[1]).collect();
        for (k, r) in rows.iter().enumerate() {
            if r[0] != xs[k % nx] || r[1] != ys[k / nx] {
                return Err(Error::Parse(format!(
                    "row {} breaks the lattice order",
                    k + 1
                )));
            }
        }
        let spec = GridSpec {
            x_min: xs[0],
            x_max: xs[nx - 1],
            y_min: ys[0],
            y_max: ys[ny - 1],
            nx,
            ny,
        };
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        check_uniform(&xs, spec.dx())?;
        check_uniform(&ys, spec.dy())?;
        WignerGrid::new(spec, rows.iter().map(|r| r[2]).collect())
            .map_err(|e| Error::Parse(e.to_string()))
    }

    /// A JSON header line followed by little-endian `f64` values.
    pub fn to_binary(&self) -> Vec<u8> {
        let header = BinaryHeader {
            convention: CONVENTION_TAG.into(),
            x_min: self.spec.x_min,
            x_max: self.spec.x_max,
            y_min: self.spec.y_min,
            y_max: self.spec.y_max,
            nx: self.spec.nx,
            ny: self.spec.ny,
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.reserve(self.values.len() * 8);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("missing header line".into()))?;
        let header: BinaryHeader = serde_json::from_slice(&bytes[..split])
            .map_err(|e| Error::Parse(format!("header: {e}")))?;
        if header.convention != CONVENTION_TAG {
            return Err(Error::Parse(format!(
                "unknown convention {:?}",
                header.convention
            )));
        }
        let spec = GridSpec {
            x_min: header.x_min,
            x_max: header.x_max,
            y_min: header.y_min,
            y_max: header.y_max,
            nx: header.nx,
            ny: header.ny,
        };
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let body = &bytes[split + 1..];
        if body.len() != spec.len() * 8 {
            return Err(Error::Parse(format!(
                "expected {} payload bytes, got {}",
                spec.len() * 8,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        WignerGrid::new(spec, values).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Column arrays `x`, `y`, `W` plus a `meta` object.
    pub fn to_json(&self, meta: serde_json::Value) -> serde_json::Value {
        let mut x = Vec::with_capacity(self.values.len());
        let mut y = Vec::with_capacity(self.values.len());
        let xs = self.spec.xs();
        for j in 0..self.spec.ny {
            let yj = self.spec.y(j);
            for &xi in &xs {
                x.push(xi);
                y.push(yj);
            }
        }
        serde_json::json!({
            "meta": meta,
            "grid": {
                "convention": CONVENTION_TAG,
                "x_min": self.spec.x_min,
                "x_max": self.spec.x_max,
                "y_min": self.spec.y_min,
                "y_max": self.spec.y_max,
                "nx": self.spec.nx,
                "ny": self.spec.ny,
            },
            "x": x,
            "y": y,
            "W": self.values,
        })
    }
}

fn check_uniform(nodes: &[f64], h: f64) -> Result<()> {
    // Six significant digits on disk leave ~1e-6 relative jitter.
    let scale = nodes.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-5 * h.abs() + 2e-6 * scale;
    for (k, pair) in nodes.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - h).abs() > tol {
            return Err(Error::Parse(format!(
                "non-uniform spacing at node {}",
                k + 1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn vacuum(spec: GridSpec) -> WignerGrid {
        WignerGrid::sample(spec, |x, y| Ok((-(x * x + y * y)).exp() / PI)).unwrap()
    }

    #[test]
    fn sci_format_matches_c() {
        assert_eq!(format_sci(1.0 / PI), "3.183099e-01");
        assert_eq!(format_sci(0.0), "0.000000e+00");
        assert_eq!(format_sci(-38.945), "-3.894500e+01");
        assert_eq!(format_sci(1.5e-123), "1.500000e-123");
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let spec = GridSpec {
            x_min: 0.0,
            x_max: 2.0,
            y_min: -1.0,
            y_max: 1.0,
            nx: 5,
            ny: 3,
        };
        let g = WignerGrid::sample(spec, |x, y| Ok(x * x * x + y * y)).unwrap();
        let exact = 2.0 * 4.0 + 2.0 * 2.0 / 3.0;
        assert!((g.integrate_unchecked(Integrand::Identity).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn vacuum_integrals() {
        let g = vacuum(GridSpec::square(6.0, 241).unwrap());
        assert!((g.integrate(Integrand::Identity).unwrap() - 1.0).abs() < 1e-6);
        assert!((g.integrate(Integrand::Square).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-6);
        assert!((g.integrate(Integrand::Abs).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coverage_and_layout_errors() {
        let g = vacuum(GridSpec::square(1.0, 21).unwrap());
        assert!(matches!(
            g.integrate(Integrand::Identity),
            Err(Error::DomainTooSmall(_))
        ));
        let even = vacuum(GridSpec::square(6.0, 20).unwrap());
        assert!(matches!(
            even.integrate(Integrand::Identity),
            Err(Error::Config(_))
        ));
        assert!(GridSpec::square(-1.0, 11).is_err());
        assert!(WignerGrid::new(GridSpec::square(1.0, 3).unwrap(), vec![0.0; 8]).is_err());
    }

    #[test]
    fn marginals_integrate_to_one() {
        let g = vacuum(GridSpec::square(6.0, 241).unwrap());
        let spec = *g.spec();
        let wx = simpson_weights(spec.nx, spec.dx());
        let mx = g.x_marginal().unwrap();
        let total: f64 = mx.iter().zip(&wx).map(|(m, w)| m * w).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let my = g.y_marginal().unwrap();
        for (i, (a, b)) in mx.iter().zip(&my).enumerate() {
            let x = spec.x(i);
            assert!((a - (-x * x).exp() / PI.sqrt()).abs() < 1e-9);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = vacuum(GridSpec::square(3.0, 7).unwrap());
        let text = g.to_csv(true);
        assert!(text.starts_with("x,y,W\n-3.000000e+00,-3.000000e+00,"));
        assert!(text.lines().last().unwrap().starts_with("# normalization,"));
        let back = WignerGrid::from_csv(&text).unwrap();
        assert_eq!(back.spec(), g.spec());
        assert!(back.max_abs_diff(&g).unwrap() < 1e-6);
        assert_eq!(back.to_csv(true), text);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        for bad in [
            "",
            "a,b,c\n",
            "x,y,W\n",
            "x,y,W\n0,0,1\n",
            "x,y,W\n0,0,1\n1,0,1\n0,1,1\n",
            "x,y,W\n0,0,1\n1,0,1\n1,1,1\n0,1,1\n",
            "x,y,W\n0,0,nan\n1,0,1\n0,1,1\n1,1,1\n",
            "x,y,W\n0,0,1\n1,0,1\n3,0,1\n0,1,1\n1,1,1\n3,1,1\n",
        ] {
            assert!(WignerGrid::from_csv(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = vacuum(GridSpec::square(2.5, 9).unwrap());
        let bytes = g.to_binary();
        assert_eq!(WignerGrid::from_binary(&bytes).unwrap(), g);
        assert!(WignerGrid::from_binary(&bytes[..bytes.len() - 1]).is_err());
        assert!(WignerGrid::from_binary(b"{}\n").is_err());
        assert!(WignerGrid::from_binary(b"no header").is_err());
    }

    #[test]
    fn json_columns() {
        let g = vacuum(GridSpec::square(1.0, 3).unwrap());
        let v = g.to_json(serde_json::json!({"x0": 0.0}));
        assert_eq!(v["x"].as_array().unwrap().len(), 9);
        assert_eq!(v["grid"]["convention"], CONVENTION_TAG);
        assert_eq!(v["meta"]["x0"], 0.0);
    }
}
