//! Sign-constant patches of the Wigner function: zero contours, the central
//! patch, its area and volume, and their instantaneous rates under the
//! phase-space Fokker–Planck flow
//! `∂τW = 2W + x∂xW + y∂yW + D ΔW`, `D = n̄ + 1/2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{format_sci, GridSpec, WignerGrid};
use crate::params::{check_tau, CompassParams, ReservoirParams};
use crate::quadrature::{gauss_legendre, ClosedSpline};
use crate::wigner::{
    local_derivatives, CompassWigner, PhasePoint, PhaseSpaceFunction, DERIVATIVE_STEP,
};

/// Patch volumes and volume rates are reported for a Wigner function
/// normalized against `d²β = dx dy / 2`, i.e. twice the `dx dy` volume.
pub const PATCH_VOLUME_SCALE: f64 = 2.0;

/// Boundary points with a smaller gradient norm make the area rate singular.
pub const MIN_BOUNDARY_GRADIENT: f64 = 1e-6;

/// Relative agreement required between the two area-rate integrands.
pub const AREA_RATE_AGREEMENT: f64 = 0.01;

/// Vertices are polished until `|W| <= ROOT_TOLERANCE`.
pub const ROOT_TOLERANCE: f64 = 1e-10;

pub const MIN_VERTICES: usize = 256;
pub const MAX_TURNING_ANGLE: f64 = 0.05;
pub const MAX_VERTICES: usize = 50_000;

/// Contours with fewer usable segments are rejected.
pub const MIN_SEGMENTS: usize = 8;

/// Shorter segments are dropped before integration.
const DEGENERATE_SEGMENT: f64 = 1e-12;

/// Successive search radii for the central patch.
const SEARCH_RADII: [f64; 4] = [0.8, 1.6, 3.2, 6.4];

/// Smallest angular gap the refinement will split.
const MIN_ANGLE_STEP: f64 = 1e-10;

/// Along a ray, a local minimum of `W` below this fraction of `W(0)` is
/// located exactly, so narrow negative gaps near saddles are not stepped over.
const DIP_FRACTION: f64 = 0.05;

/// A polyline on the zero set of `W`. Closed contours are stored without a
/// repeated endpoint and run counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub points: Vec<PhasePoint>,
    pub closed: bool,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shoelace area of the polygon (negative for clockwise order).
    pub fn polygon_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|k| {
                let (a, b) = (self.points[k], self.points[(k + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            * 0.5
    }

    /// Winding-number test against the polygon.
    pub fn contains(&self, p: PhasePoint) -> bool {
        if !self.closed {
            return false;
        }
        let n = self.points.len();
        let mut winding = 0i32;
        for k in 0..n {
            let (a, b) = (self.points[k], self.points[(k + 1) % n]);
            let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
            if a.y <= p.y {
                if b.y > p.y && cross > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && cross < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    fn spline(&self) -> Result<ClosedSpline> {
        if !self.closed {
            return Err(Error::RegionTooSmall);
        }
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if let Some(last) = pts.last() {
                if (p.x - last.0).hypot(p.y - last.1) < DEGENERATE_SEGMENT {
                    continue;
                }
            }
            pts.push((p.x, p.y));
        }
        while pts.len() > 1 {
            let (a, b) = (pts[0], pts[pts.len() - 1]);
            if (a.0 - b.0).hypot(a.1 - b.1) < DEGENERATE_SEGMENT {
                pts.pop();
            } else {
                break;
            }
        }
        if pts.len() < MIN_SEGMENTS {
            return Err(Error::ContourResolution(pts.len()));
        }
        Ok(ClosedSpline::new(&pts))
    }
}

/// Root of `f` on the segment `a → b`, given `f(a)` and `f(b)` of opposite
/// sign (Illinois variant of regula falsi).
fn polish_root<F: PhaseSpaceFunction + ?Sized>(
    f: &F,
    a: PhasePoint,
    b: PhasePoint,
    fa: f64,
    fb: f64,
) -> Result<PhasePoint> {
    let at = |t: f64| PhasePoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let (mut lo, mut hi, mut flo, mut fhi) = (0.0, 1.0, fa, fb);
    let mut side = 0i8;
    for _ in 0..200 {
        let t = if hi - lo < 1e-3 {
            0.5 * (lo + hi)
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        let ft = f.at_point(at(t))?;
        if ft.abs() <= ROOT_TOLERANCE || hi - lo < 1e-15 {
            return Ok(at(t));
        }
        if (ft > 0.0) == (flo > 0.0) {
            lo = t;
            flo = ft;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// Golden-section minimum of `g` on `[a, b]`.
fn golden_min(g: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    while b - a > 1e-13 {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d)?;
        }
        if gc.min(gd) <= 0.0 {
            break;
        }
    }
    Ok(if gc < gd { (c, gc) } else { (d, gd) })
}

/// First zero of `W` along the ray at angle `theta`, searching `r <= r_max`.
/// `hint` is the expected radius; it sets the step and, with
/// `skip_interior`, lets a coarse positivity pass skip the inner 60%.
fn first_zero_on_ray<F: PhaseSpaceFunction + ?Sized>(
    f: &F,
    w0: f64,
    theta: f64,
    hint: f64,
    r_max: f64,
    skip_interior: bool,
) -> Result<Option<f64>> {
    let (c, s) = (theta.cos(), theta.sin());
    let g = |r: f64| f.value(r * c, r * s);
    let step = (hint / 200.0).clamp(1e-5, 2e-3);
    // Skip the bulk of the interior when a coarse pass shows it safely positive.
    let mut r = 0.0;
    let skip_to = 0.6 * hint;
    if skip_interior && skip_to < r_max {
        let mut safe = true;
        for k in 1..=24 {
            if g(skip_to * k as f64 / 24.0)? <= DIP_FRACTION * w0 {
                safe = false;
                break;
            }
        }
        if safe {
            r = skip_to;
        }
    }
    let mut r_prev2 = f64::NAN;
    let mut g_prev2 = f64::NAN;
    let mut r_prev = r;
    let mut g_prev = g(r)?;
    while r_prev < r_max {
        let r_next = (r_prev + step).min(r_max);
        let g_next = g(r_next)?;
        if g_next <= 0.0 {
            let root = polish_root(
                &FnRay(&g),
                PhasePoint::new(r_prev, 0.0),
                PhasePoint::new(r_next, 0.0),
                g_prev,
                g_next,
            )?;
            return Ok(Some(root.x));
        }
        if g_prev2.is_finite() && g_prev < g_prev2 && g_prev <= g_next && g_prev < DIP_FRACTION * w0
        {
            let (r_min, g_min) = golden_min(&g, r_prev2, r_next)?;
            if g_min <= 0.0 {
                let root = polish_root(
                    &FnRay(&g),
                    PhasePoint::new(r_prev2, 0.0),
                    PhasePoint::new(r_min, 0.0),
                    g_prev2,
                    g_min,
                )?;
                return Ok(Some(root.x));
            }
        }
        r_prev2 = r_prev;
        g_prev2 = g_prev;
        r_prev = r_next;
        g_prev = g_next;
    }
    Ok(None)
}

/// One-dimensional function viewed through the `x` coordinate.
struct FnRay<'a>(&'a (dyn Fn(f64) -> Result<f64> + Sync));

impl PhaseSpaceFunction for FnRay<'_> {
    fn value(&self, x: f64, _y: f64) -> Result<f64> {
        (self.0)(x)
    }
}

/// Boundary of the positive region containing the origin, traced as the
/// first zero along rays from the origin and refined until every turning
/// angle is at most [`MAX_TURNING_ANGLE`]. The patch must be star-shaped
/// about the origin.
pub fn central_patch<F: PhaseSpaceFunction + ?Sized>(f: &F) -> Result<Contour> {
    let w0 = f.value(0.0, 0.0)?;
    if !(w0 > 0.0) {
        return Err(Error::NoCentralPatch(format!(
            "W(0) = {w0:.6e} is not positive"
        )));
    }
    let mut r_max = f64::NAN;
    let mut r0 = f64::NAN;
    for radius in SEARCH_RADII {
        if let Some(r) = first_zero_on_ray(f, w0, 0.0, radius, radius, false)? {
            r_max = radius;
            r0 = r;
            break;
        }
    }
    if !r0.is_finite() {
        return Err(Error::RegionTooSmall);
    }
    let trace = |theta: f64, hint: f64| -> Result<(f64, f64)> {
        match first_zero_on_ray(f, w0, theta, hint, r_max, true)? {
            Some(r) => Ok((theta, r)),
            None => Err(Error::RegionTooSmall),
        }
    };
    let mut rays: Vec<(f64, f64)> = (0..MIN_VERTICES)
        .into_par_iter()
        .map(|k| trace(2.0 * PI * k as f64 / MIN_VERTICES as f64, r0))
        .collect::<Result<_>>()?;

    loop {
        let n = rays.len();
        let pts: Vec<(f64, f64)> = rays
            .iter()
            .map(|&(t, r)| (r * t.cos(), r * t.sin()))
            .collect();
        let mut split = vec![false; n];
        for k in 0..n {
            let (a, b, c) = (pts[(k + n - 1) % n], pts[k], pts[(k + 1) % n]);
            if turning_angle(a, b, c) > MAX_TURNING_ANGLE {
                split[(k + n - 1) % n] = true;
                split[k] = true;
            }
        }
        let gaps: Vec<usize> = (0..n)
            .filter(|&k| {
                let next = if k + 1 == n {
                    rays[0].0 + 2.0 * PI
                } else {
                    rays[k + 1].0
                };
                split[k] && next - rays[k].0 > MIN_ANGLE_STEP
            })
            .collect();
        if gaps.is_empty() {
            break;
        }
        if n + gaps.len() > MAX_VERTICES {
            return Err(Error::ContourResolution(n));
        }
        let inserted: Vec<(f64, f64)> = gaps
            .par_iter()
            .map(|&k| {
                let (t0, r0) = rays[k];
                let (t1, r1) = rays[(k + 1) % n];
                let t1 = if k + 1 == n { t1 + 2.0 * PI } else { t1 };
                trace(0.5 * (t0 + t1), 0.5 * (r0 + r1))
            })
            .collect::<Result<_>>()?;
        rays.extend(inserted);
        rays.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    Ok(Contour {
        points: rays
            .iter()
            .map(|&(t, r)| PhasePoint::new(r * t.cos(), r * t.sin()))
            .collect(),
        closed: true,
    })
}

fn turning_angle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let u = (b.0 - a.0, b.1 - a.1);
    let v = (c.0 - b.0, c.1 - b.1);
    (u.0 * v.1 - u.1 * v.0).atan2(u.0 * v.0 + u.1 * v.1).abs()
}

/// Zero contours of `f` inside `roi` by marching squares. Ambiguous cells
/// are resolved by the sign at the cell centre; crossings are polished to
/// `|W| <= ROOT_TOLERANCE`. Contours that run into the edge of `roi` are
/// returned with `closed == false`.
pub fn extract_zero_contours<F: PhaseSpaceFunction + ?Sized>(
    f: &F,
    roi: GridSpec,
) -> Result<Vec<Contour>> {
    roi.validate()?;
    let grid = WignerGrid::sample(roi, |x, y| f.value(x, y))?;
    let (nx, ny) = (roi.nx, roi.ny);
    let v = |i: usize, j: usize| grid.at(i, j);
    let node = |i: usize, j: usize| PhasePoint::new(roi.x(i), roi.y(j));
    // Edge keys: 2·(j·nx + i) is the edge (i,j)→(i+1,j); +1 is (i,j)→(i,j+1).
    let h_edge = |i: usize, j: usize| 2 * (j * nx + i);
    let v_edge = |i: usize, j: usize| 2 * (j * nx + i) + 1;

    let cell_segments: Vec<Vec<(usize, usize)>> = (0..ny - 1)
        .into_par_iter()
        .map(|j| -> Result<Vec<(usize, usize)>> {
            let mut out = Vec::new();
            for i in 0..nx - 1 {
                let corners = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
                let code = corners
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &c)| acc | (((c > 0.0) as u8) << k));
                let bottom = h_edge(i, j);
                let right = v_edge(i + 1, j);
                let top = h_edge(i, j + 1);
                let left = v_edge(i, j);
                match code {
                    0 | 15 => {}
                    1 | 14 => out.push((left, bottom)),
                    2 | 13 => out.push((bottom, right)),
                    3 | 12 => out.push((left, right)),
                    4 | 11 => out.push((right, top)),
                    6 | 9 => out.push((bottom, top)),
                    7 | 8 => out.push((left, top)),
                    5 | 10 => {
                        let centre = f.value(
                            0.5 * (roi.x(i) + roi.x(i + 1)),
                            0.5 * (roi.y(j) + roi.y(j + 1)),
                        )?;
                        // Corners 0 and 2 share a sign; if the centre agrees
                        // with them they are connected through the cell.
                        let joined_02 = (centre > 0.0) == (corners[0] > 0.0);
                        if joined_02 {
                            out.push((left, top));
                            out.push((bottom, right));
                        } else {
                            out.push((left, bottom));
                            out.push((right, top));
                        }
                    }
                    _ => unreachable!(),
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let segments: Vec<(usize, usize)> = cell_segments.into_iter().flatten().collect();

    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        incident.entry(a).or_default().push(s);
        incident.entry(b).or_default().push(s);
    }
    let crossing = |edge: usize| -> Result<PhasePoint> {
        let cell = edge / 2;
        let (i, j) = (cell % nx, cell / nx);
        let (i2, j2) = if edge.is_multiple_of(2) {
            (i + 1, j)
        } else {
            (i, j + 1)
        };
        polish_root(f, node(i, j), node(i2, j2), v(i, j), v(i2, j2))
    };

    let mut used = vec![false; segments.len()];
    let mut chains: Vec<(Vec<usize>, bool)> = Vec::new();
    let walk = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut edges = vec![start_edge];
        let mut seg = start_seg;
        let mut edge = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            edge = if a == edge { b } else { a };
            if edge == start_edge {
                return (edges, true);
            }
            edges.push(edge);
            match incident[&edge].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => return (edges, false),
            }
        }
    };
    // Open chains start at edges with a single incident segment.
    let mut ends: Vec<usize> = incident
        .iter()
        .filter(|(_, s)| s.len() == 1)
        .map(|(&e, _)| e)
        .collect();
    ends.sort_unstable();
    for e in ends {
        let s = incident[&e][0];
        if !used[s] {
            let (edges, _) = walk(s, e, &mut used);
            chains.push((edges, false));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let (edges, closed) = walk(s, segments[s].0, &mut used);
            chains.push((edges, closed));
        }
    }

    chains
        .into_par_iter()
        .map(|(edges, closed)| {
            let points: Vec<PhasePoint> =
                edges.iter().map(|&e| crossing(e)).collect::<Result<_>>()?;
            let mut contour = Contour { points, closed };
            if closed && contour.polygon_area() < 0.0 {
                contour.points.reverse();
            }
            Ok(contour)
        })
        .collect()
}

fn with_spline<T>(contour: &Contour, body: impl FnOnce(&ClosedSpline) -> Result<T>) -> Result<T> {
    body(&contour.spline()?)
}

/// Area enclosed by the spline through the contour.
pub fn patch_area(contour: &Contour) -> Result<f64> {
    with_spline(contour, |s| {
        let (gx, gw) = gauss_legendre(3);
        let mut area = 0.0;
        for k in 0..s.segments() {
            let h = s.segment_length(k);
            for (t, w) in gx.iter().zip(&gw) {
                let ((x, y), (dx, dy)) = s.eval(k, *t);
                area += 0.5 * w * h * (x * dy - y * dx);
            }
        }
        Ok(area.abs())
    })
}

/// `∫∫ W dx dy` over the patch, as a fan of radial segments from the
/// vertex centroid (signed, so it holds for any closed contour).
pub fn patch_volume<F: PhaseSpaceFunction + ?Sized>(contour: &Contour, f: &F) -> Result<f64> {
    with_spline(contour, |s| {
        let n = contour.points.len() as f64;
        let cx = contour.points.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = contour.points.iter().map(|p| p.y).sum::<f64>() / n;
        let (gt, wt) = gauss_legendre(3);
        let (gu, wu) = gauss_legendre(16);
        let pieces: Vec<f64> = (0..s.segments())
            .into_par_iter()
            .map(|k| -> Result<f64> {
                let h = s.segment_length(k);
                let mut total = 0.0;
                for (t, w) in gt.iter().zip(&wt) {
                    let ((x, y), (dx, dy)) = s.eval(k, *t);
                    let (rx, ry) = (x - cx, y - cy);
                    let jac = rx * dy - ry * dx;
                    let mut radial = 0.0;
                    for (u, wu) in gu.iter().zip(&wu) {
                        radial += wu * u * f.value(cx + u * rx, cy + u * ry)?;
                    }
                    total += w * h * jac * radial;
                }
                Ok(total)
            })
            .collect::<Result<_>>()?;
        let volume: f64 = pieces.iter().sum();
        Ok(if contour.polygon_area() < 0.0 {
            -volume
        } else {
            volume
        })
    })
}

/// Samples along the spline: weight `dl`, outward unit normal and the local
/// derivatives of `W`.
struct BoundarySample {
    dl: f64,
    normal: [f64; 2],
    gradient: [f64; 2],
    hessian: [[f64; 2]; 2],
}

fn boundary_samples<F: PhaseSpaceFunction + ?Sized>(
    contour: &Contour,
    f: &F,
) -> Result<Vec<BoundarySample>> {
    with_spline(contour, |s| {
        let (gt, wt) = gauss_legendre(3);
        let clockwise = contour.polygon_area() < 0.0;
        let samples: Vec<Vec<BoundarySample>> = (0..s.segments())
            .into_par_iter()
            .map(|k| -> Result<Vec<BoundarySample>> {
                let h = s.segment_length(k);
                gt.iter()
                    .zip(&wt)
                    .map(|(t, w)| {
                        let ((x, y), (dx, dy)) = s.eval(k, *t);
                        let speed = dx.hypot(dy);
                        let sign = if clockwise { -1.0 } else { 1.0 };
                        let d = local_derivatives(f, x, y, DERIVATIVE_STEP)?;
                        Ok(BoundarySample {
                            dl: w * h * speed,
                            normal: [sign * dy / speed, -sign * dx / speed],
                            gradient: d.gradient,
                            hessian: d.hessian,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(samples.into_iter().flatten().collect())
    })
}

/// `dV/dτ = D ∮ ∇W·n dl`, scaled by [`PATCH_VOLUME_SCALE`].
pub fn volume_rate<F: PhaseSpaceFunction + ?Sized>(
    contour: &Contour,
    f: &F,
    reservoir: &ReservoirParams,
) -> Result<f64> {
    let samples = boundary_samples(contour, f)?;
    Ok(PATCH_VOLUME_SCALE * reservoir.diffusion() * flux(&samples))
}

fn flux(samples: &[BoundarySample]) -> f64 {
    samples
        .iter()
        .map(|b| b.dl * (b.gradient[0] * b.normal[0] + b.gradient[1] * b.normal[1]))
        .sum()
}

/// The two boundary forms of `da/dτ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaRate {
    /// `-2a + s D ∮ ΔW/|∇W| dl`.
    pub laplacian_form: f64,
    /// `-2a - 2πD - s D ∮ (∇W·H·n)/|∇W|² dl`.
    pub hessian_form: f64,
}

impl AreaRate {
    pub fn relative_disagreement(&self) -> f64 {
        (self.laplacian_form - self.hessian_form).abs()
            / self.laplacian_form.abs().max(self.hessian_form.abs())
    }
}

/// `da/dτ` for a patch whose interior has the sign of `interior_sign`.
/// Fails with [`Error::NumericalInconsistency`] when the two boundary forms
/// differ by more than [`AREA_RATE_AGREEMENT`].
pub fn area_rate<F: PhaseSpaceFunction + ?Sized>(
    contour: &Contour,
    f: &F,
    reservoir: &ReservoirParams,
    interior_sign: f64,
) -> Result<AreaRate> {
    let samples = boundary_samples(contour, f)?;
    area_rate_from(contour, &samples, reservoir, interior_sign)
}

fn area_rate_from(
    contour: &Contour,
    samples: &[BoundarySample],
    reservoir: &ReservoirParams,
    interior_sign: f64,
) -> Result<AreaRate> {
    let min_grad = samples
        .iter()
        .map(|b| b.gradient[0].hypot(b.gradient[1]))
        .fold(f64::INFINITY, f64::min);
    if min_grad < MIN_BOUNDARY_GRADIENT {
        return Err(Error::SingularBoundary(min_grad));
    }
    let a = patch_area(contour)?;
    let d = reservoir.diffusion();
    let s = interior_sign.signum();
    let mut lap = 0.0;
    let mut hess = 0.0;
    for b in samples {
        let [gx, gy] = b.gradient;
        let g2 = gx * gx + gy * gy;
        let [[hxx, hxy], [_, hyy]] = b.hessian;
        lap += b.dl * (hxx + hyy) / g2.sqrt();
        let hn = [
            hxx * b.normal[0] + hxy * b.normal[1],
            hxy * b.normal[0] + hyy * b.normal[1],
        ];
        hess += b.dl * (gx * hn[0] + gy * hn[1]) / g2;
    }
    let rate = AreaRate {
        laplacian_form: -2.0 * a + s * d * lap,
        hessian_form: -2.0 * a - 2.0 * PI * d - s * d * hess,
    };
    if rate.relative_disagreement() > AREA_RATE_AGREEMENT {
        return Err(Error::NumericalInconsistency(format!(
            "area-rate forms disagree: {:.6e} vs {:.6e}",
            rate.laplacian_form, rate.hessian_form
        )));
    }
    Ok(rate)
}

/// `da/dτ` of a disc of radius `r` bounded by a zero of a radial profile
/// with derivatives `W'(r)`, `W''(r)`, for a positive interior.
pub fn circular_area_rate(r: f64, w1: f64, w2: f64, n_bar: f64) -> Result<f64> {
    let reservoir = ReservoirParams::new(n_bar)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "radius must be finite and >= 0, got {r}"
        )));
    }
    let ratio = if w1 == 0.0 {
        if r == 0.0 {
            1.0
        } else {
            return Err(Error::SingularProfile(r));
        }
    } else {
        1.0 + r * w2 / w1
    };
    Ok(-2.0 * PI * r * r - 2.0 * PI * reservoir.diffusion() * ratio)
}

/// Central-patch quantities of one state at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchMetrics {
    pub area: f64,
    /// Scaled by [`PATCH_VOLUME_SCALE`].
    pub volume: f64,
    pub volume_rate: f64,
    pub area_rate: AreaRate,
    pub vertices: usize,
}

impl PatchMetrics {
    pub fn volume_rate_ratio(&self) -> f64 {
        self.volume_rate / self.volume
    }
}

pub fn patch_metrics<F: PhaseSpaceFunction + ?Sized>(
    f: &F,
    reservoir: &ReservoirParams,
) -> Result<PatchMetrics> {
    let contour = central_patch(f)?;
    metrics_of_contour(&contour, f, reservoir, 1.0)
}

pub fn metrics_of_contour<F: PhaseSpaceFunction + ?Sized>(
    contour: &Contour,
    f: &F,
    reservoir: &ReservoirParams,
    interior_sign: f64,
) -> Result<PatchMetrics> {
    let samples = boundary_samples(contour, f)?;
    let area_rate = area_rate_from(contour, &samples, reservoir, interior_sign)?;
    Ok(PatchMetrics {
        area: patch_area(contour)?,
        volume: PATCH_VOLUME_SCALE * patch_volume(contour, f)?,
        volume_rate: PATCH_VOLUME_SCALE * reservoir.diffusion() * flux(&samples),
        area_rate,
        vertices: contour.len(),
    })
}

/// Central-patch metrics of a compass-family state at time `tau`.
pub fn compass_patch_metrics(
    params: &CompassParams,
    reservoir: &ReservoirParams,
    tau: f64,
) -> Result<PatchMetrics> {
    let w = CompassWigner::new(*params)?;
    let f = w.at_time(reservoir, tau)?;
    patch_metrics(&f, reservoir)
}

/// Published central-patch values at `τ = 0`, `n̄ = 1/2`: area, volume,
/// volume rate, its ratio to the volume, and area rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatchReference {
    pub x0: f64,
    pub p: usize,
    pub q: usize,
    pub area: f64,
    pub volume: f64,
    pub volume_rate: f64,
    pub volume_rate_ratio: f64,
    pub area_rate: f64,
}

pub const PATCH_REFERENCE_NBAR: f64 = 0.5;

pub const PATCH_REFERENCE: [PatchReference; 5] = [
    PatchReference {
        x0: 3.0,
        p: 0,
        q: 0,
        area: 0.503,
        volume: 0.129,
        volume_rate: -4.52,
        volume_rate_ratio: -35.0,
        area_rate: 1.68,
    },
    PatchReference {
        x0: 5.0,
        p: 0,
        q: 0,
        area: 0.197,
        volume: 0.0500,
        volume_rate: -4.80,
        volume_rate_ratio: -96.1,
        area_rate: 1.18,
    },
    PatchReference {
        x0: 1.5,
        p: 14,
        q: 14,
        area: 0.274,
        volume: 0.0739,
        volume_rate: -4.88,
        volume_rate_ratio: -65.9,
        area_rate: 0.0918,
    },
    PatchReference {
        x0: 1.5,
        p: 20,
        q: 20,
        area: 0.234,
        volume: 0.0624,
        volume_rate: -4.87,
        volume_rate_ratio: -78.1,
        area_rate: 0.300,
    },
    PatchReference {
        x0: 1.5,
        p: 20,
        q: 14,
        area: 0.163,
        volume: 0.0441,
        volume_rate: -4.96,
        volume_rate_ratio: -112.0,
        area_rate: -0.0545,
    },
];

impl PatchReference {
    pub fn params(&self) -> CompassParams {
        CompassParams {
            x0: self.x0,
            p: self.p,
            q: self.q,
        }
    }
}

/// Metrics for every reference state at `τ = 0`.
pub fn patch_table(reservoir: &ReservoirParams) -> Result<Vec<(PatchReference, PatchMetrics)>> {
    PATCH_REFERENCE
        .iter()
        .map(|r| Ok((*r, compass_patch_metrics(&r.params(), reservoir, 0.0)?)))
        .collect()
}

pub fn patch_table_csv(rows: &[(PatchReference, PatchMetrics)]) -> String {
    let mut out = String::from("i,X0,p,q,a_plus_0,v_0,vdot_0,vdot_over_v,adot_plus_0\n");
    for (i, (r, m)) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            format_sci(r.x0),
            r.p,
            r.q,
            format_sci(m.area),
            format_sci(m.volume),
            format_sci(m.volume_rate),
            format_sci(m.volume_rate_ratio()),
            format_sci(m.area_rate.hessian_form)
        );
    }
    out
}

/// `x,y,contour_id`; closed contours repeat their first point.
pub fn contours_csv(contours: &[Contour]) -> String {
    let mut out = String::from("x,y,contour_id\n");
    for (id, c) in contours.iter().enumerate() {
        let closing = if c.closed { c.points.first() } else { None };
        for p in c.points.iter().chain(closing) {
            let _ = writeln!(out, "{},{},{}", format_sci(p.x), format_sci(p.y), id);
        }
    }
    out
}

const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Fourth-order first and second derivatives of a uniformly sampled line,
/// one-sided near the ends.
fn line_derivatives(f: &[f64], h: f64, d1: &mut [f64], d2: &mut [f64]) {
    let n = f.len();
    let dot = |c: &[f64], start: usize, stride: isize| -> f64 {
        c.iter()
            .enumerate()
            .map(|(k, w)| w * f[(start as isize + stride * k as isize) as usize])
            .sum()
    };
    let s1 = 12.0 * h;
    let s2 = 12.0 * h * h;
    for i in 0..n {
        (d1[i], d2[i]) = if i == 0 {
            (dot(&D1_EDGE0, 0, 1) / s1, dot(&D2_EDGE0, 0, 1) / s2)
        } else if i == 1 {
            (dot(&D1_EDGE1, 0, 1) / s1, dot(&D2_EDGE1, 0, 1) / s2)
        } else if i == n - 1 {
            (
                -dot(&D1_EDGE0, n - 1, -1) / s1,
                dot(&D2_EDGE0, n - 1, -1) / s2,
            )
        } else if i == n - 2 {
            (
                -dot(&D1_EDGE1, n - 1, -1) / s1,
                dot(&D2_EDGE1, n - 1, -1) / s2,
            )
        } else {
            (
                dot(&D1_CENTRAL, i - 2, 1) / s1,
                dot(&D2_CENTRAL, i - 2, 1) / s2,
            )
        };
    }
}

/// Right-hand side `2W + x∂xW + y∂yW + D ΔW` on the grid, with fourth-order
/// finite differences.
pub fn fokker_planck_rhs(grid: &WignerGrid, reservoir: &ReservoirParams) -> Result<WignerGrid> {
    let spec = *grid.spec();
    if spec.nx < 6 || spec.ny < 6 {
        return Err(Error::Config(
            "finite differences need at least 6 points per axis".into(),
        ));
    }
    WignerGrid::new(
        spec,
        fp_rhs_values(&spec, grid.values(), reservoir.diffusion()),
    )
}

fn fp_rhs_values(spec: &GridSpec, w: &[f64], diffusion: f64) -> Vec<f64> {
    let (nx, ny) = (spec.nx, spec.ny);
    let (dx, dy) = (spec.dx(), spec.dy());
    let mut out = vec![0.0; nx * ny];
    // x derivatives row by row.
    out.par_chunks_mut(nx)
        .zip(w.par_chunks(nx))
        .for_each(|(o, row)| {
            let mut d1 = vec![0.0; nx];
            let mut d2 = vec![0.0; nx];
            line_derivatives(row, dx, &mut d1, &mut d2);
            for i in 0..nx {
                o[i] = 2.0 * row[i] + spec.x(i) * d1[i] + diffusion * d2[i];
            }
        });
    // y derivatives column by column.
    let columns: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let col: Vec<f64> = (0..ny).map(|j| w[j * nx + i]).collect();
            let mut d1 = vec![0.0; ny];
            let mut d2 = vec![0.0; ny];
            line_derivatives(&col, dy, &mut d1, &mut d2);
            (0..ny)
                .map(|j| spec.y(j) * d1[j] + diffusion * d2[j])
                .collect()
        })
        .collect();
    for (i, col) in columns.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            out[j * nx + i] += v;
        }
    }
    out
}

/// Integrates the Fokker–Planck equation with RK4 in steps of at most `dt`,
/// holding the boundary ring at its initial values. `dt` must satisfy
/// `dt <= 0.2 h² / D`.
pub fn fd_evolve(
    grid: &WignerGrid,
    reservoir: &ReservoirParams,
    tau: f64,
    dt: f64,
) -> Result<WignerGrid> {
    check_tau(tau)?;
    let spec = *grid.spec();
    if spec.nx < 6 || spec.ny < 6 {
        return Err(Error::Config(
            "finite differences need at least 6 points per axis".into(),
        ));
    }
    let h = spec.dx().min(spec.dy());
    let d = reservoir.diffusion();
    let limit = 0.2 * h * h / d;
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::Config(format!(
            "dt = {dt:.3e} violates the stability bound {limit:.3e}"
        )));
    }
    if tau == 0.0 {
        return Ok(grid.clone());
    }
    let steps = (tau / dt).ceil() as usize;
    let step = tau / steps as f64;
    let (nx, ny) = (spec.nx, spec.ny);
    let interior = |k: usize| {
        let (i, j) = (k % nx, k / nx);
        i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
    };
    let rhs = |w: &[f64]| -> Vec<f64> {
        let mut r = fp_rhs_values(&spec, w, d);
        r.iter_mut()
            .enumerate()
            .filter(|(k, _)| !interior(*k))
            .for_each(|(_, v)| *v = 0.0);
        r
    };
    let axpy = |w: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        w.par_iter().zip(k).map(|(w, k)| w + a * k).collect()
    };
    let mut w = grid.values().to_vec();
    for _ in 0..steps {
        let k1 = rhs(&w);
        let k2 = rhs(&axpy(&w, &k1, 0.5 * step));
        let k3 = rhs(&axpy(&w, &k2, 0.5 * step));
        let k4 = rhs(&axpy(&w, &k3, step));
        w.par_iter_mut().enumerate().for_each(|(i, v)| {
            *v += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        });
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalInstability(
                "finite-difference evolution diverged".into(),
            ));
        }
    }
    WignerGrid::new(spec, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::{CoherentWigner, FnWigner, ThermalWigner};
    use num_complex::Complex64;

    fn disc(r0: f64) -> impl PhaseSpaceFunction {
        FnWigner(move |x: f64, y: f64| {
            Ok((1.0 - (x * x + y * y) / (r0 * r0)) * (-(x * x + y * y)).exp())
        })
    }

    #[test]
    fn disc_patch_geometry() {
        let r0 = 0.9;
        let f = disc(r0);
        let c = central_patch(&f).unwrap();
        assert!(c.len() >= MIN_VERTICES);
        for p in &c.points {
            assert!((p.x.hypot(p.y) - r0).abs() < 1e-9);
        }
        let area = patch_area(&c).unwrap();
        // Cubic-spline error at 256 vertices is O(1e-9).
        assert!((area - PI * r0 * r0).abs() < 1e-8, "{area}");
        // ∫ (1 - r²/r0²) e^{-r²} 2πr dr on [0, r0].
        let e = (-r0 * r0).exp();
        let exact = PI * ((1.0 - e) - (1.0 - e * (1.0 + r0 * r0)) / (r0 * r0));
        let v = patch_volume(&c, &f).unwrap();
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn disc_area_rate_matches_radial_formula() {
        let r0 = 0.9;
        let f = disc(r0);
        let reservoir = ReservoirParams::new(0.5).unwrap();
        let c = central_patch(&f).unwrap();
        let rate = area_rate(&c, &f, &reservoir, 1.0).unwrap();
        // W(r) = (1 - r²/r0²) e^{-r²}: W' and W'' at r0.
        let e = (-r0 * r0).exp();
        let w1 = -2.0 / r0 * e;
        let w2 = (-2.0 / (r0 * r0) + 8.0) * e;
        let expected = circular_area_rate(r0, w1, w2, 0.5).unwrap();
        assert!(
            (rate.laplacian_form - expected).abs() < 1e-6,
            "{rate:?} vs {expected}"
        );
        assert!(
            (rate.hessian_form - expected).abs() < 1e-6,
            "{rate:?} vs {expected}"
        );
    }

    #[test]
    fn circular_rate_edge_cases() {
        assert_eq!(circular_area_rate(0.0, 0.0, 1.0, 0.5).unwrap(), -2.0 * PI);
        assert!(matches!(
            circular_area_rate(0.5, 0.0, 1.0, 0.5),
            Err(Error::SingularProfile(_))
        ));
    }

    #[test]
    fn disc_volume_rate_is_diffusive_flux() {
        let r0 = 0.9;
        let f = disc(r0);
        let reservoir = ReservoirParams::new(1.0).unwrap();
        let c = central_patch(&f).unwrap();
        let w1 = -2.0 / r0 * (-r0 * r0).exp();
        let expected = PATCH_VOLUME_SCALE * reservoir.diffusion() * 2.0 * PI * r0 * w1;
        let got = volume_rate(&c, &f, &reservoir).unwrap();
        assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
    }

    #[test]
    fn negative_origin_has_no_patch() {
        let f = FnWigner(|x: f64, y: f64| Ok(x * x + y * y - 1.0));
        assert!(matches!(central_patch(&f), Err(Error::NoCentralPatch(_))));
    }

    #[test]
    fn positive_everywhere_is_region_too_small() {
        let f = ThermalWigner { n_bar: 0.0 };
        assert!(matches!(central_patch(&f), Err(Error::RegionTooSmall)));
    }

    #[test]
    fn marching_squares_finds_rings() {
        let f = FnWigner(|x: f64, y: f64| Ok((3.0 * x.hypot(y)).cos()));
        let roi = GridSpec::square(2.5, 201).unwrap();
        let contours = extract_zero_contours(&f, roi).unwrap();
        let closed: Vec<_> = contours.iter().filter(|c| c.closed).collect();
        assert!(closed.len() >= 2);
        let inner = closed
            .iter()
            .filter(|c| c.contains(PhasePoint::origin()))
            .min_by(|a, b| a.polygon_area().total_cmp(&b.polygon_area()))
            .unwrap();
        let r = PI / 6.0;
        for p in &inner.points {
            assert!((p.x.hypot(p.y) - r).abs() < 1e-9);
        }
        assert!(inner.polygon_area() > 0.0);
        let a = patch_area(inner).unwrap();
        assert!((a - PI * r * r).abs() < 1e-6, "{a}");
    }

    #[test]
    fn open_contours_are_flagged() {
        let f = FnWigner(|x: f64, _y: f64| Ok(x - 0.1));
        let contours = extract_zero_contours(&f, GridSpec::square(1.0, 21).unwrap()).unwrap();
        assert_eq!(contours.len(), 1);
        assert!(!contours[0].closed);
        assert!(matches!(
            patch_area(&contours[0]),
            Err(Error::RegionTooSmall)
        ));
    }

    #[test]
    fn coarse_contour_rejected() {
        let c = Contour {
            points: (0..5)
                .map(|k| PhasePoint::new((k as f64).cos(), (k as f64).sin()))
                .collect(),
            closed: true,
        };
        assert!(matches!(patch_area(&c), Err(Error::ContourResolution(5))));
    }

    #[test]
    fn fp_rhs_vanishes_on_thermal_state() {
        let reservoir = ReservoirParams::new(0.7).unwrap();
        let spec = GridSpec::square(7.0, 281).unwrap();
        let grid = ThermalWigner { n_bar: 0.7 }.sample(spec).unwrap();
        let r = fokker_planck_rhs(&grid, &reservoir).unwrap();
        assert!(r.max_abs() < 1e-6, "{}", r.max_abs());
    }

    #[test]
    fn fd_evolve_tracks_coherent_state() {
        let reservoir = ReservoirParams::new(0.5).unwrap();
        let alpha = Complex64::new(1.0, 0.5);
        let spec = GridSpec::square(7.0, 141).unwrap();
        let start = CoherentWigner::new(alpha).sample(spec).unwrap();
        let dt = 0.2 * spec.dx().powi(2) / reservoir.diffusion();
        let got = fd_evolve(&start, &reservoir, 0.2, dt).unwrap();
        let exact = CoherentWigner::evolved(alpha, &reservoir, 0.2)
            .unwrap()
            .sample(spec)
            .unwrap();
        assert!(got.max_abs_diff(&exact).unwrap() < 1e-5);
        assert!(matches!(
            fd_evolve(&start, &reservoir, 0.2, 2.0 * dt),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fourth_order_line_derivatives() {
        let h = 0.05;
        let f: Vec<f64> = (0..40).map(|i| (i as f64 * h).sin()).collect();
        let mut d1 = vec![0.0; 40];
        let mut d2 = vec![0.0; 40];
        line_derivatives(&f, h, &mut d1, &mut d2);
        for i in 0..40 {
            let x = i as f64 * h;
            assert!((d1[i] - x.cos()).abs() < 1e-5, "d1 at {i}");
            assert!((d2[i] + x.sin()).abs() < 1e-4, "d2 at {i}");
        }
    }
}
