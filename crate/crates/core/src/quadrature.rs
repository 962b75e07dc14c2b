//! Gauss–Legendre rules and a closed cubic spline, used for line and area
//! integrals over zero contours.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Periodic cubic spline through the vertices of a closed polygon,
/// parametrized by cumulative chord length.
#[derive(Debug, Clone)]
pub struct ClosedSpline {
    knots: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    mx: Vec<f64>,
    my: Vec<f64>,
}

impl ClosedSpline {
    /// `points` must not repeat the first vertex at the end and must not
    /// contain coincident neighbours.
    pub fn new(points: &[(f64, f64)]) -> Self {
        let n = points.len();
        assert!(n >= 3, "closed spline needs three vertices");
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(0.0);
        for k in 0..n {
            let (a, b) = (points[k], points[(k + 1) % n]);
            knots.push(knots[k] + (b.0 - a.0).hypot(b.1 - a.1));
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let mx = periodic_second_derivatives(&h, &xs);
        let my = periodic_second_derivatives(&h, &ys);
        Self {
            knots,
            xs,
            ys,
            mx,
            my,
        }
    }

    pub fn segments(&self) -> usize {
        self.xs.len()
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        self.knots[k + 1] - self.knots[k]
    }

    /// Position and derivative on segment `k` at local parameter `t ∈ [0,1]`.
    pub fn eval(&self, k: usize, t: f64) -> ((f64, f64), (f64, f64)) {
        let n = self.xs.len();
        let j = (k + 1) % n;
        let h = self.segment_length(k);
        let a = 1.0 - t;
        let b = t;
        let value = |v: &[f64], m: &[f64]| {
            a * v[k] + b * v[j] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[j]) * h * h / 6.0
        };
        let slope = |v: &[f64], m: &[f64]| {
            (v[j] - v[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m[k]
                + (3.0 * b * b - 1.0) / 6.0 * h * m[j]
        };
        (
            (value(&self.xs, &self.mx), value(&self.ys, &self.my)),
            (slope(&self.xs, &self.mx), slope(&self.ys, &self.my)),
        )
    }
}

/// Solves the cyclic tridiagonal system of a periodic cubic spline by the
/// Sherman–Morrison correction of a plain tridiagonal solve.
fn periodic_second_derivatives(h: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let prev = |i: usize| (i + n - 1) % n;
    let next = |i: usize| (i + 1) % n;
    let sub: Vec<f64> = (0..n).map(|i| h[prev(i)]).collect();
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[prev(i)] + h[i])).collect();
    let sup: Vec<f64> = h.to_vec();
    let rhs: Vec<f64> = (0..n)
        .map(|i| 6.0 * ((v[next(i)] - v[i]) / h[i] - (v[i] - v[prev(i)]) / h[prev(i)]))
        .collect();
    // Corner entries: A[0][n-1] = sub[0], A[n-1][0] = sup[n-1].
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.clone();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(&sub, &d, &sup, &rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(&sub, &d, &sup, &u);
    let factor = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

/// Thomas algorithm; `sub[0]` and `sup[n-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1, 3, 5, 10] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let degree = 2 * n - 1;
            let integral: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * x.powi(degree as i32))
                .sum();
            assert!(
                (integral - 1.0 / (degree + 1) as f64).abs() < 1e-14,
                "n={n}"
            );
        }
    }

    #[test]
    fn spline_reproduces_circle() {
        let n = 256;
        let r = 0.7;
        let points: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                (r * t.cos(), r * t.sin())
            })
            .collect();
        let s = ClosedSpline::new(&points);
        let (gx, gw) = gauss_legendre(3);
        let mut area = 0.0;
        let mut worst: f64 = 0.0;
        for k in 0..s.segments() {
            let h = s.segment_length(k);
            for (t, w) in gx.iter().zip(&gw) {
                let ((x, y), (dx, dy)) = s.eval(k, *t);
                area += 0.5 * w * h * (x * dy - y * dx);
                worst = worst.max((x.hypot(y) - r).abs());
            }
        }
        assert!(worst < 1e-9, "{worst}");
        assert!(((area - PI * r * r) / (PI * r * r)).abs() < 1e-8, "{area}");
    }

    #[test]
    fn cyclic_solver_matches_dense() {
        let h = [0.3, 0.5, 0.2, 0.4, 0.6];
        let v = [1.0, -2.0, 0.5, 3.0, -1.0];
        let m = periodic_second_derivatives(&h, &v);
        let n = v.len();
        for i in 0..n {
            let p = (i + n - 1) % n;
            let q = (i + 1) % n;
            let lhs = h[p] * m[p] + 2.0 * (h[p] + h[i]) * m[i] + h[i] * m[q];
            let rhs = 6.0 * ((v[q] - v[i]) / h[i] - (v[i] - v[p]) / h[p]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
