use compass_core::grid::GridSpec;
use compass_core::patch::{
    central_patch, circular_area_rate, compass_patch_metrics, contours_csv, extract_zero_contours,
    fd_evolve, fokker_planck_rhs, patch_area, patch_table_csv, patch_volume, Contour,
    PatchReference, PATCH_REFERENCE, PATCH_VOLUME_SCALE,
};
use compass_core::wigner::{
    CoherentWigner, CompassWigner, PhasePoint, PhaseSpaceFunction, ThermalWigner,
};
use compass_core::{CompassParams, ReservoirParams};
use num_complex::Complex64;

const HALF: ReservoirParams = ReservoirParams { n_bar: 0.5 };

fn compass(x0: f64, p: usize, q: usize) -> CompassWigner {
    CompassWigner::new(CompassParams::new(x0, p, q).unwrap()).unwrap()
}

/// Area and scaled volume of the traced central patch at `tau`.
fn traced(w: &CompassWigner, tau: f64) -> (f64, f64) {
    let f = w.at_time(&HALF, tau).unwrap();
    let c = central_patch(&f).unwrap();
    (
        patch_area(&c).unwrap(),
        PATCH_VOLUME_SCALE * patch_volume(&c, &f).unwrap(),
    )
}

/// Richardson-combined second-order forward differences at steps `2d` and `d`.
fn forward_rate(w: &CompassWigner, d: f64) -> (f64, f64) {
    let (a0, v0) = traced(w, 0.0);
    let (a1, v1) = traced(w, d);
    let (a2, v2) = traced(w, 2.0 * d);
    let (a4, v4) = traced(w, 4.0 * d);
    let second = |f0: f64, f1: f64, f2: f64, h: f64| (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
    let fine = (second(a0, a1, a2, d), second(v0, v1, v2, d));
    let coarse = (second(a0, a2, a4, 2.0 * d), second(v0, v2, v4, 2.0 * d));
    (
        (4.0 * fine.0 - coarse.0) / 3.0,
        (4.0 * fine.1 - coarse.1) / 3.0,
    )
}

#[test]
fn boundary_rates_match_time_derivatives_of_the_traced_patch() {
    for (x0, p, q) in [(3.0, 0, 0), (1.5, 14, 14)] {
        let w = compass(x0, p, q);
        let m = compass_patch_metrics(w.params(), &HALF, 0.0).unwrap();
        let (adot, vdot) = forward_rate(&w, 1e-3);
        assert!(
            (m.area_rate.hessian_form - adot).abs() <= 1e-3 * adot.abs().max(0.1),
            "X0={x0}: boundary {} vs traced {adot}",
            m.area_rate.hessian_form
        );
        assert!(
            (m.volume_rate - vdot).abs() <= 2e-3 * vdot.abs(),
            "X0={x0}: boundary {} vs traced {vdot}",
            m.volume_rate
        );
    }
}

#[test]
fn central_contour_invariants() {
    for r in &PATCH_REFERENCE[..3] {
        let w = CompassWigner::new(r.params()).unwrap();
        let f = w.at_time(&HALF, 0.0).unwrap();
        let c = central_patch(&f).unwrap();
        assert!(c.closed && c.len() >= 256);
        assert!(c.polygon_area() > 0.0);
        assert!(c.contains(PhasePoint::origin()));
        for p in &c.points {
            assert!(f.at_point(*p).unwrap().abs() <= 1e-8);
        }
    }
}

#[test]
fn marching_squares_agrees_with_ray_tracing() {
    let w = compass(3.0, 0, 0);
    let f = w.at_time(&HALF, 0.0).unwrap();
    let traced = patch_area(&central_patch(&f).unwrap()).unwrap();
    let contours = extract_zero_contours(&f, GridSpec::square(1.2, 241).unwrap()).unwrap();
    let inner: &Contour = contours
        .iter()
        .filter(|c| c.closed && c.contains(PhasePoint::origin()))
        .min_by(|a, b| a.polygon_area().total_cmp(&b.polygon_area()))
        .expect("closed contour around the origin");
    let gridded = patch_area(inner).unwrap();
    assert!((gridded - traced).abs() < 1e-6, "{gridded} vs {traced}");
    for p in &inner.points {
        assert!(f.at_point(*p).unwrap().abs() <= 1e-10);
    }
}

#[test]
fn no_contours_for_positive_states() {
    let vacuum = ThermalWigner { n_bar: 0.0 };
    assert!(
        extract_zero_contours(&vacuum, GridSpec::square(3.0, 61).unwrap())
            .unwrap()
            .is_empty()
    );
    let lobe = CoherentWigner::new(Complex64::new(3.0 / 2f64.sqrt(), 0.0));
    assert!(
        extract_zero_contours(&lobe, GridSpec::square(1.0, 41).unwrap())
            .unwrap()
            .is_empty()
    );
}

#[test]
fn circular_reduction_for_the_isotropic_state() {
    let w = compass(0.5, 14, 14);
    let f = w.at_time(&HALF, 0.0).unwrap();
    let m = compass_patch_metrics(w.params(), &HALF, 0.0).unwrap();
    let r = (m.area / std::f64::consts::PI).sqrt();
    // Angle-averaged radial derivatives at the equivalent radius.
    let h = 1e-3;
    let (mut w1, mut w2) = (0.0, 0.0);
    let angles = 64;
    for k in 0..angles {
        let t = std::f64::consts::TAU * k as f64 / angles as f64;
        let g = |s: f64| f.value(s * t.cos(), s * t.sin()).unwrap();
        let (gp, g0, gm) = (g(r + h), g(r), g(r - h));
        w1 += (gp - gm) / (2.0 * h) / angles as f64;
        w2 += (gp - 2.0 * g0 + gm) / (h * h) / angles as f64;
    }
    let approx = circular_area_rate(r, w1, w2, HALF.n_bar).unwrap();
    let full = m.area_rate.hessian_form;
    assert!(
        (approx - full).abs() <= 0.03 * full.abs(),
        "circular {approx} vs full {full}"
    );
}

#[test]
fn patch_table_ordering_and_signs() {
    let rows: Vec<_> = PATCH_REFERENCE[..2]
        .iter()
        .chain(&PATCH_REFERENCE[4..])
        .map(|r| (*r, compass_patch_metrics(&r.params(), &HALF, 0.0).unwrap()))
        .collect();
    for (_, m) in &rows {
        assert!(m.volume > 0.0 && m.volume_rate < 0.0);
    }
    let mut sorted: Vec<&(PatchReference, _)> = rows.iter().collect();
    sorted.sort_by(|a, b| a.1.area.total_cmp(&b.1.area));
    for pair in sorted.windows(2) {
        assert!(pair[0].1.volume_rate_ratio() < pair[1].1.volume_rate_ratio());
    }
    let csv = patch_table_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("i,X0,p,q,a_plus_0,v_0,vdot_0,vdot_over_v,adot_plus_0")
    );
    assert!(lines.next().unwrap().starts_with("1,3.000000e+00,0,0,5.04"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn contour_csv_closes_polylines() {
    let c = Contour {
        points: vec![
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 0.0),
            PhasePoint::new(0.0, 1.0),
        ],
        closed: true,
    };
    let csv = contours_csv(&[c]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,y,contour_id");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1], lines[4]);
}

#[test]
fn fokker_planck_rhs_fixed_points_converge_at_fourth_order() {
    for (n_bar, reservoir) in [(0.0, ReservoirParams::zero_temperature()), (0.5, HALF)] {
        let residual = |n: usize| {
            let spec = GridSpec::square(7.0, n).unwrap();
            let g = ThermalWigner { n_bar }.sample(spec).unwrap();
            fokker_planck_rhs(&g, &reservoir).unwrap().max_abs()
        };
        let (coarse, fine) = (residual(141), residual(281));
        assert!(fine <= 5e-6, "n_bar={n_bar}: {fine}");
        assert!(
            coarse / fine >= 12.0,
            "n_bar={n_bar}: ratio {}",
            coarse / fine
        );
    }
    let tiny = GridSpec::square(1.0, 5).unwrap();
    assert!(fokker_planck_rhs(&ThermalWigner { n_bar: 0.0 }.sample(tiny).unwrap(), &HALF).is_err());
}

#[test]
fn fokker_planck_rhs_matches_the_propagator() {
    let w = compass(3.0, 0, 0);
    let spec = GridSpec::square(9.0, 451).unwrap();
    let g0 = w.at_time(&HALF, 0.0).unwrap().sample(spec).unwrap();
    let rhs = fokker_planck_rhs(&g0, &HALF).unwrap();
    // Second-order one-sided difference in τ with h = 1e-4.
    let h = 1e-4;
    let g1 = w.at_time(&HALF, h).unwrap().sample(spec).unwrap();
    let g2 = w.at_time(&HALF, 2.0 * h).unwrap().sample(spec).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let dt = (-3.0 * g0.at(i, j) + 4.0 * g1.at(i, j) - g2.at(i, j)) / (2.0 * h);
            worst = worst.max((dt - rhs.at(i, j)).abs());
        }
    }
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn fd_evolve_reproduces_the_damped_vacuum() {
    let spec = GridSpec::square(7.0, 141).unwrap();
    let start = ThermalWigner { n_bar: 0.0 }.sample(spec).unwrap();
    let dt = 0.2 * spec.dx().powi(2) / HALF.diffusion();
    assert_eq!(fd_evolve(&start, &HALF, 0.0, dt).unwrap(), start);
    let got = fd_evolve(&start, &HALF, 0.5, dt).unwrap();
    let exact = CoherentWigner::evolved(Complex64::new(0.0, 0.0), &HALF, 0.5)
        .unwrap()
        .sample(spec)
        .unwrap();
    assert!(got.max_abs_diff(&exact).unwrap() <= 1e-4);
}

#[test]
fn fd_evolve_matches_series_for_patch_states() {
    let spec = GridSpec::square(8.0, 321).unwrap();
    let dt = 0.2 * spec.dx().powi(2) / HALF.diffusion();
    for r in &PATCH_REFERENCE {
        let w = CompassWigner::new(r.params()).unwrap();
        let start = w.at_time(&HALF, 0.0).unwrap().sample(spec).unwrap();
        let fd = fd_evolve(&start, &HALF, 0.06, dt).unwrap();
        let series = w.at_time(&HALF, 0.06).unwrap().sample(spec).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                if spec.x(i).abs() <= 4.0 && spec.y(j).abs() <= 4.0 {
                    worst = worst.max((fd.at(i, j) - series.at(i, j)).abs());
                }
            }
        }
        assert!(worst <= 5e-4, "X0={} p={} q={}: {worst}", r.x0, r.p, r.q);
    }
}

#[test]
fn states_without_a_positive_centre_are_rejected() {
    // One added photon on the vacuum is |1⟩, negative at the origin.
    let w = compass(0.0, 1, 0);
    let f = w.at_time(&HALF, 0.0).unwrap();
    assert!(matches!(
        central_patch(&f),
        Err(compass_core::Error::NoCentralPatch(_))
    ));
}
