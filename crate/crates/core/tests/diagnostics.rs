use helicore::diagnostics::{
    filament_distance, fit_line, rescaled_profile, scaling_sweep, support_metrics, DEFAULT_WINDOW,
};
use helicore::elliptic::{PolarGrid, ScalarField};
use helicore::geometry::{rotate, t_matrix, ProblemConfig};
use helicore::variational::MaximizeOptions;

fn cfg(eps: f64) -> ProblemConfig {
    ProblemConfig::new(1.0, 1.0, 1.0, 2.0, eps, 1.0, 0.0, 30.0).unwrap()
}

fn bump(g: PolarGrid, c: [f64; 2], rho: f64, amp: f64) -> ScalarField {
    ScalarField::from_xy_fn(g, |x| {
        let d2 = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (rho * rho);
        if d2 < 1.0 {
            amp * (1.0 - d2).powi(3)
        } else {
            0.0
        }
    })
}

#[test]
fn metrics_follow_a_cell_rotation() {
    let g = PolarGrid::new(64, 96, 2.0).unwrap();
    let z = bump(g, [0.9, 0.3], 0.35, 10.0);
    let a = support_metrics(&z, 30.0).unwrap();
    for shift in [5isize, -17, 48] {
        let b = support_metrics(&z.rotate_cells(shift), 30.0).unwrap();
        assert_eq!((a.r_min, a.r_max, a.cells), (b.r_min, b.r_max, b.cells));
        assert!((a.diameter - b.diameter).abs() < 1e-12);
        assert!((a.mass - b.mass).abs() < 1e-12 * a.mass);
        assert!((a.inertia - b.inertia).abs() < 1e-12 * a.inertia);
        let c = rotate(-(shift as f64) * g.dtheta(), a.center);
        assert!((c[0] - b.center[0]).abs() < 1e-12 && (c[1] - b.center[1]).abs() < 1e-12);
    }
}

#[test]
fn ring_metrics_match_the_annulus() {
    let g = PolarGrid::new(80, 128, 2.0).unwrap();
    let z = ScalarField::from_polar_fn(g, |r, _| if (0.5..0.8).contains(&r) { 2.0 } else { 0.0 });
    let m = support_metrics(&z, 2.0).unwrap();
    let dr = g.dr();
    assert!((m.r_min - (0.5 + 0.5 * dr)).abs() < 1e-12);
    assert!((m.r_max - (0.8 - 0.5 * dr)).abs() < 1e-12);
    assert!((m.diameter - 2.0 * m.r_max).abs() < 1e-12);
    assert!(m.center[0].hypot(m.center[1]) < 1e-12);
    let pi = std::f64::consts::PI;
    let area = pi * (0.8f64.powi(2) - 0.25);
    assert!((m.mass - 2.0 * area).abs() < 1e-12 * area);
    assert!((m.clamp_area - area).abs() < 1e-12 * area);
    let inertia = 0.5 * pi * (0.8f64.powi(4) - 0.5f64.powi(4));
    assert!((m.inertia - inertia).abs() < 1e-3 * inertia);
}

#[test]
fn empty_or_negative_fields_are_rejected() {
    let g = PolarGrid::new(16, 16, 2.0).unwrap();
    assert!(support_metrics(&ScalarField::zeros(g), 1.0).is_err());
    let mut z = bump(g, [0.5, 0.0], 0.5, 1.0);
    z.set(15, 0, -1.0);
    assert!(support_metrics(&z, 1.0).is_err());
}

#[test]
fn line_fit_recovers_an_exact_line() {
    let x = [1.0, 2.0, 4.0, 7.0];
    let y: Vec<f64> = x.iter().map(|t| 0.25 - 1.5 * t).collect();
    let f = fit_line(&x, &y).unwrap();
    assert!((f.slope + 1.5).abs() < 1e-14 && (f.intercept - 0.25).abs() < 1e-14);
    assert_eq!(f.points, 4);
    assert!(fit_line(&[1.0], &[2.0]).is_none());
}

#[test]
fn rescaled_mass_is_the_stretched_mass() {
    let c = cfg(0.05);
    let g = PolarGrid::new(256, 256, 2.0).unwrap();
    let z = bump(g, [0.8, 0.4], 4.0 * c.eps, 1.0 / (c.eps * c.eps));
    let p = rescaled_profile(&z, &c, DEFAULT_WINDOW, 128, 128).unwrap();
    let expect = t_matrix(c.h, p.center).det() * z.integral();
    assert!((p.mass - expect).abs() < 2e-2 * expect, "{} vs {expect}", p.mass);
    assert!(rescaled_profile(&z, &c, 40.0, 32, 32).is_err());
}

#[test]
fn filament_distance_is_steady_when_the_pattern_rotates_with_the_crossing() {
    let c = cfg(0.05);
    let helix = c.helix();
    assert!((helix.crossing_rate() - c.alpha()).abs() < 1e-12 * c.alpha());
    let g = PolarGrid::new(128, 256, 2.0).unwrap();
    let z = bump(g, helix.plane_crossing(0.0), 0.2, 5.0);
    let d = filament_distance(&z, &c, &[0.0, 0.5, 1.3, 4.0]);
    for e in &d {
        assert!((e.distance - d[0].distance).abs() < 1e-12, "{d:?}");
    }
    assert!(d[0].distance < 0.2 + g.dr());
}

#[test]
fn coarse_sweep_produces_fits() {
    let g = PolarGrid::new(48, 48, 2.0).unwrap();
    let opts = MaximizeOptions { max_iters: 300, ..Default::default() };
    let rep = scaling_sweep(&[0.1, 0.2, 0.15], &cfg(0.1), g, &opts).unwrap();
    let eps: Vec<f64> = rep.rows.iter().map(|r| r.eps).collect();
    assert_eq!(eps, vec![0.2, 0.15, 0.1]);
    assert!(rep.rows.iter().all(|r| r.error.is_none() && r.metrics.is_some()));
    assert_eq!(rep.energy_fit.unwrap().points, 3);
    assert_eq!(rep.diameter_fit.unwrap().points, 3);
    assert!(rep.energy_slope_target > 0.0);
    assert!(scaling_sweep(&[0.1, 0.2], &cfg(0.1), g, &opts).is_err());
}
