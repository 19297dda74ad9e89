use helicore::elliptic::{EllipticOperator, PolarGrid, ScalarField};
use helicore::geometry::ProblemConfig;
use helicore::variational::{
    apply_profile, check_admissible, energy_parts, maximize, multiplier_lower_bound, rotating_level,
    solve_multiplier, uniform_patch, MaximizeOptions, ProfileParams,
};

fn cfg(eps: f64) -> ProblemConfig {
    ProblemConfig::new(1.0, 1.0, 1.0, 2.0, eps, 1.0, 0.0, 30.0).unwrap()
}

fn setup(n: usize, eps: f64) -> (ProblemConfig, EllipticOperator) {
    let c = cfg(eps);
    let op = EllipticOperator::assemble(PolarGrid::new(n, n, c.big_r).unwrap(), c.h).unwrap();
    (c, op)
}

#[test]
fn maximizer_is_admissible_with_monotone_energy() {
    let (c, op) = setup(96, 0.1);
    let m = maximize(&c, &op, None, &MaximizeOptions::default()).unwrap();
    check_admissible(&m.zeta, &c, 1e-8).unwrap();
    assert!(m.log.windows(2).all(|w| w[1].energy >= w[0].energy - 1e-10));
    assert_eq!(m.clamp_area, 0.0);
    assert!(m.swirl(&c).max() > 0.0);
    assert!(m.mu >= multiplier_lower_bound(&c));
}

#[test]
fn profile_matches_gain_rate_at_the_fixed_point() {
    let (c, op) = setup(96, 0.1);
    let opts = MaximizeOptions {
        tol_energy: 0.0,
        max_iters: 4000,
        ..Default::default()
    };
    let m = maximize(&c, &op, None, &opts).unwrap();
    let p = ProfileParams::from_config(&c);
    let g = m.zeta.grid;
    let e2 = c.eps * c.eps;
    let scale = m.zeta.max() * e2;
    let mut worst: f64 = 0.0;
    for i in 0..g.n_r {
        for j in 0..g.n_theta {
            let psi = m.psi.get(i, j);
            // cells sitting on the free boundary carry the fractional fill
            if psi.abs() < 1e-6 {
                continue;
            }
            worst = worst.max((e2 * m.zeta.get(i, j) - p.gain_rate(g.r(i), psi)).abs());
        }
    }
    assert!(worst < 1e-3 * scale, "worst {worst} against scale {scale}");
}

#[test]
fn rotated_start_gives_rotated_maximizer() {
    let (c, op) = setup(64, 0.1);
    let g = op.grid;
    let shift = 16;
    let ang = shift as f64 * g.dtheta();
    let z0 = uniform_patch(&c, g, [c.r_star, 0.0]).unwrap();
    let z1 = uniform_patch(&c, g, [c.r_star * ang.cos(), c.r_star * ang.sin()]).unwrap();
    assert_eq!(z0.rotate_cells(shift).data, z1.data);
    let opts = MaximizeOptions::default();
    let a = maximize(&c, &op, Some(&z0), &opts).unwrap();
    let b = maximize(&c, &op, Some(&z1), &opts).unwrap();
    assert!((a.energy - b.energy).abs() < 1e-9 * a.energy.abs());
    let d = a.zeta.rotate_cells(shift).zip(&b.zeta, |x, y| x - y).l1_norm();
    assert!(d < 1e-6 * c.kappa, "{d}");
}

#[test]
fn mass_is_nonincreasing_in_the_multiplier() {
    let (c, op) = setup(48, 0.1);
    let p = ProfileParams::from_config(&c);
    let z = uniform_patch(&c, op.grid, [1.0, 0.0]).unwrap();
    let level = rotating_level(&op.solve(&z, 1e-10).unwrap(), p.alpha_bar);
    let (lo, hi) = (level.min() - 1.0, level.max());
    let mut prev = f64::INFINITY;
    for k in 0..=400 {
        let mu = lo + (hi - lo) * k as f64 / 400.0;
        let m = apply_profile(&level.map(|v| v - mu), &p, c.cap()).0.integral();
        assert!(m <= prev + 1e-12);
        prev = m;
    }
    let sol = solve_multiplier(&level, &p, c.kappa, c.cap(), 1e-10).unwrap();
    let shifted = solve_multiplier(&level.map(|v| v + 0.25), &p, c.kappa, c.cap(), 1e-10).unwrap();
    assert!((shifted.mu - sol.mu - 0.25).abs() < 1e-9);
    assert!(sol.zeta.zip(&shifted.zeta, |a, b| a - b).max_abs() < 1e-6 * sol.zeta.max());
}

#[test]
fn energy_terms_scale_with_mass() {
    let (c, op) = setup(48, 0.1);
    let mut p = ProfileParams::from_config(&c);
    let z = uniform_patch(&c, op.grid, [0.7, 0.2]).unwrap();
    let z2 = z.map(|v| 2.0 * v);
    let e1 = energy_parts(&z, &op.solve(&z, 1e-11).unwrap(), &p);
    let e2 = energy_parts(&z2, &op.solve(&z2, 1e-11).unwrap(), &p);
    assert!((e2.quadratic / e1.quadratic - 4.0).abs() < 1e-8);
    assert!((e2.rotation / e1.rotation - 2.0).abs() < 1e-12);
    p.alpha_bar = 0.0;
    let zero = ScalarField::zeros(op.grid);
    assert_eq!(energy_parts(&zero, &zero, &p).total(), 0.0);
}

#[test]
fn patch_energy_grows_like_the_landscape() {
    // E(patch) - (kappa/2) Y(z) ln(1/eps) stays bounded as eps shrinks
    let mut gaps = Vec::new();
    for (n, eps) in [(128, 0.1), (256, 0.05)] {
        let (c, op) = setup(n, eps);
        let p = ProfileParams::from_config(&c);
        let z = uniform_patch(&c, op.grid, [c.r_star, 0.0]).unwrap();
        let e = energy_parts(&z, &op.solve(&z, 1e-11).unwrap(), &p).total();
        gaps.push(e - 0.5 * c.kappa * c.landscape(c.r_star) * c.ln_inv_eps());
    }
    assert!((gaps[0] - gaps[1]).abs() < 0.05, "{gaps:?}");
}

#[test]
fn tiny_cap_is_infeasible() {
    let c = ProblemConfig::new_relaxed_cap(1.0, 1.0, 1.0, 2.0, 0.1, 1.0, 0.0, 0.06).unwrap();
    let op = EllipticOperator::assemble(PolarGrid::new(16, 16, 2.0).unwrap(), 1.0).unwrap();
    let p = ProfileParams::from_config(&c);
    let level = ScalarField::from_polar_fn(op.grid, |r, _| -r * r);
    assert!(solve_multiplier(&level, &p, 1e3, c.cap(), 1e-8).is_err());
}
