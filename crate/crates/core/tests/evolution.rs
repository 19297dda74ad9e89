use helicore::elliptic::{EllipticOperator, PolarGrid, ScalarField};
use helicore::evolution::{
    advect, default_dt, evolve, step, stream_solve, vorticity_source, EvolutionState, EvolveOptions,
};
use helicore::sampling::Interp;
use helicore::Error;

fn op(n: usize) -> EllipticOperator {
    EllipticOperator::assemble(PolarGrid::new(n, n, 2.0).unwrap(), 1.0).unwrap()
}

fn blob(g: PolarGrid, c: [f64; 2], w: f64, amp: f64) -> ScalarField {
    ScalarField::from_xy_fn(g, |x| amp * (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (w * w)).exp())
}

fn state(o: &EllipticOperator, swirl: f64) -> EvolutionState {
    let g = o.grid;
    let v = blob(g, [0.6, 0.1], 0.25, swirl);
    let w = blob(g, [0.6, 0.1], 0.2, 5.0).zip(&blob(g, [-0.4, -0.3], 0.2, 3.0), |a, b| a + b);
    let phi = stream_solve(&v, &w, o, 1e-11).unwrap();
    EvolutionState { t: 0.0, v, w, phi }
}

#[test]
fn zero_swirl_stays_zero_and_w_is_transported() {
    let o = op(64);
    let s0 = state(&o, 0.0);
    assert_eq!(vorticity_source(&s0.v, &s0.phi, 1.0).max_abs(), 0.0);
    let dt = default_dt(&s0.phi, 0.5);
    let traj = evolve(&s0, 10.0 * dt, dt, &o, &EvolveOptions::default(), 0);
    let s = &traj.last;
    assert_eq!(s.v.max_abs(), 0.0);
    assert!(s.w.max() <= s0.w.max() + 1e-10 && s.w.min() >= s0.w.min() - 1e-10);
    let drift = (s.w.integral() - s0.w.integral()).abs() / s0.w.integral();
    assert!(drift < 1e-3, "{drift}");
}

#[test]
fn swirl_extrema_do_not_grow() {
    let o = op(64);
    let s0 = state(&o, 1.5);
    let dt = default_dt(&s0.phi, 0.5);
    let traj = evolve(&s0, 20.0 * dt, dt, &o, &EvolveOptions::default(), 0);
    assert!(traj.failure.is_none());
    let (lo, hi) = (s0.v.min(), s0.v.max());
    let s = &traj.last;
    assert!(s.v.max() <= hi + 1e-10 && s.v.min() >= lo - 1e-10);
}

#[test]
fn stream_function_vanishes_on_the_outer_ring_limit() {
    let o = op(64);
    let s0 = state(&o, 1.0);
    let s1 = step(&s0, default_dt(&s0.phi, 0.5), &o, &EvolveOptions::default()).unwrap();
    // cell centres of the outer ring sit half a cell inside the boundary
    let g = o.grid;
    let edge = (0..g.n_theta).map(|j| s1.phi.get(g.n_r - 1, j).abs()).fold(0.0, f64::max);
    assert!(edge < 2.0 * g.dr() * s1.phi.max_abs(), "{edge}");
}

#[test]
fn trajectory_has_one_row_per_step() {
    let o = op(32);
    let s0 = state(&o, 1.0);
    let dt = default_dt(&s0.phi, 0.5);
    let t_end = 7.3 * dt;
    let traj = evolve(&s0, t_end, dt, &o, &EvolveOptions::default(), 3);
    assert_eq!(traj.rows.len(), (t_end / dt).ceil() as usize + 1);
    assert_eq!(traj.last.t, t_end);
    assert_eq!(traj.checkpoints.len(), 1 + 2 + 1);
}

/// Average of the 2x2 children of each coarse cell.
fn restrict(fine: &ScalarField, coarse: PolarGrid) -> ScalarField {
    let fg = fine.grid;
    let mut out = ScalarField::zeros(coarse);
    for i in 0..coarse.n_r {
        for j in 0..coarse.n_theta {
            let mut m = 0.0;
            let mut a = 0.0;
            for di in 0..2 {
                for dj in 0..2 {
                    let w = fg.cell_area(2 * i + di);
                    m += w * fine.get(2 * i + di, 2 * j + dj);
                    a += w;
                }
            }
            out.set(i, j, m / a);
        }
    }
    out
}

#[test]
fn forward_backward_recovers_the_start() {
    let (o, of) = (op(64), op(128));
    let s0 = state(&o, 1.0);
    let sf = state(&of, 1.0);
    let dt = default_dt(&sf.phi, 0.5);
    let t = 20.0 * dt;
    let opts = EvolveOptions::default();
    let fwd = evolve(&s0, t, dt, &o, &opts, 0).last;
    let back = evolve(&fwd, 0.0, -dt, &o, &opts, 0).last;
    let fine = evolve(&sf, t, 0.5 * dt, &of, &opts, 0).last;
    let rel = |a: &ScalarField, b: &ScalarField| a.zip(b, |x, y| x - y).l2_norm() / b.l2_norm();
    let (fv, fw) = (restrict(&fine.v, o.grid), restrict(&fine.w, o.grid));
    let one_way = rel(&fwd.w, &fw).max(rel(&fwd.v, &fv));
    let round = rel(&back.w, &s0.w).max(rel(&back.v, &s0.v));
    assert!(round <= 2.0 * one_way, "round trip {round}, one way {one_way}");
}

#[test]
fn cfl_violation_names_the_admissible_step() {
    let o = op(32);
    let s0 = state(&o, 1.0);
    let dt = default_dt(&s0.phi, 0.5);
    match step(&s0, 100.0 * dt, &o, &EvolveOptions::default()) {
        Err(Error::Stability(m)) => assert!(m.contains("admissible"), "{m}"),
        other => panic!("expected a stability error, got {other:?}"),
    }
}

#[test]
fn limited_cubic_conserves_better_than_bilinear() {
    let o = op(64);
    let s0 = state(&o, 1.0);
    let dt = default_dt(&s0.phi, 0.5);
    let m0 = s0.v.integral();
    let drift = |interp| {
        let mut f = s0.v.clone();
        for _ in 0..40 {
            f = advect(&f, &s0.phi, dt, interp).unwrap();
        }
        (f.integral() - m0).abs() / m0
    };
    let lin = drift(Interp::Bilinear);
    let cub = drift(Interp::CubicLimited);
    assert!(cub < lin, "cubic {cub} bilinear {lin}");
}
