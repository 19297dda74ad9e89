//! End-to-end acceptance checks, shared by `helicore selftest` and the
//! `acceptance` test target.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{scaling_sweep, ScalingReport};
use crate::elliptic::{green_probe, EllipticOperator, PolarGrid, ScalarField};
use crate::error::Result;
use crate::evolution::{centroid, default_dt, evolve, rotating_state, EvolutionState, EvolveOptions};
use crate::geometry::{helical_map, ProblemConfig};
use crate::reconstruct::{check_structure, default_band, default_fd_step, sample_cloud, HelicalLift};
use crate::variational::{maximize, MaximizeOptions, MaximizerState, ProfileParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub summary: String,
    pub seconds: f64,
    pub details: serde_json::Value,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {} {}: {} ({}; {:.1} s)",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.summary,
            self.seconds
        )
    }
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Result<(bool, String, serde_json::Value)>) -> CriterionReport {
    let t = Instant::now();
    let (pass, summary, details) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}"), serde_json::Value::Null),
    };
    CriterionReport {
        id,
        name: name.to_string(),
        pass,
        summary,
        seconds: t.elapsed().as_secs_f64(),
        details,
    }
}

/// The reference constants `h = kappa = r_star = 1`, `R = 2`, `a = 1`,
/// `b = 0` with `Lambda = 4 (alpha a + b + 1)`.
pub fn reference_config(eps: f64) -> Result<ProblemConfig> {
    let mut cfg = ProblemConfig {
        h: 1.0,
        kappa: 1.0,
        r_star: 1.0,
        big_r: 2.0,
        eps,
        a: 1.0,
        b: 0.0,
        lambda: 1.0,
    };
    cfg.lambda = 4.0 * (cfg.alpha() * cfg.a + cfg.b + 1.0);
    ProblemConfig::new_relaxed_cap(cfg.h, cfg.kappa, cfg.r_star, cfg.big_r, eps, cfg.a, cfg.b, cfg.lambda)
}

pub const REFERENCE_N: usize = 256;
pub const SWEEP_EPS: [f64; 4] = [0.08, 0.05, 0.03, 0.02];
/// Iteration cap for the sweep; small `eps` needs more than the default.
pub const SWEEP_MAX_ITERS: usize = 5000;

/// Maximizer and rotating state at `eps = 0.05` on the reference grid.
pub struct Reference {
    pub cfg: ProblemConfig,
    pub op: EllipticOperator,
    pub max: MaximizerState,
    pub state: EvolutionState,
    /// Wall time spent building it.
    pub seconds: f64,
}

pub fn reference() -> Result<Reference> {
    let t = Instant::now();
    let cfg = reference_config(0.05)?;
    let g = PolarGrid::new(REFERENCE_N, REFERENCE_N, cfg.big_r)?;
    let op = EllipticOperator::assemble(g, cfg.h)?;
    let max = maximize(&cfg, &op, None, &MaximizeOptions::default())?;
    let state = rotating_state(&max, &ProfileParams::from_config(&cfg), &op, 1e-10)?;
    Ok(Reference {
        cfg,
        op,
        max,
        state,
        seconds: t.elapsed().as_secs_f64(),
    })
}

pub fn elliptic_convergence() -> CriterionReport {
    run(1, "elliptic manufactured solution", || {
        let (h, big_r) = (1.0, 2.0);
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let g = PolarGrid::new(n, n, big_r)?;
            let op = EllipticOperator::assemble(g, h)?;
            let f = ScalarField::from_polar_fn(g, |r, _| 4.0 * h.powi(4) / (h * h + r * r).powi(2));
            let u = op.solve(&f, 1e-10)?;
            let ex = ScalarField::from_polar_fn(g, |r, _| big_r * big_r - r * r);
            errs.push(u.zip(&ex, |a, b| a - b).max_abs());
        }
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((
            min >= 1.9,
            format!("max-norm orders {:.3}, {:.3}", orders[0], orders[1]),
            json!({"errors": errs, "orders": orders}),
        ))
    })
}

pub fn green_decomposition() -> CriterionReport {
    run(2, "Green decomposition", || {
        let (h, big_r, n0) = (1.0, 2.0, 128usize);
        let sources = [[0.3, 0.0], [0.0, 0.7], [-1.0, 0.2], [0.9, -0.9]];
        let d0 = 2.0 * big_r / n0 as f64;
        let d1 = big_r / 4.0;
        let seps: Vec<f64> = (0..5).map(|k| d0 * (d1 / d0).powf(k as f64 / 4.0)).collect();
        let mut h0 = [Vec::new(), Vec::new()];
        let mut actual = Vec::new();
        for (level, f) in [1usize, 2].into_iter().enumerate() {
            let g = PolarGrid::new(n0 * f, n0 * f, big_r)?;
            let op = EllipticOperator::assemble(g, h)?;
            for (si, s) in sources.iter().enumerate() {
                let probes: Vec<[f64; 2]> = seps
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        let a = 0.7 * si as f64 + 1.3 * k as f64;
                        [s[0] + d * a.cos(), s[1] + d * a.sin()]
                    })
                    .collect();
                let rep = green_probe(&op, *s, &probes, 1e-12)?;
                for sm in rep.samples {
                    if level == 0 {
                        actual.push(sm.separation);
                    }
                    h0[level].push(sm.regular);
                }
            }
        }
        let var: Vec<f64> = h0[0]
            .iter()
            .zip(&h0[1])
            .map(|(a, b)| (a - b).abs() / b.abs())
            .collect();
        let worst = var.iter().copied().fold(0.0, f64::max);
        let ratios: Vec<f64> = h0[1]
            .chunks(seps.len())
            .map(|c| c[0].abs() / c[c.len() - 1].abs())
            .collect();
        let worst_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let in_range = actual.iter().all(|&s| s >= 2.0 * big_r / (2 * n0) as f64 && s <= d1 * 1.05);
        Ok((
            worst < 0.25 && worst_ratio < 2.0 && in_range,
            format!("worst refinement change {worst:.3}, worst near/far ratio {worst_ratio:.3}"),
            json!({"separations": actual, "coarse": h0[0], "fine": h0[1], "refinement_change": var, "near_far_ratio": ratios}),
        ))
    })
}

pub fn variational_monotonicity(r: &Reference) -> CriterionReport {
    let mut rep = run(3, "variational monotonicity", || {
        let m = &r.max;
        let slack = MaximizeOptions::default().energy_slack;
        let mono = m.log.windows(2).all(|w| w[1].energy >= w[0].energy - slack);
        let cap = r.cfg.cap();
        let bounds = m.zeta.min() >= 0.0 && m.zeta.max() <= cap;
        let mass_err = (m.zeta.integral() - r.cfg.kappa).abs() / r.cfg.kappa;
        Ok((
            mono && bounds && mass_err <= 1e-8 && m.clamp_area == 0.0,
            format!(
                "{} iterations, monotone {mono}, sup zeta / cap {:.3e}, mass error {mass_err:.2e}, clamp area {}",
                m.iterations,
                m.zeta.max() / cap,
                m.clamp_area
            ),
            json!({"energies": m.log.iter().map(|l| l.energy).collect::<Vec<_>>(), "lambda": r.cfg.lambda}),
        ))
    });
    rep.seconds += r.seconds;
    rep
}

pub fn concentration_sweep() -> (CriterionReport, Option<ScalingReport>) {
    let mut out = None;
    let rep = run(4, "concentration asymptotics", || {
        let cfg = reference_config(0.05)?;
        let g = PolarGrid::new(REFERENCE_N, REFERENCE_N, cfg.big_r)?;
        let opts = MaximizeOptions {
            max_iters: SWEEP_MAX_ITERS,
            ..Default::default()
        };
        let s = scaling_sweep(&SWEEP_EPS, &cfg, g, &opts)?;
        let complete = s.rows.iter().all(|r| r.error.is_none());
        let slope = s.diameter_fit.map(|f| f.slope).unwrap_or(f64::NAN);
        let c1 = (0.8..=1.2).contains(&slope);
        let c2 = s.center_offsets_decrease();
        let inertia = s.final_inertia_error().unwrap_or(f64::NAN);
        let c3 = inertia < 0.05;
        let e_err = s.energy_slope_error().unwrap_or(f64::NAN);
        let c4 = e_err <= 0.2;
        let offsets: Vec<f64> = s.rows.iter().map(|r| r.center_offset).collect();
        let summary = format!(
            "(i) diameter slope {slope:.3} {}; (ii) centre offsets {:?} {}; (iii) inertia error {inertia:.3} {}; (iv) energy slope {:.4} vs {:.4} {}",
            tag(c1),
            offsets.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>(),
            tag(c2),
            tag(c3),
            s.energy_fit.map(|f| f.slope).unwrap_or(f64::NAN),
            s.energy_slope_target,
            tag(c4)
        );
        let details = serde_json::to_value(&s)?;
        out = Some(s);
        Ok((complete && c1 && c2 && c3 && c4, summary, details))
    });
    (rep, out)
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "missed"
    }
}

pub fn nonzero_swirl(r: &Reference) -> CriterionReport {
    run(5, "nonzero swirl", || {
        let lift = HelicalLift::from_state(&r.state, r.cfg.h)?;
        let g = r.state.v.grid;
        let v = &r.state.v;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inside_max: f64 = 0.0;
        let mut outside_max: f64 = 0.0;
        let mut outside = 0usize;
        let turn = std::f64::consts::PI;
        for i in 0..g.n_r {
            for j in 0..g.n_theta {
                // a cell counts as outside when no neighbour carries swirl
                let near = (i.saturating_sub(1)..=(i + 1).min(g.n_r - 1)).any(|k| {
                    (0..3).any(|d| v.get(k, (j + g.n_theta + d - 1) % g.n_theta) != 0.0)
                }) || i == 0;
                let c = g.center(i, j);
                let x = helical_map(r.cfg.h, rng.gen_range(-1.0..1.0) * turn, [c[0], c[1], 0.0]);
                let sw = lift.swirl(x)?;
                if v.get(i, j) > 0.0 {
                    inside_max = inside_max.max(sw);
                }
                if !near {
                    outside += 1;
                    outside_max = outside_max.max(sw.abs());
                }
            }
        }
        Ok((
            inside_max > 0.0 && outside_max == 0.0,
            format!("max swirl on support {inside_max:.4}, max |swirl| on {outside} outside cells {outside_max:e}"),
            json!({"inside_max": inside_max, "outside_max": outside_max, "outside_cells": outside}),
        ))
    })
}

pub fn rigid_rotation(r: &Reference) -> CriterionReport {
    run(6, "rigid rotation", || {
        let ab = r.cfg.alpha_bar();
        let t_end = 0.25 / ab;
        let dt = default_dt(&r.state.phi, 0.5);
        let traj = evolve(&r.state, t_end, dt, &r.op, &EvolveOptions::default(), 0);
        if let Some(e) = traj.failure {
            return Err(e);
        }
        let end = &traj.last;
        let rel = |a: &ScalarField, b: &ScalarField| a.zip(b, |x, y| x - y).l2_norm() / b.l2_norm();
        let v_ref = r.state.v.rotated(-ab * end.t);
        let w_ref = r.state.w.rotated(-ab * end.t);
        let ev = rel(&end.v, &v_ref);
        let ew = rel(&end.w, &w_ref);
        let iv0 = r.state.v.integral();
        let drift = (end.v.integral() - iv0).abs() / iv0;
        let a0 = traj.rows[0].centroid_angle;
        let a1 = traj.rows.last().map(|r| r.centroid_angle).unwrap_or(f64::NAN);
        let c = centroid(&r.state.v).unwrap_or([0.0, 0.0]);
        Ok((
            ev <= 0.02 && ew <= 0.02 && drift <= 1e-3,
            format!(
                "{} steps, v error {ev:.3e}, w error {ew:.3e}, int v drift {drift:.2e}, centroid turned {:.4} (rigid {:.4}) from radius {:.4}",
                traj.rows.len() - 1,
                a1 - a0,
                -ab * end.t,
                c[0].hypot(c[1])
            ),
            json!({"t_end": end.t, "dt": dt, "v_error": ev, "w_error": ew, "int_v_drift": drift, "rows": traj.rows}),
        ))
    })
}

pub fn reconstruction_structure(r: &Reference) -> CriterionReport {
    run(7, "reconstruction structure", || {
        let lift = HelicalLift::from_state(&r.state, r.cfg.h)?;
        let g = r.state.v.grid;
        let c = centroid(&r.state.v).unwrap_or([0.0, 0.0]);
        let cloud = sample_cloud(&g, r.cfg.h, 10_000, 7, 0.01, Some((c, 0.3)));
        let rep = check_structure(&lift, &cloud, default_fd_step(&g), default_band(&g));
        let pass = rep.max_divergence <= 1e-3
            && rep.max_helical_symmetry <= 1e-6
            && rep.max_vorticity_components <= 1e-3
            && rep.checked > cloud.len() / 2;
        Ok((
            pass,
            format!(
                "{} of {} samples checked, div {:.2e}, helical symmetry {:.2e}, vorticity components {:.2e}",
                rep.checked, rep.samples, rep.max_divergence, rep.max_helical_symmetry, rep.max_vorticity_components
            ),
            serde_json::to_value(&rep)?,
        ))
    })
}

/// Supremum of `s t - I(r, t)` over `t >= 0` by two nested dense scans.
pub fn legendre_scan(p: &ProfileParams, r: f64, s: f64, points: usize) -> f64 {
    // the optimum satisfies slope * t <= s
    let t_hi = s.max(0.0) / p.slope(r) + 1.0;
    let scan = |lo: f64, hi: f64| {
        let mut best = (f64::NEG_INFINITY, lo);
        for k in 0..points {
            let t = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            let v = s * t - p.gain_primitive(r, t);
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    };
    let (_, t0) = scan(0.0, t_hi);
    let dt = t_hi / (points - 1) as f64;
    scan((t0 - dt).max(0.0), t0 + dt).0
}

pub fn conjugacy() -> CriterionReport {
    run(8, "conjugacy oracle", || {
        let cfg = reference_config(0.05)?;
        let p = ProfileParams::from_config(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let r = rng.gen_range(0.0..=cfg.big_r);
            let s = rng.gen_range(0.0..=1.0);
            let j = p.penalty(r, s);
            worst = worst.max((j - legendre_scan(&p, r, s, 10_000)).abs());
        }
        Ok((
            worst <= 1e-8,
            format!("max |J - scan| {worst:.2e} over 200 points"),
            json!({"max_error": worst}),
        ))
    })
}

/// All criteria in order. The reference maximizer is shared by 3, 5, 6 and 7.
pub fn run_all() -> Vec<CriterionReport> {
    let mut out = vec![elliptic_convergence(), green_decomposition()];
    let reference = reference();
    let shared = |id: usize, name: &str, f: &dyn Fn(&Reference) -> CriterionReport| match &reference {
        Ok(r) => f(r),
        Err(e) => CriterionReport {
            id,
            name: name.to_string(),
            pass: false,
            summary: format!("reference maximizer failed: {e}"),
            seconds: 0.0,
            details: serde_json::Value::Null,
        },
    };
    out.push(shared(3, "variational monotonicity", &variational_monotonicity));
    out.push(concentration_sweep().0);
    out.push(shared(5, "nonzero swirl", &nonzero_swirl));
    out.push(shared(6, "rigid rotation", &rigid_rotation));
    out.push(shared(7, "reconstruction structure", &reconstruction_structure));
    out.push(conjugacy());
    out
}
