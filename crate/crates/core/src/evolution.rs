//! Time integration of the planar swirl / vorticity / stream-function system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::grid::to_polar;
use crate::elliptic::{EllipticOperator, PolarGrid, ScalarField};
use crate::error::{Error, Result};
use crate::sampling::{bilinear, d_r, d_theta, sample, Edge, Interp, SplineField};
use crate::variational::{MaximizerState, ProfileParams};

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub v: ScalarField,
    pub w: ScalarField,
    pub phi: ScalarField,
}

/// Largest displacement per step, in radial cells.
pub const CFL_CELLS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub interp: Interp,
    pub tol_elliptic: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            interp: Interp::CubicLimited,
            tol_elliptic: 1e-10,
        }
    }
}

/// Right-hand side of the stream equation, `w + 2h^2 v/|xi|^4 + r d_r v/|xi|^2`.
pub fn stream_rhs(v: &ScalarField, w: &ScalarField, h: f64) -> ScalarField {
    let g = v.grid;
    let vr = d_r(v);
    let mut out = w.clone();
    for i in 0..g.n_r {
        let r = g.r(i);
        let n = h * h + r * r;
        for j in 0..g.n_theta {
            let k = g.idx(i, j);
            out.data[k] += 2.0 * h * h * v.data[k] / (n * n) + r * vr.data[k] / n;
        }
    }
    out
}

pub fn stream_solve(v: &ScalarField, w: &ScalarField, op: &EllipticOperator, tol: f64) -> Result<ScalarField> {
    v.same_shape(w)?;
    op.solve(&stream_rhs(v, w, op.h), tol)
}

/// Cartesian components of `grad^perp phi = (d2 phi, -d1 phi)`.
pub fn velocity(phi: &ScalarField) -> (ScalarField, ScalarField) {
    let g = phi.grid;
    let pr = d_r(phi);
    let pt = d_theta(phi);
    let mut u1 = ScalarField::zeros(g);
    let mut u2 = ScalarField::zeros(g);
    for i in 0..g.n_r {
        let r = g.r(i);
        for j in 0..g.n_theta {
            let (s, c) = g.theta(j).sin_cos();
            let ur = pt.get(i, j) / r;
            let ut = -pr.get(i, j);
            u1.set(i, j, ur * c - ut * s);
            u2.set(i, j, ur * s + ut * c);
        }
    }
    (u1, u2)
}

pub fn max_speed(phi: &ScalarField) -> f64 {
    let (u1, u2) = velocity(phi);
    u1.data
        .iter()
        .zip(&u2.data)
        .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
}

/// `U3 = -(x . grad phi)/|xi|^2`.
pub fn u3(phi: &ScalarField, h: f64) -> ScalarField {
    let pr = d_r(phi);
    pr.map_r(|r, d| -r * d / (h * h + r * r))
}

/// Source of the `w` equation,
/// `d2 v d1 U3 - d1 v d2 U3 + 2 v (x2 d1 v - x1 d2 v)/|xi|^4`.
pub fn vorticity_source(v: &ScalarField, phi: &ScalarField, h: f64) -> ScalarField {
    let g = v.grid;
    let vr = d_r(v);
    let vt = d_theta(v);
    let uu = u3(phi, h);
    let ur = d_r(&uu);
    let ut = d_theta(&uu);
    let mut out = ScalarField::zeros(g);
    for i in 0..g.n_r {
        let r = g.r(i);
        let n = h * h + r * r;
        for j in 0..g.n_theta {
            let k = g.idx(i, j);
            let jac = (vt.data[k] * ur.data[k] - vr.data[k] * ut.data[k]) / r;
            out.data[k] = jac - 2.0 * v.data[k] * vt.data[k] / (n * n);
        }
    }
    out
}

pub fn default_dt(phi: &ScalarField, safety: f64) -> f64 {
    let s = max_speed(phi);
    if s == 0.0 {
        f64::INFINITY
    } else {
        safety * phi.grid.dr() / s
    }
}

fn check_cfl(phi: &ScalarField, dt: f64) -> Result<()> {
    let s = max_speed(phi);
    let limit = CFL_CELLS * phi.grid.dr();
    if dt.abs() * s > limit {
        return Err(Error::Stability(format!(
            "|dt| = {} moves {:.3} cells per step; admissible |dt| <= {}",
            dt.abs(),
            dt.abs() * s / phi.grid.dr(),
            limit / s
        )));
    }
    Ok(())
}

struct Flow {
    phi: SplineField,
}

impl Flow {
    fn new(phi: &ScalarField) -> Self {
        Flow {
            phi: SplineField::new(phi, Edge::Odd),
        }
    }

    /// `grad^perp` of the spline of `phi`, divergence-free away from the origin.
    #[inline]
    fn at(&self, x: [f64; 2]) -> [f64; 2] {
        let (_, g) = self.phi.grad_xy(x);
        [g[1], -g[0]]
    }

    /// Backward RK2 trajectory over `tau`: returns (midpoint, departure point).
    #[inline]
    fn trace(&self, x: [f64; 2], tau: f64, big_r: f64) -> ([f64; 2], [f64; 2]) {
        let u = self.at(x);
        let mid = clamp_disk([x[0] - 0.5 * tau * u[0], x[1] - 0.5 * tau * u[1]], big_r);
        let um = self.at(mid);
        let dep = clamp_disk([x[0] - tau * um[0], x[1] - tau * um[1]], big_r);
        (mid, dep)
    }
}

fn clamp_disk(x: [f64; 2], big_r: f64) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    if r > big_r {
        [x[0] * big_r / r, x[1] * big_r / r]
    } else {
        x
    }
}

/// Semi-Lagrangian remap of `v` and `w` along backward trajectories, adding
/// `tau * source` sampled at the trajectory midpoint.
fn remap(
    flow: &Flow,
    v: &ScalarField,
    w: &ScalarField,
    src: &ScalarField,
    tau: f64,
    interp: Interp,
) -> (ScalarField, ScalarField) {
    let g: PolarGrid = v.grid;
    let nt = g.n_theta;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..g.n_r)
        .into_par_iter()
        .map(|i| {
            let mut rv = Vec::with_capacity(nt);
            let mut rw = Vec::with_capacity(nt);
            for j in 0..nt {
                let x = g.center(i, j);
                let (mid, dep) = flow.trace(x, tau, g.big_r);
                let (r, th) = to_polar(dep);
                let (rm, thm) = to_polar(mid);
                rv.push(sample(v, r, th, Edge::Even, interp));
                rw.push(
                    sample(w, r, th, Edge::Even, interp)
                        + tau * bilinear(src, rm, thm, Edge::Even),
                );
            }
            (rv, rw)
        })
        .collect();
    let mut nv = ScalarField::zeros(g);
    let mut nw = ScalarField::zeros(g);
    for (i, (rv, rw)) in rows.into_iter().enumerate() {
        nv.data[i * nt..(i + 1) * nt].copy_from_slice(&rv);
        nw.data[i * nt..(i + 1) * nt].copy_from_slice(&rw);
    }
    (nv, nw)
}

/// Pure transport of `f` over `dt` under the frozen velocity `grad^perp phi`.
pub fn advect(f: &ScalarField, phi: &ScalarField, dt: f64, interp: Interp) -> Result<ScalarField> {
    f.same_shape(phi)?;
    check_cfl(phi, dt)?;
    let zero = ScalarField::zeros(f.grid);
    Ok(remap(&Flow::new(phi), f, &zero, &zero, dt, interp).0)
}

/// One midpoint step of size `dt` (negative `dt` integrates backwards).
pub fn step(
    state: &EvolutionState,
    dt: f64,
    op: &EllipticOperator,
    opts: &EvolveOptions,
) -> Result<EvolutionState> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::Stability(format!("time step {dt} is not usable")));
    }
    check_cfl(&state.phi, dt)?;
    let h = op.h;
    // predictor to the half step
    let flow0 = Flow::new(&state.phi);
    let src0 = vorticity_source(&state.v, &state.phi, h);
    let (vh, wh) = remap(&flow0, &state.v, &state.w, &src0, 0.5 * dt, opts.interp);
    let phih = stream_solve(&vh, &wh, op, opts.tol_elliptic)?;
    // full step with midpoint velocity and source
    let flow = Flow::new(&phih);
    let src = vorticity_source(&vh, &phih, h);
    let (v, w) = remap(&flow, &state.v, &state.w, &src, dt, opts.interp);
    let phi = stream_solve(&v, &w, op, opts.tol_elliptic)?;
    Ok(EvolutionState {
        t: state.t + dt,
        v,
        w,
        phi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub int_v: f64,
    pub int_w: f64,
    /// Unwrapped angle of the swirl-weighted centroid.
    pub centroid_angle: f64,
    pub energy: f64,
}

#[derive(Debug)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub checkpoints: Vec<EvolutionState>,
    pub last: EvolutionState,
    /// Set when stepping stopped early; rows up to the failure are kept.
    pub failure: Option<Error>,
}

/// Swirl-weighted centroid, `None` when the swirl vanishes.
pub fn centroid(v: &ScalarField) -> Option<[f64; 2]> {
    let m = v.weighted_sum(|_, _, x| x.abs());
    if m == 0.0 {
        return None;
    }
    Some([
        v.weighted_sum(|r, t, x| r * t.cos() * x.abs()) / m,
        v.weighted_sum(|r, t, x| r * t.sin() * x.abs()) / m,
    ])
}

pub fn diagnostics(state: &EvolutionState, h: f64, prev_angle: Option<f64>) -> TrajectoryRow {
    let zeta = stream_rhs(&state.v, &state.w, h);
    let energy = 0.5 * zeta.zip(&state.phi, |a, b| a * b).integral();
    let mut angle = centroid(&state.v)
        .map(|c| c[1].atan2(c[0]))
        .unwrap_or(f64::NAN);
    if let Some(p) = prev_angle {
        if angle.is_finite() && p.is_finite() {
            let tau = 2.0 * std::f64::consts::PI;
            angle += tau * ((p - angle) / tau).round();
        }
    }
    TrajectoryRow {
        t: state.t,
        int_v: state.v.integral(),
        int_w: state.w.integral(),
        centroid_angle: angle,
        energy,
    }
}

/// Step from `state0` to time `t_end` (`dt` may be negative), keeping a
/// checkpoint every `checkpoint_every` steps and the final state.
pub fn evolve(
    state0: &EvolutionState,
    t_end: f64,
    dt: f64,
    op: &EllipticOperator,
    opts: &EvolveOptions,
    checkpoint_every: usize,
) -> Trajectory {
    let h = op.h;
    let span = t_end - state0.t;
    let mut rows = vec![diagnostics(state0, h, None)];
    let mut checkpoints = vec![state0.clone()];
    let mut state = state0.clone();
    if span == 0.0 {
        return Trajectory {
            rows,
            checkpoints,
            last: state,
            failure: None,
        };
    }
    if dt == 0.0 || span.signum() != dt.signum() {
        return Trajectory {
            rows,
            checkpoints,
            last: state,
            failure: Some(Error::Stability(format!(
                "time step {dt} does not advance towards {t_end}"
            ))),
        };
    }
    let n = (span / dt).ceil() as usize;
    let mut failure = None;
    for k in 1..=n {
        let tau = if k == n { t_end - state.t } else { dt };
        match step(&state, tau, op, opts) {
            Ok(s) => {
                state = s;
                if k == n {
                    state.t = t_end;
                }
                let prev = rows.last().map(|r| r.centroid_angle);
                rows.push(diagnostics(&state, h, prev));
                if checkpoint_every > 0 && k % checkpoint_every == 0 && k != n {
                    checkpoints.push(state.clone());
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    if failure.is_none() {
        checkpoints.push(state.clone());
    }
    Trajectory {
        rows,
        checkpoints,
        last: state,
        failure,
    }
}

/// Rotating-frame initial data built from a maximizer: `V = a psi_+/eps` and
/// `W` from inverting the stream equation at `zeta = L_K Phi`.
pub fn rotating_state(
    m: &MaximizerState,
    p: &ProfileParams,
    op: &EllipticOperator,
    tol: f64,
) -> Result<EvolutionState> {
    let h = op.h;
    let s = p.a / p.eps;
    let v = m.psi.map(|x| s * x.max(0.0));
    let lift = stream_rhs(&v, &ScalarField::zeros(v.grid), h);
    let w = m.zeta.zip(&lift, |z, l| z - l);
    let phi = stream_solve(&v, &w, op, tol)?;
    Ok(EvolutionState { t: 0.0, v, w, phi })
}

/// True when the swirl or vorticity reaches the outermost ring.
pub fn touches_boundary(state: &EvolutionState, tol: f64) -> bool {
    let g = state.v.grid;
    let i = g.n_r - 1;
    (0..g.n_theta).any(|j| state.v.get(i, j).abs() > tol || state.w.get(i, j).abs() > tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(n: usize) -> EllipticOperator {
        EllipticOperator::assemble(PolarGrid::new(n, n, 2.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn manufactured_stream_solution() {
        let o = op(64);
        let g = o.grid;
        let w = ScalarField::from_polar_fn(g, |r, _| 4.0 / (1.0 + r * r).powi(2));
        let v = ScalarField::zeros(g);
        let phi = stream_solve(&v, &w, &o, 1e-10).unwrap();
        let ex = ScalarField::from_polar_fn(g, |r, _| 4.0 - r * r);
        assert!(phi.zip(&ex, |a, b| a - b).max_abs() < 2e-3);
    }

    #[test]
    fn radial_data_gives_radial_stream() {
        let o = op(32);
        let g = o.grid;
        let v = ScalarField::from_polar_fn(g, |r, _| (-(r - 0.8) * (r - 0.8) * 20.0).exp());
        let w = ScalarField::from_polar_fn(g, |r, _| (-r * r * 4.0).exp());
        let phi = stream_solve(&v, &w, &o, 1e-11).unwrap();
        for i in 0..g.n_r {
            let row: Vec<f64> = (0..g.n_theta).map(|j| phi.get(i, j)).collect();
            let spread = row.iter().cloned().fold(f64::MIN, f64::max)
                - row.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let o = op(16);
        let g = o.grid;
        let z = ScalarField::zeros(g);
        let s = EvolutionState {
            t: 0.0,
            v: z.clone(),
            w: z.clone(),
            phi: z.clone(),
        };
        let n = step(&s, 0.1, &o, &EvolveOptions::default()).unwrap();
        assert_eq!(n.v.max_abs(), 0.0);
        assert_eq!(n.w.max_abs(), 0.0);
        assert!((n.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cfl_violation_reports_admissible_step() {
        let o = op(32);
        let g = o.grid;
        let w = ScalarField::from_xy_fn(g, |x| 50.0 * (-((x[0] - 0.6).powi(2) + x[1] * x[1]) * 30.0).exp());
        let v = ScalarField::zeros(g);
        let phi = stream_solve(&v, &w, &o, 1e-10).unwrap();
        let s = EvolutionState { t: 0.0, v, w, phi };
        let e = step(&s, 10.0, &o, &EvolveOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Stability(_)));
        assert!(e.to_string().contains("admissible"));
    }

    #[test]
    fn swirl_free_flow_keeps_zero_swirl() {
        let o = op(32);
        let g = o.grid;
        let w = ScalarField::from_xy_fn(g, |x| 5.0 * (-((x[0] - 0.6).powi(2) + x[1] * x[1]) * 10.0).exp());
        let v = ScalarField::zeros(g);
        let phi = stream_solve(&v, &w, &o, 1e-10).unwrap();
        let s = EvolutionState { t: 0.0, v, w, phi };
        let dt = default_dt(&s.phi, 0.5);
        let n = step(&s, dt, &o, &EvolveOptions::default()).unwrap();
        assert_eq!(n.v.max_abs(), 0.0);
        assert!(vorticity_source(&n.v, &n.phi, 1.0).max_abs() == 0.0);
    }

    #[test]
    fn trajectory_length_matches_step_count() {
        let o = op(16);
        let g = o.grid;
        let w = ScalarField::from_xy_fn(g, |x| (-((x[0] - 0.5).powi(2) + x[1] * x[1]) * 8.0).exp());
        let v = ScalarField::zeros(g);
        let phi = stream_solve(&v, &w, &o, 1e-10).unwrap();
        let s = EvolutionState { t: 0.0, v, w, phi };
        let tr = evolve(&s, 0.35, 0.1, &o, &EvolveOptions::default(), 2);
        assert!(tr.failure.is_none());
        assert_eq!(tr.rows.len(), 5);
        assert!((tr.last.t - 0.35).abs() < 1e-15);
        assert_eq!(tr.checkpoints.len(), 3);
    }
}
