//! Lift of a planar `(v, w, phi)` triple to helical 3D velocity and vorticity.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::grid::{fmt_f64, to_polar};
use crate::elliptic::{PolarGrid, ScalarField};
use crate::error::{Error, Result};
use crate::evolution::EvolutionState;
use crate::geometry::{helical_map, q_apply, rotate, xi};
use crate::sampling::{bilinear, Degree, Edge, SplineField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelicalSample {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub vorticity: [f64; 3],
    /// `velocity . xi(position)`.
    pub swirl: f64,
}

/// Smooth interpolants of the planar fields. The stream function and swirl
/// use quintic B-splines; the swirl is forced to zero wherever the enclosing
/// grid nodes carry no swirl, and `w` is interpolated bilinearly.
#[derive(Debug, Clone)]
pub struct HelicalLift {
    pub h: f64,
    pub grid: PolarGrid,
    phi: SplineField,
    v: SplineField,
    v_abs: ScalarField,
    w: ScalarField,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl HelicalLift {
    pub fn new(v: &ScalarField, w: &ScalarField, phi: &ScalarField, h: f64) -> Result<Self> {
        v.same_shape(w)?;
        v.same_shape(phi)?;
        if !(h > 0.0) {
            return Err(Error::Config(format!("pitch h = {h} must be positive")));
        }
        Ok(HelicalLift {
            h,
            grid: v.grid,
            phi: SplineField::with_degree(phi, Edge::Odd, Degree::Quintic),
            v: SplineField::with_degree(v, Edge::Even, Degree::Quintic),
            v_abs: v.map(f64::abs),
            w: w.clone(),
        })
    }

    pub fn from_state(state: &EvolutionState, h: f64) -> Result<Self> {
        Self::new(&state.v, &state.w, &state.phi, h)
    }

    /// Cross-section point `R_{-x3/h} x'` and the angle `x3/h`.
    pub fn project(&self, x: [f64; 3]) -> Result<([f64; 2], f64)> {
        let s = x[2] / self.h;
        let p = rotate(-s, [x[0], x[1]]);
        let r = p[0].hypot(p[1]);
        if r > self.grid.big_r * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "point ({}, {}, {}) projects to radius {r} outside the disk of radius {}",
                x[0], x[1], x[2], self.grid.big_r
            )));
        }
        Ok((p, s))
    }

    fn swirl_free(&self, p: [f64; 2]) -> bool {
        let (r, th) = to_polar(p);
        bilinear(&self.v_abs, r, th, Edge::Even) == 0.0
    }

    /// Planar swirl and its Cartesian gradient at a cross-section point.
    pub fn planar_swirl(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        if self.swirl_free(p) {
            return (0.0, [0.0, 0.0]);
        }
        self.v.grad_xy(p)
    }

    /// `u~` from the stream function and `v~ = u~ + v xi / |xi|^2` at a
    /// cross-section point.
    pub fn planar_velocity(&self, p: [f64; 2]) -> ([f64; 3], [f64; 3]) {
        let h = self.h;
        let (_, g) = self.phi.grad_xy(p);
        let n = h * h + p[0] * p[0] + p[1] * p[1];
        let u1 = (-p[0] * p[1] * g[0] + (h * h + p[0] * p[0]) * g[1]) / n;
        let u2 = (-(h * h + p[1] * p[1]) * g[0] + p[0] * p[1] * g[1]) / n;
        let u3 = (-p[1] * u1 + p[0] * u2) / h;
        let u = [u1, u2, u3];
        let (sv, _) = self.planar_swirl(p);
        let e = xi(h, [p[0], p[1], 0.0]);
        let v = [u1 + sv * e[0] / n, u2 + sv * e[1] / n, u3 + sv * e[2] / n];
        (u, v)
    }

    pub fn velocity(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let (p, s) = self.project(x)?;
        Ok(q_apply(s, self.planar_velocity(p).1))
    }

    /// Orthogonal part `u = v - v_xi xi / |xi|^2`.
    pub fn orthogonal_velocity(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let (p, s) = self.project(x)?;
        Ok(q_apply(s, self.planar_velocity(p).0))
    }

    pub fn swirl(&self, x: [f64; 3]) -> Result<f64> {
        let (p, _) = self.project(x)?;
        Ok(self.planar_swirl(p).0)
    }

    /// `w(p) xi / h + Q_{x3/h} (d2 v, -d1 v, 0)(p) / h`.
    pub fn vorticity(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let (p, s) = self.project(x)?;
        let (r, th) = to_polar(p);
        let w3 = bilinear(&self.w, r, th, Edge::Even);
        let (_, gv) = self.planar_swirl(p);
        let t = q_apply(s, [gv[1], -gv[0], 0.0]);
        let e = xi(self.h, x);
        let h = self.h;
        Ok([
            (w3 * e[0] + t[0]) / h,
            (w3 * e[1] + t[1]) / h,
            (w3 * e[2] + t[2]) / h,
        ])
    }

    pub fn sample(&self, x: [f64; 3]) -> Result<HelicalSample> {
        let velocity = self.velocity(x)?;
        Ok(HelicalSample {
            position: x,
            velocity,
            vorticity: self.vorticity(x)?,
            swirl: dot(velocity, xi(self.h, x)),
        })
    }
}

/// Random points in the cylinder over one helical period. Half of them fall
/// in the disk `focus` (centre, radius) of the cross-section when given.
pub fn sample_cloud(
    grid: &PolarGrid,
    h: f64,
    n: usize,
    seed: u64,
    margin: f64,
    focus: Option<([f64; 2], f64)>,
) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = grid.big_r - margin;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (c, rad) = match focus {
            Some(f) if out.len() % 2 == 1 => f,
            _ => ([0.0, 0.0], r_max),
        };
        let rr = rad * rng.gen::<f64>().sqrt();
        let th = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let p = [c[0] + rr * th.cos(), c[1] + rr * th.sin()];
        let x3 = (rng.gen::<f64>() * 2.0 - 1.0) * std::f64::consts::PI * h;
        if p[0].hypot(p[1]) > r_max {
            continue;
        }
        let q = rotate(x3 / h, p);
        out.push([q[0], q[1], x3]);
    }
    out
}

pub fn write_samples_csv(path: &Path, samples: &[HelicalSample]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from("x1,x2,x3,v1,v2,v3,w1,w2,w3,swirl\n");
    for s in samples {
        let vals = s
            .position
            .iter()
            .chain(&s.velocity)
            .chain(&s.vorticity)
            .chain(std::iter::once(&s.swirl))
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>();
        body.push_str(&vals.join(","));
        body.push('\n');
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cloud_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').take(3).map(|t| t.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 3 => out.push([v[0], v[1], v[2]]),
            _ => return Err(Error::parse(path, format!("line {}: expected x1,x2,x3", k + 1))),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub samples: usize,
    /// Samples whose stencil stays clear of the free boundary and the wall.
    pub checked: usize,
    pub fd_step: f64,
    pub band: f64,
    pub max_divergence: f64,
    /// `w1 = (x2 w3 + d2 v_xi)/h`, `w2 = (-x1 w3 - d1 v_xi)/h` with `w = curl v`.
    pub max_vorticity_components: f64,
    /// `w3 = zeta3 - 2h^2 v_xi/|xi|^4 - (x . grad v_xi)/|xi|^2` with `zeta = curl u`.
    pub max_third_component: f64,
    /// `xi . grad w3`.
    pub max_helical_w3: f64,
    /// `|curl v - lifted vorticity|`.
    pub max_curl_mismatch: f64,
    pub max_orthogonality: f64,
    /// `|v(H_theta x) - Q_theta v(x)|` over the probe angles.
    pub max_helical_symmetry: f64,
    /// `|v_xi(H_theta x) - v_xi(x)|`.
    pub max_swirl_transport: f64,
    pub max_speed: f64,
}

pub const SYMMETRY_ANGLES: [f64; 3] = [std::f64::consts::PI / 7.0, 1.0, 2.0 * std::f64::consts::PI / 3.0];

/// Cell centres on the edge of the support of `v` or `w`.
fn edge_points(v: &ScalarField, w: &ScalarField) -> Vec<[f64; 2]> {
    let g = v.grid;
    let nt = g.n_theta;
    let on = |i: usize, j: usize| (v.get(i, j) != 0.0, w.get(i, j) != 0.0);
    let mut out = Vec::new();
    for i in 0..g.n_r {
        for j in 0..nt {
            let me = on(i, j);
            let mut nb = vec![on(i, (j + 1) % nt), on(i, (j + nt - 1) % nt)];
            if i + 1 < g.n_r {
                nb.push(on(i + 1, j));
            }
            nb.push(if i > 0 { on(i - 1, j) } else { on(0, (j + nt / 2) % nt) });
            if nb.iter().any(|&o| o != me) {
                out.push(g.center(i, j));
            }
        }
    }
    out
}

struct Stencil {
    v: [[f64; 3]; 12],
    u: [[f64; 3]; 12],
    s: [f64; 12],
}

const OFFSETS: [f64; 4] = [1.0, -1.0, 2.0, -2.0];

impl HelicalLift {
    fn stencil(&self, x: [f64; 3], d: f64) -> Result<Stencil> {
        let mut st = Stencil {
            v: [[0.0; 3]; 12],
            u: [[0.0; 3]; 12],
            s: [0.0; 12],
        };
        for k in 0..3 {
            for (m, off) in OFFSETS.iter().enumerate() {
                let mut y = x;
                y[k] += off * d;
                let (p, s) = self.project(y)?;
                let (u, v) = self.planar_velocity(p);
                let idx = 4 * k + m;
                st.u[idx] = q_apply(s, u);
                st.v[idx] = q_apply(s, v);
                st.s[idx] = self.planar_swirl(p).0;
            }
        }
        Ok(st)
    }
}

/// Fourth-order central difference from values at `+d, -d, +2d, -2d`.
fn diff4(f: [f64; 4], step: f64) -> f64 {
    (8.0 * (f[0] - f[1]) - (f[2] - f[3])) / (12.0 * step)
}

fn d(f: &[[f64; 3]; 12], comp: usize, dir: usize, step: f64) -> f64 {
    let b = 4 * dir;
    diff4([f[b][comp], f[b + 1][comp], f[b + 2][comp], f[b + 3][comp]], step)
}

fn curl(f: &[[f64; 3]; 12], step: f64) -> [f64; 3] {
    [
        d(f, 2, 1, step) - d(f, 1, 2, step),
        d(f, 0, 2, step) - d(f, 2, 0, step),
        d(f, 1, 0, step) - d(f, 0, 1, step),
    ]
}

/// Finite-difference step for [`check_structure`] on `grid`.
pub fn default_fd_step(grid: &PolarGrid) -> f64 {
    grid.dr() / 32.0
}

/// Width of the skipped ring around the support edge.
pub fn default_band(grid: &PolarGrid) -> f64 {
    3.0 * grid.dr()
}

/// Finite-difference audit of the structural identities of helical fields
/// over `cloud`. Points within `band` of the support edge, or whose stencil
/// leaves the disk, are skipped.
pub fn check_structure(lift: &HelicalLift, cloud: &[[f64; 3]], fd_step: f64, band: f64) -> StructureReport {
    let edges = edge_points(&lift.v_abs, &lift.w);
    let h = lift.h;
    let big_r = lift.grid.big_r;
    let rows: Vec<Option<[f64; 10]>> = cloud
        .par_iter()
        .map(|&x| {
            let (p, _) = lift.project(x).ok()?;
            if p[0].hypot(p[1]) + 3.0 * fd_step > big_r {
                return None;
            }
            let reach = band + 3.0 * fd_step;
            if edges
                .iter()
                .any(|e| (e[0] - p[0]).hypot(e[1] - p[1]) < reach)
            {
                return None;
            }
            let st = lift.stencil(x, fd_step).ok()?;
            let div = d(&st.v, 0, 0, fd_step) + d(&st.v, 1, 1, fd_step) + d(&st.v, 2, 2, fd_step);
            let wc = curl(&st.v, fd_step);
            let zc = curl(&st.u, fd_step);
            let ds = [
                diff4([st.s[0], st.s[1], st.s[2], st.s[3]], fd_step),
                diff4([st.s[4], st.s[5], st.s[6], st.s[7]], fd_step),
            ];
            let sv = lift.swirl(x).ok()?;
            let e1 = (wc[0] - (x[1] * wc[2] + ds[1]) / h).abs();
            let e2 = (wc[1] - (-x[0] * wc[2] - ds[0]) / h).abs();
            let n = h * h + x[0] * x[0] + x[1] * x[1];
            let w3 = zc[2] - 2.0 * h * h * sv / (n * n) - (x[0] * ds[0] + x[1] * ds[1]) / n;
            let e3 = (wc[2] - w3).abs();
            let lw = lift.vorticity(x).ok()?;
            let mism = norm([wc[0] - lw[0], wc[1] - lw[1], wc[2] - lw[2]]);
            let e = xi(h, x);
            let en = norm(e);
            let t = [e[0] / en, e[1] / en, e[2] / en];
            let mut along = [0.0; 4];
            for (a, off) in along.iter_mut().zip(OFFSETS) {
                let y = [x[0] + off * fd_step * t[0], x[1] + off * fd_step * t[1], x[2] + off * fd_step * t[2]];
                *a = lift.vorticity(y).ok()?[2];
            }
            let hw = diff4(along, fd_step) * en;
            let vel = lift.velocity(x).ok()?;
            let u = lift.orthogonal_velocity(x).ok()?;
            let orth = dot(u, e).abs() / (1.0 + norm(u) * en);
            let mut sym: f64 = 0.0;
            let mut tr: f64 = 0.0;
            for &a in &SYMMETRY_ANGLES {
                let y = helical_map(h, a, x);
                let vy = lift.velocity(y).ok()?;
                let qv = q_apply(a, vel);
                sym = sym.max(norm([vy[0] - qv[0], vy[1] - qv[1], vy[2] - qv[2]]));
                tr = tr.max((lift.swirl(y).ok()? - sv).abs());
            }
            Some([div.abs(), e1.max(e2), e3, hw.abs(), mism, orth, sym, tr, norm(vel), 0.0])
        })
        .collect();
    let mut rep = StructureReport {
        samples: cloud.len(),
        checked: 0,
        fd_step,
        band,
        max_divergence: 0.0,
        max_vorticity_components: 0.0,
        max_third_component: 0.0,
        max_helical_w3: 0.0,
        max_curl_mismatch: 0.0,
        max_orthogonality: 0.0,
        max_helical_symmetry: 0.0,
        max_swirl_transport: 0.0,
        max_speed: 0.0,
    };
    for r in rows.into_iter().flatten() {
        rep.checked += 1;
        rep.max_divergence = rep.max_divergence.max(r[0]);
        rep.max_vorticity_components = rep.max_vorticity_components.max(r[1]);
        rep.max_third_component = rep.max_third_component.max(r[2]);
        rep.max_helical_w3 = rep.max_helical_w3.max(r[3]);
        rep.max_curl_mismatch = rep.max_curl_mismatch.max(r[4]);
        rep.max_orthogonality = rep.max_orthogonality.max(r[5]);
        rep.max_helical_symmetry = rep.max_helical_symmetry.max(r[6]);
        rep.max_swirl_transport = rep.max_swirl_transport.max(r[7]);
        rep.max_speed = rep.max_speed.max(r[8]);
    }
    rep
}
