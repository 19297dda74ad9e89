//! Concentration metrics of maximizers and their scaling across `eps`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::grid::to_polar;
use crate::elliptic::{EllipticOperator, PolarGrid, ScalarField};
use crate::error::{Error, Result};
use crate::evolution::stream_rhs;
use crate::geometry::{det_k, rotate, t_inverse, ProblemConfig};
use crate::sampling::{bilinear, cartesian_gradient, Edge};
use crate::variational::{maximize, MaximizeOptions, MaximizerState, StopReason};

/// Cells with `zeta` above this fraction of the cap count as support.
pub const SUPPORT_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportMetrics {
    pub r_min: f64,
    pub r_max: f64,
    pub diameter: f64,
    pub center: [f64; 2],
    /// `0.5 * int |x|^2 zeta`.
    pub inertia: f64,
    pub mass: f64,
    pub clamp_area: f64,
    pub cells: usize,
}

fn support_cells(zeta: &ScalarField, cap: f64) -> Vec<(usize, usize)> {
    let g = zeta.grid;
    let cut = SUPPORT_FRACTION * cap;
    let mut out = Vec::new();
    for i in 0..g.n_r {
        for j in 0..g.n_theta {
            if zeta.get(i, j) > cut {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn support_metrics(zeta: &ScalarField, cap: f64) -> Result<SupportMetrics> {
    let g = zeta.grid;
    let cells = support_cells(zeta, cap);
    if cells.is_empty() {
        return Err(Error::Domain("zeta has empty support".into()));
    }
    if zeta.min() < 0.0 {
        return Err(Error::Domain(format!(
            "zeta must be nonnegative, found {}",
            zeta.min()
        )));
    }
    let mut r_min = f64::INFINITY;
    let mut r_max: f64 = 0.0;
    let mut clamp_area = 0.0;
    for &(i, j) in &cells {
        r_min = r_min.min(g.r(i));
        r_max = r_max.max(g.r(i));
        if zeta.get(i, j) >= cap * (1.0 - 1e-12) {
            clamp_area += g.cell_area(i);
        }
    }
    let pts: Vec<[f64; 2]> = cells.iter().map(|&(i, j)| g.center(i, j)).collect();
    let diameter = pts
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            pts[k + 1..]
                .iter()
                .fold(0.0f64, |m, q| m.max((p[0] - q[0]).hypot(p[1] - q[1])))
        })
        .reduce(|| 0.0, f64::max);
    let mass = zeta.integral();
    let center = [
        zeta.weighted_sum(|r, t, z| r * t.cos() * z) / mass,
        zeta.weighted_sum(|r, t, z| r * t.sin() * z) / mass,
    ];
    let inertia = 0.5 * zeta.weighted_sum(|r, _, z| r * r * z);
    Ok(SupportMetrics {
        r_min,
        r_max,
        diameter,
        center,
        inertia,
        mass,
        clamp_area,
        cells: cells.len(),
    })
}

/// Circulation `int w` of the rotating state built from `m`.
pub fn circulation(m: &MaximizerState, cfg: &ProblemConfig) -> f64 {
    let v = m.swirl(cfg);
    let lift = stream_rhs(&v, &ScalarField::zeros(v.grid), cfg.h);
    m.zeta.zip(&lift, |z, l| z - l).integral()
}

/// `eps^-1 |int grad (psi)_+|`, a trend metric that should shrink with `eps`.
pub fn gradient_trend(psi: &ScalarField, eps: f64) -> f64 {
    let (gx, gy) = cartesian_gradient(&psi.map(|p| p.max(0.0)));
    gx.integral().hypot(gy.integral()) / eps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)`; `None` with fewer than two distinct `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = x[..n].iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n].iter().zip(&y[..n]).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        points: n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub ln_inv_eps: f64,
    /// Set when the maximization failed; such rows carry no metrics.
    pub error: Option<String>,
    pub stop: Option<StopReason>,
    pub iterations: usize,
    pub metrics: Option<SupportMetrics>,
    pub energy: f64,
    pub mu: f64,
    pub circulation: f64,
    /// `| |X_eps| - r_star |`.
    pub center_offset: f64,
    /// Relative error of the inertia against `kappa r_star^2 / 2`.
    pub inertia_error: f64,
    pub gradient_trend: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: ProblemConfig,
    pub n_r: usize,
    pub n_theta: usize,
    /// Sorted by `eps`, largest first.
    pub rows: Vec<ScalingRow>,
    pub energy_fit: Option<LineFit>,
    pub mu_fit: Option<LineFit>,
    pub diameter_fit: Option<LineFit>,
    /// `kappa Y(r_star) / 2`.
    pub energy_slope_target: f64,
    /// `Y(r_star) + alpha r_star^2 / 2`.
    pub mu_slope_floor: f64,
}

impl ScalingReport {
    fn good(&self) -> impl Iterator<Item = &ScalingRow> {
        self.rows.iter().filter(|r| r.error.is_none())
    }

    pub fn center_offsets_decrease(&self) -> bool {
        let v: Vec<f64> = self.good().map(|r| r.center_offset).collect();
        v.len() >= 2 && v.windows(2).all(|w| w[1] < w[0])
    }

    pub fn final_inertia_error(&self) -> Option<f64> {
        self.good().last().map(|r| r.inertia_error)
    }

    pub fn energy_slope_error(&self) -> Option<f64> {
        self.energy_fit
            .map(|f| (f.slope - self.energy_slope_target).abs() / self.energy_slope_target)
    }
}

fn sweep_row(
    cfg: &ProblemConfig,
    grid: PolarGrid,
    opts: &MaximizeOptions,
) -> Result<(MaximizerState, SupportMetrics)> {
    let op = EllipticOperator::assemble(grid, cfg.h)?;
    let m = maximize(cfg, &op, None, opts)?;
    let s = support_metrics(&m.zeta, cfg.cap())?;
    Ok((m, s))
}

/// Maximize once per `eps` (in parallel) and fit the asymptotic slopes.
pub fn scaling_sweep(
    eps_list: &[f64],
    template: &ProblemConfig,
    grid: PolarGrid,
    opts: &MaximizeOptions,
) -> Result<ScalingReport> {
    if eps_list.len() < 3 {
        return Err(Error::Config(format!(
            "a sweep needs at least 3 eps values, got {}",
            eps_list.len()
        )));
    }
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let cfgs = eps
        .iter()
        .map(|&e| template.with_eps(e))
        .collect::<Result<Vec<_>>>()?;
    let target_inertia = 0.5 * template.kappa * template.r_star * template.r_star;
    let rows: Vec<ScalingRow> = cfgs
        .par_iter()
        .map(|cfg| {
            let mut row = ScalingRow {
                eps: cfg.eps,
                ln_inv_eps: cfg.ln_inv_eps(),
                error: None,
                stop: None,
                iterations: 0,
                metrics: None,
                energy: f64::NAN,
                mu: f64::NAN,
                circulation: f64::NAN,
                center_offset: f64::NAN,
                inertia_error: f64::NAN,
                gradient_trend: f64::NAN,
            };
            match sweep_row(cfg, grid, opts) {
                Ok((m, s)) => {
                    row.stop = Some(m.stop);
                    row.iterations = m.iterations;
                    row.energy = m.energy;
                    row.mu = m.mu;
                    row.circulation = circulation(&m, cfg);
                    row.center_offset = (s.center[0].hypot(s.center[1]) - cfg.r_star).abs();
                    row.inertia_error = (s.inertia - target_inertia).abs() / target_inertia;
                    row.gradient_trend = gradient_trend(&m.psi, cfg.eps);
                    row.metrics = Some(s);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    let good: Vec<&ScalingRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let l: Vec<f64> = good.iter().map(|r| r.ln_inv_eps).collect();
    let energy_fit = fit_line(&l, &good.iter().map(|r| r.energy).collect::<Vec<_>>());
    let mu_fit = fit_line(&l, &good.iter().map(|r| r.mu).collect::<Vec<_>>());
    let le: Vec<f64> = good.iter().map(|r| r.eps.ln()).collect();
    let ld: Vec<f64> = good
        .iter()
        .map(|r| r.metrics.map(|m| m.diameter.ln()).unwrap_or(f64::NAN))
        .collect();
    let diameter_fit = fit_line(&le, &ld);
    let y = template.landscape(template.r_star);
    Ok(ScalingReport {
        config: *template,
        n_r: grid.n_r,
        n_theta: grid.n_theta,
        rows,
        energy_fit,
        mu_fit,
        diameter_fit,
        energy_slope_target: 0.5 * template.kappa * y,
        mu_slope_floor: y + 0.5 * template.alpha() * template.r_star * template.r_star,
    })
}

#[derive(Debug, Clone)]
pub struct RescaledProfile {
    /// `g(y) = eps^2 zeta(X + eps T^-1 y)` on a disk of radius `window`.
    pub field: ScalarField,
    pub center: [f64; 2],
    pub window: f64,
    pub mass: f64,
    /// `sqrt(h^2 + |X|^2) / h * kappa`.
    pub target_mass: f64,
    /// Relative L2 distance of `g` to its angular average.
    pub asymmetry: f64,
    pub sup: f64,
}

pub const DEFAULT_WINDOW: f64 = 6.0;

/// Resample `zeta` around its centre in the stretched frame.
pub fn rescaled_profile(
    zeta: &ScalarField,
    cfg: &ProblemConfig,
    window: f64,
    n_r: usize,
    n_theta: usize,
) -> Result<RescaledProfile> {
    let mass0 = zeta.integral();
    if mass0 <= 0.0 {
        return Err(Error::Domain("zeta has no mass".into()));
    }
    let center = [
        zeta.weighted_sum(|r, t, z| r * t.cos() * z) / mass0,
        zeta.weighted_sum(|r, t, z| r * t.sin() * z) / mass0,
    ];
    let ti = t_inverse(cfg.h, center);
    let map = |y: [f64; 2]| {
        let d = ti.apply(y);
        [center[0] + cfg.eps * d[0], center[1] + cfg.eps * d[1]]
    };
    // T^-1 is a contraction, so the image of the window lies in a ball of
    // radius eps * window around the centre
    let reach = center[0].hypot(center[1]) + cfg.eps * window;
    if reach >= zeta.grid.big_r {
        return Err(Error::Domain(format!(
            "window of radius {window} around ({}, {}) leaves the disk",
            center[0], center[1]
        )));
    }
    let wg = PolarGrid::new(n_r, n_theta, window)?;
    let e2 = cfg.eps * cfg.eps;
    let field = ScalarField::from_xy_fn(wg, |y| {
        let (r, th) = to_polar(map(y));
        e2 * bilinear(zeta, r, th, Edge::Even)
    });
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..wg.n_r {
        let avg = (0..wg.n_theta).map(|j| field.get(i, j)).sum::<f64>() / wg.n_theta as f64;
        for j in 0..wg.n_theta {
            let v = field.get(i, j);
            diff += wg.cell_area(i) * (v - avg) * (v - avg);
            norm += wg.cell_area(i) * v * v;
        }
    }
    let asymmetry = if norm > 0.0 { (diff / norm).sqrt() } else { 0.0 };
    Ok(RescaledProfile {
        mass: field.integral(),
        target_mass: cfg.kappa / det_k(cfg.h, center).sqrt(),
        sup: field.max(),
        asymmetry,
        center,
        window,
        field,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilamentDistance {
    pub tau: f64,
    pub distance: f64,
}

/// Largest distance from the support boundary, carried by the rotating
/// solution to slow time `tau`, to the filament crossing of the plane
/// `x3 = 0`.
pub fn filament_distance(zeta: &ScalarField, cfg: &ProblemConfig, taus: &[f64]) -> Vec<FilamentDistance> {
    let g = zeta.grid;
    let cut = SUPPORT_FRACTION * cfg.cap();
    let on = |i: usize, j: usize| zeta.get(i, j) > cut;
    let nt = g.n_theta;
    let mut boundary = Vec::new();
    for i in 0..g.n_r {
        for j in 0..nt {
            if !on(i, j) {
                continue;
            }
            let inner = if i > 0 { on(i - 1, j) } else { on(0, (j + nt / 2) % nt) };
            let outer = i + 1 < g.n_r && on(i + 1, j);
            if !(inner && outer && on(i, (j + 1) % nt) && on(i, (j + nt - 1) % nt)) {
                boundary.push(g.center(i, j));
            }
        }
    }
    let helix = cfg.helix();
    taus.iter()
        .map(|&tau| {
            // the pattern turns clockwise at alpha_bar in t = tau / ln(1/eps)
            let angle = cfg.alpha() * tau;
            let p = helix.plane_crossing(tau);
            let distance = boundary
                .iter()
                .map(|&b| {
                    let q = rotate(angle, b);
                    (q[0] - p[0]).hypot(q[1] - p[1])
                })
                .fold(f64::NAN, f64::max);
            FilamentDistance { tau, distance }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> (ScalarField, PolarGrid) {
        let g = PolarGrid::new(n, 2 * n, 2.0).unwrap();
        let z = ScalarField::from_polar_fn(g, |r, _| if (0.9..=1.1).contains(&r) { 1.0 } else { 0.0 });
        (z, g)
    }

    #[test]
    fn ring_radii() {
        let (z, g) = ring(80);
        let m = support_metrics(&z, 10.0).unwrap();
        assert!((m.r_min - 0.9).abs() <= g.dr());
        assert!((m.r_max - 1.1).abs() <= g.dr());
        assert!(m.diameter >= m.r_max - m.r_min);
        assert!(m.center[0].hypot(m.center[1]) < 1e-12);
    }

    #[test]
    fn disk_area_matches() {
        let g = PolarGrid::new(32, 64, 2.0).unwrap();
        let one = ScalarField::from_polar_fn(g, |_, _| 1.0);
        assert!((one.integral() - std::f64::consts::PI * 4.0).abs() < 1e-10);
    }

    #[test]
    fn empty_support_rejected() {
        let g = PolarGrid::new(8, 8, 1.0).unwrap();
        assert!(support_metrics(&ScalarField::zeros(g), 1.0).is_err());
    }

    #[test]
    fn line_fit_exact() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn sweep_needs_three_values() {
        let cfg = ProblemConfig::new(1.0, 1.0, 1.0, 2.0, 0.05, 1.0, 0.0, 60.0).unwrap();
        let g = PolarGrid::new(16, 16, 2.0).unwrap();
        assert!(scaling_sweep(&[0.1, 0.05], &cfg, g, &MaximizeOptions::default()).is_err());
    }

    #[test]
    fn rescaled_mass_of_a_blob() {
        let cfg = ProblemConfig::new(1.0, 1.0, 1.0, 2.0, 0.05, 1.0, 0.0, 60.0).unwrap();
        let g = PolarGrid::new(256, 256, 2.0).unwrap();
        let c = [1.0, 0.0];
        let s = 0.05 * 0.05;
        let z = ScalarField::from_xy_fn(g, |x| {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            (-d2 / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s)
        });
        let target = z.integral();
        let p = rescaled_profile(&z, &cfg, 6.0, 96, 128).unwrap();
        assert!((p.mass / p.target_mass * cfg.kappa / target - 1.0).abs() < 1e-2);
        assert!(rescaled_profile(&z, &cfg, 30.0, 8, 8).is_err());
    }

    #[test]
    fn filament_distance_is_rigid() {
        let cfg = ProblemConfig::new(1.0, 1.0, 1.0, 2.0, 0.05, 1.0, 0.0, 60.0).unwrap();
        let g = PolarGrid::new(64, 128, 2.0).unwrap();
        let z = ScalarField::from_xy_fn(g, |x| if (x[0] - 1.0).hypot(x[1]) < 0.1 { 1.0 } else { 0.0 });
        let d = filament_distance(&z, &cfg, &[0.0, 1.0, 7.5]);
        assert!((d[0].distance - d[1].distance).abs() < 1e-12);
        assert!((d[0].distance - d[2].distance).abs() < 1e-12);
        assert!(d[0].distance > 0.05 && d[0].distance < 0.1 + 2.0 * g.dr());
    }
}
