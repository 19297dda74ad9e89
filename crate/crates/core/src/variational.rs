//! Constrained energy maximization producing the concentrated cross-section.

use serde::{Deserialize, Serialize};

use crate::elliptic::{EllipticOperator, PolarGrid, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::ProblemConfig;

/// Parameters entering the pointwise profile, the gain rate and the penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub alpha_bar: f64,
}

impl ProfileParams {
    pub fn from_config(cfg: &ProblemConfig) -> Self {
        ProfileParams {
            h: cfg.h,
            a: cfg.a,
            b: cfg.b,
            eps: cfg.eps,
            alpha_bar: cfg.alpha_bar(),
        }
    }

    fn xi2(&self, r: f64) -> f64 {
        self.h * self.h + r * r
    }

    /// Jump of `eps^2 zeta` across the free boundary.
    pub fn threshold(&self, r: f64) -> f64 {
        self.h * self.h * self.alpha_bar * self.a * self.eps / self.xi2(r) + self.b
    }

    /// Slope of `eps^2 zeta` in `psi` inside the support.
    pub fn slope(&self, r: f64) -> f64 {
        let n = self.xi2(r);
        (2.0 * self.h * self.h * self.a * self.eps + self.a * self.a * n) / (n * n)
    }

    /// Gain rate `i_eps(r, s)`.
    pub fn gain_rate(&self, r: f64, s: f64) -> f64 {
        if s > 0.0 {
            self.slope(r) * s + self.threshold(r)
        } else {
            0.0
        }
    }

    /// `I_eps(r, s)`, the primitive of the gain rate from 0.
    pub fn gain_primitive(&self, r: f64, s: f64) -> f64 {
        if s > 0.0 {
            0.5 * self.slope(r) * s * s + self.threshold(r) * s
        } else {
            0.0
        }
    }

    /// Penalty `J_eps(r, s)`, the conjugate of the gain primitive.
    pub fn penalty(&self, r: f64, s: f64) -> f64 {
        let n = self.xi2(r);
        let e = (s - self.threshold(r)).max(0.0);
        n * n * e * e
            / (4.0 * self.h * self.h * self.a * self.eps + 2.0 * self.a * self.a * n)
    }

    pub fn penalty_ds(&self, r: f64, s: f64) -> f64 {
        (s - self.threshold(r)).max(0.0) / self.slope(r)
    }

    /// `eps^2 zeta` as a function of `psi`, before clamping.
    pub fn scaled_profile(&self, r: f64, psi: f64) -> f64 {
        self.gain_rate(r, psi)
    }
}

/// Apply the profile to `psi`, clamp at `cap`. Returns the field and the clamped area.
pub fn apply_profile(psi: &ScalarField, p: &ProfileParams, cap: f64) -> (ScalarField, f64) {
    let g = psi.grid;
    let inv = 1.0 / (p.eps * p.eps);
    let mut out = ScalarField::zeros(g);
    let mut clamp = 0.0;
    for i in 0..g.n_r {
        let r = g.r(i);
        for j in 0..g.n_theta {
            let v = p.scaled_profile(r, psi.get(i, j)) * inv;
            if v >= cap {
                clamp += g.cell_area(i);
                out.set(i, j, cap);
            } else {
                out.set(i, j, v);
            }
        }
    }
    (out, clamp)
}

#[derive(Debug, Clone)]
pub struct Multiplier {
    pub mu: f64,
    pub zeta: ScalarField,
    pub mass: f64,
    pub clamp_area: f64,
}

/// Find `mu` such that the profile of `level - mu` carries mass `kappa`.
///
/// The mass is continuous and decreasing in `mu` except for the jump each cell
/// contributes when it enters the support. When the target falls inside such a
/// jump the cells with level equal to `mu` are filled to the fraction of their
/// entry value that makes the mass exact.
pub fn solve_multiplier(
    level: &ScalarField,
    p: &ProfileParams,
    kappa: f64,
    cap: f64,
    tol_mass: f64,
) -> Result<Multiplier> {
    let g = level.grid;
    let nt = g.n_theta;
    let inv = 1.0 / (p.eps * p.eps);
    if level.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite stream function level".into()));
    }
    let areas: Vec<f64> = (0..g.n_r).map(|i| g.cell_area(i)).collect();
    let slope: Vec<f64> = (0..g.n_r).map(|i| p.slope(g.r(i)) * inv).collect();
    let thr: Vec<f64> = (0..g.n_r).map(|i| p.threshold(g.r(i)) * inv).collect();
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_unstable_by(|&x, &y| level.data[y].total_cmp(&level.data[x]));

    let contribution = |k: usize, mu: f64| -> f64 {
        let i = k / nt;
        let v = slope[i] * (level.data[k] - mu) + thr[i];
        areas[i] * v.min(cap)
    };
    let mass_at = |mu: f64| -> f64 {
        let mut m = 0.0;
        for &k in &order {
            if level.data[k] <= mu {
                break;
            }
            m += contribution(k, mu);
        }
        m
    };

    let top = level.data[order[0]];
    let bottom = level.data[*order.last().unwrap()];
    let mut lo = bottom - 1.0;
    let mut hi = top;
    if mass_at(lo) < kappa {
        return Err(Error::Infeasible(format!(
            "mass {} reachable under the cap {} is below kappa = {}; increase Lambda or refine the grid",
            mass_at(lo),
            cap,
            kappa
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass_at(mid) >= kappa {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    let mut zeta = ScalarField::zeros(g);
    let mut mass = 0.0;
    let mut marginal = Vec::new();
    let mut marginal_mass = 0.0;
    for &k in &order {
        let s = level.data[k];
        if s <= lo {
            break;
        }
        let i = k / nt;
        if s > mu {
            let v = (slope[i] * (s - mu) + thr[i]).min(cap);
            zeta.data[k] = v;
            mass += areas[i] * v;
        } else {
            let c = contribution(k, lo);
            marginal.push((k, c));
            marginal_mass += c;
        }
    }
    let residual = kappa - mass;
    if residual > 0.0 && marginal_mass > 0.0 {
        let frac = (residual / marginal_mass).min(1.0);
        for (k, c) in marginal {
            let i = k / nt;
            zeta.data[k] = frac * c / areas[i];
            mass += frac * c;
        }
    }
    if (mass - kappa).abs() > tol_mass * kappa {
        return Err(Error::Infeasible(format!(
            "multiplier bracket closed with mass {mass} against target {kappa}"
        )));
    }
    let mut clamp_area = 0.0;
    for i in 0..g.n_r {
        for j in 0..nt {
            if zeta.get(i, j) >= cap {
                clamp_area += areas[i];
            }
        }
    }
    Ok(Multiplier {
        mu,
        zeta,
        mass,
        clamp_area,
    })
}

/// `Phi - alpha_bar |x|^2 / 2`.
pub fn rotating_level(phi: &ScalarField, alpha_bar: f64) -> ScalarField {
    phi.map_r(|r, v| v - 0.5 * alpha_bar * r * r)
}

/// Energy split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub quadratic: f64,
    pub rotation: f64,
    pub penalty: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.quadratic - self.rotation - self.penalty
    }
}

pub fn energy_parts(zeta: &ScalarField, phi: &ScalarField, p: &ProfileParams) -> EnergyParts {
    let e2 = p.eps * p.eps;
    let quadratic = 0.5 * zeta.zip(phi, |a, b| a * b).integral();
    let rotation = 0.5 * p.alpha_bar * zeta.weighted_sum(|r, _, v| r * r * v);
    let penalty = zeta.weighted_sum(|r, _, v| p.penalty(r, e2 * v)) / e2;
    EnergyParts {
        quadratic,
        rotation,
        penalty,
    }
}

/// `E_eps(zeta)` with one elliptic solve.
pub fn energy(zeta: &ScalarField, p: &ProfileParams, op: &EllipticOperator, tol: f64) -> Result<f64> {
    let phi = op.solve(zeta, tol)?;
    Ok(energy_parts(zeta, &phi, p).total())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeOptions {
    pub tol_fix: f64,
    pub tol_energy: f64,
    /// Relative to `kappa`.
    pub tol_mass: f64,
    pub tol_elliptic: f64,
    pub max_iters: usize,
    /// Allowed energy decrease per step before it counts as a divergent step.
    pub energy_slack: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            tol_fix: 1e-6,
            tol_energy: 1e-10,
            tol_mass: 1e-8,
            tol_elliptic: 1e-10,
            max_iters: 500,
            energy_slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub mu: f64,
    pub mass: f64,
    pub sup_zeta: f64,
    pub clamp_area: f64,
    pub l1_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FixedPoint,
    EnergyStall,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct MaximizerState {
    pub zeta: ScalarField,
    /// `G_K zeta`.
    pub phi: ScalarField,
    /// `G_K zeta - alpha_bar |x|^2 / 2 - mu`.
    pub psi: ScalarField,
    pub mu: f64,
    pub energy: f64,
    pub parts: EnergyParts,
    pub mass: f64,
    pub sup_zeta: f64,
    pub clamp_area: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub log: Vec<IterationRecord>,
}

/// The JSON record written next to the field files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximizerSummary {
    pub mu: f64,
    pub energy: f64,
    pub mass: f64,
    pub sup_zeta: f64,
    pub clamp_area: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub per_step: Vec<IterationRecord>,
}

impl MaximizerState {
    pub fn summary(&self) -> MaximizerSummary {
        MaximizerSummary {
            mu: self.mu,
            energy: self.energy,
            mass: self.mass,
            sup_zeta: self.sup_zeta,
            clamp_area: self.clamp_area,
            iterations: self.iterations,
            stop: self.stop,
            per_step: self.log.clone(),
        }
    }

    /// Swirl profile `V = a psi_+ / eps`.
    pub fn swirl(&self, cfg: &ProblemConfig) -> ScalarField {
        swirl_from_psi(&self.psi, cfg)
    }
}

pub fn swirl_from_psi(psi: &ScalarField, cfg: &ProblemConfig) -> ScalarField {
    let s = cfg.a / cfg.eps;
    psi.map(|v| s * v.max(0.0))
}

/// Uniform patch of radius `rho eps` centred at `center`, normalized to mass
/// `kappa` on the grid.
pub fn uniform_patch(cfg: &ProblemConfig, grid: PolarGrid, center: [f64; 2]) -> Result<ScalarField> {
    let rho = 1.0f64.max((cfg.kappa / (std::f64::consts::PI * cfg.lambda)).sqrt() * 1.1);
    let rad = rho * cfg.eps;
    let mut inside = Vec::new();
    let mut area = 0.0;
    for i in 0..grid.n_r {
        for j in 0..grid.n_theta {
            let c = grid.center(i, j);
            if (c[0] - center[0]).hypot(c[1] - center[1]) <= rad {
                inside.push((i, j));
                area += grid.cell_area(i);
            }
        }
    }
    if inside.is_empty() {
        let (i, j) = grid.locate(center).ok_or_else(|| {
            Error::Domain("patch centre lies outside the disk".into())
        })?;
        inside.push((i, j));
        area = grid.cell_area(i);
    }
    let v = cfg.kappa / area;
    if v > cfg.cap() {
        return Err(Error::Infeasible(format!(
            "patch value {v} exceeds the cap {}; refine the grid",
            cfg.cap()
        )));
    }
    let mut z = ScalarField::zeros(grid);
    for (i, j) in inside {
        z.set(i, j, v);
    }
    Ok(z)
}

pub fn default_init(cfg: &ProblemConfig, grid: PolarGrid) -> Result<ScalarField> {
    uniform_patch(cfg, grid, [cfg.r_star, 0.0])
}

/// Lower bound on the multiplier at any admissible maximizer.
pub fn multiplier_lower_bound(cfg: &ProblemConfig) -> f64 {
    let p = ProfileParams::from_config(cfg);
    let r = cfg.big_r;
    let n = cfg.h * cfg.h + r * r;
    -(cfg.alpha() * r * r / 2.0) * cfg.ln_inv_eps()
        - n * n * (cfg.lambda - p.threshold(r)).max(0.0)
            / (2.0 * cfg.h * cfg.h * cfg.a * cfg.eps + cfg.a * cfg.a * n)
}

/// Fixed-point maximization: solve for `Phi = G_K zeta`, then replace `zeta`
/// by the exact maximizer of the linearized functional.
pub fn maximize(
    cfg: &ProblemConfig,
    op: &EllipticOperator,
    init: Option<&ScalarField>,
    opts: &MaximizeOptions,
) -> Result<MaximizerState> {
    maximize_with(cfg, &ProfileParams::from_config(cfg), op, init, opts)
}

/// As [`maximize`], with the rotation rate and profile constants taken from `p`.
pub fn maximize_with(
    cfg: &ProblemConfig,
    p: &ProfileParams,
    op: &EllipticOperator,
    init: Option<&ScalarField>,
    opts: &MaximizeOptions,
) -> Result<MaximizerState> {
    let p = *p;
    if !(cfg.a > 0.0) {
        return Err(Error::Config("the swirl amplitude a must be positive".into()));
    }
    let grid = op.grid;
    let cap = cfg.cap();
    let mut zeta = match init {
        Some(z) => {
            z.same_shape(&ScalarField::zeros(grid))?;
            check_admissible(z, cfg, opts.tol_mass)?;
            z.clone()
        }
        None => default_init(cfg, grid)?,
    };
    let mut phi = op.solve(&zeta, opts.tol_elliptic)?;
    let mut e = energy_parts(&zeta, &phi, &p).total();
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut bad = 0usize;
    let mut mu = f64::NAN;
    let mut mass = zeta.integral();
    let mut clamp_area = 0.0;
    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        let level = rotating_level(&phi, p.alpha_bar);
        let m = solve_multiplier(&level, &p, cfg.kappa, cap, opts.tol_mass)?;
        let phi_new = op.solve(&m.zeta, opts.tol_elliptic)?;
        let e_new = energy_parts(&m.zeta, &phi_new, &p).total();
        let l1 = m.zeta.zip(&zeta, |a, b| (a - b).abs()).integral() / cfg.kappa;
        log.push(IterationRecord {
            iteration: it,
            energy: e_new,
            mu: m.mu,
            mass: m.mass,
            sup_zeta: m.zeta.max(),
            clamp_area: m.clamp_area,
            l1_change: l1,
        });
        if e_new < e - opts.energy_slack {
            bad += 1;
            if bad >= 3 {
                let tail: Vec<String> = log
                    .iter()
                    .rev()
                    .take(5)
                    .map(|r| format!("#{} E={:.16e} mu={:.16e}", r.iteration, r.energy, r.mu))
                    .collect();
                return Err(Error::Divergence(format!(
                    "energy decreased on 3 consecutive steps: {}",
                    tail.join("; ")
                )));
            }
        } else {
            bad = 0;
        }
        let de = e_new - e;
        zeta = m.zeta;
        phi = phi_new;
        e = e_new;
        mu = m.mu;
        mass = m.mass;
        clamp_area = m.clamp_area;
        iterations = it;
        if l1 <= opts.tol_fix {
            stop = StopReason::FixedPoint;
            break;
        }
        if de.abs() <= opts.tol_energy && it > 1 {
            stop = StopReason::EnergyStall;
            break;
        }
    }
    check_admissible(&zeta, cfg, opts.tol_mass)?;
    let parts = energy_parts(&zeta, &phi, &p);
    let psi = rotating_level(&phi, p.alpha_bar).map(|v| v - mu);
    Ok(MaximizerState {
        sup_zeta: zeta.max(),
        zeta,
        phi,
        psi,
        mu,
        energy: parts.total(),
        parts,
        mass,
        clamp_area,
        iterations,
        stop,
        log,
    })
}

/// `0 <= zeta <= Lambda/eps^2` and `|int zeta - kappa| <= tol kappa`.
pub fn check_admissible(zeta: &ScalarField, cfg: &ProblemConfig, tol_mass: f64) -> Result<()> {
    let cap = cfg.cap();
    if zeta.data.iter().any(|&v| !(v >= 0.0 && v <= cap * (1.0 + 1e-14))) {
        return Err(Error::Infeasible(format!(
            "zeta leaves [0, {cap}]"
        )));
    }
    let m = zeta.integral();
    if (m - cfg.kappa).abs() > tol_mass * cfg.kappa {
        return Err(Error::Infeasible(format!(
            "zeta carries mass {m}, expected {}",
            cfg.kappa
        )));
    }
    Ok(())
}
