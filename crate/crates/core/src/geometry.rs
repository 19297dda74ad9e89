//! Helical geometry: the symmetry group, the reduced coefficient matrix and the
//! physical parameter set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    pub fn quad(&self, v: [f64; 2]) -> f64 {
        let w = self.apply(v);
        w[0] * v[0] + w[1] * v[1]
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    /// Product of two symmetric matrices, returned as a general row-major matrix.
    pub fn matmul(&self, o: &Sym2) -> [[f64; 2]; 2] {
        [
            [
                self.xx * o.xx + self.xy * o.xy,
                self.xx * o.xy + self.xy * o.yy,
            ],
            [
                self.xy * o.xx + self.yy * o.xy,
                self.xy * o.xy + self.yy * o.yy,
            ],
        ]
    }

    /// Eigenvalues in ascending order with unit eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let half_tr = 0.5 * self.trace();
        let d = 0.5 * (self.xx - self.yy);
        let disc = (d * d + self.xy * self.xy).sqrt();
        let l0 = half_tr - disc;
        let l1 = half_tr + disc;
        if disc <= f64::EPSILON * (half_tr.abs() + 1.0) {
            return ([l0, l1], [[1.0, 0.0], [0.0, 1.0]]);
        }
        // eigenvector for l1
        let (vx, vy) = if d >= 0.0 {
            (d + disc, self.xy)
        } else {
            (self.xy, disc - d)
        };
        let n = (vx * vx + vy * vy).sqrt();
        let e1 = [vx / n, vy / n];
        let e0 = [-e1[1], e1[0]];
        ([l0, l1], [e0, e1])
    }

    /// Rebuild from an orthonormal eigenbasis with the eigenvalues mapped by `f`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Sym2 {
        let (l, e) = self.eigen();
        let m0 = f(l[0]);
        let m1 = f(l[1]);
        Sym2::new(
            m0 * e[0][0] * e[0][0] + m1 * e[1][0] * e[1][0],
            m0 * e[0][0] * e[0][1] + m1 * e[1][0] * e[1][1],
            m0 * e[0][1] * e[0][1] + m1 * e[1][1] * e[1][1],
        )
    }

    pub fn sqrt(&self) -> Sym2 {
        self.map_spectrum(|l| l.max(0.0).sqrt())
    }

    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }
}

/// Clockwise planar rotation `R_theta = [[cos, sin], [-sin, cos]]`.
pub fn rotate(theta: f64, x: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * x[0] + s * x[1], -s * x[0] + c * x[1]]
}

/// The helical map `H_theta`.
pub fn helical_map(h: f64, theta: f64, x: [f64; 3]) -> [f64; 3] {
    let p = rotate(theta, [x[0], x[1]]);
    [p[0], p[1], x[2] + h * theta]
}

/// `Q_theta = diag(R_theta, 1)` applied to a vector.
pub fn q_apply(theta: f64, v: [f64; 3]) -> [f64; 3] {
    let p = rotate(theta, [v[0], v[1]]);
    [p[0], p[1], v[2]]
}

/// The symmetry field `xi = (x2, -x1, h)`.
pub fn xi(h: f64, x: [f64; 3]) -> [f64; 3] {
    [x[1], -x[0], h]
}

pub fn xi_norm2(h: f64, x: [f64; 2]) -> f64 {
    h * h + x[0] * x[0] + x[1] * x[1]
}

/// Reduced coefficient matrix of the helical stream function operator.
pub fn k_matrix(h: f64, x: [f64; 2]) -> Sym2 {
    let n = xi_norm2(h, x);
    Sym2::new(
        (h * h + x[1] * x[1]) / n,
        -x[0] * x[1] / n,
        (h * h + x[0] * x[0]) / n,
    )
}

pub fn det_k(h: f64, x: [f64; 2]) -> f64 {
    h * h / xi_norm2(h, x)
}

/// Symmetric positive square root of `K^{-1}`.
pub fn t_matrix(h: f64, x: [f64; 2]) -> Sym2 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return Sym2::IDENTITY;
    }
    let g = (1.0 + r2 / (h * h)).sqrt() - 1.0;
    Sym2::new(
        1.0 + g * x[0] * x[0] / r2,
        g * x[0] * x[1] / r2,
        1.0 + g * x[1] * x[1] / r2,
    )
}

pub fn t_inverse(h: f64, x: [f64; 2]) -> Sym2 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 == 0.0 {
        return Sym2::IDENTITY;
    }
    let g = h / (h * h + r2).sqrt() - 1.0;
    Sym2::new(
        1.0 + g * x[0] * x[0] / r2,
        g * x[0] * x[1] / r2,
        1.0 + g * x[1] * x[1] / r2,
    )
}

/// Physical parameters of the concentrated state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub h: f64,
    pub kappa: f64,
    pub r_star: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

impl ProblemConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        h: f64,
        kappa: f64,
        r_star: f64,
        big_r: f64,
        eps: f64,
        a: f64,
        b: f64,
        lambda: f64,
    ) -> Result<Self> {
        let cfg = ProblemConfig {
            h,
            kappa,
            r_star,
            big_r,
            eps,
            a,
            b,
            lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`ProblemConfig::new`] but only requires the cap to exceed the
    /// profile threshold `alpha*a + b`, dropping the mass-room condition
    /// `Lambda > 1 + pi R^2 / kappa`.
    #[allow(clippy::too_many_arguments)]
    pub fn new_relaxed_cap(
        h: f64,
        kappa: f64,
        r_star: f64,
        big_r: f64,
        eps: f64,
        a: f64,
        b: f64,
        lambda: f64,
    ) -> Result<Self> {
        let cfg = ProblemConfig {
            h,
            kappa,
            r_star,
            big_r,
            eps,
            a,
            b,
            lambda,
        };
        cfg.validate_basic()?;
        if !(cfg.lambda > cfg.alpha() * cfg.a + cfg.b) {
            return Err(Error::Config(format!(
                "Lambda = {} must exceed alpha*a + b = {}",
                cfg.lambda,
                cfg.alpha() * cfg.a + cfg.b
            )));
        }
        Ok(cfg)
    }

    fn validate_basic(&self) -> Result<()> {
        let pos = [
            ("h", self.h),
            ("kappa", self.kappa),
            ("r_star", self.r_star),
            ("R", self.big_r),
            ("eps", self.eps),
            ("a", self.a),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::Config(format!(
                "b must be nonnegative, got {}",
                self.b
            )));
        }
        if self.eps >= 1.0 {
            return Err(Error::Config(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.r_star >= self.big_r {
            return Err(Error::Config(format!(
                "r_star = {} must be smaller than R = {}",
                self.r_star, self.big_r
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_basic()?;
        let bound = self.lambda_floor();
        if !(self.lambda > bound) {
            return Err(Error::Config(format!(
                "Lambda = {} violates Λ > max{{αa+b, 1+πR²/κ}} = {}",
                self.lambda, bound
            )));
        }
        Ok(())
    }

    /// `max{alpha*a + b, 1 + pi R^2 / kappa}`.
    pub fn lambda_floor(&self) -> f64 {
        (self.alpha() * self.a + self.b).max(1.0 + PI * self.big_r * self.big_r / self.kappa)
    }

    pub fn ln_inv_eps(&self) -> f64 {
        (1.0 / self.eps).ln()
    }

    /// Filament angular speed `kappa / (4 pi h sqrt(h^2 + r*^2))`.
    pub fn alpha(&self) -> f64 {
        self.kappa / (4.0 * PI * self.h * (self.h * self.h + self.r_star * self.r_star).sqrt())
    }

    /// Rotation rate of the 2D pattern, `alpha ln(1/eps)`.
    pub fn alpha_bar(&self) -> f64 {
        self.alpha() * self.ln_inv_eps()
    }

    pub fn a1(&self) -> f64 {
        self.kappa * self.h / (4.0 * PI * (self.h * self.h + self.r_star * self.r_star))
    }

    pub fn b1(&self) -> f64 {
        self.kappa * self.r_star * self.r_star
            / (4.0 * PI * (self.h * self.h + self.r_star * self.r_star))
    }

    pub fn cap(&self) -> f64 {
        self.lambda / (self.eps * self.eps)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut c = *self;
        c.eps = eps;
        c.validate_basic()?;
        Ok(c)
    }

    pub fn helix(&self) -> HelixCurve {
        HelixCurve {
            h: self.h,
            r_star: self.r_star,
            a1: self.a1(),
            b1: self.b1(),
        }
    }

    /// Leading-order energy landscape `Y(r)`, maximal at `r = r_star`.
    pub fn landscape(&self, r: f64) -> f64 {
        self.kappa * (self.h * self.h + r * r).sqrt() / (2.0 * PI * self.h) - self.alpha() * r * r
    }
}

/// Limiting helical filament parametrized by arclength `s` and slow time `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelixCurve {
    pub h: f64,
    pub r_star: f64,
    pub a1: f64,
    pub b1: f64,
}

impl HelixCurve {
    fn speed_norm(&self) -> f64 {
        (self.h * self.h + self.r_star * self.r_star).sqrt()
    }

    pub fn point(&self, s: f64, tau: f64) -> [f64; 3] {
        let n = self.speed_norm();
        let ang = (-s - self.a1 * tau) / n;
        [
            self.r_star * ang.cos(),
            self.r_star * ang.sin(),
            (self.h * s - self.b1 * tau) / n,
        ]
    }

    /// Arclength at which the filament crosses the plane `x3 = 0`.
    pub fn plane_parameter(&self, tau: f64) -> f64 {
        self.b1 * tau / self.h
    }

    pub fn plane_crossing(&self, tau: f64) -> [f64; 2] {
        let p = self.point(self.plane_parameter(tau), tau);
        [p[0], p[1]]
    }

    /// Angular rate of the crossing point in `tau` (clockwise).
    pub fn crossing_rate(&self) -> f64 {
        (self.a1 + self.b1 / self.h) / self.speed_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg() -> ProblemConfig {
        ProblemConfig::new(1.0, 1.0, 1.0, 2.0, 0.05, 1.0, 0.0, 60.0).unwrap()
    }

    #[test]
    fn k_at_unit_point() {
        let k = k_matrix(1.0, [1.0, 0.0]);
        assert!((k.xx - 0.5).abs() < 1e-15);
        assert!(k.xy.abs() < 1e-15);
        assert!((k.yy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_at_unit_point() {
        let t = t_matrix(1.0, [1.0, 0.0]);
        assert!((t.xx - 2f64.sqrt()).abs() < 1e-14);
        assert!(t.xy.abs() < 1e-15);
        assert!((t.yy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_squares_to_k_inverse() {
        for &x in &[[0.3, -0.7], [1.2, 0.4], [0.0, 1.9]] {
            let t = t_matrix(0.8, x);
            let m = t.matmul(&t);
            let ki = k_matrix(0.8, x).inverse();
            assert!((m[0][0] - ki.xx).abs() < 1e-12);
            assert!((m[0][1] - ki.xy).abs() < 1e-12);
            assert!((m[1][1] - ki.yy).abs() < 1e-12);
            let ti = t_inverse(0.8, x);
            let id = t.matmul(&ti);
            assert!((id[0][0] - 1.0).abs() < 1e-12 && id[0][1].abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_sqrt_matches_closed_form() {
        let x = [0.6, -1.1];
        let t = k_matrix(1.3, x).inverse().sqrt();
        let tc = t_matrix(1.3, x);
        assert!((t.xx - tc.xx).abs() < 1e-12);
        assert!((t.xy - tc.xy).abs() < 1e-12);
        assert!((t.yy - tc.yy).abs() < 1e-12);
    }

    #[test]
    fn landscape_peak_value() {
        let c = unit_cfg();
        let y = c.landscape(1.0);
        assert!((y - 3.0 * 2f64.sqrt() / (8.0 * PI)).abs() < 1e-12);
        assert!(c.landscape(0.9) < y && c.landscape(1.1) < y);
    }

    #[test]
    fn helix_constants() {
        let c = unit_cfg();
        assert!((c.a1() - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!((c.b1() - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert!((c.helix().crossing_rate() - c.alpha()).abs() < 1e-15);
    }

    #[test]
    fn crossing_lies_in_plane_and_rotates_clockwise() {
        let c = unit_cfg();
        let hx = c.helix();
        let tau = 0.7;
        let s = hx.plane_parameter(tau);
        assert!(hx.point(s, tau)[2].abs() < 1e-14);
        let p = hx.plane_crossing(tau);
        let q = rotate(c.alpha() * tau, [c.r_star, 0.0]);
        assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_cap() {
        let e = ProblemConfig::new(1.0, 1.0, 1.0, 2.0, 0.05, 1.0, 0.0, 4.0).unwrap_err();
        assert!(e.to_string().contains("Λ > max{αa+b, 1+πR²/κ}"));
        assert!(ProblemConfig::new_relaxed_cap(1.0, 1.0, 1.0, 2.0, 0.05, 1.0, 0.0, 4.0).is_ok());
    }

    #[test]
    fn rejects_r_star_outside() {
        assert!(ProblemConfig::new(1.0, 1.0, 2.0, 2.0, 0.05, 1.0, 0.0, 60.0).is_err());
    }
}
