use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::elliptic::grid::{PolarGrid, ScalarField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Angular Fourier decomposition with a tridiagonal solve per mode. Exact
    /// inverse of the assembled stencil up to round-off.
    Spectral,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg { max_iters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Finite-volume discretization of `-div(K grad u)` on the disk with `u = 0`
/// on the boundary.
///
/// In polar coordinates `K` is diagonal with radial entry `h^2/(h^2+r^2)` and
/// angular entry 1, so the stencil has five points and the face
/// transmissibilities depend on the ring only. The flux form `A` is symmetric;
/// pointwise values are `A u / area`.
#[derive(Clone)]
pub struct EllipticOperator {
    pub grid: PolarGrid,
    pub h: f64,
    backend: Backend,
    /// Transmissibility of the outer face of ring `i`; the last entry is the
    /// boundary face.
    t_r: Vec<f64>,
    /// Angular transmissibility between neighbours on ring `i`.
    t_t: Vec<f64>,
    area: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Per-mode Thomas factors: `(cp, 1/m)` for each ring.
    factors: Vec<Vec<(f64, f64)>>,
}

impl std::fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("grid", &self.grid)
            .field("h", &self.h)
            .field("backend", &self.backend)
            .finish()
    }
}

pub fn radial_coefficient(h: f64, r: f64) -> f64 {
    h * h / (h * h + r * r)
}

impl EllipticOperator {
    pub fn assemble(grid: PolarGrid, h: f64) -> Result<Self> {
        Self::with_backend(grid, h, Backend::Spectral)
    }

    pub fn with_backend(grid: PolarGrid, h: f64, backend: Backend) -> Result<Self> {
        // re-validate in case the grid was built by hand
        let grid = PolarGrid::new(grid.n_r, grid.n_theta, grid.big_r)?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("h = {h} must be positive")));
        }
        let n = grid.n_r;
        let dr = grid.dr();
        let dt = grid.dtheta();
        let mut t_r = Vec::with_capacity(n);
        for i in 0..n {
            let rf = (i as f64 + 1.0) * dr;
            let dist = if i + 1 < n { dr } else { 0.5 * dr };
            t_r.push(radial_coefficient(h, rf) * rf * dt / dist);
        }
        let t_t: Vec<f64> = (0..n).map(|i| dr / (grid.r(i) * dt)).collect();
        let area: Vec<f64> = (0..n).map(|i| grid.cell_area(i)).collect();

        let nt = grid.n_theta;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(nt);
        let inv = planner.plan_fft_inverse(nt);
        let factors = (0..nt)
            .map(|m| {
                let lam = 2.0 - 2.0 * (2.0 * PI * m as f64 / nt as f64).cos();
                let mut f = Vec::with_capacity(n);
                let mut cp_prev = 0.0;
                for i in 0..n {
                    let left = if i > 0 { t_r[i - 1] } else { 0.0 };
                    let diag = left + t_r[i] + t_t[i] * lam;
                    let lower = if i > 0 { -t_r[i - 1] } else { 0.0 };
                    let m = diag - lower * cp_prev;
                    let upper = if i + 1 < n { -t_r[i] } else { 0.0 };
                    let cp = upper / m;
                    f.push((cp, 1.0 / m));
                    cp_prev = cp;
                }
                f
            })
            .collect();
        Ok(EllipticOperator {
            grid,
            h,
            backend,
            t_r,
            t_t,
            area,
            fwd,
            inv,
            factors,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn cell_areas(&self) -> &[f64] {
        &self.area
    }

    /// Flux form `A u` (integrated over each cell).
    pub fn apply_flux(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (n, nt) = (g.n_r, g.n_theta);
        let mut out = vec![0.0; g.len()];
        for i in 0..n {
            for j in 0..nt {
                let k = i * nt + j;
                let uc = u[k];
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let jm = if j == 0 { nt - 1 } else { j - 1 };
                let mut acc = self.t_t[i] * (2.0 * uc - u[i * nt + jp] - u[i * nt + jm]);
                if i + 1 < n {
                    acc += self.t_r[i] * (uc - u[k + nt]);
                } else {
                    acc += self.t_r[i] * uc;
                }
                if i > 0 {
                    acc += self.t_r[i - 1] * (uc - u[k - nt]);
                }
                out[k] = acc;
            }
        }
        out
    }

    /// Pointwise discrete operator `L_h u`.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check(u)?;
        let mut out = self.apply_flux(&u.data);
        let nt = self.grid.n_theta;
        for (k, v) in out.iter_mut().enumerate() {
            *v /= self.area[k / nt];
        }
        ScalarField::from_vec(self.grid, out)
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::Shape {
                expected: format!("{}x{} grid", self.grid.n_r, self.grid.n_theta),
                found: format!("{}x{} grid", f.grid.n_r, f.grid.n_theta),
            });
        }
        Ok(())
    }

    fn rhs(&self, f: &ScalarField) -> Vec<f64> {
        let nt = self.grid.n_theta;
        f.data
            .iter()
            .enumerate()
            .map(|(k, &v)| v * self.area[k / nt])
            .collect()
    }

    fn residual(&self, u: &[f64], b: &[f64]) -> f64 {
        let au = self.apply_flux(u);
        let num: f64 = au.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum();
        let den: f64 = b.iter().map(|v| v * v).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Solve `L_h u = f` with `u = 0` on the boundary to relative residual
    /// `tol` in the flux norm.
    pub fn solve(&self, f: &ScalarField, tol: f64) -> Result<ScalarField> {
        self.solve_with_stats(f, tol).map(|(u, _)| u)
    }

    pub fn solve_with_stats(&self, f: &ScalarField, tol: f64) -> Result<(ScalarField, SolveStats)> {
        self.check(f)?;
        if f.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("right-hand side is not finite".into()));
        }
        let b = self.rhs(f);
        if b.iter().all(|&v| v == 0.0) {
            return Ok((
                ScalarField::zeros(self.grid),
                SolveStats {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let (u, stats) = match self.backend {
            Backend::Spectral => self.spectral(&b, tol)?,
            Backend::Pcg { max_iters } => self.pcg(&b, tol, max_iters)?,
        };
        Ok((ScalarField::from_vec(self.grid, u)?, stats))
    }

    fn spectral(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let mut u = self.spectral_once(b);
        let mut res = self.residual(&u, b);
        let mut rounds = 1;
        // iterative refinement in case round-off accumulates on large grids
        while res > tol && rounds < 4 {
            let au = self.apply_flux(&u);
            let r: Vec<f64> = b.iter().zip(&au).map(|(b, a)| b - a).collect();
            let du = self.spectral_once(&r);
            for (x, d) in u.iter_mut().zip(du) {
                *x += d;
            }
            res = self.residual(&u, b);
            rounds += 1;
        }
        if res > tol {
            return Err(Error::Solver(format!(
                "spectral solve reached residual {res:e} above tolerance {tol:e}"
            )));
        }
        Ok((
            u,
            SolveStats {
                iterations: rounds,
                relative_residual: res,
            },
        ))
    }

    fn spectral_once(&self, b: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (n, nt) = (g.n_r, g.n_theta);
        let mut spec = vec![Complex::new(0.0, 0.0); n * nt];
        for (c, &v) in spec.iter_mut().zip(b) {
            *c = Complex::new(v, 0.0);
        }
        for row in spec.chunks_mut(nt) {
            self.fwd.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); n];
        for m in 0..nt {
            let fac = &self.factors[m];
            for i in 0..n {
                let lower = if i > 0 { -self.t_r[i - 1] } else { 0.0 };
                let prev = if i > 0 { col[i - 1] } else { Complex::new(0.0, 0.0) };
                col[i] = (spec[i * nt + m] - prev * lower) * fac[i].1;
            }
            for i in (0..n - 1).rev() {
                let next = col[i + 1];
                col[i] -= next * fac[i].0;
            }
            for i in 0..n {
                spec[i * nt + m] = col[i];
            }
        }
        for row in spec.chunks_mut(nt) {
            self.inv.process(row);
        }
        let s = 1.0 / nt as f64;
        spec.iter().map(|c| c.re * s).collect()
    }

    fn pcg(&self, b: &[f64], tol: f64, max_iters: usize) -> Result<(Vec<f64>, SolveStats)> {
        let g = self.grid;
        let (n, nt) = (g.n_r, g.n_theta);
        let diag: Vec<f64> = (0..n * nt)
            .map(|k| {
                let i = k / nt;
                let left = if i > 0 { self.t_r[i - 1] } else { 0.0 };
                left + self.t_r[i] + 2.0 * self.t_t[i]
            })
            .collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n * nt];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for it in 0..max_iters {
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
            if rn <= tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        relative_residual: rn,
                    },
                ));
            }
            let ap = self.apply_flux(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return Err(Error::Solver(format!(
                    "non-positive curvature {pap:e} at iteration {it}"
                )));
            }
            let alpha = rz / pap;
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            for k in 0..z.len() {
                z[k] = r[k] / diag[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
        let rn = self.residual(&x, b);
        if rn <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: max_iters,
                    relative_residual: rn,
                },
            ));
        }
        Err(Error::Solver(format!(
            "conjugate gradients stalled at residual {rn:e} after {max_iters} iterations"
        )))
    }

    /// Area-weighted inner product, under which `L_h` is self-adjoint.
    pub fn inner(&self, u: &ScalarField, v: &ScalarField) -> f64 {
        let nt = self.grid.n_theta;
        u.data
            .iter()
            .zip(&v.data)
            .enumerate()
            .map(|(k, (a, b))| a * b * self.area[k / nt])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(n_r: usize, n_t: usize, h: f64) -> EllipticOperator {
        EllipticOperator::assemble(PolarGrid::new(n_r, n_t, 2.0).unwrap(), h).unwrap()
    }

    fn noise(g: PolarGrid, seed: u64) -> ScalarField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_vec(g, data).unwrap()
    }

    #[test]
    fn operator_is_self_adjoint() {
        let a = op(16, 24, 0.7);
        let u = noise(a.grid, 1);
        let v = noise(a.grid, 2);
        let l = a.inner(&a.apply(&u).unwrap(), &v);
        let r = a.inner(&u, &a.apply(&v).unwrap());
        assert!((l - r).abs() < 1e-11 * l.abs().max(1.0));
    }

    #[test]
    fn operator_is_positive() {
        let a = op(12, 16, 1.0);
        for s in 0..5 {
            let u = noise(a.grid, s);
            assert!(a.inner(&a.apply(&u).unwrap(), &u) > 0.0);
        }
    }

    #[test]
    fn constants_only_see_the_boundary() {
        let a = op(10, 16, 1.0);
        let one = ScalarField::from_polar_fn(a.grid, |_, _| 1.0);
        let l = a.apply(&one).unwrap();
        for i in 0..a.grid.n_r - 1 {
            for j in 0..a.grid.n_theta {
                assert!(l.get(i, j).abs() < 1e-12);
            }
        }
        assert!(l.get(a.grid.n_r - 1, 3) > 0.0);
    }

    #[test]
    fn spectral_inverts_apply() {
        let a = op(24, 32, 1.3);
        let f = noise(a.grid, 7);
        let u = a.solve(&f, 1e-10).unwrap();
        let back = a.apply(&u).unwrap();
        let err = back.zip(&f, |x, y| x - y).max_abs();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn pcg_agrees_with_spectral() {
        let g = PolarGrid::new(16, 32, 2.0).unwrap();
        let s = EllipticOperator::assemble(g, 1.0).unwrap();
        let p = EllipticOperator::with_backend(g, 1.0, Backend::Pcg { max_iters: 20_000 }).unwrap();
        let f = ScalarField::from_xy_fn(g, |x| (-(x[0] - 1.0).powi(2) * 9.0 - x[1] * x[1] * 9.0).exp());
        let us = s.solve(&f, 1e-12).unwrap();
        let (up, st) = p.solve_with_stats(&f, 1e-12).unwrap();
        assert!(st.iterations > 0);
        let d = us.zip(&up, |a, b| a - b).max_abs();
        assert!(d < 1e-9 * us.max_abs(), "diff {d}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = op(8, 8, 1.0);
        let u = a.solve(&ScalarField::zeros(a.grid), 1e-10).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = op(8, 8, 1.0);
        let f = ScalarField::zeros(PolarGrid::new(8, 10, 2.0).unwrap());
        assert!(matches!(a.solve(&f, 1e-10), Err(Error::Shape { .. })));
    }
}
