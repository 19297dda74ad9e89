//! Off-grid evaluation of polar cell fields and grid derivatives.
//!
//! Radial stencils that reach below the first ring continue through the origin
//! onto the opposite ray (`theta + pi`), which is why grids carry an even number
//! of angular cells. Beyond the outer ring a ghost value reflects the last rings
//! either oddly (zero boundary value) or evenly.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::elliptic::grid::{to_polar, PolarGrid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// Field vanishes on `r = R`.
    Odd,
    /// Zero normal derivative on `r = R`.
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Bilinear,
    /// Four-point Lagrange in each direction, clipped to the range of the
    /// enclosing cell corners.
    CubicLimited,
}

/// Value at extended radial index `k` (may be negative or `>= n_r`).
#[inline]
pub fn node(f: &ScalarField, k: isize, j: isize, edge: Edge) -> f64 {
    let g = f.grid;
    let n = g.n_r as isize;
    let nt = g.n_theta as isize;
    let (i, jj, sign) = if k < 0 {
        (-k - 1, j + nt / 2, 1.0)
    } else if k >= n {
        let s = match edge {
            Edge::Odd => -1.0,
            Edge::Even => 1.0,
        };
        (2 * n - 1 - k, j, s)
    } else {
        (k, j, 1.0)
    };
    let i = i.clamp(0, n - 1) as usize;
    let jj = jj.rem_euclid(nt) as usize;
    sign * f.data[i * g.n_theta + jj]
}

/// Fractional grid coordinates of a polar point with radius clamped to `[0, R]`.
#[inline]
fn frac_coords(g: &PolarGrid, r: f64, th: f64) -> (isize, f64, isize, f64) {
    let r = r.clamp(0.0, g.big_r);
    let p = r / g.dr() - 0.5;
    let k0 = p.floor();
    let q = th.rem_euclid(2.0 * PI) / g.dtheta();
    let j0 = q.floor();
    (k0 as isize, p - k0, j0 as isize, q - j0)
}

pub fn bilinear(f: &ScalarField, r: f64, th: f64, edge: Edge) -> f64 {
    let (k, s, j, t) = frac_coords(&f.grid, r, th);
    let v00 = node(f, k, j, edge);
    let v01 = node(f, k, j + 1, edge);
    let v10 = node(f, k + 1, j, edge);
    let v11 = node(f, k + 1, j + 1, edge);
    (1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11)
}

#[inline]
fn lagrange4(t: f64) -> [f64; 4] {
    // nodes at -1, 0, 1, 2
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

pub fn cubic_limited(f: &ScalarField, r: f64, th: f64, edge: Edge) -> f64 {
    let (k, s, j, t) = frac_coords(&f.grid, r, th);
    let wr = lagrange4(s);
    let wt = lagrange4(t);
    let mut acc = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, wa) in wr.iter().enumerate() {
        let kk = k - 1 + a as isize;
        let mut row = 0.0;
        for (b, wb) in wt.iter().enumerate() {
            let jj = j - 1 + b as isize;
            let v = node(f, kk, jj, edge);
            if (a == 1 || a == 2) && (b == 1 || b == 2) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            row += wb * v;
        }
        acc += wa * row;
    }
    acc.clamp(lo, hi)
}

pub fn sample(f: &ScalarField, r: f64, th: f64, edge: Edge, how: Interp) -> f64 {
    match how {
        Interp::Bilinear => bilinear(f, r, th, edge),
        Interp::CubicLimited => cubic_limited(f, r, th, edge),
    }
}

pub fn sample_xy(f: &ScalarField, x: [f64; 2], edge: Edge, how: Interp) -> f64 {
    let (r, th) = to_polar(x);
    sample(f, r, th, edge, how)
}

/// Centred radial derivative; through the origin on the first ring and
/// second-order one-sided on the last.
pub fn d_r(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let n = g.n_r;
    let inv = 1.0 / (2.0 * g.dr());
    let mut out = ScalarField::zeros(g);
    for i in 0..n {
        for j in 0..g.n_theta {
            let v = if i + 1 < n {
                (f.get(i + 1, j) - node(f, i as isize - 1, j as isize, Edge::Even)) * inv
            } else {
                (3.0 * f.get(i, j) - 4.0 * f.get(i - 1, j) + f.get(i - 2, j)) * inv
            };
            out.set(i, j, v);
        }
    }
    out
}

/// Centred periodic angular derivative `d/dtheta`.
pub fn d_theta(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let nt = g.n_theta;
    let inv = 1.0 / (2.0 * g.dtheta());
    let mut out = ScalarField::zeros(g);
    for i in 0..g.n_r {
        for j in 0..nt {
            let jp = (j + 1) % nt;
            let jm = (j + nt - 1) % nt;
            out.set(i, j, (f.get(i, jp) - f.get(i, jm)) * inv);
        }
    }
    out
}

/// Cartesian gradient components from polar derivatives.
pub fn cartesian_gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = f.grid;
    let fr = d_r(f);
    let ft = d_theta(f);
    let mut gx = ScalarField::zeros(g);
    let mut gy = ScalarField::zeros(g);
    for i in 0..g.n_r {
        let r = g.r(i);
        for j in 0..g.n_theta {
            let (s, c) = g.theta(j).sin_cos();
            let a = fr.get(i, j);
            let b = ft.get(i, j) / r;
            gx.set(i, j, c * a - s * b);
            gy.set(i, j, s * a + c * b);
        }
    }
    (gx, gy)
}

const GHOST: isize = 4;

/// Polynomial degree of a [`SplineField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    Cubic,
    Quintic,
}

impl Degree {
    fn order(self) -> usize {
        match self {
            Degree::Cubic => 3,
            Degree::Quintic => 5,
        }
    }

    /// Centred cardinal B-spline values at the integers `-2..=2`.
    fn node_weights(self) -> [f64; 5] {
        match self {
            Degree::Cubic => [0.0, 1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0, 0.0],
            Degree::Quintic => [1.0 / 120.0, 26.0 / 120.0, 66.0 / 120.0, 26.0 / 120.0, 1.0 / 120.0],
        }
    }
}

/// Interpolating tensor-product B-spline in `(r, theta)`, periodic in angle,
/// continued through the origin radially. Cubic splines are twice and
/// quintic splines four times continuously differentiable away from `r = 0`.
#[derive(Debug, Clone)]
pub struct SplineField {
    grid: PolarGrid,
    degree: Degree,
    rows: usize,
    coef: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineSample {
    pub value: f64,
    pub d_r: f64,
    pub d_theta: f64,
}

/// Solve the banded system with rows `w[0..5]` on diagonals `-2..=2`; the
/// first and last `half` rows are identity rows.
fn banded_solve(w: [f64; 5], half: usize, d: &mut [f64]) {
    let n = d.len();
    // rows stored as five diagonals, eliminated without pivoting
    let mut a = vec![[0.0f64; 5]; n];
    for (k, row) in a.iter_mut().enumerate() {
        if k < half || k + half >= n {
            row[2] = 1.0;
        } else {
            *row = w;
        }
    }
    for k in 0..n {
        let piv = a[k][2];
        for m in 1..=2 {
            if k + m >= n {
                break;
            }
            let f = a[k + m][2 - m] / piv;
            if f == 0.0 {
                continue;
            }
            for c in 0..=2 {
                if 2 - m + c < 5 && 2 + c < 5 {
                    a[k + m][2 - m + c] -= f * a[k][2 + c];
                }
            }
            d[k + m] -= f * d[k];
        }
    }
    for k in (0..n).rev() {
        let mut v = d[k];
        for c in 1..=2 {
            if k + c < n {
                v -= a[k][2 + c] * d[k + c];
            }
        }
        d[k] = v / a[k][2];
    }
}

impl SplineField {
    pub fn new(f: &ScalarField, edge: Edge) -> Self {
        Self::with_degree(f, edge, Degree::Cubic)
    }

    pub fn with_degree(f: &ScalarField, edge: Edge, degree: Degree) -> Self {
        let g = f.grid;
        let nt = g.n_theta;
        let rows = g.n_r + 2 * GHOST as usize;
        let mut coef = vec![0.0; rows * nt];
        for kk in 0..rows {
            let k = kk as isize - GHOST;
            for j in 0..nt {
                coef[kk * nt + j] = node(f, k, j as isize, edge);
            }
        }
        let w = degree.node_weights();
        // periodic angular pass by FFT
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(nt);
        let inv = planner.plan_fft_inverse(nt);
        let scale: Vec<f64> = (0..nt)
            .map(|m| {
                let k = 2.0 * PI * m as f64 / nt as f64;
                let sym = w[2] + 2.0 * w[1] * k.cos() + 2.0 * w[0] * (2.0 * k).cos();
                1.0 / sym / nt as f64
            })
            .collect();
        let mut buf = vec![Complex::new(0.0, 0.0); nt];
        for kk in 0..rows {
            let row = &mut coef[kk * nt..(kk + 1) * nt];
            for (b, &v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(v, 0.0);
            }
            fwd.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&scale) {
                *b *= *s;
            }
            inv.process(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re;
            }
        }
        // radial pass per column; the outermost ghost rows keep c = d
        let half = degree.order() / 2;
        let mut col = vec![0.0; rows];
        for j in 0..nt {
            for k in 0..rows {
                col[k] = coef[k * nt + j];
            }
            banded_solve(w, half, &mut col);
            for k in 0..rows {
                coef[k * nt + j] = col[k];
            }
        }
        SplineField {
            grid: g,
            degree,
            rows,
            coef,
        }
    }

    pub fn grid(&self) -> PolarGrid {
        self.grid
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    #[inline]
    fn c(&self, k: isize, j: isize) -> f64 {
        let kk = (k + GHOST).clamp(0, self.rows as isize - 1) as usize;
        let nt = self.grid.n_theta as isize;
        self.coef[kk * self.grid.n_theta + j.rem_euclid(nt) as usize]
    }

    pub fn eval(&self, r: f64, th: f64) -> SplineSample {
        let (k, s, j, t) = frac_coords(&self.grid, r, th);
        let (br, dbr) = basis(self.degree, s);
        let (bt, dbt) = basis(self.degree, t);
        let m = self.degree.order() + 1;
        let lo = (self.degree.order() as isize - 1) / 2;
        let mut v = 0.0;
        let mut vr = 0.0;
        let mut vt = 0.0;
        for a in 0..m {
            let kk = k - lo + a as isize;
            let mut row = 0.0;
            let mut drow = 0.0;
            for b in 0..m {
                let c = self.c(kk, j - lo + b as isize);
                row += bt[b] * c;
                drow += dbt[b] * c;
            }
            v += br[a] * row;
            vr += dbr[a] * row;
            vt += br[a] * drow;
        }
        SplineSample {
            value: v,
            d_r: vr / self.grid.dr(),
            d_theta: vt / self.grid.dtheta(),
        }
    }

    pub fn value_xy(&self, x: [f64; 2]) -> f64 {
        let (r, th) = to_polar(x);
        self.eval(r, th).value
    }

    /// Value and Cartesian gradient.
    pub fn grad_xy(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let (r, th) = to_polar(x);
        let s = self.eval(r, th);
        let (sn, cs) = th.sin_cos();
        let b = if r > 0.0 { s.d_theta / r } else { 0.0 };
        (s.value, [cs * s.d_r - sn * b, sn * s.d_r + cs * b])
    }
}

/// Weights and derivative weights of the `order + 1` control points around
/// fractional offset `t` in `[0, 1)`.
#[inline]
fn basis(degree: Degree, t: f64) -> ([f64; 6], [f64; 6]) {
    let mut b = [0.0; 6];
    let mut db = [0.0; 6];
    match degree {
        Degree::Cubic => {
            let u = 1.0 - t;
            let t2 = t * t;
            let t3 = t2 * t;
            b[..4].copy_from_slice(&[
                u * u * u / 6.0,
                (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
                (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
                t3 / 6.0,
            ]);
            db[..4].copy_from_slice(&[
                -u * u / 2.0,
                (3.0 * t2 - 4.0 * t) / 2.0,
                (-3.0 * t2 + 2.0 * t + 1.0) / 2.0,
                t2 / 2.0,
            ]);
        }
        Degree::Quintic => {
            // control points at offsets -2..=3 from the left node
            for (a, (bv, dv)) in b.iter_mut().zip(db.iter_mut()).enumerate() {
                let x = t - (a as f64 - 2.0);
                *bv = cardinal(5, x);
                *dv = cardinal(4, x + 0.5) - cardinal(4, x - 0.5);
            }
        }
    }
    (b, db)
}

/// Centred cardinal B-spline of degree `p` by truncated powers.
fn cardinal(p: i32, x: f64) -> f64 {
    let h = (p + 1) as f64 / 2.0;
    if x.abs() >= h {
        return 0.0;
    }
    let mut fact = 1.0;
    for k in 2..=p {
        fact *= k as f64;
    }
    let mut binom = 1.0;
    let mut acc = 0.0;
    for k in 0..=(p + 1) {
        let y = x + h - k as f64;
        if y > 0.0 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * y.powi(p);
        }
        binom = binom * (p + 1 - k) as f64 / (k + 1) as f64;
    }
    acc / fact
}
