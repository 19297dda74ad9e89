use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell-centred polar grid on the disk of radius `big_r`.
///
/// Cell `(i, j)` has centre `r_i = (i + 1/2) dr`, `theta_j = j dtheta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub n_r: usize,
    pub n_theta: usize,
    pub big_r: f64,
}

impl PolarGrid {
    pub fn new(n_r: usize, n_theta: usize, big_r: f64) -> Result<Self> {
        if n_r < 4 {
            return Err(Error::Grid(format!("n_r = {n_r} must be at least 4")));
        }
        if n_theta < 8 {
            return Err(Error::Grid(format!(
                "n_theta = {n_theta} must be at least 8"
            )));
        }
        if n_theta % 2 != 0 {
            return Err(Error::Grid(format!("n_theta = {n_theta} must be even")));
        }
        if !(big_r.is_finite() && big_r > 0.0) {
            return Err(Error::Grid(format!("R = {big_r} must be positive")));
        }
        Ok(PolarGrid {
            n_r,
            n_theta,
            big_r,
        })
    }

    pub fn dr(&self) -> f64 {
        self.big_r / self.n_r as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    pub fn cell_area(&self, i: usize) -> f64 {
        self.r(i) * self.dr() * self.dtheta()
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let (s, c) = self.theta(j).sin_cos();
        let r = self.r(i);
        [r * c, r * s]
    }

    /// Cell containing a Cartesian point, or `None` outside the disk.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, usize)> {
        let (r, th) = to_polar(x);
        if r >= self.big_r {
            return None;
        }
        let i = ((r / self.dr()) as usize).min(self.n_r - 1);
        let j = (th / self.dtheta()).round() as usize % self.n_theta;
        Some((i, j))
    }

    /// Same grid refined by an integer factor in both directions.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        PolarGrid::new(self.n_r * factor, self.n_theta * factor, self.big_r)
    }
}

/// Polar coordinates with `theta` in `[0, 2 pi)`.
pub fn to_polar(x: [f64; 2]) -> (f64, f64) {
    let r = x[0].hypot(x[1]);
    let mut th = x[1].atan2(x[0]);
    if th < 0.0 {
        th += 2.0 * PI;
    }
    if th >= 2.0 * PI {
        th -= 2.0 * PI;
    }
    (r, th)
}

/// Cell-centred scalar values on a [`PolarGrid`], stored ring by ring.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: PolarGrid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: PolarGrid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: PolarGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape {
                expected: format!("{} values", grid.len()),
                found: format!("{} values", data.len()),
            });
        }
        Ok(ScalarField { grid, data })
    }

    /// Sample `f(r, theta)` at the cell centres.
    pub fn from_polar_fn(grid: PolarGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.n_r {
            let r = grid.r(i);
            for j in 0..grid.n_theta {
                data.push(f(r, grid.theta(j)));
            }
        }
        ScalarField { grid, data }
    }

    pub fn from_xy_fn(grid: PolarGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_polar_fn(grid, |r, th| {
            let (s, c) = th.sin_cos();
            f([r * c, r * s])
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.data[k] = v;
    }

    pub fn same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape {
                expected: format!("{}x{} grid", self.grid.n_r, self.grid.n_theta),
                found: format!("{}x{} grid", other.grid.n_r, other.grid.n_theta),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination `f(r, value)`.
    pub fn map_r(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let g = self.grid;
        let mut out = self.clone();
        for i in 0..g.n_r {
            let r = g.r(i);
            for j in 0..g.n_theta {
                let k = g.idx(i, j);
                out.data[k] = f(r, self.data[k]);
            }
        }
        out
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Area-weighted integral over the disk.
    pub fn integral(&self) -> f64 {
        self.weighted_sum(|_, _, v| v)
    }

    pub fn weighted_sum(&self, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let g = self.grid;
        let mut total = 0.0;
        for i in 0..g.n_r {
            let r = g.r(i);
            let area = g.cell_area(i);
            let mut ring = 0.0;
            for j in 0..g.n_theta {
                ring += f(r, g.theta(j), self.data[g.idx(i, j)]);
            }
            total += area * ring;
        }
        total
    }

    pub fn l2_norm(&self) -> f64 {
        self.weighted_sum(|_, _, v| v * v).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weighted_sum(|_, _, v| v.abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Counter-clockwise rotation by an arbitrary `angle`, using periodic
    /// cubic Lagrange interpolation along each ring.
    pub fn rotated(&self, angle: f64) -> ScalarField {
        let g = self.grid;
        let n = g.n_theta as isize;
        let s = angle / g.dtheta();
        let m = s.floor();
        let f = s - m;
        let m = m as isize;
        let w = [
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        ];
        let mut out = ScalarField::zeros(g);
        for i in 0..g.n_r {
            for j in 0..g.n_theta {
                // value at theta_j - angle, i.e. index j - m - f
                let base = j as isize - m;
                let mut v = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let src = (base + 1 - k as isize).rem_euclid(n) as usize;
                    v += wk * self.get(i, src);
                }
                out.data[g.idx(i, j)] = v;
            }
        }
        out
    }

    /// Shift by `shift` cells in the angular direction, i.e. rotation of the
    /// pattern counter-clockwise by `shift * dtheta`.
    pub fn rotate_cells(&self, shift: isize) -> ScalarField {
        let g = self.grid;
        let n = g.n_theta as isize;
        let mut out = ScalarField::zeros(g);
        for i in 0..g.n_r {
            for j in 0..g.n_theta {
                let src = (j as isize - shift).rem_euclid(n) as usize;
                out.data[g.idx(i, j)] = self.get(i, src);
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path, h: f64) -> Result<()> {
        let g = self.grid;
        let mut s = String::with_capacity(g.len() * 25 + 64);
        writeln!(
            s,
            "# polar nr={} ntheta={} R={} h={}",
            g.n_r,
            g.n_theta,
            fmt_f64(g.big_r),
            fmt_f64(h)
        )
        .unwrap();
        for i in 0..g.n_r {
            for j in 0..g.n_theta {
                if j > 0 {
                    s.push(',');
                }
                s.push_str(&fmt_f64(self.get(i, j)));
            }
            s.push('\n');
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    /// Read a field file, returning the field and the pitch from its header.
    pub fn read_csv(path: &Path) -> Result<(ScalarField, f64)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|msg| Error::parse(path, msg))
    }

    pub fn parse_csv(text: &str) -> std::result::Result<(ScalarField, f64), String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty file")?;
        let rest = header
            .strip_prefix("# polar")
            .ok_or("header must start with '# polar'")?;
        let (mut nr, mut nt, mut br, mut h) = (None, None, None, None);
        for tok in rest.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| format!("bad header token '{tok}'"))?;
            match k {
                "nr" => nr = Some(v.parse::<usize>().map_err(|e| format!("nr: {e}"))?),
                "ntheta" => nt = Some(v.parse::<usize>().map_err(|e| format!("ntheta: {e}"))?),
                "R" => br = Some(v.parse::<f64>().map_err(|e| format!("R: {e}"))?),
                "h" => h = Some(v.parse::<f64>().map_err(|e| format!("h: {e}"))?),
                _ => return Err(format!("unknown header key '{k}'")),
            }
        }
        let (nr, nt, br, h) = match (nr, nt, br, h) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err("header must define nr, ntheta, R and h".into()),
        };
        let grid = PolarGrid::new(nr, nt, br).map_err(|e| e.to_string())?;
        let mut data = Vec::with_capacity(grid.len());
        let mut rows = 0usize;
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            let before = data.len();
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|e| format!("line {}: {e}", ln + 2))?;
                if !v.is_finite() {
                    return Err(format!("line {}: non-finite value", ln + 2));
                }
                data.push(v);
            }
            if data.len() - before != nt {
                return Err(format!(
                    "line {}: expected {nt} columns, found {}",
                    ln + 2,
                    data.len() - before
                ));
            }
        }
        if rows != nr {
            return Err(format!("expected {nr} rows, found {rows}"));
        }
        Ok((ScalarField { grid, data }, h))
    }
}

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
