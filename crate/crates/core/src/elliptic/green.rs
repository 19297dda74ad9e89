use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elliptic::grid::{to_polar, ScalarField};
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::geometry::{det_k, t_matrix};
use crate::sampling::{bilinear, Edge};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenSample {
    pub probe: [f64; 2],
    pub separation: f64,
    pub green: f64,
    pub singular: f64,
    pub regular: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenProbeReport {
    /// Centre of the cell carrying the unit source.
    pub source: [f64; 2],
    pub samples: Vec<GreenSample>,
}

/// `Gamma(z) = -ln|z| / (2 pi)`.
pub fn log_kernel(z: [f64; 2]) -> f64 {
    -(z[0].hypot(z[1])).ln() / (2.0 * PI)
}

/// Anisotropic logarithmic part of `G_K(x, y)`.
pub fn singular_part(h: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let c = 0.5 * (1.0 / det_k(h, x).sqrt() + 1.0 / det_k(h, y).sqrt());
    let t = t_matrix(h, x).add(&t_matrix(h, y)).scale(0.5);
    c * log_kernel(t.apply([x[0] - y[0], x[1] - y[1]]))
}

/// Discrete Green function for a unit mass placed in the cell containing
/// `source`.
pub fn point_response(op: &EllipticOperator, source: [f64; 2], tol: f64) -> Result<([f64; 2], ScalarField)> {
    let g = op.grid;
    let (i, j) = g.locate(source).ok_or_else(|| {
        Error::Domain(format!(
            "source ({}, {}) lies outside the disk of radius {}",
            source[0], source[1], g.big_r
        ))
    })?;
    let mut f = ScalarField::zeros(g);
    f.set(i, j, 1.0 / g.cell_area(i));
    let u = op.solve(&f, tol)?;
    Ok((g.center(i, j), u))
}

/// Split the response to a unit source into its logarithmic and bounded parts
/// at each probe point.
pub fn green_probe(
    op: &EllipticOperator,
    source: [f64; 2],
    probes: &[[f64; 2]],
    tol: f64,
) -> Result<GreenProbeReport> {
    let (x0, u) = point_response(op, source, tol)?;
    let mut samples = Vec::with_capacity(probes.len());
    for &y in probes {
        let (r, th) = to_polar(y);
        if r >= op.grid.big_r {
            return Err(Error::Domain(format!(
                "probe ({}, {}) lies outside the disk",
                y[0], y[1]
            )));
        }
        let sep = (x0[0] - y[0]).hypot(x0[1] - y[1]);
        if sep == 0.0 {
            return Err(Error::Domain("probe coincides with the source".into()));
        }
        let green = bilinear(&u, r, th, Edge::Odd);
        let singular = singular_part(op.h, x0, y);
        samples.push(GreenSample {
            probe: y,
            separation: sep,
            green,
            singular,
            regular: green - singular,
        });
    }
    Ok(GreenProbeReport { source: x0, samples })
}

/// Regular part of the Dirichlet Green function of the Laplacian on the disk
/// of radius `big_r`.
pub fn disk_regular_part(big_r: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let rx2 = x[0] * x[0] + x[1] * x[1];
    if rx2 == 0.0 {
        return big_r.ln() / (2.0 * PI);
    }
    let s = big_r * big_r / rx2;
    let xs = [x[0] * s, x[1] * s];
    let d = (y[0] - xs[0]).hypot(y[1] - xs[1]);
    (rx2.sqrt() * d / big_r).ln() / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::grid::PolarGrid;

    #[test]
    fn disk_regular_part_cancels_on_boundary() {
        let x = [0.7, -0.3];
        let y = [2.0f64.sqrt(), 2.0f64.sqrt()];
        let total = log_kernel([x[0] - y[0], x[1] - y[1]]) + disk_regular_part(2.0, x, y);
        assert!(total.abs() < 1e-14);
    }

    #[test]
    fn discrete_green_is_symmetric() {
        let g = PolarGrid::new(32, 64, 2.0).unwrap();
        let op = EllipticOperator::assemble(g, 1.0).unwrap();
        let a = g.center(10, 3);
        let b = g.center(17, 9);
        let ga = green_probe(&op, a, &[b], 1e-12).unwrap().samples[0].green;
        let gb = green_probe(&op, b, &[a], 1e-12).unwrap().samples[0].green;
        assert!((ga - gb).abs() < 1e-6 * ga.abs());
    }

    #[test]
    fn source_outside_is_rejected() {
        let g = PolarGrid::new(8, 16, 2.0).unwrap();
        let op = EllipticOperator::assemble(g, 1.0).unwrap();
        assert!(matches!(
            green_probe(&op, [3.0, 0.0], &[[0.1, 0.0]], 1e-10),
            Err(Error::Domain(_))
        ));
    }
}
