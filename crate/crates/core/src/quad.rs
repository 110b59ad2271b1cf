//! Self-validating trapezoid quadrature on circles.

use std::f64::consts::PI;

use crate::{Error, Result, C64};

/// Node count the doubling starts from.
pub const START_NODES: usize = 16;
/// Node count the doubling stops at.
pub const MAX_NODES: usize = 1 << 14;
/// Default agreement between successive node doublings.
pub const DEFAULT_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: C64,
    pub nodes: usize,
    /// |I_n - I_{n/2}| at the accepted node count.
    pub change: f64,
}

/// `(1/2 pi i) \oint f(w) dw` over the counterclockwise circle
/// `|w - center| = radius`. Nodes double from [`START_NODES`] until two
/// successive values differ by less than `tol * max(1, |I|)`.
pub fn contour_integral<F>(mut f: F, center: C64, radius: f64, tol: f64) -> Result<Quadrature>
where
    F: FnMut(C64) -> Result<C64>,
{
    let node = |k: usize, n: usize| C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
    let mut n = START_NODES;
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..n {
        let d = node(k, n);
        sum += f(center + d)? * d;
    }
    let mut prev = sum / n as f64;
    while n < MAX_NODES {
        // the doubled rule reuses the old nodes and adds the midpoints
        for k in 0..n {
            let d = node(2 * k + 1, 2 * n);
            sum += f(center + d)? * d;
        }
        n *= 2;
        let value = sum / n as f64;
        let change = (value - prev).norm();
        if change < tol * value.norm().max(1.0) {
            return Ok(Quadrature {
                value,
                nodes: n,
                change,
            });
        }
        prev = value;
    }
    Err(Error::NoConvergence {
        iterations: n,
        residual: f64::NAN,
    })
}

/// Mean of `f` over `|w| = radius`, i.e. `(1/2 pi i) \oint f dw / w`: the
/// constant Laurent coefficient when the circle encloses every finite
/// singularity.
pub fn circle_mean<F>(mut f: F, radius: f64, tol: f64) -> Result<Quadrature>
where
    F: FnMut(C64) -> Result<C64>,
{
    contour_integral(|w| Ok(f(w)? / w), C64::new(0.0, 0.0), radius, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_of_simple_pole() {
        let p = C64::new(0.2, -0.1);
        let q = contour_integral(|w| Ok(3.0 / (w - p)), C64::new(0.0, 0.0), 1.0, DEFAULT_TOL).unwrap();
        assert!((q.value - 3.0).norm() < 1e-12);
    }

    #[test]
    fn analytic_integrand_vanishes() {
        let q = contour_integral(|w| Ok(w.exp()), C64::new(0.5, 0.5), 0.3, DEFAULT_TOL).unwrap();
        assert!(q.value.norm() < 1e-12);
    }

    #[test]
    fn mean_extracts_constant_term() {
        let q = circle_mean(|w| Ok(2.0 + w + 1.0 / (w * w)), 2.0, DEFAULT_TOL).unwrap();
        assert!((q.value - 2.0).norm() < 1e-12);
    }

    #[test]
    fn errors_propagate() {
        let r = contour_integral(|_| Err(Error::ContourThroughPole), C64::new(0.0, 0.0), 1.0, DEFAULT_TOL);
        assert_eq!(r, Err(Error::ContourThroughPole));
    }
}
