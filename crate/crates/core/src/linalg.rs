//! Dense complex least squares.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

/// Threshold on sigma_min / sigma_max below which a system is degenerate.
pub const RANK_TOL: f64 = 1e-10;

pub struct LeastSquares {
    pub solution: Vec<C64>,
    /// Residual vector `A x - b`.
    pub residual: Vec<C64>,
    /// `A x`.
    pub fitted: Vec<C64>,
}

/// Singular values of a dense row-major matrix, in decreasing order.
pub fn singular_values(rows: usize, cols: usize, a: &[C64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(rows, cols, a);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank with the relative threshold [`RANK_TOL`].
pub fn rank(rows: usize, cols: usize, a: &[C64]) -> usize {
    let s = singular_values(rows, cols, a);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > RANK_TOL * top).count()
}

/// Minimizes `|A x - b|` for a full-column-rank `A` (row-major, `rows x cols`).
pub fn solve(rows: usize, cols: usize, a: &[C64], b: &[C64]) -> Result<LeastSquares> {
    let m = DMatrix::from_row_slice(rows, cols, a);
    let rhs = DVector::from_column_slice(b);
    let sv = m.singular_values();
    let smax = sv.max();
    let smin = if cols > rows { 0.0 } else { sv.min() };
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(ratio >= RANK_TOL) {
        return Err(Error::DegenerateConfiguration(ratio));
    }
    // The SVD solve of nalgebra loses about eight digits on clustered
    // singular values; Householder QR does not.
    let qr = m.clone().qr();
    let qtb = qr.q().adjoint() * &rhs;
    let x = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(Error::DegenerateConfiguration(ratio))?;
    let fitted = &m * &x;
    let residual = &fitted - &rhs;
    Ok(LeastSquares {
        solution: x.iter().copied().collect(),
        residual: residual.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
    })
}

/// Root mean square of a complex vector.
pub fn rms(v: &[C64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overdetermined_consistent_system() {
        let a = vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(2.0, 0.0),
            C64::new(1.0, 1.0),
            C64::new(0.0, 0.0),
            C64::new(3.0, 0.0),
        ];
        let x = [C64::new(0.5, -1.0), C64::new(2.0, 0.25)];
        let b: Vec<C64> = (0..3).map(|i| a[2 * i] * x[0] + a[2 * i + 1] * x[1]).collect();
        let ls = solve(3, 2, &a, &b).unwrap();
        assert!((ls.solution[0] - x[0]).norm() < 1e-13);
        assert!((ls.solution[1] - x[1]).norm() < 1e-13);
        assert!(rms(&ls.residual) < 1e-13);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let a = vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
            C64::new(2.0, 0.0),
            C64::new(4.0, 0.0),
        ];
        let b = vec![C64::new(1.0, 0.0); 2];
        assert!(matches!(solve(2, 2, &a, &b), Err(Error::DegenerateConfiguration(_))));
        assert_eq!(rank(2, 2, &a), 1);
    }
}
