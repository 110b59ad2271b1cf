//! Finite Laurent series in `w` with complex coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::{Error, Result, C64};

const ZERO: C64 = Complex64::new(0.0, 0.0);
const ONE: C64 = Complex64::new(1.0, 0.0);

/// Which exponents [`LaurentSeries::project`] keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    /// exponents > 0
    Plus,
    /// exponents < 0
    Minus,
    /// exponent 0
    Zero,
}

impl Part {
    fn keeps(self, e: i32) -> bool {
        match self {
            Part::Plus => e > 0,
            Part::Minus => e < 0,
            Part::Zero => e == 0,
        }
    }
}

/// Coefficients `c_lo .. c_hi` of `sum c_e w^e`. Always holds at least one
/// stored coefficient, so `hi >= lo`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSeries {
    lo: i32,
    coeffs: Vec<C64>,
}

impl LaurentSeries {
    /// Builds a series from the coefficient of `w^lo` upwards.
    pub fn new(lo: i32, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if coeffs.is_empty() {
            return Ok(Self::zero());
        }
        Ok(Self { lo, coeffs })
    }

    pub fn zero() -> Self {
        Self {
            lo: 0,
            coeffs: vec![ZERO],
        }
    }

    /// # Panics
    /// If `c` is not finite.
    pub fn constant(c: C64) -> Self {
        Self::monomial(0, c)
    }

    /// `c w^e`.
    ///
    /// # Panics
    /// If `c` is not finite.
    pub fn monomial(e: i32, c: C64) -> Self {
        assert!(c.is_finite(), "non-finite coefficient");
        Self { lo: e, coeffs: vec![c] }
    }

    /// Sum of `(exponent, coefficient)` terms; repeated exponents add up.
    pub fn from_terms(terms: &[(i32, C64)]) -> Result<Self> {
        let Some(lo) = terms.iter().map(|t| t.0).min() else {
            return Ok(Self::zero());
        };
        let hi = terms.iter().map(|t| t.0).max().unwrap_or(lo);
        let mut coeffs = vec![ZERO; (hi - lo + 1) as usize];
        for &(e, c) in terms {
            coeffs[(e - lo) as usize] += c;
        }
        Self::new(lo, coeffs)
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `w^e`, zero outside the stored window.
    pub fn coeff(&self, e: i32) -> C64 {
        if e < self.lo || e > self.hi() {
            ZERO
        } else {
            self.coeffs[(e - self.lo) as usize]
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.lo + i as i32, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Strips exactly-zero coefficients from both ends. Idempotent.
    pub fn trim(&self) -> Self {
        let first = self.coeffs.iter().position(|c| *c != ZERO);
        let last = self.coeffs.iter().rposition(|c| *c != ZERO);
        match (first, last) {
            (Some(a), Some(b)) => Self {
                lo: self.lo + a as i32,
                coeffs: self.coeffs[a..=b].to_vec(),
            },
            _ => Self::zero(),
        }
    }

    /// Keeps exponents in `lo..=hi`. Dropped nonzero coefficients are logged.
    pub fn truncate(&self, lo: i32, hi: i32) -> Self {
        let dropped = self.terms().filter(|(e, c)| (*e < lo || *e > hi) && *c != ZERO).count();
        if dropped > 0 {
            log::trace!("truncate to [{lo}, {hi}] dropped {dropped} coefficients");
        }
        if lo > hi {
            return Self::zero();
        }
        let coeffs: Vec<C64> = (lo..=hi).map(|e| self.coeff(e)).collect();
        Self { lo, coeffs }.trim()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Multiplies by `w^s`.
    pub fn shift(&self, s: i32) -> Self {
        Self {
            lo: self.lo + s,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn project(&self, part: Part) -> Self {
        let terms: Vec<(i32, C64)> = self.terms().filter(|(e, _)| part.keeps(*e)).collect();
        Self::from_terms(&terms).unwrap_or_else(|_| Self::zero())
    }

    pub fn deriv_w(&self) -> Self {
        let terms: Vec<(i32, C64)> = self
            .terms()
            .filter(|(e, _)| *e != 0)
            .map(|(e, c)| (e - 1, c * e as f64))
            .collect();
        Self::from_terms(&terms).unwrap_or_else(|_| Self::zero())
    }

    /// Substitutes `w -> 1/w`.
    pub fn reflect(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Self { lo: -self.hi(), coeffs }
    }

    /// Evaluates the positive and negative exponent parts by separate Horner
    /// passes in `w` and `1/w`.
    pub fn eval(&self, w: C64) -> Result<C64> {
        let t = self.trim();
        if w == ZERO {
            if t.lo < 0 {
                return Err(Error::ZeroArgument);
            }
            return Ok(t.coeff(0));
        }
        let hi = t.hi();
        let mut total = ZERO;
        if hi >= 0 {
            let p0 = t.lo.max(0);
            let mut acc = ZERO;
            for e in (p0..=hi).rev() {
                acc = acc * w + t.coeff(e);
            }
            total += acc * w.powi(p0);
        }
        if t.lo < 0 {
            let y = w.inv();
            let top = hi.min(-1);
            let mut acc = ZERO;
            for e in t.lo..=top {
                acc = acc * y + t.coeff(e);
            }
            total += acc * y.powi(-top);
        }
        Ok(total)
    }

    /// `self^k` by repeated squaring; exact.
    pub fn pow(&self, k: u32) -> Self {
        let mut result = Self::constant(ONE);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let coeffs = (lo..=hi).map(|e| self.coeff(e) + other.coeff(e) * sign).collect();
        Self { lo, coeffs }
    }

    /// Product whose terms are summed in an order that does not depend on
    /// which factor comes first, so `a * b` and `b * a` agree bit for bit.
    fn convolve(&self, other: &Self) -> Self {
        let lo = self.lo + other.lo;
        let hi = self.hi() + other.hi();
        let start = self.lo.min(other.lo);
        let x = |e1: i32, e2: i32| self.coeff(e1) * other.coeff(e2);
        let coeffs = (lo..=hi)
            .map(|k| {
                let mut acc = ZERO;
                let mut m = start.max(k - self.hi().max(other.hi()));
                while 2 * m <= k {
                    let pair = if 2 * m == k { x(m, m) } else { x(m, k - m) + x(k - m, m) };
                    acc += pair;
                    m += 1;
                }
                acc
            })
            .collect();
        Self { lo, coeffs }
    }
}

impl Default for LaurentSeries {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.trim();
        if t.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in t.terms().filter(|(_, c)| *c != ZERO) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({} {:+}i) w^{}", c.re, c.im, e)?;
        }
        Ok(())
    }
}

impl Add for &LaurentSeries {
    type Output = LaurentSeries;
    fn add(self, rhs: &LaurentSeries) -> LaurentSeries {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &LaurentSeries {
    type Output = LaurentSeries;
    fn sub(self, rhs: &LaurentSeries) -> LaurentSeries {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: &LaurentSeries) -> LaurentSeries {
        self.convolve(rhs)
    }
}

impl Neg for &LaurentSeries {
    type Output = LaurentSeries;
    fn neg(self) -> LaurentSeries {
        self.scale(-ONE)
    }
}

impl Add for LaurentSeries {
    type Output = LaurentSeries;
    fn add(self, rhs: LaurentSeries) -> LaurentSeries {
        &self + &rhs
    }
}

impl Sub for LaurentSeries {
    type Output = LaurentSeries;
    fn sub(self, rhs: LaurentSeries) -> LaurentSeries {
        &self - &rhs
    }
}

impl Mul for LaurentSeries {
    type Output = LaurentSeries;
    fn mul(self, rhs: LaurentSeries) -> LaurentSeries {
        &self * &rhs
    }
}

/// `{f, g} = w (f_w g_x - f_x g_w)`; the x-derivatives are supplied by the
/// caller.
pub fn lax_bracket(f: &LaurentSeries, f_x: &LaurentSeries, g: &LaurentSeries, g_x: &LaurentSeries) -> LaurentSeries {
    let a = &f.deriv_w() * g_x;
    let b = f_x * &g.deriv_w();
    (&a - &b).shift(1)
}

/// An expansion at `w = oo` whose stored coefficients are exact for every
/// exponent `>= valid_lo`. `valid_lo == None` marks a finite Laurent
/// polynomial, exact everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedSeries {
    series: LaurentSeries,
    valid_lo: Option<i32>,
}

impl CertifiedSeries {
    pub fn exact(series: LaurentSeries) -> Self {
        Self {
            series: series.trim(),
            valid_lo: None,
        }
    }

    /// Marks everything below `valid_lo` as unknown and drops it.
    pub fn truncated(series: LaurentSeries, valid_lo: i32) -> Self {
        let s = series.trim();
        let hi = s.hi().max(valid_lo);
        Self {
            series: s.truncate(valid_lo, hi),
            valid_lo: Some(valid_lo),
        }
    }

    pub fn series(&self) -> &LaurentSeries {
        &self.series
    }

    pub fn valid_lo(&self) -> Option<i32> {
        self.valid_lo
    }

    pub fn is_exact(&self) -> bool {
        self.valid_lo.is_none()
    }

    /// Upper bound on the exponents of the ideal series; `None` for an exact
    /// zero.
    fn top(&self) -> Option<i32> {
        let t = self.series.trim();
        match (t.is_zero(), self.valid_lo) {
            (true, None) => None,
            (true, Some(v)) => Some(v - 1),
            (false, None) => Some(t.hi()),
            (false, Some(v)) => Some(t.hi().max(v - 1)),
        }
    }

    fn check(&self, e: i32) -> Result<()> {
        match self.valid_lo {
            Some(v) if e < v => Err(Error::WindowTooWide(format!(
                "exponent {e} below certified window start {v}"
            ))),
            _ => Ok(()),
        }
    }

    /// Certified coefficient of `w^e`.
    pub fn coeff(&self, e: i32) -> Result<C64> {
        self.check(e)?;
        Ok(self.series.coeff(e))
    }

    /// Certified coefficients on `lo..=hi`.
    pub fn window(&self, lo: i32, hi: i32) -> Result<LaurentSeries> {
        self.check(lo)?;
        Ok(self.series.truncate(lo, hi))
    }

    /// Projection; the plus and zero parts become exact once certified.
    pub fn project(&self, part: Part) -> Result<Self> {
        match part {
            Part::Plus => {
                self.check(1)?;
                Ok(Self::exact(self.series.project(part)))
            }
            Part::Zero => {
                self.check(0)?;
                Ok(Self::exact(self.series.project(part)))
            }
            Part::Minus => Ok(Self {
                series: self.series.project(part),
                valid_lo: self.valid_lo,
            }),
        }
    }

    /// Forgets coefficients below `floor`.
    pub fn truncate_below(&self, floor: i32) -> Self {
        let v = self.valid_lo.map_or(floor, |v| v.max(floor));
        Self::truncated(self.series.clone(), v)
    }

    pub fn add(&self, other: &Self) -> Self {
        let v = max_opt(self.valid_lo, other.valid_lo);
        Self::wrap(&self.series + &other.series, v)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let v = max_opt(self.valid_lo, other.valid_lo);
        Self::wrap(&self.series - &other.series, v)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::wrap(self.series.scale(s), self.valid_lo)
    }

    pub fn shift(&self, s: i32) -> Self {
        Self::wrap(self.series.shift(s), self.valid_lo.map(|v| v + s))
    }

    pub fn deriv_w(&self) -> Self {
        Self::wrap(self.series.deriv_w(), self.valid_lo.map(|v| v - 1))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (ta, tb) = (self.top(), other.top());
        let (Some(ta), Some(tb)) = (ta, tb) else {
            return Self::exact(LaurentSeries::zero());
        };
        let from_a = self.valid_lo.map(|v| v + tb);
        let from_b = other.valid_lo.map(|v| v + ta);
        let v = max_opt(from_a, from_b);
        Self::wrap(&self.series * &other.series, v)
    }

    fn wrap(series: LaurentSeries, valid_lo: Option<i32>) -> Self {
        match valid_lo {
            None => Self::exact(series),
            Some(v) => Self::truncated(series, v),
        }
    }

    /// `1/self` certified down to `target_lo`, by Newton iteration
    /// `g <- g (2 - s g)` on the normalized power series in `1/w`.
    pub fn reciprocal(&self, target_lo: i32) -> Result<Self> {
        let t = self.series.trim();
        if t.is_zero() {
            return Err(Error::NonInvertibleLeading);
        }
        let h = t.hi();
        // always keep the leading term so the result has a known top
        let target_lo = target_lo.min(-h);
        if let Some(v) = self.valid_lo {
            if h < v {
                return Err(Error::WindowTooWide("leading coefficient not certified".into()));
            }
            let floor = v - 2 * h;
            if target_lo < floor {
                return Err(Error::WindowTooWide(format!(
                    "reciprocal certified only down to w^{floor}, {target_lo} requested"
                )));
            }
        }
        let lead = t.coeff(h);
        if lead == ZERO {
            return Err(Error::NonInvertibleLeading);
        }
        let m = (-h - target_lo).max(0) as usize;
        let s: Vec<C64> = (0..=m).map(|j| t.coeff(h - j as i32) / lead).collect();
        let mut g = vec![ONE];
        let mut prec = 1usize;
        while prec < m + 1 {
            prec = (2 * prec).min(m + 1);
            let sg = series_mul_trunc(&s, &g, prec);
            let mut corr: Vec<C64> = sg.iter().map(|c| -c).collect();
            corr[0] += 2.0;
            g = series_mul_trunc(&g, &corr, prec);
        }
        g.resize(m + 1, ZERO);
        let inv = lead.inv();
        // coefficient of w^{-h-j} is g_j / lead; reverse so that lo comes first
        let coeffs: Vec<C64> = g.iter().rev().map(|c| c * inv).collect();
        let series = LaurentSeries::new(-h - m as i32, coeffs)?;
        Ok(Self::truncated(series, target_lo))
    }

    /// `self^k` for any integer `k`, certified down to `target_lo`.
    pub fn powi(&self, k: i32, target_lo: i32) -> Result<Self> {
        if k == 0 {
            return Ok(Self::exact(LaurentSeries::constant(ONE)));
        }
        let (base, n) = if k > 0 {
            (self.clone(), k)
        } else {
            let h = self.top().ok_or(Error::NonInvertibleLeading)?;
            // (1/self)^n has top -n h; each factor must reach target + (n-1) h
            let n = -k;
            (self.reciprocal(target_lo + (n - 1) * h)?, n)
        };
        let top = base.top().unwrap_or(0);
        let mut acc = base.clone();
        for j in 1..n {
            let remaining = n - j - 1;
            let floor = target_lo - remaining * top.max(0);
            acc = acc.mul(&base).truncate_below(floor);
        }
        if let Some(v) = acc.valid_lo {
            if v > target_lo {
                return Err(Error::WindowTooWide(format!(
                    "power certified only down to w^{v}, {target_lo} requested"
                )));
            }
        }
        Ok(acc)
    }
}

fn max_opt(a: Option<i32>, b: Option<i32>) -> Option<i32> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(a.max(b)),
    }
}

/// Product of two power series truncated to `n` terms.
fn series_mul_trunc(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; n];
    for (i, x) in a.iter().enumerate().take(n) {
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn series(lo: i32, v: &[f64]) -> LaurentSeries {
        LaurentSeries::new(lo, v.iter().map(|&x| c(x, 0.0)).collect()).unwrap()
    }

    #[test]
    fn add_disjoint_and_cancel() {
        let s = &series(1, &[1.0]) + &series(-1, &[1.0]);
        assert_eq!(s.trim(), series(-1, &[1.0, 0.0, 1.0]));
        let s = &series(0, &[3.0, 2.0]) + &series(1, &[-2.0]);
        assert_eq!(s.trim(), series(0, &[3.0]));
        let f = series(-2, &[1.0, 2.0, 3.0]);
        assert_eq!((&f + &LaurentSeries::zero()).trim(), f);
    }

    #[test]
    fn mul_examples() {
        let s = &series(0, &[1.0, 1.0]) * &series(0, &[-1.0, 1.0]);
        assert_eq!(s.trim(), series(0, &[-1.0, 0.0, 1.0]));
        let s = &series(-1, &[1.0]) * &series(1, &[1.0]);
        assert_eq!(s.trim(), series(0, &[1.0]));
        let (r, u) = (1.5, 0.25);
        let z = LaurentSeries::from_terms(&[(1, c(r, 0.0)), (-1, c(u, 0.0))]).unwrap();
        let sq = (&z * &z).trim();
        assert_eq!(sq.coeff(2), c(r * r, 0.0));
        assert_eq!(sq.coeff(0), c(2.0 * r * u, 0.0));
        assert_eq!(sq.coeff(-2), c(u * u, 0.0));
        assert_eq!(sq.coeff(1), c(0.0, 0.0));
    }

    #[test]
    fn projections() {
        let f = series(-1, &[4.0, 3.0, 2.0]);
        assert_eq!(f.project(Part::Plus).trim(), series(1, &[2.0]));
        assert_eq!(f.project(Part::Zero).trim(), series(0, &[3.0]));
        assert_eq!(f.project(Part::Minus).trim(), series(-1, &[4.0]));
        let back = &(&f.project(Part::Plus) + &f.project(Part::Zero)) + &f.project(Part::Minus);
        assert_eq!(back.trim(), f);
    }

    #[test]
    fn derivatives() {
        assert_eq!(series(2, &[1.0]).deriv_w().trim(), series(1, &[2.0]));
        assert!(series(0, &[5.0]).deriv_w().is_zero());
        assert_eq!(series(-1, &[1.0]).deriv_w().trim(), series(-2, &[-1.0]));
    }

    #[test]
    fn evaluation() {
        let f = series(0, &[1.0, 1.0]);
        assert_eq!(f.eval(c(0.0, 1.0)).unwrap(), c(1.0, 1.0));
        assert_eq!(series(-1, &[1.0]).eval(c(2.0, 0.0)).unwrap(), c(0.5, 0.0));
        let w = C64::from_polar(1.0, 0.7);
        let v = series(1, &[2.5]).eval(w).unwrap();
        assert!((v - w * 2.5).norm() < 1e-15);
        assert_eq!(series(-1, &[1.0]).eval(c(0.0, 0.0)), Err(Error::ZeroArgument));
        let g = series(-3, &[1.0, -2.0, 0.5, 3.0, 0.25, -1.0]);
        let w = c(0.3, -1.1);
        let direct: C64 = g.terms().map(|(e, a)| a * w.powi(e)).sum();
        assert!((g.eval(w).unwrap() - direct).norm() < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(LaurentSeries::new(0, vec![c(f64::NAN, 0.0)]), Err(Error::NonFinite));
    }

    #[test]
    fn trim_is_idempotent_and_keeps_small_values() {
        let f = series(-2, &[0.0, 1e-300, 1.0, 0.0]);
        let t = f.trim();
        assert_eq!(t, t.trim());
        assert_eq!(t.lo(), -1);
        assert_eq!(t.hi(), 0);
    }

    #[test]
    fn bracket_examples() {
        let w = series(1, &[1.0]);
        let zero = LaurentSeries::zero();
        let g = series(-1, &[0.3, 0.0, 2.0]);
        let one = LaurentSeries::constant(c(1.0, 0.0));
        // {w, x} = w, with g standing in for x through g_x = 1
        let b = lax_bracket(&w, &zero, &g, &one);
        assert_eq!(b.trim(), w);

        let (r, rd) = (1.3, 0.7);
        let z = series(1, &[r]);
        let zx = series(1, &[rd]);
        let zb = series(-1, &[r]);
        let zbx = series(-1, &[rd]);
        let b = lax_bracket(&z, &zx, &zb, &zbx).trim();
        assert_eq!(b.lo(), 0);
        assert!((b.coeff(0) - c(2.0 * r * rd, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reciprocal_of_exact_series() {
        // 1/(w - a) = sum a^k w^{-k-1}
        let a = c(0.3, 0.2);
        let f = CertifiedSeries::exact(LaurentSeries::from_terms(&[(1, c(1.0, 0.0)), (0, -a)]).unwrap());
        let g = f.reciprocal(-12).unwrap();
        for k in 0..12 {
            assert!((g.coeff(-k - 1).unwrap() - a.powi(k)).norm() < 1e-15);
        }
        assert!(g.coeff(-13).is_err());
        let one = f.mul(&g);
        assert!((one.coeff(0).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        for e in -10..0 {
            assert!(one.coeff(e).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn reciprocal_respects_certified_window() {
        let f = CertifiedSeries::truncated(series(-3, &[0.1, 0.2, 0.5, 1.0]), -3);
        // leading w^0 known with three subleading terms
        assert!(f.reciprocal(-3).is_ok());
        assert!(f.reciprocal(-4).is_err());
    }

    #[test]
    fn negative_power_matches_repeated_reciprocal() {
        let z = CertifiedSeries::exact(series(-2, &[0.1, 0.3, 0.5, 2.0]));
        let p = z.powi(-3, -15).unwrap();
        let r = z.reciprocal(-20).unwrap();
        let q = r.mul(&r).mul(&r);
        for e in -15..=-3 {
            assert!((p.coeff(e).unwrap() - q.coeff(e).unwrap()).norm() < 1e-13, "e = {e}");
        }
        let zero = CertifiedSeries::exact(LaurentSeries::zero());
        assert_eq!(zero.reciprocal(-3), Err(Error::NonInvertibleLeading));
    }

    #[test]
    fn truncated_products_track_validity() {
        let a = CertifiedSeries::truncated(series(-4, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]), -4);
        let b = CertifiedSeries::exact(series(0, &[1.0, 1.0]));
        let p = a.mul(&b);
        assert_eq!(p.valid_lo(), Some(-3));
    }
}
