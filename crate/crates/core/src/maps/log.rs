use num_complex::Complex;
use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, Zero};

use super::{check_finite, check_points, pole_series, symmetrize, MapOptions, RationalMap, Reduction};
use crate::{CertifiedSeries, Error, LaurentSeries, Result, C64};

/// An exact complex rational charge `a_i`; its numerical value is multiplied
/// by the map's charge scale.
pub type Charge = Complex<Rational64>;

/// `z = r w + u + sum a_i log(w_i - w)`,
/// `zbar = r/w + ubar + sum abar_i log(wbar_i - 1/w)`,
/// with `sum a_i = sum abar_i = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogMap {
    r: C64,
    u: C64,
    ubar: C64,
    w: Vec<C64>,
    wbar: Vec<C64>,
    a: Vec<Charge>,
    abar: Vec<Charge>,
    scale: f64,
    opts: MapOptions,
}

impl LogMap {
    /// `branch` holds `(a_i, w_i)` and `branch_bar` holds `(abar_i, wbar_i)`;
    /// numerical charges are `scale * a_i`.
    pub fn new(
        r: C64,
        u: C64,
        ubar: C64,
        branch: Vec<(Charge, C64)>,
        branch_bar: Vec<(Charge, C64)>,
        scale: f64,
        opts: MapOptions,
    ) -> Result<Self> {
        if branch.is_empty() || branch.len() != branch_bar.len() {
            return Err(Error::InvalidMap(
                "branch points and barred branch points need the same nonzero count".into(),
            ));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidMap("charge scale must be positive".into()));
        }
        let a: Vec<Charge> = branch.iter().map(|b| b.0).collect();
        let abar: Vec<Charge> = branch_bar.iter().map(|b| b.0).collect();
        check_charges(&a, "a")?;
        check_charges(&abar, "abar")?;
        if opts.real_structure && a.iter().zip(&abar).any(|(x, y)| x.conj() != *y) {
            return Err(Error::InvalidMap(
                "real structure needs abar_i = conj(a_i) exactly".into(),
            ));
        }
        let n1 = a.len();
        let mut p = vec![r, u, ubar];
        p.extend(branch.iter().map(|b| b.1));
        p.extend(branch_bar.iter().map(|b| b.1));
        Self::build(n1, &p, a, abar, scale, opts)
    }

    fn build(n1: usize, p: &[C64], a: Vec<Charge>, abar: Vec<Charge>, scale: f64, opts: MapOptions) -> Result<Self> {
        if p.len() != 2 * n1 + 3 {
            return Err(Error::InvalidMap("parameter count".into()));
        }
        check_finite(p)?;
        let mut p = p.to_vec();
        if opts.real_structure {
            symmetrize(&mut p, &pairs(n1))?;
        }
        let w = p[3..3 + n1].to_vec();
        let wbar = p[3 + n1..].to_vec();
        check_points(&w, "branch point", opts.physical)?;
        check_points(&wbar, "barred branch point", opts.physical)?;
        Ok(Self {
            r: p[0],
            u: p[1],
            ubar: p[2],
            w,
            wbar,
            a,
            abar,
            scale,
            opts,
        })
    }

    pub(crate) fn rebuild(&self, p: &[C64], opts: MapOptions) -> Result<Self> {
        Self::build(self.w.len(), p, self.a.clone(), self.abar.clone(), self.scale, opts)
    }

    /// `n`, where the map has `n+1` branch points.
    pub fn order(&self) -> usize {
        self.w.len() - 1
    }

    pub fn branch_count(&self) -> usize {
        self.w.len()
    }

    pub fn r(&self) -> C64 {
        self.r
    }

    pub fn u(&self) -> C64 {
        self.u
    }

    pub fn ubar(&self) -> C64 {
        self.ubar
    }

    pub fn w(&self) -> &[C64] {
        &self.w
    }

    pub fn wbar(&self) -> &[C64] {
        &self.wbar
    }

    pub fn charges(&self) -> &[Charge] {
        &self.a
    }

    pub fn charges_bar(&self) -> &[Charge] {
        &self.abar
    }

    pub fn charge_scale(&self) -> f64 {
        self.scale
    }

    /// Numerical value of `a_i`.
    pub fn a(&self, i: usize) -> C64 {
        charge_value(&self.a[i]) * self.scale
    }

    /// Numerical value of `abar_i`.
    pub fn abar(&self, i: usize) -> C64 {
        charge_value(&self.abar[i]) * self.scale
    }

    pub fn mirror(&self) -> Self {
        Self {
            r: self.r,
            u: self.ubar,
            ubar: self.u,
            w: self.wbar.clone(),
            wbar: self.w.clone(),
            a: self.abar.clone(),
            abar: self.a.clone(),
            scale: self.scale,
            opts: self.opts,
        }
    }
}

fn pairs(n1: usize) -> Vec<(usize, usize)> {
    let mut v = vec![(1, 2)];
    v.extend((0..n1).map(|i| (3 + i, 3 + n1 + i)));
    v
}

pub(crate) fn charge_value(a: &Charge) -> C64 {
    C64::new(
        *a.re.numer() as f64 / *a.re.denom() as f64,
        *a.im.numer() as f64 / *a.im.denom() as f64,
    )
}

fn check_charges(a: &[Charge], what: &str) -> Result<()> {
    let mut sum = Charge::zero();
    for c in a {
        let re = sum.re.checked_add(&c.re);
        let im = sum.im.checked_add(&c.im);
        match (re, im) {
            (Some(re), Some(im)) => sum = Charge::new(re, im),
            _ => return Err(Error::InvalidMap(format!("{what} charge sum overflows"))),
        }
    }
    if !sum.is_zero() {
        return Err(Error::InvalidMap(format!(
            "charges {what} must sum to zero exactly, got {} + {} i",
            sum.re, sum.im
        )));
    }
    Ok(())
}

/// Parses an exact rational: an integer, a fraction `p/q` or a decimal such as
/// `-0.125` or `2.5e-3`.
pub fn parse_charge(s: &str) -> Result<Rational64> {
    let bad = |msg: &str| Error::Parse {
        line: 0,
        msg: format!("charge {s:?}: {msg}"),
    };
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad("bad numerator"))?;
        let q: i64 = q.trim().parse().map_err(|_| bad("bad denominator"))?;
        if q == 0 {
            return Err(bad("zero denominator"));
        }
        if p == i64::MIN || q == i64::MIN {
            return Err(bad("out of range"));
        }
        return Ok(Rational64::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..].parse().map_err(|_| bad("bad exponent"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("empty"));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad("not a number"));
    }
    let mut numer: i64 = 0;
    for b in int_part.bytes().chain(frac_part.bytes()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as i64))
            .ok_or_else(|| bad("too many digits"))?;
    }
    let shift = exp
        .checked_sub(frac_part.len() as i32)
        .ok_or_else(|| bad("exponent out of range"))?;
    let ten_pow = |k: u32| 10i64.checked_pow(k).ok_or_else(|| bad("exponent out of range"));
    let mut value = Rational64::from_integer(numer);
    if shift >= 0 {
        value = value
            .checked_mul(&Rational64::from_integer(ten_pow(shift as u32)?))
            .ok_or_else(|| bad("out of range"))?;
    } else {
        value = Rational64::new(numer, ten_pow((-shift) as u32)?);
    }
    Ok(if neg { -value } else { value })
}

impl Reduction for LogMap {
    fn dim(&self) -> usize {
        2 * self.w.len() + 3
    }

    fn params(&self) -> Vec<C64> {
        let mut p = vec![self.r, self.u, self.ubar];
        p.extend(&self.w);
        p.extend(&self.wbar);
        p
    }

    fn options(&self) -> MapOptions {
        self.opts
    }

    fn z(&self, w: C64) -> C64 {
        let logs: C64 = (0..self.w.len()).map(|i| self.a(i) * (1.0 - self.w[i] / w).ln()).sum();
        self.r * w + self.u + logs
    }

    fn z_w(&self, w: C64) -> C64 {
        let s: C64 = (0..self.w.len())
            .map(|i| self.a(i) * self.w[i] / (w * (w - self.w[i])))
            .sum();
        self.r + s
    }

    fn zbar(&self, w: C64) -> C64 {
        let logs: C64 = (0..self.wbar.len())
            .map(|i| self.abar(i) * (1.0 - self.wbar[i] * w).ln())
            .sum();
        self.r / w + self.ubar + logs
    }

    fn zbar_w(&self, w: C64) -> C64 {
        let s: C64 = (0..self.wbar.len())
            .map(|i| self.abar(i) * self.wbar[i] / (1.0 - self.wbar[i] * w))
            .sum();
        -self.r / (w * w) - s
    }

    fn grad_z(&self, w: C64) -> Vec<C64> {
        let n1 = self.w.len();
        let mut g = vec![C64::new(0.0, 0.0); 2 * n1 + 3];
        g[0] = w;
        g[1] = C64::new(1.0, 0.0);
        for i in 0..n1 {
            g[3 + i] = self.a(i) / (self.w[i] - w);
        }
        g
    }

    fn grad_zbar(&self, w: C64) -> Vec<C64> {
        let n1 = self.w.len();
        let mut g = vec![C64::new(0.0, 0.0); 2 * n1 + 3];
        g[0] = w.inv();
        g[2] = C64::new(1.0, 0.0);
        for i in 0..n1 {
            g[3 + n1 + i] = -self.abar(i) * w / (1.0 - self.wbar[i] * w);
        }
        g
    }

    fn z_singularities(&self) -> Vec<C64> {
        self.w.clone()
    }

    fn zbar_singularities(&self) -> Vec<C64> {
        self.wbar.iter().map(|p| p.inv()).collect()
    }

    fn z_singular_at_zero(&self) -> bool {
        true
    }

    fn expand_z(&self, lo: i32) -> CertifiedSeries {
        let mut terms = vec![(1, self.r), (0, self.u)];
        for i in 0..self.w.len() {
            let a = self.a(i);
            let mut pk = C64::new(1.0, 0.0);
            for k in 1..=(-lo).max(0) {
                pk *= self.w[i];
                terms.push((-k, -a * pk / k as f64));
            }
        }
        CertifiedSeries::truncated(LaurentSeries::from_terms(&terms).unwrap_or_default(), lo)
    }

    fn expand_z_dot(&self, dot: &[C64], lo: i32) -> CertifiedSeries {
        let mut terms = vec![(1, dot[0]), (0, dot[1])];
        for i in 0..self.w.len() {
            terms.extend(pole_series(-self.a(i) * dot[3 + i], self.w[i], false, lo));
        }
        CertifiedSeries::truncated(LaurentSeries::from_terms(&terms).unwrap_or_default(), lo)
    }

    fn conj_pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.w.len())
    }
}

/// The logarithmic map whose paired branch points coalesce into the simple
/// poles of `rat` as `eps -> 0`: `a_{2i-1} = 1/eps`, `a_{2i} = -1/eps`,
/// `w_{2i-1} = w_i`, `w_{2i} = w_i + eps u_i`, and the same on the barred
/// side.
pub fn coalesce(rat: &RationalMap, eps: f64) -> Result<LogMap> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidMap("eps must be positive".into()));
    }
    let one = Charge::new(Rational64::from_integer(1), Rational64::zero());
    let mut branch = Vec::new();
    let mut branch_bar = Vec::new();
    for &(u, p) in rat.poles() {
        branch.push((one, p));
        branch.push((-one, p + u * eps));
    }
    for &(u, p) in rat.poles_bar() {
        branch_bar.push((one, p));
        branch_bar.push((-one, p + u * eps));
    }
    let mut opts = rat.options();
    // the shifted points may leave the disk for large eps
    opts.physical = opts.physical && branch.iter().chain(&branch_bar).all(|b| b.1.norm() < 1.0);
    LogMap::new(rat.r(), rat.u0(), rat.ubar0(), branch, branch_bar, 1.0 / eps, opts)
}

/// Inverse of [`coalesce`]: the rational map whose `eps`-configuration is
/// `log`. Requires branch points in pairs with charges `+c, -c`.
pub fn rational_limit(log: &LogMap) -> Result<RationalMap> {
    let n1 = log.branch_count();
    if !n1.is_multiple_of(2) {
        return Err(Error::InvalidMap("rational limit needs paired branch points".into()));
    }
    let mut poles = Vec::new();
    let mut poles_bar = Vec::new();
    for i in 0..n1 / 2 {
        let (j, k) = (2 * i, 2 * i + 1);
        if log.charges()[j] != -log.charges()[k] || log.charges_bar()[j] != -log.charges_bar()[k] {
            return Err(Error::InvalidMap(format!("branch pair {} has unpaired charges", i + 1)));
        }
        poles.push(((log.w()[k] - log.w()[j]) * log.a(j), log.w()[j]));
        poles_bar.push(((log.wbar()[k] - log.wbar()[j]) * log.abar(j), log.wbar()[j]));
    }
    RationalMap::new(log.r, log.u, log.ubar, poles, poles_bar, log.opts)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::MapPair;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn q(p: i64) -> Charge {
        Charge::new(Rational64::from_integer(p), Rational64::zero())
    }

    pub(crate) fn sample() -> LogMap {
        LogMap::new(
            c(1.0, 0.0),
            c(0.1, 0.0),
            c(0.1, 0.0),
            vec![(q(1), c(0.2, 0.1)), (q(-1), c(0.4, -0.2))],
            vec![(q(1), c(0.2, -0.1)), (q(-1), c(0.4, 0.2))],
            1.0,
            MapOptions::physical_real(),
        )
        .unwrap()
    }

    #[test]
    fn parse_charges() {
        assert_eq!(parse_charge("1/2").unwrap(), Rational64::new(1, 2));
        assert_eq!(parse_charge("-0.125").unwrap(), Rational64::new(-1, 8));
        assert_eq!(parse_charge("2.5e-3").unwrap(), Rational64::new(1, 400));
        assert_eq!(parse_charge("3").unwrap(), Rational64::from_integer(3));
        assert_eq!(parse_charge("1e2").unwrap(), Rational64::from_integer(100));
        assert!(parse_charge("1/0").is_err());
        assert!(parse_charge("abc").is_err());
        assert!(parse_charge("99999999999999999999").is_err());
        assert!(parse_charge("1e400").is_err());
        assert!(parse_charge(".").is_err());
    }

    #[test]
    fn rejects_nonzero_charge_sum() {
        let r = LogMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![(q(1), c(0.2, 0.0)), (q(-2), c(0.4, 0.0))],
            vec![(q(1), c(0.2, 0.0)), (q(-1), c(0.4, 0.0))],
            1.0,
            MapOptions::formal(),
        );
        assert!(matches!(r, Err(Error::InvalidMap(_))));
        let third = Charge::new(Rational64::new(1, 3), Rational64::zero());
        let r = LogMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![
                (third, c(0.2, 0.0)),
                (third, c(0.3, 0.0)),
                (-third - third, c(0.4, 0.0)),
            ],
            vec![
                (third, c(0.2, 0.0)),
                (third, c(0.3, 0.0)),
                (-third - third, c(0.4, 0.0)),
            ],
            1.0,
            MapOptions::formal(),
        );
        assert!(r.is_ok());
    }

    #[test]
    fn first_coefficient_at_infinity() {
        let m = LogMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![(q(1), c(0.2, 0.0)), (q(-1), c(0.4, 0.0))],
            vec![(q(1), c(0.2, 0.0)), (q(-1), c(0.4, 0.0))],
            1.0,
            MapOptions::formal(),
        )
        .unwrap();
        let s = MapPair::from(m).expand_z_at_infinity(-3, 1).unwrap();
        assert!((s.coeff(-1) - c(0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn series_matches_closed_form() {
        let m = MapPair::from(sample());
        let s = m.expand_z_at_infinity(-80, 1).unwrap();
        let sb = m.expand_zbar_at_zero(-1, 80).unwrap();
        for k in 0..10 {
            let w = C64::from_polar(3.0, 0.6 * k as f64 + 0.1);
            assert!((s.eval(w).unwrap() - m.eval_z(w).unwrap()).norm() < 1e-10);
            let v = C64::from_polar(0.5, 0.6 * k as f64 + 0.1);
            assert!((sb.eval(v).unwrap() - m.eval_zbar(v).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = sample();
        let w = c(0.8, 0.9);
        let h = 1e-6;
        assert!(((m.z(w + h) - m.z(w - h)) / (2.0 * h) - m.z_w(w)).norm() < 1e-8);
        assert!(((m.zbar(w + h) - m.zbar(w - h)) / (2.0 * h) - m.zbar_w(w)).norm() < 1e-8);
        let p = m.params();
        let g = m.grad_z(w);
        let gb = m.grad_zbar(w);
        for i in 0..p.len() {
            let mut qp = p.clone();
            qp[i] += h;
            let a = m.rebuild(&qp, MapOptions::formal()).unwrap();
            qp[i] -= 2.0 * h;
            let b = m.rebuild(&qp, MapOptions::formal()).unwrap();
            assert!(((a.z(w) - b.z(w)) / (2.0 * h) - g[i]).norm() < 1e-8);
            assert!(((a.zbar(w) - b.zbar(w)) / (2.0 * h) - gb[i]).norm() < 1e-8);
        }
    }

    #[test]
    fn coalescence_round_trip() {
        let rat = RationalMap::new(
            c(1.0, 0.0),
            c(0.1, 0.0),
            c(0.1, 0.0),
            vec![(c(1.0, 0.0), c(0.3, 0.0))],
            vec![(c(1.0, 0.0), c(0.3, 0.0))],
            MapOptions::physical_real(),
        )
        .unwrap();
        let eps = 1e-3;
        let log = coalesce(&rat, eps).unwrap();
        let sum: Charge = log.charges().iter().sum();
        assert!(sum.is_zero());
        let back = rational_limit(&log).unwrap();
        assert!((back.poles()[0].0 - c(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(back.poles()[0].1, c(0.3, 0.0));
        let w = c(2.0, 0.0);
        let (lz, rz) = (
            MapPair::from(log).eval_z(w).unwrap(),
            MapPair::from(rat).eval_z(w).unwrap(),
        );
        assert!((lz - rz).norm() < 10.0 * eps);
    }
}
