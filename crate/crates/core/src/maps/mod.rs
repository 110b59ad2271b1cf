//! The three reduced parametrizations of the pair `(z, zbar)`.
//!
//! Parameter vectors are ordered as follows.
//!
//! * polynomial: `r, u_0..u_N, ubar_0..ubar_N` (dimension `2N+3`)
//! * rational: `r, u0, ubar0, u_1..u_n, w_1..w_n, ubar_1..ubar_n, wbar_1..wbar_n`
//!   (dimension `4n+3`)
//! * logarithmic: `r, u, ubar, w_1..w_{n+1}, wbar_1..wbar_{n+1}` (dimension
//!   `2n+5`; the charges are constants of the family)
//!
//! `zbar` is always written as a function of `w`. Logarithms use the branch
//! `sum a_i log(w_i - w) = sum a_i Log(1 - w_i/w)` (allowed by `sum a_i = 0`),
//! whose cuts are the segments `[0, w_i]`; on the barred side
//! `sum abar_i Log(1 - wbar_i w)`, with cuts on the rays from `1/wbar_i` to
//! infinity. Both are cut-free on `|w| = 1` in physical mode.

mod log;
mod poly;
mod rational;
pub mod record;

use std::f64::consts::PI;

pub use log::{coalesce, parse_charge, rational_limit, Charge, LogMap};
pub use poly::PolyMap;
pub use rational::RationalMap;

use crate::{CertifiedSeries, Error, LaurentSeries, Result, C64};

/// Distance to a pole or branch point below which evaluation is refused.
pub const SINGULAR_TOL: f64 = 1e-10;
/// Largest accepted deviation from the real structure before symmetrizing.
pub const REAL_TOL: f64 = 1e-9;
/// Largest number of series coefficients any expansion will produce.
pub const MAX_WINDOW: i32 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct MapOptions {
    /// Bar is complex conjugation: `ubar = conj(u)`, `wbar = conj(w)`,
    /// `abar = conj(a)`, `r > 0`.
    pub real_structure: bool,
    /// Poles and branch points strictly inside the unit disk.
    pub physical: bool,
}

impl MapOptions {
    pub fn physical_real() -> Self {
        Self {
            real_structure: true,
            physical: true,
        }
    }

    pub fn formal() -> Self {
        Self::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Polynomial,
    Rational,
    Logarithmic,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Polynomial => "polynomial",
            MapKind::Rational => "rational",
            MapKind::Logarithmic => "logarithmic",
        }
    }
}

/// Kind-specific closed forms. Evaluation here is unchecked; [`MapPair`]
/// guards against singular points.
pub(crate) trait Reduction {
    fn dim(&self) -> usize;
    fn params(&self) -> Vec<C64>;
    fn options(&self) -> MapOptions;
    fn z(&self, w: C64) -> C64;
    fn z_w(&self, w: C64) -> C64;
    fn zbar(&self, w: C64) -> C64;
    fn zbar_w(&self, w: C64) -> C64;
    fn grad_z(&self, w: C64) -> Vec<C64>;
    fn grad_zbar(&self, w: C64) -> Vec<C64>;
    /// Finite singular points of `z` other than `w = 0`.
    fn z_singularities(&self) -> Vec<C64>;
    /// Finite singular points of `zbar` other than `w = 0`.
    fn zbar_singularities(&self) -> Vec<C64>;
    /// Whether `z` is singular at `w = 0`.
    fn z_singular_at_zero(&self) -> bool;
    /// Expansion of `z` at infinity, exact down to `lo`.
    fn expand_z(&self, lo: i32) -> CertifiedSeries;
    /// Expansion at infinity of `dz/dx` for the parameter velocity `dot`.
    fn expand_z_dot(&self, dot: &[C64], lo: i32) -> CertifiedSeries;
    /// Pairs `(i, j)` with `p_j = conj(p_i)` under the real structure;
    /// index 0 (`r`) is real.
    fn conj_pairs(&self) -> Vec<(usize, usize)>;
}

/// A reduced conformal-map pair.
#[derive(Clone, Debug, PartialEq)]
pub enum MapPair {
    Polynomial(PolyMap),
    Rational(RationalMap),
    Logarithmic(LogMap),
}

impl From<PolyMap> for MapPair {
    fn from(m: PolyMap) -> Self {
        MapPair::Polynomial(m)
    }
}

impl From<RationalMap> for MapPair {
    fn from(m: RationalMap) -> Self {
        MapPair::Rational(m)
    }
}

impl From<LogMap> for MapPair {
    fn from(m: LogMap) -> Self {
        MapPair::Logarithmic(m)
    }
}

impl MapPair {
    pub(crate) fn inner(&self) -> &dyn Reduction {
        match self {
            MapPair::Polynomial(m) => m,
            MapPair::Rational(m) => m,
            MapPair::Logarithmic(m) => m,
        }
    }

    pub fn kind(&self) -> MapKind {
        match self {
            MapPair::Polynomial(_) => MapKind::Polynomial,
            MapPair::Rational(_) => MapKind::Rational,
            MapPair::Logarithmic(_) => MapKind::Logarithmic,
        }
    }

    /// `N` for polynomial maps, `n` for rational and logarithmic maps.
    pub fn order(&self) -> usize {
        match self {
            MapPair::Polynomial(m) => m.order(),
            MapPair::Rational(m) => m.order(),
            MapPair::Logarithmic(m) => m.order(),
        }
    }

    /// Dimension of the reduced phase space.
    pub fn dim(&self) -> usize {
        self.inner().dim()
    }

    pub fn params(&self) -> Vec<C64> {
        self.inner().params()
    }

    pub fn options(&self) -> MapOptions {
        self.inner().options()
    }

    pub fn r(&self) -> C64 {
        self.params()[0]
    }

    /// Same family and constants, new parameters. Validates and, under the
    /// real structure, symmetrizes exactly.
    pub fn with_params(&self, p: &[C64]) -> Result<MapPair> {
        self.with_params_opts(p, self.options())
    }

    pub fn with_params_opts(&self, p: &[C64], opts: MapOptions) -> Result<MapPair> {
        if p.len() != self.dim() {
            return Err(Error::InvalidMap(format!(
                "expected {} parameters, got {}",
                self.dim(),
                p.len()
            )));
        }
        Ok(match self {
            MapPair::Polynomial(m) => m.rebuild(p, opts)?.into(),
            MapPair::Rational(m) => m.rebuild(p, opts)?.into(),
            MapPair::Logarithmic(m) => m.rebuild(p, opts)?.into(),
        })
    }

    /// The map with bar and no-bar exchanged, written in `y = 1/w`:
    /// `mirror.z(y) = zbar(1/y)`.
    pub fn mirror(&self) -> MapPair {
        match self {
            MapPair::Polynomial(m) => m.mirror().into(),
            MapPair::Rational(m) => m.mirror().into(),
            MapPair::Logarithmic(m) => m.mirror().into(),
        }
    }

    /// Parameter permutation of [`MapPair::mirror`]: `mirror.params()[i] =
    /// params()[perm[i]]`. It is an involution.
    pub fn mirror_permutation(&self) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.dim()).collect();
        for (i, j) in self.inner().conj_pairs() {
            perm.swap(i, j);
        }
        perm
    }

    fn check_point(&self, w: C64, sing: &[C64], at_zero: bool) -> Result<()> {
        if !w.is_finite() {
            return Err(Error::SingularPoint(format!("{w}")));
        }
        if at_zero && w.norm() < SINGULAR_TOL {
            return Err(Error::SingularPoint(format!("{w}")));
        }
        if sing.iter().any(|s| (w - s).norm() < SINGULAR_TOL) {
            return Err(Error::SingularPoint(format!("{w}")));
        }
        Ok(())
    }

    fn check_z(&self, w: C64) -> Result<()> {
        let inner = self.inner();
        self.check_point(w, &inner.z_singularities(), inner.z_singular_at_zero())
    }

    fn check_zbar(&self, w: C64) -> Result<()> {
        self.check_point(w, &self.inner().zbar_singularities(), true)
    }

    /// Closed-form `z(w)`.
    pub fn eval_z(&self, w: C64) -> Result<C64> {
        self.check_z(w)?;
        Ok(self.inner().z(w))
    }

    /// Closed-form `zbar(w)`.
    pub fn eval_zbar(&self, w: C64) -> Result<C64> {
        self.check_zbar(w)?;
        Ok(self.inner().zbar(w))
    }

    pub fn eval_z_w(&self, w: C64) -> Result<C64> {
        self.check_z(w)?;
        Ok(self.inner().z_w(w))
    }

    pub fn eval_zbar_w(&self, w: C64) -> Result<C64> {
        self.check_zbar(w)?;
        Ok(self.inner().zbar_w(w))
    }

    /// `dz/dp` for every parameter.
    pub fn grad_z(&self, w: C64) -> Result<Vec<C64>> {
        self.check_z(w)?;
        Ok(self.inner().grad_z(w))
    }

    /// `dzbar/dp` for every parameter.
    pub fn grad_zbar(&self, w: C64) -> Result<Vec<C64>> {
        self.check_zbar(w)?;
        Ok(self.inner().grad_zbar(w))
    }

    /// `dz/dx` at `w` for the parameter velocity `dot`.
    pub fn z_dot(&self, w: C64, dot: &[C64]) -> Result<C64> {
        Ok(dot_product(&self.grad_z(w)?, dot))
    }

    pub fn zbar_dot(&self, w: C64, dot: &[C64]) -> Result<C64> {
        Ok(dot_product(&self.grad_zbar(w)?, dot))
    }

    pub fn z_singularities(&self) -> Vec<C64> {
        self.inner().z_singularities()
    }

    pub fn zbar_singularities(&self) -> Vec<C64> {
        self.inner().zbar_singularities()
    }

    /// Laurent coefficients of `z` at infinity on `lo..=hi`.
    pub fn expand_z_at_infinity(&self, lo: i32, hi: i32) -> Result<LaurentSeries> {
        check_window(lo, hi)?;
        self.expand_z_certified(lo)?.window(lo, hi)
    }

    /// Laurent coefficients of `zbar` at `w = 0` on `lo..=hi` (exponents of
    /// `w`).
    pub fn expand_zbar_at_zero(&self, lo: i32, hi: i32) -> Result<LaurentSeries> {
        check_window(-hi, -lo)?;
        Ok(self.mirror().expand_z_at_infinity(-hi, -lo)?.reflect())
    }

    /// Expansion of `z` at infinity certified down to `lo`.
    pub fn expand_z_certified(&self, lo: i32) -> Result<CertifiedSeries> {
        if lo < -MAX_WINDOW {
            return Err(Error::WindowTooWide(format!("lower exponent {lo}")));
        }
        Ok(self.inner().expand_z(lo))
    }

    /// Expansion of `dz/dx` at infinity certified down to `lo`.
    pub fn expand_z_dot_certified(&self, dot: &[C64], lo: i32) -> Result<CertifiedSeries> {
        if lo < -MAX_WINDOW {
            return Err(Error::WindowTooWide(format!("lower exponent {lo}")));
        }
        if dot.len() != self.dim() {
            return Err(Error::InvalidMap("tangent length mismatch".into()));
        }
        Ok(self.inner().expand_z_dot(dot, lo))
    }

    /// Largest `|w|` over the singular points of `z`, zero if none.
    pub fn z_singular_radius(&self) -> f64 {
        self.z_singularities().iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Smallest `|w|` over the singular points of `zbar`, infinite if none.
    pub fn zbar_singular_radius(&self) -> f64 {
        self.zbar_singularities()
            .iter()
            .map(|s| s.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// A circle radius on which both `z` and `zbar` are analytic, with the
    /// singularities of `z` inside and those of `zbar` outside. `None` if no
    /// such annulus exists.
    pub fn separating_radius(&self) -> Option<f64> {
        let inner = self.z_singular_radius();
        let outer = self.zbar_singular_radius();
        if !(inner < outer) {
            return None;
        }
        if self.options().physical || (inner < 1.0 && outer > 1.0) {
            return Some(1.0);
        }
        if inner == 0.0 {
            return Some(if outer.is_finite() { outer / 2.0 } else { 1.0 });
        }
        if !outer.is_finite() {
            return Some(2.0 * inner);
        }
        Some((inner * outer).sqrt())
    }

    /// Radius of the sample circle used by the collocation solvers. Prefers
    /// the separating annulus; rational maps, whose singularities are poles,
    /// fall back to the widest gap between singular radii.
    pub fn sample_radius(&self) -> Result<f64> {
        if let Some(r) = self.separating_radius() {
            return Ok(r);
        }
        match self.kind() {
            MapKind::Rational => {
                let mut radii: Vec<f64> = self
                    .z_singularities()
                    .iter()
                    .chain(self.zbar_singularities().iter())
                    .map(|s| s.norm())
                    .collect();
                radii.sort_by(f64::total_cmp);
                let mut best = (0.0, radii[0] / 2.0);
                for pair in radii.windows(2) {
                    let gap = (pair[1] / pair[0]).ln();
                    if gap > best.0 {
                        best = (gap, (pair[0] * pair[1]).sqrt());
                    }
                }
                let last = radii[radii.len() - 1];
                if best.0 < 2f64.ln() {
                    best.1 = 2.0 * last;
                }
                Ok(best.1)
            }
            _ => Err(Error::WindowTooWide(
                "branch points of z and zbar are not separated by a circle".into(),
            )),
        }
    }

    /// `z(e^{2 pi i k/m})` for `k = 0..m`.
    pub fn boundary_samples(&self, m: usize) -> Result<Vec<C64>> {
        if m < 8 {
            return Err(Error::InvalidMap("boundary_samples needs m >= 8".into()));
        }
        self.check_unit_circle()?;
        (0..m).map(|k| self.eval_z(unit(k, m))).collect()
    }

    /// `z_phi = i w z_w` on the same grid as [`MapPair::boundary_samples`].
    pub fn boundary_tangents(&self, m: usize) -> Result<Vec<C64>> {
        self.check_unit_circle()?;
        (0..m)
            .map(|k| {
                let w = unit(k, m);
                Ok(C64::i() * w * self.eval_z_w(w)?)
            })
            .collect()
    }

    fn check_unit_circle(&self) -> Result<()> {
        for s in self.z_singularities() {
            if (s.norm() - 1.0).abs() < SINGULAR_TOL {
                return Err(Error::SingularPoint(format!("{s} on the unit circle")));
            }
        }
        Ok(())
    }

    /// Smaller of `min |z_w|` on the unit circle and the clearance between the
    /// singular points of `z` and the region `|w| >= 1`.
    pub fn univalence_margin(&self, m: usize) -> f64 {
        let mut margin = f64::INFINITY;
        for k in 0..m.max(64) {
            let w = unit(k, m.max(64));
            margin = margin.min(self.inner().z_w(w).norm());
        }
        let mut points = self.z_singularities();
        if self.inner().z_singular_at_zero() {
            points.push(C64::new(0.0, 0.0));
        }
        for s in points {
            margin = margin.min((1.0 - s.norm()).max(0.0));
        }
        margin
    }

    /// Largest deviation of the parameters from the real structure.
    pub fn real_defect(&self) -> f64 {
        real_defect(&self.params(), &self.inner().conj_pairs())
    }
}

pub(crate) fn unit(k: usize, m: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64)
}

pub(crate) fn dot_product(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_window(lo: i32, hi: i32) -> Result<()> {
    if hi < 1 {
        return Err(Error::WindowTooWide(format!("window must reach w^1, got hi = {hi}")));
    }
    if lo > hi || lo < -MAX_WINDOW || hi > MAX_WINDOW {
        return Err(Error::WindowTooWide(format!("window [{lo}, {hi}]")));
    }
    Ok(())
}

pub(crate) fn real_defect(p: &[C64], pairs: &[(usize, usize)]) -> f64 {
    let mut d = p[0].im.abs();
    for &(i, j) in pairs {
        d = d.max((p[j] - p[i].conj()).norm());
    }
    d
}

/// Checks the real structure and projects onto it exactly.
pub(crate) fn symmetrize(p: &mut [C64], pairs: &[(usize, usize)]) -> Result<()> {
    let scale = p.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let defect = real_defect(p, pairs);
    if defect > REAL_TOL * scale {
        return Err(Error::InvalidMap(format!("real structure violated by {defect:e}")));
    }
    p[0] = C64::new(p[0].re, 0.0);
    if p[0].re <= 0.0 {
        return Err(Error::InvalidMap("real structure needs r > 0".into()));
    }
    for &(i, j) in pairs {
        let m = (p[i] + p[j].conj()) * 0.5;
        p[i] = m;
        p[j] = m.conj();
    }
    Ok(())
}

pub(crate) fn check_finite(p: &[C64]) -> Result<()> {
    if p.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidMap("non-finite parameter".into()));
    }
    if p[0] == C64::new(0.0, 0.0) {
        return Err(Error::InvalidMap("r must be nonzero".into()));
    }
    Ok(())
}

pub(crate) fn check_points(points: &[C64], what: &str, physical: bool) -> Result<()> {
    for (i, a) in points.iter().enumerate() {
        if a.norm() < SINGULAR_TOL {
            return Err(Error::InvalidMap(format!("{what} {} is zero", i + 1)));
        }
        if physical && a.norm() >= 1.0 {
            return Err(Error::InvalidMap(format!(
                "{what} {} outside the unit disk in physical mode",
                i + 1
            )));
        }
        for b in &points[..i] {
            if (a - b).norm() < SINGULAR_TOL {
                return Err(Error::InvalidMap(format!("{what}s are not distinct")));
            }
        }
    }
    Ok(())
}

/// `sum_{m >= 0} c p^m w^{-m-1-extra}` times `(m+1)` when `squared`, i.e. the
/// expansion at infinity of `c/(w-p)` or `c/(w-p)^2`, down to `lo`.
pub(crate) fn pole_series(c: C64, p: C64, squared: bool, lo: i32) -> Vec<(i32, C64)> {
    let mut out = Vec::new();
    let first = if squared { -2 } else { -1 };
    let mut pm = C64::new(1.0, 0.0);
    let mut e = first;
    let mut m = 0usize;
    while e >= lo {
        let k = if squared { (m + 1) as f64 } else { 1.0 };
        out.push((e, c * pm * k));
        pm *= p;
        e -= 1;
        m += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ellipse(alpha: f64) -> MapPair {
        PolyMap::new(
            c(1.0, 0.0),
            vec![c(0.0, 0.0), c(alpha, 0.0)],
            vec![c(0.0, 0.0), c(alpha, 0.0)],
            MapOptions::physical_real(),
        )
        .unwrap()
        .into()
    }

    #[test]
    fn circle_boundary() {
        let m: MapPair = PolyMap::circle(2.0).into();
        let s = m.boundary_samples(8).unwrap();
        let expect = [c(2.0, 0.0), c(0.0, 2.0), c(-2.0, 0.0), c(0.0, -2.0)];
        for (k, e) in expect.iter().enumerate() {
            assert!((s[2 * k] - e).norm() < 1e-15);
        }
        assert!((m.univalence_margin(64) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ellipse_samples_lie_on_ellipse() {
        let m = ellipse(0.3);
        for z in m.boundary_samples(64).unwrap() {
            let v = (z.re / 1.3).powi(2) + (z.im / 0.7).powi(2);
            assert!((v - 1.0).abs() < 1e-12);
        }
        for (k, z) in m.boundary_samples(16).unwrap().iter().enumerate() {
            let mirror = m.boundary_samples(16).unwrap()[(16 - k) % 16];
            assert!((z.conj() - mirror).norm() < 1e-14);
        }
    }

    #[test]
    fn near_cusp_margin() {
        let m = ellipse(0.999);
        assert!((m.univalence_margin(256) - 0.001).abs() < 1e-12);
    }

    #[test]
    fn pole_clearance() {
        let m: MapPair = RationalMap::new(
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            vec![(c(0.01, 0.0), c(0.5, 0.0))],
            vec![(c(0.01, 0.0), c(0.5, 0.0))],
            MapOptions::physical_real(),
        )
        .unwrap()
        .into();
        assert!((m.univalence_margin(64) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mirror_is_involution() {
        let m: MapPair = RationalMap::new(
            c(1.2, 0.1),
            c(0.1, 0.2),
            c(-0.3, 0.0),
            vec![(c(0.2, 0.1), c(0.3, 0.1))],
            vec![(c(0.5, -0.1), c(-0.2, 0.4))],
            MapOptions::formal(),
        )
        .unwrap()
        .into();
        assert_eq!(m.mirror().mirror(), m);
        let p = m.params();
        let q = m.mirror().params();
        for (i, j) in m.mirror_permutation().into_iter().enumerate() {
            assert_eq!(q[i], p[j]);
        }
        let w = c(0.7, 0.9);
        assert!((m.eval_zbar(w).unwrap() - m.mirror().eval_z(w.inv()).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn real_structure_rejects_asymmetric_input() {
        let r = PolyMap::new(
            c(1.0, 0.0),
            vec![c(0.1, 0.2)],
            vec![c(0.1, 0.2)],
            MapOptions::physical_real(),
        );
        assert!(matches!(r, Err(Error::InvalidMap(_))));
    }

    #[test]
    fn zbar_expansion_mirrors_z_under_real_structure() {
        let m: MapPair = PolyMap::new(
            c(1.0, 0.0),
            vec![c(0.1, 0.05), c(0.15, -0.1), c(0.12, 0.08)],
            vec![c(0.1, -0.05), c(0.15, 0.1), c(0.12, -0.08)],
            MapOptions::physical_real(),
        )
        .unwrap()
        .into();
        let z = m.expand_z_at_infinity(-4, 1).unwrap();
        let zb = m.expand_zbar_at_zero(-1, 4).unwrap();
        for e in -4..=1 {
            assert!((zb.coeff(-e) - z.coeff(e).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn window_must_reach_linear_term() {
        let m: MapPair = PolyMap::circle(1.0).into();
        assert!(matches!(m.expand_z_at_infinity(-3, 0), Err(Error::WindowTooWide(_))));
    }
}
