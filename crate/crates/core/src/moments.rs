//! Harmonic moments `M_k`, the Casimir `Q` and the action variables
//! `I_j`, `Ibar_j`, each by closed form and by contour quadrature.
//!
//! Contour integrals are counterclockwise unless noted; `Ibar_0` of a
//! logarithmic map is the clockwise integral around `w = 0`, which is what
//! makes it equal to `z(0)`.

use crate::maps::{LogMap, MapPair, RationalMap};
use crate::quad::{contour_integral, DEFAULT_TOL};
use crate::string::CUSP_TOL;
use crate::{CertifiedSeries, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConservedKind {
    Moments,
    Actions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    pub k_max: usize,
    /// `M_1..M_{k_max}`
    pub m: Vec<C64>,
    pub mbar: Vec<C64>,
    pub q: C64,
}

/// `I_0..`, `Ibar_0..` and `Q`. Logarithmic maps carry `n + 2` actions per
/// side, rational maps `2n + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionVector {
    pub i: Vec<C64>,
    pub ibar: Vec<C64>,
    pub q: C64,
}

fn quad<F>(f: F, center: C64, radius: f64) -> Result<C64>
where
    F: FnMut(C64) -> Result<C64>,
{
    Ok(contour_integral(f, center, radius, DEFAULT_TOL)?.value)
}

/// `M_k = (1/k) res_oo zbar z^{-k} z_w`. Exact series arithmetic for
/// polynomial maps, quadrature on a circle enclosing every singularity for
/// rational maps. Logarithmic `zbar` has no expansion at infinity.
pub fn moment_mk(map: &MapPair, k: usize) -> Result<C64> {
    if k == 0 {
        return Err(Error::InvalidMap("moments start at k = 1".into()));
    }
    match map {
        MapPair::Polynomial(m) => {
            let zbar = CertifiedSeries::exact(m.zbar_series());
            let z = CertifiedSeries::exact(m.z_series());
            let top = zbar.series().hi();
            let inv = z.powi(-(k as i32), -top - 3)?;
            let integrand = zbar.mul(&inv).mul(&z.deriv_w());
            Ok(integrand.coeff(-1)? / k as f64)
        }
        MapPair::Rational(_) => moment_mk_contour(map, k, far_radius(map)),
        MapPair::Logarithmic(_) => Err(Error::Unsupported(
            "moments of logarithmic maps are not defined at infinity".into(),
        )),
    }
}

/// `Mbar_k = (1/k) \oint_0 z zbar^{-k} zbar_w dw`, which is `-M_k` of the
/// mirrored map.
pub fn moment_mbar_k(map: &MapPair, k: usize) -> Result<C64> {
    Ok(-moment_mk(&map.mirror(), k)?)
}

/// `M_k` by self-validating quadrature on `|w| = radius`.
pub fn moment_mk_contour(map: &MapPair, k: usize, radius: f64) -> Result<C64> {
    let v = quad(
        |w| Ok(map.eval_zbar(w)? * map.eval_z(w)?.powi(-(k as i32)) * map.eval_z_w(w)?),
        C64::new(0.0, 0.0),
        radius,
    )?;
    Ok(v / k as f64)
}

/// `M_k` by the `m`-point trapezoid rule on the unit circle.
pub fn richardson_moment(map: &MapPair, k: usize, m: usize) -> Result<C64> {
    if !map.options().physical {
        return Err(Error::Unsupported("Richardson moments need a physical map".into()));
    }
    let margin = map.univalence_margin(m.max(64));
    if margin < CUSP_TOL {
        return Err(Error::CuspDetected(margin));
    }
    let mut s = C64::new(0.0, 0.0);
    for j in 0..m {
        let w = crate::maps::unit(j, m);
        s += map.eval_zbar(w)? * map.eval_z(w)?.powi(-(k as i32)) * map.eval_z_w(w)? * w;
    }
    Ok(s / (m as f64 * k as f64))
}

/// A radius outside every singular point and zero of `z` and `zbar`.
fn far_radius(map: &MapPair) -> f64 {
    let r = map.r().norm();
    let mut big: f64 = 1.0;
    for s in map.z_singularities().iter().chain(map.zbar_singularities().iter()) {
        big = big.max(s.norm());
    }
    let spread: f64 = map.params().iter().skip(1).map(|c| c.norm()).sum();
    2.0 * (big + spread / r)
}

pub fn moments(map: &MapPair, k_max: usize) -> Result<MomentVector> {
    let mut m = Vec::with_capacity(k_max);
    let mut mbar = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        m.push(moment_mk(map, k)?);
        mbar.push(moment_mbar_k(map, k)?);
    }
    Ok(MomentVector {
        k_max,
        m,
        mbar,
        q: casimir_q(map)?,
    })
}

/// Closed-form Casimir.
pub fn casimir_q(map: &MapPair) -> Result<C64> {
    match map {
        MapPair::Polynomial(m) => {
            let s: C64 = m
                .u()
                .iter()
                .zip(m.ubar())
                .enumerate()
                .map(|(k, (u, ub))| u * ub * k as f64)
                .sum();
            Ok(m.r() * m.r() - s)
        }
        _ => Ok(actions(map)?.q),
    }
}

/// Casimir by quadrature. Polynomial maps use
/// `(1/2)(\oint zbar dz - \oint z dzbar)`; the other kinds use the enclosed
/// area over `pi` minus the pole and branch-point actions, each integral
/// evaluated independently.
pub fn casimir_q_contour(map: &MapPair) -> Result<C64> {
    let radius = map
        .separating_radius()
        .ok_or_else(|| Error::Unsupported("no circle separates the singularities of z and zbar".into()))?;
    match map {
        MapPair::Polynomial(_) => {
            let origin = C64::new(0.0, 0.0);
            let area = quad(|w| Ok(map.eval_zbar(w)? * map.eval_z_w(w)?), origin, radius)?;
            let other = quad(|w| Ok(map.eval_z(w)? * map.eval_zbar_w(w)?), origin, radius)?;
            Ok(0.5 * (area - other))
        }
        _ => Ok(actions_contour(map)?.q),
    }
}

/// `(1/2 pi i) \oint zbar dz` on the separating circle: the enclosed area
/// over `pi` for physical maps.
fn area_over_pi(map: &MapPair) -> Result<C64> {
    let radius = map
        .separating_radius()
        .ok_or_else(|| Error::Unsupported("no circle separates the singularities of z and zbar".into()))?;
    quad(|w| Ok(map.eval_zbar(w)? * map.eval_z_w(w)?), C64::new(0.0, 0.0), radius)
}

/// Closed-form actions and Casimir of a rational or logarithmic map.
pub fn actions(map: &MapPair) -> Result<ActionVector> {
    match map {
        MapPair::Polynomial(_) => Err(Error::Unsupported("polynomial maps are labelled by moments".into())),
        MapPair::Rational(m) => rational_actions(map, m),
        MapPair::Logarithmic(m) => log_actions(map, m),
    }
}

fn log_actions(map: &MapPair, m: &LogMap) -> Result<ActionVector> {
    let n1 = m.branch_count();
    let r = m.r();
    let mut i = vec![m.ubar() + (0..n1).map(|j| m.abar(j) * m.wbar()[j].ln()).sum::<C64>()];
    let mut ibar = vec![m.u() + (0..n1).map(|j| m.a(j) * m.w()[j].ln()).sum::<C64>()];
    for j in 0..n1 {
        i.push(m.a(j) * map.eval_zbar(m.w()[j])?);
        ibar.push(m.abar(j) * map.eval_z(m.wbar()[j].inv())?);
    }
    let mut q = r * r;
    for j in 0..n1 {
        q -= 0.5 * (r * (m.a(j) / m.w()[j] + m.abar(j) / m.wbar()[j]) + i[j + 1] + ibar[j + 1]);
    }
    Ok(ActionVector { i, ibar, q })
}

fn rational_actions(map: &MapPair, m: &RationalMap) -> Result<ActionVector> {
    let r = m.r();
    let poles = m.poles();
    let poles_bar = m.poles_bar();
    let mut i = vec![m.ubar0() - poles_bar.iter().map(|(u, w)| u / w).sum::<C64>()];
    let mut ibar = vec![m.u0() - poles.iter().map(|(u, w)| u / w).sum::<C64>()];
    // dzbar/dy at y = 1/w, with zbar = r y + ubar0 + sum ubar_j/(y - wbar_j)
    let dy = |list: &[(C64, C64)], y: C64| r - list.iter().map(|(u, p)| u / ((y - p) * (y - p))).sum::<C64>();
    for (&(u, w), &(ub, wb)) in poles.iter().zip(poles_bar) {
        i.push(map.eval_zbar(w)?);
        i.push(dy(poles_bar, w.inv()) * u / (w * w));
        ibar.push(map.mirror().eval_zbar(wb)?);
        ibar.push(dy(poles, wb.inv()) * ub / (wb * wb));
    }
    let mut q = r * r;
    for (k, (&(u, w), &(ub, wb))) in poles.iter().zip(poles_bar).enumerate() {
        q -= 0.5 * (r * (ub / (wb * wb) + u / (w * w)) + ibar[2 * k + 2] + i[2 * k + 2]);
    }
    Ok(ActionVector { i, ibar, q })
}

fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let t = if d.norm_sqr() > 0.0 {
        ((p - a) * d.conj()).re / d.norm_sqr()
    } else {
        0.0
    };
    (p - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Half the distance from `p` to the nearest obstacle.
fn clearance(p: C64, points: &[C64], segments: &[(C64, C64)]) -> Result<f64> {
    let mut d = f64::INFINITY;
    for q in points {
        if (p - q).norm() > 0.0 {
            d = d.min((p - q).norm());
        }
    }
    for &(a, b) in segments {
        d = d.min(point_segment_distance(p, a, b));
    }
    if !(d > 0.0) {
        return Err(Error::ContourThroughPole);
    }
    Ok(0.5 * d.min(1.0))
}

/// Actions and Casimir by contour quadrature.
pub fn actions_contour(map: &MapPair) -> Result<ActionVector> {
    match map {
        MapPair::Polynomial(_) => Err(Error::Unsupported("polynomial maps are labelled by moments".into())),
        MapPair::Rational(m) => rational_contour(map, m),
        MapPair::Logarithmic(m) => log_contour(map, m),
    }
}

fn rational_contour(map: &MapPair, m: &RationalMap) -> Result<ActionVector> {
    let origin = C64::new(0.0, 0.0);
    let zs: Vec<C64> = map.z_singularities();
    let zbs: Vec<C64> = map.zbar_singularities();
    let mut all = zs.clone();
    all.extend(&zbs);
    all.push(origin);
    let far = far_radius(map);
    let near = 0.5 * zs.iter().map(|s| s.norm()).fold(f64::INFINITY, f64::min).min(1.0);
    let mut i = vec![quad(|w| Ok(map.eval_zbar(w)? / w), origin, far)?];
    let mut ibar = vec![quad(|w| Ok(map.eval_z(w)? / w), origin, near)?];
    for (&(_, w0), &(_, wb)) in m.poles().iter().zip(m.poles_bar()) {
        let rho = clearance(w0, &all, &[])?;
        i.push(quad(|w| Ok(map.eval_zbar(w)? / (w - w0)), w0, rho)?);
        i.push(quad(|w| Ok(map.eval_zbar(w)? * map.eval_z_w(w)?), w0, rho)?);
        let p = wb.inv();
        let rho = clearance(p, &all, &[])?;
        ibar.push(quad(|w| Ok(map.eval_z(w)? / (w - p)), p, rho)?);
        ibar.push(quad(|w| Ok(map.eval_z(w)? * map.eval_zbar_w(w)?), p, rho)?);
    }
    let paired: C64 = i
        .iter()
        .zip(&ibar)
        .enumerate()
        .filter(|(j, _)| *j > 0 && j % 2 == 0)
        .map(|(_, (x, y))| x + y)
        .sum();
    let q = area_over_pi(map)? - paired;
    Ok(ActionVector { i, ibar, q })
}

fn log_contour(map: &MapPair, m: &LogMap) -> Result<ActionVector> {
    let origin = C64::new(0.0, 0.0);
    let n1 = m.branch_count();
    let r = m.r();
    let (w, wb) = (m.w(), m.wbar());
    let a: Vec<C64> = (0..n1).map(|j| m.a(j)).collect();
    let ab: Vec<C64> = (0..n1).map(|j| m.abar(j)).collect();
    let charge_mass = |c: &[C64], p: &[C64]| -> f64 { c.iter().zip(p).map(|(x, y)| x.norm() * y.norm()).sum() };

    // zbar continued to a neighbourhood of w = oo, and z to one of w = 0
    let zbar_far = |x: C64| -> C64 {
        r / x
            + m.ubar()
            + (0..n1)
                .map(|j| ab[j] * (wb[j].ln() + (1.0 - (x * wb[j]).inv()).ln()))
                .sum::<C64>()
    };
    let z_near =
        |x: C64| -> C64 { r * x + m.u() + (0..n1).map(|j| a[j] * (w[j].ln() + (1.0 - x / w[j]).ln())).sum::<C64>() };
    let min_wb = wb.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    let max_w = w.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let min_w = w.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    let max_wb = wb.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let far = 2.0 * (1.0f64.max(1.0 / min_wb).max(max_w) + (m.u().norm() + 2.0 * charge_mass(&a, w)) / r.norm());
    let near = 0.5 * (min_w.min(0.5 / max_wb)).min(r.norm() / (m.ubar().norm() + 2.0 * charge_mass(&ab, wb) + 1e-300));
    let i0 = quad(|x| Ok(zbar_far(x) * map.eval_z_w(x)? / map.eval_z(x)?), origin, far)?;
    let ibar0 = -quad(
        |x| Ok(z_near(x) * map.eval_zbar_w(x)? / map.eval_zbar(x)?),
        origin,
        near,
    )?;
    let mut i = vec![i0];
    let mut ibar = vec![ibar0];
    let zbs = map.zbar_singularities();
    let mut points: Vec<C64> = w.to_vec();
    points.extend(&zbs);
    points.push(origin);
    let segments: Vec<(C64, C64)> = w.iter().map(|&p| (origin, p)).collect();
    for j in 0..n1 {
        let rho = clearance(w[j], &points, &[])?;
        let c = w[j];
        i.push(quad(|x| Ok(map.eval_zbar(x)? * map.eval_z_w(x)?), c, rho)?);
        let p = zbs[j];
        let rho = clearance(p, &points, &segments)?;
        ibar.push(quad(|x| Ok(map.eval_z(x)? * map.eval_zbar_w(x)?), p, rho)?);
    }
    let q = area_over_pi(map)? - i.iter().skip(1).chain(ibar.iter().skip(1)).sum::<C64>();
    Ok(ActionVector { i, ibar, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{MapOptions, PolyMap};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn blob() -> MapPair {
        PolyMap::new(
            c(1.0, 0.0),
            vec![c(0.1, 0.05), c(0.15, -0.1), c(0.12, 0.08)],
            vec![c(0.1, -0.05), c(0.15, 0.1), c(0.12, -0.08)],
            MapOptions::physical_real(),
        )
        .unwrap()
        .into()
    }

    #[test]
    fn circle_has_no_moments() {
        let m: MapPair = PolyMap::circle(1.5).into();
        for k in 1..5 {
            assert!(moment_mk(&m, k).unwrap().norm() < 1e-15);
            assert!(moment_mbar_k(&m, k).unwrap().norm() < 1e-15);
            assert!(richardson_moment(&m, k, 64).unwrap().norm() < 1e-15);
        }
        assert!((casimir_q(&m).unwrap() - c(2.25, 0.0)).norm() < 1e-15);
        assert!((casimir_q_contour(&m).unwrap() - c(2.25, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn series_moment_matches_quadrature() {
        let m: MapPair = PolyMap::new(
            c(1.0, 0.0),
            vec![c(0.0, 0.0), c(0.3, 0.0)],
            vec![c(0.0, 0.0), c(0.3, 0.0)],
            MapOptions::formal(),
        )
        .unwrap()
        .into();
        for k in 1..4 {
            let s = moment_mk(&m, k).unwrap();
            let q = moment_mk_contour(&m, k, 5.0).unwrap();
            assert!((s - q).norm() < 1e-10, "k={k}: {s} vs {q}");
        }
    }

    #[test]
    fn richardson_agrees_and_bar_is_minus_conjugate() {
        let m = blob();
        for k in 1..5 {
            let s = moment_mk(&m, k).unwrap();
            assert!((richardson_moment(&m, k, 256).unwrap() - s).norm() < 1e-10);
            assert!((moment_mbar_k(&m, k).unwrap() + s.conj()).norm() < 1e-12);
        }
        let q = casimir_q(&m).unwrap();
        assert!(q.im.abs() < 1e-12);
        assert!((casimir_q_contour(&m).unwrap() - q).norm() < 1e-9);
    }

    #[test]
    fn log_actions_closed_form_vs_contour() {
        let m: MapPair = crate::fixtures::log_one();
        let a = actions(&m).unwrap();
        let b = actions_contour(&m).unwrap();
        for (x, y) in a.i.iter().zip(&b.i).chain(a.ibar.iter().zip(&b.ibar)) {
            assert!((x - y).norm() < 1e-9, "{x} vs {y}");
        }
        for (x, y) in a.i.iter().zip(&a.ibar) {
            assert!((x.conj() - y).norm() < 1e-12);
        }
        assert!((casimir_q_contour(&m).unwrap() - a.q).norm() < 1e-9);
        assert!(a.q.im.abs() < 1e-12);
    }

    #[test]
    fn rational_actions_closed_form_vs_contour() {
        let m: MapPair = RationalMap::new(
            c(1.1, 0.0),
            c(0.1, 0.0),
            c(0.1, 0.0),
            vec![(c(0.2, 0.0), c(0.0, 0.1)), (c(0.3, 0.1), c(-0.4, 0.0))],
            vec![(c(0.2, 0.0), c(0.0, -0.1)), (c(0.3, -0.1), c(-0.4, 0.0))],
            MapOptions::physical_real(),
        )
        .unwrap()
        .into();
        let a = actions(&m).unwrap();
        let b = actions_contour(&m).unwrap();
        assert_eq!(a.i.len(), 5);
        for (x, y) in a.i.iter().zip(&b.i).chain(a.ibar.iter().zip(&b.ibar)) {
            assert!((x - y).norm() < 1e-9, "{x} vs {y}");
        }
        assert!((casimir_q_contour(&m).unwrap() - a.q).norm() < 1e-9);
    }
}
