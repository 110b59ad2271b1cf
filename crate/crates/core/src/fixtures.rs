//! Reference maps and seeded random physical maps.

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::maps::{Charge, LogMap, MapKind, MapOptions, PolyMap, RationalMap};
use crate::{MapPair, Result, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn circle(r: f64) -> MapPair {
    PolyMap::circle(r).into()
}

/// `z = r (w + alpha/w)`, real and physical for `0 <= alpha < 1`.
pub fn ellipse(r: f64, alpha: f64) -> Result<MapPair> {
    Ok(PolyMap::new(
        c(r, 0.0),
        vec![c(0.0, 0.0), c(alpha * r, 0.0)],
        vec![c(0.0, 0.0), c(alpha * r, 0.0)],
        MapOptions::physical_real(),
    )?
    .into())
}

/// A physical real `N = 2` polynomial map.
pub fn blob() -> MapPair {
    PolyMap::new(
        c(1.0, 0.0),
        vec![c(0.1, 0.05), c(0.15, -0.1), c(0.12, 0.08)],
        vec![c(0.1, -0.05), c(0.15, 0.1), c(0.12, -0.08)],
        MapOptions::physical_real(),
    )
    .expect("valid fixture")
    .into()
}

/// A physical real rational map with one pole.
pub fn rational_one() -> MapPair {
    RationalMap::new(
        c(1.0, 0.0),
        c(0.1, 0.0),
        c(0.1, 0.0),
        vec![(c(0.2, 0.0), c(0.3, 0.1))],
        vec![(c(0.2, 0.0), c(0.3, -0.1))],
        MapOptions::physical_real(),
    )
    .expect("valid fixture")
    .into()
}

/// A physical real rational map with two poles.
pub fn rational_two() -> MapPair {
    RationalMap::new(
        c(1.1, 0.0),
        c(0.1, 0.0),
        c(0.1, 0.0),
        vec![(c(0.2, 0.0), c(0.0, 0.1)), (c(0.1, 0.05), c(-0.4, 0.0))],
        vec![(c(0.2, 0.0), c(0.0, -0.1)), (c(0.1, -0.05), c(-0.4, 0.0))],
        MapOptions::physical_real(),
    )
    .expect("valid fixture")
    .into()
}

fn charge(p: i64, q: i64) -> Charge {
    Charge::new(Rational64::new(p, q), Rational64::from_integer(0))
}

/// A physical real logarithmic map with two branch points (`n = 1`) and
/// charges `(1, -1)`.
pub fn log_one() -> MapPair {
    LogMap::new(
        c(1.0, 0.0),
        c(0.1, 0.0),
        c(0.1, 0.0),
        vec![(charge(1, 1), c(0.2, 0.1)), (charge(-1, 1), c(0.4, -0.2))],
        vec![(charge(1, 1), c(0.2, -0.1)), (charge(-1, 1), c(0.4, 0.2))],
        1.0,
        MapOptions::physical_real(),
    )
    .expect("valid fixture")
    .into()
}

/// A physical real logarithmic map with three branch points (`n = 2`).
pub fn log_two() -> MapPair {
    let a = [charge(1, 2), charge(-1, 5), charge(-3, 10)];
    let w = [c(0.2, 0.1), c(0.4, 0.0), c(0.0, -0.3)];
    LogMap::new(
        c(1.0, 0.0),
        c(0.1, 0.0),
        c(0.1, 0.0),
        a.iter().zip(&w).map(|(a, w)| (*a, *w)).collect(),
        a.iter().zip(&w).map(|(a, w)| (a.conj(), w.conj())).collect(),
        1.0,
        MapOptions::physical_real(),
    )
    .expect("valid fixture")
    .into()
}

fn disk_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> C64 {
    C64::from_polar(rng.random_range(lo..hi), rng.random_range(0.0..std::f64::consts::TAU))
}

fn distinct_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<C64> {
    let mut pts: Vec<C64> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = disk_point(rng, lo, hi);
        if pts.iter().all(|q| (p - q).norm() > 0.15) {
            pts.push(p);
        }
    }
    pts
}

/// A random physical map with real structure; `order` is `N` for polynomial
/// maps and `n` otherwise. Identical seeds give identical maps.
pub fn random_physical(kind: MapKind, order: usize, seed: u64) -> Result<MapPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = c(rng.random_range(0.8..1.2), 0.0);
    let opts = MapOptions::physical_real();
    Ok(match kind {
        MapKind::Polynomial => {
            let u: Vec<C64> = (0..=order)
                .map(|k| {
                    let bound = if k == 0 { 0.2 } else { 0.3 / (k * (order + 1)) as f64 };
                    disk_point(&mut rng, 0.0, bound) * r.re
                })
                .collect();
            let ubar = u.iter().map(|x| x.conj()).collect();
            PolyMap::new(r, u, ubar, opts)?.into()
        }
        MapKind::Rational => {
            let order = order.max(1);
            let u0 = disk_point(&mut rng, 0.0, 0.2);
            let w = distinct_points(&mut rng, order, 0.15, 0.5);
            let poles: Vec<(C64, C64)> = w
                .iter()
                .map(|&p| (disk_point(&mut rng, 0.01, 0.15 / order as f64), p))
                .collect();
            let poles_bar = poles.iter().map(|(u, p)| (u.conj(), p.conj())).collect();
            RationalMap::new(r, u0, u0.conj(), poles, poles_bar, opts)?.into()
        }
        MapKind::Logarithmic => {
            let n1 = order.max(1) + 1;
            let u = disk_point(&mut rng, 0.0, 0.2);
            let w = distinct_points(&mut rng, n1, 0.1, 0.5);
            let mut a: Vec<i64> = (1..n1)
                .map(|_| {
                    let v = rng.random_range(1..=3);
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            if a.iter().sum::<i64>() == 0 {
                a[0] = -a[0];
            }
            let last = -a.iter().sum::<i64>();
            a.push(last);
            let scale = 0.3 / a.iter().map(|v| v.abs()).max().unwrap_or(1) as f64;
            let branch: Vec<(Charge, C64)> = a.iter().zip(&w).map(|(&v, &p)| (charge(v, 1), p)).collect();
            let branch_bar = branch.iter().map(|(q, p)| (q.conj(), p.conj())).collect();
            LogMap::new(r, u, u.conj(), branch, branch_bar, scale, opts)?.into()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_maps_are_reproducible_and_univalent() {
        for kind in [MapKind::Polynomial, MapKind::Rational, MapKind::Logarithmic] {
            for seed in 0..20 {
                let a = random_physical(kind, 2, seed).unwrap();
                assert_eq!(a, random_physical(kind, 2, seed).unwrap());
                assert!(a.univalence_margin(256) > 0.05, "{kind:?} {seed}");
            }
        }
    }
}
