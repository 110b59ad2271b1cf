//! Compatibility of the unreduced dispersionless 2D Toda flows.
//!
//! A state is a pair of finite Laurent series
//! `z = r w + sum_k u_k w^-k`, `zbar = r/w + sum_k ubar_k w^k` whose
//! coefficients are periodic functions of `x`, sampled on a uniform grid.
//! Flows act by `d z/dt_k = {H_k, z}` and `d z/dtbar_k = {Hbar_k, z}`, and the
//! generators must satisfy `d_j H_i - d_i H_j + {H_i, H_j} = 0`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::{lax_bracket, Error, LaurentSeries, Part, Result, C64};

/// A generator of the unreduced hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `(z^k)_+ + (z^k)_0/2`
    H(u32),
    /// `(zbar^k)_- + (zbar^k)_0/2`
    HBar(u32),
}

/// `z` and `zbar` on a periodic grid of `x` in `[0, period)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesField {
    pub period: f64,
    pub z: Vec<LaurentSeries>,
    pub zbar: Vec<LaurentSeries>,
}

/// Pointwise data: the series and their x-derivatives at one node.
#[derive(Clone, Debug)]
struct Point {
    z: LaurentSeries,
    zx: LaurentSeries,
    zbar: LaurentSeries,
    zbarx: LaurentSeries,
}

impl SeriesField {
    /// A random smooth field with `depth` subleading coefficients and a few
    /// Fourier modes per coefficient.
    pub fn random(depth: usize, nodes: usize, seed: u64) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::InvalidMap("at least four grid nodes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coef = |mean: f64, amp: f64| -> Vec<C64> {
            let modes: Vec<(C64, C64)> = (1..=2)
                .map(|_| {
                    let a = C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
                    let b = C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
                    (a, b)
                })
                .collect();
            (0..nodes)
                .map(|s| {
                    let x = TAU * s as f64 / nodes as f64;
                    modes.iter().enumerate().fold(C64::new(mean, 0.0), |acc, (m, (a, b))| {
                        let k = (m + 1) as f64;
                        acc + a * (k * x).cos() + b * (k * x).sin()
                    })
                })
                .collect()
        };
        let r = coef(1.0, 0.1);
        let u: Vec<Vec<C64>> = (0..=depth).map(|_| coef(0.0, 0.2)).collect();
        let ub: Vec<Vec<C64>> = (0..=depth).map(|_| coef(0.0, 0.2)).collect();
        let build = |s: usize, barred: bool| -> Result<LaurentSeries> {
            let mut terms = vec![(if barred { -1 } else { 1 }, r[s])];
            let src = if barred { &ub } else { &u };
            for (k, c) in src.iter().enumerate() {
                let e = k as i32;
                terms.push((if barred { e } else { -e }, c[s]));
            }
            LaurentSeries::from_terms(&terms)
        };
        Ok(Self {
            period: TAU,
            z: (0..nodes).map(|s| build(s, false)).collect::<Result<_>>()?,
            zbar: (0..nodes).map(|s| build(s, true)).collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn points(&self) -> Result<Vec<Point>> {
        if self.z.len() != self.zbar.len() || self.z.is_empty() {
            return Err(Error::InvalidMap("z and zbar grids differ".into()));
        }
        let zx = spectral_dx(&self.z, self.period);
        let zbarx = spectral_dx(&self.zbar, self.period);
        Ok((0..self.z.len())
            .map(|s| Point {
                z: self.z[s].clone(),
                zx: zx[s].clone(),
                zbar: self.zbar[s].clone(),
                zbarx: zbarx[s].clone(),
            })
            .collect())
    }
}

/// Spectral x-derivative of each coefficient.
fn spectral_dx(field: &[LaurentSeries], period: f64) -> Vec<LaurentSeries> {
    let n = field.len();
    let lo = field.iter().map(|s| s.lo()).min().unwrap_or(0);
    let hi = field.iter().map(|s| s.hi()).max().unwrap_or(0);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = vec![Vec::with_capacity((hi - lo + 1) as usize); n];
    for e in lo..=hi {
        let mut buf: Vec<C64> = field.iter().map(|s| s.coeff(e)).collect();
        fwd.process(&mut buf);
        for (m, b) in buf.iter_mut().enumerate() {
            let k = if 2 * m < n {
                m as f64
            } else if 2 * m == n {
                0.0
            } else {
                m as f64 - n as f64
            };
            *b *= C64::new(0.0, TAU * k / period) / n as f64;
        }
        inv.process(&mut buf);
        for (s, v) in buf.into_iter().enumerate() {
            out[s].push(v);
        }
    }
    out.into_iter()
        .map(|c| LaurentSeries::new(lo, c).unwrap_or_default())
        .collect()
}

fn half_part(s: &LaurentSeries, part: Part) -> LaurentSeries {
    &s.project(part) + &s.project(Part::Zero).scale(C64::new(0.5, 0.0))
}

/// The generator and its x-derivative at one node.
fn generator(p: &Point, g: Generator) -> (LaurentSeries, LaurentSeries) {
    let (base, dbase, k, part) = match g {
        Generator::H(k) => (&p.z, &p.zx, k, Part::Plus),
        Generator::HBar(k) => (&p.zbar, &p.zbarx, k, Part::Minus),
    };
    let f = half_part(&base.pow(k), part);
    let fx = half_part(
        &(&base.pow(k.saturating_sub(1)) * dbase).scale(C64::new(k as f64, 0.0)),
        part,
    );
    (f, fx)
}

/// `d H_i / dt_j` by a central difference along `(d z, d zbar) = ({H_j, z}, {H_j, zbar})`.
fn flow_derivative(p: &Point, i: Generator, j: Generator, eps: f64) -> LaurentSeries {
    let (hj, hjx) = generator(p, j);
    let dz = lax_bracket(&hj, &hjx, &p.z, &p.zx);
    let dzb = lax_bracket(&hj, &hjx, &p.zbar, &p.zbarx);
    let shifted = |sign: f64| {
        let e = C64::new(sign * eps, 0.0);
        let q = Point {
            z: &p.z + &dz.scale(e),
            zx: p.zx.clone(),
            zbar: &p.zbar + &dzb.scale(e),
            zbarx: p.zbarx.clone(),
        };
        generator(&q, i).0
    };
    (&shifted(1.0) - &shifted(-1.0)).scale(C64::new(0.5 / eps, 0.0))
}

/// Largest coefficient of `d_j H_i - d_i H_j + sign {H_i, H_j}` over the grid.
pub fn zero_curvature_defect_signed(
    field: &SeriesField,
    i: Generator,
    j: Generator,
    eps: f64,
    sign: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidMap("difference step must be positive".into()));
    }
    let mut worst = 0.0f64;
    for p in field.points()? {
        let (hi, hix) = generator(&p, i);
        let (hj, hjx) = generator(&p, j);
        let br = lax_bracket(&hi, &hix, &hj, &hjx).scale(C64::new(sign, 0.0));
        let d = &(&flow_derivative(&p, i, j, eps) - &flow_derivative(&p, j, i, eps)) + &br;
        if !d.is_finite() {
            return Err(Error::NonFinite);
        }
        worst = worst.max(d.max_abs());
    }
    Ok(worst)
}

/// Largest coefficient of `d_j H_i - d_i H_j + {H_i, H_j}` over the grid.
pub fn zero_curvature_defect(field: &SeriesField, i: Generator, j: Generator, eps: f64) -> Result<f64> {
    zero_curvature_defect_signed(field, i, j, eps, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Generator::*;

    #[test]
    fn spectral_derivative_of_a_mode() {
        let n = 16;
        let f: Vec<LaurentSeries> = (0..n)
            .map(|s| LaurentSeries::constant(C64::new((TAU * s as f64 / n as f64 * 2.0).sin(), 0.0)))
            .collect();
        let d = spectral_dx(&f, TAU);
        for (s, v) in d.iter().enumerate() {
            let x = TAU * s as f64 / n as f64;
            assert!((v.coeff(0).re - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn generators_are_compatible() {
        let field = SeriesField::random(4, 16, 3).unwrap();
        let pairs = [
            (H(1), H(2)),
            (H(2), H(3)),
            (H(1), HBar(1)),
            (H(2), HBar(2)),
            (HBar(1), HBar(3)),
        ];
        for (i, j) in pairs {
            let d = zero_curvature_defect(&field, i, j, 1e-4).unwrap();
            assert!(d < 1e-7, "{i:?} {j:?}: {d}");
        }
    }

    #[test]
    fn opposite_bracket_sign_fails() {
        let field = SeriesField::random(3, 16, 5).unwrap();
        let d = zero_curvature_defect_signed(&field, H(1), H(2), 1e-4, -1.0).unwrap();
        assert!(d > 1e-3);
    }
}
