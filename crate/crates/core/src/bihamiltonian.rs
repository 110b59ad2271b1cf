//! Linear and quadratic Poisson structures of the rational 1D Toda reduction
//! `z = q(w)/p(w)`, `q = w^(N+1) + a_N w^N + ... + a_0`,
//! `p = b_N w^N + ... + b_0`, with fields periodic in `x`.
//!
//! Every bracket term has the form `c X(x) Y(y) delta'(x - y)` and acts on a
//! variational derivative `phi` as `c X (Y phi)'`.

use std::f64::consts::TAU;

use rustfft::FftPlanner;

use crate::linalg;
use crate::quad::{circle_mean, DEFAULT_TOL};
use crate::{Error, LaurentSeries, Part, Result, C64};

/// Nodes used to fit the Lax velocity to the rational tangent.
const FIT_NODES: usize = 48;

/// Relative spectral energy allowed in the top quarter of the modes.
const TAIL_TOL: f64 = 1e-2;

/// Which coefficient field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    A(usize),
    B(usize),
}

/// Coefficient fields on the grid `x_k = k L / m`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    period: f64,
    /// `a_0..a_N`; `a_(N+1) = 1` is implicit.
    a: Vec<Vec<C64>>,
    b: Vec<Vec<C64>>,
    radius: f64,
}

impl FieldGrid {
    pub fn new(period: f64, a: Vec<Vec<C64>>, b: Vec<Vec<C64>>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidMap("period must be positive".into()));
        }
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidMap("need N+1 fields a and N+1 fields b".into()));
        }
        let m = a[0].len();
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::InvalidMap(format!("grid size {m} is not a power of two >= 8")));
        }
        if a.iter().chain(&b).any(|f| f.len() != m) {
            return Err(Error::InvalidMap("fields have different lengths".into()));
        }
        if a.iter()
            .chain(&b)
            .flatten()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let mut grid = Self {
            period,
            a,
            b,
            radius: 0.0,
        };
        for f in grid.a.iter().chain(&grid.b) {
            let tail = spectral_tail(f);
            if tail > TAIL_TOL {
                return Err(Error::InvalidMap(format!(
                    "fields not resolved on the grid (tail {tail:.2e})"
                )));
            }
        }
        grid.radius = grid.contour_radius()?;
        Ok(grid)
    }

    /// Constant fields plus small single-mode sine perturbations.
    pub fn sine_fixture(order: usize, m: usize) -> Result<Self> {
        Self::perturbed(order, m, |t| t.sin())
    }

    /// Like [`FieldGrid::sine_fixture`] but each perturbation is a mean-free
    /// Poisson kernel with radius `rho`, whose Fourier modes decay as
    /// `rho^k`.
    pub fn poisson_fixture(order: usize, m: usize, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) || rho == 0.0 {
            return Err(Error::InvalidMap("kernel radius must lie in (0, 1)".into()));
        }
        let scale = (1.0 - rho) / (2.0 * rho);
        Self::perturbed(order, m, move |t| {
            let k = (1.0 - rho * rho) / (1.0 - 2.0 * rho * t.cos() + rho * rho) - 1.0;
            scale * k
        })
    }

    fn perturbed(order: usize, m: usize, shape: impl Fn(f64) -> f64) -> Result<Self> {
        let x: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
        let field = |mean: f64, phase: f64, cos: bool| -> Vec<C64> {
            let shift = if cos { TAU / 4.0 } else { 0.0 };
            x.iter()
                .map(|&t| C64::new(mean + 0.01 * shape(t + phase + shift), 0.0))
                .collect()
        };
        let a = (0..=order)
            .map(|i| field(0.4 + 0.1 * i as f64, 0.3 * i as f64, false))
            .collect();
        let b = (0..=order)
            .map(|i| {
                let mean = if i == order { 1.0 } else { 0.3 + 0.05 * i as f64 };
                field(mean, 0.7 * i as f64, true)
            })
            .collect();
        Self::new(TAU, a, b)
    }

    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    pub fn len(&self) -> usize {
        self.a[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn x(&self, k: usize) -> f64 {
        self.period * k as f64 / self.len() as f64
    }

    /// Radius of the circle used for coefficient extraction.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `a_i` including the frozen `a_(N+1) = 1`; `None` outside `0..=N+1`.
    fn a_field(&self, i: i64) -> Option<Vec<C64>> {
        let n = self.order() as i64;
        if i == n + 1 {
            Some(vec![C64::new(1.0, 0.0); self.len()])
        } else if (0..=n).contains(&i) {
            Some(self.a[i as usize].clone())
        } else {
            None
        }
    }

    fn b_field(&self, i: i64) -> Option<Vec<C64>> {
        usize::try_from(i).ok().and_then(|i| self.b.get(i).cloned())
    }

    fn field_ref(&self, f: FieldRef) -> Option<Vec<C64>> {
        match f {
            FieldRef::A(i) => self.a_field(i),
            FieldRef::B(i) => self.b_field(i),
        }
    }

    pub fn field(&self, f: Field) -> Result<&[C64]> {
        let v = match f {
            Field::A(i) => self.a.get(i),
            Field::B(i) => self.b.get(i),
        };
        v.map(Vec::as_slice)
            .ok_or_else(|| Error::IndexRangeViolation(format!("{f:?} with N = {}", self.order())))
    }

    /// Every dynamical field, `a_0..a_N` then `b_0..b_N`.
    pub fn fields(&self) -> Vec<Field> {
        let n = self.order();
        (0..=n).map(Field::A).chain((0..=n).map(Field::B)).collect()
    }

    /// Copy with `f` replaced.
    pub fn with_field(&self, f: Field, values: Vec<C64>) -> Result<Self> {
        let mut g = self.clone();
        let slot = match f {
            Field::A(i) => g.a.get_mut(i),
            Field::B(i) => g.b.get_mut(i),
        }
        .ok_or_else(|| Error::IndexRangeViolation(format!("{f:?}")))?;
        if values.len() != slot.len() {
            return Err(Error::InvalidMap("field length mismatch".into()));
        }
        *slot = values;
        g.radius = g.contour_radius()?;
        Ok(g)
    }

    /// Twice the largest Cauchy bound on the zeros of `p` over the grid.
    fn contour_radius(&self) -> Result<f64> {
        let n = self.order();
        let mut bound = 1.0f64;
        for k in 0..self.len() {
            let lead = self.b[n][k].norm();
            if !(lead > 1e-12) {
                return Err(Error::NonInvertibleLeading);
            }
            let ratio = (0..n).map(|i| self.b[i][k].norm() / lead).fold(0.0, f64::max);
            bound = bound.max(1.0 + ratio);
        }
        Ok(2.0 * bound)
    }

    fn q(&self, k: usize, w: C64) -> C64 {
        self.a.iter().rev().fold(C64::new(1.0, 0.0), |acc, f| acc * w + f[k])
    }

    fn p(&self, k: usize, w: C64) -> C64 {
        self.b.iter().rev().fold(C64::new(0.0, 0.0), |acc, f| acc * w + f[k])
    }

    /// Spectral derivative on the periodic grid.
    pub fn dx(&self, f: &[C64]) -> Vec<C64> {
        let m = f.len();
        let mut planner = FftPlanner::<f64>::new();
        let mut buf = f.to_vec();
        planner.plan_fft_forward(m).process(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            let k = if 2 * j < m {
                j as f64
            } else if 2 * j == m {
                0.0
            } else {
                j as f64 - m as f64
            };
            *v *= C64::new(0.0, TAU * k / self.period) / m as f64;
        }
        planner.plan_fft_inverse(m).process(&mut buf);
        buf
    }

    /// `sum_k f_k g_k L/m`
    pub fn integrate(&self, f: &[C64]) -> C64 {
        f.iter().sum::<C64>() * (self.period / self.len() as f64)
    }
}

fn spectral_tail(f: &[C64]) -> f64 {
    let m = f.len();
    let mut buf = f.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let mean = buf[0].norm_sqr();
    let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum::<f64>() - mean;
    if total <= 1e-300 {
        return 0.0;
    }
    let tail: f64 = buf
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let k = (*j).min(m - *j);
            4 * k >= m
        })
        .map(|(_, v)| v.norm_sqr())
        .sum();
    (tail / total).sqrt()
}

/// A field reference that may fall outside the stored range, in which case
/// it denotes zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldRef {
    A(i64),
    B(i64),
}

/// `coeff X(x) Y(y) delta'(x - y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BracketTerm {
    pub coeff: f64,
    pub x: FieldRef,
    pub y: FieldRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketStructure {
    Quadratic,
    /// The first structure, generating the same flows as [`Quadratic`] with
    /// the Hamiltonian index raised by one.
    ///
    /// [`Quadratic`]: BracketStructure::Quadratic
    Linear,
    /// [`Linear`](BracketStructure::Linear) with the opposite overall sign.
    LinearPrinted,
}

impl BracketStructure {
    pub fn name(self) -> &'static str {
        match self {
            BracketStructure::Quadratic => "quadratic",
            BracketStructure::Linear => "linear",
            BracketStructure::LinearPrinted => "linear-printed",
        }
    }
}

fn term(coeff: f64, x: FieldRef, y: FieldRef) -> BracketTerm {
    BracketTerm { coeff, x, y }
}

/// Terms of `{f(x), g(y)}` for the order-`N` grid.
pub fn term_table(structure: BracketStructure, order: usize, f: Field, g: Field) -> Vec<BracketTerm> {
    use FieldRef::{A, B};
    let n1 = order as i64 + 1;
    let mut t = Vec::new();
    match (f, g) {
        (Field::B(k), Field::A(l)) => {
            return term_table(structure, order, Field::A(l), Field::B(k))
                .into_iter()
                .map(|e| term(e.coeff, e.y, e.x))
                .collect();
        }
        (Field::A(k), Field::A(l)) => {
            let (k, l) = (k as i64, l as i64);
            match structure {
                BracketStructure::Quadratic => {
                    for n in 1..=n1 + 1 {
                        t.push(term((l + n - k) as f64, A(k - n), A(l + n)));
                        t.push(term(n as f64, A(l + n), A(k - n)));
                    }
                    t.push(term((l - n1) as f64, A(k), A(l)));
                }
                _ => {
                    for n in 1..=n1 + 1 {
                        t.push(term((k - l - n) as f64, A(k - n), B(l + n)));
                        t.push(term((k - l - n) as f64, B(k - n), A(l + n)));
                        t.push(term(-n as f64, B(l + n), A(k - n)));
                        t.push(term(-n as f64, A(l + n), B(k - n)));
                    }
                    t.push(term((n1 - l) as f64 / 2.0, B(k), A(l)));
                    t.push(term((k + n1 - 2 * l) as f64 / 2.0, A(k), B(l)));
                }
            }
        }
        (Field::A(k), Field::B(l)) => {
            let (k, l) = (k as i64, l as i64);
            match structure {
                BracketStructure::Quadratic => t.push(term((k - n1) as f64 / 2.0, A(k), B(l))),
                _ => {
                    for n in 1..=n1 + 1 {
                        t.push(term((k - l - n) as f64, B(k - n), B(l + n)));
                        t.push(term(-n as f64, B(l + n), B(k - n)));
                    }
                    t.push(term((n1 - l) as f64 / 2.0, B(k), B(l)));
                }
            }
        }
        (Field::B(k), Field::B(l)) => {
            let (k, l) = (k as i64, l as i64);
            if structure == BracketStructure::Quadratic {
                for n in 1..=n1 + 1 {
                    t.push(term((k - l - n) as f64, B(k - n), B(l + n)));
                    t.push(term(-n as f64, B(l + n), B(k - n)));
                }
                t.push(term((k - l) as f64 / 2.0, B(k), B(l)));
            }
        }
    }
    if structure == BracketStructure::Linear {
        for e in &mut t {
            e.coeff = -e.coeff;
        }
    }
    t
}

/// `(z^(i+1))_0 / (i+1)` at every node.
pub fn h_density(grid: &FieldGrid, i: usize) -> Result<Vec<C64>> {
    let e = i32::try_from(i + 1).map_err(|_| Error::IndexRangeViolation(format!("i = {i}")))?;
    (0..grid.len())
        .map(|k| {
            let q = circle_mean(
                |w| {
                    let p = grid.p(k, w);
                    if p.norm() < 1e-14 {
                        return Err(Error::ContourThroughPole);
                    }
                    Ok((grid.q(k, w) / p).powi(e))
                },
                grid.radius,
                DEFAULT_TOL,
            )?;
            Ok(q.value / (i + 1) as f64)
        })
        .collect()
}

/// `dH_i/df` pointwise, `(1/2 pi i) \oint z^i dz/df dw/w`.
pub fn var_derivative(grid: &FieldGrid, i: usize, f: Field) -> Result<Vec<C64>> {
    grid.field(f)?;
    let e = i32::try_from(i).map_err(|_| Error::IndexRangeViolation(format!("i = {i}")))?;
    (0..grid.len())
        .map(|k| {
            let q = circle_mean(
                |w| {
                    let p = grid.p(k, w);
                    if p.norm() < 1e-14 {
                        return Err(Error::ContourThroughPole);
                    }
                    let z = grid.q(k, w) / p;
                    let dz = match f {
                        Field::A(l) => w.powi(l as i32) / p,
                        Field::B(l) => -w.powi(l as i32) * z / p,
                    };
                    Ok(z.powi(e) * dz)
                },
                grid.radius,
                DEFAULT_TOL,
            )?;
            Ok(q.value)
        })
        .collect()
}

/// Time derivatives of `a_0..a_N` and `b_0..b_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFlow {
    pub a: Vec<Vec<C64>>,
    pub b: Vec<Vec<C64>>,
}

impl FieldFlow {
    fn zeros(order: usize, m: usize) -> Self {
        let z = vec![vec![C64::new(0.0, 0.0); m]; order + 1];
        Self { a: z.clone(), b: z }
    }

    fn slot(&mut self, f: Field) -> &mut Vec<C64> {
        match f {
            Field::A(i) => &mut self.a[i],
            Field::B(i) => &mut self.b[i],
        }
    }

    fn get(&self, f: Field) -> &[C64] {
        match f {
            Field::A(i) => &self.a[i],
            Field::B(i) => &self.b[i],
        }
    }

    pub fn norm(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .flatten()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let d = |x: &Vec<Vec<C64>>, y: &Vec<Vec<C64>>| -> Vec<Vec<C64>> {
            x.iter()
                .zip(y)
                .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p - q).collect())
                .collect()
        };
        Self {
            a: d(&self.a, &other.a),
            b: d(&self.b, &other.b),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let f = |x: &Vec<Vec<C64>>| -> Vec<Vec<C64>> { x.iter().map(|u| u.iter().map(|p| p * s).collect()).collect() };
        Self {
            a: f(&self.a),
            b: f(&self.b),
        }
    }

    /// `|self - other| / |self|`
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let n = self.norm();
        let d = self.sub(other).norm();
        if n > 0.0 {
            d / n
        } else {
            d
        }
    }
}

/// The flow generated by `phi = (dH/da_l, dH/db_l)` under `structure`.
pub fn flow_with_derivatives(grid: &FieldGrid, structure: BracketStructure, phi: &FieldFlow) -> FieldFlow {
    let n = grid.order();
    let mut out = FieldFlow::zeros(n, grid.len());
    for f in grid.fields() {
        let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
        for g in grid.fields() {
            let ph = phi.get(g);
            for t in term_table(structure, n, f, g) {
                let (Some(x), Some(y)) = (grid.field_ref(t.x), grid.field_ref(t.y)) else {
                    continue;
                };
                let yphi: Vec<C64> = y.iter().zip(ph).map(|(a, b)| a * b).collect();
                let d = grid.dx(&yphi);
                for ((o, xv), dv) in acc.iter_mut().zip(&x).zip(&d) {
                    *o += t.coeff * xv * dv;
                }
            }
        }
        *out.slot(f) = acc;
    }
    out
}

/// All variational derivatives of `H_i`.
pub fn gradient(grid: &FieldGrid, i: usize) -> Result<FieldFlow> {
    let mut phi = FieldFlow::zeros(grid.order(), grid.len());
    for f in grid.fields() {
        *phi.slot(f) = var_derivative(grid, i, f)?;
    }
    Ok(phi)
}

/// The flow of `H_i` under `structure`.
pub fn poisson_flow(grid: &FieldGrid, structure: BracketStructure, i: usize) -> Result<FieldFlow> {
    Ok(flow_with_derivatives(grid, structure, &gradient(grid, i)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaxFlow {
    pub flow: FieldFlow,
    /// Largest RMS fitting residual over the nodes.
    pub leak: f64,
}

/// Coefficients `c_j` of `w^(1-j)` in the expansion of `q/p` at infinity,
/// `j < count`.
fn expansion_at_infinity(grid: &FieldGrid, k: usize, count: usize) -> Vec<C64> {
    let n = grid.order() as i64;
    let mut c: Vec<C64> = Vec::with_capacity(count);
    for j in 0..count as i64 {
        let mut s = grid.a_field(n + 1 - j).map_or(C64::new(0.0, 0.0), |f| f[k]);
        for (t, ct) in c.iter().enumerate() {
            if let Some(b) = grid.b_field(n - (j - t as i64)) {
                s -= ct * b[k];
            }
        }
        c.push(s / grid.b[n as usize][k]);
    }
    c
}

/// `H_i = (z^i)_+ + (z^i)_0/2` at every node, as Laurent polynomials.
fn lax_hamiltonian(grid: &FieldGrid, i: usize) -> Result<Vec<LaurentSeries>> {
    let ii = u32::try_from(i).map_err(|_| Error::IndexRangeViolation(format!("i = {i}")))?;
    (0..grid.len())
        .map(|k| {
            let c = expansion_at_infinity(grid, k, i + 2);
            let mut rev = c.clone();
            rev.reverse();
            let z = LaurentSeries::new(1 - (c.len() as i32 - 1), rev)?;
            let zi = z.pow(ii);
            Ok(&zi.project(Part::Plus) + &zi.project(Part::Zero).scale(C64::new(0.5, 0.0)))
        })
        .collect()
}

/// `d/dt z = {H_i, z}` fitted to the rational tangent
/// `(p dq/dt - q dp/dt)/p^2` at every node.
pub fn lax_flow(grid: &FieldGrid, i: usize) -> Result<LaxFlow> {
    if i == 0 {
        return Err(Error::IndexRangeViolation("Lax flows start at i = 1".into()));
    }
    let n = grid.order();
    let m = grid.len();
    let h = lax_hamiltonian(grid, i)?;
    let hx = spectral_dx_series(grid, &h, 0, i as i32);
    let ax: Vec<Vec<C64>> = grid.a.iter().map(|f| grid.dx(f)).collect();
    let bx: Vec<Vec<C64>> = grid.b.iter().map(|f| grid.dx(f)).collect();
    let nodes: Vec<C64> = (0..FIT_NODES)
        .map(|s| C64::from_polar(grid.radius, TAU * (s as f64 + 0.5) / FIT_NODES as f64))
        .collect();
    let cols = 2 * (n + 1);
    let mut out = FieldFlow::zeros(n, m);
    let mut leak = 0.0f64;
    for k in 0..m {
        let poly = |coef: &dyn Fn(usize) -> C64, deg: usize, w: C64| -> C64 {
            (0..=deg).rev().fold(C64::new(0.0, 0.0), |acc, j| acc * w + coef(j))
        };
        let qa = |j: usize| if j <= n { grid.a[j][k] } else { C64::new(1.0, 0.0) };
        let qxa = |j: usize| if j <= n { ax[j][k] } else { C64::new(0.0, 0.0) };
        let pb = |j: usize| grid.b[j][k];
        let pxb = |j: usize| bx[j][k];
        let qwa = |j: usize| C64::new((j + 1) as f64, 0.0) * qa(j + 1);
        let pwb = |j: usize| {
            if j < n {
                C64::new((j + 1) as f64, 0.0) * pb(j + 1)
            } else {
                C64::new(0.0, 0.0)
            }
        };
        let hw = h[k].deriv_w();
        let mut a = Vec::with_capacity(FIT_NODES * cols);
        let mut rhs = Vec::with_capacity(FIT_NODES);
        for &w in &nodes {
            let p = poly(&pb, n, w);
            let q = poly(&qa, n + 1, w);
            let zw = (poly(&qwa, n, w) * p - q * poly(&pwb, n, w)) / (p * p);
            let zx = (poly(&qxa, n + 1, w) * p - q * poly(&pxb, n, w)) / (p * p);
            let br = w * (hw.eval(w)? * zx - hx[k].eval(w)? * zw);
            for j in 0..=n {
                a.push(p * w.powi(j as i32));
            }
            for j in 0..=n {
                a.push(-q * w.powi(j as i32));
            }
            rhs.push(p * p * br);
        }
        let ls = linalg::solve(FIT_NODES, cols, &a, &rhs).map_err(|_| Error::DegenerateTangent)?;
        leak = leak.max(linalg::rms(&ls.residual));
        for j in 0..=n {
            out.a[j][k] = ls.solution[j];
            out.b[j][k] = ls.solution[n + 1 + j];
        }
    }
    Ok(LaxFlow { flow: out, leak })
}

/// Spectral x-derivative of each coefficient `lo..=hi` of per-node series.
fn spectral_dx_series(grid: &FieldGrid, s: &[LaurentSeries], lo: i32, hi: i32) -> Vec<LaurentSeries> {
    let cols: Vec<Vec<C64>> = (lo..=hi)
        .map(|e| grid.dx(&s.iter().map(|x| x.coeff(e)).collect::<Vec<_>>()))
        .collect();
    (0..s.len())
        .map(|k| LaurentSeries::new(lo, cols.iter().map(|c| c[k]).collect()).unwrap_or_default())
        .collect()
}

/// `{ \int f F dx, \int g G dx }` assembled from the term table.
pub fn smeared_bracket(
    grid: &FieldGrid,
    structure: BracketStructure,
    (ff, f): (Field, &[C64]),
    (gg, g): (Field, &[C64]),
) -> Result<C64> {
    grid.field(ff)?;
    grid.field(gg)?;
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::InvalidMap("test function length mismatch".into()));
    }
    let mut total = C64::new(0.0, 0.0);
    for t in term_table(structure, grid.order(), ff, gg) {
        let (Some(x), Some(y)) = (grid.field_ref(t.x), grid.field_ref(t.y)) else {
            continue;
        };
        let gy: Vec<C64> = g.iter().zip(&y).map(|(a, b)| a * b).collect();
        let d = grid.dx(&gy);
        let integrand: Vec<C64> = f.iter().zip(&x).zip(&d).map(|((a, b), c)| a * b * c).collect();
        total += t.coeff * grid.integrate(&integrand);
    }
    Ok(total)
}

/// Relative discrepancies between the Lax flow of `H_i` and the two
/// Hamiltonian flows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripleAgreement {
    pub linear: f64,
    pub quadratic: f64,
    pub leak: f64,
}

impl TripleAgreement {
    pub fn worst(&self) -> f64 {
        self.linear.max(self.quadratic)
    }
}

pub fn triple_agreement(grid: &FieldGrid, i: usize) -> Result<TripleAgreement> {
    let lax = lax_flow(grid, i)?;
    let lin = poisson_flow(grid, BracketStructure::Linear, i)?;
    let quad = poisson_flow(grid, BracketStructure::Quadratic, i - 1)?;
    Ok(TripleAgreement {
        linear: lax.flow.relative_distance(&lin),
        quadratic: lax.flow.relative_distance(&quad),
        leak: lax.leak,
    })
}

/// The quadratic flow of `H_i` written in the shifted fields
/// `a_l -> a_l + lambda b_l`, pulled back to the original fields.
pub fn shifted_quadratic_flow(grid: &FieldGrid, i: usize, lambda: f64) -> Result<FieldFlow> {
    let phi = gradient(grid, i)?;
    let lam = C64::new(lambda, 0.0);
    let n = grid.order();
    let mut shifted = grid.clone();
    for l in 0..=n {
        shifted.a[l] = grid.a[l].iter().zip(&grid.b[l]).map(|(a, b)| a + lam * b).collect();
    }
    let mut phit = phi.clone();
    for l in 0..=n {
        phit.b[l] = phi.b[l].iter().zip(&phi.a[l]).map(|(b, a)| b - lam * a).collect();
    }
    let mut f = flow_with_derivatives(&shifted, BracketStructure::Quadratic, &phit);
    for l in 0..=n {
        f.a[l] = f.a[l].iter().zip(&f.b[l]).map(|(a, b)| a - lam * b).collect();
    }
    Ok(f)
}

/// `|X_lambda - X_0 - lambda X_lin| / |lambda X_lin|` for the flow of `H_i`.
pub fn pencil_defect(grid: &FieldGrid, i: usize, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::InvalidMap("pencil parameter must be nonzero".into()));
    }
    let x0 = shifted_quadratic_flow(grid, i, 0.0)?;
    let xl = shifted_quadratic_flow(grid, i, lambda)?;
    let lin = poisson_flow(grid, BracketStructure::Linear, i)?.scale(C64::new(lambda, 0.0));
    let d = xl.sub(&x0).sub(&lin).norm();
    let n = lin.norm();
    Ok(if n > 0.0 { d / n } else { d })
}
