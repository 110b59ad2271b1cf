//! The string equation `{z, zbar} = 1`: its linear system for the parameter
//! velocities, RK4 evolution in the physical time `x`, and reconstruction of
//! the map from its conserved quantities by Newton iteration.

use std::f64::consts::PI;

use crate::linalg::{self, LeastSquares};
use crate::maps::{dot_product, MapKind, MapOptions, MapPair, MAX_WINDOW};
use crate::moments::{self, ConservedKind};
use crate::{lax_bracket, Error, LaurentSeries, Result, C64};

/// Parameter velocities, ordered like [`MapPair::params`].
pub type ParamTangent = Vec<C64>;

/// Univalence margin below which evolution stops.
pub const CUSP_TOL: f64 = 1e-6;
/// Offset of the collocation nodes, as a fraction of the node spacing.
const PHASE: f64 = 0.37;

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub map: MapPair,
    pub x: f64,
}

impl EvolutionState {
    pub fn new(map: MapPair, x: f64) -> Self {
        Self { map, x }
    }
}

/// Collocation nodes on the solver circle.
pub(crate) fn sample_points(map: &MapPair) -> Result<Vec<C64>> {
    let radius = map.sample_radius()?;
    let m = (4 * map.dim()).max(64);
    Ok((0..m)
        .map(|s| C64::from_polar(radius, 2.0 * PI * (s as f64 + PHASE) / m as f64))
        .collect())
}

/// Row `w (z_w dzbar/dp - dz/dp zbar_w)` of the string system at `w`.
fn string_row(map: &MapPair, w: C64) -> Result<Vec<C64>> {
    let zw = map.eval_z_w(w)?;
    let zbw = map.eval_zbar_w(w)?;
    let gz = map.grad_z(w)?;
    let gzb = map.grad_zbar(w)?;
    Ok(gz.iter().zip(&gzb).map(|(a, b)| w * (zw * b - a * zbw)).collect())
}

/// The matrix `A` (row-major) with `A . tangent = {z, zbar}` at the nodes.
pub fn string_matrix(map: &MapPair) -> Result<(usize, usize, Vec<C64>)> {
    let points = sample_points(map)?;
    let mut a = Vec::with_capacity(points.len() * map.dim());
    for &w in &points {
        a.extend(string_row(map, w)?);
    }
    Ok((points.len(), map.dim(), a))
}

/// Numerical rank of the string system.
pub fn string_rank(map: &MapPair) -> Result<usize> {
    let (rows, cols, a) = string_matrix(map)?;
    Ok(linalg::rank(rows, cols, &a))
}

fn solve_system(map: &MapPair) -> Result<LeastSquares> {
    let (rows, cols, a) = string_matrix(map)?;
    let b = vec![C64::new(1.0, 0.0); rows];
    let mut ls = linalg::solve(rows, cols, &a, &b)?;
    if map.options().real_structure {
        symmetrize_tangent(map, &mut ls.solution);
    }
    Ok(ls)
}

/// Projects a tangent onto the real structure.
pub(crate) fn symmetrize_tangent(map: &MapPair, v: &mut [C64]) {
    v[0] = C64::new(v[0].re, 0.0);
    for (i, j) in map.mirror_permutation().into_iter().enumerate() {
        if i < j {
            let m = (v[i] + v[j].conj()) * 0.5;
            v[i] = m;
            v[j] = m.conj();
        }
    }
}

/// The parameter velocity `dp/dx` for which `{z, zbar} = 1`.
pub fn solve_string_ode_rhs(map: &MapPair) -> Result<ParamTangent> {
    Ok(solve_system(map)?.solution)
}

/// RMS collocation residual of `{z, zbar} - 1` for the given tangent.
pub fn collocation_residual(map: &MapPair, tangent: &[C64]) -> Result<f64> {
    let points = sample_points(map)?;
    let mut res = Vec::with_capacity(points.len());
    for &w in &points {
        let row = string_row(map, w)?;
        res.push(dot_product(&row, tangent) - 1.0);
    }
    Ok(linalg::rms(&res))
}

/// Laurent coefficients of `{z, zbar} - 1` on `lo..=hi`, with `z_x`, `zbar_x`
/// assembled from `tangent`. Polynomial maps are exact; for the other kinds
/// the bracket is summed on the annulus where both expansions converge.
pub fn string_residual(map: &MapPair, tangent: &[C64], lo: i32, hi: i32) -> Result<LaurentSeries> {
    if lo > hi || lo < -MAX_WINDOW || hi > MAX_WINDOW {
        return Err(Error::WindowTooWide(format!("window [{lo}, {hi}]")));
    }
    if tangent.len() != map.dim() {
        return Err(Error::InvalidMap("tangent length mismatch".into()));
    }
    let depth = match map.kind() {
        MapKind::Polynomial => 0,
        _ => {
            let rho_in = map.z_singular_radius();
            let rho_out = map.zbar_singular_radius().recip();
            let q = rho_in * rho_out;
            if !(q < 1.0) {
                return Err(Error::WindowTooWide("expansions of z and zbar share no annulus".into()));
            }
            let k = if q > 0.0 {
                (1e-17f64.ln() / q.ln()).ceil() as i32
            } else {
                1
            };
            let k = k.saturating_add(lo.abs().max(hi.abs())).saturating_add(2);
            if k > MAX_WINDOW {
                return Err(Error::WindowTooWide(format!("needs {k} terms")));
            }
            k
        }
    };
    let mirror = map.mirror();
    let perm = map.mirror_permutation();
    let dot_m: Vec<C64> = perm.iter().map(|&j| tangent[j]).collect();
    let z = map.expand_z_certified(-depth)?.series().clone();
    let z_x = map.expand_z_dot_certified(tangent, -depth)?.series().clone();
    let zb = mirror.expand_z_certified(-depth)?.series().reflect();
    let zb_x = mirror.expand_z_dot_certified(&dot_m, -depth)?.series().reflect();
    let bracket = lax_bracket(&z, &z_x, &zb, &zb_x);
    let res = &bracket - &LaurentSeries::constant(C64::new(1.0, 0.0));
    Ok(res.truncate(lo, hi))
}

/// Largest coefficient of `{z, zbar} - 1` at the solved tangent; falls back
/// to the collocation residual when no annulus expansion exists.
pub fn string_defect(map: &MapPair) -> Result<f64> {
    let t = solve_string_ode_rhs(map)?;
    let (lo, hi) = match map {
        MapPair::Polynomial(_) => {
            let n = map.order() as i32 + 2;
            (-n, n)
        }
        _ => (-8, 8),
    };
    match string_residual(map, &t, lo, hi) {
        Ok(s) => Ok(s.max_abs()),
        Err(Error::WindowTooWide(_)) => collocation_residual(map, &t),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Compare each step with two half steps and split it while they differ
    /// by more than `step_tol`.
    pub adaptive: bool,
    pub step_tol: f64,
    pub max_halvings: u32,
    /// Only consulted for physical maps.
    pub cusp_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            adaptive: true,
            step_tol: 1e-10,
            max_halvings: 10,
            cusp_tol: CUSP_TOL,
        }
    }
}

impl EvolveOptions {
    /// Plain fixed-step RK4.
    pub fn fixed() -> Self {
        Self {
            adaptive: false,
            ..Self::default()
        }
    }
}

fn axpy(p: &[C64], h: f64, k: &[C64]) -> Vec<C64> {
    p.iter().zip(k).map(|(a, b)| a + b * h).collect()
}

/// One classical RK4 step of `dp/dt = f(map(p))`.
pub(crate) fn rk4_step<F>(map: &MapPair, opts: MapOptions, h: f64, mut f: F) -> Result<MapPair>
where
    F: FnMut(&MapPair) -> Result<Vec<C64>>,
{
    let p = map.params();
    let k1 = f(map)?;
    let k2 = f(&map.with_params_opts(&axpy(&p, h / 2.0, &k1), opts)?)?;
    let k3 = f(&map.with_params_opts(&axpy(&p, h / 2.0, &k2), opts)?)?;
    let k4 = f(&map.with_params_opts(&axpy(&p, h, &k3), opts)?)?;
    let next: Vec<C64> = (0..p.len())
        .map(|i| p[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0))
        .collect();
    map.with_params_opts(&next, opts)
}

fn check_cusp(map: &MapPair, tol: f64) -> Result<()> {
    if map.options().physical {
        let margin = map.univalence_margin(64);
        if margin < tol {
            return Err(Error::CuspDetected(margin));
        }
    }
    Ok(())
}

fn max_gap(a: &MapPair, b: &MapPair) -> f64 {
    a.params()
        .iter()
        .zip(b.params())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn string_step(map: &MapPair, h: f64, opts: &EvolveOptions, depth: u32) -> Result<MapPair> {
    let full = rk4_step(map, map.options(), h, solve_string_ode_rhs);
    if !opts.adaptive {
        return full;
    }
    let half = rk4_step(map, map.options(), h / 2.0, solve_string_ode_rhs)
        .and_then(|m| rk4_step(&m, m.options(), h / 2.0, solve_string_ode_rhs));
    let gap = match (&full, &half) {
        (Ok(f), Ok(g)) => max_gap(f, g),
        _ => f64::INFINITY,
    };
    if gap <= opts.step_tol {
        return half;
    }
    if depth >= opts.max_halvings {
        let margin = map.univalence_margin(256);
        return Err(if map.options().physical {
            Error::CuspDetected(margin)
        } else {
            Error::NoConvergence {
                iterations: depth as usize,
                residual: gap,
            }
        });
    }
    log::debug!("splitting x step {h:e} (gap {gap:e})");
    let mid = string_step(map, h / 2.0, opts, depth + 1)?;
    check_cusp(&mid, opts.cusp_tol)?;
    string_step(&mid, h / 2.0, opts, depth + 1)
}

/// RK4 in `x` from `state.x` to `x_target` with `steps` equal steps. The
/// trajectory starts with `state` and holds every accepted step.
pub fn evolve_x(state: &EvolutionState, x_target: f64, steps: usize) -> Result<Vec<EvolutionState>> {
    evolve_x_with(state, x_target, steps, &EvolveOptions::default())
}

pub fn evolve_x_with(
    state: &EvolutionState,
    x_target: f64,
    steps: usize,
    opts: &EvolveOptions,
) -> Result<Vec<EvolutionState>> {
    if steps == 0 {
        return Err(Error::InvalidMap("steps must be at least 1".into()));
    }
    if !x_target.is_finite() {
        return Err(Error::NonFinite);
    }
    check_cusp(&state.map, opts.cusp_tol)?;
    let h = (x_target - state.x) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    let mut map = state.map.clone();
    for s in 1..=steps {
        map = string_step(&map, h, opts, 0)?;
        check_cusp(&map, opts.cusp_tol)?;
        let x = if s == steps { x_target } else { state.x + h * s as f64 };
        out.push(EvolutionState::new(map.clone(), x));
    }
    Ok(out)
}

/// The constants labelling a string-equation solution: `c0 = Q - x` and the
/// moments (polynomial maps) or actions (other kinds).
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedSet {
    pub c0: C64,
    pub c: Vec<C64>,
    pub cbar: Vec<C64>,
    pub kind: ConservedKind,
}

impl ConservedSet {
    /// Largest entrywise difference.
    pub fn distance(&self, other: &ConservedSet) -> f64 {
        let mut d = (self.c0 - other.c0).norm();
        for (a, b) in self.c.iter().zip(&other.c).chain(self.cbar.iter().zip(&other.cbar)) {
            d = d.max((a - b).norm());
        }
        d
    }

    fn residual(&self, map: &MapPair, x: f64) -> Result<Vec<C64>> {
        let now = conserved_values(map)?;
        let mut f = vec![now.c0 - x - self.c0];
        f.extend(now.c.iter().zip(&self.c).map(|(a, b)| a - b));
        f.extend(now.cbar.iter().zip(&self.cbar).map(|(a, b)| a - b));
        Ok(f)
    }
}

/// `Q` and the moment or action lists (with `c0 = Q`).
fn conserved_values(map: &MapPair) -> Result<ConservedSet> {
    match map {
        MapPair::Polynomial(_) => {
            let mv = moments::moments(map, map.order() + 1)?;
            Ok(ConservedSet {
                c0: mv.q,
                c: mv.m,
                cbar: mv.mbar,
                kind: ConservedKind::Moments,
            })
        }
        _ => {
            let av = moments::actions(map)?;
            Ok(ConservedSet {
                c0: av.q,
                c: av.i,
                cbar: av.ibar,
                kind: ConservedKind::Actions,
            })
        }
    }
}

pub fn conserved_targets(state: &EvolutionState) -> Result<ConservedSet> {
    let mut set = conserved_values(&state.map)?;
    set.c0 -= state.x;
    Ok(set)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub map: MapPair,
    pub iterations: usize,
    pub residual: f64,
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Solves `Q - x = c0`, `c = targets.c`, `cbar = targets.cbar` for the map
/// parameters by damped Newton iteration with a central-difference Jacobian,
/// starting from `guess`. An iteration is one residual evaluation; a guess
/// that already meets `tol` returns after one.
pub fn newton_reconstruct(
    targets: &ConservedSet,
    x: f64,
    guess: &MapPair,
    tol: f64,
    max_iter: usize,
) -> Result<Reconstruction> {
    let final_opts = guess.options();
    // the equations are holomorphic in the parameters only without the
    // real-structure projection
    let work = MapOptions {
        real_structure: false,
        ..final_opts
    };
    let mut map = guess.with_params_opts(&guess.params(), work)?;
    let mut f = targets.residual(&map, x)?;
    if f.len() != map.dim() {
        return Err(Error::InvalidMap("conserved set does not match the map".into()));
    }
    let mut norm = max_norm(&f);
    for it in 1..=max_iter {
        if norm < tol {
            let map = map.with_params_opts(&map.params(), final_opts)?;
            let residual = max_norm(&targets.residual(&map, x)?);
            return Ok(Reconstruction {
                map,
                iterations: it,
                residual,
            });
        }
        let p = map.params();
        let n = p.len();
        let mut jac = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let h = 1e-6 * p[j].norm().max(1.0);
            let mut q = p.clone();
            q[j] = p[j] + h;
            let fp = targets.residual(&map.with_params(&q)?, x)?;
            q[j] = p[j] - h;
            let fm = targets.residual(&map.with_params(&q)?, x)?;
            for i in 0..n {
                jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs: Vec<C64> = f.iter().map(|c| -c).collect();
        let step = match linalg::solve(n, n, &jac, &rhs) {
            Ok(ls) => ls.solution,
            Err(Error::DegenerateConfiguration(_)) => return Err(Error::DegenerateJacobian),
            Err(e) => return Err(e),
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let q = axpy(&p, lambda, &step);
            if let Ok(cand) = map.with_params(&q) {
                if let Ok(fc) = targets.residual(&cand, x) {
                    let nc = max_norm(&fc);
                    if nc.is_finite() && nc < norm {
                        accepted = Some((cand, fc, nc));
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        let Some((cand, fc, nc)) = accepted else {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: norm,
            });
        };
        map = cand;
        f = fc;
        norm = nc;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: norm,
    })
}

/// `max |Im(z_phi conj(z_x)) - 1/2|` on `m` points of the unit circle.
pub fn gp_residual(state: &EvolutionState, m: usize) -> Result<f64> {
    let map = &state.map;
    let o = map.options();
    if !(o.physical && o.real_structure) {
        return Err(Error::Unsupported(
            "the Galin-Polubarinova form needs a physical real map".into(),
        ));
    }
    check_cusp(map, CUSP_TOL)?;
    let t = solve_string_ode_rhs(map)?;
    let mut worst: f64 = 0.0;
    for k in 0..m {
        let w = crate::maps::unit(k, m);
        let z_phi = C64::i() * w * map.eval_z_w(w)?;
        let z_x = map.z_dot(w, &t)?;
        worst = worst.max(((z_phi * z_x.conj()).im - 0.5).abs());
    }
    Ok(worst)
}

/// Area enclosed by `z(|w| = 1)`, `(1/2) \oint Im(conj(z) z_phi) dphi` by the
/// trapezoid rule on `m` points.
pub fn area(map: &MapPair, m: usize) -> Result<f64> {
    let z = map.boundary_samples(m)?;
    let zp = map.boundary_tangents(m)?;
    let s: f64 = z.iter().zip(&zp).map(|(a, b)| (a.conj() * b).im).sum();
    Ok(0.5 * s * 2.0 * PI / m as f64)
}

/// Polygon area of closed boundary samples.
pub fn shoelace(points: &[C64]) -> f64 {
    let n = points.len();
    let s: f64 = (0..n)
        .map(|k| {
            let (a, b) = (points[k], points[(k + 1) % n]);
            a.re * b.im - b.re * a.im
        })
        .sum();
    0.5 * s
}
