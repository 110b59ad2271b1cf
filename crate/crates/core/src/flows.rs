//! Hierarchy flows on the reduced parameter spaces.
//!
//! An [`EvolutionFunction`] `F` moves the pair by `dz/dt = {F, z}`,
//! `dzbar/dt = {F, zbar}`. The velocity is fitted in the least-squares sense
//! onto the tangent space of the reduction at collocation nodes; the part
//! that cannot be fitted is the leakage.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::linalg;
use crate::maps::{dot_product, LogMap, MapOptions, RationalMap};
use crate::string::{
    collocation_residual, rk4_step, sample_points, solve_string_ode_rhs, string_defect, EvolutionState, CUSP_TOL,
};
use crate::{CertifiedSeries, Error, LaurentSeries, MapPair, Part, Result, C64};

/// Largest leakage a flow may show and still count as form invariant.
pub const LEAK_TOL: f64 = 1e-9;
/// Largest string defect accepted before and during a flow.
pub const STRING_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    /// `H_k = (z^k)_+ + (z^k)_0/2`, or `(zbar^k)_- + (zbar^k)_0/2` when barred.
    Standard { k: usize, barred: bool },
    /// The branch-point functions of logarithmic maps, `j = 0..=n+1`.
    Logarithmic { j: usize, barred: bool },
    /// The pole functions of rational maps, `j = 0..=2n`.
    Krichever { j: usize, barred: bool },
}

impl FlowKind {
    pub fn barred(self) -> bool {
        match self {
            FlowKind::Standard { barred, .. }
            | FlowKind::Logarithmic { barred, .. }
            | FlowKind::Krichever { barred, .. } => barred,
        }
    }

    /// Short label such as `H2`, `Hbar1`, `L0`, `h3`.
    pub fn label(self) -> String {
        let (tag, i) = match self {
            FlowKind::Standard { k, .. } => ("H", k),
            FlowKind::Logarithmic { j, .. } => ("L", j),
            FlowKind::Krichever { j, .. } => ("h", j),
        };
        let bar = if self.barred() { "bar" } else { "" };
        format!("{tag}{bar}{i}")
    }
}

/// One closed-form piece of an evolution function together with its
/// x-derivative data.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    /// A Laurent polynomial and its x-derivative.
    Laurent {
        f: LaurentSeries,
        fx: LaurentSeries,
    },
    /// `c/(w - p)`
    Pole {
        c: C64,
        cx: C64,
        p: C64,
        px: C64,
    },
    /// `c/(1/w - p)`
    InvPole {
        c: C64,
        cx: C64,
        p: C64,
        px: C64,
    },
    /// `a log(p - w)`, principal branch
    Log {
        a: C64,
        p: C64,
        px: C64,
    },
    /// `a log(p - 1/w)`, principal branch
    InvLog {
        a: C64,
        p: C64,
        px: C64,
    },
    Const {
        c: C64,
        cx: C64,
    },
}

impl Term {
    fn value(&self, w: C64) -> Result<C64> {
        Ok(match self {
            Term::Laurent { f, .. } => f.eval(w)?,
            Term::Pole { c, p, .. } => c / (w - p),
            Term::InvPole { c, p, .. } => c / (w.inv() - p),
            Term::Log { a, p, .. } => a * (p - w).ln(),
            Term::InvLog { a, p, .. } => a * (p - w.inv()).ln(),
            Term::Const { c, .. } => *c,
        })
    }

    fn deriv_w(&self, w: C64) -> Result<C64> {
        Ok(match self {
            Term::Laurent { f, .. } => f.deriv_w().eval(w)?,
            Term::Pole { c, p, .. } => -c / ((w - p) * (w - p)),
            Term::InvPole { c, p, .. } => {
                let d = w.inv() - p;
                c / (w * w * d * d)
            }
            Term::Log { a, p, .. } => a / (w - p),
            Term::InvLog { a, p, .. } => a / (w * w * (p - w.inv())),
            Term::Const { .. } => C64::new(0.0, 0.0),
        })
    }

    fn deriv_x(&self, w: C64) -> Result<C64> {
        Ok(match self {
            Term::Laurent { fx, .. } => fx.eval(w)?,
            Term::Pole { c, cx, p, px } => {
                let d = (w - p).inv();
                cx * d + c * px * d * d
            }
            Term::InvPole { c, cx, p, px } => {
                let d = (w.inv() - p).inv();
                cx * d + c * px * d * d
            }
            Term::Log { a, p, px } => a * px / (p - w),
            Term::InvLog { a, p, px } => a * px / (p - w.inv()),
            Term::Const { cx, .. } => *cx,
        })
    }
}

/// A generator of a hierarchy flow on a given map, with the x-derivatives
/// that the bracket needs already resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionFunction {
    pub kind: FlowKind,
    pub terms: Vec<Term>,
}

impl EvolutionFunction {
    /// Builds `kind` on `map`; `tangent` is `dp/dx`.
    pub fn build(map: &MapPair, kind: FlowKind, tangent: &[C64]) -> Result<Self> {
        match (kind, map) {
            (FlowKind::Standard { k, barred }, _) => build_hk(map, k, barred, tangent),
            (FlowKind::Logarithmic { j, barred }, MapPair::Logarithmic(m)) => build_log_h(m, j, barred, tangent),
            (FlowKind::Krichever { j, barred }, MapPair::Rational(m)) => build_rational_h(m, j, barred, tangent),
            _ => Err(Error::Unsupported(format!(
                "{} flows do not act on {} maps",
                kind.label(),
                map.kind().name()
            ))),
        }
    }

    pub fn value(&self, w: C64) -> Result<C64> {
        self.terms.iter().map(|t| t.value(w)).sum()
    }

    pub fn deriv_w(&self, w: C64) -> Result<C64> {
        self.terms.iter().map(|t| t.deriv_w(w)).sum()
    }

    pub fn deriv_x(&self, w: C64) -> Result<C64> {
        self.terms.iter().map(|t| t.deriv_x(w)).sum()
    }
}

fn half_projection(s: &CertifiedSeries, part: Part) -> Result<LaurentSeries> {
    let main = s.project(part)?.series().clone();
    let zero = s.project(Part::Zero)?.series().scale(C64::new(0.5, 0.0));
    Ok(&main + &zero)
}

/// `H_k` (or `Hbar_k`) from certified powers of the expansion at infinity
/// (at zero).
pub fn build_hk(map: &MapPair, k: usize, barred: bool, tangent: &[C64]) -> Result<EvolutionFunction> {
    if k == 0 {
        return Err(Error::IndexRangeViolation("standard flows start at k = 1".into()));
    }
    if barred {
        let perm = map.mirror_permutation();
        let dot: Vec<C64> = perm.iter().map(|&j| tangent[j]).collect();
        let f = build_hk(&map.mirror(), k, false, &dot)?;
        let terms = f
            .terms
            .into_iter()
            .map(|t| match t {
                Term::Laurent { f, fx } => Term::Laurent {
                    f: f.reflect(),
                    fx: fx.reflect(),
                },
                other => other,
            })
            .collect();
        return Ok(EvolutionFunction {
            kind: FlowKind::Standard { k, barred: true },
            terms,
        });
    }
    let ki = i32::try_from(k).map_err(|_| Error::IndexRangeViolation(format!("k = {k}")))?;
    let lo = -ki - 2;
    let z = map.expand_z_certified(lo)?;
    let zx = map.expand_z_dot_certified(tangent, lo)?;
    let zk = z.powi(ki, 0)?;
    let dk = z.powi(ki - 1, -1)?.mul(&zx).scale(C64::new(k as f64, 0.0));
    let f = half_projection(&zk, Part::Plus)?;
    let fx = half_projection(&dk, Part::Plus)?;
    Ok(EvolutionFunction {
        kind: FlowKind::Standard { k, barred: false },
        terms: vec![Term::Laurent { f, fx }],
    })
}

fn lin(r: C64, rx: C64, u: C64, ux: C64, barred: bool) -> Term {
    let e = if barred { -1 } else { 1 };
    let half = C64::new(0.5, 0.0);
    Term::Laurent {
        f: LaurentSeries::from_terms(&[(e, r), (0, u * half)]).unwrap_or_default(),
        fx: LaurentSeries::from_terms(&[(e, rx), (0, ux * half)]).unwrap_or_default(),
    }
}

/// `log(p - w) + log(r/p)/2` or its barred form in `1/w`.
fn log_function(r: C64, rx: C64, p: C64, px: C64, barred: bool) -> Vec<Term> {
    let one = C64::new(1.0, 0.0);
    let log = if barred {
        Term::InvLog { a: one, p, px }
    } else {
        Term::Log { a: one, p, px }
    };
    let c = 0.5 * (r / p).ln();
    let cx = 0.5 * (rx / r - px / p);
    vec![log, Term::Const { c, cx }]
}

pub fn build_log_h(m: &LogMap, j: usize, barred: bool, tangent: &[C64]) -> Result<EvolutionFunction> {
    let n1 = m.branch_count();
    if j > n1 {
        return Err(Error::IndexRangeViolation(format!(
            "logarithmic flow index {j} outside 0..={n1}"
        )));
    }
    let kind = FlowKind::Logarithmic { j, barred };
    let (r, rx) = (m.r(), tangent[0]);
    let terms = if j == 0 {
        if barred {
            vec![lin(r, rx, m.ubar(), tangent[2], true)]
        } else {
            vec![lin(r, rx, m.u(), tangent[1], false)]
        }
    } else if barred {
        log_function(r, rx, m.wbar()[j - 1], tangent[3 + n1 + j - 1], true)
    } else {
        log_function(r, rx, m.w()[j - 1], tangent[3 + j - 1], false)
    };
    Ok(EvolutionFunction { kind, terms })
}

pub fn build_rational_h(m: &RationalMap, j: usize, barred: bool, tangent: &[C64]) -> Result<EvolutionFunction> {
    let n = m.order();
    if j > 2 * n {
        return Err(Error::IndexRangeViolation(format!(
            "pole flow index {j} outside 0..={}",
            2 * n
        )));
    }
    let kind = FlowKind::Krichever { j, barred };
    let (r, rx) = (m.r(), tangent[0]);
    if j == 0 {
        let t = if barred {
            lin(r, rx, m.ubar0(), tangent[2], true)
        } else {
            lin(r, rx, m.u0(), tangent[1], false)
        };
        return Ok(EvolutionFunction { kind, terms: vec![t] });
    }
    let i = j.div_ceil(2) - 1;
    let (u, p, ux, px) = if barred {
        let (u, p) = m.poles_bar()[i];
        (u, p, tangent[3 + 2 * n + i], tangent[3 + 3 * n + i])
    } else {
        let (u, p) = m.poles()[i];
        (u, p, tangent[3 + i], tangent[3 + n + i])
    };
    let terms = if j % 2 == 1 {
        let pole = if barred {
            Term::InvPole { c: u, cx: ux, p, px }
        } else {
            Term::Pole { c: u, cx: ux, p, px }
        };
        let c = u / (2.0 * p);
        let cx = ux / (2.0 * p) - u * px / (2.0 * p * p);
        vec![pole, Term::Const { c, cx }]
    } else {
        log_function(r, rx, p, px, barred)
    };
    Ok(EvolutionFunction { kind, terms })
}

/// Every flow under which the reduction is form invariant.
pub fn allowed_flows(map: &MapPair) -> Vec<FlowKind> {
    let mut out = Vec::new();
    for barred in [false, true] {
        match map {
            MapPair::Polynomial(m) => {
                out.extend((1..=m.order() + 1).map(|k| FlowKind::Standard { k, barred }));
            }
            MapPair::Rational(m) => {
                out.extend((0..=2 * m.order()).map(|j| FlowKind::Krichever { j, barred }));
            }
            MapPair::Logarithmic(m) => {
                out.extend((0..=m.branch_count()).map(|j| FlowKind::Logarithmic { j, barred }));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageReport {
    /// RMS of the fitted velocity at the nodes.
    pub allowed_norm: f64,
    /// RMS of what the reduction cannot absorb.
    pub leak_norm: f64,
    /// `(exponent, |coefficient|)` of the unfitted part of `dz/dt`, on the
    /// node circle.
    pub z_modes: Vec<(i32, f64)>,
    pub zbar_modes: Vec<(i32, f64)>,
}

/// Laurent coefficients of samples taken at `radius e^{2 pi i (s + phase)/m}`.
fn modes(values: &[C64], radius: f64, phase: f64) -> Vec<(i32, f64)> {
    let m = values.len();
    let mut buf = values.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let half = (m / 2) as i32;
    let mut out: Vec<(i32, f64)> = (0..m)
        .map(|s| {
            let e = if (s as i32) > half {
                s as i32 - m as i32
            } else {
                s as i32
            };
            let rot = C64::from_polar(radius.powi(-e), -2.0 * PI * e as f64 * phase / m as f64);
            (e, (buf[s] * rot / m as f64).norm())
        })
        .collect();
    out.sort_by_key(|p| p.0);
    out
}

/// Parameter velocity of the flow and its leakage, with the string tangent
/// solved first. Fails if the map does not satisfy the string equation.
pub fn flow_rhs(map: &MapPair, kind: FlowKind) -> Result<(Vec<C64>, LeakageReport)> {
    let t = solve_string_ode_rhs(map)?;
    let res = collocation_residual(map, &t)?;
    if !(res < STRING_TOL) {
        return Err(Error::StringViolated(res));
    }
    flow_rhs_with_tangent(map, kind, &t)
}

/// As [`flow_rhs`] with a caller-supplied `dp/dx`, which need not solve the
/// string equation.
pub fn flow_rhs_with_tangent(map: &MapPair, kind: FlowKind, tangent: &[C64]) -> Result<(Vec<C64>, LeakageReport)> {
    let f = EvolutionFunction::build(map, kind, tangent)?;
    let points = sample_points(map)?;
    let m = points.len();
    let dim = map.dim();
    let mut a = vec![C64::new(0.0, 0.0); 2 * m * dim];
    let mut b = vec![C64::new(0.0, 0.0); 2 * m];
    for (s, &w) in points.iter().enumerate() {
        let fw = f.deriv_w(w)?;
        let fx = f.deriv_x(w)?;
        let gz = map.grad_z(w)?;
        let gzb = map.grad_zbar(w)?;
        b[s] = w * (fw * dot_product(&gz, tangent) - fx * map.eval_z_w(w)?);
        b[m + s] = w * (fw * dot_product(&gzb, tangent) - fx * map.eval_zbar_w(w)?);
        a[s * dim..(s + 1) * dim].copy_from_slice(&gz);
        a[(m + s) * dim..(m + s + 1) * dim].copy_from_slice(&gzb);
    }
    let ls = linalg::solve(2 * m, dim, &a, &b)?;
    let radius = points[0].norm();
    let phase = points[0].arg() * m as f64 / (2.0 * PI);
    let report = LeakageReport {
        allowed_norm: linalg::rms(&ls.fitted),
        leak_norm: linalg::rms(&ls.residual),
        z_modes: modes(&ls.residual[..m], radius, phase),
        zbar_modes: modes(&ls.residual[m..], radius, phase),
    };
    Ok((ls.solution, report))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    /// Step in flow time; negative steps run the flow backwards.
    pub delta: f64,
    pub steps: usize,
    pub leak_tol: f64,
}

impl FlowSpec {
    pub fn new(kind: FlowKind, delta: f64, steps: usize) -> Self {
        Self {
            kind,
            delta,
            steps,
            leak_tol: LEAK_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep {
    pub tau: f64,
    pub map: MapPair,
    pub leak_norm: f64,
}

/// Flow time derivative with the leakage check applied.
fn checked_rhs(map: &MapPair, kind: FlowKind, leak_tol: f64) -> Result<Vec<C64>> {
    let (v, rep) = flow_rhs(map, kind)?;
    if !(rep.leak_norm <= leak_tol) {
        return Err(Error::FormInvarianceViolated(rep.leak_norm));
    }
    Ok(v)
}

/// Single flows do not preserve the real structure, so it is dropped.
fn flow_options(map: &MapPair) -> MapOptions {
    MapOptions {
        real_structure: false,
        ..map.options()
    }
}

/// RK4 in flow time; the trajectory starts at `tau = 0`.
pub fn flow_trajectory(state: &EvolutionState, spec: &FlowSpec) -> Result<Vec<FlowStep>> {
    if spec.steps == 0 {
        return Err(Error::InvalidMap("steps must be at least 1".into()));
    }
    if !spec.delta.is_finite() {
        return Err(Error::NonFinite);
    }
    let opts = flow_options(&state.map);
    let mut map = state.map.with_params_opts(&state.map.params(), opts)?;
    let (_, rep) = flow_rhs(&map, spec.kind)?;
    let mut out = vec![FlowStep {
        tau: 0.0,
        map: map.clone(),
        leak_norm: rep.leak_norm,
    }];
    for s in 1..=spec.steps {
        map = rk4_step(&map, opts, spec.delta, |m| checked_rhs(m, spec.kind, spec.leak_tol))?;
        if map.options().physical {
            let margin = map.univalence_margin(64);
            if margin < CUSP_TOL {
                return Err(Error::CuspDetected(margin));
            }
        }
        let defect = string_defect(&map)?;
        if !(defect < STRING_TOL) {
            return Err(Error::StringViolated(defect));
        }
        let (_, rep) = flow_rhs(&map, spec.kind)?;
        out.push(FlowStep {
            tau: spec.delta * s as f64,
            map: map.clone(),
            leak_norm: rep.leak_norm,
        });
    }
    Ok(out)
}

/// The state after the flow; `x` is unchanged.
pub fn flow_evolve(state: &EvolutionState, spec: &FlowSpec) -> Result<EvolutionState> {
    let traj = flow_trajectory(state, spec)?;
    let last = traj.into_iter().last().ok_or(Error::NonFinite)?;
    Ok(EvolutionState::new(last.map, state.x))
}

/// Flow by total time `t` in `substeps` RK4 steps without per-step checks.
pub fn flow_map(map: &MapPair, kind: FlowKind, t: f64, substeps: usize) -> Result<MapPair> {
    let opts = flow_options(map);
    let mut m = map.with_params_opts(&map.params(), opts)?;
    let h = t / substeps.max(1) as f64;
    for _ in 0..substeps.max(1) {
        m = rk4_step(&m, opts, h, |x| Ok(flow_rhs(x, kind)?.0))?;
    }
    Ok(m)
}

/// `|Phi_a Phi_b p - Phi_b Phi_a p| / delta^2` in the parameter max-norm, with
/// each `Phi` the flow by time `delta`.
pub fn commutator_check(state: &EvolutionState, a: FlowKind, b: FlowKind, delta: f64) -> Result<f64> {
    const SUB: usize = 2;
    let ab = flow_map(&flow_map(&state.map, b, delta, SUB)?, a, delta, SUB)?;
    let ba = flow_map(&flow_map(&state.map, a, delta, SUB)?, b, delta, SUB)?;
    let d = ab
        .params()
        .iter()
        .zip(ba.params())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    Ok(d / (delta * delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn h1_of_polynomial_map() {
        let m = fixtures::blob();
        let t = solve_string_ode_rhs(&m).unwrap();
        let f = build_hk(&m, 1, false, &t).unwrap();
        let Term::Laurent { f: s, fx } = &f.terms[0] else {
            panic!()
        };
        let p = m.params();
        assert_eq!(s.coeff(1), p[0]);
        assert!((s.coeff(0) - p[1] * 0.5).norm() < 1e-16);
        assert_eq!(s.lo(), 0);
        assert!((fx.coeff(1) - t[0]).norm() < 1e-16);
        let fb = build_hk(&m, 1, true, &t).unwrap();
        let Term::Laurent { f: sb, .. } = &fb.terms[0] else {
            panic!()
        };
        assert_eq!(sb.coeff(-1), p[0]);
        assert!((sb.coeff(0) - p[4] * 0.5).norm() < 1e-16);
    }

    #[test]
    fn circle_h2_is_pure_square() {
        let m = fixtures::circle(1.5);
        let t = solve_string_ode_rhs(&m).unwrap();
        let f = build_hk(&m, 2, false, &t).unwrap();
        let Term::Laurent { f: s, .. } = &f.terms[0] else {
            panic!()
        };
        assert_eq!(s.trim(), LaurentSeries::monomial(2, C64::new(2.25, 0.0)));
    }

    #[test]
    fn allowed_flows_do_not_leak() {
        for map in [fixtures::blob(), fixtures::rational_one(), fixtures::log_one()] {
            for kind in allowed_flows(&map) {
                let (_, rep) = flow_rhs(&map, kind).unwrap();
                assert!(
                    rep.leak_norm < 1e-10,
                    "{} {}: {}",
                    map.kind().name(),
                    kind.label(),
                    rep.leak_norm
                );
            }
        }
    }

    #[test]
    fn outside_flows_leak() {
        let (_, rep) = flow_rhs(&fixtures::blob(), FlowKind::Standard { k: 4, barred: false }).unwrap();
        assert!(rep.leak_norm > 1e-3);
        let (_, rep) = flow_rhs(&fixtures::rational_one(), FlowKind::Standard { k: 2, barred: false }).unwrap();
        assert!(rep.leak_norm > 1e-3);
        assert!(rep.zbar_modes.iter().any(|&(e, v)| e > 0 && v > 1e-2));
        assert!(rep.z_modes.iter().all(|&(_, v)| v < 1e-10));
    }

    #[test]
    fn log_functions_reassemble_zbar() {
        let map = fixtures::log_two();
        let MapPair::Logarithmic(m) = &map else { panic!() };
        let t = solve_string_ode_rhs(&map).unwrap();
        let ws = [C64::new(1.1, 0.2), C64::new(1.15, 0.25), C64::new(1.2, 0.15)];
        let mut offsets = Vec::new();
        for &w in &ws {
            let mut s = build_log_h(m, 0, true, &t).unwrap().value(w).unwrap();
            let mut ds = build_log_h(m, 0, true, &t).unwrap().deriv_w(w).unwrap();
            for i in 1..=m.branch_count() {
                let h = build_log_h(m, i, true, &t).unwrap();
                s += m.abar(i - 1) * h.value(w).unwrap();
                ds += m.abar(i - 1) * h.deriv_w(w).unwrap();
            }
            assert!((ds - map.eval_zbar_w(w).unwrap()).norm() < 1e-13);
            offsets.push(map.eval_zbar(w).unwrap() - s);
        }
        assert!((offsets[0] - offsets[1]).norm() < 1e-13);
        assert!((offsets[0] - offsets[2]).norm() < 1e-13);
    }

    #[test]
    fn same_flow_commutes_exactly() {
        let s = EvolutionState::new(fixtures::log_one(), 0.0);
        let k = FlowKind::Logarithmic { j: 1, barred: false };
        assert_eq!(commutator_check(&s, k, k, 1e-2).unwrap(), 0.0);
    }

    #[test]
    fn index_ranges_are_enforced() {
        let m = fixtures::rational_one();
        let t = solve_string_ode_rhs(&m).unwrap();
        let bad = EvolutionFunction::build(&m, FlowKind::Krichever { j: 3, barred: false }, &t);
        assert!(matches!(bad, Err(Error::IndexRangeViolation(_))));
        let wrong = EvolutionFunction::build(&m, FlowKind::Logarithmic { j: 0, barred: false }, &t);
        assert!(matches!(wrong, Err(Error::Unsupported(_))));
    }
}
