//! The verification battery: one numbered check per acceptance criterion,
//! each reporting a measured value against a fixed threshold.

use std::time::{Duration, Instant};

use crate::bihamiltonian::{triple_agreement, FieldGrid};
use crate::fixtures;
use crate::flows::{
    allowed_flows, build_log_h, build_rational_h, commutator_check, flow_map, flow_rhs, FlowKind, Term,
};
use crate::maps::{coalesce, MapKind, RationalMap};
use crate::moments::{actions, moments};
use crate::string::{
    conserved_targets, evolve_x, gp_residual, newton_reconstruct, solve_string_ode_rhs, string_rank, EvolutionState,
};
use crate::{Error, MapPair, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Deterministic summary; timings live in `elapsed`.
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct Battery {
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl Battery {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Random physical fixtures per map kind in the method-agreement check.
    pub random_fixtures: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            random_fixtures: 20,
            seed: 0,
        }
    }
}

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "circle law"),
    (2, "ellipse family"),
    (3, "conservation"),
    (4, "canonical response"),
    (5, "form-invariance boundaries"),
    (6, "commutativity"),
    (7, "coalescence"),
    (8, "method agreement"),
    (9, "bi-Hamiltonian triple agreement"),
    (10, "Galin-Polubarinova residual"),
    (11, "dimension counts"),
];

fn name_of(id: u32) -> &'static str {
    CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1)
}

fn check(id: u32, measured: f64, threshold: f64, pass: bool, detail: String) -> Check {
    Check {
        id,
        name: name_of(id),
        measured,
        threshold,
        pass,
        detail,
        elapsed: Duration::ZERO,
    }
}

/// Runs one criterion; internal errors become a failed check.
pub fn run_criterion(id: u32, opts: &VerifyOptions) -> Check {
    let start = Instant::now();
    let out = match id {
        1 => circle_law(),
        2 => ellipse_family(),
        3 => conservation(),
        4 => canonical_response(),
        5 => form_invariance(),
        6 => commutativity(),
        7 => coalescence(),
        8 => method_agreement(opts),
        9 => bihamiltonian(),
        10 => galin_polubarinova(),
        11 => dimension_counts(),
        _ => Err(Error::IndexRangeViolation(format!("no criterion {id}"))),
    };
    let mut c = out.unwrap_or_else(|e| check(id, f64::NAN, f64::NAN, false, format!("error: {e}")));
    c.elapsed = start.elapsed();
    c
}

pub fn run_battery(opts: &VerifyOptions) -> Battery {
    let start = Instant::now();
    let checks = CRITERIA.iter().map(|&(id, _)| run_criterion(id, opts)).collect();
    Battery {
        checks,
        elapsed: start.elapsed(),
    }
}

fn circle_law() -> Result<Check> {
    let start = Instant::now();
    let traj = evolve_x(&EvolutionState::new(fixtures::circle(1.0), 0.0), 3.0, 1000)?;
    let elapsed = start.elapsed();
    let err = traj
        .iter()
        .map(|s| (s.map.r() - C64::new((s.x + 1.0).sqrt(), 0.0)).norm())
        .fold(0.0, f64::max);
    let fast = elapsed < Duration::from_secs(1);
    Ok(check(
        1,
        err,
        1e-10,
        err < 1e-10 && fast,
        if fast {
            "1000 steps to x = 3 within 1 s".into()
        } else {
            "1000 steps to x = 3 took over 1 s".into()
        },
    ))
}

fn ellipse_family() -> Result<Check> {
    let s0 = EvolutionState::new(fixtures::ellipse(1.0, 0.3)?, 0.0);
    let c = 0.91;
    let mut worst = 0.0f64;
    for (target, steps) in [(1.0, 200), (-0.3, 100)] {
        for s in evolve_x(&s0, target, steps)? {
            let r = s.map.r();
            let u1 = s.map.params()[2];
            worst = worst.max((u1 / r - 0.3).norm()).max((r * r * 0.91 - s.x - c).norm());
        }
    }
    Ok(check(2, worst, 1e-9, worst < 1e-9, "x in [-0.3, 1]".into()))
}

/// Moments (polynomial) or actions, with `Q` first.
fn conserved_vector(map: &MapPair) -> Result<Vec<C64>> {
    Ok(match map {
        MapPair::Polynomial(_) => {
            let m = moments(map, map.order() + 1)?;
            std::iter::once(m.q).chain(m.m).chain(m.mbar).collect()
        }
        _ => {
            let a = actions(map)?;
            std::iter::once(a.q).chain(a.i).chain(a.ibar).collect()
        }
    })
}

fn conservation_fixtures() -> Result<Vec<MapPair>> {
    let mut maps = vec![fixtures::blob()];
    for n in 1..=4 {
        maps.push(fixtures::random_physical(MapKind::Polynomial, n, 100 + n as u64)?);
    }
    maps.extend([
        fixtures::rational_one(),
        fixtures::rational_two(),
        fixtures::log_one(),
        fixtures::log_two(),
    ]);
    Ok(maps)
}

fn conservation() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for map in conservation_fixtures()? {
        let v0 = conserved_vector(&map)?;
        for s in evolve_x(&EvolutionState::new(map, 0.0), 0.05, 40)? {
            let v = conserved_vector(&s.map)?;
            worst = worst.max((v[0] - s.x - v0[0]).norm());
            for (a, b) in v.iter().zip(&v0).skip(1) {
                worst = worst.max((a - b).norm());
            }
        }
        count += 1;
    }
    Ok(check(
        3,
        worst,
        1e-8,
        worst < 1e-8,
        format!("{count} maps, x in [0, 0.05]"),
    ))
}

/// Flows in column order and the expected sign of each diagonal block.
fn response_layout(map: &MapPair) -> (Vec<FlowKind>, f64) {
    let flows = allowed_flows(map);
    let bar_sign = if matches!(map, MapPair::Polynomial(_)) {
        1.0
    } else {
        -1.0
    };
    (flows, bar_sign)
}

/// Largest entrywise error of the finite-difference response matrix.
pub fn response_error(map: &MapPair, step: f64) -> Result<f64> {
    let (flows, bar_sign) = response_layout(map);
    let half = flows.len() / 2;
    let mut worst = 0.0f64;
    for (col, &kind) in flows.iter().enumerate() {
        let plus = conserved_vector(&flow_map(map, kind, step, 1)?)?;
        let minus = conserved_vector(&flow_map(map, kind, -step, 1)?)?;
        // skip Q; it must not move at all
        worst = worst.max(((plus[0] - minus[0]) / (2.0 * step)).norm());
        for row in 0..flows.len() {
            let d = (plus[row + 1] - minus[row + 1]) / (2.0 * step);
            let expect = if row != col {
                0.0
            } else if row < half {
                1.0
            } else {
                bar_sign
            };
            worst = worst.max((d - expect).norm());
        }
    }
    Ok(worst)
}

fn canonical_response() -> Result<Check> {
    let maps = [
        fixtures::blob(),
        fixtures::random_physical(MapKind::Polynomial, 3, 7)?,
        fixtures::rational_one(),
        fixtures::log_one(),
        fixtures::log_two(),
    ];
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for map in &maps {
        let e = response_error(map, 1e-5)?;
        detail.push(format!("{} {:.1e}", map.kind().name(), e));
        worst = worst.max(e);
    }
    Ok(check(4, worst, 1e-5, worst < 1e-5, detail.join(", ")))
}

fn leak(map: &MapPair, kind: FlowKind) -> Result<f64> {
    Ok(flow_rhs(map, kind)?.1.leak_norm)
}

fn form_invariance() -> Result<Check> {
    let poly = fixtures::blob();
    let rat = fixtures::rational_one();
    let mut allowed = 0.0f64;
    for barred in [false, true] {
        for k in 1..=3 {
            allowed = allowed.max(leak(&poly, FlowKind::Standard { k, barred })?);
        }
    }
    for kind in allowed_flows(&rat) {
        allowed = allowed.max(leak(&rat, kind)?);
    }
    let forbidden = leak(&poly, FlowKind::Standard { k: 4, barred: false })?
        .min(leak(&poly, FlowKind::Standard { k: 4, barred: true })?)
        .min(leak(&rat, FlowKind::Standard { k: 2, barred: false })?)
        .min(leak(&rat, FlowKind::Standard { k: 2, barred: true })?);
    Ok(check(
        5,
        allowed,
        1e-9,
        allowed < 1e-9 && forbidden > 1e-3,
        format!("smallest outside leakage {forbidden:.3e} (must exceed 1e-3)"),
    ))
}

fn commutativity() -> Result<Check> {
    let maps = [
        fixtures::ellipse(1.0, 0.2)?,
        fixtures::blob(),
        fixtures::rational_one(),
        fixtures::log_one(),
    ];
    let mut worst = 0.0f64;
    let mut richardson = true;
    let mut pairs = 0;
    for map in maps {
        let state = EvolutionState::new(map.clone(), 0.0);
        let flows = allowed_flows(&map);
        for (i, &a) in flows.iter().enumerate() {
            for &b in &flows[i + 1..] {
                let c1 = commutator_check(&state, a, b, 1e-2)?;
                let c2 = commutator_check(&state, a, b, 5e-3)?;
                worst = worst.max(c1);
                richardson &= c2 <= 0.75 * c1 || (c1 < 1e-8 && c2 < 1e-8);
                pairs += 1;
            }
        }
    }
    Ok(check(
        6,
        worst,
        1e-4,
        worst < 1e-4 && richardson,
        format!(
            "{pairs} pairs, O(delta) decay {}",
            if richardson { "confirmed" } else { "NOT confirmed" }
        ),
    ))
}

/// Distance between the pole functions of `rat` and the difference
/// quotients of the coalescing logarithmic functions at `eps`: the largest
/// gap in w-derivative on the unit circle plus the gap in constant terms.
pub fn coalescence_error(rat: &RationalMap, eps: f64) -> Result<f64> {
    let log = coalesce(rat, eps)?;
    let rat_map = MapPair::Rational(rat.clone());
    let log_map = MapPair::Logarithmic(log.clone());
    let tr = vec![C64::new(0.0, 0.0); rat_map.dim()];
    let tl = vec![C64::new(0.0, 0.0); log_map.dim()];
    let constant = |terms: &[Term]| -> C64 {
        terms
            .iter()
            .map(|t| match t {
                Term::Const { c, .. } => *c,
                _ => C64::new(0.0, 0.0),
            })
            .sum()
    };
    let nodes: Vec<C64> = (0..32)
        .map(|s| C64::from_polar(1.0, 0.1 + 0.19634954 * s as f64))
        .collect();
    let mut worst = 0.0f64;
    for barred in [false, true] {
        for i in 0..rat.order() {
            let h = build_rational_h(rat, 2 * i + 1, barred, &tr)?;
            let l1 = build_log_h(&log, 2 * i + 1, barred, &tl)?;
            let l2 = build_log_h(&log, 2 * i + 2, barred, &tl)?;
            let dc = (constant(&l1.terms) - constant(&l2.terms)) / eps - constant(&h.terms);
            let mut dw = 0.0f64;
            for &w in &nodes {
                let q = (l1.deriv_w(w)? - l2.deriv_w(w)?) / eps;
                dw = dw.max((q - h.deriv_w(w)?).norm());
            }
            worst = worst.max(dw + dc.norm());
        }
    }
    Ok(worst)
}

fn coalescence() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut smallest = f64::INFINITY;
    for map in [fixtures::rational_one(), fixtures::rational_two()] {
        let MapPair::Rational(rat) = map else { unreachable!() };
        let eps: Vec<f64> = (0..8).map(|k| 0.0128 / f64::powi(2.0, k)).collect();
        let errs: Vec<f64> = eps.iter().map(|&e| coalescence_error(&rat, e)).collect::<Result<_>>()?;
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            ok &= (1.7..=2.3).contains(&ratio);
            worst = worst.max((ratio - 2.0).abs());
        }
        smallest = smallest.min(*eps.last().unwrap_or(&0.0));
    }
    Ok(check(
        7,
        worst,
        0.3,
        ok,
        format!("largest |ratio - 2| down to eps = {smallest:.1e}"),
    ))
}

fn method_agreement(opts: &VerifyOptions) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for kind in [MapKind::Polynomial, MapKind::Rational, MapKind::Logarithmic] {
        for j in 0..opts.random_fixtures {
            let map = fixtures::random_physical(kind, 2, opts.seed.wrapping_add(j as u64))?;
            let s0 = EvolutionState::new(map.clone(), 0.0);
            let targets = conserved_targets(&s0)?;
            let traj = evolve_x(&s0, 0.1, 50)?;
            let ode = &traj.last().ok_or(Error::NonFinite)?.map;
            let newton = newton_reconstruct(&targets, 0.1, &map, 1e-13, 40)?;
            let d = ode
                .params()
                .iter()
                .zip(newton.map.params())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(d);
            count += 1;
        }
    }
    Ok(check(
        8,
        worst,
        1e-8,
        worst < 1e-8,
        format!("{count} fixtures, x = 0 -> 0.1"),
    ))
}

fn bihamiltonian() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut leak = 0.0f64;
    for order in [0, 1] {
        let grid = FieldGrid::sine_fixture(order, 256)?;
        for i in [1, 2] {
            let t = triple_agreement(&grid, i)?;
            worst = worst.max(t.worst());
            leak = leak.max(t.leak);
        }
    }
    let mut min_gain = f64::INFINITY;
    for order in [0, 1] {
        let coarse = FieldGrid::poisson_fixture(order, 256, 0.85)?;
        let fine = FieldGrid::poisson_fixture(order, 512, 0.85)?;
        for i in [1, 2] {
            let a = triple_agreement(&coarse, i)?;
            let b = triple_agreement(&fine, i)?;
            worst = worst.max(a.worst());
            min_gain = min_gain.min(a.worst() / b.worst());
        }
    }
    Ok(check(
        9,
        worst,
        1e-6,
        worst < 1e-6 && min_gain >= 4.0 && leak < 1e-9,
        format!("m = 512 improvement >= {min_gain:.1}x, Lax leakage {leak:.1e}"),
    ))
}

fn galin_polubarinova() -> Result<Check> {
    let maps = [
        fixtures::ellipse(1.0, 0.3)?,
        fixtures::blob(),
        fixtures::rational_one(),
        fixtures::log_one(),
    ];
    let mut worst = 0.0f64;
    let mut states = 0;
    for map in maps {
        for s in evolve_x(&EvolutionState::new(map, 0.0), 0.05, 30)?.iter().step_by(10) {
            worst = worst.max(gp_residual(s, 256)?);
            states += 1;
        }
    }
    Ok(check(
        10,
        worst,
        1e-9,
        worst < 1e-9,
        format!("{states} states, m = 256"),
    ))
}

fn dimension_counts() -> Result<Check> {
    let cases: Vec<(MapPair, usize)> = vec![
        (fixtures::blob(), 7),
        (fixtures::random_physical(MapKind::Polynomial, 3, 11)?, 9),
        (fixtures::rational_one(), 7),
        (fixtures::rational_two(), 11),
        (fixtures::log_one(), 7),
        (fixtures::log_two(), 9),
    ];
    let mut wrong = 0;
    let mut detail = Vec::new();
    for (map, expect) in &cases {
        let r = string_rank(map)?;
        solve_string_ode_rhs(map)?;
        if r != *expect {
            wrong += 1;
        }
        detail.push(format!("{} {r}/{expect}", map.kind().name()));
    }
    Ok(check(11, wrong as f64, 0.0, wrong == 0, detail.join(", ")))
}
