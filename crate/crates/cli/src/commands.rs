//! The five subcommands. Each fills an output [`Sink`] and the manifest and
//! returns the first error it met; partial tables are still written.

use std::f64::consts::PI;

use dtoda::bihamiltonian::{pencil_defect, triple_agreement, FieldGrid};
use dtoda::flows::{flow_rhs, flow_trajectory, FlowSpec};
use dtoda::moments::{actions, actions_contour, casimir_q, casimir_q_contour, moment_mk, moment_mk_contour, moments};
use dtoda::string::{
    area, conserved_targets, evolve_x_with, gp_residual, newton_reconstruct, string_defect, EvolutionState,
    EvolveOptions,
};
use dtoda::verify::{run_criterion, VerifyOptions, CRITERIA};
use dtoda::{MapPair, C64};

use crate::config::{GridFixture, Method, RunConfig};
use crate::error::CliError;
use crate::output::{num, Drift, Manifest, Sink, Table};

/// Grid size for the Galin-Polubarinova residual.
const GP_POINTS: usize = 256;
/// Trapezoid points for the enclosed area.
const AREA_POINTS: usize = 512;

fn need_map(cfg: &RunConfig, cmd: &str) -> Result<MapPair, CliError> {
    cfg.map()
        .ok_or_else(|| CliError::Usage(format!("`{cmd}` needs a [map] section")))
}

/// Column names and values of the conserved quantities: `Q` then the
/// moments (polynomial maps) or actions (other kinds).
struct Conserved {
    names: Vec<String>,
    values: Vec<C64>,
}

fn conserved(map: &MapPair, k_max: Option<usize>) -> Result<Conserved, CliError> {
    let mut names = vec!["q".to_string()];
    let mut values = Vec::new();
    match map {
        MapPair::Polynomial(_) => {
            let k = k_max.unwrap_or(map.order() + 1);
            let mv = moments(map, k)?;
            values.push(mv.q);
            names.extend((1..=k).map(|i| format!("m{i}")));
            names.extend((1..=k).map(|i| format!("mbar{i}")));
            values.extend(mv.m);
            values.extend(mv.mbar);
        }
        _ => {
            let av = actions(map)?;
            values.push(av.q);
            names.extend((0..av.i.len()).map(|i| format!("i{i}")));
            names.extend((0..av.ibar.len()).map(|i| format!("ibar{i}")));
            values.extend(av.i);
            values.extend(av.ibar);
        }
    }
    Ok(Conserved { names, values })
}

fn complex_header(names: &[String]) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| [format!("re_{n}"), format!("im_{n}")])
        .collect()
}

fn complex_cells(values: &[C64]) -> Vec<String> {
    values.iter().flat_map(|v| [num(v.re), num(v.im)]).collect()
}

fn param_distance(a: &MapPair, b: &MapPair) -> f64 {
    a.params()
        .iter()
        .zip(b.params())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Keeps the first error while the command carries on where it can.
#[derive(Default)]
struct FirstError(Option<CliError>);

impl FirstError {
    fn keep(&mut self, e: impl Into<CliError>) {
        let e = e.into();
        log::warn!("{e}");
        if self.0.is_none() {
            self.0 = Some(e);
        }
    }

    fn finish(self) -> Result<(), CliError> {
        self.0.map_or(Ok(()), Err)
    }
}

/// `x` evolution by RK4, Newton reconstruction, or both.
///
/// * `boundary.csv`: `x, phi, re_z, im_z`
/// * `moments.csv`: `x`, then `re_/im_` pairs of `q` and the moments or actions
/// * `residuals.csv`: `x, string_residual, gp_residual, univalence_margin,
///   area`, plus `method_distance` when both methods run
pub fn simulate(cfg: &RunConfig, sink: &mut Sink, man: &mut Manifest) -> Result<(), CliError> {
    let map = need_map(cfg, "simulate")?;
    let ev = cfg
        .evolution
        .clone()
        .ok_or_else(|| CliError::Usage("`simulate` needs an [evolution] section".into()))?;
    let tol = cfg.tolerances;
    let opts = EvolveOptions {
        step_tol: tol.step,
        ..EvolveOptions::default()
    };
    let s0 = EvolutionState::new(map, ev.x_start);
    let xs: Vec<f64> = (1..=ev.steps)
        .map(|s| {
            if s == ev.steps {
                ev.x_end
            } else {
                ev.x_start + (ev.x_end - ev.x_start) * s as f64 / ev.steps as f64
            }
        })
        .collect();
    let mut failure = FirstError::default();

    let ode = (ev.method != Method::Newton).then(|| {
        man.phase("ode", |_| {
            let mut out = vec![s0.clone()];
            for &x in &xs {
                let last = out.last().expect("nonempty");
                match evolve_x_with(last, x, 1, &opts) {
                    Ok(mut t) => out.push(t.pop().expect("one step")),
                    Err(e) => {
                        failure.keep(e);
                        break;
                    }
                }
            }
            out
        })
    });
    let newton = (ev.method != Method::Ode).then(|| {
        man.phase("newton", |_| {
            let mut out = vec![s0.clone()];
            let targets = match conserved_targets(&s0) {
                Ok(t) => t,
                Err(e) => {
                    failure.keep(e);
                    return out;
                }
            };
            for &x in &xs {
                let guess = &out.last().expect("nonempty").map;
                match newton_reconstruct(&targets, x, guess, tol.newton, tol.newton_iterations) {
                    Ok(r) => out.push(EvolutionState::new(r.map, x)),
                    Err(e) => {
                        failure.keep(e);
                        break;
                    }
                }
            }
            out
        })
    });
    let both = ev.method == Method::Both;
    let states = ode.clone().or(newton.clone()).expect("one method runs");

    man.phase("diagnostics", |man| -> Result<(), CliError> {
        let m = cfg.output.boundary_points;
        let mut boundary = Table::new(["x", "phi", "re_z", "im_z"]);
        let c0 = conserved(&s0.map, cfg.output.moments)?;
        let mut mom = Table::new(std::iter::once("x".to_string()).chain(complex_header(&c0.names)));
        let mut res_header = vec!["x", "string_residual", "gp_residual", "univalence_margin", "area"];
        if both {
            res_header.push("method_distance");
        }
        let mut res = Table::new(res_header);
        let mut drift = vec![0.0f64; c0.values.len()];
        for (idx, s) in states.iter().enumerate() {
            for (k, z) in s.map.boundary_samples(m)?.into_iter().enumerate() {
                let phi = 2.0 * PI * k as f64 / m as f64;
                boundary.push(vec![num(s.x), num(phi), num(z.re), num(z.im)]);
            }
            let c = conserved(&s.map, cfg.output.moments)?;
            for (j, (v, v0)) in c.values.iter().zip(&c0.values).enumerate() {
                // Q - x is the conserved combination
                let d = if j == 0 {
                    (v - s.x - (v0 - s0.x)).norm()
                } else {
                    (v - v0).norm()
                };
                drift[j] = drift[j].max(d);
            }
            mom.push(std::iter::once(num(s.x)).chain(complex_cells(&c.values)).collect());
            let sd = string_defect(&s.map)?;
            let gp = gp_residual(s, GP_POINTS).unwrap_or(f64::NAN);
            let margin = s.map.univalence_margin(GP_POINTS);
            let a = area(&s.map, AREA_POINTS)?;
            man.residual("string_residual", sd);
            if gp.is_finite() {
                man.residual("gp_residual", gp);
            }
            let mut row = vec![num(s.x), num(sd), num(gp), num(margin), num(a)];
            if both {
                let d = match (&ode, &newton) {
                    (Some(o), Some(n)) if idx < o.len() && idx < n.len() => param_distance(&o[idx].map, &n[idx].map),
                    _ => f64::NAN,
                };
                if d.is_finite() {
                    man.residual("method_distance", d);
                }
                row.push(num(d));
            }
            res.push(row);
        }
        man.drift = c0
            .names
            .iter()
            .zip(drift)
            .map(|(n, d)| Drift {
                quantity: if n == "q" { "q - x".into() } else { n.clone() },
                max_drift: d,
            })
            .collect();
        sink.write("boundary.csv", &boundary)?;
        sink.write("moments.csv", &mom)?;
        sink.write("residuals.csv", &res)?;
        Ok(())
    })?;
    failure.finish()
}

/// Hierarchy flows from the configured map.
///
/// * `leakage.csv`: `flow, label, step, tau, leak_norm`
/// * `actions.csv`: `flow, label, step, tau`, then the conserved columns
/// * `trajectory_<flow>_<label>.csv`: `step, tau`, then `re_p<i>, im_p<i>`
///
/// A flow whose leakage exceeds the tolerance is reported at step 0 and
/// refused; the command then exits with the form-invariance code.
pub fn flows(cfg: &RunConfig, sink: &mut Sink, man: &mut Manifest) -> Result<(), CliError> {
    let map = need_map(cfg, "flows")?;
    if cfg.flows.is_empty() {
        return Err(CliError::Usage("`flows` needs at least one [[flows]] entry".into()));
    }
    let x = cfg.evolution.as_ref().map_or(0.0, |e| e.x_start);
    let state = EvolutionState::new(map.clone(), x);
    let c0 = conserved(&map, cfg.output.moments)?;
    let mut leak = Table::new(["flow", "label", "step", "tau", "leak_norm"]);
    let mut act = Table::new(
        ["flow", "label", "step", "tau"]
            .into_iter()
            .map(String::from)
            .chain(complex_header(&c0.names)),
    );
    let mut failure = FirstError::default();
    let mut drift = Vec::new();
    for (f, req) in cfg.flows.iter().enumerate() {
        let label = req.kind.label();
        man.phase(&format!("flow {f} {label}"), |man| -> Result<(), CliError> {
            let (_, rep) = flow_rhs(&map, req.kind)?;
            let id = f.to_string();
            let row0 = |step: usize, tau: f64| vec![id.clone(), label.clone(), step.to_string(), num(tau)];
            if !(rep.leak_norm <= cfg.tolerances.leak) {
                let mut r = row0(0, 0.0);
                r.push(num(rep.leak_norm));
                leak.push(r);
                man.residual(&format!("refused leak {label}"), rep.leak_norm);
                failure.keep(dtoda::Error::FormInvarianceViolated(rep.leak_norm));
                return Ok(());
            }
            let spec = FlowSpec {
                leak_tol: cfg.tolerances.leak,
                ..FlowSpec::new(req.kind, req.delta, req.steps)
            };
            let traj = match flow_trajectory(&state, &spec) {
                Ok(t) => t,
                Err(e) => {
                    failure.keep(e);
                    return Ok(());
                }
            };
            let dim = map.dim();
            let mut tr = Table::new(
                ["step", "tau"]
                    .into_iter()
                    .map(String::from)
                    .chain((0..dim).flat_map(|i| [format!("re_p{i}"), format!("im_p{i}")])),
            );
            let mut q_drift = 0.0f64;
            for (step, s) in traj.iter().enumerate() {
                let mut r = row0(step, s.tau);
                r.push(num(s.leak_norm));
                leak.push(r);
                man.residual(&format!("leak {label}"), s.leak_norm);
                let c = conserved(&s.map, cfg.output.moments)?;
                q_drift = q_drift.max((c.values[0] - c0.values[0]).norm());
                act.push(row0(step, s.tau).into_iter().chain(complex_cells(&c.values)).collect());
                tr.push(
                    [step.to_string(), num(s.tau)]
                        .into_iter()
                        .chain(complex_cells(&s.map.params()))
                        .collect(),
                );
            }
            drift.push(Drift {
                quantity: format!("q under {label}"),
                max_drift: q_drift,
            });
            sink.write(&format!("trajectory_{f}_{label}.csv"), &tr)
        })?;
    }
    man.drift = drift;
    sink.write("leakage.csv", &leak)?;
    sink.write("actions.csv", &act)?;
    failure.finish()
}

/// Conserved quantities of the configured map, closed forms against contour
/// integrals.
///
/// * `moments.csv`: `x`, then the conserved columns
/// * `moments_check.csv`: `quantity, re_closed, im_closed, re_contour,
///   im_contour, abs_diff`
pub fn moments_cmd(cfg: &RunConfig, sink: &mut Sink, man: &mut Manifest) -> Result<(), CliError> {
    let map = need_map(cfg, "moments")?;
    let x = cfg.evolution.as_ref().map_or(0.0, |e| e.x_start);
    let c = conserved(&map, cfg.output.moments)?;
    let mut mom = Table::new(std::iter::once("x".to_string()).chain(complex_header(&c.names)));
    mom.push(std::iter::once(num(x)).chain(complex_cells(&c.values)).collect());
    let mut pairs: Vec<(String, C64, C64)> = vec![("q".into(), casimir_q(&map)?, casimir_q_contour(&map)?)];
    man.phase("contours", |_| -> Result<(), CliError> {
        match &map {
            MapPair::Polynomial(_) => {
                let k = cfg.output.moments.unwrap_or(map.order() + 1);
                for i in 1..=k {
                    pairs.push((format!("m{i}"), moment_mk(&map, i)?, moment_mk_contour(&map, i, 1.0)?));
                }
            }
            _ => {
                let a = actions(&map)?;
                let b = actions_contour(&map)?;
                for (i, (x, y)) in a.i.iter().zip(&b.i).enumerate() {
                    pairs.push((format!("i{i}"), *x, *y));
                }
                for (i, (x, y)) in a.ibar.iter().zip(&b.ibar).enumerate() {
                    pairs.push((format!("ibar{i}"), *x, *y));
                }
            }
        }
        Ok(())
    })?;
    let mut check = Table::new([
        "quantity",
        "re_closed",
        "im_closed",
        "re_contour",
        "im_contour",
        "abs_diff",
    ]);
    for (name, a, b) in &pairs {
        let d = (a - b).norm();
        man.residual("closed_vs_contour", d);
        check.push(vec![name.clone(), num(a.re), num(a.im), num(b.re), num(b.im), num(d)]);
    }
    sink.write("moments.csv", &mom)?;
    sink.write("moments_check.csv", &check)
}

/// The acceptance battery. `verify.csv`: `id, name, status, measured,
/// threshold, detail`. Exits nonzero when any check fails.
pub fn verify(cfg: &RunConfig, sink: &mut Sink, man: &mut Manifest) -> Result<(), CliError> {
    let opts = VerifyOptions {
        seed: cfg.seed,
        ..VerifyOptions::default()
    };
    let mut table = Table::new(["id", "name", "status", "measured", "threshold", "detail"]);
    let mut failed = 0;
    for &(id, name) in &CRITERIA {
        let c = run_criterion(id, &opts);
        man.phases.push(crate::output::Phase {
            name: format!("criterion {id} {name}"),
            seconds: c.elapsed.as_secs_f64(),
        });
        println!(
            "criterion {:>2} {:<32} {}  measured {:.3e}  threshold {:.1e}",
            c.id,
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.measured,
            c.threshold
        );
        if !c.pass {
            failed += 1;
        }
        man.residual(&format!("criterion {id}"), c.measured);
        table.push(vec![
            c.id.to_string(),
            c.name.to_string(),
            if c.pass { "pass" } else { "fail" }.to_string(),
            num(c.measured),
            num(c.threshold),
            c.detail.clone(),
        ]);
    }
    sink.write("verify.csv", &table)?;
    if failed > 0 {
        return Err(CliError::VerifyFailed {
            failed,
            total: CRITERIA.len(),
        });
    }
    Ok(())
}

/// Lattice flows from the three constructions. `bihamiltonian.csv`:
/// `order, points, index, linear, quadratic, lax_leak, pencil_defect`, the
/// first two as relative distances to the Lax flow.
pub fn bihamiltonian(cfg: &RunConfig, sink: &mut Sink, man: &mut Manifest) -> Result<(), CliError> {
    let b = &cfg.bihamiltonian;
    let mut table = Table::new([
        "order",
        "points",
        "index",
        "linear",
        "quadratic",
        "lax_leak",
        "pencil_defect",
    ]);
    for &order in &b.orders {
        for &m in &b.points {
            man.phase(&format!("order {order} points {m}"), |man| -> Result<(), CliError> {
                let grid = match b.fixture {
                    GridFixture::Sine => FieldGrid::sine_fixture(order, m)?,
                    GridFixture::Poisson { rho } => FieldGrid::poisson_fixture(order, m, rho)?,
                };
                for &i in &b.indices {
                    let t = triple_agreement(&grid, i)?;
                    let p = pencil_defect(&grid, i, b.lambda)?;
                    man.residual("triple_agreement", t.worst());
                    man.residual("lax_leak", t.leak);
                    man.residual("pencil_defect", p);
                    table.push(vec![
                        order.to_string(),
                        m.to_string(),
                        i.to_string(),
                        num(t.linear),
                        num(t.quadratic),
                        num(t.leak),
                        num(p),
                    ]);
                }
                Ok(())
            })?;
        }
    }
    sink.write("bihamiltonian.csv", &table)
}
