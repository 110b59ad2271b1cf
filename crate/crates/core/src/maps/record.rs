//! Plain-text record for a [`MapPair`].
//!
//! One item per line, fields separated by whitespace, `#` starts a comment.
//!
//! ```text
//! kind rational          # polynomial | rational | logarithmic
//! order 1                # N for polynomial maps, n otherwise
//! real true
//! physical true
//! r 1 0
//! u 0.1 0                # polynomial: one line per u_k, k = 0..N
//! ubar 0.1 0
//! pole 0.2 0 0.3 0.1     # rational: u_j, w_j
//! pole_bar 0.2 0 0.3 -0.1
//! branch 1 0 0.2 0.1     # logarithmic: a_i (exact rationals), w_i
//! branch_bar 1 0 0.2 -0.1
//! charge_scale 1         # logarithmic, optional
//! ```

use std::fmt::Write as _;

use num_complex::Complex;

use super::{parse_charge, Charge, LogMap, MapKind, MapOptions, MapPair, PolyMap, RationalMap};
use crate::{Error, Result, C64};

/// Renders `map` as a record that [`parse_record`] reads back exactly.
pub fn to_record(map: &MapPair) -> String {
    let mut s = String::new();
    let o = map.options();
    let _ = writeln!(s, "kind {}", map.kind().name());
    let _ = writeln!(s, "order {}", map.order());
    let _ = writeln!(s, "real {}", o.real_structure);
    let _ = writeln!(s, "physical {}", o.physical);
    let _ = writeln!(s, "r {}", c(map.r()));
    match map {
        MapPair::Polynomial(m) => {
            for u in m.u() {
                let _ = writeln!(s, "u {}", c(*u));
            }
            for u in m.ubar() {
                let _ = writeln!(s, "ubar {}", c(*u));
            }
        }
        MapPair::Rational(m) => {
            let _ = writeln!(s, "u {}", c(m.u0()));
            let _ = writeln!(s, "ubar {}", c(m.ubar0()));
            for (u, w) in m.poles() {
                let _ = writeln!(s, "pole {} {}", c(*u), c(*w));
            }
            for (u, w) in m.poles_bar() {
                let _ = writeln!(s, "pole_bar {} {}", c(*u), c(*w));
            }
        }
        MapPair::Logarithmic(m) => {
            let _ = writeln!(s, "u {}", c(m.u()));
            let _ = writeln!(s, "ubar {}", c(m.ubar()));
            for (a, w) in m.charges().iter().zip(m.w()) {
                let _ = writeln!(s, "branch {} {} {}", a.re, a.im, c(*w));
            }
            for (a, w) in m.charges_bar().iter().zip(m.wbar()) {
                let _ = writeln!(s, "branch_bar {} {} {}", a.re, a.im, c(*w));
            }
            let _ = writeln!(s, "charge_scale {:e}", m.charge_scale());
        }
    }
    s
}

fn c(v: C64) -> String {
    format!("{:e} {:e}", v.re, v.im)
}

#[derive(Default)]
struct Fields {
    kind: Option<MapKind>,
    order: Option<usize>,
    real: Option<bool>,
    physical: Option<bool>,
    r: Option<C64>,
    scale: Option<f64>,
    u: Vec<C64>,
    ubar: Vec<C64>,
    poles: Vec<(C64, C64)>,
    poles_bar: Vec<(C64, C64)>,
    branch: Vec<(Charge, C64)>,
    branch_bar: Vec<(Charge, C64)>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn set_once<T>(slot: &mut Option<T>, v: T, line: usize, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(err(line, format!("duplicate `{key}`")));
    }
    *slot = Some(v);
    Ok(())
}

fn float(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| err(line, format!("bad number `{tok}`")))?;
    if !v.is_finite() {
        return Err(err(line, format!("non-finite number `{tok}`")));
    }
    Ok(v)
}

fn complex(tok: &[&str], line: usize) -> Result<C64> {
    Ok(C64::new(float(tok[0], line)?, float(tok[1], line)?))
}

fn boolean(tok: &str, line: usize) -> Result<bool> {
    match tok {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(err(line, format!("expected true or false, got `{tok}`"))),
    }
}

fn charge(re: &str, im: &str, line: usize) -> Result<Charge> {
    let re = parse_charge(re).map_err(|e| err(line, e.to_string()))?;
    let im = parse_charge(im).map_err(|e| err(line, e.to_string()))?;
    Ok(Complex::new(re, im))
}

/// Parses a record produced by [`to_record`] or written by hand.
pub fn parse_record(text: &str) -> Result<MapPair> {
    let mut f = Fields::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tok: Vec<&str> = content.split_whitespace().collect();
        let Some((&key, args)) = tok.split_first() else {
            continue;
        };
        let want = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(err(line, format!("`{key}` takes {n} values, got {}", args.len())));
            }
            Ok(())
        };
        match key {
            "kind" => {
                want(1)?;
                let k = match args[0] {
                    "polynomial" => MapKind::Polynomial,
                    "rational" => MapKind::Rational,
                    "logarithmic" => MapKind::Logarithmic,
                    other => return Err(err(line, format!("unknown kind `{other}`"))),
                };
                set_once(&mut f.kind, k, line, key)?;
            }
            "order" => {
                want(1)?;
                let n: usize = args[0]
                    .parse()
                    .map_err(|_| err(line, format!("bad order `{}`", args[0])))?;
                set_once(&mut f.order, n, line, key)?;
            }
            "real" => {
                want(1)?;
                set_once(&mut f.real, boolean(args[0], line)?, line, key)?;
            }
            "physical" => {
                want(1)?;
                set_once(&mut f.physical, boolean(args[0], line)?, line, key)?;
            }
            "r" => {
                want(2)?;
                set_once(&mut f.r, complex(args, line)?, line, key)?;
            }
            "charge_scale" => {
                want(1)?;
                set_once(&mut f.scale, float(args[0], line)?, line, key)?;
            }
            "u" => {
                want(2)?;
                f.u.push(complex(args, line)?);
            }
            "ubar" => {
                want(2)?;
                f.ubar.push(complex(args, line)?);
            }
            "pole" | "pole_bar" => {
                want(4)?;
                let p = (complex(&args[..2], line)?, complex(&args[2..], line)?);
                if key == "pole" {
                    f.poles.push(p);
                } else {
                    f.poles_bar.push(p);
                }
            }
            "branch" | "branch_bar" => {
                want(4)?;
                let b = (charge(args[0], args[1], line)?, complex(&args[2..], line)?);
                if key == "branch" {
                    f.branch.push(b);
                } else {
                    f.branch_bar.push(b);
                }
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }
    build(f)
}

fn build(f: Fields) -> Result<MapPair> {
    let end = 0;
    let kind = f.kind.ok_or_else(|| err(end, "missing `kind`"))?;
    let order = f.order.ok_or_else(|| err(end, "missing `order`"))?;
    let r = f.r.ok_or_else(|| err(end, "missing `r`"))?;
    let opts = MapOptions {
        real_structure: f.real.unwrap_or(false),
        physical: f.physical.unwrap_or(false),
    };
    let count = |what: &str, got: usize, want: usize| -> Result<()> {
        if got != want {
            return Err(err(end, format!("expected {want} `{what}` lines, got {got}")));
        }
        Ok(())
    };
    let single = |v: &[C64], what: &str| -> Result<C64> {
        count(what, v.len(), 1)?;
        Ok(v[0])
    };
    let extra = |ok: bool, what: &str| -> Result<()> {
        if !ok {
            return Err(err(end, format!("`{what}` not allowed for {} maps", kind.name())));
        }
        Ok(())
    };
    match kind {
        MapKind::Polynomial => {
            extra(f.poles.is_empty() && f.poles_bar.is_empty(), "pole")?;
            extra(f.branch.is_empty() && f.branch_bar.is_empty(), "branch")?;
            extra(f.scale.is_none(), "charge_scale")?;
            let n1 = order.checked_add(1).ok_or_else(|| err(end, "order too large"))?;
            count("u", f.u.len(), n1)?;
            count("ubar", f.ubar.len(), n1)?;
            Ok(PolyMap::new(r, f.u, f.ubar, opts)?.into())
        }
        MapKind::Rational => {
            extra(f.branch.is_empty() && f.branch_bar.is_empty(), "branch")?;
            extra(f.scale.is_none(), "charge_scale")?;
            count("pole", f.poles.len(), order)?;
            count("pole_bar", f.poles_bar.len(), order)?;
            let u0 = single(&f.u, "u")?;
            let ubar0 = single(&f.ubar, "ubar")?;
            Ok(RationalMap::new(r, u0, ubar0, f.poles, f.poles_bar, opts)?.into())
        }
        MapKind::Logarithmic => {
            extra(f.poles.is_empty() && f.poles_bar.is_empty(), "pole")?;
            let n1 = order.checked_add(1).ok_or_else(|| err(end, "order too large"))?;
            count("branch", f.branch.len(), n1)?;
            count("branch_bar", f.branch_bar.len(), n1)?;
            let u = single(&f.u, "u")?;
            let ubar = single(&f.ubar, "ubar")?;
            let scale = f.scale.unwrap_or(1.0);
            Ok(LogMap::new(r, u, ubar, f.branch, f.branch_bar, scale, opts)?.into())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::log::tests::sample;

    #[test]
    fn round_trip_all_kinds() {
        let poly: MapPair = PolyMap::new(
            C64::new(1.0, 0.0),
            vec![C64::new(0.1, 0.0), C64::new(0.2, -0.05)],
            vec![C64::new(0.1, 0.0), C64::new(0.2, 0.05)],
            MapOptions::physical_real(),
        )
        .unwrap()
        .into();
        let rat: MapPair = RationalMap::new(
            C64::new(1.3, 0.2),
            C64::new(0.1, 1.0 / 3.0),
            C64::new(-0.3, 0.0),
            vec![(C64::new(0.2, 0.1), C64::new(0.3, 0.1))],
            vec![(C64::new(0.5, -0.1), C64::new(-0.2, 0.4))],
            MapOptions::formal(),
        )
        .unwrap()
        .into();
        let log: MapPair = sample().into();
        for m in [poly, rat, log] {
            assert_eq!(parse_record(&to_record(&m)).unwrap(), m);
        }
    }

    #[test]
    fn hand_written_record() {
        let text = "# unit disk\nkind polynomial\norder 0\nreal true\nphysical true\nr 1 0\nu 0 0\nubar 0 0\n";
        let m = parse_record(text).unwrap();
        assert_eq!(m, MapPair::from(PolyMap::circle(1.0)));
    }

    #[test]
    fn charge_sum_must_vanish() {
        let text = "kind logarithmic\norder 1\nr 1 0\nu 0 0\nubar 0 0\n\
                    branch 1/3 0 0.2 0\nbranch -1/3 0 0.4 0\n\
                    branch_bar 1/2 0 0.2 0\nbranch_bar -1/3 0 0.4 0\n";
        assert!(matches!(parse_record(text), Err(Error::InvalidMap(_))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "kind polynomial\norder 0\nr 1 zero\n";
        match parse_record(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_record("kind polynomial\nkind rational\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_record("kind polynomial\norder 1\nr 1 0\nu 0 0\nubar 0 0\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_record("r nan 0\n"), Err(Error::Parse { line: 1, .. })));
    }
}
