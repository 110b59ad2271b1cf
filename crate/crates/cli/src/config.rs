//! Run configuration: a TOML file with the sections `[map]`, `[evolution]`,
//! `[[flows]]`, `[tolerances]`, `[output]` and `[bihamiltonian]`, plus a
//! top-level `seed`.
//!
//! Numbers may be written as TOML numbers or as decimal strings. A complex
//! value is a two-element array `[re, im]`; a bare number is real.

use std::fmt;

use dtoda::fixtures;
use dtoda::flows::{FlowKind, LEAK_TOL};
use dtoda::maps::record::parse_record;
use dtoda::maps::{parse_charge, Charge, LogMap, PolyMap, RationalMap};
use dtoda::{MapKind, MapOptions, MapPair, C64};
use num_rational::Rational64;
use toml::Value;

/// A rejected configuration, located by line when possible.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, field `{}`: {}", self.field, self.msg),
            None => write!(f, "config field `{}`: {}", self.field, self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Ode,
    Newton,
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub x_start: f64,
    pub x_end: f64,
    pub steps: usize,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowRequest {
    pub kind: FlowKind,
    pub delta: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Largest leakage a flow may show before it is refused.
    pub leak: f64,
    /// Newton stopping tolerance on the conserved-quantity residual.
    pub newton: f64,
    pub newton_iterations: usize,
    /// Step-doubling tolerance of the x integrator.
    pub step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            leak: LEAK_TOL,
            newton: 1e-13,
            newton_iterations: 40,
            step: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub dir: Option<String>,
    pub boundary_points: usize,
    /// Number of moments `M_1..M_k` reported for polynomial maps.
    pub moments: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridFixture {
    Sine,
    Poisson { rho: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bihamiltonian {
    pub orders: Vec<usize>,
    pub points: Vec<usize>,
    pub indices: Vec<usize>,
    pub fixture: GridFixture,
    pub lambda: f64,
}

impl Default for Bihamiltonian {
    fn default() -> Self {
        Self {
            orders: vec![0, 1],
            points: vec![256, 512],
            indices: vec![1, 2],
            fixture: GridFixture::Sine,
            lambda: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum MapSource {
    Fixed(MapPair),
    Random { kind: MapKind, order: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    map: Option<MapSource>,
    pub evolution: Option<Evolution>,
    pub flows: Vec<FlowRequest>,
    pub tolerances: Tolerances,
    pub output: Output,
    pub bihamiltonian: Bihamiltonian,
    /// The parsed document, echoed into the manifest.
    pub echo: Value,
}

impl RunConfig {
    /// The configured map. Random maps are drawn from `seed`.
    pub fn map(&self) -> Option<MapPair> {
        match self.map.as_ref()? {
            MapSource::Fixed(m) => Some(m.clone()),
            MapSource::Random { kind, order } => fixtures::random_physical(*kind, *order, self.seed).ok(),
        }
    }

    /// Replaces the seed, redrawing a random map; the new draw must be valid.
    pub fn with_seed(mut self, seed: u64) -> Result<Self, ConfigError> {
        self.seed = seed;
        if let Some(MapSource::Random { kind, order }) = &self.map {
            fixtures::random_physical(*kind, *order, seed).map_err(|e| ConfigError {
                line: None,
                field: "seed".into(),
                msg: e.to_string(),
            })?;
        }
        Ok(self)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            map: None,
            evolution: None,
            flows: Vec::new(),
            tolerances: Tolerances::default(),
            output: Output {
                dir: None,
                boundary_points: 64,
                moments: None,
            },
            bihamiltonian: Bihamiltonian::default(),
            echo: Value::Table(Default::default()),
        }
    }
}

/// Line lookup for diagnostics: the first line of `key` inside the
/// `index`-th occurrence of table `section` (top level when empty).
struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn find(&self, section: &str, index: usize, key: &str) -> Option<usize> {
        let mut current = String::new();
        let mut seen: Vec<(String, usize)> = Vec::new();
        let mut header_line = None;
        let mut occurrence = 0;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if line.starts_with('[') {
                let name = line.trim_matches(|c| c == '[' || c == ']' || c == ' ');
                let name = name.split(']').next().unwrap_or("").trim().to_string();
                occurrence = match seen.iter_mut().find(|s| s.0 == name) {
                    Some(s) => {
                        s.1 += 1;
                        s.1
                    }
                    None => {
                        seen.push((name.clone(), 0));
                        0
                    }
                };
                current = name;
                if current == section && occurrence == index {
                    header_line = Some(i + 1);
                }
                continue;
            }
            if current == section && occurrence == index && !key.is_empty() {
                if let Some(rest) = line.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
        header_line
    }
}

struct Ctx<'a> {
    loc: Locator<'a>,
    section: &'static str,
    index: usize,
}

impl Ctx<'_> {
    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let field = match (self.section, key) {
            ("", k) => k.to_string(),
            (s, "") => s.to_string(),
            ("flows", k) => format!("flows[{}].{k}", self.index),
            (s, k) => format!("{s}.{k}"),
        };
        ConfigError {
            line: self
                .loc
                .find(self.section, self.index, key.split('.').next().unwrap_or(key)),
            field,
            msg: msg.into(),
        }
    }

    fn num(&self, key: &str, v: &Value) -> Result<f64, ConfigError> {
        let x = match v {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            Value::String(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| self.err(key, format!("`{s}` is not a decimal number")))?,
            _ => return Err(self.err(key, "expected a number")),
        };
        if !x.is_finite() {
            return Err(self.err(key, "number must be finite"));
        }
        Ok(x)
    }

    fn complex(&self, key: &str, v: &Value) -> Result<C64, ConfigError> {
        match v {
            Value::Array(a) if a.len() == 2 => Ok(C64::new(self.num(key, &a[0])?, self.num(key, &a[1])?)),
            Value::Array(_) => Err(self.err(key, "a complex value is a pair [re, im]")),
            other => Ok(C64::new(self.num(key, other)?, 0.0)),
        }
    }

    fn complex_list(&self, key: &str, v: &Value) -> Result<Vec<C64>, ConfigError> {
        match v {
            Value::Array(a) => a.iter().map(|x| self.complex(key, x)).collect(),
            _ => Err(self.err(key, "expected a list of coefficients")),
        }
    }

    fn count(&self, key: &str, v: &Value) -> Result<usize, ConfigError> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            Value::String(s) => s
                .trim()
                .parse()
                .map_err(|_| self.err(key, format!("`{s}` is not a nonnegative integer"))),
            _ => Err(self.err(key, "expected a nonnegative integer")),
        }
    }

    fn count_list(&self, key: &str, v: &Value) -> Result<Vec<usize>, ConfigError> {
        match v {
            Value::Array(a) => a.iter().map(|x| self.count(key, x)).collect(),
            other => Ok(vec![self.count(key, other)?]),
        }
    }

    fn boolean(&self, key: &str, v: &Value) -> Result<bool, ConfigError> {
        v.as_bool().ok_or_else(|| self.err(key, "expected true or false"))
    }

    fn string<'v>(&self, key: &str, v: &'v Value) -> Result<&'v str, ConfigError> {
        v.as_str().ok_or_else(|| self.err(key, "expected a string"))
    }

    fn charge_part(&self, key: &str, v: &Value) -> Result<Rational64, ConfigError> {
        let s = match v {
            Value::String(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Float(f) => format!("{f}"),
            _ => return Err(self.err(key, "a charge is an exact rational such as \"1/3\"")),
        };
        parse_charge(&s).map_err(|e| self.err(key, e.to_string()))
    }

    fn charge(&self, key: &str, v: &Value) -> Result<Charge, ConfigError> {
        match v {
            Value::Array(a) if a.len() == 2 => Ok(Charge::new(
                self.charge_part(key, &a[0])?,
                self.charge_part(key, &a[1])?,
            )),
            Value::Array(_) => Err(self.err(key, "a complex charge is a pair [re, im]")),
            other => Ok(Charge::new(self.charge_part(key, other)?, Rational64::from_integer(0))),
        }
    }
}

fn table<'v>(ctx: &Ctx, v: &'v Value, allowed: &[&str]) -> Result<&'v toml::map::Map<String, Value>, ConfigError> {
    let t = v.as_table().ok_or_else(|| ctx.err("", "expected a table"))?;
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(ctx.err(k, format!("unknown key; expected one of {}", allowed.join(", "))));
        }
    }
    Ok(t)
}

fn parse_kind(ctx: &Ctx, key: &str, s: &str) -> Result<MapKind, ConfigError> {
    match s {
        "polynomial" => Ok(MapKind::Polynomial),
        "rational" => Ok(MapKind::Rational),
        "logarithmic" => Ok(MapKind::Logarithmic),
        _ => Err(ctx.err(
            key,
            format!("unknown map kind `{s}`; expected polynomial, rational or logarithmic"),
        )),
    }
}

const MAP_KEYS: &[&str] = &[
    "kind",
    "order",
    "fixture",
    "random",
    "record",
    "real_structure",
    "physical",
    "r",
    "r0",
    "alpha",
    "u",
    "ubar",
    "poles",
    "poles_bar",
    "branches",
    "branches_bar",
    "charge_scale",
];

fn core_err(ctx: &Ctx, key: &str, e: dtoda::Error) -> ConfigError {
    ctx.err(key, e.to_string())
}

fn parse_map(ctx: &Ctx, v: &Value) -> Result<MapSource, ConfigError> {
    let t = table(ctx, v, MAP_KEYS)?;
    let get = |k: &str| t.get(k);
    let kind = get("kind").map(|v| ctx.string("kind", v)).transpose()?;
    let kind = kind.map(|s| parse_kind(ctx, "kind", s)).transpose()?;
    let order = get("order").map(|v| ctx.count("order", v)).transpose()?;

    if let Some(rec) = get("record") {
        let text = ctx.string("record", rec)?;
        let map = parse_record(text).map_err(|e| core_err(ctx, "record", e))?;
        return Ok(MapSource::Fixed(map));
    }
    if let Some(f) = get("fixture") {
        let name = ctx.string("fixture", f)?;
        let r0 = get("r0").map(|v| ctx.num("r0", v)).transpose()?.unwrap_or(1.0);
        let map = match name {
            "circle" => {
                if !(r0 > 0.0) {
                    return Err(ctx.err("r0", "radius must be positive"));
                }
                fixtures::circle(r0)
            }
            "ellipse" => {
                let alpha = get("alpha").map(|v| ctx.num("alpha", v)).transpose()?.unwrap_or(0.3);
                if !(r0 > 0.0 && (0.0..1.0).contains(&alpha)) {
                    return Err(ctx.err("alpha", "need r0 > 0 and 0 <= alpha < 1"));
                }
                fixtures::ellipse(r0, alpha).map_err(|e| core_err(ctx, "alpha", e))?
            }
            "blob" => fixtures::blob(),
            "rational_one" => fixtures::rational_one(),
            "rational_two" => fixtures::rational_two(),
            "log_one" => fixtures::log_one(),
            "log_two" => fixtures::log_two(),
            other => {
                return Err(ctx.err(
                    "fixture",
                    format!("unknown fixture `{other}`; expected circle, ellipse, blob, rational_one, rational_two, log_one or log_two"),
                ))
            }
        };
        return Ok(MapSource::Fixed(map));
    }
    let kind = kind.ok_or_else(|| ctx.err("kind", "missing; give `kind`, `fixture` or `record`"))?;
    if let Some(r) = get("random") {
        if ctx.boolean("random", r)? {
            let order = order.ok_or_else(|| ctx.err("order", "random maps need an order"))?;
            if !(1..=6).contains(&order) {
                return Err(ctx.err("order", "random maps support orders 1 to 6"));
            }
            return Ok(MapSource::Random { kind, order });
        }
    }

    let real = get("real_structure")
        .map(|v| ctx.boolean("real_structure", v))
        .transpose()?
        .unwrap_or(true);
    let physical = get("physical")
        .map(|v| ctx.boolean("physical", v))
        .transpose()?
        .unwrap_or(true);
    let opts = MapOptions {
        real_structure: real,
        physical,
    };
    let r = ctx.complex("r", get("r").ok_or_else(|| ctx.err("r", "missing"))?)?;
    let mirror = |key_bar: &str, direct: Option<Vec<C64>>| -> Result<Vec<C64>, ConfigError> {
        direct.ok_or_else(|| ctx.err(key_bar, "missing; only maps with real_structure = true may omit it"))
    };
    let check_order = |n: usize| -> Result<(), ConfigError> {
        match order {
            Some(o) if o != n => Err(ctx.err("order", format!("order {o} does not match the {n} coefficients given"))),
            _ => Ok(()),
        }
    };

    let map: MapPair = match kind {
        MapKind::Polynomial => {
            let u = ctx.complex_list("u", get("u").ok_or_else(|| ctx.err("u", "missing"))?)?;
            if u.is_empty() {
                return Err(ctx.err("u", "need at least u_0"));
            }
            check_order(u.len() - 1)?;
            let ubar = match get("ubar") {
                Some(v) => ctx.complex_list("ubar", v)?,
                None if real => u.iter().map(|c| c.conj()).collect(),
                None => mirror("ubar", None)?,
            };
            if ubar.len() != u.len() {
                return Err(ctx.err("ubar", "needs as many entries as `u`"));
            }
            PolyMap::new(r, u, ubar, opts)
                .map_err(|e| core_err(ctx, "u", e))?
                .into()
        }
        MapKind::Rational => {
            let u0 = ctx.complex("u", get("u").ok_or_else(|| ctx.err("u", "missing"))?)?;
            let ubar0 = match get("ubar") {
                Some(v) => ctx.complex("ubar", v)?,
                None if real => u0.conj(),
                None => return Err(ctx.err("ubar", "missing; only maps with real_structure = true may omit it")),
            };
            let poles = parse_poles(ctx, "poles", get("poles").ok_or_else(|| ctx.err("poles", "missing"))?)?;
            check_order(poles.len())?;
            let poles_bar = match get("poles_bar") {
                Some(v) => parse_poles(ctx, "poles_bar", v)?,
                None if real => poles.iter().map(|(u, w)| (u.conj(), w.conj())).collect(),
                None => return Err(ctx.err("poles_bar", "missing; only maps with real_structure = true may omit it")),
            };
            RationalMap::new(r, u0, ubar0, poles, poles_bar, opts)
                .map_err(|e| core_err(ctx, "poles", e))?
                .into()
        }
        MapKind::Logarithmic => {
            let u = ctx.complex("u", get("u").ok_or_else(|| ctx.err("u", "missing"))?)?;
            let ubar = match get("ubar") {
                Some(v) => ctx.complex("ubar", v)?,
                None if real => u.conj(),
                None => return Err(ctx.err("ubar", "missing; only maps with real_structure = true may omit it")),
            };
            let branches = parse_branches(
                ctx,
                "branches",
                get("branches").ok_or_else(|| ctx.err("branches", "missing"))?,
            )?;
            if branches.len() < 2 {
                return Err(ctx.err("branches", "need at least two branch points"));
            }
            check_order(branches.len() - 1)?;
            let branches_bar = match get("branches_bar") {
                Some(v) => parse_branches(ctx, "branches_bar", v)?,
                None if real => branches.iter().map(|(a, w)| (a.conj(), w.conj())).collect(),
                None => {
                    return Err(ctx.err(
                        "branches_bar",
                        "missing; only maps with real_structure = true may omit it",
                    ))
                }
            };
            let scale = get("charge_scale")
                .map(|v| ctx.num("charge_scale", v))
                .transpose()?
                .unwrap_or(1.0);
            LogMap::new(r, u, ubar, branches, branches_bar, scale, opts)
                .map_err(|e| core_err(ctx, "branches", e))?
                .into()
        }
    };
    Ok(MapSource::Fixed(map))
}

fn parse_poles(ctx: &Ctx, key: &str, v: &Value) -> Result<Vec<(C64, C64)>, ConfigError> {
    let list = v
        .as_array()
        .ok_or_else(|| ctx.err(key, "expected a list of {u, w} tables"))?;
    list.iter()
        .map(|p| {
            let t = p
                .as_table()
                .ok_or_else(|| ctx.err(key, "each pole is a table {u = .., w = ..}"))?;
            let u = t.get("u").ok_or_else(|| ctx.err(key, "pole without `u`"))?;
            let w = t.get("w").ok_or_else(|| ctx.err(key, "pole without `w`"))?;
            if t.len() != 2 {
                return Err(ctx.err(key, "a pole has exactly the keys `u` and `w`"));
            }
            Ok((ctx.complex(key, u)?, ctx.complex(key, w)?))
        })
        .collect()
}

fn parse_branches(ctx: &Ctx, key: &str, v: &Value) -> Result<Vec<(Charge, C64)>, ConfigError> {
    let list = v
        .as_array()
        .ok_or_else(|| ctx.err(key, "expected a list of {a, w} tables"))?;
    list.iter()
        .map(|p| {
            let t = p
                .as_table()
                .ok_or_else(|| ctx.err(key, "each branch point is a table {a = .., w = ..}"))?;
            let a = t.get("a").ok_or_else(|| ctx.err(key, "branch point without `a`"))?;
            let w = t.get("w").ok_or_else(|| ctx.err(key, "branch point without `w`"))?;
            if t.len() != 2 {
                return Err(ctx.err(key, "a branch point has exactly the keys `a` and `w`"));
            }
            Ok((ctx.charge(key, a)?, ctx.complex(key, w)?))
        })
        .collect()
}

fn parse_evolution(ctx: &Ctx, v: &Value) -> Result<Evolution, ConfigError> {
    let t = table(ctx, v, &["x_start", "x_end", "steps", "method"])?;
    let x_start = t
        .get("x_start")
        .map(|v| ctx.num("x_start", v))
        .transpose()?
        .unwrap_or(0.0);
    let x_end = ctx.num("x_end", t.get("x_end").ok_or_else(|| ctx.err("x_end", "missing"))?)?;
    let steps = ctx.count("steps", t.get("steps").ok_or_else(|| ctx.err("steps", "missing"))?)?;
    if steps == 0 || steps > 1_000_000 {
        return Err(ctx.err("steps", "must be between 1 and 1000000"));
    }
    if x_end == x_start {
        return Err(ctx.err("x_end", "must differ from x_start"));
    }
    let method = match t.get("method").map(|v| ctx.string("method", v)).transpose()? {
        None | Some("ode") => Method::Ode,
        Some("newton") => Method::Newton,
        Some("both") => Method::Both,
        Some(m) => return Err(ctx.err("method", format!("unknown method `{m}`; expected ode, newton or both"))),
    };
    Ok(Evolution {
        x_start,
        x_end,
        steps,
        method,
    })
}

fn parse_flow(ctx: &Ctx, v: &Value, map: Option<&MapPair>) -> Result<FlowRequest, ConfigError> {
    let t = table(ctx, v, &["function", "index", "barred", "delta", "steps"])?;
    let function = ctx.string(
        "function",
        t.get("function").ok_or_else(|| ctx.err("function", "missing"))?,
    )?;
    let index = ctx.count("index", t.get("index").ok_or_else(|| ctx.err("index", "missing"))?)?;
    let barred = t
        .get("barred")
        .map(|v| ctx.boolean("barred", v))
        .transpose()?
        .unwrap_or(false);
    let delta = t.get("delta").map(|v| ctx.num("delta", v)).transpose()?.unwrap_or(1e-3);
    let steps = t.get("steps").map(|v| ctx.count("steps", v)).transpose()?.unwrap_or(10);
    if delta == 0.0 {
        return Err(ctx.err("delta", "must be nonzero"));
    }
    if steps == 0 || steps > 100_000 {
        return Err(ctx.err("steps", "must be between 1 and 100000"));
    }
    let kind = match function {
        "standard" => {
            if index == 0 {
                return Err(ctx.err("index", "standard functions start at index 1"));
            }
            FlowKind::Standard { k: index, barred }
        }
        "logarithmic" => FlowKind::Logarithmic { j: index, barred },
        "krichever" => FlowKind::Krichever { j: index, barred },
        other => {
            return Err(ctx.err(
                "function",
                format!("unknown function `{other}`; expected standard, logarithmic or krichever"),
            ))
        }
    };
    if let Some(map) = map {
        let range = match (kind, map) {
            (FlowKind::Standard { .. }, _) => None,
            (FlowKind::Logarithmic { .. }, MapPair::Logarithmic(m)) => Some(m.branch_count()),
            (FlowKind::Krichever { .. }, MapPair::Rational(m)) => Some(2 * m.order()),
            _ => {
                return Err(ctx.err(
                    "function",
                    format!("`{function}` functions do not exist for {} maps", map.kind().name()),
                ))
            }
        };
        if let Some(max) = range {
            if index > max {
                return Err(ctx.err("index", format!("index {index} outside 0..={max}")));
            }
        }
    }
    Ok(FlowRequest { kind, delta, steps })
}

fn positive(ctx: &Ctx, key: &str, t: &toml::map::Map<String, Value>, default: f64) -> Result<f64, ConfigError> {
    match t.get(key) {
        None => Ok(default),
        Some(v) => {
            let x = ctx.num(key, v)?;
            if x > 0.0 {
                Ok(x)
            } else {
                Err(ctx.err(key, "must be positive"))
            }
        }
    }
}

fn parse_tolerances(ctx: &Ctx, v: &Value) -> Result<Tolerances, ConfigError> {
    let t = table(ctx, v, &["leak", "newton", "newton_iterations", "step"])?;
    let d = Tolerances::default();
    let newton_iterations = t
        .get("newton_iterations")
        .map(|v| ctx.count("newton_iterations", v))
        .transpose()?
        .unwrap_or(d.newton_iterations);
    if newton_iterations == 0 || newton_iterations > 10_000 {
        return Err(ctx.err("newton_iterations", "must be between 1 and 10000"));
    }
    Ok(Tolerances {
        leak: positive(ctx, "leak", t, d.leak)?,
        newton: positive(ctx, "newton", t, d.newton)?,
        newton_iterations,
        step: positive(ctx, "step", t, d.step)?,
    })
}

fn parse_output(ctx: &Ctx, v: &Value) -> Result<Output, ConfigError> {
    let t = table(ctx, v, &["dir", "boundary_points", "moments"])?;
    let dir = t
        .get("dir")
        .map(|v| ctx.string("dir", v).map(str::to_string))
        .transpose()?;
    let boundary_points = t
        .get("boundary_points")
        .map(|v| ctx.count("boundary_points", v))
        .transpose()?
        .unwrap_or(64);
    if !(8..=65_536).contains(&boundary_points) {
        return Err(ctx.err("boundary_points", "must be between 8 and 65536"));
    }
    let moments = t.get("moments").map(|v| ctx.count("moments", v)).transpose()?;
    if matches!(moments, Some(k) if k == 0 || k > 64) {
        return Err(ctx.err("moments", "must be between 1 and 64"));
    }
    Ok(Output {
        dir,
        boundary_points,
        moments,
    })
}

fn parse_bihamiltonian(ctx: &Ctx, v: &Value) -> Result<Bihamiltonian, ConfigError> {
    let t = table(ctx, v, &["orders", "points", "indices", "fixture", "rho", "lambda"])?;
    let d = Bihamiltonian::default();
    let orders = t
        .get("orders")
        .map(|v| ctx.count_list("orders", v))
        .transpose()?
        .unwrap_or(d.orders);
    if orders.is_empty() || orders.iter().any(|&o| o > 4) {
        return Err(ctx.err("orders", "orders must lie in 0..=4"));
    }
    let points = t
        .get("points")
        .map(|v| ctx.count_list("points", v))
        .transpose()?
        .unwrap_or(d.points);
    if points.is_empty() || points.iter().any(|&m| !(8..=8192).contains(&m) || !m.is_power_of_two()) {
        return Err(ctx.err("points", "grid sizes must be powers of two between 8 and 8192"));
    }
    let indices = t
        .get("indices")
        .map(|v| ctx.count_list("indices", v))
        .transpose()?
        .unwrap_or(d.indices);
    if indices.is_empty() || indices.iter().any(|&i| !(1..=4).contains(&i)) {
        return Err(ctx.err("indices", "indices must lie in 1..=4"));
    }
    let fixture = match t.get("fixture").map(|v| ctx.string("fixture", v)).transpose()? {
        None | Some("sine") => GridFixture::Sine,
        Some("poisson") => {
            let rho = t.get("rho").map(|v| ctx.num("rho", v)).transpose()?.unwrap_or(0.85);
            if !(rho > 0.0 && rho < 1.0) {
                return Err(ctx.err("rho", "must lie in (0, 1)"));
            }
            GridFixture::Poisson { rho }
        }
        Some(other) => {
            return Err(ctx.err(
                "fixture",
                format!("unknown grid fixture `{other}`; expected sine or poisson"),
            ))
        }
    };
    let lambda = t
        .get("lambda")
        .map(|v| ctx.num("lambda", v))
        .transpose()?
        .unwrap_or(d.lambda);
    if lambda == 0.0 {
        return Err(ctx.err("lambda", "must be nonzero"));
    }
    Ok(Bihamiltonian {
        orders,
        points,
        indices,
        fixture,
        lambda,
    })
}

/// Parses and validates a configuration without touching the file system.
pub fn parse_run_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Value = text.parse::<toml::Table>().map(Value::Table).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError {
            line,
            field: "(syntax)".into(),
            msg: e.message().to_string(),
        }
    })?;
    let ctx = |section: &'static str, index: usize| Ctx {
        loc: Locator { text },
        section,
        index,
    };
    let root = table(
        &ctx("", 0),
        &doc,
        &[
            "seed",
            "map",
            "evolution",
            "flows",
            "tolerances",
            "output",
            "bihamiltonian",
        ],
    )?;
    let mut cfg = RunConfig {
        echo: doc.clone(),
        ..RunConfig::default()
    };
    if let Some(s) = root.get("seed") {
        cfg.seed = ctx("", 0).count("seed", s)? as u64;
    }
    if let Some(m) = root.get("map") {
        let c = ctx("map", 0);
        let source = parse_map(&c, m)?;
        if let MapSource::Random { kind, order } = source {
            fixtures::random_physical(kind, order, cfg.seed).map_err(|e| c.err("random", e.to_string()))?;
        }
        cfg.map = Some(source);
    }
    if let Some(e) = root.get("evolution") {
        cfg.evolution = Some(parse_evolution(&ctx("evolution", 0), e)?);
    }
    if let Some(f) = root.get("flows") {
        let list = f
            .as_array()
            .ok_or_else(|| ctx("flows", 0).err("", "use [[flows]] entries"))?;
        let map = cfg.map();
        for (i, item) in list.iter().enumerate() {
            cfg.flows.push(parse_flow(&ctx("flows", i), item, map.as_ref())?);
        }
    }
    if let Some(t) = root.get("tolerances") {
        cfg.tolerances = parse_tolerances(&ctx("tolerances", 0), t)?;
    }
    if let Some(o) = root.get("output") {
        cfg.output = parse_output(&ctx("output", 0), o)?;
    }
    if let Some(b) = root.get("bihamiltonian") {
        cfg.bihamiltonian = parse_bihamiltonian(&ctx("bihamiltonian", 0), b)?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_polynomial_map() {
        let cfg = parse_run_config(
            r#"
[map]
kind = "polynomial"
r = "1.0"
u = [[0.1, 0.05], [0.15, -0.1], ["0.12", "0.08"]]
"#,
        )
        .unwrap();
        assert_eq!(cfg.map().unwrap(), fixtures::blob());
    }

    #[test]
    fn charges_that_do_not_sum_to_zero_are_located() {
        let text = "seed = 1\n[map]\nkind = \"logarithmic\"\nr = 1\nu = 0.1\nbranches = [{a = \"1/2\", w = [0.2, 0.1]}, {a = -1, w = [0.4, 0]}]\n";
        let e = parse_run_config(text).unwrap_err();
        assert_eq!(e.line, Some(6));
        assert_eq!(e.field, "map.branches");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let e = parse_run_config("[map]\nkind = \n").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn flows_are_checked_against_the_map() {
        let text = "[map]\nfixture = \"log_one\"\n[[flows]]\nfunction = \"logarithmic\"\nindex = 1\n[[flows]]\nfunction = \"logarithmic\"\nindex = 3\n";
        let e = parse_run_config(text).unwrap_err();
        assert_eq!(e.field, "flows[1].index");
        assert_eq!(e.line, Some(8));
        let text = "[map]\nfixture = \"blob\"\n[[flows]]\nfunction = \"krichever\"\nindex = 0\n";
        assert!(parse_run_config(text).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_run_config("[output]\ndir = \"x\"\nformat = \"csv\"\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn seed_override_redraws_random_maps() {
        let cfg = parse_run_config("[map]\nkind = \"rational\"\nrandom = true\norder = 2\n").unwrap();
        let a = cfg.map().unwrap();
        let b = cfg.clone().with_seed(5).unwrap().map().unwrap();
        assert_ne!(a, b);
        assert_eq!(b, fixtures::random_physical(MapKind::Rational, 2, 5).unwrap());
    }
}
