//! Scenario files.
//!
//! A scenario is plain text: `key = value` lines, `[kind name]` section
//! headers, `#` comments. Entries before the first header configure the
//! run; entries after a header belong to that section. See the README for
//! the grammar.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::foliation::FoliationModule;
use crate::lie2::{u1, GroupAction, LieGroupModel};
use crate::quotient::{FibrationProbe, SubmersionQuotient};
use crate::sampling::Region;
use crate::symcore::{parse_expr, ChartManifold, Coordinate, Expr, Params, SmoothMap, VectorField};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-5;
/// Points at which involutivity is sampled when a foliation is loaded.
pub const INVOLUTIVITY_SAMPLES: usize = 60;

/// The scenarios shipped with the library.
pub const BUILTINS: [(&str, &str); 4] = [
    ("cylinder", include_str!("../../scenarios/cylinder.scn")),
    ("spiral", include_str!("../../scenarios/spiral.scn")),
    ("punctured", include_str!("../../scenarios/punctured.scn")),
    ("cylinder-pullback", include_str!("../../scenarios/cylinder-pullback.scn")),
];

/// A validated scenario. Collections keep declaration order.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    pub params: Params,
    pub seed: u64,
    pub budget: usize,
    pub tol: f64,
    pub checks: Vec<String>,
    pub probes: Vec<FibrationProbe>,
    pub manifolds: Vec<(String, Arc<ChartManifold>)>,
    pub groups: Vec<(String, Arc<LieGroupModel>)>,
    pub foliations: Vec<(String, FoliationModule)>,
    pub actions: Vec<(String, Arc<GroupAction>)>,
    pub submersions: Vec<(String, Arc<SubmersionQuotient>)>,
    /// Connectedness of the fibers of each submersion as declared.
    pub connected_fibers: Vec<bool>,
    source: String,
}

impl Scenario {
    /// A built-in scenario by name, or a file path.
    pub fn load(name_or_path: &str) -> Result<Scenario> {
        match Self::builtin(name_or_path) {
            Some(s) => s,
            None => Self::from_path(name_or_path),
        }
    }

    pub fn builtin(name: &str) -> Option<Result<Scenario>> {
        BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, src)| Self::parse(src))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Scenario> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(src: &str) -> Result<Scenario> {
        let doc = split(src)?;
        build(doc, src)
    }

    /// The text the scenario was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn foliation(&self) -> Result<&FoliationModule> {
        self.foliations.first().map(|f| &f.1).ok_or_else(|| missing("foliation"))
    }

    pub fn quotient(&self) -> Result<&Arc<SubmersionQuotient>> {
        self.submersions.first().map(|q| &q.1).ok_or_else(|| missing("submersion"))
    }

    /// The action of the first submersion, else the first declared action.
    pub fn action(&self) -> Result<&Arc<GroupAction>> {
        self.submersions
            .first()
            .and_then(|q| q.1.action())
            .or_else(|| self.actions.first().map(|a| &a.1))
            .ok_or_else(|| missing("action"))
    }

    pub fn manifold(&self) -> Result<&Arc<ChartManifold>> {
        Ok(self.foliation()?.manifold())
    }
}

fn missing(what: &str) -> Error {
    Error::Precondition(format!("scenario declares no {what}"))
}

fn at(line: usize, message: impl Into<String>) -> Error {
    Error::Scenario {
        line,
        message: message.into(),
    }
}

fn wrap(line: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Scenario { .. } => e,
        other => at(line, other.to_string()),
    }
}

#[derive(Debug)]
struct Entry {
    line: usize,
    key: String,
    label: Option<String>,
    value: String,
}

#[derive(Debug)]
struct Section {
    line: usize,
    kind: String,
    name: String,
    entries: Vec<Entry>,
}

#[derive(Debug, Default)]
struct Doc {
    top: Vec<Entry>,
    sections: Vec<Section>,
}

const KINDS: [&str; 5] = ["manifold", "group", "foliation", "action", "submersion"];

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|c| c.is_alphabetic() || c == '_') && c.all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

fn split(src: &str) -> Result<Doc> {
    let mut doc = Doc::default();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if let Some(inner) = text.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| at(line, "section header lacks `]`"))?;
            let words: Vec<&str> = inner.split_whitespace().collect();
            let [kind, name] = words[..] else {
                return Err(at(line, "section header must be `[kind name]`"));
            };
            if !KINDS.contains(&kind) {
                return Err(at(line, format!("unknown section kind `{kind}`")));
            }
            if !is_ident(name) {
                return Err(at(line, format!("bad name `{name}`")));
            }
            if doc.sections.iter().any(|s| s.kind == kind && s.name == name) {
                return Err(at(line, format!("duplicate {kind} `{name}`")));
            }
            doc.sections.push(Section {
                line,
                kind: kind.into(),
                name: name.into(),
                entries: Vec::new(),
            });
            continue;
        }
        let (lhs, rhs) = text.split_once('=').ok_or_else(|| at(line, "expected `key = value`"))?;
        let words: Vec<&str> = lhs.split_whitespace().collect();
        let (key, label) = match words[..] {
            [k] => (k, None),
            [k, l] if is_ident(l) => (k, Some(l.to_string())),
            _ => return Err(at(line, format!("bad key `{}`", lhs.trim()))),
        };
        let value = rhs.trim();
        if value.is_empty() {
            return Err(at(line, format!("`{key}` has no value")));
        }
        let e = Entry {
            line,
            key: key.into(),
            label,
            value: value.into(),
        };
        match doc.sections.last_mut() {
            Some(s) => s.entries.push(e),
            None => doc.top.push(e),
        }
    }
    Ok(doc)
}

/// Allowed keys per context: `(key, needs label, repeatable)`.
fn check_keys(ctx: &str, entries: &[Entry], allowed: &[(&str, bool, bool)]) -> Result<()> {
    let mut seen = HashSet::new();
    for e in entries {
        let Some(&(_, labelled, repeat)) = allowed.iter().find(|a| a.0 == e.key) else {
            return Err(at(e.line, format!("unknown key `{}` in {ctx}", e.key)));
        };
        if labelled != e.label.is_some() {
            let msg = if labelled { "needs a name" } else { "takes no name" };
            return Err(at(e.line, format!("`{}` {msg}", e.key)));
        }
        if !repeat && !seen.insert(e.key.as_str()) {
            return Err(at(e.line, format!("`{}` given twice", e.key)));
        }
    }
    Ok(())
}

fn one<'a>(s: &'a Section, key: &str) -> Result<&'a Entry> {
    s.entries
        .iter()
        .find(|e| e.key == key)
        .ok_or_else(|| at(s.line, format!("{} `{}` lacks `{key}`", s.kind, s.name)))
}

fn all<'a>(s: &'a Section, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
    s.entries.iter().filter(move |e| e.key == key)
}

/// Splits `open a, b, c close` at top-level commas.
fn split_list(line: usize, src: &str, open: char, close: char) -> Result<Vec<String>> {
    let s = src.trim();
    let inner = s
        .strip_prefix(open)
        .and_then(|r| r.strip_suffix(close))
        .ok_or_else(|| at(line, format!("expected `{open}…{close}`, found `{s}`")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur.trim().to_string());
    if out.iter().any(String::is_empty) {
        return Err(at(line, "empty list item"));
    }
    Ok(out)
}

struct Ctx {
    params: Params,
    param_names: Vec<String>,
}

impl Ctx {
    fn expr(&self, line: usize, src: &str, coords: &[String]) -> Result<Expr> {
        Ok(parse_expr(src, coords, &self.param_names).map_err(wrap(line))?.bind(&self.params))
    }

    fn number(&self, line: usize, src: &str) -> Result<f64> {
        self.expr(line, src, &[])?.eval_at(&[]).map_err(wrap(line))
    }

    fn exprs(&self, e: &Entry, coords: &[String], len: usize) -> Result<Vec<Expr>> {
        let items = split_list(e.line, &e.value, '[', ']')?;
        if items.len() != len {
            return Err(at(e.line, format!("expected {len} components, found {}", items.len())));
        }
        items.iter().map(|s| self.expr(e.line, s, coords)).collect()
    }

    fn numbers(&self, line: usize, src: &str, open: char, close: char) -> Result<Vec<f64>> {
        split_list(line, src, open, close)?.iter().map(|s| self.number(line, s)).collect()
    }
}

fn lookup<'a, T>(items: &'a [(String, T)], e: &Entry, what: &str) -> Result<&'a T> {
    items
        .iter()
        .find(|(n, _)| *n == e.value)
        .map(|(_, t)| t)
        .ok_or_else(|| at(e.line, format!("unknown {what} `{}`", e.value)))
}

fn build(doc: Doc, src: &str) -> Result<Scenario> {
    if doc.top.is_empty() && doc.sections.is_empty() {
        return Err(at(1, "empty scenario"));
    }
    check_keys("scenario header",
        &doc.top,
        &[
            ("name", false, false),
            ("param", true, true),
            ("seed", false, false),
            ("budget", false, false),
            ("tol", false, false),
            ("check", false, true),
            ("probe", false, true),
        ],
    )?;
    let mut ctx = Ctx {
        params: Params::new(),
        param_names: Vec::new(),
    };
    let mut name = String::from("scenario");
    let mut seed = DEFAULT_SEED;
    let mut budget = DEFAULT_BUDGET;
    let mut tol = DEFAULT_TOL;
    let mut checks = Vec::new();
    let mut raw_probes = Vec::new();
    for e in &doc.top {
        match e.key.as_str() {
            "name" => name = e.value.clone(),
            "param" => {
                let p = e.label.clone().unwrap_or_default();
                if ctx.param_names.contains(&p) {
                    return Err(at(e.line, format!("parameter `{p}` given twice")));
                }
                let v = ctx.number(e.line, &e.value)?;
                ctx.params.insert(p.clone(), v);
                ctx.param_names.push(p);
            }
            "seed" => seed = e.value.parse().map_err(|_| at(e.line, "seed must be a non-negative integer"))?,
            "budget" => budget = e.value.parse().map_err(|_| at(e.line, "budget must be a non-negative integer"))?,
            "tol" => {
                tol = ctx.number(e.line, &e.value)?;
                if !(tol > 0.0) {
                    return Err(at(e.line, "tol must be positive"));
                }
            }
            "check" => checks.push(e.value.clone()),
            "probe" => raw_probes.push(e),
            _ => unreachable!(),
        }
    }
    for c in &checks {
        if !crate::checks::CHECKS.iter().any(|k| k.0 == c) {
            let line = doc.top.iter().find(|e| e.key == "check" && e.value == *c).map_or(0, |e| e.line);
            return Err(at(line, format!("unknown check `{c}`")));
        }
    }
    let of_kind = |k: &'static str| doc.sections.iter().filter(move |s| s.kind == k);

    let mut manifolds: Vec<(String, Arc<ChartManifold>)> = Vec::new();
    for s in of_kind("manifold") {
        check_keys("manifold", &s.entries, &[("coord", true, true), ("domain", false, true)])?;
        let mut coords = Vec::new();
        for e in all(s, "coord") {
            let label = e.label.as_deref().unwrap_or_default();
            if coords.iter().any(|c: &Coordinate| c.name == label) {
                return Err(at(e.line, format!("coordinate `{label}` given twice")));
            }
            let v = e.value.trim();
            coords.push(if v == "line" {
                Coordinate::line(label)
            } else if let Some(period) = v.strip_prefix("circle") {
                Coordinate::circle(label, ctx.number(e.line, period)?)
            } else {
                return Err(at(e.line, format!("coordinate kind must be `line` or `circle <period>`, found `{v}`")));
            });
        }
        let names: Vec<String> = coords.iter().map(|c| c.name.clone()).collect();
        let domain = all(s, "domain").map(|e| ctx.expr(e.line, &e.value, &names)).collect::<Result<Vec<_>>>()?;
        let m = ChartManifold::new(&s.name, coords).and_then(|m| m.with_domain(domain)).map_err(wrap(s.line))?;
        manifolds.push((s.name.clone(), Arc::new(m)));
    }
    let manifold_of = |e: &Entry| -> Result<Arc<ChartManifold>> { lookup(&manifolds, e, "manifold").cloned() };

    let mut groups: Vec<(String, Arc<LieGroupModel>)> = Vec::new();
    for s in of_kind("group") {
        check_keys("group", &s.entries, &[("kind", false, false)])?;
        let e = one(s, "kind")?;
        let words: Vec<&str> = e.value.splitn(2, char::is_whitespace).collect();
        let g = match words[..] {
            ["u1"] => u1(),
            ["trivial"] => LieGroupModel::trivial(),
            ["real", n] => LieGroupModel::real_vector(n.trim().parse().map_err(|_| at(e.line, "`real` needs a dimension"))?),
            ["circle", p] => LieGroupModel::circle(ctx.number(e.line, p)?).map_err(wrap(e.line))?,
            _ => return Err(at(e.line, format!("unknown group kind `{}`", e.value))),
        };
        groups.push((s.name.clone(), Arc::new(g)));
    }

    let mut foliations = Vec::new();
    for s in of_kind("foliation") {
        check_keys("foliation", &s.entries, &[("on", false, false), ("gen", true, true)])?;
        let m = manifold_of(one(s, "on")?)?;
        let gens = all(s, "gen")
            .map(|e| {
                let comps = ctx.exprs(e, m.coord_names(), m.dim())?;
                let x = VectorField::new(m.clone(), comps).map_err(wrap(e.line))?;
                Ok((e.label.clone().unwrap_or_default(), x))
            })
            .collect::<Result<Vec<_>>>()?;
        let f = if gens.is_empty() {
            FoliationModule::zero(m.clone())
        } else {
            FoliationModule::new(m.clone(), gens).map_err(wrap(s.line))?
        };
        let region = Region::default_for(&m).with_samples(INVOLUTIVITY_SAMPLES);
        let inv = f.involutivity_check(&region).map_err(wrap(s.line))?;
        if let Some(b) = inv.failures.first() {
            return Err(at(
                s.line,
                format!("foliation `{}` is not involutive: [{}, {}] leaves the module", s.name, b.pair.0, b.pair.1),
            ));
        }
        foliations.push((s.name.clone(), f));
    }

    let mut actions: Vec<(String, Arc<GroupAction>)> = Vec::new();
    for s in of_kind("action") {
        check_keys("action", &s.entries, &[("group", false, false), ("on", false, false), ("map", false, false)])?;
        let g = lookup(&groups, one(s, "group")?, "group")?.clone();
        let m = manifold_of(one(s, "on")?)?;
        let mut names: Vec<String> = g.manifold().coord_names().to_vec();
        if let Some(c) = m.coord_names().iter().find(|c| names.contains(c)) {
            return Err(at(s.line, format!("coordinate `{c}` clashes with a group coordinate")));
        }
        names.extend(m.coord_names().iter().cloned());
        let e = one(s, "map")?;
        let map = ctx.exprs(e, &names, m.dim())?;
        let a = GroupAction::new(g, m, map).map_err(wrap(e.line))?;
        actions.push((s.name.clone(), Arc::new(a)));
    }

    let mut submersions = Vec::new();
    let mut connected_fibers = Vec::new();
    for s in of_kind("submersion") {
        check_keys("submersion",
            &s.entries,
            &[
                ("from", false, false),
                ("to", false, false),
                ("map", false, false),
                ("section", false, false),
                ("vertical", false, true),
                ("action", false, false),
                ("fibers", false, false),
            ],
        )?;
        let p = manifold_of(one(s, "from")?)?;
        let m = manifold_of(one(s, "to")?)?;
        let e = one(s, "map")?;
        let comps = ctx.exprs(e, p.coord_names(), m.dim())?;
        let section = match s.entries.iter().find(|e| e.key == "section") {
            Some(e) => Some(ctx.exprs(e, m.coord_names(), p.dim())?),
            None => None,
        };
        let map = SmoothMap::new(p.clone(), m, comps, section).map_err(wrap(e.line))?;
        let verticals = all(s, "vertical")
            .map(|e| VectorField::new(p.clone(), ctx.exprs(e, p.coord_names(), p.dim())?).map_err(wrap(e.line)))
            .collect::<Result<Vec<_>>>()?;
        let q = match s.entries.iter().find(|e| e.key == "action") {
            Some(e) => {
                if !verticals.is_empty() {
                    return Err(at(e.line, "give either `action` or `vertical`, not both"));
                }
                let a = lookup(&actions, e, "action")?.clone();
                if !Arc::ptr_eq(a.manifold(), &p) {
                    return Err(at(e.line, format!("action `{}` does not act on the source of `{}`", e.value, s.name)));
                }
                SubmersionQuotient::from_action(map, a).map_err(wrap(e.line))?
            }
            None => SubmersionQuotient::new(map, verticals).map_err(wrap(s.line))?,
        };
        let connected = match s.entries.iter().find(|e| e.key == "fibers") {
            None => true,
            Some(e) => match e.value.as_str() {
                "connected" => true,
                "disconnected" => false,
                v => return Err(at(e.line, format!("`fibers` must be `connected` or `disconnected`, found `{v}`"))),
            },
        };
        submersions.push((s.name.clone(), Arc::new(q)));
        connected_fibers.push(connected);
    }
    if foliations.is_empty() {
        return Err(at(doc.sections.last().map_or(1, |s| s.line), "scenario declares no foliation"));
    }

    let mut probes = Vec::new();
    for e in raw_probes {
        let (pt, co) = e.value.split_once(':').ok_or_else(|| at(e.line, "probe must be `(point) : [coefficients]`"))?;
        let point = ctx.numbers(e.line, pt, '(', ')')?;
        let coeffs = ctx.numbers(e.line, co, '[', ']')?;
        let q = submersions.first().map(|q| &q.1).ok_or_else(|| at(e.line, "probe without a submersion"))?;
        if point.len() != q.source().dim() {
            return Err(at(e.line, format!("probe point has {} coordinates, expected {}", point.len(), q.source().dim())));
        }
        probes.push(FibrationProbe { point, coeffs });
    }

    Ok(Scenario {
        name,
        params: ctx.params,
        seed,
        budget,
        tol,
        checks,
        probes,
        manifolds,
        groups,
        foliations,
        actions,
        submersions,
        connected_fibers,
        source: src.to_string(),
    })
}
