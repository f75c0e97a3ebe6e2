//! Line-oriented system definition files.
//!
//! ```text
//! # comment
//! [section]
//! key = value        # a trailing backslash continues the value on the next line
//! ```
//!
//! Expression values use the library's expression grammar. Every identifier
//! must be declared as a coordinate, momentum, parameter or Darboux target.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use emergent::pathint::{LatticeConfig, Mode};
use emergent::reduction::builtin::Model;
use emergent::reduction::{CanonicalMap, ConstraintSpec};
use emergent::symplectic::{Charge, HooftSystem, PhaseSpace};
use emergent::{parse, Chart, Expr, Role, Symbol, SymbolTable};

/// Malformed or inconsistent input; the CLI maps it to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Debug, Default)]
struct Raw {
    sections: BTreeMap<String, Vec<Entry>>,
    /// Line of each section header.
    headers: BTreeMap<String, usize>,
}

const SECTIONS: &[&str] =
    &["system", "charges", "rho", "constraint", "chart", "darboux", "target_chart", "params", "lattice", "anomaly", "checks"];

#[derive(Debug, Clone, Copy)]
pub struct Checks {
    pub points: usize,
    pub tol: f64,
    pub liouville_tol: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Checks { points: 100, tol: 1e-9, liouville_tol: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub enum Amplitude {
    /// Lattice propagation of the emergent quantum system.
    Quantum,
    /// Delta-squeezed classical amplitude between two endpoints.
    Classical { q1: f64, q2: f64, steps: usize },
}

#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub config: LatticeConfig,
    pub amplitude: Amplitude,
}

#[derive(Debug, Clone, Default)]
pub struct AnomalySpec {
    pub generating_function: Option<Expr>,
    /// Overrides applied to the source chart when checking `F`.
    pub generating_chart: Vec<(Symbol, f64, f64)>,
    pub reference: BTreeMap<String, Expr>,
    pub sliced: bool,
}

#[derive(Debug, Clone)]
pub struct SystemFile {
    pub path: PathBuf,
    pub name: String,
    pub system: HooftSystem,
    pub constraint: ConstraintSpec,
    /// Extra substitutions describing the full constraint surface (beyond the eliminated symbol).
    pub surface: BTreeMap<Symbol, Expr>,
    pub chart: Chart,
    pub map: Option<CanonicalMap>,
    pub params: Vec<(Symbol, f64)>,
    pub mass: f64,
    pub hbar: f64,
    pub lattice: Option<LatticeSpec>,
    pub anomaly: Option<AnomalySpec>,
    pub checks: Checks,
}

impl SystemFile {
    pub fn model(&self) -> Result<Model, UsageError> {
        let map = self.map.clone().ok_or_else(|| self.missing("darboux"))?;
        Ok(Model {
            name: self.name.clone(),
            system: self.system.clone(),
            constraint: self.constraint.clone(),
            map,
            chart: self.chart.clone(),
        })
    }

    pub fn missing(&self, section: &str) -> UsageError {
        UsageError(format!("{}: no [{section}] section", self.path.display()))
    }

    pub fn load(path: &Path) -> Result<SystemFile, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("{}: cannot read: {e}", path.display())))?;
        parse_file(&text, path)
    }
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, line: usize, msg: impl fmt::Display) -> UsageError {
        UsageError(format!("{}:{line}: {msg}", self.path.display()))
    }
}

fn split_raw(text: &str, ctx: &Ctx) -> Result<Raw, UsageError> {
    let mut raw = Raw::default();
    let mut current: Option<String> = None;
    let mut pending: Option<Entry> = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if let Some(mut entry) = pending.take() {
            let (part, more) = match body.strip_suffix('\\') {
                Some(p) => (p.trim(), true),
                None => (body, false),
            };
            entry.value.push(' ');
            entry.value.push_str(part);
            if more {
                pending = Some(entry);
            } else {
                let sec = current.clone().expect("entries only inside sections");
                raw.sections.entry(sec).or_default().push(entry);
            }
            continue;
        }
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ctx.err(n, format!("unknown section [{name}]")));
            }
            if raw.headers.insert(name.clone(), n).is_some() {
                return Err(ctx.err(n, format!("section [{name}] repeated")));
            }
            raw.sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some(sec) = &current else {
            return Err(ctx.err(n, "entry outside any section"));
        };
        let Some((k, v)) = body.split_once('=') else {
            return Err(ctx.err(n, "expected `key = value`"));
        };
        let mut entry = Entry { line: n, key: k.trim().to_string(), value: v.trim().to_string() };
        if let Some(p) = entry.value.strip_suffix('\\') {
            entry.value = p.trim().to_string();
            pending = Some(entry);
            continue;
        }
        raw.sections.entry(sec.clone()).or_default().push(entry);
    }
    if let Some(e) = pending {
        return Err(ctx.err(e.line, "continuation runs past end of file"));
    }
    Ok(raw)
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn number(e: &Entry, ctx: &Ctx) -> Result<f64, UsageError> {
    e.value.parse().map_err(|_| ctx.err(e.line, format!("`{}` is not a number", e.value)))
}

fn integer(e: &Entry, ctx: &Ctx) -> Result<usize, UsageError> {
    e.value.parse().map_err(|_| ctx.err(e.line, format!("`{}` is not a non-negative integer", e.value)))
}

fn range(e: &Entry, ctx: &Ctx) -> Result<(f64, f64), UsageError> {
    let parts = list(&e.value);
    if parts.len() != 2 {
        return Err(ctx.err(e.line, "expected `lo, hi`"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| ctx.err(e.line, "bad lower bound"))?;
    let hi: f64 = parts[1].parse().map_err(|_| ctx.err(e.line, "bad upper bound"))?;
    if !(lo <= hi) {
        return Err(ctx.err(e.line, "empty range"));
    }
    Ok((lo, hi))
}

fn section<'r>(raw: &'r Raw, name: &str) -> &'r [Entry] {
    raw.sections.get(name).map(|v| v.as_slice()).unwrap_or(&[])
}

fn find<'r>(raw: &'r Raw, sec: &str, key: &str) -> Option<&'r Entry> {
    section(raw, sec).iter().find(|e| e.key == key)
}

fn required<'r>(raw: &'r Raw, sec: &str, key: &str, ctx: &Ctx) -> Result<&'r Entry, UsageError> {
    find(raw, sec, key).ok_or_else(|| {
        let line = raw.headers.get(sec).copied().unwrap_or(0);
        ctx.err(line, format!("[{sec}] needs `{key}`"))
    })
}

fn expr(e: &Entry, table: &SymbolTable, ctx: &Ctx) -> Result<Expr, UsageError> {
    parse(&e.value, table).map_err(|err| ctx.err(e.line, format!("in `{}`: {err}", e.value)))
}

fn declared(table: &SymbolTable, name: &str, line: usize, ctx: &Ctx) -> Result<Symbol, UsageError> {
    table.get(name).cloned().ok_or_else(|| ctx.err(line, format!("`{name}` is not declared")))
}

fn chart_from(entries: &[Entry], table: &SymbolTable, ctx: &Ctx) -> Result<Chart, UsageError> {
    let mut chart = Chart::new();
    for e in entries {
        if e.key == "require" {
            let Some((ex, r)) = e.value.rsplit_once(':') else {
                return Err(ctx.err(e.line, "expected `require = expr : lo, hi`"));
            };
            let sub = Entry { line: e.line, key: String::new(), value: ex.trim().to_string() };
            let bounds = Entry { line: e.line, key: String::new(), value: r.trim().to_string() };
            let (lo, hi) = range(&bounds, ctx)?;
            chart.add_constraint(expr(&sub, table, ctx)?, lo, hi);
        } else {
            let s = declared(table, &e.key, e.line, ctx)?;
            let (lo, hi) = range(e, ctx)?;
            chart.set_range(s, lo, hi);
        }
    }
    Ok(chart)
}

pub fn parse_file(text: &str, path: &Path) -> Result<SystemFile, UsageError> {
    let ctx = Ctx { path };
    let raw = split_raw(text, &ctx)?;
    for sec in ["system", "constraint", "chart"] {
        if !raw.headers.contains_key(sec) {
            return Err(UsageError(format!("{}: no [{sec}] section", path.display())));
        }
    }

    let name = find(&raw, "system", "name").map(|e| e.value.clone()).unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    let coords_e = required(&raw, "system", "coordinates", &ctx)?;
    let moms_e = required(&raw, "system", "momenta", &ctx)?;
    let coords = list(&coords_e.value);
    let moms = list(&moms_e.value);
    let params: Vec<String> = find(&raw, "system", "parameters").map(|e| list(&e.value)).unwrap_or_default();

    let mut table = SymbolTable::new();
    let declare = |table: &mut SymbolTable, names: &[String], role: Role, line: usize| -> Result<(), UsageError> {
        for n in names {
            table.declare(n, role).map_err(|e| ctx.err(line, e))?;
        }
        Ok(())
    };
    declare(&mut table, &coords, Role::Coordinate, coords_e.line)?;
    declare(&mut table, &moms, Role::Momentum, moms_e.line)?;
    let params_line = find(&raw, "system", "parameters").map(|e| e.line).unwrap_or(0);
    declare(&mut table, &params, Role::Parameter, params_line)?;

    let target = if raw.headers.contains_key("darboux") {
        let tc = required(&raw, "darboux", "coordinates", &ctx)?;
        let tm = required(&raw, "darboux", "momenta", &ctx)?;
        let (tcs, tms) = (list(&tc.value), list(&tm.value));
        declare(&mut table, &tcs, Role::Coordinate, tc.line)?;
        declare(&mut table, &tms, Role::Momentum, tm.line)?;
        Some((tcs, tms, tc.line))
    } else {
        None
    };

    let sym = |n: &String| Symbol::new(n);
    let phase_space = PhaseSpace::new(coords.iter().map(sym).collect(), moms.iter().map(sym).collect())
        .map_err(|e| ctx.err(coords_e.line, e))?;

    // [system]
    let mut velocities = Vec::new();
    for c in &coords {
        let e = required(&raw, "system", &format!("f.{c}"), &ctx)?;
        velocities.push(expr(e, &table, &ctx)?);
    }
    for e in section(&raw, "system") {
        let known = ["name", "coordinates", "momenta", "parameters", "potential"];
        let ok = known.contains(&e.key.as_str())
            || e.key.strip_prefix("f.").is_some_and(|c| coords.iter().any(|k| k == c));
        if !ok {
            return Err(ctx.err(e.line, format!("unknown key `{}` in [system]", e.key)));
        }
    }

    // [charges]
    let mut charges = Vec::new();
    for e in section(&raw, "charges") {
        charges.push(Charge::new(&e.key, expr(e, &table, &ctx)?));
    }

    // [rho]: either `rho = expr` or per-charge coefficients `C1 = a1`.
    let mut rho = Expr::zero();
    let rho_line = raw.headers.get("rho").copied().unwrap_or(0);
    for e in section(&raw, "rho") {
        let v = expr(e, &table, &ctx)?;
        if e.key == "rho" {
            rho = rho + v;
        } else {
            let c = charges
                .iter()
                .find(|c| c.name == e.key)
                .ok_or_else(|| ctx.err(e.line, format!("no charge named `{}`", e.key)))?;
            rho = rho + v * &c.expr;
        }
    }
    if rho.is_zero() {
        return Err(ctx.err(rho_line, "rho is missing or zero"));
    }
    let mut system = HooftSystem::new(phase_space, velocities, charges, rho, params.iter().map(sym).collect())
        .map_err(|e| ctx.err(coords_e.line, e))?;
    if let Some(e) = find(&raw, "system", "potential") {
        system = system.with_potential(expr(e, &table, &ctx)?).map_err(|err| ctx.err(e.line, err))?;
    }

    // [constraint]
    let phi_e = required(&raw, "constraint", "phi", &ctx)?;
    let phi = expr(phi_e, &table, &ctx)?;
    let el_e = required(&raw, "constraint", "eliminate", &ctx)?;
    let eliminated = declared(&table, &el_e.value, el_e.line, &ctx)?;
    if !system.phase_space.xi().contains(&eliminated) {
        return Err(ctx.err(el_e.line, format!("`{eliminated}` is not a phase-space variable")));
    }
    let mut constraint = match find(&raw, "constraint", "solution") {
        Some(e) => ConstraintSpec::new(phi, eliminated, expr(e, &table, &ctx)?),
        None => ConstraintSpec::solve_linear(phi, eliminated).map_err(|err| ctx.err(el_e.line, err))?,
    };
    if let Some(e) = find(&raw, "constraint", "chi") {
        constraint = constraint.with_gauge(expr(e, &table, &ctx)?);
    }
    let mut surface = BTreeMap::new();
    for e in section(&raw, "constraint") {
        if let Some(s) = e.key.strip_prefix("surface.") {
            surface.insert(declared(&table, s, e.line, &ctx)?, expr(e, &table, &ctx)?);
        } else if !["phi", "eliminate", "solution", "chi"].contains(&e.key.as_str()) {
            return Err(ctx.err(e.line, format!("unknown key `{}` in [constraint]", e.key)));
        }
    }

    let chart = chart_from(section(&raw, "chart"), &table, &ctx)?;

    // [darboux]
    let map = match target {
        None => None,
        Some((tcs, tms, line)) => {
            let target_ps = PhaseSpace::new(tcs.iter().map(sym).collect(), tms.iter().map(sym).collect())
                .map_err(|e| ctx.err(line, e))?;
            let mut forward = BTreeMap::new();
            let mut inverse = BTreeMap::new();
            for e in section(&raw, "darboux") {
                if e.key == "coordinates" || e.key == "momenta" {
                    continue;
                }
                if let Some(s) = e.key.strip_prefix("inverse.") {
                    let s = declared(&table, s, e.line, &ctx)?;
                    if !system.phase_space.xi().contains(&s) {
                        return Err(ctx.err(e.line, format!("inverse given for `{s}`, not a source variable")));
                    }
                    inverse.insert(s, expr(e, &table, &ctx)?);
                } else {
                    let s = declared(&table, &e.key, e.line, &ctx)?;
                    if !target_ps.xi().contains(&s) {
                        return Err(ctx.err(e.line, format!("`{s}` is not a Darboux target")));
                    }
                    forward.insert(s, expr(e, &table, &ctx)?);
                }
            }
            for t in target_ps.xi() {
                if !forward.contains_key(&t) {
                    return Err(ctx.err(line, format!("[darboux] has no formula for `{t}`")));
                }
            }
            if !raw.headers.contains_key("target_chart") {
                return Err(ctx.err(line, "[darboux] needs a [target_chart] section"));
            }
            Some(CanonicalMap {
                name: name.clone(),
                source: system.phase_space.clone(),
                target: target_ps,
                forward,
                inverse,
                source_chart: chart.clone(),
                target_chart: chart_from(section(&raw, "target_chart"), &table, &ctx)?,
            })
        }
    };

    // [params]
    let (mut mass, mut hbar) = (1.0, 1.0);
    let mut bound = Vec::new();
    for e in section(&raw, "params") {
        let v = number(e, &ctx)?;
        match e.key.as_str() {
            "m" | "mass" => mass = v,
            "hbar" => hbar = v,
            k => {
                let s = declared(&table, k, e.line, &ctx)?;
                if !system.parameters.contains(&s) {
                    return Err(ctx.err(e.line, format!("`{k}` is not a system parameter")));
                }
                bound.push((s, v));
            }
        }
    }

    let lattice = if raw.headers.contains_key("lattice") { Some(lattice_spec(&raw, &ctx, mass, hbar)?) } else { None };

    let anomaly = if raw.headers.contains_key("anomaly") {
        let mut spec = AnomalySpec::default();
        for e in section(&raw, "anomaly") {
            match e.key.as_str() {
                "generating_function" => spec.generating_function = Some(expr(e, &table, &ctx)?),
                "sliced" => spec.sliced = e.value == "true",
                k => {
                    if let Some(s) = k.strip_prefix("generating_chart.") {
                        let (lo, hi) = range(e, &ctx)?;
                        spec.generating_chart.push((declared(&table, s, e.line, &ctx)?, lo, hi));
                    } else if let Some(c) = k.strip_prefix("reference.") {
                        if !["A_zeta", "A_z", "B_zeta", "B_z"].contains(&c) {
                            return Err(ctx.err(e.line, format!("unknown coefficient `{c}`")));
                        }
                        spec.reference.insert(c.to_string(), expr(e, &table, &ctx)?);
                    } else {
                        return Err(ctx.err(e.line, format!("unknown key `{k}` in [anomaly]")));
                    }
                }
            }
        }
        Some(spec)
    } else {
        None
    };

    let mut checks = Checks::default();
    for e in section(&raw, "checks") {
        match e.key.as_str() {
            "points" => checks.points = integer(e, &ctx)?,
            "tol" => checks.tol = number(e, &ctx)?,
            "liouville_tol" => checks.liouville_tol = number(e, &ctx)?,
            k => return Err(ctx.err(e.line, format!("unknown key `{k}` in [checks]"))),
        }
    }

    Ok(SystemFile {
        path: path.to_path_buf(),
        name,
        system,
        constraint,
        surface,
        chart,
        map,
        params: bound,
        mass,
        hbar,
        lattice,
        anomaly,
        checks,
    })
}

fn lattice_spec(raw: &Raw, ctx: &Ctx, mass: f64, hbar: f64) -> Result<LatticeSpec, UsageError> {
    let mut cfg = LatticeConfig { mass, hbar, ..Default::default() };
    let mut mode = "real".to_string();
    let (mut t, mut beta) = (None, None);
    let (mut q1, mut q2, mut steps) = (0.0, 0.0, 2000);
    let mut classical = false;
    for e in section(raw, "lattice") {
        match e.key.as_str() {
            "mode" => mode = e.value.clone(),
            "t" => t = Some(number(e, ctx)?),
            "beta" => beta = Some(number(e, ctx)?),
            "points" => cfg.points = integer(e, ctx)?,
            "length" => cfg.length = number(e, ctx)?,
            "slices" => cfg.slices = integer(e, ctx)?,
            "source" => cfg.source = number(e, ctx)?,
            "cutoff" => cfg.cutoff = number(e, ctx)?,
            "rolloff" => cfg.rolloff = number(e, ctx)?,
            "tolerance" => cfg.tolerance = Some(number(e, ctx)?),
            "amplitude" => match e.value.as_str() {
                "classical" => classical = true,
                "quantum" => classical = false,
                v => return Err(ctx.err(e.line, format!("amplitude must be `quantum` or `classical`, got `{v}`"))),
            },
            "q1" => q1 = number(e, ctx)?,
            "q2" => q2 = number(e, ctx)?,
            "steps" => steps = integer(e, ctx)?,
            k => return Err(ctx.err(e.line, format!("unknown key `{k}` in [lattice]"))),
        }
    }
    let line = raw.headers.get("lattice").copied().unwrap_or(0);
    cfg.mode = match mode.as_str() {
        "real" => Mode::RealTime { t: t.unwrap_or(1.0) },
        "imaginary" => Mode::ImaginaryTime { beta: beta.unwrap_or(1.0) },
        m => return Err(ctx.err(line, format!("mode must be `real` or `imaginary`, got `{m}`"))),
    };
    let amplitude = if classical { Amplitude::Classical { q1, q2, steps } } else { Amplitude::Quantum };
    Ok(LatticeSpec { config: cfg, amplitude })
}
