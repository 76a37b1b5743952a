//! Scenario files: one `key = value` per line, `#` starts a comment,
//! expressions are double-quoted strings and lists are comma-separated.
//!
//! ```text
//! # Boundary disturbance on a linear velocity.
//! problem = continuity
//! rho_s = 1
//! v = "1 + x"
//! b = "0.1*sin(3*t)"
//! rho0 = "1/(1 + x)"
//! nx = 200
//! dt = 0.002
//! horizon = 2
//! p = 2, 4, inf
//! mu = 0.1, 1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use continuity_core::bounds::{EstimateId, Family};
use continuity_core::continuity::ContinuityProblem;
use continuity_core::fields::{BoundarySignal, InitialProfile, TransportCoefficients, VelocityField};
use continuity_core::manufacturing::ProductionScenario;
use continuity_core::norms::NormOrder;
use continuity_core::transport::TransportProblem;
use continuity_core::{Grid, ScalarProfile, ScalarSignal, SpaceTimeField};

use crate::error::{Diagnostic, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Continuity,
    Transport,
    Manufacturing,
}

impl ProblemKind {
    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Continuity => "continuity",
            ProblemKind::Transport => "transport",
            ProblemKind::Manufacturing => "manufacturing",
        }
    }

    pub fn family(self) -> Family {
        match self {
            ProblemKind::Continuity => Family::Continuity,
            ProblemKind::Transport => Family::Transport,
            ProblemKind::Manufacturing => Family::Manufacturing,
        }
    }

    /// Keys that must be present (outside campaigns, for field keys).
    fn required(self) -> &'static [&'static str] {
        match self {
            ProblemKind::Continuity => &["rho_s", "v", "b", "rho0"],
            ProblemKind::Transport => &["v", "b", "phi"],
            ProblemKind::Manufacturing => &["rho_s", "b", "rho0", "lambda"],
        }
    }

    fn optional(self) -> &'static [&'static str] {
        match self {
            ProblemKind::Transport => &["a", "f", "jumps", "campaign"],
            ProblemKind::Continuity => &["campaign"],
            ProblemKind::Manufacturing => &[],
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Keys valid for every problem kind.
const COMMON_KEYS: &[&str] = &["problem", "name", "nx", "dt", "horizon", "estimates", "p", "mu", "theta", "fd_step"];
/// Keys holding expressions, which must be quoted.
const EXPRESSION_KEYS: &[&str] = &["v", "b", "rho0", "phi", "a", "f", "lambda"];
/// Every key the format knows.
const ALL_KEYS: &[&str] = &[
    "problem", "name", "nx", "dt", "horizon", "estimates", "p", "mu", "theta", "fd_step", "rho_s", "v", "b", "rho0",
    "phi", "a", "f", "lambda", "jumps", "campaign",
];

/// Expression sources of a scenario. Which are set depends on the
/// problem kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldSources {
    pub v: Option<String>,
    pub b: Option<String>,
    pub rho0: Option<String>,
    pub phi: Option<String>,
    pub a: Option<String>,
    pub f: Option<String>,
    pub lambda: Option<String>,
}

/// A parsed scenario. Field expressions are kept as text so the problem
/// can be rebuilt on other grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub problem: ProblemKind,
    pub rho_s: Option<f64>,
    pub fields: FieldSources,
    pub jumps: Vec<f64>,
    pub nx: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Estimates to certify; empty means every estimate of the family.
    pub estimates: Vec<EstimateId>,
    pub orders: Vec<NormOrder>,
    pub mus: Vec<f64>,
    pub thetas: Vec<f64>,
    pub fd_step: Option<f64>,
    /// Number of seeded random scenarios to generate instead of using
    /// the file's fields.
    pub campaign: Option<usize>,
}

/// Validated problem data on one grid.
#[derive(Debug, Clone)]
pub enum Problem {
    Continuity(ContinuityProblem),
    Transport(TransportProblem),
    Manufacturing(ProductionScenario),
}

#[derive(Debug, Clone)]
enum Value {
    Quoted(String),
    Bare(String),
}

impl Value {
    fn text(&self) -> &str {
        match self {
            Value::Quoted(s) | Value::Bare(s) => s,
        }
    }
}

/// Reads and validates a scenario; the file stem names it unless a
/// `name` key is given.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        action: "reading",
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario(&text, stem).map_err(|diagnostics| Error::Scenario {
        path: path.to_path_buf(),
        diagnostics,
    })
}

/// Strips a `#` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_value(raw: &str) -> std::result::Result<Value, String> {
    if let Some(rest) = raw.strip_prefix('"') {
        let inner = rest.strip_suffix('"').ok_or("unterminated string")?;
        if inner.contains('"') {
            return Err("unexpected '\"' inside a quoted value".into());
        }
        return Ok(Value::Quoted(inner.trim().to_string()));
    }
    if raw.contains('"') {
        return Err("unexpected '\"' in an unquoted value".into());
    }
    if raw.is_empty() {
        return Err("missing value".into());
    }
    Ok(Value::Bare(raw.to_string()))
}

/// Parses and validates scenario text, collecting every problem.
pub fn parse_scenario(text: &str, default_name: &str) -> std::result::Result<Scenario, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut entries: BTreeMap<&'static str, (usize, Value)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let mut at = |message: String| {
            diags.push(Diagnostic {
                line: Some(line),
                message,
            })
        };
        let Some((key, value)) = content.split_once('=') else {
            at(format!("expected `key = value`, found '{content}'"));
            continue;
        };
        let key = key.trim();
        let Some(&known) = ALL_KEYS.iter().find(|&&k| k == key) else {
            at(format!("unknown key '{key}'"));
            continue;
        };
        let value = match parse_value(value.trim()) {
            Ok(v) => v,
            Err(e) => {
                at(format!("{key}: {e}"));
                continue;
            }
        };
        if let Some((first, _)) = entries.get(known) {
            at(format!("duplicate key '{key}' (first set on line {first})"));
            continue;
        }
        entries.insert(known, (line, value));
    }
    let mut r = Reader { entries, diags };
    let scenario = r.scenario(default_name);
    match scenario {
        Some(s) if r.diags.is_empty() => Ok(s),
        _ => {
            r.diags.sort_by_key(|d| d.line.unwrap_or(usize::MAX));
            Err(r.diags)
        }
    }
}

struct Reader {
    entries: BTreeMap<&'static str, (usize, Value)>,
    diags: Vec<Diagnostic>,
}

impl Reader {
    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(l, _)| *l)
    }

    fn report(&mut self, key: &str, message: impl Into<String>) {
        let line = self.line(key);
        self.diags.push(Diagnostic {
            line,
            message: message.into(),
        });
    }

    fn text(&self, key: &str) -> Option<String> {
        self.entries.get(key).map(|(_, v)| v.text().to_string())
    }

    fn typed<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let text = self.text(key)?;
        let value = parse(text.trim());
        if value.is_none() {
            self.report(key, format!("{key}: expected {what}, found '{text}'"));
        }
        value
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        self.typed(key, "a finite number", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn list<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
        self.typed(key, what, |s| {
            let items: Option<Vec<T>> = s.split(',').map(|item| parse(item.trim())).collect();
            items.filter(|v| !v.is_empty())
        })
    }

    fn expression(&mut self, key: &str) -> Option<String> {
        match self.entries.get(key) {
            Some((_, Value::Quoted(s))) => Some(s.clone()),
            Some((_, Value::Bare(s))) => {
                let s = s.clone();
                self.report(key, format!("{key}: expressions must be quoted, e.g. {key} = \"{s}\""));
                None
            }
            None => None,
        }
    }

    fn scenario(&mut self, default_name: &str) -> Option<Scenario> {
        let problem = match self.text("problem").as_deref() {
            Some("continuity") => Some(ProblemKind::Continuity),
            Some("transport") => Some(ProblemKind::Transport),
            Some("manufacturing") => Some(ProblemKind::Manufacturing),
            Some(other) => {
                self.report(
                    "problem",
                    format!("problem: expected continuity, transport or manufacturing, found '{other}'"),
                );
                None
            }
            None => {
                self.report("problem", "missing key 'problem'");
                None
            }
        };
        let name = self.text("name").unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) {
            self.report("name", format!("name '{name}' may only use letters, digits, '_', '-' and '.'"));
        }
        let nx = self.typed("nx", "an integer of at least 2", |s| s.parse::<usize>().ok().filter(|&n| n >= 2));
        let dt = self.number("dt");
        let horizon = self.number("horizon");
        for key in ["nx", "dt", "horizon"] {
            if self.line(key).is_none() {
                self.report(key, format!("missing key '{key}'"));
            }
        }
        let rho_s = self.number("rho_s");
        let fd_step = self.number("fd_step");
        if fd_step.is_some_and(|h| h <= 0.0) {
            self.report("fd_step", "fd_step must be positive");
        }
        let orders = self
            .list("p", "a list of norm orders (> 1 or inf)", |s| s.parse::<NormOrder>().ok())
            .unwrap_or_else(|| vec![NormOrder::Finite(2.0), NormOrder::Finite(4.0), NormOrder::Infinity]);
        let mus = self
            .list("mu", "a list of numbers", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
            .unwrap_or_else(|| vec![0.1, 1.0]);
        let thetas = self
            .list("theta", "a list of numbers in (0, 1)", |s| {
                s.parse::<f64>().ok().filter(|x| *x > 0.0 && *x < 1.0)
            })
            .unwrap_or_else(|| vec![0.5]);
        let jumps = self
            .list("jumps", "a list of points in (0, 1)", |s| s.parse::<f64>().ok())
            .unwrap_or_default();
        let campaign = self.typed("campaign", "a positive integer", |s| s.parse::<usize>().ok().filter(|&n| n > 0));
        let estimates = self
            .list("estimates", "a list of estimate labels such as E2.4", EstimateId::parse)
            .unwrap_or_default();

        let problem = problem?;
        let family = problem.family();
        if let Some(e) = estimates.iter().find(|e| e.family() != family) {
            self.report("estimates", format!("estimate {e} does not apply to {problem} problems"));
        }
        let allowed = |k: &str| COMMON_KEYS.contains(&k) || problem.required().contains(&k) || problem.optional().contains(&k);
        let stray: Vec<&'static str> = self.entries.keys().copied().filter(|k| !allowed(k)).collect();
        for key in stray {
            self.report(key, format!("key '{key}' does not apply to {problem} problems"));
        }
        let fields = FieldSources {
            v: self.expression("v"),
            b: self.expression("b"),
            rho0: self.expression("rho0"),
            phi: self.expression("phi"),
            a: self.expression("a"),
            f: self.expression("f"),
            lambda: self.expression("lambda"),
        };
        if campaign.is_some() {
            let set: Vec<&'static str> = EXPRESSION_KEYS.iter().copied().filter(|k| self.line(k).is_some()).collect();
            for key in set {
                self.report(key, format!("key '{key}' cannot be set in a campaign; fields are generated from the seed"));
            }
        }
        let mut complete = campaign.is_none();
        if campaign.is_none() {
            for &key in problem.required() {
                if self.line(key).is_none() {
                    complete = false;
                    self.report(key, format!("missing key '{key}' for {problem} problems"));
                }
            }
        }
        let scenario = Scenario {
            name,
            problem,
            rho_s,
            fields,
            jumps,
            nx: nx?,
            dt: dt?,
            horizon: horizon?,
            estimates,
            orders,
            mus,
            thetas,
            fd_step,
            campaign,
        };
        let grid = match scenario.grid() {
            Ok(g) => g,
            Err(e) => {
                self.report("dt", format!("grid: {e}"));
                return None;
            }
        };
        // Field checks run alongside syntax errors on other lines.
        if complete {
            for (key, e) in scenario.validate(&grid) {
                // A key whose value was rejected is reported once.
                let line = self.line(key);
                if line.is_some() && self.diags.iter().any(|d| d.line == line) {
                    continue;
                }
                self.report(key, format!("{key}: {e}"));
            }
        }
        Some(scenario)
    }
}

type Tagged = (&'static str, continuity_core::Error);

fn check(problems: &mut Vec<Tagged>, key: &'static str, r: continuity_core::Result<()>) {
    if let Err(e) = r {
        problems.push((key, e));
    }
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.nx, self.dt, self.horizon)?)
    }

    /// Certificates requested by the `estimates` key for this order.
    pub fn wants(&self, estimate: EstimateId) -> bool {
        self.estimates.is_empty() || self.estimates.contains(&estimate)
    }

    /// Orders whose estimate is requested.
    pub fn certified_orders(&self) -> Vec<NormOrder> {
        let family = self.problem.family();
        self.orders.iter().copied().filter(|&o| self.wants(family.estimate(o))).collect()
    }

    /// Validates and assembles the problem on `grid`.
    pub fn build(&self, grid: &Grid) -> Result<Problem> {
        self.assemble(grid).map_err(|(key, e)| match e {
            continuity_core::Error::InvalidInput(msg) => {
                Error::Core(continuity_core::Error::InvalidInput(format!("{key}: {msg}")))
            }
            other => Error::Core(other),
        })
    }

    /// Every validation failure, tagged with the key that caused it.
    fn validate(&self, grid: &Grid) -> Vec<(&'static str, continuity_core::Error)> {
        let mut problems = Vec::new();
        let f = &self.fields;
        check(&mut problems, "v", self.velocity(grid).map(drop));
        check(&mut problems, "b", self.boundary(grid).map(drop));
        match self.problem {
            ProblemKind::Transport => {
                check(&mut problems, "phi", self.initial(grid).map(drop));
                check(&mut problems, "a", f.a.as_deref().map_or(Ok(()), |s| SpaceTimeField::parse(s).map(drop)));
                check(&mut problems, "f", f.f.as_deref().map_or(Ok(()), |s| SpaceTimeField::parse(s).map(drop)));
                if problems.is_empty() {
                    check(&mut problems, "a", self.coefficients(grid).map(drop));
                }
            }
            ProblemKind::Continuity | ProblemKind::Manufacturing => {
                check(&mut problems, "rho0", self.initial(grid).map(drop));
                if self.problem == ProblemKind::Manufacturing {
                    check(&mut problems, "lambda", self.speed_law().map(drop));
                }
            }
        }
        if problems.is_empty() {
            if let Err((key, e)) = self.assemble(grid) {
                problems.push((key, e));
            }
        }
        problems
    }

    fn velocity(&self, grid: &Grid) -> continuity_core::Result<Option<VelocityField>> {
        let Some(src) = &self.fields.v else { return Ok(None) };
        let v = VelocityField::new(SpaceTimeField::parse(src)?, grid)?;
        Ok(Some(match self.fd_step {
            Some(h) => v.with_fd_step(h),
            None => v,
        }))
    }

    fn boundary(&self, grid: &Grid) -> continuity_core::Result<Option<BoundarySignal>> {
        let Some(src) = &self.fields.b else { return Ok(None) };
        let b = BoundarySignal::new(ScalarSignal::parse(src)?, grid)?;
        Ok(Some(match self.fd_step {
            Some(h) => b.with_fd_step(h),
            None => b,
        }))
    }

    fn initial(&self, grid: &Grid) -> continuity_core::Result<Option<InitialProfile>> {
        let profile = match self.problem {
            ProblemKind::Transport => {
                let Some(src) = &self.fields.phi else { return Ok(None) };
                InitialProfile::new(ScalarProfile::parse(src)?, self.jumps.clone(), grid)?
            }
            _ => {
                let Some(src) = &self.fields.rho0 else { return Ok(None) };
                InitialProfile::density(ScalarProfile::parse(src)?, grid)?
            }
        };
        Ok(Some(match self.fd_step {
            Some(h) => profile.with_fd_step(h),
            None => profile,
        }))
    }

    fn coefficients(&self, grid: &Grid) -> continuity_core::Result<TransportCoefficients> {
        let parse = |s: &Option<String>| s.as_deref().map_or(Ok(SpaceTimeField::zero()), SpaceTimeField::parse);
        TransportCoefficients::new(parse(&self.fields.a)?, parse(&self.fields.f)?, grid)
    }

    fn speed_law(&self) -> continuity_core::Result<ScalarSignal> {
        let src = self.fields.lambda.as_deref().unwrap_or_default();
        ScalarSignal::parse_in(src, "W")
    }

    fn assemble(&self, grid: &Grid) -> std::result::Result<Problem, (&'static str, continuity_core::Error)> {
        let missing = |key: &'static str| (key, continuity_core::Error::InvalidInput(format!("missing field '{key}'")));
        let b = self.boundary(grid).map_err(|e| ("b", e))?.ok_or_else(|| missing("b"))?;
        let rho_s = || self.rho_s.ok_or_else(|| missing("rho_s"));
        Ok(match self.problem {
            ProblemKind::Continuity => {
                let v = self.velocity(grid).map_err(|e| ("v", e))?.ok_or_else(|| missing("v"))?;
                let rho0 = self.initial(grid).map_err(|e| ("rho0", e))?.ok_or_else(|| missing("rho0"))?;
                Problem::Continuity(ContinuityProblem::new(rho_s()?, rho0, b, v).map_err(|e| ("rho_s", e))?)
            }
            ProblemKind::Transport => {
                let v = self.velocity(grid).map_err(|e| ("v", e))?.ok_or_else(|| missing("v"))?;
                let phi = self.initial(grid).map_err(|e| ("phi", e))?.ok_or_else(|| missing("phi"))?;
                let coeffs = self.coefficients(grid).map_err(|e| ("a", e))?;
                Problem::Transport(TransportProblem::new(v, phi, b, coeffs))
            }
            ProblemKind::Manufacturing => {
                let rho0 = self.initial(grid).map_err(|e| ("rho0", e))?.ok_or_else(|| missing("rho0"))?;
                let lambda = self.speed_law().map_err(|e| ("lambda", e))?;
                Problem::Manufacturing(
                    ProductionScenario::new(rho_s()?, rho0, b, lambda, grid).map_err(|e| ("lambda", e))?,
                )
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "problem = continuity\nrho_s = 1\nv = \"1\"\nb = \"0\"\nrho0 = \"1\"\nnx = 200\ndt = 0.002\nhorizon = 2\n";

    #[test]
    fn minimal_continuity_file_is_valid() {
        let s = parse_scenario(MINIMAL, "minimal").unwrap();
        assert_eq!(s.problem, ProblemKind::Continuity);
        assert_eq!(s.name, "minimal");
        assert_eq!((s.nx, s.dt, s.horizon), (200, 0.002, 2.0));
        assert_eq!(s.mus, vec![0.1, 1.0]);
        assert!(matches!(s.build(&s.grid().unwrap()).unwrap(), Problem::Continuity(_)));
    }

    #[test]
    fn manufacturing_file_is_valid() {
        let text = "problem = manufacturing\nrho_s = 1\nb = \"0\"\nrho0 = \"1\"\nlambda = \"1/(1+W)\"\nnx = 100\ndt = 0.01\nhorizon = 1\n";
        let s = parse_scenario(text, "m").unwrap();
        assert_eq!(s.fields.lambda.as_deref(), Some("1/(1+W)"));
    }

    #[test]
    fn nonpositive_velocity_is_reported_on_its_line() {
        let text = MINIMAL.replace("v = \"1\"", "v = \"x - 2\"");
        let diags = parse_scenario(&text, "bad").unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, Some(3));
        assert!(diags[0].message.contains("positive"), "{}", diags[0].message);
    }

    #[test]
    fn problems_are_collected_together() {
        let text = "# header\nproblem = continuity\nrho_s = one\nv = 1 + x\nspeed = 3\nnx = 1\nnx = 4\nb = \"0\" # trailing\n";
        let diags = parse_scenario(text, "bad").unwrap_err();
        let lines: Vec<Option<usize>> = diags.iter().map(|d| d.line).collect();
        for expected in [Some(3), Some(4), Some(5), Some(6), Some(7)] {
            assert!(lines.contains(&expected), "{diags:?}");
        }
        assert!(diags.iter().any(|d| d.message.contains("missing key 'rho0'")));
        assert!(diags.iter().any(|d| d.message.contains("missing key 'dt'")));
    }

    #[test]
    fn comments_inside_quotes_are_kept() {
        let text = MINIMAL.replace("b = \"0\"", "b = \"0\" # the # in here is a comment");
        assert!(parse_scenario(&text, "c").is_ok());
        let diags = parse_scenario("problem = \"continuity", "c").unwrap_err();
        assert!(diags[0].message.contains("unterminated"));
    }

    #[test]
    fn keys_of_other_problems_are_rejected() {
        let text = format!("{MINIMAL}phi = \"x\"\nestimates = E2.10\n");
        let diags = parse_scenario(&text, "c").unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("'phi' does not apply")));
        assert!(diags.iter().any(|d| d.message.contains("E2.10 does not apply")));
    }

    #[test]
    fn lists_and_estimates() {
        let text = format!("{MINIMAL}p = 2, inf\nmu = 0.5\nestimates = E2.5\n");
        let s = parse_scenario(&text, "c").unwrap();
        assert_eq!(s.orders, vec![NormOrder::Finite(2.0), NormOrder::Infinity]);
        assert_eq!(s.certified_orders(), vec![NormOrder::Infinity]);
        assert!(parse_scenario(&format!("{MINIMAL}p = 1\n"), "c").is_err());
    }

    #[test]
    fn campaigns_generate_their_fields() {
        let text = "problem = transport\ncampaign = 3\nnx = 50\ndt = 0.01\nhorizon = 1\n";
        assert_eq!(parse_scenario(text, "c").unwrap().campaign, Some(3));
        let with_field = format!("{text}v = \"1\"\n");
        assert!(parse_scenario(&with_field, "c").is_err());
    }
}
