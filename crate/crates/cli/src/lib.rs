//! Library side of the `pppta` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use num_traits::Zero;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use pppta::backwards::{self, BackwardsSystem, SubPmdp};
use pppta::digital::{self, DigitalModel};
use pppta::dsl::{self, ModelSource};
use pppta::lu::{self, LuError};
use pppta::model::{render_gamma, LuClass};
use pppta::pmdp::solve_reach;
use pppta::ratfun::{parse_rational, rational_to_string};
use pppta::{ClockRegion, ClockValuation, Mode, Objective, ParamValuation, Pppta, Rational, ReachValue};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

fn pre(e: impl std::fmt::Display) -> CliError {
    CliError::Precondition(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Digital,
    Backwards,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Digital => "digital",
            Engine::Backwards => "backwards",
        }
    }
}

pub fn load_model(path: &Path) -> Result<Pppta, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let origin = path.display().to_string();
    let text = String::from_utf8(bytes).map_err(|_| CliError::Parse(format!("{origin}: invalid UTF-8")))?;
    load_source(&ModelSource { text, origin })
}

pub fn load_source(src: &ModelSource) -> Result<Pppta, CliError> {
    dsl::load(src).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}:{e}", src.origin)).collect();
        CliError::Parse(lines.join("\n"))
    })
}

fn split_assignments(s: &str) -> impl Iterator<Item = Result<(&str, &str), CliError>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| {
        p.split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| CliError::Usage(format!("expected NAME=VALUE, got `{p}`")))
    })
}

/// `T=3,U=1`.
pub fn parse_gamma(s: &str) -> Result<ClockValuation, CliError> {
    split_assignments(s)
        .map(|kv| {
            let (k, v) = kv?;
            let v = v
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("`{k}`: expected a natural number, got `{v}`")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

/// `p=1/2,q=0.75`.
pub fn parse_rho(s: &str) -> Result<ParamValuation, CliError> {
    split_assignments(s)
        .map(|kv| {
            let (k, v) = kv?;
            let v = parse_rational(v).map_err(|e| CliError::Usage(format!("`{k}`: {e}")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

pub fn parse_targets(s: &str) -> BTreeSet<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

/// `T=0..4,U=1..2`.
pub fn parse_region(s: &str) -> Result<BTreeMap<String, (u64, u64)>, CliError> {
    split_assignments(s)
        .map(|kv| {
            let (k, v) = kv?;
            let bad = || CliError::Usage(format!("`{k}`: expected LO..HI, got `{v}`"));
            let (lo, hi) = v.split_once("..").ok_or_else(bad)?;
            let lo = lo.trim().parse::<u64>().map_err(|_| bad())?;
            let hi = hi.trim().parse::<u64>().map_err(|_| bad())?;
            Ok((k.to_string(), (lo, hi)))
        })
        .collect()
}

/// One valuation per line; `#` starts a comment.
pub fn parse_gamma_set(text: &str) -> Result<BTreeSet<ClockValuation>, CliError> {
    let mut out = BTreeSet::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            out.insert(parse_gamma(line)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("empty valuation set".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhoAxis {
    Values(Vec<Rational>),
    /// `n` evenly spaced points over the declared interval (the midpoint when `n = 1`).
    Count(usize),
}

pub const DEFAULT_RHO_POINTS: usize = 3;

/// `p=0,1/2,1` or `p:#5`. Values of one parameter continue across commas
/// until the next `NAME=` or `NAME:#`.
pub fn parse_rho_grid(args: &[String]) -> Result<BTreeMap<String, RhoAxis>, CliError> {
    let mut out = BTreeMap::new();
    for arg in args {
        let mut current: Option<String> = None;
        for part in arg.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((k, n)) = part.split_once(":#") {
                let n = n
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("`{k}`: expected a point count, got `{n}`")))?;
                out.insert(k.trim().to_string(), RhoAxis::Count(n));
                current = None;
                continue;
            }
            let (k, v) = match part.split_once('=') {
                Some((k, v)) => {
                    current = Some(k.trim().to_string());
                    (k.trim().to_string(), v)
                }
                None => (
                    current
                        .clone()
                        .ok_or_else(|| CliError::Usage(format!("grid value `{part}` has no parameter")))?,
                    part,
                ),
            };
            let v = parse_rational(v.trim()).map_err(|e| CliError::Usage(format!("`{k}`: {e}")))?;
            match out.entry(k).or_insert_with(|| RhoAxis::Values(Vec::new())) {
                RhoAxis::Values(vs) => vs.push(v),
                RhoAxis::Count(_) => return Err(CliError::Usage(format!("grid for `{part}` given twice"))),
            }
        }
    }
    Ok(out)
}

fn axis_points(axis: &RhoAxis, lo: &Rational, hi: &Rational) -> Vec<Rational> {
    match axis {
        RhoAxis::Values(vs) => {
            let set: BTreeSet<Rational> = vs.iter().cloned().collect();
            set.into_iter().collect()
        }
        RhoAxis::Count(0) => Vec::new(),
        RhoAxis::Count(1) => vec![(lo + hi) / Rational::from_integer(2.into())],
        RhoAxis::Count(n) => {
            let step = (hi - lo) / Rational::from_integer(((*n - 1) as i64).into());
            (0..*n)
                .map(|i| lo + &step * Rational::from_integer((i as i64).into()))
                .collect()
        }
    }
}

/// Product grid over the model's probability parameters.
pub fn rho_grid(m: &Pppta, axes: &BTreeMap<String, RhoAxis>) -> Result<Vec<ParamValuation>, CliError> {
    for p in axes.keys() {
        if !m.prob_params.contains_key(p) {
            return Err(CliError::Usage(format!("unknown probability parameter `{p}`")));
        }
    }
    let mut out = vec![ParamValuation::new()];
    for (p, (lo, hi)) in &m.prob_params {
        let axis = axes.get(p).cloned().unwrap_or(RhoAxis::Count(DEFAULT_RHO_POINTS));
        let pts = axis_points(&axis, lo, hi);
        if pts.is_empty() {
            return Err(CliError::Usage(format!("empty grid for `{p}`")));
        }
        out = out
            .into_iter()
            .flat_map(|r| {
                pts.iter().map(move |v| {
                    let mut r = r.clone();
                    r.insert(p.clone(), v.clone());
                    r
                })
            })
            .collect();
    }
    Ok(out)
}

pub fn render_rho(rho: &ParamValuation) -> String {
    let parts: Vec<String> = rho.iter().map(|(p, v)| format!("{p}={}", rational_to_string(v))).collect();
    parts.join(",")
}

fn or_dash(s: String) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s
    }
}

fn require_total(m: &Pppta, gamma: &ClockValuation, rho: Option<&ParamValuation>) -> Result<(), CliError> {
    for p in m.clock_params.keys() {
        if !gamma.contains_key(p) {
            return Err(pre(format!("missing value for clock parameter `{p}`")));
        }
    }
    if let Some(rho) = rho {
        for p in m.prob_params.keys() {
            if !rho.contains_key(p) {
                return Err(pre(format!("missing value for probability parameter `{p}`")));
            }
        }
    }
    m.instantiate(gamma, rho.unwrap_or(&ParamValuation::new())).map_err(pre)?;
    Ok(())
}

fn require_targets(m: &Pppta, targets: &BTreeSet<String>) -> Result<(), CliError> {
    if targets.is_empty() {
        return Err(CliError::Usage("no target locations".into()));
    }
    for t in targets {
        if !m.locations.contains_key(t) {
            return Err(pre(format!("unknown target location `{t}`")));
        }
    }
    Ok(())
}

/// An engine built for one clock-parameter valuation, still parametric in
/// the probability parameters.
pub enum Prepared {
    Digital(Box<DigitalModel>),
    Backwards { model: Pppta, sys: Box<BackwardsSystem>, sub: Box<SubPmdp> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub value: ReachValue,
    pub truncated: bool,
}

pub fn prepare(
    m: &Pppta,
    gamma: &ClockValuation,
    targets: &BTreeSet<String>,
    engine: Engine,
    objective: Objective,
    cap: usize,
) -> Result<Prepared, CliError> {
    let mg = m.instantiate(gamma, &ParamValuation::new()).map_err(pre)?;
    match engine {
        Engine::Digital => Ok(Prepared::Digital(Box::new(digital::build_digital(&mg, targets).map_err(pre)?))),
        Engine::Backwards => {
            if objective != Objective::Max {
                return Err(pre("the backwards engine only computes maximal probabilities"));
            }
            let t = backwards::location_targets(&mg, targets).map_err(pre)?;
            let sys = backwards::explore(&mg, &t, cap).map_err(pre)?;
            let sub = backwards::build_sub_pmdp(&mg, &sys);
            Ok(Prepared::Backwards {
                model: mg,
                sys: Box::new(sys),
                sub: Box::new(sub),
            })
        }
    }
}

impl Prepared {
    pub fn eval(&self, rho: &ParamValuation, objective: Objective, mode: Mode) -> Result<PointResult, CliError> {
        match self {
            Prepared::Digital(dm) => {
                let mdp = dm.pmdp.instantiate(rho).map_err(pre)?;
                let res = solve_reach(&mdp, &dm.targets, objective, mode).map_err(|e| CliError::Internal(e.to_string()))?;
                Ok(PointResult {
                    value: res.value(mdp.initial),
                    truncated: false,
                })
            }
            Prepared::Backwards { model, sys, sub } => {
                let zero = vec![Rational::zero(); model.clocks.len()];
                let r = backwards::max_reach_eval(model, sys, sub, &model.initial, &zero, rho, mode).map_err(pre)?;
                Ok(PointResult {
                    value: r.value,
                    truncated: r.lower_bound,
                })
            }
        }
    }
}

fn zeno_warnings(m: &Pppta, objective: Objective) -> Vec<String> {
    if objective == Objective::Min {
        digital::zero_time_cycle_check(m)
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub value: ReachValue,
    pub truncated: bool,
    pub zeno: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn check(
    m: &Pppta,
    gamma: &ClockValuation,
    rho: &ParamValuation,
    targets: &BTreeSet<String>,
    objective: Objective,
    engine: Engine,
    mode: Mode,
    cap: usize,
) -> Result<CheckOutcome, CliError> {
    require_targets(m, targets)?;
    require_total(m, gamma, Some(rho))?;
    let p = prepare(m, gamma, targets, engine, objective, cap)?;
    let r = p.eval(rho, objective, mode)?;
    let mg = m.instantiate(gamma, rho).map_err(pre)?;
    Ok(CheckOutcome {
        value: r.value,
        truncated: r.truncated,
        zeno: zeno_warnings(&mg, objective),
    })
}

fn class_name(c: LuClass) -> &'static str {
    match c {
        LuClass::Lower => "Lower",
        LuClass::Upper => "Upper",
        LuClass::Both => "Both",
        LuClass::Unused => "Unused",
    }
}

pub fn info(m: &Pppta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {}", m.name);
    let _ = writeln!(out, "clocks: {}", or_dash(m.clock_list().join(", ")));
    let locs: Vec<&str> = m.locations.keys().map(String::as_str).collect();
    let _ = writeln!(out, "locations: {} (initial {})", locs.join(", "), m.initial);
    let _ = writeln!(out, "transitions: {}", m.transitions.len());
    for (p, (lo, hi)) in &m.clock_params {
        let _ = writeln!(out, "clock parameter {p} in [{lo}, {hi}]");
    }
    for (p, (lo, hi)) in &m.prob_params {
        let _ = writeln!(out, "probability parameter {p} in [{}, {}]", rational_to_string(lo), rational_to_string(hi));
    }
    let mut summary: Vec<String> = m
        .classify_lu()
        .into_iter()
        .map(|(p, c)| format!("{p}: {}", class_name(c)))
        .collect();
    summary.push(format!("closed: {}", if m.is_closed() { "yes" } else { "no" }));
    let _ = writeln!(out, "{}", summary.join("; "));
    for gamma in m.corners() {
        if let Ok(k) = m.max_constants(&gamma) {
            let ks: Vec<String> = k.iter().map(|(c, v)| format!("{c}={v}")).collect();
            let _ = writeln!(out, "max constants at [{}]: {}", render_gamma(&gamma), or_dash(ks.join(", ")));
        }
    }
    let diags = m.validate();
    if diags.is_empty() {
        out.push_str("diagnostics: none\n");
    }
    for d in diags {
        let _ = writeln!(out, "diagnostic: {d}");
    }
    out
}

#[derive(Debug, Clone)]
pub struct SynthesisRequest {
    pub targets: BTreeSet<String>,
    pub objective: Objective,
    pub engine: Engine,
    pub mode: Mode,
    pub region: ClockRegion,
    pub rho_axes: BTreeMap<String, RhoAxis>,
    /// Run the L/U reduction before enumerating.
    pub reduce: bool,
    pub cap: usize,
    pub threads: Option<usize>,
}

impl SynthesisRequest {
    pub fn new(m: &Pppta, targets: BTreeSet<String>, objective: Objective) -> Self {
        SynthesisRequest {
            targets,
            objective,
            engine: Engine::Digital,
            mode: Mode::Exact,
            region: ClockRegion::from_model(m),
            rho_axes: BTreeMap::new(),
            reduce: true,
            cap: backwards::DEFAULT_CAP,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub gamma: ClockValuation,
    pub rho: ParamValuation,
    pub value: ReachValue,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub best: Row,
    pub rows: Vec<Row>,
    pub fixed: ClockValuation,
    pub classes: BTreeMap<String, LuClass>,
    pub notes: Vec<String>,
    pub truncated: bool,
    pub zeno: Vec<String>,
}

fn better(a: &ReachValue, b: &ReachValue, objective: Objective) -> bool {
    let ord = match (a, b) {
        (ReachValue::Exact(x), ReachValue::Exact(y)) => x.cmp(y),
        _ => a.to_f64().total_cmp(&b.to_f64()),
    };
    match objective {
        Objective::Max => ord.is_gt(),
        Objective::Min => ord.is_lt(),
    }
}

/// Enumerates the (reduced) clock region times the probability grid. Rows
/// come out in lexicographic (γ, ρ) order and ties keep the first row, so
/// the result does not depend on the number of threads.
pub fn synth(m: &Pppta, req: &SynthesisRequest) -> Result<SynthesisResult, CliError> {
    require_targets(m, &req.targets)?;
    if req.engine == Engine::Backwards && req.objective != Objective::Max {
        return Err(pre("the backwards engine only computes maximal probabilities"));
    }
    req.region.check().map_err(pre)?;
    let mut notes = Vec::new();
    let mut fixed = ClockValuation::new();
    let mut classes = BTreeMap::new();
    let points: Vec<ClockValuation> = if req.reduce {
        match lu::reduce(m, &req.region, req.objective) {
            Ok(rep) => {
                fixed = rep.fixed.clone();
                classes = rep.classes.clone();
                rep.residual_region
                    .points()
                    .into_iter()
                    .map(|mut g| {
                        g.extend(rep.fixed.iter().map(|(k, v)| (k.clone(), *v)));
                        g
                    })
                    .collect()
            }
            Err(LuError::NotSeparable(why)) => {
                notes.push(format!("no parameter fixed: region is not rectangular ({why})"));
                req.region.points()
            }
            Err(e) => return Err(pre(e)),
        }
    } else {
        req.region.points()
    };
    for g in &points {
        require_total(m, g, None)?;
    }
    let rhos = rho_grid(m, &req.rho_axes)?;
    let run = || -> Result<Vec<Vec<Row>>, CliError> {
        points
            .par_iter()
            .map(|g| {
                let p = prepare(m, g, &req.targets, req.engine, req.objective, req.cap)?;
                rhos.iter()
                    .map(|r| {
                        let pr = p.eval(r, req.objective, req.mode)?;
                        Ok(Row {
                            gamma: g.clone(),
                            rho: r.clone(),
                            value: pr.value,
                            truncated: pr.truncated,
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let threads = req.threads.or_else(|| std::env::var("PPTA_THREADS").ok().and_then(|v| v.parse().ok()));
    let nested = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let mut rows: Vec<Row> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| (&a.gamma, &a.rho).cmp(&(&b.gamma, &b.rho)));
    let mut best = rows.first().cloned().ok_or_else(|| CliError::Usage("empty parameter grid".into()))?;
    for r in &rows[1..] {
        if better(&r.value, &best.value, req.objective) {
            best = r.clone();
        }
    }
    let truncated = rows.iter().any(|r| r.truncated);
    if truncated {
        notes.push(match req.objective {
            Objective::Max => "exploration truncated: values are lower bounds".into(),
            Objective::Min => "exploration truncated".into(),
        });
    }
    let mut zeno = BTreeSet::new();
    for g in &points {
        if let Ok(mg) = m.instantiate(g, &ParamValuation::new()) {
            zeno.extend(zeno_warnings(&mg, req.objective));
        }
    }
    Ok(SynthesisResult {
        best,
        rows,
        fixed,
        classes,
        notes,
        truncated,
        zeno: zeno.into_iter().collect(),
    })
}

impl SynthesisResult {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (p, v) in &self.fixed {
            let c = self.classes.get(p).map(|c| class_name(*c)).unwrap_or("?");
            let _ = writeln!(out, "lu: fixed {p} = {v} ({c})");
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        for z in &self.zeno {
            let _ = writeln!(out, "warning: {z}; the minimum may rely on non-divergent schedulers");
        }
        let _ = writeln!(
            out,
            "best: {} | {} | {}",
            or_dash(render_gamma(&self.best.gamma)),
            or_dash(render_rho(&self.best.rho)),
            self.best.value
        );
        let _ = writeln!(out, "points: {}", self.rows.len());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{} | {} | {}{}",
                or_dash(render_gamma(&r.gamma)),
                or_dash(render_rho(&r.rho)),
                r.value,
                if r.truncated { " (lower bound)" } else { "" }
            );
        }
        out
    }

    /// One JSON object per evaluated point.
    pub fn render_records(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let gamma: serde_json::Map<String, serde_json::Value> =
                r.gamma.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            let rho: serde_json::Map<String, serde_json::Value> =
                r.rho.iter().map(|(k, v)| (k.clone(), json!(rational_to_string(v)))).collect();
            let (value, approx) = match &r.value {
                ReachValue::Exact(v) => (json!(rational_to_string(v)), json!(null)),
                ReachValue::Approx { value, last_step } => (json!(value.to_string()), json!(last_step)),
            };
            let rec = json!({
                "gamma": gamma,
                "rho": rho,
                "value": value,
                "last_step": approx,
                "truncated": r.truncated,
                "best": *r == self.best,
            });
            let _ = writeln!(out, "{rec}");
        }
        out
    }
}

/// The engine's pMDP in the export format; parametric in the probability
/// parameters unless `rho` assigns them.
pub fn export(
    m: &Pppta,
    gamma: &ClockValuation,
    rho: &ParamValuation,
    targets: &BTreeSet<String>,
    engine: Engine,
    cap: usize,
) -> Result<String, CliError> {
    require_targets(m, targets)?;
    require_total(m, gamma, None)?;
    let mi = m.instantiate(gamma, rho).map_err(pre)?;
    match prepare(&mi, &ClockValuation::new(), targets, engine, Objective::Max, cap)? {
        Prepared::Digital(dm) => Ok(dm.pmdp.export(&dm.targets)),
        Prepared::Backwards { sys, sub, .. } => {
            let mut out = String::new();
            for line in sys.dump().lines() {
                let _ = writeln!(out, "// {line}");
            }
            out.push_str(&sub.pmdp.export(&sub.targets));
            Ok(out)
        }
    }
}

pub fn reduce(m: &Pppta, region: &ClockRegion, objective: Objective) -> Result<String, CliError> {
    lu::reduce(m, region, objective).map(|r| r.render()).map_err(pre)
}

