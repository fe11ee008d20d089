//! Digital-clock semantics: integer time steps over saturated clock values,
//! compiled into a parametric MDP. Plus ε-digitization of concrete paths.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::constraints::{BoundTerm, ClockConstraint};
use crate::model::{ClockValuation, Outcome, Pppta};
use crate::pmdp::ParametricPmdp;
use crate::ratfun::{rational_to_string, Rational, RationalFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DigitalError {
    #[error("model is not closed: strict constraints are not supported by the digital engine")]
    NotClosed,
    #[error("model still has clock parameters: {0}")]
    ClockParameters(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("the initial state violates the invariant of `{0}`")]
    InitialInvariant(String),
}

/// A location with integer clock values, each capped at `k_c + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DigitalState {
    pub location: String,
    /// In the model's clock order.
    pub clocks: Vec<u64>,
}

impl DigitalState {
    pub fn label(&self, clock_names: &[String]) -> String {
        let parts: Vec<String> = clock_names
            .iter()
            .zip(&self.clocks)
            .map(|(c, v)| format!("{c}={v}"))
            .collect();
        format!("{}({})", self.location, parts.join(","))
    }
}

pub const TICK: &str = "tick";
pub const DONE: &str = "done";
pub const STUCK: &str = "stuck";

#[derive(Debug, Clone)]
pub struct DigitalModel {
    pub pmdp: ParametricPmdp,
    pub targets: BTreeSet<usize>,
    /// `states[i]` is pMDP state `i`; the sink has no digital counterpart.
    pub states: Vec<Option<DigitalState>>,
    pub max_constants: Vec<u64>,
    pub clocks: Vec<String>,
}

fn require_instantiated_closed(m: &Pppta) -> Result<(), DigitalError> {
    if !m.clock_params.is_empty() {
        let names: Vec<&str> = m.clock_params.keys().map(String::as_str).collect();
        return Err(DigitalError::ClockParameters(names.join(", ")));
    }
    if !m.is_closed() {
        return Err(DigitalError::NotClosed);
    }
    Ok(())
}

/// Satisfaction with integer clock values; parameters must already be substituted.
fn sat(phi: &ClockConstraint, clocks: &[String], vals: &[u64]) -> bool {
    phi.atoms().iter().all(|a| {
        let k = match a.bound {
            BoundTerm::Const(k) => k,
            BoundTerm::Param(_) => unreachable!("instantiated model"),
        };
        let i = clocks.iter().position(|c| *c == a.clock).expect("declared clock");
        a.rel.holds(&vals[i], &k)
    })
}

struct Explorer<'a> {
    m: &'a Pppta,
    clocks: Vec<String>,
    kmax: Vec<u64>,
}

impl Explorer<'_> {
    fn new(m: &Pppta) -> Explorer<'_> {
        let clocks = m.clock_list();
        let mc = m.max_constants(&ClockValuation::new()).expect("no clock parameters");
        let kmax = clocks.iter().map(|c| mc[c]).collect();
        Explorer { m, clocks, kmax }
    }

    fn valid(&self, s: &DigitalState) -> bool {
        sat(self.m.invariant(&s.location), &self.clocks, &s.clocks)
    }

    fn tick(&self, s: &DigitalState) -> Option<DigitalState> {
        let clocks = s
            .clocks
            .iter()
            .zip(&self.kmax)
            .map(|(v, k)| (v + 1).min(k + 1))
            .collect();
        let next = DigitalState {
            location: s.location.clone(),
            clocks,
        };
        self.valid(&next).then_some(next)
    }

    fn apply(&self, s: &DigitalState, o: &Outcome) -> DigitalState {
        let clocks = self
            .clocks
            .iter()
            .zip(&s.clocks)
            .map(|(c, v)| if o.resets.contains(c) { 0 } else { *v })
            .collect();
        DigitalState {
            location: o.target.clone(),
            clocks,
        }
    }

    /// Enabled actions with their successor distributions. Outcomes that would
    /// violate the target invariant are dropped (their mass goes to the sink).
    fn actions(&self, s: &DigitalState) -> Vec<(&str, Vec<(&RationalFunction, DigitalState)>)> {
        let mut out = Vec::new();
        for ((l, a), t) in self.m.transitions.range((s.location.clone(), String::new())..) {
            if *l != s.location {
                break;
            }
            if !sat(&t.guard, &self.clocks, &s.clocks) {
                continue;
            }
            let succ = t
                .branches
                .iter()
                .map(|(o, w)| (w, self.apply(s, o)))
                .filter(|(_, n)| self.valid(n))
                .collect();
            out.push((a.as_str(), succ));
        }
        out
    }
}

/// Builds the reachable digital-clock pMDP from `(l0, 0)`.
pub fn build_digital(m: &Pppta, targets: &BTreeSet<String>) -> Result<DigitalModel, DigitalError> {
    require_instantiated_closed(m)?;
    for t in targets {
        if !m.locations.contains_key(t) {
            return Err(DigitalError::UnknownLocation(t.clone()));
        }
    }
    let ex = Explorer::new(m);
    let init = DigitalState {
        location: m.initial.clone(),
        clocks: vec![0; ex.clocks.len()],
    };
    if !ex.valid(&init) {
        return Err(DigitalError::InitialInvariant(m.initial.clone()));
    }

    let mut b = Builder {
        pmdp: ParametricPmdp::new(),
        states: vec![None],
        index: HashMap::new(),
        queue: VecDeque::new(),
        clocks: ex.clocks.clone(),
    };
    b.pmdp.initial = b.intern(init);
    let mut target_set = BTreeSet::new();
    while let Some(i) = b.queue.pop_front() {
        let s = b.states[i].clone().expect("interned state");
        if targets.contains(&s.location) {
            target_set.insert(i);
            b.pmdp.add_action(i, DONE, vec![(RationalFunction::one(), i)]);
            continue;
        }
        let mut any = false;
        if let Some(n) = ex.tick(&s) {
            let j = b.intern(n);
            b.pmdp.add_action(i, TICK, vec![(RationalFunction::one(), j)]);
            any = true;
        }
        for (a, succ) in ex.actions(&s) {
            // outcomes landing in the same digital state are merged
            let mut merged: BTreeMap<usize, RationalFunction> = BTreeMap::new();
            for (w, n) in succ {
                let j = b.intern(n);
                let e = merged.entry(j).or_insert_with(RationalFunction::zero);
                *e = e.add(w);
            }
            b.pmdp.add_action(i, a, merged.into_iter().map(|(j, w)| (w, j)).collect());
            any = true;
        }
        if !any {
            b.pmdp.add_action(i, STUCK, Vec::new());
        }
    }
    Ok(DigitalModel {
        pmdp: b.pmdp,
        targets: target_set,
        states: b.states,
        max_constants: ex.kmax.clone(),
        clocks: ex.clocks.clone(),
    })
}

struct Builder {
    pmdp: ParametricPmdp,
    states: Vec<Option<DigitalState>>,
    index: HashMap<DigitalState, usize>,
    queue: VecDeque<usize>,
    clocks: Vec<String>,
}

impl Builder {
    fn intern(&mut self, s: DigitalState) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        let i = self.pmdp.add_state(s.label(&self.clocks));
        self.states.push(Some(s.clone()));
        self.index.insert(s, i);
        self.queue.push_back(i);
        i
    }
}

/// `[t]_ε`: round down when the fractional part is at most ε, else up.
pub fn epsilon_digitize_value(t: &Rational, eps: &Rational) -> BigInt {
    let fl = t.floor();
    if *t <= &fl + eps {
        fl.to_integer()
    } else {
        t.ceil().to_integer()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Delay(Rational),
    Action { action: String, outcome: Outcome },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    pub location: String,
    pub clocks: BTreeMap<String, Rational>,
}

/// `states[0] steps[0] states[1] ... states[n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub states: Vec<ConcreteState>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid path at step {step}: {reason}")]
pub struct PathError {
    pub step: usize,
    pub reason: String,
}

fn concrete_sat(phi: &ClockConstraint, nu: &BTreeMap<String, Rational>) -> bool {
    phi.atoms().iter().all(|a| {
        let k = match a.bound {
            BoundTerm::Const(k) => Rational::from_integer(k.into()),
            BoundTerm::Param(_) => return false,
        };
        nu.get(&a.clock).is_some_and(|v| a.rel.holds(v, &k))
    })
}

/// Checks a path against the concrete semantics of a clock-instantiated model.
pub fn check_path(m: &Pppta, path: &Path) -> Result<(), PathError> {
    let fail = |step, reason: String| Err(PathError { step, reason });
    if path.states.len() != path.steps.len() + 1 {
        return fail(0, "state and step counts do not match".into());
    }
    for (i, s) in path.states.iter().enumerate() {
        if !m.locations.contains_key(&s.location) {
            return fail(i, format!("unknown location `{}`", s.location));
        }
        if s.clocks.keys().ne(m.clocks.iter()) {
            return fail(i, "clock set does not match the model".into());
        }
        if s.clocks.values().any(|v| v.is_negative()) {
            return fail(i, "negative clock value".into());
        }
        if !concrete_sat(m.invariant(&s.location), &s.clocks) {
            return fail(i, format!("invariant of `{}` violated", s.location));
        }
    }
    for (i, step) in path.steps.iter().enumerate() {
        let (s, n) = (&path.states[i], &path.states[i + 1]);
        match step {
            Step::Delay(d) => {
                if d.is_negative() {
                    return fail(i, "negative delay".into());
                }
                let expect: BTreeMap<String, Rational> =
                    s.clocks.iter().map(|(c, v)| (c.clone(), v + d)).collect();
                if n.location != s.location || n.clocks != expect {
                    return fail(i, "delay successor mismatch".into());
                }
            }
            Step::Action { action, outcome } => {
                let Some(t) = m.transitions.get(&(s.location.clone(), action.clone())) else {
                    return fail(i, format!("no action `{action}` at `{}`", s.location));
                };
                if !concrete_sat(&t.guard, &s.clocks) {
                    return fail(i, format!("guard of `{action}` violated"));
                }
                match t.branches.get(outcome) {
                    Some(w) if !w.is_zero() => {}
                    _ => return fail(i, format!("`{action}` has no branch {outcome}")),
                }
                let expect: BTreeMap<String, Rational> = s
                    .clocks
                    .iter()
                    .map(|(c, v)| {
                        let v = if outcome.resets.contains(c) { Rational::zero() } else { v.clone() };
                        (c.clone(), v)
                    })
                    .collect();
                if n.location != outcome.target || n.clocks != expect {
                    return fail(i, "action successor mismatch".into());
                }
            }
        }
    }
    Ok(())
}

/// ε-digitization: cumulative durations are rounded with `[·]_ε` and every
/// clock is recomputed from the rounded time since its last reset.
pub fn epsilon_digitize_path(path: &Path, eps: &Rational) -> Result<Path, PathError> {
    if path.states.len() != path.steps.len() + 1 {
        return Err(PathError {
            step: 0,
            reason: "state and step counts do not match".into(),
        });
    }
    let first = &path.states[0];
    if first.clocks.values().any(|v| !v.is_zero()) {
        return Err(PathError {
            step: 0,
            reason: "path must start with all clocks at zero".into(),
        });
    }
    let round = |t: &Rational| Rational::from_integer(epsilon_digitize_value(t, eps));
    let mut dur = Rational::zero();
    let mut last_reset: BTreeMap<String, Rational> =
        first.clocks.keys().map(|c| (c.clone(), Rational::zero())).collect();
    let mut states = vec![first.clone()];
    let mut steps = Vec::with_capacity(path.steps.len());
    for (i, step) in path.steps.iter().enumerate() {
        let before = round(&dur);
        match step {
            Step::Delay(d) => {
                if d.is_negative() {
                    return Err(PathError {
                        step: i,
                        reason: format!("negative delay {}", rational_to_string(d)),
                    });
                }
                dur += d;
                steps.push(Step::Delay(round(&dur) - before));
            }
            Step::Action { outcome, .. } => {
                for c in &outcome.resets {
                    last_reset.insert(c.clone(), dur.clone());
                }
                steps.push(step.clone());
            }
        }
        let now = round(&dur);
        let clocks = last_reset
            .iter()
            .map(|(c, r)| (c.clone(), &now - round(r)))
            .collect();
        states.push(ConcreteState {
            location: path.states[i + 1].location.clone(),
            clocks,
        });
    }
    Ok(Path { states, steps })
}

/// Reports cycles of discrete transitions that can be taken without time
/// passing. An empty result means every scheduler of the digital model lets
/// time diverge, so min-reachability needs no caveat.
pub fn zero_time_cycle_check(m: &Pppta) -> Vec<String> {
    if m.clock_params.is_empty() && m.is_closed() {
        return digital_zero_cycles(m);
    }
    if m.is_closed() {
        let mut out = BTreeSet::new();
        for gamma in m.corners() {
            if let Ok(inst) = m.instantiate(&gamma, &Default::default()) {
                for w in digital_zero_cycles(&inst) {
                    out.insert(w);
                }
            }
        }
        return out.into_iter().collect();
    }
    location_cycles(m)
}

fn digital_zero_cycles(m: &Pppta) -> Vec<String> {
    let Ok(dm) = build_digital(m, &BTreeSet::new()) else {
        return Vec::new();
    };
    let n = dm.pmdp.num_states();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            dm.pmdp
                .actions(s)
                .iter()
                .filter(|a| a.label != TICK)
                .flat_map(|a| a.branches.iter().map(|(_, t)| *t))
                .collect()
        })
        .collect();
    cyclic_groups(n, &succ)
        .into_iter()
        .map(|comp| {
            let locs: BTreeSet<&str> = comp
                .iter()
                .filter_map(|&s| dm.states[s].as_ref().map(|d| d.location.as_str()))
                .collect();
            format!(
                "zero-time cycle through {}",
                locs.into_iter().collect::<Vec<_>>().join(", ")
            )
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Fallback for models the digital engine cannot build: every cycle in the
/// location graph is reported.
fn location_cycles(m: &Pppta) -> Vec<String> {
    let locs: Vec<&String> = m.locations.keys().collect();
    let pos = |l: &str| locs.iter().position(|x| *x == l);
    let mut succ = vec![Vec::new(); locs.len()];
    for ((l, _), t) in &m.transitions {
        if let Some(i) = pos(l) {
            for o in t.branches.keys() {
                if let Some(j) = pos(&o.target) {
                    succ[i].push(j);
                }
            }
        }
    }
    cyclic_groups(locs.len(), &succ)
        .into_iter()
        .map(|comp| {
            let mut names: Vec<&str> = comp.iter().map(|&i| locs[i].as_str()).collect();
            names.sort();
            format!("possible zero-time cycle through {}", names.join(", "))
        })
        .collect()
}

/// Strongly connected groups that contain a cycle (more than one node, or a self-loop).
fn cyclic_groups(n: usize, succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    // Kosaraju: order by finish time, then sweep the reversed graph
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for r in 0..n {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut stack = vec![(r, 0usize)];
        while let Some((v, i)) = stack.pop() {
            if i < succ[v].len() {
                stack.push((v, i + 1));
                let w = succ[v][i];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut pred = vec![Vec::new(); n];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            pred[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut groups = Vec::new();
    for &r in order.iter().rev() {
        if comp[r] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![r];
        comp[r] = id;
        let mut stack = vec![r];
        while let Some(v) = stack.pop() {
            for &w in &pred[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        groups.push(members);
    }
    groups
        .into_iter()
        .filter(|g| g.len() > 1 || succ[g[0]].contains(&g[0]))
        .collect()
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Delay(d) => write!(f, "delay {}", rational_to_string(d)),
            Step::Action { action, outcome } => write!(f, "{action} {outcome}"),
        }
    }
}
