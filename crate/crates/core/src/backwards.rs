//! Symbolic backwards exploration from a target, maximal edge selections and
//! the induced sub-pMDP used for maximal reachability.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use num_traits::Zero;
use thiserror::Error;

use crate::model::{ClockValuation, ModelError, Outcome, Pppta};
use crate::pmdp::{solve_reach, Mode, Objective, ParametricPmdp, PmdpError, ReachValue};
use crate::ratfun::{ParamValuation, Rational, RationalFunction};
use crate::zones::Dbm;

pub const DEFAULT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackwardsError {
    #[error("model still has clock parameters: {0}")]
    ClockParameters(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pmdp(#[from] PmdpError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicState {
    pub location: String,
    pub zone: Dbm,
}

/// `source --(source.location, action), outcome--> target`, as state indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub source: usize,
    pub action: String,
    pub outcome: Outcome,
    pub target: usize,
}

/// Per-location target zones.
pub type TargetAssignment = BTreeMap<String, Dbm>;

/// Every valuation at each of the given locations.
pub fn location_targets(m: &Pppta, targets: &BTreeSet<String>) -> Result<TargetAssignment, BackwardsError> {
    targets
        .iter()
        .map(|l| {
            if !m.locations.contains_key(l) {
                return Err(BackwardsError::UnknownLocation(l.clone()));
            }
            Ok((l.clone(), Dbm::universal(m.clocks.len())))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BackwardsSystem {
    pub clocks: Vec<String>,
    pub states: Vec<SymbolicState>,
    pub edges: Vec<Edge>,
    /// Indices of the seed states (the time-predecessor closure of the targets).
    pub seeds: BTreeSet<usize>,
    pub truncated: bool,
    pub applications: usize,
}

/// Intersection of edge source zones for one (location, action), tagged
/// with the outcomes whose edges took part.
#[derive(Clone, PartialEq, Eq, Hash)]
struct Combo {
    zone: Dbm,
    outcomes: BTreeSet<Outcome>,
}

fn zone_of(m: &Pppta, l: &str) -> Result<Dbm, BackwardsError> {
    Ok(m.zone(m.invariant(l), &ClockValuation::new())?)
}

/// `(l, down(ζ) ∩ inv(l))`.
pub fn pre_time_state(m: &Pppta, s: &SymbolicState) -> Result<SymbolicState, BackwardsError> {
    let inv = zone_of(m, &s.location)?;
    Ok(SymbolicState {
        location: s.location.clone(),
        zone: s.zone.down().intersect(&inv).map_err(ModelError::from)?,
    })
}

/// Predecessor through the transition `(source, action)` with reset set `resets`:
/// `(source, ζ[R⁻¹] ∩ guard ∩ inv(source))`; `None` when empty.
pub fn pre_edge(
    m: &Pppta,
    s: &SymbolicState,
    source: &str,
    action: &str,
    resets: &BTreeSet<String>,
) -> Result<Option<SymbolicState>, BackwardsError> {
    let t = &m.transitions[&(source.to_string(), action.to_string())];
    let idx: Vec<usize> = resets.iter().filter_map(|c| m.clock_index(c)).collect();
    let guard = m.zone(&t.guard, &ClockValuation::new())?;
    let inv = zone_of(m, source)?;
    let zone = s
        .zone
        .inverse_reset(&idx)
        .intersect(&guard)
        .and_then(|z| z.intersect(&inv))
        .map_err(ModelError::from)?;
    Ok((!zone.is_empty()).then(|| SymbolicState {
        location: source.to_string(),
        zone,
    }))
}

struct Explorer<'a> {
    m: &'a Pppta,
    sys: BackwardsSystem,
    index: HashMap<SymbolicState, usize>,
    edge_set: BTreeSet<Edge>,
    combos: BTreeMap<(String, String), Vec<Combo>>,
    combo_index: HashMap<Combo, usize>,
    seeds_by_loc: BTreeMap<String, Vec<Dbm>>,
    queue: VecDeque<usize>,
    cap: usize,
}

impl Explorer<'_> {
    fn covered_by_seed(&self, s: &SymbolicState) -> bool {
        self.seeds_by_loc
            .get(&s.location)
            .is_some_and(|zs| zs.iter().any(|z| z.includes(&s.zone).unwrap_or(false)))
    }

    /// Returns `false` once the cap is exhausted.
    fn budget(&mut self) -> bool {
        if self.sys.applications >= self.cap {
            self.sys.truncated = true;
            return false;
        }
        true
    }

    fn intern(&mut self, s: SymbolicState) -> (usize, bool) {
        if let Some(&i) = self.index.get(&s) {
            return (i, false);
        }
        let i = self.sys.states.len();
        self.sys.states.push(s.clone());
        self.index.insert(s, i);
        self.queue.push_back(i);
        (i, true)
    }

    /// STEP from state `i`.
    fn step(&mut self, i: usize) -> Result<bool, BackwardsError> {
        let s = self.sys.states[i].clone();
        let pt = pre_time_state(self.m, &s)?;
        for ((src, action), t) in &self.m.transitions {
            for (o, w) in &t.branches {
                if o.target != s.location || w.is_zero() {
                    continue;
                }
                let Some(pred) = pre_edge(self.m, &pt, src, action, &o.resets)? else {
                    continue;
                };
                if self.covered_by_seed(&pred) {
                    continue;
                }
                let known = self.index.get(&pred).copied();
                if let Some(j) = known {
                    let e = Edge {
                        source: j,
                        action: action.clone(),
                        outcome: o.clone(),
                        target: i,
                    };
                    if self.edge_set.contains(&e) {
                        continue;
                    }
                }
                if !self.budget() {
                    return Ok(false);
                }
                self.sys.applications += 1;
                let (j, _) = self.intern(pred);
                let e = Edge {
                    source: j,
                    action: action.clone(),
                    outcome: o.clone(),
                    target: i,
                };
                self.edge_set.insert(e.clone());
                self.sys.edges.push(e.clone());
                if !self.sub(&e)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// SUB: closes the intersections of source zones of edges with the same
    /// label and pairwise distinct outcomes.
    fn sub(&mut self, e: &Edge) -> Result<bool, BackwardsError> {
        let key = (self.sys.states[e.source].location.clone(), e.action.clone());
        let zone = self.sys.states[e.source].zone.clone();
        let existing = self.combos.get(&key).cloned().unwrap_or_default();
        let mut fresh = vec![Combo {
            zone: zone.clone(),
            outcomes: [e.outcome.clone()].into(),
        }];
        for c in &existing {
            if c.outcomes.contains(&e.outcome) {
                continue;
            }
            let z = c.zone.intersect(&zone).map_err(ModelError::from)?;
            if z.is_empty() {
                continue;
            }
            let mut outcomes = c.outcomes.clone();
            outcomes.insert(e.outcome.clone());
            fresh.push(Combo { zone: z, outcomes });
        }
        for c in fresh {
            if self.combo_index.contains_key(&c) {
                continue;
            }
            let derived = c.outcomes.len() > 1;
            let st = SymbolicState {
                location: key.0.clone(),
                zone: c.zone.clone(),
            };
            if derived {
                if self.covered_by_seed(&st) {
                    continue;
                }
                if !self.index.contains_key(&st) {
                    if !self.budget() {
                        return Ok(false);
                    }
                    self.sys.applications += 1;
                    self.intern(st);
                }
            }
            let list = self.combos.entry(key.clone()).or_default();
            self.combo_index.insert(c.clone(), list.len());
            list.push(c);
        }
        Ok(true)
    }
}

/// Builds the backwards system for a clock-instantiated model; stops after
/// `cap` rule applications and then flags the result as truncated.
pub fn explore(m: &Pppta, targets: &TargetAssignment, cap: usize) -> Result<BackwardsSystem, BackwardsError> {
    if !m.clock_params.is_empty() {
        let names: Vec<&str> = m.clock_params.keys().map(String::as_str).collect();
        return Err(BackwardsError::ClockParameters(names.join(", ")));
    }
    let mut ex = Explorer {
        m,
        sys: BackwardsSystem {
            clocks: m.clock_list(),
            states: Vec::new(),
            edges: Vec::new(),
            seeds: BTreeSet::new(),
            truncated: false,
            applications: 0,
        },
        index: HashMap::new(),
        edge_set: BTreeSet::new(),
        combos: BTreeMap::new(),
        combo_index: HashMap::new(),
        seeds_by_loc: BTreeMap::new(),
        queue: VecDeque::new(),
        cap,
    };
    for (l, z) in targets {
        if !m.locations.contains_key(l) {
            return Err(BackwardsError::UnknownLocation(l.clone()));
        }
        if z.is_empty() {
            continue;
        }
        let inv = zone_of(m, l)?;
        let zone = z.intersect(&inv).map_err(ModelError::from)?;
        if zone.is_empty() {
            continue;
        }
        let seed = pre_time_state(m, &SymbolicState { location: l.clone(), zone })?;
        ex.seeds_by_loc.entry(l.clone()).or_default().push(seed.zone.clone());
        let (i, _) = ex.intern(seed);
        ex.sys.seeds.insert(i);
    }
    while let Some(i) = ex.queue.pop_front() {
        if !ex.step(i)? {
            break;
        }
    }
    Ok(ex.sys)
}

/// One pick per outcome: `(outcome, edge index)`.
pub type EdgeSelection = BTreeMap<Outcome, usize>;

/// All maximal selections for `action` at state `s`: the product over outcomes
/// of the edges whose source zone includes `zone(s)`.
pub fn max_edge_selections(sys: &BackwardsSystem, action: &str, s: usize) -> Vec<EdgeSelection> {
    let st = &sys.states[s];
    let mut per_outcome: BTreeMap<&Outcome, Vec<usize>> = BTreeMap::new();
    for (k, e) in sys.edges.iter().enumerate() {
        let src = &sys.states[e.source];
        if e.action == action && src.location == st.location && src.zone.includes(&st.zone).unwrap_or(false) {
            per_outcome.entry(&e.outcome).or_default().push(k);
        }
    }
    if per_outcome.is_empty() {
        return Vec::new();
    }
    let mut out = vec![EdgeSelection::new()];
    for (o, cands) in per_outcome {
        out = out
            .into_iter()
            .flat_map(|sel| {
                cands.iter().map(move |&k| {
                    let mut sel = sel.clone();
                    sel.insert(o.clone(), k);
                    sel
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone)]
pub struct SubPmdp {
    pub pmdp: ParametricPmdp,
    pub targets: BTreeSet<usize>,
    /// pMDP state of each system state.
    pub state_of: Vec<usize>,
}

/// The sub-pMDP: one action per (action, maximal selection); unpicked outcomes
/// lose their mass to the sink.
pub fn build_sub_pmdp(m: &Pppta, sys: &BackwardsSystem) -> SubPmdp {
    let mut pmdp = ParametricPmdp::new();
    let state_of: Vec<usize> = sys
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| pmdp.add_state(format!("#{i} {} [{}]", s.location, s.zone.render(&sys.clocks))))
        .collect();
    let targets: BTreeSet<usize> = sys.seeds.iter().map(|&i| state_of[i]).collect();
    for (i, s) in sys.states.iter().enumerate() {
        if sys.seeds.contains(&i) {
            continue;
        }
        let actions: BTreeSet<&String> = sys
            .edges
            .iter()
            .filter(|e| sys.states[e.source].location == s.location)
            .map(|e| &e.action)
            .collect();
        for a in actions {
            let t = &m.transitions[&(s.location.clone(), a.clone())];
            for sel in max_edge_selections(sys, a, i) {
                let mut merged: BTreeMap<usize, RationalFunction> = BTreeMap::new();
                let mut parts = Vec::new();
                for (o, &k) in &sel {
                    let dst = state_of[sys.edges[k].target];
                    let e = merged.entry(dst).or_insert_with(RationalFunction::zero);
                    *e = e.add(&t.branches[o]);
                    parts.push(format!("{o}:#{}", sys.edges[k].target));
                }
                pmdp.add_action(
                    state_of[i],
                    format!("({a}, {{{}}})", parts.join(" ")),
                    merged.into_iter().map(|(d, w)| (w, d)).collect(),
                );
            }
        }
    }
    if let Some(&first) = state_of.first() {
        pmdp.initial = first;
    }
    SubPmdp {
        pmdp,
        targets,
        state_of,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxReach {
    pub value: ReachValue,
    /// System state attaining the value.
    pub witness: Option<usize>,
    /// The system was truncated, so the value is only a lower bound.
    pub lower_bound: bool,
}

/// Maximal probability of reaching the targets from the concrete state
/// `(location, nu)` (clock values in the model's clock order).
pub fn max_reach_eval(
    m: &Pppta,
    sys: &BackwardsSystem,
    sub: &SubPmdp,
    location: &str,
    nu: &[Rational],
    rho: &ParamValuation,
    mode: Mode,
) -> Result<MaxReach, BackwardsError> {
    let mut covering = Vec::new();
    for (i, s) in sys.states.iter().enumerate() {
        if s.location == location && pre_time_state(m, s)?.zone.contains(nu) {
            covering.push(i);
        }
    }
    let mut best = MaxReach {
        value: ReachValue::Exact(Rational::zero()),
        witness: None,
        lower_bound: sys.truncated,
    };
    if covering.is_empty() {
        return Ok(best);
    }
    let mdp = sub.pmdp.instantiate(rho)?;
    let res = solve_reach(&mdp, &sub.targets, Objective::Max, mode)?;
    if mode == Mode::Iterate {
        best.value = ReachValue::Approx {
            value: 0.0,
            last_step: 0.0,
        };
    }
    for i in covering {
        let v = res.value(sub.state_of[i]);
        let better = match (&v, &best.value) {
            (ReachValue::Exact(a), ReachValue::Exact(b)) => a > b,
            (a, b) => a.to_f64() > b.to_f64(),
        };
        if best.witness.is_none() || better {
            best.value = v;
            best.witness = Some(i);
        }
    }
    Ok(best)
}

impl BackwardsSystem {
    /// Ordered listing of states and labelled edges.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.states.iter().enumerate() {
            let tag = if self.seeds.contains(&i) { " (seed)" } else { "" };
            let _ = writeln!(out, "state #{i} {} [{}]{tag}", s.location, s.zone.render(&self.clocks));
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge #{} --{} {}--> #{}", e.source, e.action, e.outcome, e.target);
        }
        if self.truncated {
            out.push_str("truncated\n");
        }
        out
    }
}

impl fmt::Display for BackwardsSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}
