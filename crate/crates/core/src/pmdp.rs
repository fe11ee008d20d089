//! Finite parametric MDPs with an explicit sink, and exact/iterative
//! reachability solvers.
//!
//! Branch weights of an action may sum to less than one; the missing mass
//! goes to the sink. A state without actions behaves like the sink.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::ratfun::{rational_to_string, ParamValuation, RatFunError, Rational, RationalFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PmdpError {
    #[error("state {state} action {action}: weight {value} ∉ [0,1]")]
    WeightRange { state: String, action: String, value: String },
    #[error("state {state} action {action}: weights sum to {value} > 1")]
    MassExceeded { state: String, action: String, value: String },
    #[error("state {state} action {action}: {source}")]
    Eval {
        state: String,
        action: String,
        source: RatFunError,
    },
    #[error("{0} states have a choice; brute force is capped at {1}")]
    TooManyChoices(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action<W> {
    pub label: String,
    pub branches: Vec<(W, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pmdp<W> {
    labels: Vec<String>,
    actions: Vec<Vec<Action<W>>>,
    pub initial: usize,
    pub sink: usize,
}

pub type ParametricPmdp = Pmdp<RationalFunction>;
pub type Mdp = Pmdp<Rational>;

pub const SINK_LABEL: &str = "sink";

impl<W> Pmdp<W> {
    /// A model holding only the sink (state 0), which is also the initial state
    /// until `initial` is set.
    pub fn new() -> Self {
        Pmdp {
            labels: vec![SINK_LABEL.to_string()],
            actions: vec![Vec::new()],
            initial: 0,
            sink: 0,
        }
    }

    pub fn add_state(&mut self, label: impl Into<String>) -> usize {
        self.labels.push(label.into());
        self.actions.push(Vec::new());
        self.labels.len() - 1
    }

    pub fn add_action(&mut self, s: usize, label: impl Into<String>, branches: Vec<(W, usize)>) {
        self.actions[s].push(Action {
            label: label.into(),
            branches,
        });
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn actions(&self, s: usize) -> &[Action<W>] {
        if s == self.sink {
            &[]
        } else {
            &self.actions[s]
        }
    }

    fn map_weights<V, E>(
        &self,
        mut f: impl FnMut(usize, &Action<W>, &W) -> Result<Option<V>, E>,
    ) -> Result<Pmdp<V>, E> {
        let mut actions = Vec::with_capacity(self.actions.len());
        for (s, acts) in self.actions.iter().enumerate() {
            let mut out = Vec::with_capacity(acts.len());
            for a in acts {
                let mut branches = Vec::with_capacity(a.branches.len());
                for (w, t) in &a.branches {
                    if let Some(v) = f(s, a, w)? {
                        branches.push((v, *t));
                    }
                }
                out.push(Action {
                    label: a.label.clone(),
                    branches,
                });
            }
            actions.push(out);
        }
        Ok(Pmdp {
            labels: self.labels.clone(),
            actions,
            initial: self.initial,
            sink: self.sink,
        })
    }
}

impl<W> Default for Pmdp<W> {
    fn default() -> Self {
        Self::new()
    }
}

impl<W: fmt::Display> Pmdp<W> {
    /// Text export: one block per state, branches as `weight -> target`.
    pub fn export(&self, targets: &BTreeSet<usize>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pmdp states {}", self.num_states());
        let _ = writeln!(out, "initial {}", self.initial);
        let _ = writeln!(out, "sink {}", self.sink);
        let t: Vec<String> = targets.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "targets {}", t.join(" "));
        for s in 0..self.num_states() {
            let _ = writeln!(out, "state {s} \"{}\"", self.labels[s]);
            for a in self.actions(s) {
                let _ = writeln!(out, "  action \"{}\"", a.label);
                for (w, t) in &a.branches {
                    let _ = writeln!(out, "    {w} -> {t}");
                }
            }
        }
        out
    }
}

impl ParametricPmdp {
    /// Evaluates every weight at `rho`; zero-weight branches are dropped.
    pub fn instantiate(&self, rho: &ParamValuation) -> Result<Mdp, PmdpError> {
        let mdp = self.map_weights(|s, a, w| {
            let v = w.eval(rho).map_err(|source| PmdpError::Eval {
                state: self.labels[s].clone(),
                action: a.label.clone(),
                source,
            })?;
            if v.is_negative() || v > Rational::one() {
                return Err(PmdpError::WeightRange {
                    state: self.labels[s].clone(),
                    action: a.label.clone(),
                    value: rational_to_string(&v),
                });
            }
            Ok((!v.is_zero()).then_some(v))
        })?;
        for s in 0..mdp.num_states() {
            for a in mdp.actions(s) {
                let sum: Rational = a.branches.iter().map(|(w, _)| w).sum();
                if sum > Rational::one() {
                    return Err(PmdpError::MassExceeded {
                        state: mdp.labels[s].clone(),
                        action: a.label.clone(),
                        value: rational_to_string(&sum),
                    });
                }
            }
        }
        Ok(mdp)
    }
}

pub fn instantiate_pmdp(m: &ParametricPmdp, rho: &ParamValuation) -> Result<Mdp, PmdpError> {
    m.instantiate(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact,
    Iterate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Exact(Vec<Rational>),
    /// Value-iteration estimate; `last_step` is the final sup-norm update.
    Approx { values: Vec<f64>, last_step: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub values: Values,
    /// Chosen action index per state; `None` for targets, the sink and dead ends.
    pub scheduler: Vec<Option<usize>>,
}

/// A single state's value.
#[derive(Debug, Clone, PartialEq)]
pub enum ReachValue {
    Exact(Rational),
    Approx { value: f64, last_step: f64 },
}

impl ReachValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            ReachValue::Exact(v) => v.to_f64().unwrap_or(f64::NAN),
            ReachValue::Approx { value, .. } => *value,
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            ReachValue::Exact(v) => Some(v),
            ReachValue::Approx { .. } => None,
        }
    }
}

impl fmt::Display for ReachValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReachValue::Exact(v) => f.write_str(&rational_to_string(v)),
            ReachValue::Approx { value, last_step } => write!(f, "{value:.12} (last update {last_step:.1e})"),
        }
    }
}

impl ReachResult {
    pub fn value(&self, s: usize) -> ReachValue {
        match &self.values {
            Values::Exact(v) => ReachValue::Exact(v[s].clone()),
            Values::Approx { values, last_step, .. } => ReachValue::Approx {
                value: values[s],
                last_step: *last_step,
            },
        }
    }

    pub fn value_f64(&self, s: usize) -> f64 {
        match &self.values {
            Values::Exact(v) => v[s].to_f64().unwrap_or(f64::NAN),
            Values::Approx { values, .. } => values[s],
        }
    }

    pub fn exact(&self, s: usize) -> Option<&Rational> {
        match &self.values {
            Values::Exact(v) => Some(&v[s]),
            Values::Approx { .. } => None,
        }
    }
}

pub const VI_THRESHOLD: f64 = 1e-9;
pub const VI_MAX_ITERATIONS: usize = 1_000_000;
pub const BRUTE_FORCE_CAP: usize = 12;

/// An empty target set is allowed and yields probability 0 everywhere.
fn target_mask(m: &Mdp, targets: &BTreeSet<usize>) -> Vec<bool> {
    let mut t = vec![false; m.num_states()];
    for &s in targets {
        t[s] = true;
    }
    t
}

/// States that reach a target with positive probability under some scheduler.
fn can_reach(m: &Mdp, target: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in m.actions(s) {
            for (_, t) in &a.branches {
                preds[*t].push(s);
            }
        }
    }
    let mut seen = target.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// States from which some scheduler avoids the targets surely (greatest fixpoint).
fn can_avoid(m: &Mdp, target: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut avoid: Vec<bool> = target.iter().map(|t| !t).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !avoid[s] || m.actions(s).is_empty() {
                continue;
            }
            let ok = m
                .actions(s)
                .iter()
                .any(|a| a.branches.iter().all(|(_, t)| avoid[*t]));
            if !ok {
                avoid[s] = false;
                changed = true;
            }
        }
        if !changed {
            return avoid;
        }
    }
}

/// Successors reached with positive probability.
fn live(a: &Action<Rational>) -> impl Iterator<Item = usize> + '_ {
    a.branches.iter().filter(|(w, _)| w.is_positive()).map(|(_, t)| *t)
}

/// Missing mass goes to the sink, so only a full distribution can stay inside a set.
fn full_mass(a: &Action<Rational>) -> bool {
    a.branches.iter().fold(Rational::zero(), |acc, (w, _)| acc + w).is_one()
}

/// States that some scheduler drives to a target almost surely, with the
/// attractor action that does it.
fn prob1e(m: &Mdp, target: &[bool]) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = m.num_states();
    let mut u = vec![true; n];
    loop {
        let mut r = target.to_vec();
        let mut choice = vec![None; n];
        loop {
            let mut changed = false;
            for s in 0..n {
                if r[s] || !u[s] {
                    continue;
                }
                let pick = m.actions(s).iter().position(|a| {
                    full_mass(a) && live(a).all(|t| u[t]) && live(a).any(|t| r[t])
                });
                if pick.is_some() {
                    r[s] = true;
                    choice[s] = pick;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if r == u {
            return (r, choice);
        }
        u = r;
    }
}

/// States that every scheduler drives to a target almost surely, given the
/// states from which some scheduler avoids the targets surely.
fn prob1a(m: &Mdp, target: &[bool], avoid: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut bad = avoid.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if bad[s] || target[s] {
                continue;
            }
            if m.actions(s).iter().any(|a| !full_mass(a) || live(a).any(|t| bad[t])) {
                bad[s] = true;
                changed = true;
            }
        }
        if !changed {
            return bad.into_iter().map(|b| !b).collect();
        }
    }
}

fn q_value(a: &Action<Rational>, v: &[Rational]) -> Rational {
    a.branches
        .iter()
        .fold(Rational::zero(), |acc, (w, t)| acc + w * &v[*t])
}

pub fn solve_reach(
    m: &Mdp,
    targets: &BTreeSet<usize>,
    objective: Objective,
    mode: Mode,
) -> Result<ReachResult, PmdpError> {
    let target = target_mask(m, targets);
    let zero = match objective {
        Objective::Max => can_reach(m, &target).into_iter().map(|r| !r).collect(),
        Objective::Min => can_avoid(m, &target),
    };
    Ok(match mode {
        Mode::Exact => policy_iteration(m, &target, &zero, objective),
        Mode::Iterate => value_iteration(m, &target, &zero, objective),
    })
}

fn better(objective: Objective, a: &Rational, b: &Rational) -> bool {
    match objective {
        Objective::Max => a > b,
        Objective::Min => a < b,
    }
}

fn policy_iteration(m: &Mdp, target: &[bool], zero: &[bool], objective: Objective) -> ReachResult {
    let n = m.num_states();
    let maybe: Vec<bool> = (0..n).map(|s| !target[s] && !zero[s]).collect();
    let mut policy: Vec<Option<usize>> = vec![None; n];
    match objective {
        Objective::Max => {
            // attractor layering: each maybe state picks an action moving strictly closer
            let mut layer_done = target.to_vec();
            let mut frontier = true;
            while frontier {
                frontier = false;
                let mut newly = Vec::new();
                for s in 0..n {
                    if !maybe[s] || layer_done[s] {
                        continue;
                    }
                    if let Some(i) = m
                        .actions(s)
                        .iter()
                        .position(|a| a.branches.iter().any(|(_, t)| layer_done[*t]))
                    {
                        policy[s] = Some(i);
                        newly.push(s);
                    }
                }
                for s in newly {
                    layer_done[s] = true;
                    frontier = true;
                }
            }
        }
        Objective::Min => {
            for s in 0..n {
                if maybe[s] {
                    policy[s] = Some(0);
                }
            }
        }
    }
    loop {
        let v = evaluate_policy(m, target, &maybe, &policy);
        let mut changed = false;
        for s in 0..n {
            let Some(cur) = policy[s] else { continue };
            let mut best = cur;
            let mut best_q = v[s].clone();
            for (i, a) in m.actions(s).iter().enumerate() {
                let q = q_value(a, &v);
                if better(objective, &q, &best_q) {
                    best = i;
                    best_q = q;
                }
            }
            if best != cur {
                policy[s] = Some(best);
                changed = true;
            }
        }
        if !changed {
            return ReachResult {
                values: Values::Exact(v),
                scheduler: policy,
            };
        }
    }
}

/// Exact values of the chain induced by `policy` on the `maybe` states;
/// targets get 1 and everything else 0.
fn evaluate_policy(m: &Mdp, target: &[bool], maybe: &[bool], policy: &[Option<usize>]) -> Vec<Rational> {
    let n = m.num_states();
    let mut v: Vec<Rational> = (0..n)
        .map(|s| if target[s] { Rational::one() } else { Rational::zero() })
        .collect();
    let succ = |s: usize| -> &[(Rational, usize)] {
        match policy[s] {
            Some(i) if maybe[s] => &m.actions(s)[i].branches,
            _ => &[],
        }
    };
    for comp in sccs(n, |s| succ(s).iter().map(|(_, t)| *t).collect()) {
        let comp: Vec<usize> = comp.into_iter().filter(|&s| maybe[s]).collect();
        if comp.is_empty() {
            continue;
        }
        let index: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut rows: Vec<BTreeMap<usize, Rational>> = Vec::with_capacity(comp.len());
        let mut rhs: Vec<Rational> = Vec::with_capacity(comp.len());
        for &s in &comp {
            let mut row = BTreeMap::new();
            row.insert(index[&s], Rational::one());
            let mut b = Rational::zero();
            for (w, t) in succ(s) {
                match index.get(t) {
                    Some(&j) => {
                        let e = row.entry(j).or_insert_with(Rational::zero);
                        *e -= w;
                    }
                    None => b += w * &v[*t],
                }
            }
            row.retain(|_, c| !c.is_zero());
            rows.push(row);
            rhs.push(b);
        }
        let x = solve_sparse(rows, rhs);
        for (i, &s) in comp.iter().enumerate() {
            v[s] = x[i].clone();
        }
    }
    v
}

/// Gauss–Jordan elimination on sparse rows; the system must be nonsingular.
pub(crate) fn solve_sparse(mut rows: Vec<BTreeMap<usize, Rational>>, mut rhs: Vec<Rational>) -> Vec<Rational> {
    let n = rows.len();
    if n == 1 {
        let c = rows[0].get(&0).expect("nonsingular system");
        return vec![&rhs[0] / c];
    }
    // column -> rows with a nonzero entry there
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &c in row.keys() {
            col_rows[c].insert(r);
        }
    }
    for k in 0..n {
        let p = if rows[k].contains_key(&k) {
            k
        } else {
            *col_rows[k]
                .iter()
                .find(|&&r| r > k)
                .expect("nonsingular system")
        };
        if p != k {
            rows.swap(p, k);
            rhs.swap(p, k);
            for c in rows[k].keys().chain(rows[p].keys()) {
                let set = &mut col_rows[*c];
                let (hk, hp) = (set.contains(&k), set.contains(&p));
                if hk != hp {
                    if hk {
                        set.remove(&k);
                        set.insert(p);
                    } else {
                        set.remove(&p);
                        set.insert(k);
                    }
                }
            }
        }
        let pivot = rows[k][&k].clone();
        if !pivot.is_one() {
            let inv = pivot.recip();
            for c in rows[k].values_mut() {
                *c *= &inv;
            }
            rhs[k] *= &inv;
        }
        let pivot_row = rows[k].clone();
        let pivot_rhs = rhs[k].clone();
        let targets: Vec<usize> = col_rows[k].iter().copied().filter(|&r| r != k).collect();
        for r in targets {
            let f = rows[r][&k].clone();
            for (c, pv) in &pivot_row {
                let e = rows[r].entry(*c).or_insert_with(Rational::zero);
                *e -= &f * pv;
                if e.is_zero() {
                    rows[r].remove(c);
                    col_rows[*c].remove(&r);
                } else {
                    col_rows[*c].insert(r);
                }
            }
            let d = &f * &pivot_rhs;
            rhs[r] -= d;
        }
    }
    rhs
}

/// Tarjan's algorithm, iterative; components come out in reverse topological
/// order (successors first).
fn sccs(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, succ(root), 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, children, i)) = call.last_mut() {
            let v = *v;
            if *i < children.len() {
                let w = children[*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let cw = succ(w);
                    call.push((w, cw, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((u, _, _)) = call.last() {
                    low[*u] = low[*u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn value_iteration(m: &Mdp, target: &[bool], zero: &[bool], objective: Objective) -> ReachResult {
    let n = m.num_states();
    let fa: Vec<Vec<Vec<(f64, usize)>>> = (0..n)
        .map(|s| {
            m.actions(s)
                .iter()
                .map(|a| {
                    a.branches
                        .iter()
                        .map(|(w, t)| (w.to_f64().unwrap_or(0.0), *t))
                        .collect()
                })
                .collect()
        })
        .collect();
    let (one, attractor) = match objective {
        Objective::Max => prob1e(m, target),
        Objective::Min => (prob1a(m, target, zero), vec![None; n]),
    };
    let mut v: Vec<f64> = (0..n).map(|s| if one[s] { 1.0 } else { 0.0 }).collect();
    let active: Vec<usize> = (0..n).filter(|&s| !one[s] && !zero[s]).collect();
    let mut iterations = 0;
    let mut step = 0.0;
    while iterations < VI_MAX_ITERATIONS {
        iterations += 1;
        step = 0.0f64;
        for &s in &active {
            let qs = fa[s].iter().map(|bs| bs.iter().map(|(w, t)| w * v[*t]).sum::<f64>());
            let nv = match objective {
                Objective::Max => qs.fold(0.0, f64::max),
                Objective::Min => qs.fold(f64::INFINITY, f64::min),
            };
            let nv = if nv.is_finite() { nv } else { 0.0 };
            step = step.max((nv - v[s]).abs());
            v[s] = nv;
        }
        if step < VI_THRESHOLD {
            break;
        }
    }
    let scheduler = (0..n)
        .map(|s| {
            if target[s] || fa[s].is_empty() || zero[s] && objective == Objective::Max {
                return None;
            }
            if attractor[s].is_some() {
                return attractor[s];
            }
            let qs: Vec<f64> = fa[s]
                .iter()
                .map(|bs| bs.iter().map(|(w, t)| w * v[*t]).sum())
                .collect();
            let mut best = 0;
            for (i, q) in qs.iter().enumerate() {
                let improves = match objective {
                    Objective::Max => *q > qs[best],
                    Objective::Min => *q < qs[best],
                };
                if improves {
                    best = i;
                }
            }
            Some(best)
        })
        .collect();
    ReachResult {
        values: Values::Approx {
            values: v,
            last_step: step,
            iterations,
        },
        scheduler,
    }
}

/// Exact reachability in the Markov chain induced by a memoryless deterministic
/// scheduler (`None` means no move, i.e. value 0 unless a target).
pub fn chain_reach(m: &Mdp, scheduler: &[Option<usize>], targets: &BTreeSet<usize>) -> Vec<Rational> {
    let n = m.num_states();
    let mut target = vec![false; n];
    for &t in targets {
        target[t] = true;
    }
    // backward reachability inside the chain
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        if target[s] {
            continue;
        }
        if let Some(a) = scheduler[s].and_then(|i| m.actions(s).get(i)) {
            for (_, t) in &a.branches {
                preds[*t].push(s);
            }
        }
    }
    let mut reach = target.clone();
    let mut queue: Vec<usize> = targets.iter().copied().collect();
    while let Some(t) = queue.pop() {
        for &s in &preds[t] {
            if !reach[s] {
                reach[s] = true;
                queue.push(s);
            }
        }
    }
    let maybe: Vec<bool> = (0..n).map(|s| reach[s] && !target[s]).collect();
    evaluate_policy(m, &target, &maybe, scheduler)
}

/// Optimum from the initial state over all memoryless deterministic schedulers.
pub fn brute_force_reach(m: &Mdp, targets: &BTreeSet<usize>, objective: Objective) -> Result<Rational, PmdpError> {
    let n = m.num_states();
    let choice: Vec<usize> = (0..n)
        .filter(|s| !targets.contains(s) && m.actions(*s).len() >= 2)
        .collect();
    if choice.len() > BRUTE_FORCE_CAP {
        return Err(PmdpError::TooManyChoices(choice.len(), BRUTE_FORCE_CAP));
    }
    let mut sched: Vec<Option<usize>> = (0..n)
        .map(|s| (!targets.contains(&s) && !m.actions(s).is_empty()).then_some(0))
        .collect();
    let mut best: Option<Rational> = None;
    loop {
        let v = chain_reach(m, &sched, targets).swap_remove(m.initial);
        if best.as_ref().is_none_or(|b| better(objective, &v, b)) {
            best = Some(v);
        }
        // odometer over the choice states
        let mut k = 0;
        loop {
            if k == choice.len() {
                return Ok(best.expect("at least one scheduler"));
            }
            let s = choice[k];
            let i = sched[s].unwrap() + 1;
            if i < m.actions(s).len() {
                sched[s] = Some(i);
                break;
            }
            sched[s] = Some(0);
            k += 1;
        }
    }
}
