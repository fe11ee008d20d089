//! The automaton record. Edges live in a (location, action)-indexed table of
//! guarded parametric distributions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::constraints::{Atom, BoundTerm, ClockConstraint, Relation};
use crate::ratfun::{rational_to_string, ParamValuation, RatFunError, Rational, RationalFunction};
use crate::zones::{Dbm, ZoneError};

/// Clock-parameter valuation (naturals).
pub type ClockValuation = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("value {value} for `{param}` lies outside its domain [{lo}, {hi}]")]
    OutOfDomain {
        param: String,
        value: String,
        lo: String,
        hi: String,
    },
    #[error("clock parameter `{0}` has no value")]
    MissingClockParameter(String),
    #[error("model still has clock parameters: {0}")]
    ResidualClockParameters(String),
    #[error("transition {location} -- {action}: {source}")]
    Weight {
        location: String,
        action: String,
        source: RatFunError,
    },
    #[error("transition {location} -- {action}: weight {value} ∉ [0,1]")]
    WeightRange {
        location: String,
        action: String,
        value: String,
    },
    #[error(transparent)]
    Zone(#[from] ZoneError),
}

/// A reset set paired with a target location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome {
    pub resets: BTreeSet<String>,
    pub target: String,
}

impl Outcome {
    pub fn new<S: AsRef<str>>(resets: impl IntoIterator<Item = S>, target: &str) -> Self {
        Outcome {
            resets: resets.into_iter().map(|s| s.as_ref().to_string()).collect(),
            target: target.to_string(),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r: Vec<&str> = self.resets.iter().map(String::as_str).collect();
        write!(f, "{{{}}}->{}", r.join(","), self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub guard: ClockConstraint,
    pub branches: BTreeMap<Outcome, RationalFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LuClass {
    Lower,
    Upper,
    Both,
    Unused,
}

impl fmt::Display for LuClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LuClass::Lower => "Lower",
            LuClass::Upper => "Upper",
            LuClass::Both => "Both",
            LuClass::Unused => "Unused",
        })
    }
}

/// What a validation diagnostic is about; the parser maps subjects to spans.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subject {
    Model,
    Param(String),
    Location(String),
    Edge(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Model => write!(f, "{}", self.message),
            Subject::Param(p) => write!(f, "parameter {p}: {}", self.message),
            Subject::Location(l) => write!(f, "location {l}: {}", self.message),
            Subject::Edge(l, a) => write!(f, "edge {l} -- {a}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pppta {
    pub name: String,
    pub clocks: BTreeSet<String>,
    pub clock_params: BTreeMap<String, (u64, u64)>,
    pub prob_params: BTreeMap<String, (Rational, Rational)>,
    /// Location name to invariant.
    pub locations: BTreeMap<String, ClockConstraint>,
    pub initial: String,
    pub transitions: BTreeMap<(String, String), Transition>,
}

impl Pppta {
    pub fn clock_list(&self) -> Vec<String> {
        self.clocks.iter().cloned().collect()
    }

    pub fn clock_index(&self, c: &str) -> Option<usize> {
        self.clocks.iter().position(|x| x == c)
    }

    pub fn actions(&self) -> BTreeSet<String> {
        self.transitions.keys().map(|(_, a)| a.clone()).collect()
    }

    pub fn invariant(&self, l: &str) -> &ClockConstraint {
        static TOP: std::sync::OnceLock<ClockConstraint> = std::sync::OnceLock::new();
        self.locations
            .get(l)
            .unwrap_or_else(|| TOP.get_or_init(ClockConstraint::top))
    }

    /// Every invariant and guard, in a fixed order.
    pub fn constraints(&self) -> impl Iterator<Item = &ClockConstraint> {
        self.locations
            .values()
            .chain(self.transitions.values().map(|t| &t.guard))
    }

    /// Zone of a constraint after substituting `gamma` (which must cover its parameters).
    pub fn zone(&self, phi: &ClockConstraint, gamma: &ClockValuation) -> Result<Dbm, ModelError> {
        Ok(Dbm::from_constraint(&phi.substitute(gamma), &self.clock_list())?)
    }

    /// Corners of the declared clock-parameter box.
    pub fn corners(&self) -> Vec<ClockValuation> {
        let mut out = vec![ClockValuation::new()];
        for (p, &(lo, hi)) in &self.clock_params {
            let vals: Vec<u64> = if lo == hi { vec![lo] } else { vec![lo, hi] };
            out = out
                .into_iter()
                .flat_map(|g| {
                    vals.iter().map(move |v| {
                        let mut g = g.clone();
                        g.insert(p.clone(), *v);
                        g
                    })
                })
                .collect();
        }
        out
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |subject: Subject, message: String| out.push(Diagnostic { subject, message });

        for p in self.clock_params.keys() {
            if self.prob_params.contains_key(p) {
                diag(
                    Subject::Param(p.clone()),
                    "declared both as clock parameter and probability parameter".into(),
                );
            }
        }
        for (p, (lo, hi)) in &self.clock_params {
            if lo > hi {
                diag(Subject::Param(p.clone()), format!("empty domain [{lo}, {hi}]"));
            }
        }
        for (p, (lo, hi)) in &self.prob_params {
            if lo > hi {
                diag(
                    Subject::Param(p.clone()),
                    format!("empty domain [{}, {}]", rational_to_string(lo), rational_to_string(hi)),
                );
            }
        }
        if !self.locations.contains_key(&self.initial) {
            diag(Subject::Model, format!("initial location `{}` is not declared", self.initial));
        }

        let check_constraint = |phi: &ClockConstraint, subject: &Subject, out: &mut Vec<Diagnostic>| {
            for a in phi.atoms() {
                if !self.clocks.contains(&a.clock) {
                    out.push(Diagnostic {
                        subject: subject.clone(),
                        message: format!("undeclared clock `{}`", a.clock),
                    });
                }
                if let BoundTerm::Param(p) = &a.bound {
                    if !self.clock_params.contains_key(p) {
                        out.push(Diagnostic {
                            subject: subject.clone(),
                            message: format!("undeclared clock parameter `{p}`"),
                        });
                    }
                }
            }
        };
        for (l, inv) in &self.locations {
            check_constraint(inv, &Subject::Location(l.clone()), &mut out);
        }
        for ((l, a), t) in &self.transitions {
            let subject = Subject::Edge(l.clone(), a.clone());
            if !self.locations.contains_key(l) {
                out.push(Diagnostic {
                    subject: subject.clone(),
                    message: format!("undeclared location `{l}`"),
                });
            }
            check_constraint(&t.guard, &subject, &mut out);
            if t.branches.is_empty() {
                out.push(Diagnostic {
                    subject: subject.clone(),
                    message: "distribution has no branches".into(),
                });
            }
            let mut sum = RationalFunction::zero();
            for (o, w) in &t.branches {
                if !self.locations.contains_key(&o.target) {
                    out.push(Diagnostic {
                        subject: subject.clone(),
                        message: format!("undeclared location `{}`", o.target),
                    });
                }
                for c in &o.resets {
                    if !self.clocks.contains(c) {
                        out.push(Diagnostic {
                            subject: subject.clone(),
                            message: format!("undeclared clock `{c}` in reset"),
                        });
                    }
                }
                for v in w.variables() {
                    if !self.prob_params.contains_key(&v) {
                        out.push(Diagnostic {
                            subject: subject.clone(),
                            message: format!("undeclared probability parameter `{v}`"),
                        });
                    }
                }
                sum = sum.add(w);
            }
            if !t.branches.is_empty() && !sum.equals(&RationalFunction::one()) {
                out.push(Diagnostic {
                    subject,
                    message: format!("distribution sums to {sum} ≠ 1"),
                });
            }
        }
        if !out.is_empty() {
            // the semantic checks below assume a well-referenced model
            return out;
        }

        if !self.initial_satisfiable() {
            out.push(Diagnostic {
                subject: Subject::Location(self.initial.clone()),
                message: "the all-zero clock valuation violates the initial invariant for every clock-parameter value"
                    .into(),
            });
        }
        out.extend(self.well_formedness());
        out
    }

    /// Is there a γ in the declared box with `0 ⊨ inv(l0)[γ]`?
    fn initial_satisfiable(&self) -> bool {
        // each atom mentions one parameter, so the check factorizes per parameter
        let mut need_zero: BTreeSet<&str> = BTreeSet::new();
        let mut need_pos: BTreeSet<&str> = BTreeSet::new();
        for a in self.invariant(&self.initial).atoms() {
            match &a.bound {
                BoundTerm::Const(k) => {
                    if !a.rel.holds(&0, k) {
                        return false;
                    }
                }
                BoundTerm::Param(p) => match a.rel {
                    Relation::Le => {}
                    Relation::Lt => {
                        need_pos.insert(p);
                    }
                    Relation::Eq | Relation::Ge => {
                        need_zero.insert(p);
                    }
                    Relation::Gt => return false,
                },
            }
        }
        let dom = |p: &str| self.clock_params.get(p).copied().unwrap_or((0, 0));
        need_zero.iter().all(|p| dom(p).0 == 0 && !need_pos.contains(p))
            && need_pos.iter().all(|p| dom(p).1 > 0)
    }

    /// Every branch of every enabled transition lands inside the target invariant,
    /// checked at the corners of the clock-parameter box.
    fn well_formedness(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for gamma in self.corners() {
            for ((l, a), t) in &self.transitions {
                let src = self
                    .zone(self.invariant(l), &gamma)
                    .and_then(|z| Ok(z.intersect(&self.zone(&t.guard, &gamma)?)?));
                let Ok(src) = src else { continue };
                if src.is_empty() {
                    continue;
                }
                for o in t.branches.keys() {
                    let idx: Vec<usize> = o.resets.iter().filter_map(|c| self.clock_index(c)).collect();
                    let img = src.reset(&idx);
                    let Ok(inv) = self.zone(self.invariant(&o.target), &gamma) else { continue };
                    if !inv.includes(&img).unwrap_or(false) {
                        out.push(Diagnostic {
                            subject: Subject::Edge(l.clone(), a.clone()),
                            message: format!(
                                "branch {o} can violate the invariant of `{}` at {}",
                                o.target,
                                render_gamma(&gamma)
                            ),
                        });
                    }
                }
            }
        }
        out.dedup();
        out
    }

    /// Partial instantiation of clock and probability parameters.
    pub fn instantiate(&self, gamma: &ClockValuation, rho: &ParamValuation) -> Result<Pppta, ModelError> {
        for (p, v) in gamma {
            let &(lo, hi) = self
                .clock_params
                .get(p)
                .ok_or_else(|| ModelError::UnknownParameter(p.clone()))?;
            if *v < lo || *v > hi {
                return Err(ModelError::OutOfDomain {
                    param: p.clone(),
                    value: v.to_string(),
                    lo: lo.to_string(),
                    hi: hi.to_string(),
                });
            }
        }
        for (p, v) in rho {
            let (lo, hi) = self
                .prob_params
                .get(p)
                .ok_or_else(|| ModelError::UnknownParameter(p.clone()))?;
            if v < lo || v > hi {
                return Err(ModelError::OutOfDomain {
                    param: p.clone(),
                    value: rational_to_string(v),
                    lo: rational_to_string(lo),
                    hi: rational_to_string(hi),
                });
            }
        }
        let mut m = self.clone();
        m.clock_params.retain(|p, _| !gamma.contains_key(p));
        m.prob_params.retain(|p, _| !rho.contains_key(p));
        for inv in m.locations.values_mut() {
            *inv = inv.substitute(gamma);
        }
        for ((l, a), t) in m.transitions.iter_mut() {
            t.guard = t.guard.substitute(gamma);
            if rho.is_empty() {
                continue;
            }
            for w in t.branches.values_mut() {
                *w = w.substitute(rho).map_err(|source| ModelError::Weight {
                    location: l.clone(),
                    action: a.clone(),
                    source,
                })?;
            }
        }
        Ok(m)
    }

    pub fn classify_lu(&self) -> BTreeMap<String, LuClass> {
        let mut upper = BTreeSet::new();
        let mut lower = BTreeSet::new();
        for phi in self.constraints() {
            for a in phi.atoms() {
                if let BoundTerm::Param(p) = &a.bound {
                    if a.rel.is_upper() {
                        upper.insert(p.clone());
                    }
                    if a.rel.is_lower() {
                        lower.insert(p.clone());
                    }
                }
            }
        }
        self.clock_params
            .keys()
            .map(|p| {
                let c = match (lower.contains(p), upper.contains(p)) {
                    (true, true) => LuClass::Both,
                    (true, false) => LuClass::Lower,
                    (false, true) => LuClass::Upper,
                    (false, false) => LuClass::Unused,
                };
                (p.clone(), c)
            })
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        self.constraints().all(ClockConstraint::is_closed)
    }

    /// Largest constant each clock is compared against under `gamma`.
    pub fn max_constants(&self, gamma: &ClockValuation) -> Result<BTreeMap<String, u64>, ModelError> {
        let mut out: BTreeMap<String, u64> = self.clocks.iter().map(|c| (c.clone(), 0)).collect();
        for phi in self.constraints() {
            for a in phi.atoms() {
                let k = match &a.bound {
                    BoundTerm::Const(k) => *k,
                    BoundTerm::Param(p) => *gamma
                        .get(p)
                        .ok_or_else(|| ModelError::MissingClockParameter(p.clone()))?,
                };
                let e = out.entry(a.clock.clone()).or_insert(0);
                *e = (*e).max(k);
            }
        }
        Ok(out)
    }

    /// Propagates target invariants backwards into guards so that no branch
    /// can leave the invariant. Transitions whose guard becomes unsatisfiable
    /// are removed.
    pub fn strengthen_guards(&self) -> Result<Pppta, ModelError> {
        if !self.clock_params.is_empty() {
            let names: Vec<&str> = self.clock_params.keys().map(String::as_str).collect();
            return Err(ModelError::ResidualClockParameters(names.join(", ")));
        }
        let mut m = self.clone();
        m.transitions.retain(|_, t| {
            let mut atoms: Vec<Atom> = t.guard.atoms().to_vec();
            for o in t.branches.keys() {
                for a in self.invariant(&o.target).atoms() {
                    if o.resets.contains(&a.clock) {
                        let k = match a.bound {
                            BoundTerm::Const(k) => k,
                            BoundTerm::Param(_) => unreachable!("instantiated"),
                        };
                        if !a.rel.holds(&0, &k) {
                            return false;
                        }
                    } else {
                        atoms.push(a.clone());
                    }
                }
            }
            t.guard = ClockConstraint::new(atoms);
            true
        });
        Ok(m)
    }

    /// Weights of one transition evaluated at `rho`, each checked to lie in [0,1].
    pub fn eval_weights(
        &self,
        l: &str,
        a: &str,
        rho: &ParamValuation,
    ) -> Result<BTreeMap<Outcome, Rational>, ModelError> {
        let t = &self.transitions[&(l.to_string(), a.to_string())];
        let err = |source| ModelError::Weight {
            location: l.to_string(),
            action: a.to_string(),
            source,
        };
        let mut out = BTreeMap::new();
        for (o, w) in &t.branches {
            let v = w.eval(rho).map_err(err)?;
            if v < Rational::zero() || v > Rational::one() {
                return Err(ModelError::WeightRange {
                    location: l.to_string(),
                    action: a.to_string(),
                    value: rational_to_string(&v),
                });
            }
            out.insert(o.clone(), v);
        }
        Ok(out)
    }
}

pub fn render_gamma(gamma: &ClockValuation) -> String {
    let parts: Vec<String> = gamma.iter().map(|(p, v)| format!("{p}={v}")).collect();
    parts.join(",")
}
