//! Diagonal-free parametric clock constraints and combined valuations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::ratfun::{rational_to_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("identifier `{0}` has no value in the valuation")]
    Unassigned(String),
    #[error("negative delay {0}")]
    NegativeDelay(String),
    #[error("unknown clock `{0}`")]
    UnknownClock(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    pub const ALL: [Relation; 5] = [Relation::Le, Relation::Lt, Relation::Eq, Relation::Ge, Relation::Gt];

    /// `<=`, `<` and `==` bound the clock from above.
    pub fn is_upper(self) -> bool {
        matches!(self, Relation::Le | Relation::Lt | Relation::Eq)
    }

    /// `>=`, `>` and `==` bound the clock from below.
    pub fn is_lower(self) -> bool {
        matches!(self, Relation::Ge | Relation::Gt | Relation::Eq)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    pub fn holds<T: PartialOrd>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "==",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Right-hand side of an atom: a natural constant or a clock parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundTerm {
    Const(u64),
    Param(String),
}

impl fmt::Display for BoundTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundTerm::Const(k) => write!(f, "{k}"),
            BoundTerm::Param(p) => f.write_str(p),
        }
    }
}

/// `clock rel bound`. Exactly one clock per atom; differences are not representable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub clock: String,
    pub rel: Relation,
    pub bound: BoundTerm,
}

impl Atom {
    pub fn new(clock: &str, rel: Relation, bound: BoundTerm) -> Self {
        Atom {
            clock: clock.to_string(),
            rel,
            bound,
        }
    }

    pub fn constant(clock: &str, rel: Relation, k: u64) -> Self {
        Self::new(clock, rel, BoundTerm::Const(k))
    }

    pub fn param(clock: &str, rel: Relation, p: &str) -> Self {
        Self::new(clock, rel, BoundTerm::Param(p.to_string()))
    }

    fn sort_key(&self) -> (&str, &BoundTerm, Relation) {
        (&self.clock, &self.bound, self.rel)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.clock, self.rel, self.bound)
    }
}

/// Conjunction of atoms; the empty conjunction is `true`.
///
/// Atoms are kept sorted and pruned: of several constant upper (lower) bounds
/// on the same clock only the strongest survives, and a strict parametric
/// bound absorbs the non-strict one on the same clock and parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ClockConstraint {
    atoms: Vec<Atom>,
}

impl ClockConstraint {
    pub fn top() -> Self {
        Self::default()
    }

    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        ClockConstraint {
            atoms: prune(atoms.into_iter().collect()),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_top(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn and(&self, other: &ClockConstraint) -> ClockConstraint {
        Self::new(self.atoms.iter().chain(other.atoms.iter()).cloned())
    }

    pub fn is_closed(&self) -> bool {
        self.atoms.iter().all(|a| !a.rel.is_strict())
    }

    pub fn params(&self) -> BTreeSet<String> {
        self.atoms
            .iter()
            .filter_map(|a| match &a.bound {
                BoundTerm::Param(p) => Some(p.clone()),
                BoundTerm::Const(_) => None,
            })
            .collect()
    }

    pub fn is_parametric(&self) -> bool {
        self.atoms.iter().any(|a| matches!(a.bound, BoundTerm::Param(_)))
    }

    pub fn clocks(&self) -> BTreeSet<String> {
        self.atoms.iter().map(|a| a.clock.clone()).collect()
    }

    /// Replaces assigned clock parameters by their values and re-prunes.
    pub fn substitute(&self, gamma: &BTreeMap<String, u64>) -> ClockConstraint {
        Self::new(self.atoms.iter().map(|a| match &a.bound {
            BoundTerm::Param(p) => match gamma.get(p) {
                Some(v) => Atom::constant(&a.clock, a.rel, *v),
                None => a.clone(),
            },
            BoundTerm::Const(_) => a.clone(),
        }))
    }

    pub fn satisfied_by(&self, nu: &CombinedValuation) -> Result<bool, ConstraintError> {
        satisfies(nu, self)
    }
}

impl fmt::Display for ClockConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

fn prune(atoms: Vec<Atom>) -> Vec<Atom> {
    // strongest constant upper/lower bound per clock: (value, strict)
    let mut upper: BTreeMap<String, (u64, bool)> = BTreeMap::new();
    let mut lower: BTreeMap<String, (u64, bool)> = BTreeMap::new();
    let mut rest: Vec<Atom> = Vec::new();
    for a in atoms {
        match (&a.bound, a.rel) {
            (BoundTerm::Const(k), Relation::Le | Relation::Lt) => {
                let cand = (*k, a.rel.is_strict());
                let e = upper.entry(a.clock.clone()).or_insert(cand);
                if cand.0 < e.0 || (cand.0 == e.0 && cand.1) {
                    *e = cand;
                }
            }
            (BoundTerm::Const(k), Relation::Ge | Relation::Gt) => {
                let cand = (*k, a.rel.is_strict());
                let e = lower.entry(a.clock.clone()).or_insert(cand);
                if cand.0 > e.0 || (cand.0 == e.0 && cand.1) {
                    *e = cand;
                }
            }
            _ => rest.push(a),
        }
    }
    let mut out: Vec<Atom> = rest
        .iter()
        .filter(|a| {
            // drop `c <= p` when `c < p` is present, and `c >= p` when `c > p` is
            let stronger = match a.rel {
                Relation::Le => Some(Relation::Lt),
                Relation::Ge => Some(Relation::Gt),
                _ => None,
            };
            stronger.is_none_or(|s| {
                !rest
                    .iter()
                    .any(|b| b.clock == a.clock && b.bound == a.bound && b.rel == s)
            })
        })
        .cloned()
        .collect();
    for (c, (k, strict)) in upper {
        out.push(Atom::constant(&c, if strict { Relation::Lt } else { Relation::Le }, k));
    }
    for (c, (k, strict)) in lower {
        out.push(Atom::constant(&c, if strict { Relation::Gt } else { Relation::Ge }, k));
    }
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out.dedup();
    out
}

/// Clock values (nonnegative rationals) together with clock-parameter values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CombinedValuation {
    pub clocks: BTreeMap<String, Rational>,
    pub params: BTreeMap<String, u64>,
}

impl CombinedValuation {
    pub fn zero(clocks: impl IntoIterator<Item = String>, params: BTreeMap<String, u64>) -> Self {
        CombinedValuation {
            clocks: clocks.into_iter().map(|c| (c, Rational::zero())).collect(),
            params,
        }
    }

    pub fn delay(&self, delta: &Rational) -> Result<Self, ConstraintError> {
        delay(self, delta)
    }

    pub fn reset<'a>(&self, clocks: impl IntoIterator<Item = &'a String>) -> Result<Self, ConstraintError> {
        reset(self, clocks)
    }
}

impl fmt::Display for CombinedValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clocks
            .iter()
            .map(|(c, v)| format!("{c}={}", rational_to_string(v)))
            .chain(self.params.iter().map(|(p, v)| format!("{p}={v}")))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

pub fn satisfies(nu: &CombinedValuation, phi: &ClockConstraint) -> Result<bool, ConstraintError> {
    for a in phi.atoms() {
        let lhs = nu
            .clocks
            .get(&a.clock)
            .ok_or_else(|| ConstraintError::Unassigned(a.clock.clone()))?;
        let rhs = match &a.bound {
            BoundTerm::Const(k) => Rational::from_integer((*k).into()),
            BoundTerm::Param(p) => Rational::from_integer(
                (*nu.params
                    .get(p)
                    .ok_or_else(|| ConstraintError::Unassigned(p.clone()))?)
                .into(),
            ),
        };
        if !a.rel.holds(lhs, &rhs) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn delay(nu: &CombinedValuation, delta: &Rational) -> Result<CombinedValuation, ConstraintError> {
    if delta.is_negative() {
        return Err(ConstraintError::NegativeDelay(rational_to_string(delta)));
    }
    Ok(CombinedValuation {
        clocks: nu.clocks.iter().map(|(c, v)| (c.clone(), v + delta)).collect(),
        params: nu.params.clone(),
    })
}

pub fn reset<'a>(
    nu: &CombinedValuation,
    clocks: impl IntoIterator<Item = &'a String>,
) -> Result<CombinedValuation, ConstraintError> {
    let mut out = nu.clone();
    for c in clocks {
        match out.clocks.get_mut(c) {
            Some(v) => *v = Rational::zero(),
            None => return Err(ConstraintError::UnknownClock(c.clone())),
        }
    }
    Ok(out)
}
