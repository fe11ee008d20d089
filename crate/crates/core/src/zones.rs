//! Clock zones as canonical difference-bounded matrices.
//!
//! Entry `(i, j)` bounds `x_i - x_j`, where index 0 is the constant-zero
//! reference clock and clock `k` of the caller's clock list has index `k + 1`.
//! Every public operation returns a canonical (shortest-path closed) matrix;
//! all empty zones share one representation so that `==` is set equality.

use std::cmp::Ordering;

use thiserror::Error;

use crate::constraints::{Atom, BoundTerm, ClockConstraint, Relation};
use crate::ratfun::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZoneError {
    #[error("atom `{0}` still has a parametric bound")]
    Parametric(String),
    #[error("clock `{0}` is not part of the zone's clock set")]
    UnknownClock(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Upper bound `<= value` or `< value`; `value == i64::MAX` encodes `< +inf`-free infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bound {
    value: i64,
    strict: bool,
}

impl Bound {
    pub const INF: Bound = Bound {
        value: i64::MAX,
        strict: false,
    };
    pub const LE_ZERO: Bound = Bound {
        value: 0,
        strict: false,
    };

    pub fn le(value: i64) -> Self {
        Bound { value, strict: false }
    }

    pub fn lt(value: i64) -> Self {
        Bound { value, strict: true }
    }

    pub fn is_inf(self) -> bool {
        self.value == i64::MAX
    }

    pub fn value(self) -> Option<i64> {
        (!self.is_inf()).then_some(self.value)
    }

    pub fn is_strict(self) -> bool {
        self.strict
    }

    fn add(self, other: Bound) -> Bound {
        if self.is_inf() || other.is_inf() {
            return Bound::INF;
        }
        Bound {
            value: self.value + other.value,
            strict: self.strict || other.strict,
        }
    }

    /// Does the real number `d` satisfy `d <= value` (or `<`)?
    fn admits(self, d: &Rational) -> bool {
        if self.is_inf() {
            return true;
        }
        let v = Rational::from_integer(self.value.into());
        if self.strict {
            *d < v
        } else {
            *d <= v
        }
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        // `< k` is tighter than `<= k`
        self.value
            .cmp(&other.value)
            .then_with(|| other.strict.cmp(&self.strict))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dbm {
    dim: usize,
    m: Vec<Bound>,
}

impl Dbm {
    /// All valuations with nonnegative clocks.
    pub fn universal(clocks: usize) -> Self {
        let dim = clocks + 1;
        let mut m = vec![Bound::INF; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = Bound::LE_ZERO;
            m[i] = Bound::LE_ZERO; // row 0: 0 - x_i <= 0
        }
        Dbm { dim, m }
    }

    /// The single valuation with every clock at zero.
    pub fn zero(clocks: usize) -> Self {
        let dim = clocks + 1;
        Dbm {
            dim,
            m: vec![Bound::LE_ZERO; dim * dim],
        }
    }

    pub fn empty(clocks: usize) -> Self {
        let dim = clocks + 1;
        let mut m = vec![Bound::LE_ZERO; dim * dim];
        m[0] = Bound::le(-1);
        Dbm { dim, m }
    }

    /// Builds the zone of a parameter-free constraint over `clocks`.
    pub fn from_constraint(phi: &ClockConstraint, clocks: &[String]) -> Result<Self, ZoneError> {
        let mut z = Dbm::universal(clocks.len());
        for a in phi.atoms() {
            z.constrain_atom(a, clocks)?;
        }
        Ok(z.closed())
    }

    fn constrain_atom(&mut self, a: &Atom, clocks: &[String]) -> Result<(), ZoneError> {
        let k = match a.bound {
            BoundTerm::Const(k) => k as i64,
            BoundTerm::Param(_) => return Err(ZoneError::Parametric(a.to_string())),
        };
        let i = clocks
            .iter()
            .position(|c| *c == a.clock)
            .ok_or_else(|| ZoneError::UnknownClock(a.clock.clone()))?
            + 1;
        let (upper, lower) = match a.rel {
            Relation::Le => (Some(Bound::le(k)), None),
            Relation::Lt => (Some(Bound::lt(k)), None),
            Relation::Eq => (Some(Bound::le(k)), Some(Bound::le(-k))),
            Relation::Ge => (None, Some(Bound::le(-k))),
            Relation::Gt => (None, Some(Bound::lt(-k))),
        };
        if let Some(b) = upper {
            self.tighten(i, 0, b);
        }
        if let Some(b) = lower {
            self.tighten(0, i, b);
        }
        Ok(())
    }

    pub fn clocks(&self) -> usize {
        self.dim - 1
    }

    pub fn get(&self, i: usize, j: usize) -> Bound {
        self.m[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, b: Bound) {
        self.m[i * self.dim + j] = b;
    }

    fn tighten(&mut self, i: usize, j: usize, b: Bound) {
        if b < self.get(i, j) {
            self.set(i, j, b);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.get(0, 0) < Bound::LE_ZERO
    }

    /// Floyd–Warshall closure; collapses to the shared empty representation.
    fn closed(mut self) -> Self {
        let n = self.dim;
        for k in 0..n {
            for i in 0..n {
                let ik = self.get(i, k);
                if ik.is_inf() {
                    continue;
                }
                for j in 0..n {
                    let via = ik.add(self.get(k, j));
                    if via < self.get(i, j) {
                        self.set(i, j, via);
                    }
                }
            }
            if (0..n).any(|i| self.get(i, i) < Bound::LE_ZERO) {
                return Dbm::empty(n - 1);
            }
        }
        if (0..n).any(|i| self.get(i, i) < Bound::LE_ZERO) {
            return Dbm::empty(n - 1);
        }
        self
    }

    fn check_dim(&self, other: &Dbm) -> Result<(), ZoneError> {
        if self.dim != other.dim {
            return Err(ZoneError::DimensionMismatch(self.dim - 1, other.dim - 1));
        }
        Ok(())
    }

    pub fn intersect(&self, other: &Dbm) -> Result<Dbm, ZoneError> {
        self.check_dim(other)?;
        if self.is_empty() || other.is_empty() {
            return Ok(Dbm::empty(self.clocks()));
        }
        let m = self
            .m
            .iter()
            .zip(&other.m)
            .map(|(a, b)| *a.min(b))
            .collect();
        Ok(Dbm { dim: self.dim, m }.closed())
    }

    /// Unbounded time successors.
    pub fn up(&self) -> Dbm {
        if self.is_empty() {
            return self.clone();
        }
        let mut z = self.clone();
        for i in 1..self.dim {
            z.set(i, 0, Bound::INF);
        }
        z.closed()
    }

    /// Unbounded time predecessors (clocks stay nonnegative).
    pub fn down(&self) -> Dbm {
        if self.is_empty() {
            return self.clone();
        }
        let mut z = self.clone();
        for i in 1..self.dim {
            z.set(0, i, Bound::LE_ZERO);
        }
        z.closed()
    }

    /// Image under setting the given clock indices (0-based) to zero.
    pub fn reset(&self, clocks: &[usize]) -> Dbm {
        if self.is_empty() || clocks.is_empty() {
            return self.clone();
        }
        let mut z = self.clone();
        for &c in clocks {
            let r = c + 1;
            for j in 0..self.dim {
                let (r0j, j0r) = (z.get(0, j), z.get(j, 0));
                z.set(r, j, r0j);
                z.set(j, r, j0r);
            }
            z.set(r, r, Bound::LE_ZERO);
        }
        z.closed()
    }

    /// Removes every constraint on the given clocks except nonnegativity.
    fn free(&self, clocks: &[usize]) -> Dbm {
        let mut z = self.clone();
        for &c in clocks {
            let r = c + 1;
            for j in 0..self.dim {
                if j != r {
                    z.set(r, j, Bound::INF);
                    let j0 = z.get(j, 0);
                    z.set(j, r, j0);
                }
            }
        }
        z.closed()
    }

    /// `{ v | v[R := 0] ∈ self }`.
    pub fn inverse_reset(&self, clocks: &[usize]) -> Dbm {
        if self.is_empty() || clocks.is_empty() {
            return self.clone();
        }
        let mut z = self.clone();
        for &c in clocks {
            z.tighten(c + 1, 0, Bound::LE_ZERO);
        }
        let z = z.closed();
        if z.is_empty() {
            return z;
        }
        z.free(clocks)
    }

    /// Set inclusion `other ⊆ self`.
    pub fn includes(&self, other: &Dbm) -> Result<bool, ZoneError> {
        self.check_dim(other)?;
        if other.is_empty() {
            return Ok(true);
        }
        if self.is_empty() {
            return Ok(false);
        }
        Ok(self.m.iter().zip(&other.m).all(|(a, b)| b <= a))
    }

    /// Membership of a clock valuation given in clock-index order.
    pub fn contains(&self, tau: &[Rational]) -> bool {
        if self.is_empty() {
            return false;
        }
        assert_eq!(tau.len(), self.clocks(), "valuation dimension");
        let zero = Rational::from_integer(0.into());
        let x = |i: usize| if i == 0 { &zero } else { &tau[i - 1] };
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j).admits(&(x(i) - x(j)))))
    }

    /// Stable rendering as a conjunction of (difference) constraints.
    pub fn render(&self, clocks: &[String]) -> String {
        if self.is_empty() {
            return "false".into();
        }
        let mut parts = Vec::new();
        for i in 1..self.dim {
            let name = &clocks[i - 1];
            let lo = self.get(0, i);
            let hi = self.get(i, 0);
            if lo != Bound::LE_ZERO {
                let op = if lo.strict { ">" } else { ">=" };
                parts.push(format!("{name} {op} {}", -lo.value));
            }
            if let Some(v) = hi.value() {
                let op = if hi.strict { "<" } else { "<=" };
                parts.push(format!("{name} {op} {v}"));
            }
        }
        for i in 1..self.dim {
            for j in 1..self.dim {
                if i == j {
                    continue;
                }
                let b = self.get(i, j);
                // implied by the single-clock bounds
                if b.is_inf() || self.get(i, 0).add(self.get(0, j)) <= b {
                    continue;
                }
                let op = if b.strict { "<" } else { "<=" };
                parts.push(format!("{} - {} {op} {}", clocks[i - 1], clocks[j - 1], b.value));
            }
        }
        if parts.is_empty() {
            "true".into()
        } else {
            parts.join(" && ")
        }
    }
}
