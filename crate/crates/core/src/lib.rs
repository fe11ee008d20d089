//! Parametric probabilistic timed automata with exact reachability analysis
//! through digital clocks or backwards zone exploration.

pub mod ratfun;
pub mod constraints;
pub mod zones;
pub mod model;
pub mod pmdp;
pub mod dsl;
pub mod bundled;
pub mod digital;
pub mod backwards;
pub mod lu;

pub use constraints::{Atom, BoundTerm, ClockConstraint, Relation};
pub use lu::ClockRegion;
pub use model::{ClockValuation, LuClass, Outcome, Pppta, Transition};
pub use pmdp::{Mdp, Mode, Objective, ParametricPmdp, ReachValue};
pub use ratfun::{ParamValuation, Polynomial, Rational, RationalFunction};
pub use zones::Dbm;
