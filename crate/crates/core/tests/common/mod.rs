//! Seeded generators shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pppta::digital::{ConcreteState, Path, Step};
use pppta::pmdp::Mdp;
use pppta::{Atom, ClockConstraint, ClockValuation, Outcome, Pppta, Rational, RationalFunction, Relation, Transition};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub const CLOCKS: [&str; 3] = ["x", "y", "z"];

/// Diagonal-free conjunction over the first `n` clocks, constants in `0..=kmax`.
pub fn random_constraint(r: &mut impl Rng, n: usize, kmax: u64, atoms: usize) -> ClockConstraint {
    ClockConstraint::new((0..atoms).map(|_| {
        let c = CLOCKS[r.gen_range(0..n)];
        let rel = *Relation::ALL.choose(r).unwrap();
        Atom::constant(c, rel, r.gen_range(0..=kmax))
    }))
}

/// Membership in a conjunction of constant atoms, with clock values in
/// units of `1/scale`. Independent of the zone code.
pub fn sat_scaled(phi: &ClockConstraint, v: &[i64], scale: i64) -> bool {
    phi.atoms().iter().all(|a| {
        let i = CLOCKS.iter().position(|c| *c == a.clock).unwrap();
        let k = match a.bound {
            pppta::BoundTerm::Const(k) => k as i64 * scale,
            pppta::BoundTerm::Param(_) => unreachable!(),
        };
        match a.rel {
            Relation::Le => v[i] <= k,
            Relation::Lt => v[i] < k,
            Relation::Eq => v[i] == k,
            Relation::Ge => v[i] >= k,
            Relation::Gt => v[i] > k,
        }
    })
}

/// Every point of `{0, 1/2, ..., hi}^n`, in units of `1/scale`.
pub fn grid(n: usize, hi: i64, step: i64) -> Vec<Vec<i64>> {
    let axis: Vec<i64> = (0..=hi).step_by(step as usize).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                axis.iter().map(move |&a| {
                    let mut p = p.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn to_rationals(v: &[i64], scale: i64) -> Vec<Rational> {
    v.iter().map(|&x| rat(x, scale)).collect()
}

/// Random explicit MDP: `1..=n` are ordinary states, each action spreads at
/// most all of its mass over up to three successors; the remainder goes to the
/// sink. Some states get no actions.
pub fn random_mdp(r: &mut impl Rng, max_states: usize, max_actions: usize) -> (Mdp, BTreeSet<usize>) {
    let mut m = Mdp::new();
    let n = r.gen_range(1..=max_states);
    for i in 0..n {
        m.add_state(format!("s{i}"));
    }
    for s in 1..=n {
        let k = r.gen_range(0..=max_actions);
        for a in 0..k {
            let succ = r.gen_range(1..=3);
            let den = *[2i64, 3, 4, 5, 6].choose(r).unwrap();
            let mut left = den;
            let mut branches = Vec::new();
            for j in 0..succ {
                if left == 0 {
                    break;
                }
                let w = if j + 1 == succ && r.gen_bool(0.7) { left } else { r.gen_range(1..=left) };
                left -= w;
                branches.push((rat(w, den), r.gen_range(0..=n)));
            }
            m.add_action(s, format!("a{a}"), branches);
        }
    }
    m.initial = 1;
    let targets = (1..=n).filter(|_| r.gen_bool(0.3)).collect();
    (m, targets)
}

fn probabilities(r: &mut impl Rng, k: usize) -> Vec<Rational> {
    let den = *[2i64, 3, 4, 6].choose(r).unwrap() * k as i64;
    let mut cuts: Vec<i64> = (0..k - 1).map(|_| r.gen_range(1..den)).collect();
    cuts.sort();
    let mut out = Vec::new();
    let mut prev = 0;
    for c in cuts.into_iter().chain([den]) {
        out.push(rat(c - prev, den));
        prev = c;
    }
    out
}

/// Small closed model with one clock parameter `P` in `[0, 3]` that occurs
/// only as an upper bound. Retries until the model validates.
pub fn random_upper_model(r: &mut impl Rng) -> Pppta {
    loop {
        let m = upper_candidate(r);
        if m.validate().is_empty() {
            return m;
        }
    }
}

fn upper_candidate(r: &mut impl Rng) -> Pppta {
    let nclocks = r.gen_range(1..=2);
    let clocks: Vec<&str> = CLOCKS[..nclocks].to_vec();
    let nlocs = r.gen_range(2..=4);
    let locs: Vec<String> = (0..nlocs).map(|i| format!("l{i}")).collect();
    let mut m = Pppta {
        name: "upper".into(),
        initial: locs[0].clone(),
        ..Default::default()
    };
    m.clocks = clocks.iter().map(|c| c.to_string()).collect();
    m.clock_params.insert("P".into(), (0, 3));
    let atom = |r: &mut dyn rand::RngCore, allow_param: bool, upper_only: bool| -> Atom {
        let c = clocks[r.gen_range(0..clocks.len())];
        if allow_param && r.gen_bool(0.4) {
            return Atom::param(c, Relation::Le, "P");
        }
        let rels: &[Relation] = if upper_only { &[Relation::Le] } else { &[Relation::Le, Relation::Ge, Relation::Eq] };
        Atom::constant(c, *rels.choose(r).unwrap(), r.gen_range(0..=3))
    };
    for (i, l) in locs.iter().enumerate() {
        let inv = if i > 0 && r.gen_bool(0.3) {
            ClockConstraint::new([atom(r, true, true)])
        } else {
            ClockConstraint::top()
        };
        m.locations.insert(l.clone(), inv);
    }
    for l in &locs {
        for a in ["a", "b"] {
            if !r.gen_bool(0.6) {
                continue;
            }
            let natoms = r.gen_range(0..=2);
            let guard = ClockConstraint::new((0..natoms).map(|_| atom(r, true, false)));
            let k = r.gen_range(1..=2);
            let mut branches: BTreeMap<Outcome, RationalFunction> = BTreeMap::new();
            for w in probabilities(r, k) {
                let resets: Vec<&str> = clocks.iter().copied().filter(|_| r.gen_bool(0.5)).collect();
                let t = locs.choose(r).unwrap();
                let e = branches.entry(Outcome::new(resets, t)).or_insert_with(RationalFunction::zero);
                *e = e.add(&RationalFunction::constant(w));
            }
            m.transitions.insert((l.clone(), a.to_string()), Transition { guard, branches });
        }
    }
    m
}

/// Arbitrary syntactically valid model (not necessarily semantically valid),
/// used for printer/parser round trips.
pub fn random_syntax_model(r: &mut impl Rng) -> Pppta {
    let nclocks = r.gen_range(1..=3);
    let clocks: Vec<&str> = CLOCKS[..nclocks].to_vec();
    let mut m = Pppta {
        name: format!("gen{}", r.gen_range(0..1000)),
        ..Default::default()
    };
    m.clocks = clocks.iter().map(|c| c.to_string()).collect();
    for p in ["T", "U"].iter().take(r.gen_range(0..=2)) {
        let lo = r.gen_range(0..3);
        m.clock_params.insert(p.to_string(), (lo, lo + r.gen_range(0..4)));
    }
    for p in ["p", "q"].iter().take(r.gen_range(0..=2)) {
        m.prob_params.insert(p.to_string(), (rat(r.gen_range(0..2), 4), rat(r.gen_range(2..5), 4)));
    }
    let cps: Vec<String> = m.clock_params.keys().cloned().collect();
    let pps: Vec<String> = m.prob_params.keys().cloned().collect();
    let atom = |r: &mut dyn rand::RngCore| -> Atom {
        let c = clocks[r.gen_range(0..clocks.len())];
        let rel = *Relation::ALL.choose(r).unwrap();
        if !cps.is_empty() && r.gen_bool(0.3) {
            Atom::param(c, rel, &cps[r.gen_range(0..cps.len())])
        } else {
            Atom::constant(c, rel, r.gen_range(0..=5))
        }
    };
    let nlocs = r.gen_range(1..=4);
    let locs: Vec<String> = (0..nlocs).map(|i| format!("q{i}")).collect();
    m.initial = locs[r.gen_range(0..nlocs)].clone();
    for l in &locs {
        let n = r.gen_range(0..=2);
        m.locations.insert(l.clone(), ClockConstraint::new((0..n).map(|_| atom(r))));
    }
    for l in &locs {
        for a in ["go", "stop", "retry"] {
            if !r.gen_bool(0.5) {
                continue;
            }
            let n = r.gen_range(0..=3);
            let guard = ClockConstraint::new((0..n).map(|_| atom(r)));
            let mut branches = BTreeMap::new();
            for _ in 0..r.gen_range(1..=3) {
                let resets: Vec<&str> = clocks.iter().copied().filter(|_| r.gen_bool(0.4)).collect();
                let o = Outcome::new(resets, locs.choose(r).unwrap());
                let w = if !pps.is_empty() && r.gen_bool(0.5) {
                    let p = RationalFunction::var(&pps[r.gen_range(0..pps.len())]);
                    match r.gen_range(0..3) {
                        0 => p,
                        1 => RationalFunction::one().sub(&p),
                        _ => p.mul(&RationalFunction::ratio(1, r.gen_range(1..4))),
                    }
                } else {
                    RationalFunction::ratio(r.gen_range(1..4), 4)
                };
                branches.insert(o, w);
            }
            m.transitions.insert((l.clone(), a.to_string()), Transition { guard, branches });
        }
    }
    m
}

fn holds(phi: &ClockConstraint, nu: &BTreeMap<String, Rational>) -> bool {
    phi.atoms().iter().all(|a| match &a.bound {
        pppta::BoundTerm::Const(k) => a.rel.holds(&nu[&a.clock], &Rational::from_integer((*k).into())),
        pppta::BoundTerm::Param(_) => false,
    })
}

/// Random run of a clock-instantiated model from the initial state with all
/// clocks zero: alternating rational delays and enabled discrete steps.
pub fn random_path(r: &mut impl Rng, m: &Pppta, max_steps: usize) -> Path {
    let zero: BTreeMap<String, Rational> = m.clocks.iter().map(|c| (c.clone(), Rational::zero())).collect();
    let mut cur = ConcreteState {
        location: m.initial.clone(),
        clocks: zero,
    };
    let mut states = vec![cur.clone()];
    let mut steps = Vec::new();
    for _ in 0..max_steps {
        let inv = m.invariant(&cur.location);
        let den = *[1i64, 2, 3, 5, 7, 10].choose(r).unwrap();
        let d = rat(r.gen_range(0..=3 * den), den);
        let moved: BTreeMap<String, Rational> = cur.clocks.iter().map(|(c, v)| (c.clone(), v + &d)).collect();
        if !d.is_zero() && holds(inv, &moved) {
            steps.push(Step::Delay(d));
            cur = ConcreteState {
                location: cur.location.clone(),
                clocks: moved,
            };
            states.push(cur.clone());
        }
        let mut options = Vec::new();
        for ((l, a), t) in &m.transitions {
            if *l != cur.location || !holds(&t.guard, &cur.clocks) {
                continue;
            }
            for (o, w) in &t.branches {
                if w.is_zero() {
                    continue;
                }
                let next: BTreeMap<String, Rational> = cur
                    .clocks
                    .iter()
                    .map(|(c, v)| (c.clone(), if o.resets.contains(c) { Rational::zero() } else { v.clone() }))
                    .collect();
                if holds(m.invariant(&o.target), &next) {
                    options.push((a.clone(), o.clone(), next));
                }
            }
        }
        if let Some((action, outcome, next)) = options.choose(r).cloned() {
            let location = outcome.target.clone();
            steps.push(Step::Action { action, outcome });
            cur = ConcreteState { location, clocks: next };
            states.push(cur.clone());
        }
    }
    Path { states, steps }
}

/// Bundled closed models with their target and a few clock valuations.
pub fn bundled_closed() -> Vec<(&'static str, Pppta, &'static str, Vec<ClockValuation>)> {
    let g = |pairs: &[(&str, u64)]| -> ClockValuation { pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect() };
    vec![
        ("geometric", pppta::bundled::load("geometric"), "goal", vec![g(&[("T", 0)]), g(&[("T", 2)]), g(&[("T", 4)])]),
        (
            "separability",
            pppta::bundled::load("separability"),
            "goal",
            vec![g(&[("T", 0), ("U", 1)]), g(&[("T", 1), ("U", 0)]), g(&[("T", 1), ("U", 1)])],
        ),
        (
            "nrp",
            pppta::bundled::load("nrp"),
            "done",
            vec![g(&[("CD", 6), ("TO", 3)]), g(&[("CD", 8), ("TO", 12)]), g(&[("CD", 10), ("TO", 20)])],
        ),
        (
            "nrp_modified",
            pppta::bundled::load("nrp_modified"),
            "done",
            vec![g(&[("CD", 6), ("TO", 3)]), g(&[("CD", 8), ("TO", 12)]), g(&[("CD", 10), ("TO", 20)])],
        ),
    ]
}

/// Three probability valuations spread over the declared domains.
pub fn rho_samples(m: &Pppta) -> Vec<pppta::ParamValuation> {
    (0..3)
        .map(|i| {
            m.prob_params
                .iter()
                .map(|(p, (lo, hi))| {
                    let t = [rat(1, 5), rat(1, 2), Rational::one()][i].clone();
                    (p.clone(), lo + (hi - lo) * t)
                })
                .collect()
        })
        .collect()
}

/// Checks every zone operation on random
/// diagonal-free zones against their set definitions on the half-integer grid
/// over `[0, 5]`. Existential witnesses are searched on the 1/8 grid. Returns
/// a description of every disagreement.
pub fn zone_oracle(seed: u64) -> Vec<String> {
    use pppta::Dbm;
    const S: i64 = 8;
    let mut r = rng(seed);
    let n = r.gen_range(1..=3);
    let names: Vec<String> = CLOCKS[..n].iter().map(|c| c.to_string()).collect();
    let na = r.gen_range(0..=4);
    let phi = random_constraint(&mut r, n, 4, na);
    let na = r.gen_range(0..=3);
    let psi = random_constraint(&mut r, n, 4, na);
    let resets: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.5)).collect();
    let z = Dbm::from_constraint(&phi, &names).unwrap();
    let z2 = Dbm::from_constraint(&psi, &names).unwrap();
    let up = z.up();
    let down = z.down();
    let reset = z.reset(&resets);
    let inv = z.inverse_reset(&resets);
    let meet = z.intersect(&z2).unwrap();
    let inz = |v: &[i64]| sat_scaled(&phi, v, S);
    let witnesses: Vec<i64> = (0..=6 * S).collect();
    let mut bad = Vec::new();
    for w in grid(n, 5 * S, S / 2) {
        let q = to_rationals(&w, S);
        let shift = |d: i64| -> Vec<i64> { w.iter().map(|x| x + d).collect() };
        let expect_up = witnesses.iter().take_while(|&&d| w.iter().all(|&x| x >= d)).any(|&d| inz(&shift(-d)));
        let expect_down = witnesses.iter().any(|&d| inz(&shift(d)));
        let expect_reset = resets.iter().all(|&i| w[i] == 0) && {
            let mut found = false;
            let mut cand = vec![w.clone()];
            for &i in &resets {
                cand = cand
                    .into_iter()
                    .flat_map(|v| {
                        witnesses.iter().map(move |&u| {
                            let mut v = v.clone();
                            v[i] = u;
                            v
                        })
                    })
                    .collect();
            }
            for v in cand {
                if inz(&v) {
                    found = true;
                    break;
                }
            }
            found
        };
        let mut zeroed = w.clone();
        for &i in &resets {
            zeroed[i] = 0;
        }
        let expect_inv = inz(&zeroed);
        let expect_meet = inz(&w) && sat_scaled(&psi, &w, S);
        for (name, got, want) in [
            ("zone", z.contains(&q), inz(&w)),
            ("up", up.contains(&q), expect_up),
            ("down", down.contains(&q), expect_down),
            ("reset", reset.contains(&q), expect_reset),
            ("inverse_reset", inv.contains(&q), expect_inv),
            ("intersect", meet.contains(&q), expect_meet),
        ] {
            if got != want {
                bad.push(format!("seed {seed}: {name} of [{phi}] resets {resets:?} at {w:?}/8: got {got}, want {want}"));
            }
        }
    }
    bad
}
