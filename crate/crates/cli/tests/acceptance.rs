//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use num_traits::Zero;
use rand::Rng;

use common::{bundled_closed, random_mdp, random_path, random_syntax_model, random_upper_model, rat, rho_samples, rng, zone_oracle};
use pppta::backwards;
use pppta::digital::{check_path, epsilon_digitize_path, epsilon_digitize_value};
use pppta::dsl;
use pppta::pmdp::{brute_force_reach, solve_reach};
use pppta::{bundled, ClockRegion, ClockValuation, Mode, Objective, ParamValuation, Pppta, Rational, ReachValue};
use pppta_cli::{check, Engine, SynthesisRequest};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pppta")
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/models")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exact(v: &ReachValue) -> Rational {
    v.exact().expect("exact mode").clone()
}

fn gamma(pairs: &[(&str, u64)]) -> ClockValuation {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn digital_value(m: &Pppta, g: &ClockValuation, rho: &ParamValuation, target: &str, obj: Objective) -> Result<Rational, String> {
    let out = check(m, g, rho, &[target.to_string()].into(), obj, Engine::Digital, Mode::Exact, backwards::DEFAULT_CAP)
        .map_err(|e| e.to_string())?;
    Ok(exact(&out.value))
}

fn geometric_loop() -> Outcome {
    let path = models_dir().join("geometric.pppta");
    let file = path.to_str().unwrap();
    let mut seen = Vec::new();
    for t in 1..=4u32 {
        let g = format!("T={t}");
        let (code, out, err) = run(&["check", file, "--target", "goal", "--engine", "digital", "--mode", "exact", "--objective", "max", "--gamma", &g]);
        let want = format!("{}/{}", (1u64 << t) - 1, 1u64 << t);
        ensure(code == 0 && out.trim() == want, || format!("T={t}: got `{}` (exit {code}, {err}), want {want}", out.trim()))?;
        seen.push(want);
    }
    // T=5 lies outside the bundled domain [0, 4], so the same model is checked
    // with its domain widened to [0, 5].
    let mut m = bundled::load("geometric");
    m.clock_params.insert("T".into(), (0, 5));
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let wide = dir.path().join("geometric_wide.pppta");
    std::fs::write(&wide, dsl::serialize(&m)).map_err(|e| e.to_string())?;
    let (code, out, err) = run(&["check", wide.to_str().unwrap(), "--target", "goal", "--engine", "digital", "--mode", "exact", "--objective", "max", "--gamma", "T=5"]);
    ensure(code == 0 && out.trim() == "31/32", || format!("T=5: got `{}` (exit {code}, {err})", out.trim()))?;
    seen.push("31/32".into());
    Ok(seen.join(", "))
}

fn engine_agreement() -> Outcome {
    let mut n = 0;
    for (name, m, target, gammas) in bundled_closed() {
        for g in &gammas {
            let mg = m.instantiate(g, &ParamValuation::new()).map_err(|e| e.to_string())?;
            for rho in rho_samples(&mg) {
                let t: BTreeSet<String> = [target.to_string()].into();
                let d = check(&m, g, &rho, &t, Objective::Max, Engine::Digital, Mode::Exact, backwards::DEFAULT_CAP).map_err(|e| e.to_string())?;
                let b = check(&m, g, &rho, &t, Objective::Max, Engine::Backwards, Mode::Exact, backwards::DEFAULT_CAP).map_err(|e| e.to_string())?;
                ensure(!b.truncated, || format!("{name} {g:?}: backwards exploration truncated"))?;
                ensure(d.value == b.value, || format!("{name} {g:?} {rho:?}: digital {} vs backwards {}", d.value, b.value))?;
                n += 1;
            }
        }
    }
    Ok(format!("{n} (model, gamma, rho) points agree"))
}

fn separability() -> Outcome {
    let path = models_dir().join("separability.pppta");
    let file = path.to_str().unwrap();
    for (g, want) in [("T=1,U=0", "1/2"), ("T=0,U=1", "1")] {
        let (code, out, _) = run(&["check", file, "--target", "goal", "--gamma", g]);
        ensure(code == 0 && out.trim() == want, || format!("{g}: got `{}`, want {want}", out.trim()))?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let set = dir.path().join("region.txt");
    std::fs::write(&set, "T=1,U=0\nT=0,U=1\n").map_err(|e| e.to_string())?;
    let set = set.to_str().unwrap();
    let (code, _, err) = run(&["reduce", file, "--gamma-set", set]);
    ensure(code == 3 && err.contains("separability"), || format!("reduce was not refused (exit {code}): {err}"))?;
    let (code, out, _) = run(&["synth", file, "--target", "goal", "--gamma-set", set]);
    ensure(code == 0 && out.contains("best: T=0,U=1 | - | 1\n") && !out.contains("lu: fixed"), || format!("synth: {out}"))?;
    Ok("1/2 at (1,0), 1 at (0,1), reduce refused, synth best ((0,1), 1)".into())
}

fn lu_reduction() -> Outcome {
    let geo = bundled::load("geometric");
    let mut req = SynthesisRequest::new(&geo, ["goal".to_string()].into(), Objective::Max);
    req.region = ClockRegion::Rectangular([("T".to_string(), (0, 4))].into());
    let reduced = pppta_cli::synth(&geo, &req).map_err(|e| e.to_string())?;
    req.reduce = false;
    let full = pppta_cli::synth(&geo, &req).map_err(|e| e.to_string())?;
    ensure(reduced.best.gamma == gamma(&[("T", 4)]) && exact(&reduced.best.value) == rat(15, 16), || format!("geometric best {:?}", reduced.best))?;
    ensure(reduced.fixed == gamma(&[("T", 4)]) && reduced.rows.len() == 1, || format!("geometric fixings {:?}", reduced.fixed))?;
    ensure(full.best.value == reduced.best.value && full.rows.len() == 5, || format!("full enumeration best {:?}", full.best))?;

    let nrp = models_dir().join("nrp.pppta");
    let (code, out, err) = run(&["reduce", nrp.to_str().unwrap(), "--region", "CD=6..10"]);
    ensure(code == 0, || err.clone())?;
    ensure(out.contains("// fixed CD = 6 (Lower)\n") && !out.contains("// fixed TO") && out.contains("// residual region: TO in [3, 20]"), || out.clone())?;
    let modified = models_dir().join("nrp_modified.pppta");
    let (code, out, err) = run(&["reduce", modified.to_str().unwrap()]);
    ensure(code == 0, || err.clone())?;
    ensure(out.contains("// fixed CD = 6 (Lower)\n") && out.contains("// fixed TO = 20 (Upper)\n"), || out.clone())?;
    Ok("geometric (T=4, 15/16) with and without reduction; NRP fixes CD=6; modified NRP fixes CD=6, TO=20".into())
}

fn monotonicity() -> Outcome {
    let mut r = rng(5);
    let mut checked = 0;
    for i in 0..50 {
        let m = random_upper_model(&mut r);
        let target = m.locations.keys().last().unwrap().clone();
        let mut prev: Option<(Rational, Rational)> = None;
        for p in 0..=3u64 {
            let g = gamma(&[("P", p)]);
            let max = digital_value(&m, &g, &ParamValuation::new(), &target, Objective::Max)?;
            let min = digital_value(&m, &g, &ParamValuation::new(), &target, Objective::Min)?;
            if let Some((pmax, pmin)) = &prev {
                ensure(&max >= pmax, || format!("model {i}: max decreased at P={p}\n{}", dsl::serialize(&m)))?;
                ensure(&min <= pmin, || format!("model {i}: min increased at P={p}\n{}", dsl::serialize(&m)))?;
            }
            prev = Some((max, min));
            checked += 1;
        }
    }
    Ok(format!("50 models, {checked} valuations, 0 violations"))
}

fn truncation() -> Outcome {
    let caps = [1, 5, 20, usize::MAX];
    let mut n = 0;
    for (name, m, target, gammas) in bundled_closed() {
        for g in &gammas {
            let mg = m.instantiate(g, &ParamValuation::new()).map_err(|e| e.to_string())?;
            let rho = rho_samples(&mg).swap_remove(1);
            let dig = digital_value(&m, g, &rho, target, Objective::Max)?;
            let mut prev = Rational::zero();
            for cap in caps {
                let t: BTreeSet<String> = [target.to_string()].into();
                let b = check(&m, g, &rho, &t, Objective::Max, Engine::Backwards, Mode::Exact, cap).map_err(|e| e.to_string())?;
                let v = exact(&b.value);
                ensure(v >= prev, || format!("{name} {g:?}: cap {cap} gave {v}, below {prev}"))?;
                ensure(v <= dig, || format!("{name} {g:?}: cap {cap} gave {v}, above digital {dig}"))?;
                if cap == usize::MAX {
                    ensure(v == dig, || format!("{name} {g:?}: untruncated {v} vs digital {dig}"))?;
                }
                prev = v;
                n += 1;
            }
        }
    }
    Ok(format!("{n} (model, gamma, cap) runs monotone and bounded"))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (m, targets) = random_mdp(&mut r, 6, 3);
        for obj in [Objective::Max, Objective::Min] {
            let ex = solve_reach(&m, &targets, obj, Mode::Exact).map_err(|e| e.to_string())?;
            let bf = brute_force_reach(&m, &targets, obj).map_err(|e| e.to_string())?;
            ensure(ex.exact(m.initial) == Some(&bf), || format!("mdp {i} {obj:?}: exact {:?} vs brute force {bf}", ex.exact(m.initial)))?;
            let it = solve_reach(&m, &targets, obj, Mode::Iterate).map_err(|e| e.to_string())?;
            for s in 0..m.num_states() {
                let d = (it.value_f64(s) - ex.value_f64(s)).abs();
                worst = worst.max(d);
                ensure(d <= 1e-8, || format!("mdp {i} {obj:?} state {s}: iterate off by {d:e}"))?;
            }
        }
    }
    Ok(format!("100 MDPs, both objectives; max iterate error {worst:.1e}"))
}

fn zone_operations() -> Outcome {
    let bad: Vec<String> = (0..200).flat_map(zone_oracle).collect();
    ensure(bad.is_empty(), || format!("{} discrepancies, first: {}", bad.len(), bad[0]))?;
    Ok("200 zones, 0 discrepancies".into())
}

fn digitization() -> Outcome {
    let mut r = rng(9);
    for _ in 0..1000 {
        let t = rat(r.gen_range(0..2000), r.gen_range(1..40));
        let u = &t + rat(r.gen_range(0..40), r.gen_range(1..40));
        let eps = rat(r.gen_range(0..100), 100);
        let dt = Rational::from_integer(epsilon_digitize_value(&t, &eps));
        let du = Rational::from_integer(epsilon_digitize_value(&u, &eps));
        let dist = if dt > t { &dt - &t } else { &t - &dt };
        ensure(dist < rat(1, 1), || format!("[{t}]_{eps} = {dt}"))?;
        ensure(dt <= du, || format!("not monotone: [{t}] = {dt}, [{u}] = {du}"))?;
        let k = t.floor();
        ensure(Rational::from_integer(epsilon_digitize_value(&k, &eps)) == k, || format!("[{k}]_{eps} moved"))?;
    }
    let mut paths = 0;
    let mut steps = 0;
    for (name, m, _, gammas) in bundled_closed() {
        for g in &gammas {
            let mi = m.instantiate(g, &ParamValuation::new()).map_err(|e| e.to_string())?;
            for _ in 0..20 {
                let path = random_path(&mut r, &mi, 15);
                check_path(&mi, &path).map_err(|e| format!("{name}: generated path invalid: {e}"))?;
                let eps = rat(r.gen_range(0..100), 100);
                let d = epsilon_digitize_path(&path, &eps).map_err(|e| e.to_string())?;
                check_path(&mi, &d).map_err(|e| format!("{name} eps {eps}: digitized path invalid: {e}"))?;
                paths += 1;
                steps += path.steps.len();
            }
        }
    }
    Ok(format!("1000 (t, eps) samples; {paths} paths with {steps} steps stay valid"))
}

fn parser_robustness() -> Outcome {
    for (name, src, _) in bundled::ALL {
        let m = dsl::parse(src).map_err(|e| format!("{name}: {e}"))?;
        ensure(dsl::parse(&dsl::serialize(&m)).ok() == Some(m), || format!("{name} does not round-trip"))?;
    }
    let mut r = rng(11);
    for i in 0..200 {
        let m = random_syntax_model(&mut r);
        let text = dsl::serialize(&m);
        ensure(dsl::parse(&text).ok() == Some(m), || format!("generated model {i} does not round-trip:\n{text}"))?;
    }
    let corpus: Vec<&[u8]> = bundled::ALL.iter().map(|(_, s, _)| s.as_bytes()).collect();
    let mut errors = 0;
    for i in 0..10_000 {
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..r.gen_range(0..120)).map(|_| r.gen()).collect()
        } else {
            let mut b = corpus[i % corpus.len()].to_vec();
            for _ in 0..r.gen_range(1..6) {
                let at = r.gen_range(0..b.len());
                match r.gen_range(0..3) {
                    0 => b[at] = r.gen(),
                    1 => {
                        b.remove(at);
                    }
                    _ => b.insert(at, r.gen()),
                }
            }
            b
        };
        match catch_unwind(|| dsl::parse_bytes(&bytes)) {
            Ok(Err(_)) => errors += 1,
            Ok(Ok(_)) => {}
            Err(_) => return Err(format!("parser panicked on {bytes:?}")),
        }
    }
    Ok(format!("4 bundled + 200 generated round trips; 10000 fuzz inputs, {errors} rejected, no panics"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("geometric-loop exactness", geometric_loop),
        ("engine agreement", engine_agreement),
        ("separability counterexample", separability),
        ("L/U region reduction", lu_reduction),
        ("monotonicity", monotonicity),
        ("truncation soundness", truncation),
        ("oracle equivalence", oracle_equivalence),
        ("zone-operation oracle", zone_operations),
        ("epsilon-digitization", digitization),
        ("parser robustness", parser_robustness),
    ];
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why}) [{secs:.2}s]", i + 1);
            }
        }
    }
    std::panic::set_hook(hook);
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
