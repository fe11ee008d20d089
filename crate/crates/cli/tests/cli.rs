use std::path::{Path, PathBuf};
use std::process::Command;

use pppta::{bundled, ClockRegion, Objective, Rational, ReachValue};
use pppta_cli::{parse_rho_grid, synth, Engine, RhoAxis, SynthesisRequest};

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/models/{name}.pppta"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pppta")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

#[test]
fn info_reports_classification_and_closedness() {
    let (code, out, _) = run(&["info", model("geometric").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("T: Upper; closed: yes"), "{out}");
    let (_, out, _) = run(&["info", model("nrp").to_str().unwrap()]);
    assert!(out.contains("CD: Lower; TO: Both"), "{out}");

    let dir = tempfile::tempdir().unwrap();
    let open = dir.path().join("open.pppta");
    std::fs::write(&open, "pppta open clocks c; location a init; location b; edge a -- go [c < 2] -> { 1 : goto b };").unwrap();
    let (_, out, _) = run(&["info", open.to_str().unwrap()]);
    assert!(out.contains("closed: no"), "{out}");
}

#[test]
fn exit_codes() {
    let geo = model("geometric");
    let geo = geo.to_str().unwrap();
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["check", geo, "--target", "goal", "--gamma", "T=x"]).0, 1);

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.pppta");
    std::fs::write(&broken, "pppta broken clocks c; location a init; edge a -- go [] -> { 1 : goto nowhere };").unwrap();
    let (code, _, err) = run(&["info", broken.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("broken.pppta:1:"), "{err}");

    assert_eq!(run(&["check", geo, "--target", "goal"]).0, 3);
    assert_eq!(run(&["check", geo, "--target", "goal", "--gamma", "T=9"]).0, 3);
    assert_eq!(run(&["check", geo, "--target", "goal", "--gamma", "T=2", "--engine", "backwards", "--objective", "min"]).0, 3);
    let open = dir.path().join("open.pppta");
    std::fs::write(&open, "pppta open clocks c; location a init; location b; edge a -- go [c < 2] -> { 1 : goto b };").unwrap();
    assert_eq!(run(&["check", open.to_str().unwrap(), "--target", "b"]).0, 3);
    let (code, out, _) = run(&["check", open.to_str().unwrap(), "--target", "b", "--engine", "backwards"]);
    assert_eq!((code, out.trim()), (0, "1"));
}

#[test]
fn check_engines_and_modes() {
    let geo = model("geometric");
    let geo = geo.to_str().unwrap();
    for engine in ["digital", "backwards"] {
        let (code, out, _) = run(&["check", geo, "--target", "goal", "--gamma", "T=3", "--engine", engine]);
        assert_eq!((code, out.trim()), (0, "7/8"));
    }
    let (code, out, _) = run(&["check", geo, "--target", "goal", "--gamma", "T=3", "--mode", "iterate"]);
    assert_eq!(code, 0);
    let v: f64 = out.split_whitespace().next().unwrap().parse().unwrap();
    assert!((v - 0.875).abs() < 1e-8);
}

#[test]
fn export_is_deterministic() {
    let geo = model("geometric");
    let geo = geo.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pmdp");
    let b = dir.path().join("b.pmdp");
    for p in [&a, &b] {
        let (code, _, err) = run(&["export", geo, "--target", "goal", "--gamma", "T=1", "-o", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    let doc = std::fs::read_to_string(&a).unwrap();
    assert_eq!(doc, std::fs::read_to_string(&b).unwrap());
    assert!(doc.starts_with("pmdp states"));
    assert!(doc.contains("\"goal("), "{doc}");

    let (code, doc, _) = run(&["export", geo, "--target", "goal", "--gamma", "T=2", "--engine", "backwards"]);
    assert_eq!(code, 0);
    assert!(doc.contains("action \"(alpha, {"), "{doc}");
}

#[test]
fn records_format_has_one_line_per_point() {
    let (code, out, _) = run(&["synth", model("nrp").to_str().unwrap(), "--target", "done", "--rho-grid", "p:#2,q=1/2", "--region", "TO=3..5", "--format", "records"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3 * 2);
    for l in &lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["gamma"]["CD"], 6);
    }
    assert_eq!(lines.iter().filter(|l| l.contains("\"best\":true")).count(), 1);
}

#[test]
fn probability_grid_one_shot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shot.pppta");
    std::fs::write(
        &path,
        "pppta shot clocks c; prob_params p in [0, 1]; location s init; location hit; location miss;\n\
         edge s -- fire [] -> { p : goto hit; 1 - p : goto miss };",
    )
    .unwrap();
    let (code, out, _) = run(&["synth", path.to_str().unwrap(), "--target", "hit", "--rho-grid", "p=0,1/2,1"]);
    assert_eq!(code, 0);
    assert!(out.contains("best: - | p=1 | 1\n"), "{out}");
    assert!(out.contains("points: 3\n"));
}

#[test]
fn rho_grid_syntax() {
    let g = parse_rho_grid(&["p=0,1/2,1".into(), "q:#4".into()]).unwrap();
    assert_eq!(g["p"], RhoAxis::Values(vec![rat(0, 1), rat(1, 2), rat(1, 1)]));
    assert_eq!(g["q"], RhoAxis::Count(4));
    assert!(parse_rho_grid(&["1/2".into()]).is_err());
    let m = bundled::load("nrp");
    let pts = pppta_cli::rho_grid(&m, &[("p".to_string(), RhoAxis::Count(1))].into()).unwrap();
    assert_eq!(pts.len(), 3);
    assert!(pts.iter().all(|r| r["p"] == rat(1, 2)));
}

#[test]
fn best_is_independent_of_thread_count() {
    let m = bundled::load("nrp");
    let mut req = SynthesisRequest::new(&m, ["done".to_string()].into(), Objective::Max);
    req.rho_axes = [("p".to_string(), RhoAxis::Count(3)), ("q".to_string(), RhoAxis::Count(3))].into();
    req.threads = Some(1);
    let one = synth(&m, &req).unwrap();
    req.threads = Some(4);
    let four = synth(&m, &req).unwrap();
    assert_eq!(one.best, four.best);
    assert_eq!(one.rows, four.rows);
}

#[test]
fn reduction_does_not_change_the_optimum() {
    for (name, _, target) in bundled::ALL {
        let m = bundled::load(name);
        for obj in [Objective::Max, Objective::Min] {
            let mut req = SynthesisRequest::new(&m, [target.to_string()].into(), obj);
            req.rho_axes = m.prob_params.keys().map(|p| (p.clone(), RhoAxis::Count(2))).collect();
            let reduced = synth(&m, &req).unwrap();
            req.reduce = false;
            let full = synth(&m, &req).unwrap();
            assert_eq!(reduced.best.value, full.best.value, "{name} {obj:?}");
            assert!(reduced.rows.len() <= full.rows.len());
        }
    }
}

#[test]
fn explicit_region_without_product_structure_is_enumerated() {
    let m = bundled::load("separability");
    let mut req = SynthesisRequest::new(&m, ["goal".to_string()].into(), Objective::Max);
    req.region = ClockRegion::Explicit(
        [
            [("T".to_string(), 1), ("U".to_string(), 0)].into(),
            [("T".to_string(), 0), ("U".to_string(), 1)].into(),
        ]
        .into(),
    );
    req.engine = Engine::Backwards;
    let res = synth(&m, &req).unwrap();
    assert!(res.fixed.is_empty());
    assert_eq!(res.best.value, ReachValue::Exact(rat(1, 1)));
    assert_eq!(res.best.gamma["U"], 1);
}

#[test]
fn min_results_carry_a_zeno_caveat() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeno.pppta");
    std::fs::write(
        &path,
        "pppta zeno clocks c; location a init; location goal;\n\
         edge a -- spin [] -> { 1 : goto a };\n\
         edge a -- go [] -> { 1 : goto goal };",
    )
    .unwrap();
    let (code, out, err) = run(&["check", path.to_str().unwrap(), "--target", "goal", "--objective", "min"]);
    assert_eq!((code, out.trim()), (0, "0"));
    assert!(err.contains("zero-time cycle"), "{err}");
    let (_, _, err) = run(&["check", model("geometric").to_str().unwrap(), "--target", "goal", "--gamma", "T=1", "--objective", "min"]);
    assert!(err.is_empty(), "{err}");
}
