use cgolab_cli::config::{parse, Lattice};
use cgolab_cli::report;
use std::path::Path;
use std::process::{Command, Output};

fn cgolab(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cgolab"));
    c.args(args);
    if let Some(t) = threads {
        c.env("CGO_THREADS", t);
    }
    c.output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn list_shows_every_experiment_with_its_tag() {
    let o = cgolab(&["list-experiments"], None);
    assert_eq!(o.status.code(), Some(0));
    let s = text(&o.stdout);
    assert_eq!(s.lines().count(), 9);
    for tag in ["§3", "§4", "Appendix B"] {
        assert!(s.contains(&format!("[{tag}]")), "{tag} missing:\n{s}");
    }
    assert!(s.lines().any(|l| l.starts_with("carleman-probe") && l.contains("Appendix B")));
}

#[test]
fn list_describes_one_experiment() {
    let o = cgolab(&["list-experiments", "pipeline"], None);
    assert_eq!(o.status.code(), Some(0));
    let s = text(&o.stdout);
    assert!(s.contains("threshold curl_max_error = 0.15"));
    assert!(s.contains("option expect"));
}

#[test]
fn unknown_experiment_gets_a_suggestion() {
    let o = cgolab(&["list-experiments", "mollifer-rates"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("did you mean \"mollifier-rates\""));
}

#[test]
fn bad_usage_exits_with_one_and_help_with_zero() {
    assert_eq!(cgolab(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(cgolab(&[], None).status.code(), Some(1));
    assert_eq!(cgolab(&["--help"], None).status.code(), Some(0));
    assert_eq!(cgolab(&["run", "/nonexistent/config.json"], None).status.code(), Some(1));
}

#[test]
fn gamma_out_of_range_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"experiment": "mollifier-rates", "gamma": 1.5, "output_dir": "{}"}}"#, out.display()),
    );
    for cmd in ["run", "validate"] {
        let o = cgolab(&[cmd, &cfg], None);
        assert_eq!(o.status.code(), Some(1));
        assert!(text(&o.stderr).contains("0 < γ ≤ 1 violated"), "{}", text(&o.stderr));
    }
    assert!(!out.exists());
}

#[test]
fn every_schema_violation_is_listed() {
    let errs = parse(
        r#"{"experiment": "phase-rates", "gamma": 0, "grid": [24, 24], "h_schedule": [0.5, 0.5],
            "xi_lattice": 2, "thresholds": {"grad_slope_tol": -1, "bogus": 1},
            "options": {"quadrature": 2, "colour": "red"}, "seed": -3, "extra": 1}"#,
    )
    .unwrap_err();
    let joined = errs.join("\n");
    for needle in [
        "unknown field \"extra\"",
        "grid:",
        "0 < γ ≤ 1 violated",
        "seed:",
        "takes no option \"colour\"",
        "quadrature count",
        "xi_lattice: not used",
        "values must be distinct",
        "thresholds.grad_slope_tol",
        "no threshold \"bogus\"",
    ] {
        assert!(joined.contains(needle), "missing {needle:?} in\n{joined}");
    }
}

#[test]
fn frequency_range_and_recipes_are_checked() {
    let errs = parse(r#"{"experiment": "recon-magnetic", "xi_lattice": 8}"#).unwrap_err();
    assert!(errs[0].contains("h|ξ|"), "{errs:?}");
    let errs = parse(
        r#"{"experiment": "pipeline", "coefficients": {
            "v1": {"kind": "bump", "center": [0.5, 0.5, 0.5], "radius": 0.3},
            "v3": [],
            "v2": [{"kind": "holder", "gamma": 2.0, "center": [0.5, 0.5, 0.5], "radius": 0.3, "direction": [1, 0, 0]},
                   {"kind": "rotation", "center": [0.1, 0.5, 0.5], "radius": 0.3}]}}"#,
    )
    .unwrap_err();
    let joined = errs.join("\n");
    assert!(joined.contains("coefficients.v1[0]: invalid-argument: scalar recipe"), "{joined}");
    assert!(joined.contains("no slot \"v3\""), "{joined}");
    assert!(joined.contains("coefficients.v2[0]: invalid-argument: 0 < γ ≤ 1 violated"), "{joined}");
    assert!(joined.contains("coefficients.v2[1]: support"), "{joined}");
}

#[test]
fn defaults_are_filled_in() {
    let c = parse(r#"{"experiment": "recon-electric"}"#).unwrap();
    assert_eq!(c.grid, [24; 3]);
    assert_eq!(c.gamma, Some(0.9));
    assert_eq!(c.h_schedule, vec![0.5, 0.35, 0.25]);
    assert_eq!(c.xi_lattice.as_ref().unwrap().points().len(), 3);
    assert_eq!(c.threshold("max_relative_error"), 0.2);
    assert_eq!(c.num("theta0"), 4.0);
    assert_eq!(c.coefficients["a"].len(), 1);
    let c = parse(r#"{"experiment": "pipeline", "xi_lattice": 1, "grid": 17}"#).unwrap();
    assert_eq!(c.xi_lattice, Some(Lattice::Cube(1)));
    assert_eq!(c.coefficients["v1"], c.coefficients["v2"]);
    assert_eq!(c.text("expect"), "any");
    // the resolved config is itself a valid config
    let again = parse(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(again, c);
}

#[test]
fn mollifier_run_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"experiment": "mollifier-rates", "gamma": 0.5, "output_dir": "{}"}}"#, out.display()),
    );
    let o = cgolab(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let r = report::read(&out).unwrap();
    assert!(r.passed);
    assert_eq!(r.tag, "§3");
    let s = r.slope("err_sup_vs_theta").unwrap();
    assert!((s.value + 0.5).abs() <= 0.15);
    let ci = s.ci95.unwrap();
    assert!(ci[0] <= s.value && s.value <= ci[1]);
    assert!(out.join("mollifier_rates.csv").exists());
    assert!(out.join("fields/cone.cgof").exists());
    assert_eq!(report::content_hash(&r), r.hash);
}

#[test]
fn failed_threshold_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"experiment": "mollifier-rates", "gamma": 0.75, "options": {{"thetas": [8, 16]}},
                "thresholds": {{"slope_tol": 0}}, "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let o = cgolab(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o.stdout));
    assert!(text(&o.stdout).contains("FAIL"));
    assert!(!report::read(&out).unwrap().passed);
}

#[test]
fn equal_pipeline_pair_is_indistinguishable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"experiment": "pipeline", "grid": 17, "xi_lattice": 1,
                "options": {{"quadrature": 12, "expect": "indistinguishable"}}, "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let o = cgolab(&["run", &cfg], None);
    assert_eq!(o.status.code(), Some(0), "{}{}", text(&o.stdout), text(&o.stderr));
    let r = report::read(&out).unwrap();
    assert_eq!(r.details["verdict"], "indistinguishable");
    assert!(r.check("quasilinear_final_sup").unwrap().passed);
    assert!(out.join("fields/quasilinear_psi.cgof").exists());
}

#[test]
fn reports_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    let mut tables = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("out{threads}"));
        let cfg = write_config(
            dir.path(),
            &format!("c{threads}.json"),
            &format!(
                r#"{{"experiment": "dnmap-consistency", "grid": 12, "seed": 7, "options": {{"triples": 4}},
                    "output_dir": "{}"}}"#,
                out.display()
            ),
        );
        let o = cgolab(&["run", &cfg], Some(threads));
        assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
        hashes.push(report::read(&out).unwrap().hash);
        tables.push(std::fs::read(out.join("dn_pairings.csv")).unwrap());
    }
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn bad_thread_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"experiment": "mollifier-rates", "output_dir": "{}"}}"#, dir.path().join("o").display()),
    );
    let o = cgolab(&["run", &cfg], Some("zero"));
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("CGO_THREADS"));
}
