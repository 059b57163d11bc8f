use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use electroad::profile::simulate_profiles;
use electroad_cli::report::RunReport;
use electroad_cli::scenario::parse_scenario;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn electroad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_electroad"))
        .args(args)
        .env_remove("ELECTROAD_THREADS")
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", dir.to_str().unwrap()]);
    electroad(&full)
}

fn report(dir: &Path) -> RunReport {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn base_profile_has_ninety_rows_matching_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario("base.json");
    let out = run_in(
        dir.path(),
        &["profile", "--scenario", base.to_str().unwrap()],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (header, rows) = read_csv(&dir.path().join("profile.csv"));
    assert_eq!(header, ["time_step", "bus", "voltage_pu"]);
    assert_eq!(rows.len(), 90);
    let series = simulate_profiles(&parse_scenario(&base).unwrap()).unwrap();
    for row in &rows {
        let t: usize = row[0].parse().unwrap();
        let bus: usize = row[1].parse().unwrap();
        let v: f64 = row[2].parse().unwrap();
        let exact = series.voltage(t, bus);
        assert!((v - exact).abs() <= 5e-12 * exact.abs());
    }
    let rep = report(dir.path());
    assert_eq!(rep.schema_version, 1);
    assert_eq!(rep.command, "profile");
    assert_eq!(rep.outputs, ["profile.csv", "report.json"]);
    assert_eq!(rep.headline.min_voltage_at, Some([9, 10]));
}

#[test]
fn envelope_and_lower_bound_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let base = scenario("base.json");
    let out = run_in(
        dir.path(),
        &[
            "profile",
            "--scenario",
            base.to_str().unwrap(),
            "--envelope",
            "--lower-bound",
        ],
    );
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("profile.csv"));
    assert_eq!(
        header,
        ["time_step", "bus", "voltage_pu", "v_min", "v_mean", "v_max"]
    );
    for row in &rows {
        let v: Vec<f64> = row[3..].iter().map(|s| s.parse().unwrap()).collect();
        assert!(v[0] <= v[1] && v[1] <= v[2]);
    }
    let (header, rows) = read_csv(&dir.path().join("lower_bound.csv"));
    assert_eq!(header, ["bus", "bound_pu"]);
    assert_eq!(rows.len(), 10);
    let rep = report(dir.path());
    assert_eq!(
        rep.outputs,
        ["profile.csv", "lower_bound.csv", "report.json"]
    );
    assert_eq!(rep.headline.envelope_samples, Some(200));
    for name in &rep.outputs {
        assert!(dir.path().join(name).is_file());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: Vec<Vec<String>> = vec![
        vec![
            "profile".into(),
            "--scenario".into(),
            scenario("base.json").display().to_string(),
            "--envelope".into(),
        ],
        vec![
            "cpf-length".into(),
            "--scenario".into(),
            scenario("stress.json").display().to_string(),
        ],
        vec![
            "collapse".into(),
            "--scenario".into(),
            scenario("stress.json").display().to_string(),
            "--plan".into(),
            scenario("collapse_plan.json").display().to_string(),
        ],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert!(run_in(a.path(), &args).status.success());
        assert!(run_in(b.path(), &args).status.success());
        for name in report(a.path()).outputs {
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert!(x == y, "{} differs between runs", name);
        }
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let base = scenario("base.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "profile",
        "--scenario",
        base.to_str().unwrap(),
        "--envelope",
    ];
    assert!(run_in(a.path(), &args).status.success());
    let capped = Command::new(env!("CARGO_BIN_EXE_electroad"))
        .args(args)
        .args(["--out", b.path().to_str().unwrap()])
        .env("ELECTROAD_THREADS", "1")
        .output()
        .unwrap();
    assert!(capped.status.success());
    assert_eq!(
        std::fs::read(a.path().join("profile.csv")).unwrap(),
        std::fs::read(b.path().join("profile.csv")).unwrap()
    );
    let bad = Command::new(env!("CARGO_BIN_EXE_electroad"))
        .args(args)
        .args(["--out", b.path().to_str().unwrap()])
        .env("ELECTROAD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let code = |args: &[&str]| electroad(args).status.code();

    let schema = write(
        dir.path(),
        "schema.json",
        r#"{"network": {"num_nodes": 1}}"#,
    );
    let unknown = write(dir.path(), "unknown.json", r#"{"netwerk": {}}"#);
    let unit = write(
        dir.path(),
        "unit.json",
        r#"{"variation": {"fraction": 1.5}}"#,
    );
    let broken = write(dir.path(), "broken.json", "{");
    let heavy = write(
        dir.path(),
        "heavy.json",
        r#"{"network": {"v_base_kv": 0.2, "road_length_km": 20}}"#,
    );
    for f in [&schema, &unknown, &unit, &broken] {
        assert_eq!(
            code(&["profile", "--scenario", f.to_str().unwrap(), "--out", out]),
            Some(2),
            "{f:?}"
        );
    }
    assert_eq!(
        code(&[
            "profile",
            "--scenario",
            heavy.to_str().unwrap(),
            "--out",
            out
        ]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "profile",
            "--scenario",
            "/does/not/exist.json",
            "--out",
            out
        ]),
        Some(1)
    );
    assert_eq!(code(&["profile", "--bogus"]), Some(2));
    assert_eq!(code(&["swing", "--bus", "11", "--out", out]), Some(2));
    assert_eq!(
        code(&["cpf-count", "--length-km", "4", "--cap", "10", "--out", out]),
        Some(2)
    );
    assert_eq!(code(&["--help"]), Some(0));

    let plan = write(dir.path(), "plan.json", r#"{"positions": [1.0]}"#);
    let stress = scenario("stress.json");
    let args = [
        "collapse",
        "--scenario",
        stress.to_str().unwrap(),
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        out,
    ];
    assert_eq!(code(&args), Some(2));
    let stderr = String::from_utf8(electroad(&args).stderr).unwrap();
    assert!(stderr.contains("positions"), "{stderr}");
}

#[test]
fn two_bus_prints_roots() {
    let out = electroad(&[
        "two-bus", "--p", "0", "--q", "0", "--r", "0.1", "--x", "0.0234", "--v1", "1.0",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("u_high=1 u_low=0"), "{text}");

    let out = electroad(&[
        "two-bus", "--p", "0.5", "--q", "0.25", "--r", "1", "--x", "0.234",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("NoSolution"));

    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "two-bus", "--p", "0.1", "--q", "0.05", "--r", "0.1", "--x", "0.0234",
        ],
    );
    assert!(out.status.success());
    let rep = report(dir.path());
    let (hi, lo) = (rep.headline.u_high.unwrap(), rep.headline.u_low.unwrap());
    // independent check: both roots satisfy the quadratic
    let b = 2.0 * (0.1 * 0.1 + 0.05 * 0.0234) - 1.0;
    let c = (0.1f64.powi(2) + 0.05f64.powi(2)) * (0.1f64.powi(2) + 0.0234f64.powi(2));
    for u in [hi, lo] {
        assert!((u * u + b * u + c).abs() < 1e-14);
    }
}

#[test]
fn cpf_length_on_two_bus_matches_the_discriminant() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario("two_bus_stress.json");
    assert!(run_in(
        dir.path(),
        &["cpf-length", "--scenario", file.to_str().unwrap()]
    )
    .status
    .success());
    let tan_phi: f64 = 0.5;
    let tan_theta: f64 = 0.133 / 0.568;
    let sec = ((1.0 + tan_phi.powi(2)) * (1.0 + tan_theta.powi(2))).sqrt();
    let analytic = 1.0 / (2.0 * (tan_phi * tan_theta + 1.0 + sec)) / (0.03 * 0.568);
    let rep = report(dir.path());
    let traced = rep.headline.critical_length_km.unwrap();
    assert!((traced - analytic).abs() / analytic <= 1e-3);

    let (header, rows) = read_csv(&dir.path().join("nose_curve.csv"));
    assert_eq!(header, ["length_km", "voltage_pu", "branch"]);
    assert!(rows.iter().any(|r| r[2] == "upper") && rows.iter().any(|r| r[2] == "lower"));
    assert!(rows.iter().all(|r| r[2] == "upper" || r[2] == "lower"));
}

#[test]
fn count_and_collapse_reports() {
    let dir = tempfile::tempdir().unwrap();
    let stress = scenario("stress.json");
    let out = run_in(
        dir.path(),
        &[
            "cpf-count",
            "--scenario",
            stress.to_str().unwrap(),
            "--length-km",
            "4",
        ],
    );
    assert!(out.status.success());
    let rep = report(dir.path());
    assert_eq!(rep.headline.max_count, Some(4));
    assert_eq!(rep.headline.feasibility.as_ref().unwrap().len(), 9);
    assert_eq!(rep.outputs, ["report.json"]);

    let dir = tempfile::tempdir().unwrap();
    let plan = scenario("collapse_plan.json");
    let out = run_in(
        dir.path(),
        &[
            "collapse",
            "--scenario",
            stress.to_str().unwrap(),
            "--plan",
            plan.to_str().unwrap(),
        ],
    );
    assert!(out.status.success());
    let rep = report(dir.path());
    assert_eq!(rep.headline.collapsed, Some(true));
    let (header, rows) = read_csv(&dir.path().join("collapse.csv"));
    assert_eq!(header, ["step", "position_km", "min_voltage_pu", "branch"]);
    assert_eq!(rows.last().unwrap()[3], "collapsed");
    assert_eq!(rows.last().unwrap()[2], "0");
}
