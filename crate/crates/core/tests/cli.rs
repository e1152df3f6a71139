use std::path::Path;
use std::process::{Command, Output};

fn flowaudit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowaudit"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn failing_claim_still_exits_zero_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowaudit(
        &["audit", "theorem1", "potential", "--grid", "8", "--out", "rep"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("theorem1") && text.contains("FAILS"), "{text}");
    assert!(text.contains("potential_identity") && text.contains("HOLDS"), "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep/report.json")).unwrap()).unwrap();
    assert_eq!(report["toolkit"], "flowaudit");
    assert_eq!(report["claims"].as_array().unwrap().len(), 2);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("rep/theorem1.csv").exists());
}

#[test]
fn config_file_and_flags_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.cfg"), "tol_theorem1 = 0.02\n").unwrap();
    let hash = |args: &[&str]| {
        let o = flowaudit(args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let out = args[args.iter().position(|a| *a == "--out").unwrap() + 1];
        let r: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(out).join("report.json")).unwrap()).unwrap();
        r["config_hash"].as_str().unwrap().to_string()
    };
    let plain = hash(&["audit", "potential", "--grid", "8", "--out", "p"]);
    let with_cfg = hash(&["audit", "potential", "--grid", "8", "--config", "a.cfg", "--out", "q"]);
    let with_flag = hash(&[
        "audit",
        "potential",
        "--grid",
        "8",
        "--threshold-rho-l",
        "1e-6",
        "--out",
        "r",
    ]);
    assert_ne!(plain, with_cfg);
    assert_ne!(plain, with_flag);
}

#[test]
fn execution_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.cfg"), "tol_theorm1 = 0.02\n").unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "this line has no equals sign\n").unwrap();
    for args in [
        &["audit", "potential", "--config", "typo.cfg"][..],
        &["audit", "potential", "--config", "bad.cfg"],
        &["audit", "potential", "--config", "missing.cfg"],
        &["audit", "no-such-claim"],
        &["audit"],
        &["audit", "potential", "--grid", "1"],
        &["eval-eq12", "--config", "typo.cfg"],
    ] {
        let o = flowaudit(args, dir.path());
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty(), "{args:?} gave no message");
    }
    let o = flowaudit(&["audit", "potential", "--config", "typo.cfg"], dir.path());
    assert!(String::from_utf8_lossy(&o.stderr).contains("tol_theorm1"));
}

#[test]
fn eval_eq12_reports_velocity_and_singular_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let base = "omega0 = 1\np_l = 1\ntheta1 = 1, 0, 0\ntheta2 = 0.5, 0, 0\nrho_s = 1\n";
    std::fs::write(dir.path().join("ok.cfg"), format!("{base}rho_l = 0.5, 0, 0\n")).unwrap();
    std::fs::write(dir.path().join("sing.cfg"), format!("{base}rho_l = 1e-12, 0, 0\n")).unwrap();

    let o = flowaudit(&["eval-eq12", "--config", "ok.cfg"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["u"], serde_json::json!([1.5, 0.0, 0.0]));

    let o = flowaudit(&["eval-eq12", "--config", "sing.cfg"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["error"].is_string());
    assert_ne!(v["regime"], "Laminar");
}

#[test]
fn simulate_writes_series_and_restarts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tg.cfg"),
        "initial = taylor_green\nnu = 0.1\nt_end = 0.2\ndt = 0.02\nprobes = 1 1; 2 2\nsnapshot_every = 5\n",
    )
    .unwrap();
    let o = flowaudit(
        &["simulate", "--config", "tg.cfg", "--grid", "16", "--out", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let series = std::fs::read_to_string(dir.path().join("run/series.csv")).unwrap();
    assert_eq!(series.lines().count(), 12, "{series}");
    assert!(dir.path().join("run/final").is_dir());

    // t_end is absolute, so a restart continues the clock
    std::fs::write(dir.path().join("tg2.cfg"), "nu = 0.1\nt_end = 0.4\ndt = 0.02\n").unwrap();
    let o = flowaudit(
        &[
            "simulate",
            "--config",
            "tg2.cfg",
            "--grid",
            "16",
            "--out",
            "more",
            "--restart",
            "run/final",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let more = std::fs::read_to_string(dir.path().join("more/series.csv")).unwrap();
    let first_t: f64 = more.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first_t - 0.2).abs() < 1e-12, "{more}");

    std::fs::write(
        dir.path().join("fast.cfg"),
        "initial = taylor_green\nnu = 0.1\nt_end = 0.2\ndt = 5\n",
    )
    .unwrap();
    let o = flowaudit(
        &["simulate", "--config", "fast.cfg", "--grid", "16", "--out", "x"],
        dir.path(),
    );
    assert!(!o.status.success());
}

#[test]
fn tube_extract_writes_one_csv_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sink.cfg"),
        "flow = converging\nsink_total_pressure = 10\ntube_flux = 1e-3\nseeds = 1.9 0; 1.9 0.2\n",
    )
    .unwrap();
    let o = flowaudit(
        &["tube-extract", "--config", "sink.cfg", "--grid", "32", "--out", "tubes"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..2 {
        let csv = std::fs::read_to_string(dir.path().join(format!("tubes/tube_{k:03}.csv"))).unwrap();
        assert!(csv.lines().count() > 10);
    }
}
