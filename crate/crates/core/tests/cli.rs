use std::fs;
use std::path::Path;
use std::process::Command;

fn sdgem(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sdgem"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn solve_single_cell_reports_unserved_demand() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.csv"), "n_cells=1\n").unwrap();
    fs::write(dir.path().join("s.csv"), "t,cell,supply,demand\n0,0,2,5\n").unwrap();
    let (code, err) = sdgem(&["solve", "--graph", "g.csv", "--snapshots", "s.csv", "--out", "o"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(&dir.path().join("o"), "rho.csv"), "t,rho\n0,3\n");
}

#[test]
fn solve_matched_snapshot_has_zero_rho() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.csv"), "n_cells=3\n0,1,1\n1,0,1\n1,2,1\n2,1,1\n").unwrap();
    fs::write(
        dir.path().join("s.csv"),
        "t,cell,supply,demand\n0,0,1,1\n0,1,4,4\n0,2,0,0\n1,0,2,2\n1,1,0,0\n1,2,7,7\n",
    )
    .unwrap();
    let (code, err) = sdgem(&["solve", "--graph", "g.csv", "--snapshots", "s.csv"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(dir.path(), "rho.csv"), "t,rho\n0,0\n1,0\n");
}

#[test]
fn missing_input_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = sdgem(&["solve", "--graph", "nope.csv", "--snapshots", "nope.csv"], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("nope.csv"), "{err}");
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.csv"), "n_cells=2\n0,1,1\n").unwrap();
    fs::write(dir.path().join("s.csv"), "t,cell,supply,demand\n0,0,1,1\n0,1,-3,1\n").unwrap();
    let (code, err) = sdgem(&["solve", "--graph", "g.csv", "--snapshots", "s.csv"], dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("s.csv:3"), "{err}");
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = sdgem(&["solve", "--bogus"], dir.path());
    assert_eq!(code, 2);
}

#[test]
fn simulate_then_indices_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sim.cfg"),
        "graph = grid:3x3\nhorizon = 48\nrequest_rates = 2\ndriver_signin_rates = 0.8\nseed = 4\n",
    )
    .unwrap();
    for run in ["a", "b"] {
        let (code, err) = sdgem(&["simulate", "--sim-config", "sim.cfg", "--out", run], dir.path());
        assert_eq!(code, 0, "{err}");
        let (code, err) = sdgem(
            &["indices", "--graph", &format!("{run}/graph.csv"), "--snapshots", &format!("{run}/snapshots.csv"), "--out", run],
            dir.path(),
        );
        assert_eq!(code, 0, "{err}");
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for file in ["snapshots.csv", "graph.csv", "indices.csv", "scatter.csv"] {
        assert_eq!(read(&a, file), read(&b, file), "{file}");
    }
    let indices = read(&a, "indices.csv");
    assert!(indices.starts_with("t,A_d,A_s,M,N,label\n"));
    // four 12-snapshot windows plus the whole-run row
    assert_eq!(indices.lines().count(), 6);
    assert!(indices.lines().last().unwrap().starts_with("all,"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sim.cfg"), "graph = grid:2x2\nhorizon = 0\nrequest_rates = 1\ndriver_signin_rates = 1\nseed = 1\n").unwrap();
    fs::write(dir.path().join("run.cfg"), "sim_config = sim.cfg\nout_dir = from_config\n").unwrap();
    let (code, err) = sdgem(&["simulate", "--config", "run.cfg"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(&dir.path().join("from_config"), "snapshots.csv"), "t,cell,supply,demand\n");
    let (code, err) = sdgem(&["simulate", "--config", "run.cfg", "--out", "from_flag"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("from_flag/snapshots.csv").exists());
}

#[test]
fn effects_writes_battery_and_market_shifts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sim.cfg"),
        "graph = grid:3x3\nhorizon = 30\nrequest_rates = 2\ndriver_signin_rates = 0.8\nsupply_scale = 0.5\nseed = 8\n",
    )
    .unwrap();
    let mut design = String::from("market,period,arm\n");
    for m in ["east", "west"] {
        for p in 0..10 {
            design.push_str(&format!("{m},{p},{}\n", if p % 2 == 0 { "treatment" } else { "control" }));
        }
    }
    fs::write(dir.path().join("design.csv"), design).unwrap();
    let (code, err) = sdgem(
        &["effects", "--sim-config", "sim.cfg", "--design", "design.csv", "--period-length", "15", "--n-permutations", "100"],
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    let effects = read(dir.path(), "effects.csv");
    let names: Vec<&str> = effects.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names.len(), 7);
    assert_eq!(names[0], "rho");
    let shifts = read(dir.path(), "ate_by_market.csv");
    assert_eq!(shifts.lines().count(), 3);
    assert!(dir.path().join("snapshots/east.csv").exists());
}

#[test]
fn empty_demand_window_is_flagged_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.csv"), "n_cells=2\n0,1,1\n1,0,1\n").unwrap();
    fs::write(dir.path().join("s.csv"), "t,cell,supply,demand\n0,0,2,1\n0,1,1,1\n1,0,3,0\n1,1,0,0\n").unwrap();
    let (code, err) = sdgem(&["indices", "--graph", "g.csv", "--snapshots", "s.csv", "--window", "1"], dir.path());
    assert_eq!(code, 0, "{err}");
    let text = read(dir.path(), "indices.csv");
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(rows[2].starts_with("1,") && rows[2].ends_with(",undefined"), "{text}");
    assert!(!rows[1].ends_with(",undefined"), "{text}");
}
