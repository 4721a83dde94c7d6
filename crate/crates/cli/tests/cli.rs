use std::process::{Command, Output};

use serde_json::Value;

fn qhj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhj")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn headers() {
    let cases: [(&[&str], &str); 5] = [
        (&["solve", "--energy", "0.5", "--qmax", "1", "--points", "3"], "q,W,p,pp"),
        (&["well", "--energy", "0.5", "--qmax", "2", "--points", "3"], "q,W,p,pp"),
        (&["action", "--energy", "0.5"], "E,J_over_2pi,residual,case"),
        (&["time", "--potential", "well", "--energy", "0.5", "--qmax", "1", "--points", "3"], "q,t_minus_tau"),
        (&["eigen", "--potential", "well"], "n,parity,E,J_over_2pi,residual"),
    ];
    for (args, header) in cases {
        let o = qhj(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert_eq!(stdout(&o).lines().next(), Some(header), "{args:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = qhj(&["solve", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert_eq!(qhj(&["solve", "--energy", "0.5", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(qhj(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qhj(&["action", "--potential", "well", "--energy", "0.5,1.5"]).status.code(), Some(2));
    assert_eq!(qhj(&["table", "2"]).status.code(), Some(0));
    assert_eq!(qhj(&["table", "3"]).status.code(), Some(3));
    assert_eq!(qhj(&["table", "9"]).status.code(), Some(1));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# oscillator\npotential = lho\nenergy = 1.5\nqmax = 1\npoints = 5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&qhj(&["solve", "--config", c]));
    assert_eq!(column(&from_file, "q").len(), 5);
    let overridden = stdout(&qhj(&["solve", "--config", c, "--points", "3", "--energy", "0.5"]));
    let direct = stdout(&qhj(&["solve", "--energy", "0.5", "--qmax", "1", "--points", "3"]));
    assert_eq!(overridden, direct);

    std::fs::write(&cfg, "energy = 0.5\ncolour = red\n").unwrap();
    let o = qhj(&["solve", "--config", c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn output_file_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("j.json");
    let o = qhj(&["action", "--energy", "0.5,1.5", "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!((rows[1]["J_over_2pi"].as_f64().unwrap() - 2.0).abs() < 1e-10);

    let meta_path = format!("{}.meta.json", out.display());
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(meta_path).unwrap()).unwrap();
    let keys: Vec<&str> = meta.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["command", "config", "elapsed_seconds", "tool_version"]);
    assert_eq!(meta["command"], "action");
    assert_eq!(meta["config"]["format"], "json");
}

#[test]
fn floats_round_trip() {
    let text = stdout(&qhj(&["well", "--energy", "0.37", "--qmax", "3", "--points", "7"]));
    for line in text.lines().skip(1) {
        for cell in line.split(',') {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:.16e}"), cell);
        }
    }
}

#[test]
fn output_independent_of_thread_count() {
    let args = ["action", "--energy", "0.3,0.7,1.1,1.9,2.6", "--p0", "1.2"];
    let one = qhj(&[&args[..], &["--jobs", "1"]].concat());
    let four = qhj(&[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn well_time_peaks_outside_the_wall() {
    let a = std::f64::consts::FRAC_PI_4;
    let text = stdout(&qhj(&["time", "--potential", "well", "--energy", "0.5", "--qmax", "3", "--points", "3001"]));
    let qs = column(&text, "q");
    let ts = column(&text, "t_minus_tau");
    let (i, _) = ts.iter().enumerate().max_by(|x, y| x.1.partial_cmp(y.1).unwrap()).unwrap();
    assert!((qs[i] - (a + 0.6)).abs() < 0.01, "peak at {}", qs[i]);
    let inside = qs.iter().zip(&ts).filter(|(q, _)| **q <= a);
    for (q, t) in inside {
        assert!((t - q).abs() < 1e-12);
    }
}

#[test]
fn oscillator_eigenvalue_by_shooting() {
    let text = stdout(&qhj(&["eigen", "--n", "3"]));
    let e = column(&text, "E")[0];
    assert!((e - 2.5).abs() < 1e-9, "{e}");
}
