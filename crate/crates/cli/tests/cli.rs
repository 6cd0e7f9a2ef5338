use qtraj::config::{parse_config, Command};
use qtraj_cli::{apply_overrides, execute, CliError, Overrides, RunOptions};
use std::path::Path;
use std::process::Command as Process;

const SMALL: &str = r#"
[model]
mode_frequency = 1.0
alpha1 = 0.5
alpha2 = 0.5
beta = 1.0
count_rate = 0.5
[model.laser]
amplitude = 0.3
frequency = 1.0
bandwidth = 0.05
[[model.channels]]
kernel = { type = "exponential", amplitude = 0.2, decay = 0.3, center = 1.0 }
[run]
trajectories = 40
horizon = 2.0
dt = 0.01
record_stride = 5
keep_trajectories = 2
seed = 11
"#;

const WHITE: &str = r#"
command = "oracle"
[model]
mode_frequency = 2.0
alpha1 = 0.6
alpha2 = 0.4
beta = 1.0
count_rate = 0.48
[[model.channels]]
b = [0.3, 0.0]
[[model.channels]]
b = [0.1, 0.2]
[detection]
mu_points = 21
"#;

fn run(text: &str, command: Option<Command>, out: &Path, threads: Option<usize>) -> qtraj_cli::manifest::Manifest {
    let cfg = apply_overrides(
        parse_config(text).unwrap(),
        &Overrides {
            command,
            ..Overrides::default()
        },
    )
    .unwrap();
    execute(
        &cfg,
        &RunOptions {
            out: out.to_path_buf(),
            threads,
            plots: true,
        },
    )
    .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn white_only_lambda_equals_photon_number() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(WHITE, None, dir.path(), None);
    assert!(m.success);
    let (headers, rows) = read_csv(&dir.path().join("lambda.csv"));
    assert_eq!(headers, ["source", "lambda", "count_rate[1/T]", "white_photon_number"]);
    let total = rows.iter().find(|r| r[0] == "total").unwrap();
    let lam: f64 = total[1].parse().unwrap();
    let n: f64 = total[3].parse().unwrap();
    assert_eq!(lam, n);
    assert!(dir.path().join("mandel.csv").exists());
    assert!(dir.path().join("spectrum_oracle.svg").exists());
}

#[test]
fn zero_trajectories_is_a_config_error() {
    let text = SMALL.replace("trajectories = 40", "trajectories = 0");
    match parse_config(&text) {
        Err(qtraj::Error::Config(v)) => assert!(v.iter().any(|m| m.contains("run.trajectories")), "{v:?}"),
        other => panic!("unexpected {other:?}"),
    }
    // The override path is checked too.
    let ok = parse_config(SMALL).unwrap();
    let err = apply_overrides(
        ok,
        &Overrides {
            trajectories: Some(0),
            ..Overrides::default()
        },
    );
    match err {
        Err(CliError::Model(qtraj::Error::Config(v))) => {
            assert!(v.iter().any(|m| m.contains("run.trajectories")), "{v:?}")
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("zero trajectories accepted"),
    }
}

#[test]
fn unknown_key_is_rejected() {
    let text = SMALL.replace("seed = 11", "seed = 11\nsede = 3");
    match parse_config(&text) {
        Err(qtraj::Error::Config(v)) => assert!(v.iter().any(|m| m.contains("sede")), "{v:?}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    for command in [Command::Simulate, Command::Counting] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run(SMALL, Some(command), a.path(), Some(1));
        let mb = run(SMALL, Some(command), b.path(), Some(3));
        assert_eq!(ma.files, mb.files);
        for f in ma.files.iter().filter(|f| f.ends_with(".csv") || f.ends_with(".toml")) {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert!(x == y, "{f} differs between thread counts");
        }
        assert_eq!(ma.config_hash, mb.config_hash);
    }
}

#[test]
fn simulate_writes_headed_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(SMALL, None, dir.path(), None);
    let (headers, rows) = read_csv(&dir.path().join("ensemble.csv"));
    assert_eq!(headers[0], "time[T]");
    assert_eq!(rows.len(), 2.0f64.div_euclid(0.05) as usize + 1);
    // Physical law: every weight is one.
    assert!(rows.iter().all(|r| r[3] == "1e0"));
    let (_, traj) = read_csv(&dir.path().join("trajectories.csv"));
    assert_eq!(traj.len(), 2 * rows.len());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"], m.config_hash.as_str());
    assert_eq!(manifest["seed"], 11);
    for f in &m.files {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn reference_law_weights_average_near_one() {
    let text = SMALL
        .replace("seed = 11", "seed = 11\nlaw = \"reference\"")
        .replace("trajectories = 40", "trajectories = 400");
    let dir = tempfile::tempdir().unwrap();
    run(&text, None, dir.path(), None);
    let (_, rows) = read_csv(&dir.path().join("ensemble.csv"));
    let last = rows.last().unwrap();
    let (w, se): (f64, f64) = (last[3].parse().unwrap(), last[4].parse().unwrap());
    assert!((w - 1.0).abs() <= 4.0 * se + 1e-9, "{w} ± {se}");
}

#[test]
fn spectrum_requires_physical_law() {
    let text = SMALL.replace("seed = 11", "seed = 11\nlaw = \"reference\"");
    let cfg = apply_overrides(
        parse_config(&text).unwrap(),
        &Overrides {
            command: Some(Command::Spectrum),
            ..Overrides::default()
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = execute(
        &cfg,
        &RunOptions {
            out: dir.path().to_path_buf(),
            threads: None,
            plots: false,
        },
    );
    assert!(matches!(err, Err(CliError::Usage(_))));
}

#[test]
fn spectrum_command_reports_estimate_and_oracle() {
    let text = SMALL
        .replace("horizon = 2.0", "horizon = 30.0")
        .replace("seed = 11", "seed = 11\nburn_in = 10.0")
        + "[detection]\nmu_min = -3.0\nmu_max = 3.0\nspectrum = { segment_length = 256 }\n";
    let dir = tempfile::tempdir().unwrap();
    run(&text, Some(Command::Spectrum), dir.path(), None);
    let (headers, rows) = read_csv(&dir.path().join("spectrum.csv"));
    assert_eq!(headers, ["mu[rad/T]", "s_estimate", "s_estimate_se", "s_oracle", "gain2"]);
    assert!(!rows.is_empty());
    for r in &rows {
        let mu: f64 = r[0].parse().unwrap();
        assert!((-3.0..=3.0).contains(&mu));
        let oracle: f64 = r[3].parse().unwrap();
        let gain: f64 = r[4].parse().unwrap();
        assert!(oracle >= gain);
    }
}

#[test]
fn validate_subset_passes() {
    let text = format!("command = \"validate\"\n{SMALL}[validate]\ncriteria = [7]\n");
    let dir = tempfile::tempdir().unwrap();
    let m = run(&text, None, dir.path(), None);
    assert!(m.success);
    assert_eq!(m.criteria.len(), 1);
    let (headers, rows) = read_csv(&dir.path().join("acceptance.csv"));
    assert_eq!(headers, ["criterion", "name", "passed", "detail"]);
    assert_eq!(rows[0][0], "7");
    assert_eq!(rows[0][2], "true");
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_qtraj");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("trajectories = 40", "trajectories = 0")).unwrap();
    let out = Process::new(exe)
        .args(["simulate", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o1"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.trajectories"));

    let good = dir.path().join("good.toml");
    std::fs::write(&good, WHITE).unwrap();
    let out = Process::new(exe)
        .args(["--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("o2"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o2/lambda.csv").exists());

    let out = Process::new(exe).args(["simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
