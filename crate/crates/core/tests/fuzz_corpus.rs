//! Replays the checked-in fuzz seeds through the same assertions as the
//! fuzz targets, so regressions show up without a fuzzing toolchain.

use qtraj::config::parse_config;
use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn config_seeds_round_trip() {
    let mut accepted = 0;
    for (name, text) in seeds("config_roundtrip") {
        let Ok(cfg) = parse_config(&text) else { continue };
        accepted += 1;
        let canon = cfg.to_toml().unwrap();
        let back = parse_config(&canon).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.to_toml().unwrap(), canon, "{name}");
    }
    assert!(accepted >= 2);
}

#[test]
fn error_seed_lists_every_problem() {
    let (_, text) = seeds("parse_config").into_iter().find(|(n, _)| n.ends_with("errors.toml")).unwrap();
    match parse_config(&text) {
        Err(qtraj::Error::Config(v)) => assert!(v.iter().any(|m| m.contains("colour")), "{v:?}"),
        other => panic!("unexpected {other:?}"),
    }
    // Once the shape is valid, every bad value is reported at once.
    let shaped = text.replace("colour = 3\n", "");
    match parse_config(&shaped) {
        Err(qtraj::Error::Config(v)) => {
            for key in ["model.count_rate", "run.trajectories", "run.dt"] {
                assert!(v.iter().any(|m| m.contains(key)), "{key} missing from {v:?}");
            }
        }
        other => panic!("unexpected {other:?}"),
    }
}
