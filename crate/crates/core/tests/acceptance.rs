//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! `QTRAJ_CRITERIA=3,6` restricts the run; `QTRAJ_SEED` changes the seed.

use qtraj::acceptance::{run_criteria, AcceptanceOptions, CRITERIA};
use std::process::ExitCode;

fn main() -> ExitCode {
    let ids: Vec<u32> = match std::env::var("QTRAJ_CRITERIA") {
        Ok(s) => s.split(',').filter_map(|x| x.trim().parse().ok()).collect(),
        Err(_) => CRITERIA.to_vec(),
    };
    let mut opts = AcceptanceOptions::default();
    if let Some(seed) = std::env::var("QTRAJ_SEED").ok().and_then(|s| s.parse().ok()) {
        opts.seed = seed;
    }
    let outcomes = run_criteria(&ids, opts);
    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("AC{:<2} {tag} {} ({:.1} s): {}", o.id, o.name, o.wall_seconds, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
