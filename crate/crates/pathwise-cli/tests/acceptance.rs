//! Acceptance suite: one line per criterion.
//!
//! Runs every criterion and prints `criterion N: PASS|FAIL name (detail)`
//! followed by a summary. The process exits with status 0 by default. With
//! `PATHWISE_ACCEPTANCE_STRICT=1` it exits with status 4 when any criterion
//! fails. Pass criterion numbers as
//! arguments to run a subset.

use pathwise_cli::error::EXIT_ACCEPTANCE;
use pathwise_cli::suites::{run_criterion, CRITERIA};

fn main() {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|k| (1..=CRITERIA.len()).contains(k))
        .collect();
    let ids: Vec<usize> = if selected.is_empty() {
        (1..=CRITERIA.len()).collect()
    } else {
        selected
    };
    let mut failed = 0;
    for k in &ids {
        let outcome = run_criterion(*k);
        if !outcome.passed {
            failed += 1;
        }
        println!("{} [{:.1}s]", outcome.line(), outcome.seconds);
    }
    println!("acceptance: {} passed, {failed} failed of {}", ids.len() - failed, ids.len());
    let strict = std::env::var("PATHWISE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(EXIT_ACCEPTANCE);
    }
}
