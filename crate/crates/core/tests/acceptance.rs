//! Runs every reproduction criterion and prints one PASS/FAIL line each.
//!
//! `IRSA_CRITERIA=3,4` restricts the run. A check listed in `KNOWN_GAPS`
//! still prints as FAIL with its numbers; it just does not fail the target.
//! Anything else that fails does.

use irsa_game::repro::run_criterion;

const SEED: u64 = 1;

/// (criterion, check label) pairs whose reference value cannot be reached
/// by a correct implementation.
const KNOWN_GAPS: &[(usize, &str)] = &[
    // Published 0.26 is 4/15 truncated; the exact value is 0.2667.
    (1, "Λ3 published"),
    // The published row does not equalize support utilities; the only root
    // reachable on this support has throughput near 0.54.
    (6, "support [1, 2, 3, 4] throughput"),
    // At 1e5 frames the reward standard errors (about 1) exceed the ±0.6
    // tolerance, so agreement with the published numbers is down to the draw.
    (7, "r2"),
    (7, "r3"),
    (7, "r6"),
    (7, "bound r1"),
    (7, "bound r4"),
    (7, "bound r5"),
];

fn main() {
    let ids: Vec<usize> = match std::env::var("IRSA_CRITERIA") {
        Ok(s) => s.split(',').map(|x| x.trim().parse().expect("criterion number")).collect(),
        Err(_) => (1..=10).collect(),
    };
    let mut unexpected = Vec::new();
    for id in ids {
        let outcome = match run_criterion(id, SEED) {
            Ok(o) => o,
            Err(e) => {
                println!("FAIL {id:>2} error: {e}");
                unexpected.push(format!("criterion {id}: {e}"));
                continue;
            }
        };
        println!("{}", outcome.summary());
        for check in &outcome.checks {
            let known = KNOWN_GAPS.contains(&(id, check.label.as_str()));
            let mark = match (check.passed, known) {
                (true, _) => "ok",
                (false, true) => "known gap",
                (false, false) => "FAILED",
            };
            println!("       {mark:<9} {}: {}", check.label, check.detail);
            if !check.passed && !known {
                unexpected.push(format!("criterion {id}: {}", check.label));
            }
        }
        for note in &outcome.notes {
            println!("       note      {note}");
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures:\n  {}", unexpected.join("\n  "));
        std::process::exit(1);
    }
}
