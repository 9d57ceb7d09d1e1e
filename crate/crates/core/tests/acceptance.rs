//! Runs every acceptance criterion and prints one verdict line each. Exits
//! nonzero when any criterion fails; skipped criteria do not fail the run.

mod common;

use common::criteria::{self, Verdict};

fn main() {
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    type Check = (&'static str, fn() -> Verdict);
    let all: [Check; 11] = [
        ("motif oracle equivalence", criteria::motif_oracle),
        ("closed-form motif counts", criteria::closed_form_counts),
        ("gradient fidelity", criteria::gradient_fidelity),
        ("supervised locality", criteria::locality),
        ("normalization", criteria::normalization),
        ("analytic loss anchors", criteria::analytic_anchors),
        ("citation benchmark", criteria::cora),
        ("planted-role benchmark", criteria::planted),
        ("Q sensitivity", criteria::q_sensitivity),
        ("linear overhead", criteria::linear_overhead),
        ("determinism", criteria::determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in all.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let verdict = check();
        failed += verdict.is_fail() as usize;
        println!("{}", verdict.line(id, name));
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criterion(s) failed");
        std::process::exit(1);
    }
}
