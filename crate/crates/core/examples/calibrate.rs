//! Calibration sweep for the transferable-attack defender budget: runs the
//! attack against the ERM defender at a range of sample budgets and prints
//! the measured transferability per budget.

use protocol_games_core::experiments::TransfAttackExperiment;
use protocol_games_core::rng::Seed;

fn main() {
    let budgets: Vec<u64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("budget"))
        .collect();
    let budgets = if budgets.is_empty() {
        vec![1, 2, 3, 4, 6, 8, 12, 20, 50, 100, 400]
    } else {
        budgets
    };
    println!("eps = 0.05, attack N = 18000, q = 320, 300 trials per budget");
    println!("{:>8}  {:>16}  {:>10}", "t", "transferability", "ci");
    for t in budgets {
        let exp = TransfAttackExperiment {
            epsilon: 0.05,
            lambda: 128,
            defender_samples: t,
            defenders: vec!["erm-halfplane".into()],
            distinguishers: vec!["flag-fraction".into()],
            trials: 300,
            undetectability_rounds: 1,
            c: 0.9,
            s: 0.1,
            threads: 4,
        };
        let verdict = exp.run(Seed(0xCA11B), None).unwrap();
        let est = verdict.transferability_min;
        println!(
            "{:>8}  {:>16.4}  [{:.4}, {:.4}]",
            t, est.rate, est.ci.0, est.ci.1
        );
    }
}
