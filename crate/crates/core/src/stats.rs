//! Chernoff-bound formulas, distinguishing-advantage estimation, and
//! total-variation lower bounds.
//!
//! Confidence intervals are Wilson score intervals throughout: the rates we
//! estimate (advantages near ½, violation frequencies near 0) live exactly
//! where the normal approximation misbehaves.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::BudgetError;
use crate::rng::Seed;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("parameter {name} = {value} outside valid range {range}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("at least one trial is required")]
    NoTrials,
}

fn check(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), StatsError> {
    if ok {
        Ok(())
    } else {
        Err(StatsError::ParamOutOfRange { name, value, range })
    }
}

// ---------------------------------------------------------------------------
// Chernoff-Hoeffding bounds
// ---------------------------------------------------------------------------

/// Two-sided bound `P[|mean − p| > eps] ≤ 2·exp(−eps²k/2)`.
pub fn chernoff_two_sided(eps: f64, k: u64) -> Result<f64, StatsError> {
    check("eps", eps, eps > 0.0 && eps < 1.0, "(0, 1)")?;
    check("k", k as f64, k >= 1, "[1, ∞)")?;
    Ok(2.0 * (-eps * eps * k as f64 / 2.0).exp())
}

/// Lower-tail bound `P[mean ≤ (1−eps)·p] ≤ exp(−eps²kp/2)`.
pub fn chernoff_lower(eps: f64, k: u64, p: f64) -> Result<f64, StatsError> {
    check("eps", eps, eps > 0.0 && eps < 1.0, "(0, 1)")?;
    check("k", k as f64, k >= 1, "[1, ∞)")?;
    check("p", p, p > 0.0 && p <= 1.0, "(0, 1]")?;
    Ok((-eps * eps * k as f64 * p / 2.0).exp())
}

/// Upper-tail bound `P[mean > (1+delta)·p] ≤ exp(−delta²kp/(2+delta))`.
pub fn chernoff_upper(delta: f64, k: u64, p: f64) -> Result<f64, StatsError> {
    check("delta", delta, delta > 0.0, "(0, ∞)")?;
    check("k", k as f64, k >= 1, "[1, ∞)")?;
    check("p", p, p > 0.0 && p <= 1.0, "(0, 1]")?;
    Ok((-delta * delta * k as f64 * p / (2.0 + delta)).exp())
}

// ---------------------------------------------------------------------------
// Wilson score interval
// ---------------------------------------------------------------------------

const Z95: f64 = 1.959963984540054;

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let spread = (Z95 / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - spread).max(0.0), (center + spread).min(1.0))
}

// ---------------------------------------------------------------------------
// Indistinguishability game
// ---------------------------------------------------------------------------

/// Estimated distinguishing advantage: `win rate − ½` with a 95% interval
/// (the interval is the Wilson interval of the win rate, shifted by ½).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub advantage: f64,
    pub interval: (f64, f64),
    pub trials: u64,
}

impl AdvantageEstimate {
    pub fn from_wins(wins: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(wins, trials);
        AdvantageEstimate {
            advantage: wins as f64 / trials.max(1) as f64 - 0.5,
            interval: (lo - 0.5, hi - 0.5),
            trials,
        }
    }

    /// Whether the interval straddles zero advantage.
    pub fn consistent_with_zero(&self) -> bool {
        self.interval.0 <= 0.0 && 0.0 <= self.interval.1
    }
}

/// A distinguisher playing the two-distribution guessing game. Budget
/// overruns are reported, not hidden: the game scores them as losses.
pub trait Distinguisher<T>: Send + Sync {
    fn name(&self) -> &str;

    /// Guess which distribution produced `x` (0 or 1).
    fn guess(&self, x: &T, rng: &mut ChaCha12Rng) -> Result<u8, BudgetError>;
}

/// Play the guessing game: per trial draw `b ~ U{0,1}`, hand the
/// distinguisher a draw from `D_b`, and record whether it wins. A budget
/// overrun inside a trial counts as a loss for that trial.
pub fn run_indistinguishability_game<T>(
    d0: impl Fn(&mut ChaCha12Rng) -> T,
    d1: impl Fn(&mut ChaCha12Rng) -> T,
    distinguisher: &dyn Distinguisher<T>,
    trials: u64,
    seed: Seed,
) -> Result<AdvantageEstimate, StatsError> {
    if trials == 0 {
        return Err(StatsError::NoTrials);
    }
    let mut wins = 0u64;
    for t in 0..trials {
        let mut rng = seed.stream("indist-trial", t);
        let b = rng.random::<bool>() as u8;
        let x = if b == 0 { d0(&mut rng) } else { d1(&mut rng) };
        match distinguisher.guess(&x, &mut rng) {
            Ok(guess) if guess == b => wins += 1,
            _ => {}
        }
    }
    Ok(AdvantageEstimate::from_wins(wins, trials))
}

/// Total-variation lower bound via a distinguisher: `2·max(0, advantage)`.
///
/// This is a lower bound certified by one concrete distinguisher, not the
/// total variation itself.
pub fn tv_lower_bound<T>(
    d0: impl Fn(&mut ChaCha12Rng) -> T,
    d1: impl Fn(&mut ChaCha12Rng) -> T,
    distinguisher: &dyn Distinguisher<T>,
    trials: u64,
    seed: Seed,
) -> Result<f64, StatsError> {
    let adv = run_indistinguishability_game(d0, d1, distinguisher, trials, seed)?;
    Ok((2.0 * adv.advantage).max(0.0))
}

/// Distinguisher defined by a plain closure, for baselines and tests.
pub struct FnDistinguisher<F> {
    name: String,
    f: F,
}

impl<F> FnDistinguisher<F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnDistinguisher {
            name: name.into(),
            f,
        }
    }
}

impl<T, F> Distinguisher<T> for FnDistinguisher<F>
where
    F: Fn(&T, &mut ChaCha12Rng) -> Result<u8, BudgetError> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn guess(&self, x: &T, rng: &mut ChaCha12Rng) -> Result<u8, BudgetError> {
        (self.f)(x, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chernoff_closed_forms() {
        // eps → 0 limit is the vacuous bound 2 (checked at a tiny eps).
        let near_two = chernoff_two_sided(1e-9, 5).unwrap();
        assert!((near_two - 2.0).abs() < 1e-12);

        // High-precision evaluations of the closed forms.
        let b = chernoff_two_sided(0.1, 200).unwrap();
        assert!((b - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((b - 0.7357588823428847).abs() < 1e-12);

        let near_one = chernoff_lower(1e-9, 7, 0.3).unwrap();
        assert!((near_one - 1.0).abs() < 1e-12);

        let lo = chernoff_lower(0.5, 100, 0.2).unwrap();
        assert!((lo - (-2.5f64).exp()).abs() < 1e-15);
        assert!((lo - 0.0820849986238988).abs() < 1e-12);

        let up = chernoff_upper(1.0, 72, 1.0).unwrap();
        assert!((up - (-24.0f64).exp()).abs() < 1e-24);
    }

    #[test]
    fn chernoff_rejects_out_of_range() {
        assert!(chernoff_two_sided(1.5, 10).is_err());
        assert!(chernoff_two_sided(0.1, 0).is_err());
        assert!(chernoff_lower(0.0, 10, 0.5).is_err());
        assert!(chernoff_lower(0.5, 10, 0.0).is_err());
        assert!(chernoff_upper(0.0, 10, 0.5).is_err());
    }

    proptest! {
        /// Outputs live in (0, 2] and decrease in k and in eps/delta.
        #[test]
        fn chernoff_range_and_monotonicity(
            eps in 0.01f64..0.99,
            k in 1u64..5000,
            p in 0.01f64..1.0,
        ) {
            let two = chernoff_two_sided(eps, k).unwrap();
            // strictly positive unless the exponent underflows f64
            prop_assert!(two <= 2.0 && (two > 0.0 || eps * eps * k as f64 / 2.0 > 700.0));
            prop_assert!(chernoff_two_sided(eps, k + 50).unwrap() <= two);
            let eps2 = (eps + 0.005).min(0.9899);
            prop_assert!(chernoff_two_sided(eps2, k).unwrap() <= two);

            let lo = chernoff_lower(eps, k, p).unwrap();
            prop_assert!(lo <= 1.0 && (lo > 0.0 || eps * eps * k as f64 * p / 2.0 > 700.0));
            prop_assert!(chernoff_lower(eps, k + 50, p).unwrap() <= lo);

            let up = chernoff_upper(eps, k, p).unwrap();
            prop_assert!(up <= 1.0 && (up > 0.0 || eps * eps * k as f64 * p > 700.0));
            prop_assert!(chernoff_upper(eps, k + 50, p).unwrap() <= up);
            prop_assert!(chernoff_upper(eps + 0.005, k, p).unwrap() <= up);
        }
    }

    #[test]
    fn wilson_interval_basics() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.9 && hi > 0.9999);
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo < 1e-12 && hi < 0.1);
    }

    fn bern(p: f64) -> impl Fn(&mut ChaCha12Rng) -> u8 {
        move |rng| if rng.random::<f64>() < p { 1 } else { 0 }
    }

    #[test]
    fn identical_samplers_have_zero_advantage() {
        // d0 = d1: even the Bayes rule cannot beat a coin flip.
        let d = FnDistinguisher::new("membership", |x: &u8, _: &mut ChaCha12Rng| {
            Ok(if *x == 1 { 1 } else { 0 })
        });
        let est = run_indistinguishability_game(bern(0.3), bern(0.3), &d, 20_000, Seed(11))
            .unwrap();
        assert!(est.advantage.abs() < 0.02, "{est:?}");
        assert!(est.consistent_with_zero() || est.advantage.abs() < 0.02);
    }

    #[test]
    fn disjoint_support_gives_half_advantage() {
        let d = FnDistinguisher::new("membership", |x: &u8, _: &mut ChaCha12Rng| {
            Ok(if *x >= 100 { 1 } else { 0 })
        });
        let est = run_indistinguishability_game(
            |_| 0u8,
            |_| 200u8,
            &d,
            5_000,
            Seed(12),
        )
        .unwrap();
        assert!((est.advantage - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bayes_optimal_advantage_is_half_tv() {
        // d1 equals d0 with 10% of the mass moved from value 0 to value 1:
        // TV = 0.1, so the Bayes rule wins with probability 0.55.
        let d0 = |rng: &mut ChaCha12Rng| rng.random_range(0u8..10);
        let d1 = |rng: &mut ChaCha12Rng| {
            let x = rng.random_range(0u8..10);
            if x == 0 {
                1
            } else {
                x
            }
        };
        let bayes = FnDistinguisher::new("bayes", |x: &u8, _: &mut ChaCha12Rng| {
            Ok(match *x {
                0 => 0,
                1 => 1,
                _ => 0,
            })
        });
        let est =
            run_indistinguishability_game(d0, d1, &bayes, 200_000, Seed(13)).unwrap();
        assert!((est.advantage - 0.05).abs() < 0.005, "{est:?}");
    }

    #[test]
    fn always_zero_distinguisher_estimate_contains_zero() {
        let d = FnDistinguisher::new("zero", |_: &u8, _: &mut ChaCha12Rng| Ok(0));
        let est =
            run_indistinguishability_game(bern(0.4), bern(0.9), &d, 10_000, Seed(14)).unwrap();
        assert!(est.consistent_with_zero(), "{est:?}");
    }

    #[test]
    fn budget_overrun_counts_as_loss() {
        // A distinguisher that always overruns never wins: advantage −½.
        let d = FnDistinguisher::new("overrun", |_: &u8, _: &mut ChaCha12Rng| {
            Err(BudgetError {
                kind: crate::domain::ResourceKind::Ops,
                requested: 1,
                used: 0,
                limit: 0,
            })
        });
        let est =
            run_indistinguishability_game(bern(0.5), bern(0.5), &d, 1_000, Seed(15)).unwrap();
        assert!((est.advantage + 0.5).abs() < 1e-12);
    }

    #[test]
    fn tv_lower_bound_examples() {
        let zero = FnDistinguisher::new("zero", |_: &u8, _: &mut ChaCha12Rng| Ok(0));
        let tv = tv_lower_bound(bern(0.5), bern(0.5), &zero, 2_000, Seed(16)).unwrap();
        assert!(tv < 0.05);

        let member = FnDistinguisher::new("membership", |x: &u8, _: &mut ChaCha12Rng| {
            Ok(if *x >= 100 { 1 } else { 0 })
        });
        let tv = tv_lower_bound(|_| 0u8, |_| 200u8, &member, 5_000, Seed(17)).unwrap();
        assert!((tv - 1.0).abs() < 1e-12);

        // Bernoulli p = 0.2 vs p = 0.5 with the threshold rule: TV = 0.3.
        let threshold = FnDistinguisher::new("threshold", |x: &u8, _: &mut ChaCha12Rng| Ok(*x));
        let tv = tv_lower_bound(bern(0.2), bern(0.5), &threshold, 200_000, Seed(18)).unwrap();
        assert!((tv - 0.3).abs() < 0.02, "tv = {tv}");
    }

    #[test]
    fn empirical_tails_never_beat_chernoff_materially() {
        // Small in-module version of the audit the acceptance suite runs on
        // the full grid.
        let mut violations = 0;
        for (eps, k, p) in [(0.1f64, 100u64, 0.3f64), (0.2, 200, 0.5), (0.05, 400, 0.1)] {
            let reps = 20_000u64;
            let mut two = 0u64;
            let mut rng = Seed(19).stream("audit", (k as f64 * p) as u64);
            for _ in 0..reps {
                let mut sum = 0u64;
                for _ in 0..k {
                    sum += (rng.random::<f64>() < p) as u64;
                }
                let mean = sum as f64 / k as f64;
                if (mean - p).abs() > eps {
                    two += 1;
                }
            }
            let freq = two as f64 / reps as f64;
            let bound = chernoff_two_sided(eps, k).unwrap();
            let se = (freq * (1.0 - freq) / reps as f64).sqrt();
            if freq > bound + 3.0 * se {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }
}
