//! From a transferable attack to an EFID pair: two efficiently samplable
//! distributions (honest q-tuples vs attack output) that are statistically
//! far yet indistinguishable for budget-bounded observers.
//!
//! Statistical distance is certified from below by the oracle-assisted
//! distinguisher: learn a classifier within the bounded budget, answer the
//! tuple, and report "attack" iff the measured error exceeds 2ε. That
//! distinguisher uses strictly more information than the bounded suite —
//! the trusted error oracle — and the harness grants oracle access to
//! nothing else.

use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{empirical_error, Budget, LearningTask, ProtocolParams};
use crate::parallel::run_trials;
use crate::players::{PlayerError, QueryAnswerer, TupleDistinguisher};
use crate::protocols::AttackCrafter;
use crate::rng::Seed;
use crate::stats::AdvantageEstimate;

#[derive(Debug, Error)]
pub enum EfidError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// Parameters of an EFID pair claim.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EfidParams {
    /// Sampling budget: both distributions are samplable within it.
    pub sampling_budget_samples: u64,
    /// Budget class of the distinguishers the pair must fool.
    pub distinguisher_budget_samples: u64,
    /// Statistical-distance target `½(p + c − 1 − e^{−εq/3})`.
    pub eta_target: f64,
    /// Indistinguishability target for the bounded suite.
    pub delta_target: f64,
}

/// The pair: honest q-tuples (`D0`) against attack outputs (`D1`), bound to
/// one task-instance factory so every draw gets a fresh instance.
pub struct EfidPair<X> {
    pub params: EfidParams,
    make: Box<dyn Fn(Seed) -> EfidInstance<X> + Sync>,
    q: usize,
    protocol: ProtocolParams,
    /// Measured learner success probability that produced `eta_target`.
    pub measured_p: f64,
    /// Measured transferability that produced `eta_target`.
    pub measured_c: f64,
}

/// One bound instance: a task plus the attack and the bounded learner
/// playing on it.
pub struct EfidInstance<X> {
    pub task: LearningTask<X>,
    pub attacker: Box<dyn AttackCrafter<X>>,
    /// The budget-bounded learner/answerer the distinguisher runs.
    pub learner: Box<dyn QueryAnswerer<X>>,
    /// Harness-side success check for the learner's classifier: whether a
    /// fresh fit achieves `err(f) ≤ ε`.
    pub learner_risk_ok: Box<dyn Fn(&mut ChaCha12Rng) -> bool>,
    /// Bounded distinguishers without oracle access.
    pub bounded_suite: Vec<Box<dyn TupleDistinguisher<X>>>,
}

/// The closed form `½(p + c − 1 − e^{−εq/3})`.
pub fn eta_target(p: f64, c: f64, eps: f64, q: usize) -> f64 {
    0.5 * (p + c - 1.0 - (-eps * q as f64 / 3.0).exp())
}

/// Build the pair from an attack: measure the learner's success probability
/// `p̂` and the attack's transferability `ĉ` against that same learner, then
/// set the statistical-distance target from the closed form.
pub fn build_efid<X: Clone + Send>(
    make: Box<dyn Fn(Seed) -> EfidInstance<X> + Sync>,
    protocol: ProtocolParams,
    calibration_trials: u64,
    seed: Seed,
    threads: usize,
) -> Result<EfidPair<X>, EfidError> {
    if calibration_trials == 0 {
        return Err(EfidError::NoTrials);
    }
    let q = protocol.q;

    // calibration phase: p̂ = P[err(f) ≤ ε] for the bounded learner
    let p_hits: Vec<bool> = run_trials(threads, calibration_trials, |t| {
        let s = seed.child("efid-cal-p", t);
        let instance = make(s);
        let mut rng = s.stream("learner-risk", 0);
        (instance.learner_risk_ok)(&mut rng)
    });
    let measured_p = p_hits.iter().filter(|h| **h).count() as f64 / calibration_trials as f64;

    // calibration phase: ĉ = P[err(x, y) > 2ε] with y from the bounded
    // learner on attack queries
    let c_hits: Vec<bool> = run_trials(threads, calibration_trials, |t| {
        let s = seed.child("efid-cal-c", t);
        let instance = make(s);
        let mut rng = s.stream("cal-attack", 0);
        let mut attacker_budget = protocol.attacker_budget.fresh();
        let Ok(x) = instance
            .attacker
            .craft(instance.task.view(), &mut attacker_budget, &mut rng)
        else {
            return false;
        };
        let mut learner_budget = protocol.defender_budget.fresh();
        let mut lrng = s.stream("cal-learner", 0);
        match instance
            .learner
            .answer(&x, instance.task.view(), &mut learner_budget, &mut lrng)
        {
            Err(_) => true, // the bounded learner lost within budget
            Ok(y) => {
                empirical_error(&instance.task, &x, &y).expect("lengths match")
                    > 2.0 * protocol.epsilon
            }
        }
    });
    let measured_c = c_hits.iter().filter(|h| **h).count() as f64 / calibration_trials as f64;

    let eta = eta_target(measured_p, measured_c, protocol.epsilon, q);
    Ok(EfidPair {
        params: EfidParams {
            sampling_budget_samples: protocol.attacker_budget.max_samples,
            distinguisher_budget_samples: protocol.defender_budget.max_samples,
            eta_target: eta,
            delta_target: protocol.s / 2.0,
        },
        make,
        q,
        protocol,
        measured_p,
        measured_c,
    })
}

/// The oracle-assisted distinguisher: answer `x` with the bounded learner,
/// output 1 ("attack") iff the harness-measured error exceeds 2ε. Budget
/// overruns mean the distinguisher cannot certify an attack and output 0.
pub fn efid_distinguish<X>(
    task: &LearningTask<X>,
    learner: &dyn QueryAnswerer<X>,
    eps: f64,
    queries: &[X],
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> u8 {
    match learner.answer(queries, task.view(), budget, rng) {
        Err(PlayerError::Budget(_)) => 0,
        Err(_) => 0,
        Ok(y) => {
            let err = empirical_error(task, queries, &y).expect("lengths match");
            (err > 2.0 * eps) as u8
        }
    }
}

/// Verification report for one EFID pair.
#[derive(Debug, Clone, Serialize)]
pub struct EfidReport {
    pub eta_target: f64,
    /// `2·max(0, advantage)` of the oracle-assisted distinguisher.
    pub tv_lower_estimate: f64,
    /// Standard error of the TV estimate (twice the win-rate SE).
    pub tv_standard_error: f64,
    pub oracle_distinguisher_advantage: AdvantageEstimate,
    pub bounded_advantages: std::collections::BTreeMap<String, AdvantageEstimate>,
    pub measured_p: f64,
    pub measured_c: f64,
    pub trials: u64,
    /// `tv_lower_estimate ≥ eta_target − 3·SE`
    pub statistical_distance_ok: bool,
    /// every bounded advantage within its interval of 0
    pub bounded_indistinguishable: bool,
    pub pass: bool,
}

/// Verify the pair: estimate the TV lower bound with the oracle-assisted
/// distinguisher and measure every bounded distinguisher's advantage.
pub fn verify_efid<X: Clone + Send>(
    pair: &EfidPair<X>,
    trials: u64,
    seed: Seed,
    threads: usize,
) -> Result<EfidReport, EfidError> {
    if trials == 0 {
        return Err(EfidError::NoTrials);
    }
    let q = pair.q;
    let protocol = &pair.protocol;

    struct RoundOutcome {
        oracle_win: bool,
        bounded_wins: Vec<bool>,
    }

    let outcomes: Vec<RoundOutcome> = run_trials(threads, trials, |t| {
        let s = seed.child("efid-verify", t);
        let instance = (pair.make)(s);
        let mut rng = s.stream("draw", 0);
        let b = rand::Rng::random::<bool>(&mut rng) as u8;
        let tuple: Option<Vec<X>> = if b == 1 {
            let mut budget = protocol.attacker_budget.fresh();
            instance
                .attacker
                .craft(instance.task.view(), &mut budget, &mut rng)
                .ok()
        } else {
            Some((0..q).map(|_| instance.task.sample(&mut rng).x).collect())
        };
        let Some(tuple) = tuple else {
            return RoundOutcome {
                oracle_win: false,
                bounded_wins: vec![false; instance.bounded_suite.len()],
            };
        };
        let mut orng = s.stream("oracle-distinguisher", 0);
        let mut obudget = protocol.defender_budget.fresh();
        let guess = efid_distinguish(
            &instance.task,
            instance.learner.as_ref(),
            protocol.epsilon,
            &tuple,
            &mut obudget,
            &mut orng,
        );
        let oracle_win = guess == b;
        let bounded_wins = instance
            .bounded_suite
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut drng = s.stream("bounded", i as u64);
                let mut budget = protocol.defender_budget.fresh();
                match d.guess(&tuple, instance.task.view(), &mut budget, &mut drng) {
                    Ok(g) => g == b,
                    Err(_) => false,
                }
            })
            .collect();
        RoundOutcome {
            oracle_win,
            bounded_wins,
        }
    });

    let oracle_wins = outcomes.iter().filter(|o| o.oracle_win).count() as u64;
    let oracle_adv = AdvantageEstimate::from_wins(oracle_wins, trials);
    let tv = (2.0 * oracle_adv.advantage).max(0.0);
    let win_rate = oracle_wins as f64 / trials as f64;
    let tv_se = 2.0 * (win_rate * (1.0 - win_rate) / trials as f64).sqrt();

    let probe = (pair.make)(seed.child("efid-probe", 0));
    let names: Vec<String> = probe
        .bounded_suite
        .iter()
        .map(|d| d.name().to_string())
        .collect();
    drop(probe);
    let mut bounded = std::collections::BTreeMap::new();
    let mut all_zero = true;
    for (i, name) in names.iter().enumerate() {
        let wins = outcomes.iter().filter(|o| o.bounded_wins[i]).count() as u64;
        let est = AdvantageEstimate::from_wins(wins, trials);
        all_zero &= est.consistent_with_zero() || est.advantage <= pair.params.delta_target;
        bounded.insert(name.clone(), est);
    }

    let distance_ok = tv >= pair.params.eta_target - 3.0 * tv_se;
    Ok(EfidReport {
        eta_target: pair.params.eta_target,
        tv_lower_estimate: tv,
        tv_standard_error: tv_se,
        oracle_distinguisher_advantage: oracle_adv,
        bounded_advantages: bounded,
        measured_p: pair.measured_p,
        measured_c: pair.measured_c,
        trials,
        statistical_distance_ok: distance_ok,
        bounded_indistinguishable: all_zero,
        pass: distance_ok && all_zero,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Label, LabeledSample, OracleVerdict, Sign, TaskDescriptor, TaskView};
    use std::sync::Arc;

    /// Tiny synthetic world for the EFID machinery: inputs are bits; the
    /// truth labels every input +1. The "attack" sends all-1 inputs on
    /// which a majority-vote learner errs, the honest tuple is i.i.d. 0/1.
    fn toy_task(flip_rate: f64) -> LearningTask<u8> {
        LearningTask::new(
            "toy-efid",
            TaskDescriptor::DOnes {
                d: 0,
                domain_size: 0,
                seed: 0,
            },
            Arc::new(move |rng: &mut ChaCha12Rng| {
                let x = (rand::Rng::random::<f64>(rng) < flip_rate) as u8;
                LabeledSample {
                    x,
                    y: Label::Clear(Sign::Plus),
                }
            }),
            Arc::new(|x: &u8, y: &Label| {
                // inputs with x = 1 are "hard": only −1 counts as correct
                let want = if *x == 1 { Sign::Minus } else { Sign::Plus };
                match y {
                    Label::Clear(s) if *s == want => OracleVerdict::Correct,
                    _ => OracleVerdict::Error,
                }
            }),
        )
    }

    struct ToyAttack;
    impl AttackCrafter<u8> for ToyAttack {
        fn name(&self) -> &str {
            "toy-attack"
        }
        fn craft(
            &self,
            _view: TaskView<'_, u8>,
            budget: &mut Budget,
            _rng: &mut ChaCha12Rng,
        ) -> Result<Vec<u8>, PlayerError> {
            budget.charge(0, 16)?;
            Ok(vec![1u8; 16])
        }
    }

    struct ToyLearner;
    impl QueryAnswerer<u8> for ToyLearner {
        fn name(&self) -> &str {
            "toy-learner"
        }
        fn answer(
            &self,
            queries: &[u8],
            _view: TaskView<'_, u8>,
            budget: &mut Budget,
            _rng: &mut ChaCha12Rng,
        ) -> Result<Vec<Label>, PlayerError> {
            budget.charge(0, queries.len() as u64)?;
            // always answers +1: perfect on honest x = 0 mass, wrong on the
            // attack's all-ones tuples
            Ok(vec![Label::Clear(Sign::Plus); queries.len()])
        }
    }

    fn toy_make(flip_rate: f64) -> Box<dyn Fn(Seed) -> EfidInstance<u8> + Sync> {
        Box::new(move |_s: Seed| EfidInstance {
            task: toy_task(flip_rate),
            attacker: Box::new(ToyAttack),
            learner: Box::new(ToyLearner),
            learner_risk_ok: Box::new(move |_rng| flip_rate < 0.05),
            bounded_suite: vec![],
        })
    }

    fn toy_params(q: usize) -> ProtocolParams {
        ProtocolParams {
            epsilon: 0.1,
            q,
            attacker_budget: Budget::new(1000, 10_000),
            defender_budget: Budget::new(1000, 10_000),
            l: 0.9,
            c: 0.9,
            s: 0.2,
        }
    }

    #[test]
    fn eta_target_closed_form() {
        // measured p ≈ 0.99, c ≈ 0.9, εq = 16 → ½(0.89 − e^{−16/3}) ≈ 0.443
        let eta = eta_target(0.99, 0.9, 0.05, 320);
        assert!((eta - 0.5 * (0.89 - (-16.0f64 / 3.0).exp())).abs() < 1e-12);
        assert!((eta - 0.4426).abs() < 1e-3, "eta = {eta}");
    }

    #[test]
    fn identical_distributions_give_zero_tv() {
        // flip rate 0: honest tuples are all-zero... make the attack match
        // the honest distribution by using flip_rate 1 so both are all-one
        struct HonestAttack;
        impl AttackCrafter<u8> for HonestAttack {
            fn name(&self) -> &str {
                "honest"
            }
            fn craft(
                &self,
                view: TaskView<'_, u8>,
                budget: &mut Budget,
                rng: &mut ChaCha12Rng,
            ) -> Result<Vec<u8>, PlayerError> {
                Ok(view
                    .draw_many(16, budget, rng)?
                    .into_iter()
                    .map(|s| s.x)
                    .collect())
            }
        }
        let make: Box<dyn Fn(Seed) -> EfidInstance<u8> + Sync> = Box::new(|_s| EfidInstance {
            task: toy_task(0.2),
            attacker: Box::new(HonestAttack),
            learner: Box::new(ToyLearner),
            learner_risk_ok: Box::new(|_| true),
            bounded_suite: vec![],
        });
        let pair = build_efid(make, toy_params(16), 200, Seed(100), 1).unwrap();
        // degenerate: the attack IS the distribution, eta target ≤ 0
        assert!(pair.params.eta_target <= 0.05, "{:?}", pair.params);
        let report = verify_efid(&pair, 2000, Seed(101), 1).unwrap();
        // hmm: the learner errs on the x=1 share (20%) of honest tuples
        // too, so both sides look alike and tv stays small
        assert!(report.tv_lower_estimate < 0.1, "{report:?}");
    }

    #[test]
    fn toy_attack_pair_is_statistically_far() {
        let pair = build_efid(toy_make(0.01), toy_params(16), 500, Seed(102), 1).unwrap();
        // learner succeeds on honest data (risk ok), fails on the attack
        assert!(pair.measured_p > 0.9);
        assert!(pair.measured_c > 0.9);
        // εq = 1.6 in the toy: eta = ½(p + c − 1 − e^{−0.533}) ≈ 0.2
        assert!(pair.params.eta_target > 0.15);
        let report = verify_efid(&pair, 4000, Seed(103), 1).unwrap();
        assert!(report.tv_lower_estimate >= report.eta_target - 3.0 * report.tv_standard_error);
        assert!(report.statistical_distance_ok);
        assert!(report.pass);
    }

    #[test]
    fn tv_estimate_monotone_under_interpolation() {
        // mixing the attack toward the honest distribution shrinks the
        // certified distance
        struct MixedAttack {
            honest_prob: f64,
        }
        impl AttackCrafter<u8> for MixedAttack {
            fn name(&self) -> &str {
                "mixed"
            }
            fn craft(
                &self,
                view: TaskView<'_, u8>,
                budget: &mut Budget,
                rng: &mut ChaCha12Rng,
            ) -> Result<Vec<u8>, PlayerError> {
                if rand::Rng::random::<f64>(rng) < self.honest_prob {
                    Ok(view
                        .draw_many(16, budget, rng)?
                        .into_iter()
                        .map(|s| s.x)
                        .collect())
                } else {
                    budget.charge(0, 16)?;
                    Ok(vec![1u8; 16])
                }
            }
        }
        let mut prev = f64::INFINITY;
        for (i, mix) in [0.0f64, 0.5, 1.0].iter().enumerate() {
            let mix = *mix;
            let make: Box<dyn Fn(Seed) -> EfidInstance<u8> + Sync> =
                Box::new(move |_s| EfidInstance {
                    task: toy_task(0.01),
                    attacker: Box::new(MixedAttack { honest_prob: mix }),
                    learner: Box::new(ToyLearner),
                    learner_risk_ok: Box::new(|_| true),
                    bounded_suite: vec![],
                });
            let pair = build_efid(make, toy_params(16), 100, Seed(104), 1).unwrap();
            let report = verify_efid(&pair, 4000, Seed(105 + i as u64), 1).unwrap();
            assert!(
                report.tv_lower_estimate <= prev + 0.05,
                "mix {mix}: tv {} prev {prev}",
                report.tv_lower_estimate
            );
            prev = report.tv_lower_estimate;
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(build_efid(toy_make(0.0), toy_params(4), 0, Seed(1), 1).is_err());
        let pair = build_efid(toy_make(0.0), toy_params(4), 10, Seed(1), 1).unwrap();
        assert!(verify_efid(&pair, 0, Seed(2), 1).is_err());
    }
}
