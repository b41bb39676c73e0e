//! The exactly-d-ones class: ground truths with exactly `d` positive indices
//! in `[N]` for `N = 100·d²`, under the uniform distribution.
//!
//! At watermark scale (`d = 1e5`, `N = 1e12`) a training run needs on the
//! order of 1e9 draws for the builder to see enough positives. Drawing those
//! one by one would dominate every experiment, so the task also offers a
//! batched summary of an n-sample draw that is equivalent in distribution:
//! the number of positive draws is `Binomial(n, d/N)`, the positives seen
//! are that many uniform picks from the planted set, and membership of any
//! particular negative in the seen-negative set is a Bernoulli with the
//! exact occupancy rate, decided by a keyed hash so repeated queries agree.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::domain::{
    Budget, BudgetError, Label, LabeledSample, LearningTask, OracleVerdict, Sign, TaskDescriptor,
};
use crate::rng::Seed;

/// Ground truth with exactly `d` positives in `[N]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DOnesHypothesis {
    positives: BTreeSet<u64>,
    pub domain_size: u64,
}

impl DOnesHypothesis {
    pub fn sample_uniform(d: u64, domain_size: u64, rng: &mut ChaCha12Rng) -> Self {
        assert!(d >= 1 && d <= domain_size);
        let mut positives = BTreeSet::new();
        while (positives.len() as u64) < d {
            positives.insert(rng.random_range(0..domain_size));
        }
        DOnesHypothesis {
            positives,
            domain_size,
        }
    }

    pub fn d(&self) -> u64 {
        self.positives.len() as u64
    }

    pub fn label(&self, x: u64) -> Sign {
        Sign::from_bool(self.positives.contains(&x))
    }

    pub fn positives(&self) -> &BTreeSet<u64> {
        &self.positives
    }
}

/// The d-ones learning task together with the black-box machinery the
/// players need: per-draw sampling (through the generic view) and the
/// batched summary used at watermark scale.
#[derive(Clone)]
pub struct DOnesTask {
    task: LearningTask<u64>,
    hypothesis: Arc<DOnesHypothesis>,
    positives_list: Arc<Vec<u64>>,
}

impl DOnesTask {
    pub fn task(&self) -> &LearningTask<u64> {
        &self.task
    }

    pub fn hypothesis(&self) -> &DOnesHypothesis {
        &self.hypothesis
    }

    pub fn d(&self) -> u64 {
        self.hypothesis.d()
    }

    pub fn domain_size(&self) -> u64 {
        self.hypothesis.domain_size
    }

    /// Summary of `n` i.i.d. draws, charged to `budget` as `n` samples.
    ///
    /// Equivalent in distribution to drawing the samples one by one and
    /// retaining the distinct positives and a membership test for the
    /// distinct negatives.
    pub fn draw_training_summary(
        &self,
        n: u64,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<TrainingSummary, BudgetError> {
        budget.charge(n, 0)?;
        let d = self.d();
        let nn = self.domain_size();
        let p = d as f64 / nn as f64;
        let positive_draws = Binomial::new(n, p).expect("valid binomial").sample(rng);
        let mut positives_seen = BTreeSet::new();
        for _ in 0..positive_draws {
            let idx = rng.random_range(0..d as usize);
            positives_seen.insert(self.positives_list[idx]);
        }
        let negative_draws = n - positive_draws;
        // Occupancy rate of one fixed negative among `negative_draws`
        // uniform picks from the N − d negatives.
        let miss = 1.0 - 1.0 / (nn - d) as f64;
        let seen_rate = 1.0 - miss.powf(negative_draws as f64);
        Ok(TrainingSummary {
            samples_drawn: n,
            positives_seen,
            negative_seen_rate: seen_rate,
            membership_seed: Seed(rng.random::<u64>()),
        })
    }
}

/// Result of a batched n-sample draw from a [`DOnesTask`].
#[derive(Debug, Clone)]
pub struct TrainingSummary {
    pub samples_drawn: u64,
    /// Distinct planted positives that appeared among the draws.
    pub positives_seen: BTreeSet<u64>,
    /// Probability that any fixed negative index appeared among the draws.
    pub negative_seen_rate: f64,
    membership_seed: Seed,
}

impl TrainingSummary {
    /// Whether negative index `x` was among the drawn samples. Keyed-hash
    /// Bernoulli at the exact occupancy rate; consistent across calls.
    pub fn negative_was_seen(&self, x: u64) -> bool {
        let mut h = self.membership_seed.0 ^ x.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
        h ^= h >> 33;
        (h as f64 / u64::MAX as f64) < self.negative_seen_rate
    }
}

/// Build a d-ones task with `h` drawn uniformly from the class, `N = 100·d²`.
pub fn dones_task(d: u64, seed: Seed) -> (DOnesTask, DOnesHypothesis) {
    let domain_size = 100 * d * d;
    let mut rng = seed.stream("dones-hypothesis", d);
    let hypothesis = DOnesHypothesis::sample_uniform(d, domain_size, &mut rng);
    let h = Arc::new(hypothesis.clone());
    let positives_list = Arc::new(h.positives().iter().copied().collect::<Vec<u64>>());

    let sampler = {
        let h = Arc::clone(&h);
        Arc::new(move |rng: &mut ChaCha12Rng| {
            let x = rng.random_range(0..h.domain_size);
            LabeledSample {
                x,
                y: Label::Clear(h.label(x)),
            }
        })
    };
    let oracle = {
        let h = Arc::clone(&h);
        Arc::new(move |x: &u64, y: &Label| match y {
            Label::Clear(s) if *s == h.label(*x) => OracleVerdict::Correct,
            _ => OracleVerdict::Error,
        })
    };
    let task = LearningTask::new(
        "exactly-d-ones",
        TaskDescriptor::DOnes {
            d,
            domain_size,
            seed: seed.0,
        },
        sampler,
        oracle,
    );
    (
        DOnesTask {
            task,
            hypothesis: Arc::clone(&h),
            positives_list,
        },
        hypothesis,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_equals_one_has_exactly_one_positive() {
        let (task, h) = dones_task(1, Seed(31));
        assert_eq!(h.d(), 1);
        assert_eq!(task.domain_size(), 100);
        let positives: Vec<u64> = (0..100).filter(|&x| h.label(x).is_plus()).collect();
        assert_eq!(positives.len(), 1);
    }

    #[test]
    fn same_seed_same_hypothesis() {
        let (_, h1) = dones_task(20, Seed(32));
        let (_, h2) = dones_task(20, Seed(32));
        assert_eq!(h1, h2);
        let (_, h3) = dones_task(20, Seed(33));
        assert_ne!(h1, h3);
    }

    #[test]
    fn positive_rate_matches_d_over_domain() {
        // P[positive] = d/N = 1/(100·d); estimated over 1e5 draws at d = 4.
        let (task, _) = dones_task(4, Seed(34));
        let mut rng = Seed(34).stream("dones-draws", 0);
        let n = 100_000u64;
        let hits = (0..n)
            .filter(|_| {
                let s = task.task().sample(&mut rng);
                s.y.clear().unwrap().is_plus()
            })
            .count() as f64;
        let rate = hits / n as f64;
        let expect = 1.0 / 400.0;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((rate - expect).abs() < 4.0 * se, "rate = {rate}");
    }

    #[test]
    fn training_summary_matches_direct_sampling_statistics() {
        // Moderate scale so both paths are cheap: d = 50, N = 250_000.
        let (task, h) = dones_task(50, Seed(35));
        let n = 20_000u64;

        let mut budget = Budget::new(n, 0);
        let mut rng = Seed(36).stream("summary", 0);
        let summary = task
            .draw_training_summary(n, &mut budget, &mut rng)
            .unwrap();
        assert_eq!(budget.used_samples, n);

        // direct control run
        let mut rng2 = Seed(36).stream("direct", 0);
        let mut direct_pos = BTreeSet::new();
        let mut direct_neg = BTreeSet::new();
        for _ in 0..n {
            let s = task.task().sample(&mut rng2);
            if s.y.clear().unwrap().is_plus() {
                direct_pos.insert(s.x);
            } else {
                direct_neg.insert(s.x);
            }
        }

        // positives-seen counts agree within Poisson noise
        let a = summary.positives_seen.len() as f64;
        let b = direct_pos.len() as f64;
        assert!((a - b).abs() <= 4.0 * b.sqrt().max(2.0), "{a} vs {b}");
        // every reported positive really is planted
        for x in &summary.positives_seen {
            assert!(h.label(*x).is_plus());
        }

        // membership rate for negatives matches the direct distinct count
        let expect_frac = direct_neg.len() as f64 / (task.domain_size() - 50) as f64;
        assert!((summary.negative_seen_rate - expect_frac).abs() < 0.2 * expect_frac + 1e-6);

        // membership queries are consistent
        for x in 0..1000u64 {
            assert_eq!(summary.negative_was_seen(x), summary.negative_was_seen(x));
        }
    }

    #[test]
    fn summary_fails_atomically_on_budget() {
        let (task, _) = dones_task(10, Seed(37));
        let mut budget = Budget::new(5, 0);
        let mut rng = Seed(37).stream("summary", 1);
        assert!(task.draw_training_summary(6, &mut budget, &mut rng).is_err());
        assert_eq!(budget.used_samples, 0);
    }
}
