//! Shared domain types for all games: tasks, classifiers, budgets,
//! transcripts, and the error functionals.
//!
//! Two conventions are fixed here and relied on everywhere else:
//!
//! - the error oracle is a trusted third party — it is owned by the
//!   [`LearningTask`] and never handed to player code, which only ever sees a
//!   [`TaskView`];
//! - the detection bit `b = 1` means "attacked".

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fhe::Ciphertext;
use crate::stats;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("queries and answers have different lengths ({queries} vs {answers})")]
    LengthMismatch { queries: usize, answers: usize },
    #[error("empty input where at least one element is required")]
    EmptyInput,
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Budget(#[from] BudgetError),
}

/// Charging past a budget limit fails loudly; the failed player loses the
/// round by resource overrun.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("budget exceeded: requested {requested} more {kind} with {used}/{limit} used")]
pub struct BudgetError {
    pub kind: ResourceKind,
    pub requested: u64,
    pub used: u64,
    pub limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceKind {
    Samples,
    Ops,
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceKind::Samples => f.write_str("samples"),
            ResourceKind::Ops => f.write_str("ops"),
        }
    }
}

// ---------------------------------------------------------------------------
// Labels and samples
// ---------------------------------------------------------------------------

/// Clear binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    pub fn from_bool(plus: bool) -> Sign {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn is_plus(self) -> bool {
        matches!(self, Sign::Plus)
    }
}

/// Label of a sample or answer: a clear ±1, or a ciphertext handle for the
/// encrypted half of the crypto task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Clear(Sign),
    Cipher(Ciphertext),
}

impl Label {
    pub const MINUS: Label = Label::Clear(Sign::Minus);
    pub const PLUS: Label = Label::Clear(Sign::Plus);

    pub fn clear(self) -> Option<Sign> {
        match self {
            Label::Clear(s) => Some(s),
            Label::Cipher(_) => None,
        }
    }
}

/// One labeled example `(x, h(x))` as drawn from a task's sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample<X> {
    pub x: X,
    pub y: Label,
}

/// Output of a selective classifier: a label or the reject token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Label(Label),
    Reject,
}

impl Decision {
    pub fn is_reject(self) -> bool {
        matches!(self, Decision::Reject)
    }
}

// ---------------------------------------------------------------------------
// Learning tasks
// ---------------------------------------------------------------------------

/// Answer of the trusted error oracle on one `(x, y)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    Correct,
    Error,
    /// Ground truth undefined at `x`; the pair contributes no error.
    Undefined,
}

type Sampler<X> = Arc<dyn Fn(&mut ChaCha12Rng) -> LabeledSample<X> + Send + Sync>;
type Oracle<X> = Arc<dyn Fn(&X, &Label) -> OracleVerdict + Send + Sync>;

/// Replayable description of a task instance (hypothesis as hex fixed-point
/// or index count, plus the seed it was drawn from).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TaskDescriptor {
    Circle {
        w_hex: String,
    },
    DOnes {
        d: u64,
        domain_size: u64,
        seed: u64,
    },
    Crypto {
        w_hex: String,
        lambda: u32,
        key_seed: u64,
    },
}

/// A learning task: a sampler of i.i.d. labeled examples plus the trusted
/// error oracle. Every game is played against one of these.
#[derive(Clone)]
pub struct LearningTask<X> {
    name: String,
    descriptor: TaskDescriptor,
    sampler: Sampler<X>,
    oracle: Oracle<X>,
}

impl<X> LearningTask<X> {
    pub fn new(
        name: impl Into<String>,
        descriptor: TaskDescriptor,
        sampler: Sampler<X>,
        oracle: Oracle<X>,
    ) -> Self {
        LearningTask {
            name: name.into(),
            descriptor,
            sampler,
            oracle,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn descriptor(&self) -> &TaskDescriptor {
        &self.descriptor
    }

    /// Draw one labeled sample. Harness-side; players must go through
    /// [`TaskView::draw`] so the cost is charged to their budget.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> LabeledSample<X> {
        (self.sampler)(rng)
    }

    /// Trusted single-pair error oracle `err(x, y)`.
    pub fn oracle(&self, x: &X, y: &Label) -> OracleVerdict {
        (self.oracle)(x, y)
    }

    /// Budget-charging view handed to players. It exposes sampling only;
    /// the error oracle stays with the harness.
    pub fn view(&self) -> TaskView<'_, X> {
        TaskView { task: self }
    }
}

impl<X> fmt::Debug for LearningTask<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LearningTask")
            .field("name", &self.name)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

/// Player-facing view of a task: sampling under a budget, nothing else.
pub struct TaskView<'t, X> {
    task: &'t LearningTask<X>,
}

impl<X> Clone for TaskView<'_, X> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<X> Copy for TaskView<'_, X> {}

impl<'t, X> TaskView<'t, X> {
    /// Draw one i.i.d. sample, charging one sample to `budget`.
    pub fn draw(
        &self,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<LabeledSample<X>, BudgetError> {
        budget.charge(1, 0)?;
        Ok(self.task.sample(rng))
    }

    /// Draw `n` i.i.d. samples, charging `n` samples to `budget`. The charge
    /// is atomic: on failure nothing is drawn.
    pub fn draw_many(
        &self,
        n: u64,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<LabeledSample<X>>, BudgetError> {
        budget.charge(n, 0)?;
        Ok((0..n).map(|_| self.task.sample(rng)).collect())
    }
}

// ---------------------------------------------------------------------------
// Budgets
// ---------------------------------------------------------------------------

/// Explicit resource limits standing in for the definitions' running-time
/// bounds: labeled samples drawn, and primitive operations executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_samples: u64,
    pub max_ops: u64,
    #[serde(default)]
    pub used_samples: u64,
    #[serde(default)]
    pub used_ops: u64,
}

impl Budget {
    pub fn new(max_samples: u64, max_ops: u64) -> Self {
        Budget {
            max_samples,
            max_ops,
            used_samples: 0,
            used_ops: 0,
        }
    }

    /// Effectively unlimited budget, for harness-side bookkeeping.
    pub fn unlimited() -> Self {
        Budget::new(u64::MAX, u64::MAX)
    }

    /// Fresh copy with the same limits and zero usage.
    pub fn fresh(&self) -> Self {
        Budget::new(self.max_samples, self.max_ops)
    }

    /// Charge usage. Fails atomically: if either limit would be exceeded the
    /// state is left bit-identical.
    pub fn charge(&mut self, samples: u64, ops: u64) -> Result<(), BudgetError> {
        let new_samples = self.used_samples.checked_add(samples).ok_or(BudgetError {
            kind: ResourceKind::Samples,
            requested: samples,
            used: self.used_samples,
            limit: self.max_samples,
        })?;
        if new_samples > self.max_samples {
            return Err(BudgetError {
                kind: ResourceKind::Samples,
                requested: samples,
                used: self.used_samples,
                limit: self.max_samples,
            });
        }
        let new_ops = self.used_ops.checked_add(ops).ok_or(BudgetError {
            kind: ResourceKind::Ops,
            requested: ops,
            used: self.used_ops,
            limit: self.max_ops,
        })?;
        if new_ops > self.max_ops {
            return Err(BudgetError {
                kind: ResourceKind::Ops,
                requested: ops,
                used: self.used_ops,
                limit: self.max_ops,
            });
        }
        self.used_samples = new_samples;
        self.used_ops = new_ops;
        Ok(())
    }

    pub fn remaining_samples(&self) -> u64 {
        self.max_samples - self.used_samples
    }

    pub fn remaining_ops(&self) -> u64 {
        self.max_ops - self.used_ops
    }
}

/// Free-function form of [`Budget::charge`], returning the updated budget.
pub fn charge(mut budget: Budget, samples: u64, ops: u64) -> Result<Budget, BudgetError> {
    budget.charge(samples, ops)?;
    Ok(budget)
}

// ---------------------------------------------------------------------------
// Protocol parameters and transcripts
// ---------------------------------------------------------------------------

/// Parameters shared by the three protocols: error level, query count,
/// per-side budgets, and the probability thresholds for the properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Error level ε ∈ (0, ½).
    pub epsilon: f64,
    /// Number of queries per round.
    pub q: usize,
    pub attacker_budget: Budget,
    pub defender_budget: Budget,
    /// Learning probability threshold (correctness).
    pub l: f64,
    /// Completeness / uniqueness / transferability probability threshold.
    pub c: f64,
    /// Soundness / unremovability probability threshold; `s < c`.
    pub s: f64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(DomainError::InvalidParams(format!(
                "epsilon must lie in (0, 1/2), got {}",
                self.epsilon
            )));
        }
        if self.q == 0 {
            return Err(DomainError::InvalidParams("q must be at least 1".into()));
        }
        if self.s >= self.c {
            return Err(DomainError::InvalidParams(format!(
                "s must be smaller than c, got s = {} >= c = {}",
                self.s, self.c
            )));
        }
        for (name, v) in [("l", self.l), ("c", self.c), ("s", self.s)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DomainError::InvalidParams(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Record of one game round.
#[derive(Debug, Clone, Serialize)]
pub struct Transcript<X> {
    pub queries: Vec<X>,
    pub answers: Vec<Label>,
    pub detection_bit: Option<u8>,
    /// Measured `err(x, y)` over the round.
    pub errors: f64,
    /// RNG seed of the trial stream that produced the round.
    pub seed: u64,
}

impl<X> Transcript<X> {
    pub fn new(
        queries: Vec<X>,
        answers: Vec<Label>,
        detection_bit: Option<u8>,
        errors: f64,
        seed: u64,
    ) -> Result<Self, DomainError> {
        if queries.len() != answers.len() {
            return Err(DomainError::LengthMismatch {
                queries: queries.len(),
                answers: answers.len(),
            });
        }
        if !(0.0..=1.0).contains(&errors) {
            return Err(DomainError::InvalidParams(format!(
                "errors must lie in [0,1], got {errors}"
            )));
        }
        Ok(Transcript {
            queries,
            answers,
            detection_bit,
            errors,
            seed,
        })
    }
}

// ---------------------------------------------------------------------------
// Error functionals
// ---------------------------------------------------------------------------

/// Empirical error `err(x, y)`: the fraction of positions where the ground
/// truth is defined and the answer is wrong. Undefined positions contribute
/// zero.
pub fn empirical_error<X>(
    task: &LearningTask<X>,
    queries: &[X],
    answers: &[Label],
) -> Result<f64, DomainError> {
    if queries.len() != answers.len() {
        return Err(DomainError::LengthMismatch {
            queries: queries.len(),
            answers: answers.len(),
        });
    }
    if queries.is_empty() {
        return Err(DomainError::EmptyInput);
    }
    let wrong = queries
        .iter()
        .zip(answers)
        .filter(|(x, y)| matches!(task.oracle(x, y), OracleVerdict::Error))
        .count();
    Ok(wrong as f64 / queries.len() as f64)
}

/// Same functional over selective answers: rejected positions are not
/// errors (and not counted as correct either — only the indicator of a
/// defined, answered, wrong position fires).
pub fn empirical_error_selective<X>(
    task: &LearningTask<X>,
    queries: &[X],
    answers: &[Decision],
) -> Result<f64, DomainError> {
    if queries.len() != answers.len() {
        return Err(DomainError::LengthMismatch {
            queries: queries.len(),
            answers: answers.len(),
        });
    }
    if queries.is_empty() {
        return Err(DomainError::EmptyInput);
    }
    let wrong = queries
        .iter()
        .zip(answers)
        .filter(|(x, d)| match d {
            Decision::Reject => false,
            Decision::Label(y) => matches!(task.oracle(x, y), OracleVerdict::Error),
        })
        .count();
    Ok(wrong as f64 / queries.len() as f64)
}

/// Fraction of reject tokens in a selective answer sequence.
pub fn rejection_rate(answers: &[Decision]) -> Result<f64, DomainError> {
    if answers.is_empty() {
        return Err(DomainError::EmptyInput);
    }
    let rejects = answers.iter().filter(|d| d.is_reject()).count();
    Ok(rejects as f64 / answers.len() as f64)
}

/// Monte-Carlo risk estimate with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub estimate: f64,
    pub interval: (f64, f64),
    pub trials: u64,
}

/// Estimate `err(f)` by drawing `trials` fresh inputs from the task and
/// asking the oracle about `f`'s answers. Charges `trials` samples to
/// `budget`.
pub fn estimate_risk<X>(
    predict: impl Fn(&X) -> Label,
    task: &LearningTask<X>,
    trials: u64,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<RiskEstimate, DomainError> {
    if trials == 0 {
        return Err(DomainError::EmptyInput);
    }
    budget.charge(trials, 0)?;
    let mut wrong = 0u64;
    for _ in 0..trials {
        let sample = task.sample(rng);
        if matches!(task.oracle(&sample.x, &predict(&sample.x)), OracleVerdict::Error) {
            wrong += 1;
        }
    }
    Ok(RiskEstimate {
        estimate: wrong as f64 / trials as f64,
        interval: stats::wilson_interval(wrong, trials),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use proptest::prelude::*;
    use std::sync::Arc;

    /// Toy task over u8 inputs: ground truth +1 iff x is even, undefined on
    /// x = 255.
    fn toy_task() -> LearningTask<u8> {
        LearningTask::new(
            "toy",
            TaskDescriptor::DOnes {
                d: 0,
                domain_size: 0,
                seed: 0,
            },
            Arc::new(|rng: &mut ChaCha12Rng| {
                let x = rand::Rng::random_range(rng, 0u8..=254);
                LabeledSample {
                    x,
                    y: Label::Clear(Sign::from_bool(x % 2 == 0)),
                }
            }),
            Arc::new(|x: &u8, y: &Label| {
                if *x == 255 {
                    return OracleVerdict::Undefined;
                }
                match y {
                    Label::Clear(s) if s.is_plus() == (*x).is_multiple_of(2) => OracleVerdict::Correct,
                    _ => OracleVerdict::Error,
                }
            }),
        )
    }

    fn truth(x: u8) -> Label {
        Label::Clear(Sign::from_bool(x.is_multiple_of(2)))
    }

    #[test]
    fn empirical_error_zero_on_ground_truth() {
        let task = toy_task();
        let queries: Vec<u8> = (0..10).collect();
        let answers: Vec<Label> = queries.iter().map(|&x| truth(x)).collect();
        assert_eq!(empirical_error(&task, &queries, &answers).unwrap(), 0.0);
    }

    #[test]
    fn empirical_error_one_on_all_flipped() {
        let task = toy_task();
        let queries: Vec<u8> = (0..10).collect();
        let answers: Vec<Label> = queries
            .iter()
            .map(|&x| Label::Clear(Sign::from_bool(x % 2 == 0).flip()))
            .collect();
        assert_eq!(empirical_error(&task, &queries, &answers).unwrap(), 1.0);
    }

    #[test]
    fn empirical_error_counts_undefined_as_zero() {
        // q = 4: two wrong, one undefined-position answer among the correct.
        // Hand enumeration of the four indicators: 1 + 1 + 0 + 0 = 2 → 0.5.
        let task = toy_task();
        let queries: Vec<u8> = vec![0, 1, 255, 2];
        let answers = vec![
            Label::MINUS, // 0 is even → wrong
            Label::PLUS,  // 1 is odd → wrong
            Label::PLUS,  // oracle undefined at 255 → contributes 0
            truth(2),     // correct
        ];
        assert_eq!(empirical_error(&task, &queries, &answers).unwrap(), 0.5);
    }

    #[test]
    fn empirical_error_rejects_mismatched_lengths_and_empty() {
        let task = toy_task();
        assert_eq!(
            empirical_error(&task, &[1u8, 2], &[Label::PLUS]).unwrap_err(),
            DomainError::LengthMismatch {
                queries: 2,
                answers: 1
            }
        );
        assert_eq!(
            empirical_error(&task, &[], &[]).unwrap_err(),
            DomainError::EmptyInput
        );
    }

    #[test]
    fn selective_error_skips_rejects() {
        let task = toy_task();
        let queries: Vec<u8> = vec![0, 1, 2, 3];
        let answers = vec![
            Decision::Label(Label::MINUS), // wrong
            Decision::Reject,              // not an error
            Decision::Label(truth(2)),     // correct
            Decision::Reject,
        ];
        assert_eq!(
            empirical_error_selective(&task, &queries, &answers).unwrap(),
            0.25
        );
        assert!(empirical_error_selective(&task, &[], &[]).is_err());
    }

    #[test]
    fn rejection_rate_examples() {
        let no = vec![Decision::Label(Label::PLUS); 5];
        assert_eq!(rejection_rate(&no).unwrap(), 0.0);
        let all = vec![Decision::Reject; 5];
        assert_eq!(rejection_rate(&all).unwrap(), 1.0);
        let mut mixed = vec![Decision::Label(Label::MINUS); 12];
        mixed[1] = Decision::Reject;
        mixed[5] = Decision::Reject;
        mixed[9] = Decision::Reject;
        assert_eq!(rejection_rate(&mixed).unwrap(), 0.25);
        assert_eq!(rejection_rate(&[]).unwrap_err(), DomainError::EmptyInput);
    }

    #[test]
    fn estimate_risk_ground_truth_is_zero() {
        let task = toy_task();
        let mut budget = Budget::new(1000, 0);
        let mut rng = Seed(1).stream("risk", 0);
        let est = estimate_risk(|x| truth(*x), &task, 500, &mut budget, &mut rng).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(est.interval.0 <= 0.0 + 1e-12);
        assert_eq!(budget.used_samples, 500);
    }

    #[test]
    fn estimate_risk_constant_classifier_matches_class_ratio() {
        // Constant −1 errs exactly on the even inputs: 128 of 255 points.
        let task = toy_task();
        let truth_ratio = 128.0 / 255.0;
        let mut budget = Budget::new(100_000, 0);
        let mut rng = Seed(2).stream("risk", 0);
        let est = estimate_risk(|_| Label::MINUS, &task, 20_000, &mut budget, &mut rng).unwrap();
        assert!((est.estimate - truth_ratio).abs() < 0.015, "{est:?}");
        assert!(est.interval.0 <= truth_ratio && truth_ratio <= est.interval.1);
    }

    #[test]
    fn estimate_risk_zero_trials_is_an_error() {
        let task = toy_task();
        let mut budget = Budget::new(10, 0);
        let mut rng = Seed(3).stream("risk", 0);
        assert!(estimate_risk(|x| truth(*x), &task, 0, &mut budget, &mut rng).is_err());
    }

    #[test]
    fn estimate_risk_fails_on_exhausted_budget() {
        let task = toy_task();
        let mut budget = Budget::new(10, 0);
        let mut rng = Seed(3).stream("risk", 0);
        let err = estimate_risk(|x| truth(*x), &task, 11, &mut budget, &mut rng).unwrap_err();
        assert!(matches!(err, DomainError::Budget(_)));
        assert_eq!(budget.used_samples, 0);
    }

    #[test]
    fn budget_charge_examples() {
        let b = Budget {
            max_samples: 10,
            max_ops: 10,
            used_samples: 3,
            used_ops: 0,
        };
        let b = charge(b, 2, 0).unwrap();
        assert_eq!(b.used_samples, 5);

        let b9 = Budget {
            max_samples: 10,
            max_ops: 10,
            used_samples: 9,
            used_ops: 0,
        };
        let err = charge(b9, 2, 0).unwrap_err();
        assert_eq!(err.kind, ResourceKind::Samples);
        // failed charge leaves state bit-identical
        assert_eq!(b9.used_samples, 9);
        assert_eq!(b9.used_ops, 0);

        let same = charge(b9, 0, 0).unwrap();
        assert_eq!(same, b9);
    }

    #[test]
    fn budget_atomic_on_ops_failure() {
        let mut b = Budget::new(100, 5);
        let err = b.charge(10, 6).unwrap_err();
        assert_eq!(err.kind, ResourceKind::Ops);
        assert_eq!(b.used_samples, 0);
        assert_eq!(b.used_ops, 0);
    }

    #[test]
    fn params_validation() {
        let mut p = ProtocolParams {
            epsilon: 0.1,
            q: 10,
            attacker_budget: Budget::new(100, 100),
            defender_budget: Budget::new(100, 100),
            l: 0.9,
            c: 0.9,
            s: 0.1,
        };
        assert!(p.validate().is_ok());
        p.s = 0.95;
        assert!(p.validate().is_err());
        p.s = 0.1;
        p.epsilon = 0.5;
        assert!(p.validate().is_err());
        p.epsilon = 0.1;
        p.q = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn transcript_shape_checks() {
        let t = Transcript::new(vec![1u8, 2], vec![Label::PLUS, Label::MINUS], Some(1), 0.5, 7);
        assert!(t.is_ok());
        assert!(Transcript::new(vec![1u8], vec![], None, 0.0, 7).is_err());
        assert!(Transcript::new(vec![1u8], vec![Label::PLUS], None, 1.5, 7).is_err());
    }

    proptest! {
        /// Permutation invariance and range of the empirical error.
        #[test]
        fn empirical_error_permutation_invariant(
            pairs in proptest::collection::vec((0u8..=254, proptest::bool::ANY), 1..40),
            seed in 0u64..1000,
        ) {
            let task = toy_task();
            let queries: Vec<u8> = pairs.iter().map(|(x, _)| *x).collect();
            let answers: Vec<Label> = pairs
                .iter()
                .map(|(_, plus)| Label::Clear(Sign::from_bool(*plus)))
                .collect();
            let e = empirical_error(&task, &queries, &answers).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));

            // shuffle pairs with a cheap LCG driven by `seed`
            let mut idx: Vec<usize> = (0..queries.len()).collect();
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            for i in (1..idx.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                idx.swap(i, j);
            }
            let qs: Vec<u8> = idx.iter().map(|&i| queries[i]).collect();
            let ans: Vec<Label> = idx.iter().map(|&i| answers[i]).collect();
            let e2 = empirical_error(&task, &qs, &ans).unwrap();
            prop_assert!((e - e2).abs() < 1e-15);
        }

        /// Changing k defined positions moves the error by at most k/q.
        #[test]
        fn empirical_error_lipschitz_in_answers(
            xs in proptest::collection::vec(0u8..=254, 2..40),
            flips in proptest::collection::vec(proptest::bool::ANY, 2..40),
        ) {
            let task = toy_task();
            let q = xs.len().min(flips.len());
            let xs = &xs[..q];
            let a: Vec<Label> = xs.iter().map(|&x| truth(x)).collect();
            let mut b = a.clone();
            let mut k = 0usize;
            for i in 0..q {
                if flips[i] {
                    b[i] = Label::Clear(a[i].clear().unwrap().flip());
                    k += 1;
                }
            }
            let ea = empirical_error(&task, xs, &a).unwrap();
            let eb = empirical_error(&task, xs, &b).unwrap();
            prop_assert!((ea - eb).abs() <= k as f64 / q as f64 + 1e-15);
        }

        /// Budget counters are monotone and a failed charge never moves them.
        #[test]
        fn budget_monotone_and_atomic(
            charges in proptest::collection::vec((0u64..50, 0u64..50), 1..30)
        ) {
            let mut b = Budget::new(300, 300);
            let mut prev = b;
            for (s, o) in charges {
                match b.charge(s, o) {
                    Ok(()) => {
                        prop_assert!(b.used_samples >= prev.used_samples);
                        prop_assert!(b.used_ops >= prev.used_ops);
                        prop_assert!(b.used_samples <= b.max_samples);
                        prop_assert!(b.used_ops <= b.max_ops);
                    }
                    Err(_) => prop_assert_eq!(b, prev),
                }
                prev = b;
            }
        }
    }

    #[test]
    fn estimate_risk_interval_covers_the_true_risk() {
        // nominal 95% Wilson coverage, allowed to dip to 93/100 for
        // Monte-Carlo slack: constant −1 has risk 128/255 exactly
        let task = toy_task();
        let truth_risk = 128.0 / 255.0;
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut budget = Budget::new(600, 0);
            let mut rng = Seed(77).stream("coverage", rep);
            let est = estimate_risk(|_| Label::MINUS, &task, 400, &mut budget, &mut rng).unwrap();
            if est.interval.0 <= truth_risk && truth_risk <= est.interval.1 {
                covered += 1;
            }
        }
        assert!(covered >= 93, "covered = {covered}");
    }

    #[test]
    fn task_descriptor_serializes_for_replay() {
        let task = toy_task();
        let json = serde_json::to_string(task.descriptor()).unwrap();
        let back: TaskDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, task.descriptor());
        assert!(json.contains("\"family\""));
    }

    #[test]
    fn sampler_reproducible_under_fixed_seed() {
        let task = toy_task();
        let mut a = Seed(9).stream("task", 0);
        let mut b = Seed(9).stream("task", 0);
        for _ in 0..32 {
            assert_eq!(task.sample(&mut a), task.sample(&mut b));
        }
    }

    #[test]
    fn sampled_pairs_have_zero_oracle_error() {
        let task = toy_task();
        let mut rng = Seed(10).stream("task", 0);
        for _ in 0..200 {
            let s = task.sample(&mut rng);
            assert_eq!(task.oracle(&s.x, &s.y), OracleVerdict::Correct);
        }
    }
}
