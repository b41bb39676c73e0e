//! Every concrete strategy the games are played with: learners, the
//! boundary-encryption attacker, the Rejectron defense, the watermark
//! builder, and the baseline adversary suite.

pub mod attack;
pub mod baselines;
pub mod halfplane;
pub mod registry;
pub mod rejectron;
pub mod watermark;

use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::domain::{Budget, BudgetError, Label};

#[derive(Debug, Error)]
pub enum PlayerError {
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error("sample set is inconsistent with the hypothesis class")]
    InconsistentSamples,
    #[error("empty sample set")]
    EmptySampleSet,
    #[error("too few clear samples: got {got}, need at least {need}")]
    TooFewClearSamples { got: usize, need: usize },
    #[error("parameter {name} out of range: {value}")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("class search not implemented for this task family")]
    UnsupportedFamily,
    #[error("fhe failure: {0}")]
    Fhe(#[from] crate::fhe::FheError),
    #[error("could not assemble a watermark of the prescribed size (|A| = {positives} < q = {q})")]
    WatermarkTooFewPositives { positives: usize, q: usize },
    #[error("unknown strategy name: {0}")]
    UnknownStrategy(String),
}

/// Deterministic total classifier.
pub trait Predictor<X>: Send + Sync {
    fn predict(&self, x: &X) -> Label;

    /// Operation count charged per prediction.
    fn op_cost(&self) -> u64 {
        1
    }
}

impl<X, F> Predictor<X> for F
where
    F: Fn(&X) -> Label + Send + Sync,
{
    fn predict(&self, x: &X) -> Label {
        self(x)
    }
}

/// Strategy answering a query sequence without seeing a classifier
/// (transferable-attack defenders, uniqueness provers).
pub trait QueryAnswerer<X>: Send + Sync {
    fn name(&self) -> &str;

    fn answer(
        &self,
        queries: &[X],
        view: crate::domain::TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError>;
}

/// Strategy answering against a published classifier (watermark removers).
pub trait RemovalStrategy<X, F>: Send + Sync {
    fn name(&self) -> &str;

    fn answer(
        &self,
        classifier: &F,
        queries: &[X],
        view: crate::domain::TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError>;
}

/// Attacker crafting queries against a published classifier (defense game).
pub trait DefenseAttacker<X, F>: Send + Sync {
    fn name(&self) -> &str;

    fn craft(
        &self,
        classifier: &F,
        q: usize,
        view: crate::domain::TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<X>, PlayerError>;
}

/// Distinguisher over bare query tuples (transferable-attack
/// undetectability). It may draw samples within its budget but it never
/// sees the error oracle.
pub trait TupleDistinguisher<X>: Send + Sync {
    fn name(&self) -> &str;

    fn guess(
        &self,
        tuple: &[X],
        view: crate::domain::TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError>;
}

/// Distinguisher that additionally sees the published classifier
/// (watermark undetectability).
pub trait ClassifierDistinguisher<X, F>: Send + Sync {
    fn name(&self) -> &str;

    fn guess(
        &self,
        classifier: &F,
        queries: &[X],
        view: crate::domain::TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError>;
}
