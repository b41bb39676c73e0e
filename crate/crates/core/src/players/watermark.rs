//! Watermark construction on the exactly-d-ones task.
//!
//! The builder trains on `n` samples, flips a random q-subset of the
//! positives it saw to −1, and publishes a classifier consistent with the
//! flipped labels (padded back to exactly d positives). The planted queries
//! are those flipped positives half the time and a fresh honest draw
//! otherwise. Anyone echoing the published classifier answers the planted
//! half with −1 throughout — which the true labels contradict.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::domain::{Budget, Label, Sign};
use crate::players::{PlayerError, Predictor};
use crate::tasks::dones::{DOnesTask, TrainingSummary};

/// Published watermark classifier: an exactly-d positive set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkClassifier {
    positives: BTreeSet<u64>,
}

impl WatermarkClassifier {
    pub fn positives(&self) -> &BTreeSet<u64> {
        &self.positives
    }

    pub fn label(&self, x: u64) -> Sign {
        Sign::from_bool(self.positives.contains(&x))
    }

    /// Exact risk against the planted ground truth, using the class promise
    /// `|positives| = d`: the symmetric difference is twice the planted
    /// positives the classifier misses.
    pub fn exact_risk(&self, task: &DOnesTask) -> f64 {
        let truth = task.hypothesis();
        let agree = truth
            .positives()
            .iter()
            .filter(|x| self.positives.contains(x))
            .count() as u64;
        let sym_diff = (truth.d() - agree) + (self.positives.len() as u64 - agree);
        sym_diff as f64 / task.domain_size() as f64
    }
}

impl Predictor<u64> for WatermarkClassifier {
    fn predict(&self, x: &u64) -> Label {
        Label::Clear(self.label(*x))
    }
}

/// Builder output: the classifier, the queries, and whether the planted
/// branch was taken (harness-only diagnostic).
#[derive(Debug, Clone)]
pub struct WatermarkOutput {
    pub classifier: WatermarkClassifier,
    pub queries: Vec<u64>,
    pub is_planted: bool,
    /// The flipped positives, regardless of branch (harness-only).
    pub trigger_set: Vec<u64>,
}

/// Build a watermark: train on `n` samples, flip a random q-subset `A_w` of
/// the seen positives, publish a classifier consistent with `A∖A_w` positive
/// and `B ∪ A_w` negative, and query either `A_w` or a fresh honest draw
/// with equal probability.
///
/// Fails with [`PlayerError::WatermarkTooFewPositives`] when fewer than `q`
/// positives were seen; runners count that against the correctness
/// allowance.
pub fn watermark_build(
    task: &DOnesTask,
    q: usize,
    n: u64,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<WatermarkOutput, PlayerError> {
    let summary = task.draw_training_summary(n, budget, rng)?;
    let seen: Vec<u64> = summary.positives_seen.iter().copied().collect();
    if seen.len() < q {
        return Err(PlayerError::WatermarkTooFewPositives {
            positives: seen.len(),
            q,
        });
    }
    // uniformly random q-subset A_w of the seen positives
    let mut indices: Vec<usize> = (0..seen.len()).collect();
    for i in 0..q {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let trigger: BTreeSet<u64> = indices[..q].iter().map(|&i| seen[i]).collect();

    let classifier = consistent_classifier(task, &summary, &trigger, rng);

    // the planted branch and the honest branch are equally likely
    let is_planted = rng.random::<bool>();
    let queries: Vec<u64> = if is_planted {
        trigger.iter().copied().collect()
    } else {
        (0..q).map(|_| rng.random_range(0..task.domain_size())).collect()
    };

    Ok(WatermarkOutput {
        classifier,
        queries,
        is_planted,
        trigger_set: trigger.into_iter().collect(),
    })
}

/// Classifier consistent with `positives_seen ∖ flipped` labeled +1 and
/// `negatives_seen ∪ flipped` labeled −1, padded to exactly d positives
/// with uniform fresh indices outside everything seen.
fn consistent_classifier(
    task: &DOnesTask,
    summary: &TrainingSummary,
    flipped: &BTreeSet<u64>,
    rng: &mut ChaCha12Rng,
) -> WatermarkClassifier {
    let truth_like: BTreeSet<u64> = summary
        .positives_seen
        .iter()
        .copied()
        .filter(|x| !flipped.contains(x))
        .collect();
    let mut positives = truth_like;
    let d = task.d();
    let nn = task.domain_size();
    while (positives.len() as u64) < d {
        let x = rng.random_range(0..nn);
        if positives.contains(&x)
            || flipped.contains(&x)
            || summary.positives_seen.contains(&x)
        {
            continue;
        }
        // do not contradict a seen negative
        if task.hypothesis().label(x).is_plus() {
            // an unseen true positive is fine to include
            positives.insert(x);
        } else if !summary.negative_was_seen(x) {
            positives.insert(x);
        }
    }
    WatermarkClassifier { positives }
}

/// Independent prover certifying uniqueness: trains its own consistent
/// classifier on a fresh n-sample draw and answers with it.
pub fn uniqueness_prover(
    task: &DOnesTask,
    queries: &[u64],
    n: u64,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Label>, PlayerError> {
    let summary = task.draw_training_summary(n, budget, rng)?;
    let classifier = consistent_classifier(task, &summary, &BTreeSet::new(), rng);
    Ok(queries.iter().map(|x| classifier.predict(x)).collect())
}

/// Theft verdict: 1 iff the suspect's answers disagree with the uniqueness
/// prover's on strictly more than `threshold` of the queries.
pub fn watermark_verify_theft(
    suspect: &[Label],
    independent: &[Label],
    threshold: f64,
) -> Result<bool, PlayerError> {
    if suspect.len() != independent.len() {
        return Err(PlayerError::ParamOutOfRange {
            name: "answers_len",
            value: independent.len() as f64,
        });
    }
    let disagree = suspect
        .iter()
        .zip(independent)
        .filter(|(a, b)| a != b)
        .count();
    Ok(disagree as f64 > threshold * suspect.len() as f64)
}
