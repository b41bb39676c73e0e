//! Baseline adversaries: the quantifier-over-all-strategies stand-ins the
//! verdicts take maxima and minima over.
//!
//! Removers answer against a published classifier; attackers craft queries
//! against one; distinguishers guess which distribution a query tuple came
//! from. Every strategy respects its budget and reports overruns.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::domain::{Budget, Label, TaskView};
use crate::fhe::HANDLE_LEN;
use crate::players::halfplane::{clear_circle_samples, erm_halfplane, smooth_classifier};
use crate::players::watermark::WatermarkClassifier;
use crate::players::{
    ClassifierDistinguisher, DefenseAttacker, PlayerError, Predictor, RemovalStrategy,
    TupleDistinguisher,
};
use crate::tasks::circle::{ArcBand, CirclePoint, HalfplaneHypothesis};
use crate::tasks::crypto::{CryptoSample, Payload};

// ---------------------------------------------------------------------------
// Watermark removers (d-ones task)
// ---------------------------------------------------------------------------

/// Remover that echoes the published classifier.
pub struct EchoRemover;

impl RemovalStrategy<u64, WatermarkClassifier> for EchoRemover {
    fn name(&self) -> &str {
        "echo"
    }

    fn answer(
        &self,
        classifier: &WatermarkClassifier,
        queries: &[u64],
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        Ok(queries.iter().map(|x| classifier.predict(x)).collect())
    }
}

/// Remover that echoes the classifier but flips each answer with
/// probability `rho`.
pub struct FlipRemover {
    pub rho: f64,
    name: String,
}

impl FlipRemover {
    pub fn new(rho: f64) -> Self {
        FlipRemover {
            name: format!("flip@{rho}"),
            rho,
        }
    }
}

impl RemovalStrategy<u64, WatermarkClassifier> for FlipRemover {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(
        &self,
        classifier: &WatermarkClassifier,
        queries: &[u64],
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        Ok(queries
            .iter()
            .map(|x| {
                let y = classifier.label(*x);
                Label::Clear(if rng.random::<f64>() < self.rho { y.flip() } else { y })
            })
            .collect())
    }
}

/// Remover that ignores the classifier and answers −1 everywhere (the
/// base-rate answer on a sparse-positive task).
pub struct AllMinusRemover;

impl RemovalStrategy<u64, WatermarkClassifier> for AllMinusRemover {
    fn name(&self) -> &str {
        "all-minus"
    }

    fn answer(
        &self,
        _classifier: &WatermarkClassifier,
        queries: &[u64],
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        Ok(vec![Label::MINUS; queries.len()])
    }
}

/// Remover that retrains from scratch within its sample budget and answers
/// with its own model, falling back to the published classifier on indices
/// it knows nothing about.
pub struct FreshLearnerRemover {
    pub train_samples: u64,
    name: String,
}

impl FreshLearnerRemover {
    pub fn new(train_samples: u64) -> Self {
        FreshLearnerRemover {
            name: format!("fresh-learner@{train_samples}"),
            train_samples,
        }
    }
}

impl RemovalStrategy<u64, WatermarkClassifier> for FreshLearnerRemover {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(
        &self,
        classifier: &WatermarkClassifier,
        queries: &[u64],
        view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        let samples = view.draw_many(self.train_samples, budget, rng)?;
        budget.charge(0, queries.len() as u64)?;
        let mut positives = std::collections::BTreeSet::new();
        let mut negatives = std::collections::BTreeSet::new();
        for s in &samples {
            if let Some(sign) = s.y.clear() {
                if sign.is_plus() {
                    positives.insert(s.x);
                } else {
                    negatives.insert(s.x);
                }
            }
        }
        Ok(queries
            .iter()
            .map(|x| {
                if positives.contains(x) {
                    Label::PLUS
                } else if negatives.contains(x) {
                    Label::MINUS
                } else {
                    classifier.predict(x)
                }
            })
            .collect())
    }
}

/// Standard remover suite for the d-ones watermark.
pub fn watermark_remover_suite(
    budget_t: u64,
) -> Vec<Box<dyn RemovalStrategy<u64, WatermarkClassifier>>> {
    vec![
        Box::new(EchoRemover),
        Box::new(FlipRemover::new(0.5)),
        Box::new(AllMinusRemover),
        Box::new(FreshLearnerRemover::new(budget_t)),
    ]
}

// ---------------------------------------------------------------------------
// Watermark distinguishers (d-ones task)
// ---------------------------------------------------------------------------

/// Constant guess, the floor every suite includes.
pub struct AlwaysZeroDistinguisher;

impl ClassifierDistinguisher<u64, WatermarkClassifier> for AlwaysZeroDistinguisher {
    fn name(&self) -> &str {
        "always-zero"
    }

    fn guess(
        &self,
        _classifier: &WatermarkClassifier,
        _queries: &[u64],
        _view: TaskView<'_, u64>,
        _budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        Ok(0)
    }
}

/// Flags repeated indices: an i.i.d. draw from a huge domain almost never
/// repeats, and neither does the planted set, so the advantage stays at
/// zero — the strategy exists to witness that.
pub struct RepetitionDistinguisher;

impl ClassifierDistinguisher<u64, WatermarkClassifier> for RepetitionDistinguisher {
    fn name(&self) -> &str {
        "repetition"
    }

    fn guess(
        &self,
        _classifier: &WatermarkClassifier,
        queries: &[u64],
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        let mut seen = std::collections::BTreeSet::new();
        for x in queries {
            if !seen.insert(*x) {
                return Ok(1);
            }
        }
        Ok(0)
    }
}

/// Flags query sets on which the published classifier answers +1 anywhere:
/// honest draws from a sparse-positive task are almost surely all-negative,
/// and so is the planted set — advantage 0 again, by the construction.
pub struct PositiveHitDistinguisher;

impl ClassifierDistinguisher<u64, WatermarkClassifier> for PositiveHitDistinguisher {
    fn name(&self) -> &str {
        "positive-hit"
    }

    fn guess(
        &self,
        classifier: &WatermarkClassifier,
        queries: &[u64],
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        Ok(queries
            .iter()
            .any(|x| classifier.label(*x).is_plus()) as u8)
    }
}

/// Draws its own fresh samples and flags query sets that collide with a
/// sample the published classifier contradicts.
pub struct SampleOverlapDistinguisher {
    pub train_samples: u64,
    name: String,
}

impl SampleOverlapDistinguisher {
    pub fn new(train_samples: u64) -> Self {
        SampleOverlapDistinguisher {
            name: format!("sample-overlap@{train_samples}"),
            train_samples,
        }
    }
}

impl ClassifierDistinguisher<u64, WatermarkClassifier> for SampleOverlapDistinguisher {
    fn name(&self) -> &str {
        &self.name
    }

    fn guess(
        &self,
        classifier: &WatermarkClassifier,
        queries: &[u64],
        view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        let samples = view.draw_many(self.train_samples, budget, rng)?;
        budget.charge(0, queries.len() as u64)?;
        let contradicted: std::collections::BTreeSet<u64> = samples
            .iter()
            .filter(|s| {
                s.y.clear()
                    .map(|sign| sign != classifier.label(s.x))
                    .unwrap_or(false)
            })
            .map(|s| s.x)
            .collect();
        Ok(queries.iter().any(|x| contradicted.contains(x)) as u8)
    }
}

/// Standard distinguisher suite for the d-ones watermark.
pub fn watermark_distinguisher_suite(
    budget_t: u64,
) -> Vec<Box<dyn ClassifierDistinguisher<u64, WatermarkClassifier>>> {
    vec![
        Box::new(AlwaysZeroDistinguisher),
        Box::new(RepetitionDistinguisher),
        Box::new(PositiveHitDistinguisher),
        Box::new(SampleOverlapDistinguisher::new(budget_t)),
    ]
}

// ---------------------------------------------------------------------------
// Defense attackers (circle task)
// ---------------------------------------------------------------------------

/// Honest attacker: queries are a fresh i.i.d. draw.
pub struct HonestAttacker;

impl DefenseAttacker<CirclePoint, HalfplaneHypothesis> for HonestAttacker {
    fn name(&self) -> &str {
        "honest"
    }

    fn craft(
        &self,
        _classifier: &HalfplaneHypothesis,
        q: usize,
        _view: TaskView<'_, CirclePoint>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<CirclePoint>, PlayerError> {
        budget.charge(0, q as u64)?;
        Ok((0..q).map(|_| CirclePoint::uniform(rng)).collect())
    }
}

/// Replays inputs it drew itself, labels ignored.
pub struct ReplayAttacker {
    pub samples: u64,
}

impl DefenseAttacker<CirclePoint, HalfplaneHypothesis> for ReplayAttacker {
    fn name(&self) -> &str {
        "replay-train"
    }

    fn craft(
        &self,
        _classifier: &HalfplaneHypothesis,
        q: usize,
        view: TaskView<'_, CirclePoint>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<CirclePoint>, PlayerError> {
        let n = self.samples.min(q as u64);
        let drawn = view.draw_many(n, budget, rng)?;
        let mut queries: Vec<CirclePoint> = drawn.iter().map(|s| s.x).collect();
        while queries.len() < q {
            let i = rng.random_range(0..drawn.len());
            queries.push(drawn[i].x);
        }
        Ok(queries)
    }
}

/// Floods the band around the published boundary with queries.
pub struct BoundaryFloodAttacker {
    pub halfwidth_turns: f64,
}

impl DefenseAttacker<CirclePoint, HalfplaneHypothesis> for BoundaryFloodAttacker {
    fn name(&self) -> &str {
        "boundary-flood"
    }

    fn craft(
        &self,
        classifier: &HalfplaneHypothesis,
        q: usize,
        _view: TaskView<'_, CirclePoint>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<CirclePoint>, PlayerError> {
        budget.charge(0, q as u64)?;
        let band = ArcBand::new(classifier.w, self.halfwidth_turns)
            .map_err(|_| PlayerError::ParamOutOfRange {
                name: "halfwidth_turns",
                value: self.halfwidth_turns,
            })?;
        Ok((0..q).map(|_| band.sample(rng)).collect())
    }
}

/// All query mass on a single point just past the published boundary.
pub struct PointMassAttacker;

impl DefenseAttacker<CirclePoint, HalfplaneHypothesis> for PointMassAttacker {
    fn name(&self) -> &str {
        "point-mass"
    }

    fn craft(
        &self,
        classifier: &HalfplaneHypothesis,
        q: usize,
        _view: TaskView<'_, CirclePoint>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<CirclePoint>, PlayerError> {
        budget.charge(0, q as u64)?;
        let side = if rng.random::<bool>() { 1u64 } else { u64::MAX };
        let spot = CirclePoint::from_raw(
            classifier.boundaries()[0].raw().wrapping_add(side << 16),
        );
        Ok(vec![spot; q])
    }
}

/// Standard attacker suite for the halfplane defense.
pub fn defense_attacker_suite(
    flood_halfwidth: f64,
) -> Vec<Box<dyn DefenseAttacker<CirclePoint, HalfplaneHypothesis>>> {
    vec![
        Box::new(HonestAttacker),
        Box::new(ReplayAttacker { samples: 512 }),
        Box::new(BoundaryFloodAttacker {
            halfwidth_turns: flood_halfwidth,
        }),
        Box::new(PointMassAttacker),
    ]
}

// ---------------------------------------------------------------------------
// Crypto-task distinguishers (transferable-attack undetectability)
// ---------------------------------------------------------------------------

/// Flags tuples whose encrypted fraction strays from ½ by more than the
/// binomial standard deviation would explain.
pub struct FlagFractionDistinguisher;

impl TupleDistinguisher<CryptoSample> for FlagFractionDistinguisher {
    fn name(&self) -> &str {
        "flag-fraction"
    }

    fn guess(
        &self,
        tuple: &[CryptoSample],
        _view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        budget.charge(0, tuple.len() as u64)?;
        let q = tuple.len().max(1) as f64;
        let enc = tuple.iter().filter(|s| s.flag).count() as f64;
        Ok(((enc / q - 0.5).abs() > 3.0 * (0.25 / q).sqrt()) as u8)
    }
}

/// Learns its own boundary from fresh samples and flags tuples whose clear
/// points concentrate near it.
pub struct ClearBandDistinguisher {
    pub train_samples: u64,
    pub band_halfwidth: f64,
    name: String,
}

impl ClearBandDistinguisher {
    pub fn new(train_samples: u64, band_halfwidth: f64) -> Self {
        ClearBandDistinguisher {
            name: format!("clear-band@{train_samples}"),
            train_samples,
            band_halfwidth,
        }
    }
}

impl TupleDistinguisher<CryptoSample> for ClearBandDistinguisher {
    fn name(&self) -> &str {
        &self.name
    }

    fn guess(
        &self,
        tuple: &[CryptoSample],
        view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        let samples = view.draw_many(self.train_samples, budget, rng)?;
        let clear = clear_circle_samples(&samples, |x: &CryptoSample| match x.payload {
            Payload::Clear(pt) => Some(pt),
            Payload::Cipher(_) => None,
        });
        if clear.len() < 2 {
            return Ok(0);
        }
        let h = erm_halfplane(&clear)?;
        let band =
            ArcBand::new(h.w, self.band_halfwidth).map_err(|_| PlayerError::ParamOutOfRange {
                name: "band_halfwidth",
                value: self.band_halfwidth,
            })?;
        let clear_points: Vec<CirclePoint> = tuple
            .iter()
            .filter_map(|s| match s.payload {
                Payload::Clear(pt) => Some(pt),
                Payload::Cipher(_) => None,
            })
            .collect();
        if clear_points.is_empty() {
            return Ok(0);
        }
        budget.charge(0, clear_points.len() as u64)?;
        let inside = clear_points.iter().filter(|p| band.contains(**p)).count() as f64;
        let rate = inside / clear_points.len() as f64;
        let expect = band.measure();
        let se = (expect * (1.0 - expect) / clear_points.len() as f64).sqrt();
        Ok((rate > expect + 3.0 * se) as u8)
    }
}

/// Looks at the raw handle bytes of the ciphertexts: uniform nonces carry
/// no signal, so its advantage certifies the sealed backend's secrecy.
pub struct HandleBytesDistinguisher;

impl TupleDistinguisher<CryptoSample> for HandleBytesDistinguisher {
    fn name(&self) -> &str {
        "handle-bytes"
    }

    fn guess(
        &self,
        tuple: &[CryptoSample],
        _view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<u8, PlayerError> {
        budget.charge(0, tuple.len() as u64)?;
        let mut sum = 0u64;
        let mut count = 0u64;
        for s in tuple {
            if let Payload::Cipher(ct) = &s.payload {
                sum += ct.handle().iter().map(|&b| b as u64).sum::<u64>();
                count += HANDLE_LEN as u64;
            }
        }
        if count == 0 {
            return Ok(0);
        }
        let mean = sum as f64 / count as f64;
        // byte mean of uniform bytes is 127.5 with sd ≈ 73.9/√count
        Ok(((mean - 127.5).abs() > 3.0 * 73.9 / (count as f64).sqrt()) as u8)
    }
}

/// Standard distinguisher suite for the crypto task.
pub fn crypto_distinguisher_suite(
    train_budget: u64,
    band_halfwidth: f64,
) -> Vec<Box<dyn TupleDistinguisher<CryptoSample>>> {
    vec![
        Box::new(FlagFractionDistinguisher),
        Box::new(ClearBandDistinguisher::new(train_budget, band_halfwidth)),
        Box::new(HandleBytesDistinguisher),
    ]
}

// ---------------------------------------------------------------------------
// Circle smoothing remover (watermarks on the circle family)
// ---------------------------------------------------------------------------

/// Answers with a locally smoothed copy of the published circle classifier.
pub struct SmoothingRemover {
    pub eta: f64,
}

impl SmoothingRemover {
    pub fn answer<F: Predictor<CirclePoint>>(
        &self,
        classifier: F,
        queries: &[CirclePoint],
        budget: &mut Budget,
    ) -> Result<Vec<Label>, PlayerError> {
        let smooth = smooth_classifier(classifier, self.eta)?;
        budget.charge(0, queries.len() as u64 * smooth.probes() as u64)?;
        Ok(queries.iter().map(|x| smooth.predict(x)).collect())
    }
}
