//! The boundary-encryption attack on the crypto task, and the defender
//! strategies it is played against.
//!
//! The attacker learns a halfplane from the clear half of its sample draw,
//! then fills a uniformly chosen subset of the query slots with fresh
//! uniform clear points and the remaining slots with encryptions of points
//! near its own decision boundary. Slot for slot the result is distributed
//! like the task itself, except that the hidden encrypted points concentrate
//! where a fast defender is most likely to be wrong.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::domain::{Budget, Label, Sign, TaskView};
use crate::players::halfplane::{clear_circle_samples, erm_halfplane};
use crate::players::{PlayerError, QueryAnswerer};
use crate::tasks::circle::{ArcBand, CirclePoint, HalfplaneHypothesis};
use crate::tasks::crypto::{halfplane_circuit, CryptoSample, CryptoTask, Payload};

/// Sample count of the attack, `900/ε`.
pub fn attack_sample_count(eps: f64) -> u64 {
    (900.0 / eps).ceil() as u64
}

/// Query count of the attack, `16/ε`.
pub fn attack_query_count(eps: f64) -> usize {
    (16.0 / eps).ceil() as usize
}

/// Half-width in turns of the planted band: `ε + ε/100`.
pub fn attack_band_halfwidth(eps: f64) -> f64 {
    eps + eps / 100.0
}

/// Attack output: the query sequence plus harness-only diagnostics.
#[derive(Debug, Clone)]
pub struct AttackOutput {
    pub queries: Vec<CryptoSample>,
    /// Indices of the planted (encrypted boundary) slots. Available to the
    /// harness for diagnostics, never to defenders.
    pub trace: Vec<usize>,
    /// The attacker's learned normal.
    pub learned: HalfplaneHypothesis,
}

/// Run the attack against a crypto task instance.
///
/// Draws `900/ε` samples, fits the midpoint ERM on the clear ones, then
/// emits `16/ε` queries: each slot is, independently with probability ½, a
/// fresh uniform clear point, otherwise an encryption of a uniform draw
/// from the band of half-width `ε + ε/100` around the learned boundary.
pub fn transferable_attack(
    crypto: &CryptoTask,
    eps: f64,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<AttackOutput, PlayerError> {
    if !(eps > 0.0 && eps < 0.24) {
        return Err(PlayerError::ParamOutOfRange {
            name: "eps",
            value: eps,
        });
    }
    let n = attack_sample_count(eps);
    let q = attack_query_count(eps);

    let view = crypto.task().view();
    let samples = view.draw_many(n, budget, rng)?;
    let clear = clear_circle_samples(&samples, |x: &CryptoSample| match x.payload {
        Payload::Clear(pt) => Some(pt),
        Payload::Cipher(_) => None,
    });
    if clear.len() < 2 {
        return Err(PlayerError::TooFewClearSamples {
            got: clear.len(),
            need: 2,
        });
    }
    let learned = erm_halfplane(&clear)?;
    let band = ArcBand::new(learned.w, attack_band_halfwidth(eps)).map_err(|_| {
        PlayerError::ParamOutOfRange {
            name: "eps",
            value: eps,
        }
    })?;

    let pk = crypto.pk();
    let mut queries = Vec::with_capacity(q);
    let mut trace = Vec::new();
    for i in 0..q {
        // uniformly random subset S of clear slots ⇔ an independent fair
        // coin per slot
        if rng.random::<bool>() {
            queries.push(CryptoSample {
                flag: false,
                payload: Payload::Clear(CirclePoint::uniform(rng)),
                pk,
            });
        } else {
            let x_bnd = band.sample(rng);
            let (ct, ops) = crypto.backend().encrypt(pk, &x_bnd.to_bits(), rng)?;
            budget.charge(0, ops)?;
            queries.push(CryptoSample {
                flag: true,
                payload: Payload::Cipher(ct),
                pk,
            });
            trace.push(i);
        }
    }
    Ok(AttackOutput {
        queries,
        trace,
        learned,
    })
}

// ---------------------------------------------------------------------------
// Defender strategies on the crypto task
// ---------------------------------------------------------------------------

/// ERM defender with a sample budget: draws what its budget allows, fits a
/// halfplane on the clear subset, answers clear queries directly and
/// encrypted queries by homomorphic evaluation of its hypothesis.
///
/// With no clear sample to learn from it falls back to a uniformly random
/// normal — a guess is still an answer.
pub struct ErmCryptoDefender {
    name: String,
    crypto: CryptoTask,
    train_samples: u64,
}

impl ErmCryptoDefender {
    pub fn new(crypto: CryptoTask, train_samples: u64) -> Self {
        ErmCryptoDefender {
            name: format!("erm-halfplane@{train_samples}"),
            crypto,
            train_samples,
        }
    }

    fn fit(
        &self,
        view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<HalfplaneHypothesis, PlayerError> {
        let samples = view.draw_many(self.train_samples, budget, rng)?;
        let clear = clear_circle_samples(&samples, |x: &CryptoSample| match x.payload {
            Payload::Clear(pt) => Some(pt),
            Payload::Cipher(_) => None,
        });
        if clear.is_empty() {
            return Ok(HalfplaneHypothesis::new(CirclePoint::uniform(rng)));
        }
        erm_halfplane(&clear)
    }
}

impl QueryAnswerer<CryptoSample> for ErmCryptoDefender {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(
        &self,
        queries: &[CryptoSample],
        view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        let h = self.fit(view, budget, rng)?;
        let circuit = halfplane_circuit(h.w);
        let mut answers = Vec::with_capacity(queries.len());
        for qq in queries {
            match &qq.payload {
                Payload::Clear(pt) => {
                    budget.charge(0, 1)?;
                    answers.push(Label::Clear(h.label(*pt)));
                }
                Payload::Cipher(ct) => {
                    let (out, ops) = self.crypto.backend().eval(qq.pk, &circuit, &[*ct], rng)?;
                    budget.charge(0, ops)?;
                    answers.push(Label::Cipher(out));
                }
            }
        }
        Ok(answers)
    }
}

/// Defender answering every query with an independent fair coin (clear
/// labels even on encrypted queries, which the oracle counts as errors).
pub struct RandomLabelsDefender;

impl QueryAnswerer<CryptoSample> for RandomLabelsDefender {
    fn name(&self) -> &str {
        "random-labels"
    }

    fn answer(
        &self,
        queries: &[CryptoSample],
        _view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        Ok(queries
            .iter()
            .map(|_| Label::Clear(Sign::from_bool(rng.random::<bool>())))
            .collect())
    }
}

/// Defender answering −1 everywhere.
pub struct ConstantMinusDefender;

impl QueryAnswerer<CryptoSample> for ConstantMinusDefender {
    fn name(&self) -> &str {
        "constant-minus"
    }

    fn answer(
        &self,
        queries: &[CryptoSample],
        _view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        _rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        budget.charge(0, queries.len() as u64)?;
        Ok(vec![Label::MINUS; queries.len()])
    }
}
