//! Seeded, self-contained experiments over the protocol games: each one
//! assembles a task family and strategy suites, runs the appropriate game,
//! and returns a serializable verdict plus plain-text report rows.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Budget, Label, ProtocolParams, TaskView};
use crate::gametheory::{
    classify_trichotomy, estimate_payoff_matrix, solve_nash, sparsify, RemovalCandidate,
    SchemeKind, Side, TrichotomyReport, WatermarkCandidate,
};
use crate::parallel::run_trials;
use crate::players::attack::{
    attack_band_halfwidth, attack_query_count, attack_sample_count, transferable_attack,
};
use crate::players::halfplane::erm_halfplane_from_task;
use crate::players::registry;
use crate::players::rejectron::{
    defense_train_size, fit_defense, HalfplaneClass,
};
use crate::players::watermark::{
    uniqueness_prover, watermark_build, WatermarkClassifier,
};
use crate::players::{PlayerError, Predictor, QueryAnswerer};
use crate::protocols::{
    run_defense_game, run_transfattack_game, run_watermark_game, AttackCrafter, DefenseInstance,
    DefensePlayer, DefenseVerdict, FittedDefensePlayer, ProtocolError, TranscriptRow,
    TransfAttackInstance, TransfAttackVerdict, WatermarkGameConfig, WatermarkInstance,
    WatermarkScheme, WatermarkVerdict,
};
use crate::rng::Seed;
use crate::stats::{chernoff_lower, chernoff_two_sided, chernoff_upper, wilson_interval};
use crate::tasks::circle::{circle_task, CirclePoint, HalfplaneHypothesis};
use crate::tasks::crypto::{crypto_task, CryptoSample, CryptoTask};
use crate::tasks::dones::{dones_task, DOnesTask};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("strategy error: {0}")]
    Player(#[from] PlayerError),
    #[error("game theory error: {0}")]
    GameTheory(#[from] crate::gametheory::GameTheoryError),
    #[error("efid error: {0}")]
    Efid(#[from] crate::efid::EfidError),
}

/// One row of the human-readable report: a property, its estimate and
/// interval, the threshold it is judged against, and the outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub property: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(
        property: impl Into<String>,
        estimate: f64,
        ci: (f64, f64),
        threshold: f64,
        pass: bool,
    ) -> Self {
        ReportRow {
            property: property.into(),
            estimate,
            ci_low: ci.0,
            ci_high: ci.1,
            threshold,
            pass,
        }
    }
}

// ---------------------------------------------------------------------------
// Transferable attack on the crypto task
// ---------------------------------------------------------------------------

/// Calibrated defender-budget constant κ: the attack stays transferable
/// against ERM defenders holding up to `κ/ε²` samples. Fixed by the sweep
/// recorded at `calibration/defender-budget.json` (reproducible via the
/// `calibrate` example).
pub const CALIBRATED_DEFENDER_KAPPA: f64 = 0.005;

/// The calibrated defender sample budget `κ/ε²`.
pub fn calibrated_defender_samples(eps: f64) -> u64 {
    ((CALIBRATED_DEFENDER_KAPPA / (eps * eps)).round() as u64).max(1)
}

/// The boundary-encryption attacker bound to one crypto task instance.
pub struct CryptoAttacker {
    crypto: CryptoTask,
    eps: f64,
}

impl AttackCrafter<CryptoSample> for CryptoAttacker {
    fn name(&self) -> &str {
        "boundary-encryption"
    }

    fn craft(
        &self,
        _view: TaskView<'_, CryptoSample>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<CryptoSample>, PlayerError> {
        Ok(transferable_attack(&self.crypto, self.eps, budget, rng)?.queries)
    }
}

/// Transferable-attack experiment on the crypto task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransfAttackExperiment {
    pub epsilon: f64,
    pub lambda: u32,
    /// Defender sample budget `t` (the calibrated κ/ε²).
    pub defender_samples: u64,
    pub defenders: Vec<String>,
    pub distinguishers: Vec<String>,
    pub trials: u64,
    pub undetectability_rounds: u64,
    /// Transferability threshold `c`.
    pub c: f64,
    /// Undetectability parameter `s` (advantage is judged against `s/2`).
    pub s: f64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

impl TransfAttackExperiment {
    pub fn params(&self) -> ProtocolParams {
        let q = attack_query_count(self.epsilon);
        ProtocolParams {
            epsilon: self.epsilon,
            q,
            attacker_budget: Budget::new(
                attack_sample_count(self.epsilon),
                // encryption of each planted slot plus slack
                (q as u64) * 128 + 4096,
            ),
            defender_budget: Budget::new(
                self.defender_samples,
                // homomorphic answers cost ~a thousand ops per query
                (q as u64) * 4096 + 65_536,
            ),
            l: 0.9,
            c: self.c,
            s: self.s,
        }
    }

    fn make_instance(&self, seed: Seed) -> TransfAttackInstance<CryptoSample> {
        let mut wrng = seed.stream("instance-w", 0);
        let w = CirclePoint::uniform(&mut wrng);
        let crypto = crypto_task(self.lambda, w, seed.child("instance-keys", 0));
        let defenders = self
            .defenders
            .iter()
            .map(|name| {
                registry::crypto_defender(name, &crypto, self.defender_samples)
                    .expect("validated names")
            })
            .collect();
        let distinguishers = self
            .distinguishers
            .iter()
            .map(|name| {
                registry::crypto_distinguisher(
                    name,
                    self.defender_samples,
                    attack_band_halfwidth(self.epsilon),
                )
                .expect("validated names")
            })
            .collect();
        let task = crypto.task().clone();
        TransfAttackInstance {
            task,
            attacker: Box::new(CryptoAttacker {
                crypto,
                eps: self.epsilon,
            }),
            defenders,
            distinguishers,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.24) {
            return Err(ExperimentError::Config(format!(
                "epsilon out of range: {}",
                self.epsilon
            )));
        }
        if self.defenders.is_empty() {
            return Err(ExperimentError::Config("empty defender suite".into()));
        }
        for name in &self.defenders {
            let probe = crypto_task(16, CirclePoint::from_turns(0.0), Seed(0));
            registry::crypto_defender(name, &probe, 1)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        for name in &self.distinguishers {
            registry::crypto_distinguisher(name, 1, 0.05)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        self.params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn run(
        &self,
        seed: Seed,
        transcripts: Option<&mut Vec<TranscriptRow>>,
    ) -> Result<TransfAttackVerdict, ExperimentError> {
        self.validate()?;
        let params = self.params();
        Ok(run_transfattack_game(
            &|s| self.make_instance(s),
            &params,
            self.trials,
            self.undetectability_rounds,
            seed,
            self.threads,
            transcripts,
        )?)
    }
}

/// Report rows for a transferable-attack verdict.
pub fn transfattack_report(verdict: &TransfAttackVerdict, c: f64, s: f64) -> Vec<ReportRow> {
    let mut rows = vec![ReportRow::new(
        "transferability_min",
        verdict.transferability_min.rate,
        verdict.transferability_min.ci,
        c,
        verdict.passes.transferability,
    )];
    for (name, est) in &verdict.per_defender {
        rows.push(ReportRow::new(
            format!("transferability[{name}]"),
            est.rate,
            est.ci,
            c,
            est.rate >= c,
        ));
    }
    rows.push(ReportRow::new(
        "undetectability_advantage_max",
        verdict.undetectability_advantage.advantage,
        verdict.undetectability_advantage.interval,
        s / 2.0,
        verdict.passes.undetectability,
    ));
    for (name, est) in &verdict.per_distinguisher {
        rows.push(ReportRow::new(
            format!("advantage[{name}]"),
            est.advantage,
            est.interval,
            s / 2.0,
            est.advantage <= s / 2.0,
        ));
    }
    rows
}

// ---------------------------------------------------------------------------
// Watermark on the d-ones task
// ---------------------------------------------------------------------------

struct DOnesWatermarkBuilder {
    task: DOnesTask,
    q: usize,
    n: u64,
}

impl WatermarkScheme<u64, WatermarkClassifier> for DOnesWatermarkBuilder {
    fn build(
        &self,
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<crate::protocols::BuiltWatermark<u64, WatermarkClassifier>, PlayerError> {
        let out = watermark_build(&self.task, self.q, self.n, budget, rng)?;
        Ok(crate::protocols::BuiltWatermark {
            classifier: out.classifier,
            queries: out.queries,
            is_planted: out.is_planted,
        })
    }
}

struct DOnesUniquenessProver {
    task: DOnesTask,
    n: u64,
}

impl QueryAnswerer<u64> for DOnesUniquenessProver {
    fn name(&self) -> &str {
        "uniqueness-prover"
    }

    fn answer(
        &self,
        queries: &[u64],
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<Label>, PlayerError> {
        uniqueness_prover(&self.task, queries, self.n, budget, rng)
    }
}

/// Watermark experiment on the exactly-d-ones task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatermarkExperiment {
    pub d: u64,
    pub epsilon: f64,
    /// Query count; the headline configuration uses `⌈1/ε⌉·8`.
    pub q: usize,
    /// Builder / prover sample draw (`Θ(d/ε)`).
    pub builder_samples: u64,
    /// Adversary sample budget `t` (`d/100` at the headline scale).
    pub adversary_samples: u64,
    pub removers: Vec<String>,
    pub distinguishers: Vec<String>,
    pub trials: u64,
    pub undetectability_rounds: u64,
    pub l: f64,
    pub c: f64,
    pub s: f64,
    /// Explicit advantage threshold (the headline run uses 0.11).
    pub advantage_threshold: Option<f64>,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl WatermarkExperiment {
    pub fn domain_size(&self) -> u64 {
        100 * self.d * self.d
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams {
            epsilon: self.epsilon,
            q: self.q,
            attacker_budget: Budget::new(self.builder_samples + 16, 1 << 22),
            defender_budget: Budget::new(self.adversary_samples, 1 << 22),
            l: self.l,
            c: self.c,
            s: self.s,
        }
    }

    /// Correctness threshold `ε + q/N`.
    pub fn correctness_threshold(&self) -> f64 {
        self.epsilon + self.q as f64 / self.domain_size() as f64
    }

    fn make_instance(&self, seed: Seed) -> WatermarkInstance<u64, WatermarkClassifier> {
        let (task, _) = dones_task(self.d, seed.child("instance-h", 0));
        let removers = self
            .removers
            .iter()
            .map(|n| registry::watermark_remover(n, self.adversary_samples).expect("validated"))
            .collect();
        let distinguishers = self
            .distinguishers
            .iter()
            .map(|n| {
                registry::watermark_distinguisher(n, self.adversary_samples).expect("validated")
            })
            .collect();
        let risk_task = task.clone();
        WatermarkInstance {
            task: task.task().clone(),
            builder: Box::new(DOnesWatermarkBuilder {
                task: task.clone(),
                q: self.q,
                n: self.builder_samples,
            }),
            removers,
            distinguishers,
            prover: Box::new(DOnesUniquenessProver {
                task,
                n: self.builder_samples,
            }),
            risk: Box::new(move |f| f.exact_risk(&risk_task)),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.d < 1 {
            return Err(ExperimentError::Config("d must be at least 1".into()));
        }
        if self.removers.is_empty() {
            return Err(ExperimentError::Config("empty remover suite".into()));
        }
        for n in &self.removers {
            registry::watermark_remover(n, 1).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        for n in &self.distinguishers {
            registry::watermark_distinguisher(n, 1)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        self.params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn run(
        &self,
        seed: Seed,
        transcripts: Option<&mut Vec<TranscriptRow>>,
    ) -> Result<WatermarkVerdict, ExperimentError> {
        self.validate()?;
        let config = WatermarkGameConfig {
            params: self.params(),
            trials: self.trials,
            undetectability_rounds: self.undetectability_rounds,
            correctness_threshold: self.correctness_threshold(),
            advantage_threshold: self.advantage_threshold,
            threads: self.threads,
        };
        Ok(run_watermark_game(
            &|s| self.make_instance(s),
            &config,
            seed,
            transcripts,
        )?)
    }
}

/// Report rows for a watermark verdict.
pub fn watermark_report(
    verdict: &WatermarkVerdict,
    params: &ProtocolParams,
    advantage_threshold: Option<f64>,
) -> Vec<ReportRow> {
    let adv_thr = advantage_threshold.unwrap_or(params.s / 2.0);
    let mut rows = vec![
        ReportRow::new(
            "correctness_rate",
            verdict.correctness_rate.rate,
            verdict.correctness_rate.ci,
            params.l,
            verdict.passes.correctness,
        ),
        ReportRow::new(
            "uniqueness_rate",
            verdict.uniqueness_rate.rate,
            verdict.uniqueness_rate.ci,
            params.c,
            verdict.passes.uniqueness,
        ),
        ReportRow::new(
            "unremovability_max_success",
            verdict.unremovability_max_success.rate,
            verdict.unremovability_max_success.ci,
            params.s,
            verdict.passes.unremovability,
        ),
        ReportRow::new(
            "undetectability_advantage_max",
            verdict.undetectability_advantage.advantage,
            verdict.undetectability_advantage.interval,
            adv_thr,
            verdict.passes.undetectability,
        ),
    ];
    for (name, est) in &verdict.per_remover {
        rows.push(ReportRow::new(
            format!("removal_success[{name}]"),
            est.rate,
            est.ci,
            params.s,
            est.rate <= params.s,
        ));
    }
    for (name, est) in &verdict.per_distinguisher {
        rows.push(ReportRow::new(
            format!("advantage[{name}]"),
            est.advantage,
            est.interval,
            adv_thr,
            est.advantage <= adv_thr,
        ));
    }
    rows
}

// ---------------------------------------------------------------------------
// Defense on the halfplane task
// ---------------------------------------------------------------------------

/// The selective-classification defense for the halfplane family.
pub struct VcHalfplaneDefense {
    pub train_size: u64,
    pub eps: f64,
}

struct FittedVcDefense {
    fitted: crate::players::rejectron::FittedDefense<CirclePoint, HalfplaneHypothesis>,
}

impl DefensePlayer<CirclePoint, HalfplaneHypothesis> for VcHalfplaneDefense {
    fn fit(
        &self,
        view: TaskView<'_, CirclePoint>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Box<dyn FittedDefensePlayer<CirclePoint, HalfplaneHypothesis>>, PlayerError> {
        let fitted = fit_defense(
            &HalfplaneClass,
            view,
            self.train_size,
            self.eps,
            2,
            budget,
            rng,
        )?;
        Ok(Box::new(FittedVcDefense { fitted }))
    }
}

impl FittedDefensePlayer<CirclePoint, HalfplaneHypothesis> for FittedVcDefense {
    fn classifier(&self) -> &HalfplaneHypothesis {
        &self.fitted.classifier
    }

    fn classifier_answers(&self, queries: &[CirclePoint]) -> Vec<Label> {
        queries
            .iter()
            .map(|x| Label::Clear(self.fitted.classifier.label(*x)))
            .collect()
    }

    fn detect(
        &self,
        queries: &[CirclePoint],
        _rng: &mut ChaCha12Rng,
    ) -> Result<bool, PlayerError> {
        Ok(self.fitted.detect(&HalfplaneClass, queries)?.detected)
    }
}

/// Defender that always flags — the degenerate strategy whose completeness
/// collapses to zero.
pub struct AlwaysFlagDefense {
    pub train_size: u64,
}

struct FittedAlwaysFlag {
    classifier: HalfplaneHypothesis,
}

impl DefensePlayer<CirclePoint, HalfplaneHypothesis> for AlwaysFlagDefense {
    fn fit(
        &self,
        view: TaskView<'_, CirclePoint>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Box<dyn FittedDefensePlayer<CirclePoint, HalfplaneHypothesis>>, PlayerError> {
        let classifier = erm_halfplane_from_task(view, self.train_size, budget, rng)?;
        Ok(Box::new(FittedAlwaysFlag { classifier }))
    }
}

impl FittedDefensePlayer<CirclePoint, HalfplaneHypothesis> for FittedAlwaysFlag {
    fn classifier(&self) -> &HalfplaneHypothesis {
        &self.classifier
    }

    fn classifier_answers(&self, queries: &[CirclePoint]) -> Vec<Label> {
        queries
            .iter()
            .map(|x| Label::Clear(self.classifier.label(*x)))
            .collect()
    }

    fn detect(&self, _queries: &[CirclePoint], _rng: &mut ChaCha12Rng) -> Result<bool, PlayerError> {
        Ok(true)
    }
}

/// Defense experiment on the halfplane task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseExperiment {
    pub epsilon: f64,
    /// Training-set size; `None` derives `d·log2(d)²/ε³` for d = 2.
    pub train_size: Option<u64>,
    /// Query count; `None` sets q = N.
    pub q: Option<usize>,
    pub attackers: Vec<String>,
    pub trials: u64,
    pub l: f64,
    pub c: f64,
    pub s: f64,
    /// Which defender plays: "rejectron" (default) or "always-flag".
    #[serde(default = "default_defender")]
    pub defender: String,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_defender() -> String {
    "rejectron".into()
}

impl DefenseExperiment {
    pub fn resolved_train_size(&self) -> u64 {
        self.train_size
            .unwrap_or_else(|| defense_train_size(2, self.epsilon))
    }

    pub fn resolved_q(&self) -> usize {
        self.q.unwrap_or(self.resolved_train_size() as usize)
    }

    pub fn params(&self) -> ProtocolParams {
        let n = self.resolved_train_size();
        let q = self.resolved_q();
        ProtocolParams {
            epsilon: self.epsilon,
            q,
            attacker_budget: Budget::new(4 * n, 1 << 22),
            defender_budget: Budget::new(n, 1 << 22),
            l: self.l,
            c: self.c,
            s: self.s,
        }
    }

    fn make_instance(&self, seed: Seed) -> DefenseInstance<CirclePoint, HalfplaneHypothesis> {
        let mut wrng = seed.stream("instance-w", 0);
        let w = CirclePoint::uniform(&mut wrng);
        let task = circle_task(w);
        let truth = HalfplaneHypothesis::new(w);
        let attackers = self
            .attackers
            .iter()
            .map(|n| registry::defense_attacker(n, 2.0 * self.epsilon / 7.0).expect("validated"))
            .collect();
        let defender: Box<dyn DefensePlayer<CirclePoint, HalfplaneHypothesis>> =
            if self.defender == "always-flag" {
                Box::new(AlwaysFlagDefense {
                    train_size: self.resolved_train_size(),
                })
            } else {
                Box::new(VcHalfplaneDefense {
                    train_size: self.resolved_train_size(),
                    eps: self.epsilon,
                })
            };
        DefenseInstance {
            task,
            defender,
            attackers,
            risk: Box::new(move |h: &HalfplaneHypothesis| h.risk_against(&truth)),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.125) {
            return Err(ExperimentError::Config(format!(
                "epsilon out of range (0, 1/8): {}",
                self.epsilon
            )));
        }
        if self.attackers.is_empty() {
            return Err(ExperimentError::Config("empty attacker suite".into()));
        }
        for n in &self.attackers {
            registry::defense_attacker(n, 0.05)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if !["rejectron", "always-flag"].contains(&self.defender.as_str()) {
            return Err(ExperimentError::Config(format!(
                "unknown defender: {}",
                self.defender
            )));
        }
        self.params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn run(
        &self,
        seed: Seed,
        transcripts: Option<&mut Vec<TranscriptRow>>,
    ) -> Result<DefenseVerdict, ExperimentError> {
        self.validate()?;
        let params = self.params();
        Ok(run_defense_game(
            &|s| self.make_instance(s),
            &params,
            self.trials,
            seed,
            self.threads,
            transcripts,
        )?)
    }
}

/// Report rows for a defense verdict.
pub fn defense_report(verdict: &DefenseVerdict, params: &ProtocolParams) -> Vec<ReportRow> {
    let mut rows = vec![
        ReportRow::new(
            "correctness_rate",
            verdict.correctness_rate.rate,
            verdict.correctness_rate.ci,
            params.l,
            verdict.passes.correctness,
        ),
        ReportRow::new(
            "completeness_rate",
            verdict.completeness_rate.rate,
            verdict.completeness_rate.ci,
            params.c,
            verdict.passes.completeness,
        ),
        ReportRow::new(
            "soundness_violation_max",
            verdict.soundness_violation_max.rate,
            verdict.soundness_violation_max.ci,
            params.s,
            verdict.passes.soundness,
        ),
    ];
    for (name, est) in &verdict.per_attacker {
        rows.push(ReportRow::new(
            format!("soundness_violation[{name}]"),
            est.rate,
            est.ci,
            params.s,
            est.rate <= params.s,
        ));
    }
    rows
}

// ---------------------------------------------------------------------------
// Learning lower bound
// ---------------------------------------------------------------------------

/// Frequency with which the midpoint ERM beats the risk threshold
/// `1/(2K)`, over fresh random ground truths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundExperiment {
    pub sample_counts: Vec<u64>,
    pub trials: u64,
    /// Maximum admissible frequency of beating the threshold.
    pub max_rate: f64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundVerdict {
    pub per_k: BTreeMap<u64, LowerBoundEntry>,
    pub max_rate: f64,
    pub trials: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowerBoundEntry {
    pub risk_threshold: f64,
    pub rate: f64,
    pub ci: (f64, f64),
    pub mean_risk: f64,
    pub pass: bool,
}

impl LowerBoundExperiment {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sample_counts.is_empty() || self.sample_counts.contains(&0) {
            return Err(ExperimentError::Config(
                "sample_counts must be nonempty and positive".into(),
            ));
        }
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be positive".into()));
        }
        Ok(())
    }

    pub fn run(&self, seed: Seed) -> Result<LowerBoundVerdict, ExperimentError> {
        self.validate()?;
        let mut per_k = BTreeMap::new();
        let mut pass = true;
        for (ki, &k) in self.sample_counts.iter().enumerate() {
            let threshold = 1.0 / (2.0 * k as f64);
            let risks: Vec<f64> = run_trials(self.threads, self.trials, |t| {
                let s = seed.child("lowerbound", (ki as u64) << 32 | t);
                let mut rng = s.stream("trial", 0);
                let truth = HalfplaneHypothesis::new(CirclePoint::uniform(&mut rng));
                let task = circle_task(truth.w);
                let mut budget = Budget::new(k, 0);
                let h = erm_halfplane_from_task(task.view(), k, &mut budget, &mut rng)
                    .expect("realizable draw");
                h.risk_against(&truth)
            });
            let hits = risks.iter().filter(|r| **r <= threshold).count() as u64;
            let rate = hits as f64 / self.trials as f64;
            let entry = LowerBoundEntry {
                risk_threshold: threshold,
                rate,
                ci: wilson_interval(hits, self.trials),
                mean_risk: risks.iter().sum::<f64>() / self.trials as f64,
                pass: rate <= self.max_rate,
            };
            pass &= entry.pass;
            per_k.insert(k, entry);
        }
        Ok(LowerBoundVerdict {
            per_k,
            max_rate: self.max_rate,
            trials: self.trials,
            pass,
        })
    }
}

/// Report rows for a lower-bound verdict.
pub fn lowerbound_report(verdict: &LowerBoundVerdict) -> Vec<ReportRow> {
    verdict
        .per_k
        .iter()
        .map(|(k, e)| {
            ReportRow::new(
                format!("risk_le_1_over_2k[K={k}]"),
                e.rate,
                e.ci,
                verdict.max_rate,
                e.pass,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Chernoff audit
// ---------------------------------------------------------------------------

/// Empirical tail frequencies against the closed-form bounds over a
/// parameter grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffAuditExperiment {
    pub deviations: Vec<f64>,
    pub sample_counts: Vec<u64>,
    pub success_probs: Vec<f64>,
    pub repetitions: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChernoffAuditVerdict {
    pub cells: Vec<ChernoffCell>,
    pub repetitions: u64,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChernoffCell {
    pub eps: f64,
    pub k: u64,
    pub p: f64,
    pub two_sided_freq: f64,
    pub two_sided_bound: f64,
    pub lower_freq: f64,
    pub lower_bound: f64,
    pub upper_freq: f64,
    pub upper_bound: f64,
    pub pass: bool,
}

impl ChernoffAuditExperiment {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.deviations.is_empty() || self.sample_counts.is_empty() || self.success_probs.is_empty()
        {
            return Err(ExperimentError::Config("empty audit grid".into()));
        }
        if self.repetitions == 0 {
            return Err(ExperimentError::Config("repetitions must be positive".into()));
        }
        Ok(())
    }

    pub fn run(&self, seed: Seed) -> Result<ChernoffAuditVerdict, ExperimentError> {
        self.validate()?;
        let mut cells = Vec::new();
        let mut violations = 0usize;
        let mut cell_idx = 0u64;
        for &eps in &self.deviations {
            for &k in &self.sample_counts {
                for &p in &self.success_probs {
                    let reps = self.repetitions;
                    let counts: Vec<(bool, bool, bool)> =
                        run_trials(self.threads, reps, |t| {
                            let s = seed.child("chernoff", cell_idx << 32 | t);
                            let mut rng = s.stream("rep", 0);
                            let dist = rand_distr::Binomial::new(k, p).expect("valid");
                            let sum = rand_distr::Distribution::sample(&dist, &mut rng);
                            let mean = sum as f64 / k as f64;
                            (
                                (mean - p).abs() > eps,
                                mean <= (1.0 - eps) * p,
                                mean > (1.0 + eps) * p,
                            )
                        });
                    let freq = |f: &dyn Fn(&(bool, bool, bool)) -> bool| {
                        counts.iter().filter(|c| f(c)).count() as f64 / reps as f64
                    };
                    let two_freq = freq(&|c| c.0);
                    let low_freq = freq(&|c| c.1);
                    let up_freq = freq(&|c| c.2);
                    let two_bound = chernoff_two_sided(eps, k).expect("grid in range");
                    let low_bound = chernoff_lower(eps, k, p).expect("grid in range");
                    let up_bound = chernoff_upper(eps, k, p).expect("grid in range");
                    let se = |f: f64| (f * (1.0 - f) / reps as f64).sqrt();
                    let ok = two_freq <= two_bound + 3.0 * se(two_freq)
                        && low_freq <= low_bound + 3.0 * se(low_freq)
                        && up_freq <= up_bound + 3.0 * se(up_freq);
                    if !ok {
                        violations += 1;
                    }
                    cells.push(ChernoffCell {
                        eps,
                        k,
                        p,
                        two_sided_freq: two_freq,
                        two_sided_bound: two_bound,
                        lower_freq: low_freq,
                        lower_bound: low_bound,
                        upper_freq: up_freq,
                        upper_bound: up_bound,
                        pass: ok,
                    });
                    cell_idx += 1;
                }
            }
        }
        Ok(ChernoffAuditVerdict {
            cells,
            repetitions: self.repetitions,
            violations,
            pass: violations == 0,
        })
    }
}

/// Report rows for a Chernoff audit.
pub fn chernoff_report(verdict: &ChernoffAuditVerdict) -> Vec<ReportRow> {
    verdict
        .cells
        .iter()
        .map(|c| {
            ReportRow::new(
                format!("tail(eps={},k={},p={})", c.eps, c.k, c.p),
                c.two_sided_freq.max(c.lower_freq).max(c.upper_freq),
                (0.0, 1.0),
                c.two_sided_bound,
                c.pass,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Trichotomy demo on a small d-ones task
// ---------------------------------------------------------------------------

/// Zero-sum game experiment over explicit candidate suites on a small
/// d-ones task: estimate the payoff matrix, solve it, sparsify both
/// optimal mixtures, test uniqueness for the attacker mixture, classify.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrichotomyExperiment {
    pub d: u64,
    pub epsilon: f64,
    pub q: usize,
    pub builder_samples: u64,
    pub adversary_samples: u64,
    /// Row candidates: `watermark-builder`, `honest-learner`, `lazy-learner`.
    pub rows: Vec<String>,
    /// Column candidates: `echo-b0`, `always-flag`, `fresh-learner-b0`,
    /// `flip-b0`, `fresh-learner-wrapped`.
    pub cols: Vec<String>,
    pub per_cell_trials: u64,
    pub uniqueness_trials: u64,
    pub sparsify_eta: f64,
    pub c: f64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

struct RowBuilder {
    task: DOnesTask,
    q: usize,
    n: u64,
}

impl WatermarkCandidate<u64, WatermarkClassifier> for RowBuilder {
    fn name(&self) -> &str {
        "watermark-builder"
    }

    fn produce(
        &self,
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<(WatermarkClassifier, Vec<u64>), PlayerError> {
        let out = watermark_build(&self.task, self.q, self.n, budget, rng)?;
        Ok((out.classifier, out.queries))
    }
}

struct RowHonest {
    task: DOnesTask,
    q: usize,
    n: u64,
}

impl WatermarkCandidate<u64, WatermarkClassifier> for RowHonest {
    fn name(&self) -> &str {
        "honest-learner"
    }

    fn produce(
        &self,
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<(WatermarkClassifier, Vec<u64>), PlayerError> {
        // a zero-flip watermark build is exactly a consistent learner
        let out = watermark_build(&self.task, 0, self.n, budget, rng)?;
        budget.charge(self.q as u64, 0)?;
        let queries = (0..self.q)
            .map(|_| rng.random_range(0..self.task.domain_size()))
            .collect();
        Ok((out.classifier, queries))
    }
}

struct RowLazy {
    task: DOnesTask,
    q: usize,
}

impl WatermarkCandidate<u64, WatermarkClassifier> for RowLazy {
    fn name(&self) -> &str {
        "lazy-learner"
    }

    fn produce(
        &self,
        _view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<(WatermarkClassifier, Vec<u64>), PlayerError> {
        // barely trains: its classifier misses almost every positive
        let out = watermark_build(&self.task, 0, 16, budget, rng)?;
        budget.charge(self.q as u64, 0)?;
        let queries = (0..self.q)
            .map(|_| rng.random_range(0..self.task.domain_size()))
            .collect();
        Ok((out.classifier, queries))
    }
}

struct ColRemovalAdapter {
    name: String,
    inner: Box<dyn crate::players::RemovalStrategy<u64, WatermarkClassifier>>,
    bit: bool,
    /// Wrap the inner player's bit: flag whenever the answers stray from
    /// the published classifier on more than 3εq positions.
    nash_wrapped: Option<f64>,
}

impl RemovalCandidate<u64, WatermarkClassifier> for ColRemovalAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn respond(
        &self,
        classifier: &WatermarkClassifier,
        queries: &[u64],
        view: TaskView<'_, u64>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<(Vec<Label>, bool), PlayerError> {
        let y = self.inner.answer(classifier, queries, view, budget, rng)?;
        let bit = match self.nash_wrapped {
            None => self.bit,
            Some(eps) => {
                let fx: Vec<Label> = queries.iter().map(|x| classifier.predict(x)).collect();
                crate::players::rejectron::defense_nash_wrapper(
                    &fx,
                    &y,
                    self.bit,
                    eps,
                    queries.len(),
                )?
            }
        };
        Ok((y, bit))
    }
}

impl TrichotomyExperiment {
    fn row_candidate(
        &self,
        name: &str,
        task: &DOnesTask,
    ) -> Result<Box<dyn WatermarkCandidate<u64, WatermarkClassifier>>, ExperimentError> {
        match name {
            "watermark-builder" => Ok(Box::new(RowBuilder {
                task: task.clone(),
                q: self.q,
                n: self.builder_samples,
            })),
            "honest-learner" => Ok(Box::new(RowHonest {
                task: task.clone(),
                q: self.q,
                n: self.builder_samples,
            })),
            "lazy-learner" => Ok(Box::new(RowLazy {
                task: task.clone(),
                q: self.q,
            })),
            _ => Err(ExperimentError::Config(format!(
                "unknown row candidate: {name}"
            ))),
        }
    }

    fn col_candidate(
        &self,
        name: &str,
    ) -> Result<Box<dyn RemovalCandidate<u64, WatermarkClassifier>>, ExperimentError> {
        let adapter =
            |n: &str, bit: bool, wrapped: Option<f64>| -> Result<ColRemovalAdapter, ExperimentError> {
                Ok(ColRemovalAdapter {
                    name: name.to_string(),
                    inner: registry::watermark_remover(n, self.adversary_samples)
                        .map_err(|e| ExperimentError::Config(e.to_string()))?,
                    bit,
                    nash_wrapped: wrapped,
                })
            };
        match name {
            "echo-b0" => Ok(Box::new(adapter("echo", false, None)?)),
            "always-flag" => Ok(Box::new(adapter("echo", true, None)?)),
            "fresh-learner-b0" => Ok(Box::new(adapter("fresh-learner", false, None)?)),
            "flip-b0" => Ok(Box::new(adapter("flip@0.5", false, None)?)),
            "fresh-learner-wrapped" => {
                Ok(Box::new(adapter("fresh-learner", false, Some(self.epsilon))?))
            }
            _ => Err(ExperimentError::Config(format!(
                "unknown column candidate: {name}"
            ))),
        }
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams {
            epsilon: self.epsilon,
            q: self.q,
            attacker_budget: Budget::new(self.builder_samples + self.q as u64 + 16, 1 << 22),
            defender_budget: Budget::new(self.adversary_samples, 1 << 22),
            l: 0.5,
            c: self.c,
            s: self.c / 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.rows.is_empty() || self.cols.is_empty() {
            return Err(ExperimentError::Config("empty candidate suite".into()));
        }
        let (task, _) = dones_task(self.d.max(1), Seed(0));
        for n in &self.rows {
            self.row_candidate(n, &task)?;
        }
        for n in &self.cols {
            self.col_candidate(n)?;
        }
        if !(self.sparsify_eta > 0.0 && self.sparsify_eta < 1.0) {
            return Err(ExperimentError::Config("sparsify_eta out of (0,1)".into()));
        }
        self.params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn run(&self, seed: Seed) -> Result<TrichotomyReport, ExperimentError> {
        self.validate()?;
        let (task, _) = dones_task(self.d, seed.child("trichotomy-task", 0));
        let rows: Vec<Box<dyn WatermarkCandidate<u64, WatermarkClassifier>>> = self
            .rows
            .iter()
            .map(|n| self.row_candidate(n, &task))
            .collect::<Result<_, _>>()?;
        let cols: Vec<Box<dyn RemovalCandidate<u64, WatermarkClassifier>>> = self
            .cols
            .iter()
            .map(|n| self.col_candidate(n))
            .collect::<Result<_, _>>()?;
        let params = self.params();
        let risk_task = task.clone();
        let risk = move |f: &WatermarkClassifier| f.exact_risk(&risk_task);
        let matrix = estimate_payoff_matrix(
            &rows,
            &cols,
            task.task(),
            &risk,
            &params,
            self.per_cell_trials,
            seed.child("payoff-matrix", 0),
        )?;
        let solution = solve_nash(&matrix)?;
        let row_sparse = sparsify(
            &matrix,
            &solution.row_strategy,
            self.sparsify_eta,
            Side::Row,
            seed.child("sparsify-row", 0),
        )?;
        let col_sparse = sparsify(
            &matrix,
            &solution.column_strategy,
            self.sparsify_eta,
            Side::Column,
            seed.child("sparsify-col", 0),
        )?;

        // uniqueness of the Nash attacker mixture: per trial sample a row
        // candidate from the mixture, play the honest-query uniqueness test
        let prover = DOnesUniquenessProver {
            task: task.clone(),
            n: self.builder_samples,
        };
        let mut unique_hits = 0u64;
        for t in 0..self.uniqueness_trials {
            let s = seed.child("uniqueness", t);
            let mut rng = s.stream("draw", 0);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = 0usize;
            for (i, p) in solution.row_strategy.iter().enumerate() {
                acc += p;
                if u <= acc {
                    pick = i;
                    break;
                }
            }
            let mut budget = params.attacker_budget.fresh();
            if rows[pick]
                .produce(task.task().view(), &mut budget, &mut rng)
                .is_err()
            {
                continue;
            }
            let honest: Vec<u64> = (0..self.q)
                .map(|_| task.task().sample(&mut rng).x)
                .collect();
            let mut pbudget = params.attacker_budget.fresh();
            if let Ok(answers) =
                prover.answer(&honest, task.task().view(), &mut pbudget, &mut rng)
            {
                let err = crate::domain::empirical_error(task.task(), &honest, &answers)
                    .expect("lengths match");
                if err <= 2.0 * self.epsilon {
                    unique_hits += 1;
                }
            }
        }
        let uniqueness_rate = unique_hits as f64 / self.uniqueness_trials.max(1) as f64;
        let uniqueness_holds = uniqueness_rate >= self.c;
        let verdict = classify_trichotomy(solution.value.clamp(0.0, 1.0), uniqueness_holds);

        let mut strategy_support = BTreeMap::new();
        for (name, p) in matrix.row_names.iter().zip(&solution.row_strategy) {
            strategy_support.insert(format!("row:{name}"), *p);
        }
        for (name, p) in matrix.col_names.iter().zip(&solution.column_strategy) {
            strategy_support.insert(format!("col:{name}"), *p);
        }
        Ok(TrichotomyReport {
            matrix,
            solution,
            row_sparse,
            col_sparse,
            uniqueness_holds,
            verdict,
            per_cell_trials: self.per_cell_trials,
            strategy_support,
        })
    }
}

/// Report rows for a trichotomy report.
pub fn trichotomy_report_rows(report: &TrichotomyReport) -> Vec<ReportRow> {
    vec![
        ReportRow::new(
            "game_value",
            report.solution.value,
            (report.solution.value, report.solution.value),
            crate::gametheory::DEFENSE_VALUE_THRESHOLD,
            true,
        ),
        ReportRow::new(
            "duality_gap",
            report.solution.duality_gap,
            (0.0, 0.0),
            1e-6,
            report.solution.duality_gap <= 1e-6,
        ),
        ReportRow::new(
            "uniqueness_holds",
            report.uniqueness_holds as u8 as f64,
            (0.0, 1.0),
            0.5,
            true,
        ),
        ReportRow::new(
            format!("verdict={}", report.verdict),
            match report.verdict {
                SchemeKind::Defense => 2.0,
                SchemeKind::Watermark => 1.0,
                SchemeKind::TransfAttack => 0.0,
            },
            (0.0, 2.0),
            0.0,
            true,
        ),
    ]
}

// ---------------------------------------------------------------------------
// EFID pair from the criterion-1 attack
// ---------------------------------------------------------------------------

/// Build and verify the EFID pair induced by the crypto-task attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfidExperiment {
    pub epsilon: f64,
    pub lambda: u32,
    /// Budget of the bounded learner the certifying distinguisher runs
    /// (the same t that transferability was measured against).
    pub learner_samples: u64,
    pub bounded_distinguishers: Vec<String>,
    pub calibration_trials: u64,
    pub verification_trials: u64,
    pub c: f64,
    pub s: f64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl EfidExperiment {
    pub fn params(&self) -> ProtocolParams {
        let q = attack_query_count(self.epsilon);
        ProtocolParams {
            epsilon: self.epsilon,
            q,
            attacker_budget: Budget::new(
                attack_sample_count(self.epsilon),
                (q as u64) * 128 + 4096,
            ),
            defender_budget: Budget::new(self.learner_samples, (q as u64) * 4096 + 65_536),
            l: 0.9,
            c: self.c,
            s: self.s,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.24) {
            return Err(ExperimentError::Config(format!(
                "epsilon out of range: {}",
                self.epsilon
            )));
        }
        for n in &self.bounded_distinguishers {
            registry::crypto_distinguisher(n, 1, 0.05)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if self.calibration_trials == 0 || self.verification_trials == 0 {
            return Err(ExperimentError::Config("trials must be positive".into()));
        }
        self.params()
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn run(&self, seed: Seed) -> Result<crate::efid::EfidReport, ExperimentError> {
        self.validate()?;
        let eps = self.epsilon;
        let lambda = self.lambda;
        let learner_samples = self.learner_samples;
        let dist_names = self.bounded_distinguishers.clone();
        let band = attack_band_halfwidth(eps);
        let make = move |s: Seed| {
            let mut wrng = s.stream("instance-w", 0);
            let w = CirclePoint::uniform(&mut wrng);
            let crypto = crypto_task(lambda, w, s.child("instance-keys", 0));
            let truth = HalfplaneHypothesis::new(w);
            let learner: Box<dyn QueryAnswerer<CryptoSample>> =
                registry::crypto_defender("erm-halfplane", &crypto, learner_samples)
                    .expect("validated");
            let bounded_suite = dist_names
                .iter()
                .map(|n| {
                    registry::crypto_distinguisher(n, learner_samples, band).expect("validated")
                })
                .collect();
            let risk_crypto = crypto.clone();
            let task = crypto.task().clone();
            let risk_task = task.clone();
            crate::efid::EfidInstance {
                task,
                attacker: Box::new(CryptoAttacker { crypto, eps }),
                learner,
                learner_risk_ok: Box::new(move |rng| {
                    // fit the bounded learner afresh and check err(f) ≤ ε
                    // against the known ground truth
                    let mut budget = Budget::new(learner_samples, u64::MAX);
                    let view = risk_task.view();
                    let samples = match view.draw_many(learner_samples, &mut budget, rng) {
                        Ok(s) => s,
                        Err(_) => return false,
                    };
                    let clear = crate::players::halfplane::clear_circle_samples(
                        &samples,
                        |x: &CryptoSample| match x.payload {
                            crate::tasks::crypto::Payload::Clear(pt) => Some(pt),
                            crate::tasks::crypto::Payload::Cipher(_) => None,
                        },
                    );
                    let h = if clear.is_empty() {
                        HalfplaneHypothesis::new(CirclePoint::uniform(rng))
                    } else {
                        match crate::players::halfplane::erm_halfplane(&clear) {
                            Ok(h) => h,
                            Err(_) => return false,
                        }
                    };
                    let _ = &risk_crypto;
                    h.risk_against(&truth) <= eps
                }),
                bounded_suite,
            }
        };
        let pair = crate::efid::build_efid(
            Box::new(make),
            self.params(),
            self.calibration_trials,
            seed.child("efid-build", 0),
            self.threads,
        )?;
        Ok(crate::efid::verify_efid(
            &pair,
            self.verification_trials,
            seed.child("efid-verify", 0),
            self.threads,
        )?)
    }
}

/// Report rows for an EFID report.
pub fn efid_report_rows(report: &crate::efid::EfidReport) -> Vec<ReportRow> {
    let mut rows = vec![
        ReportRow::new(
            "tv_lower_estimate",
            report.tv_lower_estimate,
            (
                report.tv_lower_estimate - 3.0 * report.tv_standard_error,
                report.tv_lower_estimate + 3.0 * report.tv_standard_error,
            ),
            report.eta_target,
            report.statistical_distance_ok,
        ),
        ReportRow::new(
            "measured_p",
            report.measured_p,
            (report.measured_p, report.measured_p),
            0.0,
            true,
        ),
        ReportRow::new(
            "measured_c",
            report.measured_c,
            (report.measured_c, report.measured_c),
            0.0,
            true,
        ),
    ];
    for (name, est) in &report.bounded_advantages {
        rows.push(ReportRow::new(
            format!("bounded_advantage[{name}]"),
            est.advantage,
            est.interval,
            0.0,
            est.consistent_with_zero() || est.advantage <= 0.0,
        ));
    }
    rows
}
