//! Game runners: execute the three interactive protocols under budget
//! enforcement and produce statistical verdicts for every defined property.
//!
//! Universal quantifiers over provers become maxima (or minima) over the
//! configured strategy suite; every verdict records the suite fingerprint it
//! was measured against. The detection-bit convention is `b = 1` =
//! "attacked" throughout. A strategy that exceeds its budget inside a trial
//! loses that trial; it never contributes a success to its own side.

use std::collections::BTreeMap;

use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    empirical_error, Budget, Label, LearningTask, ProtocolParams, TaskView,
};
use crate::parallel::run_trials;
use crate::players::{
    ClassifierDistinguisher, DefenseAttacker, PlayerError, QueryAnswerer, RemovalStrategy,
    TupleDistinguisher,
};
use crate::rng::Seed;
use crate::stats::{wilson_interval, AdvantageEstimate};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// Estimated probability of one property with its Wilson interval and the
/// threshold it is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyEstimate {
    pub rate: f64,
    pub ci: (f64, f64),
    pub trials: u64,
}

impl PropertyEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        PropertyEstimate {
            rate: successes as f64 / trials.max(1) as f64,
            ci: wilson_interval(successes, trials),
            trials,
        }
    }
}

/// One CSV transcript row (columns: trial, strategy, err, b, seed).
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptRow {
    pub trial: u64,
    pub strategy: String,
    pub err: f64,
    pub b: Option<u8>,
    pub seed: u64,
}

/// Render transcript rows as CSV.
pub fn transcript_csv(rows: &[TranscriptRow]) -> String {
    let mut out = String::from("trial,strategy,err,b,seed\n");
    for r in rows {
        let b = r.b.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.6},{},{}\n",
            r.trial, r.strategy, r.err, b, r.seed
        ));
    }
    out
}

fn fingerprint(names: &[String]) -> String {
    // order-insensitive fnv over the sorted names
    let mut sorted = names.to_vec();
    sorted.sort();
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for name in &sorted {
        for b in name.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

// ---------------------------------------------------------------------------
// Transferable attack game
// ---------------------------------------------------------------------------

/// Attacker side of the transferable-attack game.
pub trait AttackCrafter<X>: Send + Sync {
    fn name(&self) -> &str;

    fn craft(
        &self,
        view: TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Vec<X>, PlayerError>;
}

/// One trial's bound game: a fresh task instance plus the strategies
/// playing on it.
pub struct TransfAttackInstance<X> {
    pub task: LearningTask<X>,
    pub attacker: Box<dyn AttackCrafter<X>>,
    pub defenders: Vec<Box<dyn QueryAnswerer<X>>>,
    pub distinguishers: Vec<Box<dyn TupleDistinguisher<X>>>,
}

/// Per-property verdict of the transferable-attack game.
#[derive(Debug, Clone, Serialize)]
pub struct TransfAttackVerdict {
    /// `min` over the defender suite of `P[err(x, y) > 2ε]`.
    pub transferability_min: PropertyEstimate,
    /// `max` over the distinguisher suite of the measured advantage.
    pub undetectability_advantage: AdvantageEstimate,
    pub per_defender: BTreeMap<String, PropertyEstimate>,
    pub per_distinguisher: BTreeMap<String, AdvantageEstimate>,
    pub passes: TransfAttackPasses,
    pub suite_fingerprint: String,
    pub trials: u64,
    pub undetectability_rounds: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransfAttackPasses {
    /// transferability_min ≥ c
    pub transferability: bool,
    /// max advantage ≤ s/2
    pub undetectability: bool,
    pub all: bool,
}

/// Recompute the pass flags from rates and parameters.
pub fn transfattack_passes(
    transferability_min: f64,
    max_advantage: f64,
    params: &ProtocolParams,
) -> TransfAttackPasses {
    let transferability = transferability_min >= params.c;
    let undetectability = max_advantage <= params.s / 2.0;
    TransfAttackPasses {
        transferability,
        undetectability,
        all: transferability && undetectability,
    }
}

/// Play the transferable-attack game.
///
/// `make` builds a fresh bound instance from a per-trial seed; trials and
/// undetectability rounds use disjoint seed domains.
pub fn run_transfattack_game<X: Clone + Send>(
    make: &(dyn Fn(Seed) -> TransfAttackInstance<X> + Sync),
    params: &ProtocolParams,
    trials: u64,
    undetectability_rounds: u64,
    seed: Seed,
    threads: usize,
    transcripts: Option<&mut Vec<TranscriptRow>>,
) -> Result<TransfAttackVerdict, ProtocolError> {
    params.validate()?;
    if trials == 0 {
        return Err(ProtocolError::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }

    // defender names from a probe instance; also the suite fingerprint
    let probe = make(seed.child("ta-probe", 0));
    let defender_names: Vec<String> = probe
        .defenders
        .iter()
        .map(|d| d.name().to_string())
        .collect();
    let distinguisher_names: Vec<String> = probe
        .distinguishers
        .iter()
        .map(|d| d.name().to_string())
        .collect();
    if defender_names.is_empty() {
        return Err(ProtocolError::InvalidConfig("empty defender suite".into()));
    }
    drop(probe);

    struct TrialOutcome {
        // per defender: Some(err) if the attack ran, None if attacker lost
        errs: Vec<Option<f64>>,
        seed: u64,
    }

    let outcomes: Vec<TrialOutcome> = run_trials(threads, trials, |t| {
        let trial_seed = seed.child("ta-trial", t);
        let instance = make(trial_seed);
        let mut arng = trial_seed.stream("attacker", 0);
        let mut attacker_budget = params.attacker_budget.fresh();
        let view = instance.task.view();
        let queries = instance
            .attacker
            .craft(view, &mut attacker_budget, &mut arng);
        let errs = match queries {
            Err(_) => vec![None; instance.defenders.len()],
            Ok(queries) => instance
                .defenders
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let mut drng = trial_seed.stream("defender", i as u64);
                    let mut budget = params.defender_budget.fresh();
                    match d.answer(&queries, view, &mut budget, &mut drng) {
                        // defender over budget = defender loses the trial
                        Err(_) => Some(1.0),
                        Ok(answers) => {
                            Some(empirical_error(&instance.task, &queries, &answers)
                                .expect("query/answer lengths match"))
                        }
                    }
                })
                .collect(),
        };
        TrialOutcome {
            errs,
            seed: trial_seed.0,
        }
    });

    let mut per_defender = BTreeMap::new();
    let mut transferability_min: Option<(String, PropertyEstimate)> = None;
    for (i, name) in defender_names.iter().enumerate() {
        let successes = outcomes
            .iter()
            .filter(|o| matches!(o.errs[i], Some(e) if e > 2.0 * params.epsilon))
            .count() as u64;
        let est = PropertyEstimate::from_counts(successes, trials);
        if transferability_min
            .as_ref()
            .map(|(_, best)| est.rate < best.rate)
            .unwrap_or(true)
        {
            transferability_min = Some((name.clone(), est));
        }
        per_defender.insert(name.clone(), est);
    }
    if let Some(rows) = transcripts {
        for (t, o) in outcomes.iter().enumerate() {
            for (i, err) in o.errs.iter().enumerate() {
                rows.push(TranscriptRow {
                    trial: t as u64,
                    strategy: defender_names[i].clone(),
                    err: err.unwrap_or(f64::NAN),
                    b: None,
                    seed: o.seed,
                });
            }
        }
    }

    // undetectability rounds: fresh instance per round, b ~ U{0,1},
    // x := attack (b = 1) or D^q (b = 0)
    let wins: Vec<Vec<bool>> = run_trials(threads, undetectability_rounds, |r| {
        let round_seed = seed.child("ta-round", r);
        let instance = make(round_seed);
        let mut rng = round_seed.stream("round", 0);
        let b = rand::Rng::random::<bool>(&mut rng) as u8;
        let tuple: Option<Vec<X>> = if b == 1 {
            let mut budget = params.attacker_budget.fresh();
            instance
                .attacker
                .craft(instance.task.view(), &mut budget, &mut rng)
                .ok()
        } else {
            Some((0..params.q).map(|_| instance.task.sample(&mut rng).x).collect())
        };
        match tuple {
            None => vec![false; instance.distinguishers.len()],
            Some(tuple) => instance
                .distinguishers
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let mut drng = round_seed.stream("distinguisher", i as u64);
                    let mut budget = params.defender_budget.fresh();
                    match d.guess(&tuple, instance.task.view(), &mut budget, &mut drng) {
                        Ok(guess) => guess == b,
                        // over budget: the distinguisher fails the round
                        Err(_) => false,
                    }
                })
                .collect(),
        }
    });

    let mut per_distinguisher = BTreeMap::new();
    let mut max_adv: Option<AdvantageEstimate> = None;
    for (i, name) in distinguisher_names.iter().enumerate() {
        let won = wins.iter().filter(|w| w[i]).count() as u64;
        let est = AdvantageEstimate::from_wins(won, undetectability_rounds);
        if max_adv.map(|m| est.advantage > m.advantage).unwrap_or(true) {
            max_adv = Some(est);
        }
        per_distinguisher.insert(name.clone(), est);
    }
    let max_adv = max_adv.unwrap_or(AdvantageEstimate::from_wins(0, 0));

    let (_, tmin) = transferability_min.expect("nonempty defender suite");
    let passes = transfattack_passes(tmin.rate, max_adv.advantage, params);
    let mut names = defender_names.clone();
    names.extend(distinguisher_names.iter().cloned());
    Ok(TransfAttackVerdict {
        transferability_min: tmin,
        undetectability_advantage: max_adv,
        per_defender,
        per_distinguisher,
        passes,
        suite_fingerprint: fingerprint(&names),
        trials,
        undetectability_rounds,
    })
}

// ---------------------------------------------------------------------------
// Watermark game
// ---------------------------------------------------------------------------

/// Builder side of the watermark game.
pub trait WatermarkScheme<X, F>: Send + Sync {
    fn build(
        &self,
        view: TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<BuiltWatermark<X, F>, PlayerError>;
}

pub struct BuiltWatermark<X, F> {
    pub classifier: F,
    pub queries: Vec<X>,
    pub is_planted: bool,
}

/// One trial's bound watermark game.
pub struct WatermarkInstance<X, F> {
    pub task: LearningTask<X>,
    pub builder: Box<dyn WatermarkScheme<X, F>>,
    pub removers: Vec<Box<dyn RemovalStrategy<X, F>>>,
    pub distinguishers: Vec<Box<dyn ClassifierDistinguisher<X, F>>>,
    pub prover: Box<dyn QueryAnswerer<X>>,
    /// Harness-side risk functional for the published classifier.
    pub risk: Box<dyn Fn(&F) -> f64 + Send + Sync>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WatermarkVerdict {
    /// `P[err(f) ≤ correctness threshold]`; build failures count as
    /// failures here.
    pub correctness_rate: PropertyEstimate,
    /// Uniqueness prover success `P[err(x, y) ≤ 2ε]` on honest queries.
    pub uniqueness_rate: PropertyEstimate,
    /// `max` over the remover suite of `P[err(x, y) ≤ 2ε]` on the game's
    /// queries.
    pub unremovability_max_success: PropertyEstimate,
    /// `max` over the distinguisher suite of the measured advantage.
    pub undetectability_advantage: AdvantageEstimate,
    pub per_remover: BTreeMap<String, PropertyEstimate>,
    pub per_distinguisher: BTreeMap<String, AdvantageEstimate>,
    pub passes: WatermarkPasses,
    pub suite_fingerprint: String,
    pub trials: u64,
    pub undetectability_rounds: u64,
    pub correctness_threshold: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WatermarkPasses {
    /// correctness_rate ≥ l
    pub correctness: bool,
    /// uniqueness_rate ≥ c
    pub uniqueness: bool,
    /// max removal success ≤ s
    pub unremovability: bool,
    /// max advantage ≤ s/2 (or the explicit override)
    pub undetectability: bool,
    pub all: bool,
}

/// Recompute watermark pass flags from rates and parameters.
pub fn watermark_passes(
    correctness: f64,
    uniqueness: f64,
    max_removal: f64,
    max_advantage: f64,
    params: &ProtocolParams,
    advantage_threshold: Option<f64>,
) -> WatermarkPasses {
    let adv_thr = advantage_threshold.unwrap_or(params.s / 2.0);
    let c_ok = correctness >= params.l;
    let u_ok = uniqueness >= params.c;
    let r_ok = max_removal <= params.s;
    let d_ok = max_advantage <= adv_thr;
    WatermarkPasses {
        correctness: c_ok,
        uniqueness: u_ok,
        unremovability: r_ok,
        undetectability: d_ok,
        all: c_ok && u_ok && r_ok && d_ok,
    }
}

/// Extra knobs of the watermark game that are scale-dependent.
#[derive(Debug, Clone, Copy)]
pub struct WatermarkGameConfig {
    pub params: ProtocolParams,
    pub trials: u64,
    pub undetectability_rounds: u64,
    /// Threshold on `err(f)` for correctness (`ε + q/N` at watermark scale).
    pub correctness_threshold: f64,
    /// Explicit undetectability advantage threshold; defaults to `s/2`.
    pub advantage_threshold: Option<f64>,
    pub threads: usize,
}

/// Play the watermark game.
pub fn run_watermark_game<X: Clone + Send, F: Send>(
    make: &(dyn Fn(Seed) -> WatermarkInstance<X, F> + Sync),
    config: &WatermarkGameConfig,
    seed: Seed,
    transcripts: Option<&mut Vec<TranscriptRow>>,
) -> Result<WatermarkVerdict, ProtocolError> {
    let params = &config.params;
    params.validate()?;
    if config.trials == 0 {
        return Err(ProtocolError::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }
    let probe = make(seed.child("wm-probe", 0));
    let remover_names: Vec<String> =
        probe.removers.iter().map(|r| r.name().to_string()).collect();
    let distinguisher_names: Vec<String> = probe
        .distinguishers
        .iter()
        .map(|d| d.name().to_string())
        .collect();
    if remover_names.is_empty() {
        return Err(ProtocolError::InvalidConfig("empty remover suite".into()));
    }
    drop(probe);

    struct TrialOutcome {
        built: bool,
        correct: bool,
        unique: Option<bool>,
        removal: Vec<Option<bool>>, // per remover: Some(success)
        removal_errs: Vec<f64>,
        seed: u64,
    }

    let outcomes: Vec<TrialOutcome> = run_trials(config.threads, config.trials, |t| {
        let trial_seed = seed.child("wm-trial", t);
        let instance = make(trial_seed);
        let mut brng = trial_seed.stream("builder", 0);
        let mut builder_budget = params.attacker_budget.fresh();
        let view = instance.task.view();
        let built = instance.builder.build(view, &mut builder_budget, &mut brng);
        let n_removers = instance.removers.len();
        match built {
            Err(_) => TrialOutcome {
                built: false,
                correct: false,
                unique: None,
                removal: vec![None; n_removers],
                removal_errs: vec![f64::NAN; n_removers],
                seed: trial_seed.0,
            },
            Ok(bw) => {
                let correct = (instance.risk)(&bw.classifier) <= config.correctness_threshold;
                // uniqueness on an honest query tuple
                let mut urng = trial_seed.stream("uniqueness", 0);
                let honest: Vec<X> = (0..params.q)
                    .map(|_| instance.task.sample(&mut urng).x)
                    .collect();
                let mut prover_budget = params.attacker_budget.fresh();
                let unique = match instance
                    .prover
                    .answer(&honest, view, &mut prover_budget, &mut urng)
                {
                    Err(_) => Some(false),
                    Ok(answers) => Some(
                        empirical_error(&instance.task, &honest, &answers)
                            .expect("lengths match")
                            <= 2.0 * params.epsilon,
                    ),
                };
                let mut removal = Vec::with_capacity(n_removers);
                let mut removal_errs = Vec::with_capacity(n_removers);
                for (i, r) in instance.removers.iter().enumerate() {
                    let mut rrng = trial_seed.stream("remover", i as u64);
                    let mut budget = params.defender_budget.fresh();
                    match r.answer(&bw.classifier, &bw.queries, view, &mut budget, &mut rrng)
                    {
                        // over budget: the remover fails (high error)
                        Err(_) => {
                            removal.push(Some(false));
                            removal_errs.push(f64::NAN);
                        }
                        Ok(answers) => {
                            let err =
                                empirical_error(&instance.task, &bw.queries, &answers)
                                    .expect("lengths match");
                            removal.push(Some(err <= 2.0 * params.epsilon));
                            removal_errs.push(err);
                        }
                    }
                }
                TrialOutcome {
                    built: true,
                    correct,
                    unique,
                    removal,
                    removal_errs,
                    seed: trial_seed.0,
                }
            }
        }
    });

    let trials = config.trials;
    let correct = outcomes.iter().filter(|o| o.correct).count() as u64;
    let correctness_rate = PropertyEstimate::from_counts(correct, trials);

    let unique_trials = outcomes.iter().filter(|o| o.unique.is_some()).count() as u64;
    let unique = outcomes
        .iter()
        .filter(|o| o.unique == Some(true))
        .count() as u64;
    let uniqueness_rate = PropertyEstimate::from_counts(unique, unique_trials);

    let built_trials = outcomes.iter().filter(|o| o.built).count() as u64;
    let mut per_remover = BTreeMap::new();
    let mut max_removal: Option<PropertyEstimate> = None;
    for (i, name) in remover_names.iter().enumerate() {
        let successes = outcomes
            .iter()
            .filter(|o| o.removal[i] == Some(true))
            .count() as u64;
        let est = PropertyEstimate::from_counts(successes, built_trials);
        if max_removal.map(|m| est.rate > m.rate).unwrap_or(true) {
            max_removal = Some(est);
        }
        per_remover.insert(name.clone(), est);
    }
    let max_removal = max_removal.expect("nonempty remover suite");

    if let Some(rows) = transcripts {
        for (t, o) in outcomes.iter().enumerate() {
            for (i, err) in o.removal_errs.iter().enumerate() {
                rows.push(TranscriptRow {
                    trial: t as u64,
                    strategy: remover_names[i].clone(),
                    err: *err,
                    b: None,
                    seed: o.seed,
                });
            }
        }
    }

    // undetectability rounds
    let wins: Vec<Vec<bool>> = run_trials(config.threads, config.undetectability_rounds, |r| {
        let round_seed = seed.child("wm-round", r);
        let instance = make(round_seed);
        let mut rng = round_seed.stream("round", 0);
        let mut builder_budget = params.attacker_budget.fresh();
        let built = instance
            .builder
            .build(instance.task.view(), &mut builder_budget, &mut rng);
        match built {
            Err(_) => vec![false; instance.distinguishers.len()],
            Ok(bw) => {
                let b = rand::Rng::random::<bool>(&mut rng) as u8;
                let tuple: Vec<X> = if b == 1 {
                    bw.queries.clone()
                } else {
                    (0..params.q).map(|_| instance.task.sample(&mut rng).x).collect()
                };
                instance
                    .distinguishers
                    .iter()
                    .enumerate()
                    .map(|(i, d)| {
                        let mut drng = round_seed.stream("distinguisher", i as u64);
                        let mut budget = params.defender_budget.fresh();
                        match d.guess(
                            &bw.classifier,
                            &tuple,
                            instance.task.view(),
                            &mut budget,
                            &mut drng,
                        ) {
                            Ok(guess) => guess == b,
                            Err(_) => false,
                        }
                    })
                    .collect()
            }
        }
    });

    let mut per_distinguisher = BTreeMap::new();
    let mut max_adv: Option<AdvantageEstimate> = None;
    for (i, name) in distinguisher_names.iter().enumerate() {
        let won = wins.iter().filter(|w| w[i]).count() as u64;
        let est = AdvantageEstimate::from_wins(won, config.undetectability_rounds);
        if max_adv.map(|m| est.advantage > m.advantage).unwrap_or(true) {
            max_adv = Some(est);
        }
        per_distinguisher.insert(name.clone(), est);
    }
    let max_adv = max_adv.unwrap_or(AdvantageEstimate::from_wins(0, 0));

    let passes = watermark_passes(
        correctness_rate.rate,
        uniqueness_rate.rate,
        max_removal.rate,
        max_adv.advantage,
        params,
        config.advantage_threshold,
    );
    let mut names = remover_names.clone();
    names.extend(distinguisher_names.iter().cloned());
    Ok(WatermarkVerdict {
        correctness_rate,
        uniqueness_rate,
        unremovability_max_success: max_removal,
        undetectability_advantage: max_adv,
        per_remover,
        per_distinguisher,
        passes,
        suite_fingerprint: fingerprint(&names),
        trials,
        undetectability_rounds: config.undetectability_rounds,
        correctness_threshold: config.correctness_threshold,
    })
}

// ---------------------------------------------------------------------------
// Defense game
// ---------------------------------------------------------------------------

/// Defender side of the defense game: fit once, then detect per query set.
pub trait DefensePlayer<X, H>: Send + Sync {
    fn fit(
        &self,
        view: TaskView<'_, X>,
        budget: &mut Budget,
        rng: &mut ChaCha12Rng,
    ) -> Result<Box<dyn FittedDefensePlayer<X, H>>, PlayerError>;
}

pub trait FittedDefensePlayer<X, H> {
    fn classifier(&self) -> &H;

    fn classifier_answers(&self, queries: &[X]) -> Vec<Label>;

    /// Detection bit: 1 = attacked.
    fn detect(&self, queries: &[X], rng: &mut ChaCha12Rng) -> Result<bool, PlayerError>;
}

/// One trial's bound defense game.
pub struct DefenseInstance<X, H> {
    pub task: LearningTask<X>,
    pub defender: Box<dyn DefensePlayer<X, H>>,
    pub attackers: Vec<Box<dyn DefenseAttacker<X, H>>>,
    pub risk: Box<dyn Fn(&H) -> f64 + Send + Sync>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefenseVerdict {
    /// `P[err(f) ≤ ε]` over honest trials.
    pub correctness_rate: PropertyEstimate,
    /// `P[b = 0]` on honest query tuples.
    pub completeness_rate: PropertyEstimate,
    /// `max` over the attacker suite of
    /// `P[err(x, f(x)) > 7ε and b = 0]`.
    pub soundness_violation_max: PropertyEstimate,
    pub per_attacker: BTreeMap<String, PropertyEstimate>,
    pub passes: DefensePasses,
    pub suite_fingerprint: String,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DefensePasses {
    /// correctness_rate ≥ l
    pub correctness: bool,
    /// completeness_rate ≥ c
    pub completeness: bool,
    /// max soundness violation ≤ s
    pub soundness: bool,
    pub all: bool,
}

/// Recompute defense pass flags from rates and parameters.
pub fn defense_passes(
    correctness: f64,
    completeness: f64,
    max_violation: f64,
    params: &ProtocolParams,
) -> DefensePasses {
    let c_ok = correctness >= params.l;
    let comp_ok = completeness >= params.c;
    let s_ok = max_violation <= params.s;
    DefensePasses {
        correctness: c_ok,
        completeness: comp_ok,
        soundness: s_ok,
        all: c_ok && comp_ok && s_ok,
    }
}

/// Play the defense game: every trial fits the defender, runs one honest
/// round (completeness, correctness) and one round against each attacker
/// (soundness).
pub fn run_defense_game<X: Clone + Send, H: Send>(
    make: &(dyn Fn(Seed) -> DefenseInstance<X, H> + Sync),
    params: &ProtocolParams,
    trials: u64,
    seed: Seed,
    threads: usize,
    transcripts: Option<&mut Vec<TranscriptRow>>,
) -> Result<DefenseVerdict, ProtocolError> {
    params.validate()?;
    if trials == 0 {
        return Err(ProtocolError::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }
    let probe = make(seed.child("def-probe", 0));
    let attacker_names: Vec<String> = probe
        .attackers
        .iter()
        .map(|a| a.name().to_string())
        .collect();
    drop(probe);

    struct TrialOutcome {
        correct: bool,
        complete: bool,
        violations: Vec<bool>,
        attack_errs: Vec<f64>,
        honest_err: f64,
        honest_b: Option<u8>,
        seed: u64,
    }

    let outcomes: Vec<TrialOutcome> = run_trials(threads, trials, |t| {
        let trial_seed = seed.child("def-trial", t);
        let instance = make(trial_seed);
        let n_attackers = instance.attackers.len();
        let mut frng = trial_seed.stream("fit", 0);
        let mut defender_budget = params.defender_budget.fresh();
        let view = instance.task.view();
        let fitted = instance.defender.fit(view, &mut defender_budget, &mut frng);
        match fitted {
            // a defender over budget is complete in no sense: everything
            // fails on its side
            Err(_) => TrialOutcome {
                correct: false,
                complete: false,
                violations: vec![false; n_attackers],
                attack_errs: vec![f64::NAN; n_attackers],
                honest_err: f64::NAN,
                honest_b: None,
                seed: trial_seed.0,
            },
            Ok(fitted) => {
                let correct = (instance.risk)(fitted.classifier()) <= params.epsilon;
                // honest round
                let mut hrng = trial_seed.stream("honest", 0);
                let honest: Vec<X> = (0..params.q)
                    .map(|_| instance.task.sample(&mut hrng).x)
                    .collect();
                let honest_err = empirical_error(
                    &instance.task,
                    &honest,
                    &fitted.classifier_answers(&honest),
                )
                .expect("lengths match");
                let honest_b = match fitted.detect(&honest, &mut hrng) {
                    Ok(b) => Some(b as u8),
                    Err(_) => None,
                };
                let complete = honest_b == Some(0);
                // attacker rounds
                let mut violations = Vec::with_capacity(n_attackers);
                let mut attack_errs = Vec::with_capacity(n_attackers);
                for (i, attacker) in instance.attackers.iter().enumerate() {
                    let mut arng = trial_seed.stream("attacker", i as u64);
                    let mut attacker_budget = params.attacker_budget.fresh();
                    let crafted = attacker.craft(
                        fitted.classifier(),
                        params.q,
                        view,
                        &mut attacker_budget,
                        &mut arng,
                    );
                    match crafted {
                        // attacker over budget: no violation
                        Err(_) => {
                            violations.push(false);
                            attack_errs.push(f64::NAN);
                        }
                        Ok(queries) => {
                            let answers = fitted.classifier_answers(&queries);
                            let err = empirical_error(&instance.task, &queries, &answers)
                                .expect("lengths match");
                            let b = fitted.detect(&queries, &mut arng).unwrap_or(true);
                            violations.push(err > 7.0 * params.epsilon && !b);
                            attack_errs.push(err);
                        }
                    }
                }
                TrialOutcome {
                    correct,
                    complete,
                    violations,
                    attack_errs,
                    honest_err,
                    honest_b,
                    seed: trial_seed.0,
                }
            }
        }
    });

    let correct = outcomes.iter().filter(|o| o.correct).count() as u64;
    let complete = outcomes.iter().filter(|o| o.complete).count() as u64;
    let correctness_rate = PropertyEstimate::from_counts(correct, trials);
    let completeness_rate = PropertyEstimate::from_counts(complete, trials);

    let mut per_attacker = BTreeMap::new();
    let mut max_violation: Option<PropertyEstimate> = None;
    for (i, name) in attacker_names.iter().enumerate() {
        let violations = outcomes.iter().filter(|o| o.violations[i]).count() as u64;
        let est = PropertyEstimate::from_counts(violations, trials);
        if max_violation.map(|m| est.rate > m.rate).unwrap_or(true) {
            max_violation = Some(est);
        }
        per_attacker.insert(name.clone(), est);
    }
    let max_violation = max_violation.unwrap_or(PropertyEstimate::from_counts(0, trials));

    if let Some(rows) = transcripts {
        for (t, o) in outcomes.iter().enumerate() {
            rows.push(TranscriptRow {
                trial: t as u64,
                strategy: "(honest-round)".into(),
                err: o.honest_err,
                b: o.honest_b,
                seed: o.seed,
            });
            for (i, err) in o.attack_errs.iter().enumerate() {
                rows.push(TranscriptRow {
                    trial: t as u64,
                    strategy: attacker_names[i].clone(),
                    err: *err,
                    b: Some(o.violations[i] as u8),
                    seed: o.seed,
                });
            }
        }
    }

    let passes = defense_passes(
        correctness_rate.rate,
        completeness_rate.rate,
        max_violation.rate,
        params,
    );
    Ok(DefenseVerdict {
        correctness_rate,
        completeness_rate,
        soundness_violation_max: max_violation,
        per_attacker,
        passes,
        suite_fingerprint: fingerprint(&attacker_names),
        trials,
    })
}
