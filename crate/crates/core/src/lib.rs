//! Executable laboratory for three interactive protocols between an attacker
//! and a defender playing over a learning task: model watermarks, adversarial
//! defenses, and transferable attacks.
//!
//! Each scheme is defined by a handful of statistical properties (correctness,
//! completeness/uniqueness, soundness/unremovability, undetectability); the
//! protocol runners in [`protocols`] play the corresponding game many times
//! under explicit resource budgets and return Monte-Carlo verdicts with
//! confidence intervals for every property.
//!
//! Supporting machinery:
//!
//! - [`domain`]: shared types (tasks, classifiers, budgets, transcripts) and
//!   the error functionals.
//! - [`stats`]: Chernoff bounds, the two-distribution guessing game, and
//!   total-variation lower bounds.
//! - [`tasks`]: the concrete task families (halfplanes on a circle, the
//!   FHE-augmented circle task, exactly-d-ones over a finite domain).
//! - [`fhe`]: the homomorphic-encryption quadruple behind a sealed-oracle
//!   reference backend.
//! - [`players`]: every concrete strategy (learners, the boundary-encryption
//!   attacker, the Rejectron defense, the watermark builder, baselines).
//! - [`gametheory`]: the finite zero-sum game between attacker and defender
//!   suites (payoff estimation, Nash LP, sparsification, trichotomy).
//! - [`efid`]: the reduction from a transferable attack to an EFID pair.

pub mod domain;
pub mod efid;
pub mod experiments;
pub mod fhe;
pub mod gametheory;
pub mod parallel;
pub mod players;
pub mod protocols;
pub mod rng;
pub mod stats;
pub mod tasks;

pub use domain::{
    charge, empirical_error, empirical_error_selective, estimate_risk, rejection_rate, Budget,
    BudgetError, Decision,
    DomainError, Label, LabeledSample, LearningTask, OracleVerdict, ProtocolParams, RiskEstimate,
    Sign, TaskView, Transcript,
};
pub use rng::Seed;
