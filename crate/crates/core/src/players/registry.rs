//! Strategy registry: string names → concrete strategies, so experiment
//! configs can assemble suites per game and task family.
//!
//! A few names take a numeric argument after `@` (budgets, rates); the
//! parser is strict and unknown names fail the configuration.

use crate::players::attack::{ConstantMinusDefender, ErmCryptoDefender, RandomLabelsDefender};
use crate::players::baselines::{
    AllMinusRemover, AlwaysZeroDistinguisher, BoundaryFloodAttacker, ClearBandDistinguisher,
    EchoRemover, FlagFractionDistinguisher, FlipRemover, FreshLearnerRemover,
    HandleBytesDistinguisher, HonestAttacker, PointMassAttacker, PositiveHitDistinguisher,
    RepetitionDistinguisher, ReplayAttacker, SampleOverlapDistinguisher,
};
use crate::players::watermark::WatermarkClassifier;
use crate::players::{
    ClassifierDistinguisher, DefenseAttacker, PlayerError, QueryAnswerer, RemovalStrategy,
    TupleDistinguisher,
};
use crate::tasks::circle::{CirclePoint, HalfplaneHypothesis};
use crate::tasks::crypto::{CryptoSample, CryptoTask};

fn split_arg(name: &str) -> (&str, Option<&str>) {
    match name.split_once('@') {
        Some((head, arg)) => (head, Some(arg)),
        None => (name, None),
    }
}

fn parse_u64(name: &str, arg: Option<&str>, default: u64) -> Result<u64, PlayerError> {
    match arg {
        None => Ok(default),
        Some(a) => a
            .parse()
            .map_err(|_| PlayerError::UnknownStrategy(name.to_string())),
    }
}

fn parse_f64(name: &str, arg: Option<&str>, default: f64) -> Result<f64, PlayerError> {
    match arg {
        None => Ok(default),
        Some(a) => a
            .parse()
            .map_err(|_| PlayerError::UnknownStrategy(name.to_string())),
    }
}

/// Defenders answering transferable-attack queries on the crypto task.
/// Known names: `erm-halfplane[@samples]`, `random-labels`,
/// `constant-minus`.
pub fn crypto_defender(
    name: &str,
    crypto: &CryptoTask,
    default_samples: u64,
) -> Result<Box<dyn QueryAnswerer<CryptoSample>>, PlayerError> {
    let (head, arg) = split_arg(name);
    match head {
        "erm-halfplane" => Ok(Box::new(ErmCryptoDefender::new(
            crypto.clone(),
            parse_u64(name, arg, default_samples)?,
        ))),
        "random-labels" => Ok(Box::new(RandomLabelsDefender)),
        "constant-minus" => Ok(Box::new(ConstantMinusDefender)),
        _ => Err(PlayerError::UnknownStrategy(name.to_string())),
    }
}

/// Distinguishers over crypto query tuples. Known names: `flag-fraction`,
/// `clear-band[@samples]`, `handle-bytes`.
pub fn crypto_distinguisher(
    name: &str,
    default_samples: u64,
    band_halfwidth: f64,
) -> Result<Box<dyn TupleDistinguisher<CryptoSample>>, PlayerError> {
    let (head, arg) = split_arg(name);
    match head {
        "flag-fraction" => Ok(Box::new(FlagFractionDistinguisher)),
        "clear-band" => Ok(Box::new(ClearBandDistinguisher::new(
            parse_u64(name, arg, default_samples)?,
            band_halfwidth,
        ))),
        "handle-bytes" => Ok(Box::new(HandleBytesDistinguisher)),
        _ => Err(PlayerError::UnknownStrategy(name.to_string())),
    }
}

/// Removers for the d-ones watermark. Known names: `echo`, `flip[@rho]`,
/// `all-minus`, `fresh-learner[@samples]`.
pub fn watermark_remover(
    name: &str,
    default_samples: u64,
) -> Result<Box<dyn RemovalStrategy<u64, WatermarkClassifier>>, PlayerError> {
    let (head, arg) = split_arg(name);
    match head {
        "echo" => Ok(Box::new(EchoRemover)),
        "flip" => Ok(Box::new(FlipRemover::new(parse_f64(name, arg, 0.5)?))),
        "all-minus" => Ok(Box::new(AllMinusRemover)),
        "fresh-learner" => Ok(Box::new(FreshLearnerRemover::new(parse_u64(
            name,
            arg,
            default_samples,
        )?))),
        _ => Err(PlayerError::UnknownStrategy(name.to_string())),
    }
}

/// Distinguishers for the d-ones watermark. Known names: `always-zero`,
/// `repetition`, `positive-hit`, `sample-overlap[@samples]`.
pub fn watermark_distinguisher(
    name: &str,
    default_samples: u64,
) -> Result<Box<dyn ClassifierDistinguisher<u64, WatermarkClassifier>>, PlayerError> {
    let (head, arg) = split_arg(name);
    match head {
        "always-zero" => Ok(Box::new(AlwaysZeroDistinguisher)),
        "repetition" => Ok(Box::new(RepetitionDistinguisher)),
        "positive-hit" => Ok(Box::new(PositiveHitDistinguisher)),
        "sample-overlap" => Ok(Box::new(SampleOverlapDistinguisher::new(parse_u64(
            name,
            arg,
            default_samples,
        )?))),
        _ => Err(PlayerError::UnknownStrategy(name.to_string())),
    }
}

/// Attackers for the halfplane defense. Known names: `honest`,
/// `replay-train[@samples]`, `boundary-flood[@halfwidth]`, `point-mass`.
pub fn defense_attacker(
    name: &str,
    default_flood_halfwidth: f64,
) -> Result<Box<dyn DefenseAttacker<CirclePoint, HalfplaneHypothesis>>, PlayerError> {
    let (head, arg) = split_arg(name);
    match head {
        "honest" => Ok(Box::new(HonestAttacker)),
        "replay-train" => Ok(Box::new(ReplayAttacker {
            samples: parse_u64(name, arg, 512)?,
        })),
        "boundary-flood" => Ok(Box::new(BoundaryFloodAttacker {
            halfwidth_turns: parse_f64(name, arg, default_flood_halfwidth)?,
        })),
        "point-mass" => Ok(Box::new(PointMassAttacker)),
        _ => Err(PlayerError::UnknownStrategy(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use crate::tasks::crypto::crypto_task;

    #[test]
    fn known_names_resolve_and_unknown_fail() {
        let crypto = crypto_task(64, CirclePoint::from_turns(0.1), Seed(1));
        assert!(crypto_defender("erm-halfplane@4", &crypto, 1).is_ok());
        assert_eq!(
            crypto_defender("erm-halfplane@4", &crypto, 1).unwrap().name(),
            "erm-halfplane@4"
        );
        assert!(crypto_defender("random-labels", &crypto, 1).is_ok());
        assert!(crypto_defender("nonsense", &crypto, 1).is_err());
        assert!(crypto_distinguisher("flag-fraction", 10, 0.05).is_ok());
        assert!(crypto_distinguisher("clear-band@50", 10, 0.05).is_ok());
        assert!(watermark_remover("flip@0.25", 10).is_ok());
        assert!(watermark_remover("flip@x", 10).is_err());
        assert!(watermark_distinguisher("sample-overlap@100", 10).is_ok());
        assert!(defense_attacker("boundary-flood@0.01", 0.02).is_ok());
        assert!(defense_attacker("warp-drive", 0.02).is_err());
    }
}
