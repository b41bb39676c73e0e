//! Experiment configuration: one self-describing JSON file per experiment.
//!
//! Parsing is strict (unknown fields are configuration errors) and every
//! experiment validates its own invariants before running; the published
//! schema lives at `configs/schema/experiment-config.schema.json`.

use serde::{Deserialize, Serialize};

use protocol_games_core::experiments::{
    ChernoffAuditExperiment, DefenseExperiment, EfidExperiment, LowerBoundExperiment,
    TransfAttackExperiment, TrichotomyExperiment, WatermarkExperiment,
};

/// Output file names, always resolved inside the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Verdict JSON file name.
    #[serde(default = "default_verdict_name")]
    pub verdict: String,
    /// Optional per-trial transcript CSV file name.
    #[serde(default)]
    pub transcripts_csv: Option<String>,
}

fn default_verdict_name() -> String {
    "verdict.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            verdict: default_verdict_name(),
            transcripts_csv: None,
        }
    }
}

/// Top-level experiment configuration. Unknown fields are rejected by the
/// flattened experiment structs, which all deny them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub output: OutputConfig,
}

/// The seven experiment kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentKind {
    Watermark(WatermarkExperiment),
    Defense(DefenseExperiment),
    Transfattack(TransfAttackExperiment),
    Trichotomy(TrichotomyExperiment),
    Efid(EfidExperiment),
    Lowerbound(LowerBoundExperiment),
    ChernoffAudit(ChernoffAuditExperiment),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Watermark(_) => "watermark",
            ExperimentKind::Defense(_) => "defense",
            ExperimentKind::Transfattack(_) => "transfattack",
            ExperimentKind::Trichotomy(_) => "trichotomy",
            ExperimentKind::Efid(_) => "efid",
            ExperimentKind::Lowerbound(_) => "lowerbound",
            ExperimentKind::ChernoffAudit(_) => "chernoff-audit",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config does not validate: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.output.verdict.is_empty() {
            return Err("output.verdict must not be empty".into());
        }
        for path in std::iter::once(&self.output.verdict)
            .chain(self.output.transcripts_csv.iter())
        {
            let p = std::path::Path::new(path);
            if p.is_absolute()
                || p.components()
                    .any(|c| matches!(c, std::path::Component::ParentDir))
            {
                return Err(format!(
                    "output path {path:?} must be relative and stay inside the output directory"
                ));
            }
        }
        let check = |r: Result<(), protocol_games_core::experiments::ExperimentError>| {
            r.map_err(|e| e.to_string())
        };
        match &self.experiment {
            ExperimentKind::Watermark(e) => check(e.validate()),
            ExperimentKind::Defense(e) => check(e.validate()),
            ExperimentKind::Transfattack(e) => check(e.validate()),
            ExperimentKind::Trichotomy(e) => check(e.validate()),
            ExperimentKind::Efid(e) => check(e.validate()),
            ExperimentKind::Lowerbound(e) => check(e.validate()),
            ExperimentKind::ChernoffAudit(e) => check(e.validate()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfattack_config_parses() {
        let text = r#"{
            "experiment": "transfattack",
            "seed": 7,
            "epsilon": 0.05,
            "lambda": 128,
            "defender_samples": 2,
            "defenders": ["erm-halfplane"],
            "distinguishers": ["flag-fraction"],
            "trials": 5,
            "undetectability_rounds": 5,
            "c": 0.9,
            "s": 0.1
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.experiment.name(), "transfattack");
        assert_eq!(config.output.verdict, "verdict.json");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{
            "experiment": "lowerbound",
            "seed": 7,
            "sample_counts": [50],
            "trials": 10,
            "max_rate": 0.05,
            "bogus": 1
        }"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn invariant_violations_are_config_errors() {
        // s ≥ c violates the protocol parameter contract
        let text = r#"{
            "experiment": "transfattack",
            "seed": 7,
            "epsilon": 0.05,
            "lambda": 128,
            "defender_samples": 2,
            "defenders": ["erm-halfplane"],
            "distinguishers": [],
            "trials": 5,
            "undetectability_rounds": 5,
            "c": 0.5,
            "s": 0.9
        }"#;
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert!(err.contains("smaller than c"), "{err}");
    }

    #[test]
    fn escaping_output_paths_are_rejected() {
        let text = r#"{
            "experiment": "lowerbound",
            "seed": 7,
            "sample_counts": [50],
            "trials": 10,
            "max_rate": 0.05,
            "output": { "verdict": "../evil.json" }
        }"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }
}
