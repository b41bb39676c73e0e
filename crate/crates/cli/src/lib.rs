//! Library surface of the experiment runner: config parsing/validation and
//! report rendering, shared by the binary and its tests.

pub mod config;
pub mod render;

/// Parse and validate a config JSON without running it.
pub fn config_check(text: &str) -> Result<(), String> {
    config::ExperimentConfig::from_json(text).map(|_| ())
}
