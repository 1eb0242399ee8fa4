//! Command-line orchestration for structure-alignment runs: config
//! validation, staged execution with resume, and report emission.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod svg;

use thiserror::Error;

pub use config::{load, validate, Diagnostic, LoadedConfig, Overrides, RunConfig};
pub use manifest::{RunDir, RunManifest};
pub use pipeline::{report_dir, Pipeline};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration ({} problems)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("stage {stage} failed: {source:#}")]
    Stage { stage: String, source: anyhow::Error },
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

impl CliError {
    /// 1 for validation failures, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        }
    }
}

/// Which stages a verb runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Synth,
    Predict,
    Analyze,
    Attribution,
    Run,
}

pub fn open(path: &std::path::Path, overrides: &Overrides) -> Result<Pipeline, CliError> {
    let mut cfg = load(path).map_err(CliError::Invalid)?;
    cfg.apply(overrides);
    Pipeline::open(cfg)
}

pub fn execute(path: &std::path::Path, overrides: &Overrides, verb: Verb) -> Result<Pipeline, CliError> {
    let mut p = open(path, overrides)?;
    match verb {
        Verb::Synth => {
            if p.config().synth.is_none() {
                return Err(CliError::Invalid(vec![Diagnostic {
                    field: "synth".into(),
                    message: "the synth command needs a `[synth]` section".into(),
                }]));
            }
            p.synth()?
        }
        Verb::Predict => p.predict()?,
        Verb::Analyze => {
            p.analyze()?;
            p.noise()?;
            p.attentive()?;
        }
        Verb::Attribution => p.attribution()?,
        Verb::Run => p.run_all()?,
    }
    Ok(p)
}
