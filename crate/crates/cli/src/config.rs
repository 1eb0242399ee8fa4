//! Run configuration: TOML schema, path resolution and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use structamp_core::attribution::CitationWeighting;
use structamp_core::data::{load_dataset, Registry};
use structamp_core::predictors::prompt::{InfoCondition, PromptOrder};
use structamp_core::predictors::{PredictorKind, PredictorSpec};
use structamp_core::stats::{SlopeModel, MIN_PERMUTATIONS};
use structamp_core::structural::PairSelection;
use structamp_core::synthgen::{GeneratorConfig, LatentModel};
use structamp_llm::RunOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Run directory; the manifest sits at its root.
    pub output_dir: PathBuf,
    /// Registry TOML; the built-in registry when absent.
    pub registry: Option<PathBuf>,
    /// Human dataset CSV. Exactly one of `dataset` and `synth` is set.
    pub dataset: Option<PathBuf>,
    pub synth: Option<GeneratorConfig>,
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub predictors: Vec<PredictorSpec>,
    pub noise: Option<NoiseSection>,
    pub attentive: Option<AttentiveSection>,
    #[serde(default)]
    pub llm: LlmSection,
    pub attribution: Option<AttributionSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_selections")]
    pub selections: Vec<PairSelection>,
    pub n_perm: usize,
    pub seed: u64,
    #[serde(default)]
    pub slope_model: SlopeModel,
}

fn default_selections() -> Vec<PairSelection> {
    vec![PairSelection::Big5ByTarget, PairSelection::TargetInternal]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigmas: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_selection")]
    pub selection: PairSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentiveSection {
    #[serde(default = "default_selection")]
    pub selection: PairSelection,
}

fn default_selection() -> PairSelection {
    PairSelection::Big5ByTarget
}

/// Harness settings shared by every LLM predictor, plus the summary source
/// for the summary conditions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LlmSection {
    pub cache_dir: Option<PathBuf>,
    pub summaries: Option<SummarySource>,
    #[serde(flatten)]
    pub options: RunOptions,
}

/// Summaries are extracted from the reasoning traces of `predictor`, a
/// score-only LLM predictor with reasoning enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarySource {
    pub predictor: String,
    pub extractor_model: String,
    /// Defaults to the source predictor's endpoint.
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionSection {
    pub annotator_model: String,
    /// Defaults to each reasoning predictor's own endpoint.
    pub endpoint: Option<String>,
    #[serde(default)]
    pub weighting: CitationWeighting,
    #[serde(default = "default_annotation_retries")]
    pub max_retries: u32,
    #[serde(default = "default_epsilon")]
    pub kl_epsilon: f64,
}

fn default_annotation_retries() -> u32 {
    2
}

fn default_epsilon() -> f64 {
    1e-6
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub synth_seed: Option<u64>,
    pub concurrency: Option<usize>,
}

/// One validation finding, tied to the config field it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// A parsed config together with the directory its relative paths are
/// resolved against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
    raw: toml::Table,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.config.llm.cache_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn registry(&self) -> anyhow::Result<Registry> {
        Ok(match &self.config.registry {
            Some(p) => Registry::from_path(self.resolve(p))?,
            None => Registry::builtin(),
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.config.analysis.seed = s;
        }
        if let (Some(s), Some(cfg)) = (o.synth_seed, self.config.synth.as_mut()) {
            cfg.seed = s;
            self.mark_explicit("synth", "seed");
        }
        if let Some(c) = o.concurrency {
            self.config.llm.options.max_concurrency = c;
        }
    }

    fn mark_explicit(&mut self, table: &str, key: &str) {
        if let Some(toml::Value::Table(t)) = self.raw.get_mut(table) {
            t.entry(key).or_insert(toml::Value::Integer(0));
        }
    }

    /// Digest of the effective config and every input file it names, so a
    /// change to any of them invalidates earlier stages.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        let mut inputs: Vec<PathBuf> = self.config.registry.iter().chain(&self.config.dataset).cloned().collect();
        for p in &self.config.predictors {
            if let PredictorKind::Semantic { similarity } = &p.kind {
                inputs.push(similarity.clone());
            }
        }
        for p in inputs {
            h.update([0]);
            if let Ok(bytes) = std::fs::read(self.resolve(&p)) {
                h.update(&bytes);
            }
        }
        hex::encode(h.finalize())
    }
}

/// Reads and parses a config file. Syntax and schema errors come back as
/// diagnostics naming the offending field.
pub fn load(path: &Path) -> Result<LoadedConfig, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Diagnostic::new("<config>", format!("cannot read {}: {e}", path.display()))])?;
    let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        vec![Diagnostic::new("<config>", e.message().to_string())]
    })?;
    let config: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(raw.clone())).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "<config>".to_string() } else { field };
        vec![Diagnostic::new(field, e.into_inner().message().to_string())]
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    Ok(LoadedConfig { config, base, raw })
}

fn llm_specs(cfg: &RunConfig) -> impl Iterator<Item = (usize, &PredictorSpec, &structamp_core::predictors::LlmSpec)> {
    cfg.predictors.iter().enumerate().filter_map(|(i, p)| match &p.kind {
        PredictorKind::Llm(l) => Some((i, p, l)),
        _ => None,
    })
}

/// Full semantic validation. Reads the files the config names but writes
/// nothing.
pub fn validate(loaded: &LoadedConfig) -> Vec<Diagnostic> {
    let cfg = &loaded.config;
    let mut out = Vec::new();
    let mut push = |field: String, msg: String| out.push(Diagnostic::new(field, msg));

    let registry = match &cfg.registry {
        Some(p) => {
            let path = loaded.resolve(p);
            if !path.is_file() {
                push("registry".into(), format!("file not found: {}", path.display()));
                None
            } else {
                match Registry::from_path(&path) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        push("registry".into(), e.to_string());
                        None
                    }
                }
            }
        }
        None => Some(Registry::builtin()),
    };

    match (&cfg.dataset, &cfg.synth) {
        (Some(_), Some(_)) | (None, None) => {
            push("dataset".into(), "exactly one of `dataset` and `[synth]` must be given".into());
        }
        (Some(p), None) => {
            let path = loaded.resolve(p);
            match std::fs::File::open(&path) {
                Err(e) => push("dataset".into(), format!("cannot open {}: {e}", path.display())),
                Ok(f) => {
                    if let Some(reg) = &registry {
                        if let Err(e) = load_dataset(std::io::BufReader::new(f), reg) {
                            push("dataset".into(), e.to_string());
                        }
                    }
                }
            }
        }
        (None, Some(synth)) => {
            let explicit = matches!(loaded.raw.get("synth"), Some(toml::Value::Table(t)) if t.contains_key("seed"));
            if !explicit {
                push("synth.seed".into(), "seeds must be set explicitly".into());
            }
            if synth.n_participants < 2 {
                push("synth.n_participants".into(), format!("need at least 2 participants, got {}", synth.n_participants));
            }
            if let Some(reg) = &registry {
                if let Err(e) = LatentModel::new(synth, reg) {
                    push("synth".into(), e.to_string());
                }
            }
        }
    }

    let a = &cfg.analysis;
    if a.selections.is_empty() {
        push("analysis.selections".into(), "at least one pair selection is required".into());
    }
    if a.n_perm < MIN_PERMUTATIONS {
        push("analysis.n_perm".into(), format!("must be >= {MIN_PERMUTATIONS}, got {}", a.n_perm));
    }

    if cfg.predictors.is_empty() {
        push("predictors".into(), "at least one predictor is required".into());
    }
    let mut seen = BTreeSet::new();
    for (i, p) in cfg.predictors.iter().enumerate() {
        let field = format!("predictors[{i}]");
        if !seen.insert(p.id.as_str()) {
            push(format!("{field}.id"), format!("duplicate predictor id `{}`", p.id));
        }
        if p.id.contains(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')) {
            push(format!("{field}.id"), "ids may only use ASCII letters, digits, `_`, `-` and `.`".into());
        }
        for problem in p.validate() {
            let key = match &p.kind {
                PredictorKind::NoisyLinear { .. } => "sigma",
                PredictorKind::Knn { .. } => "k",
                PredictorKind::Llm(_) if problem.contains("temperature") => "temperature",
                PredictorKind::Llm(_) => "model",
                PredictorKind::BayesianRidge { .. } => "max_iter",
                _ => "id",
            };
            push(format!("{field}.{key}"), problem);
        }
        match &p.kind {
            PredictorKind::Semantic { similarity } => {
                let path = loaded.resolve(similarity);
                if !path.is_file() {
                    push(format!("{field}.similarity"), format!("file not found: {}", path.display()));
                }
            }
            PredictorKind::Ideal if cfg.synth.is_none() => {
                push(format!("{field}.kind"), "the ideal predictor needs a `[synth]` dataset".into());
            }
            PredictorKind::Llm(l) => {
                if l.order == PromptOrder::Single && l.condition != InfoCondition::ScoreOnly {
                    push(format!("{field}.order"), "single-question order requires the score_only condition".into());
                }
                if !l.api_key_env.is_empty() && std::env::var_os(&l.api_key_env).is_none() {
                    push(format!("{field}.api_key_env"), format!("environment variable {} is not set", l.api_key_env));
                }
                if l.condition.uses_summary() && cfg.llm.summaries.is_none() {
                    push(format!("{field}.condition"), "summary conditions need `[llm.summaries]`".into());
                }
            }
            _ => {}
        }
    }

    for problem in cfg.llm.options.validate() {
        let key = problem.split_whitespace().next().unwrap_or_default();
        push(format!("llm.{key}"), problem);
    }
    if let Some(s) = &cfg.llm.summaries {
        match llm_specs(cfg).find(|(_, p, _)| p.id == s.predictor) {
            None => push("llm.summaries.predictor".into(), format!("no LLM predictor with id `{}`", s.predictor)),
            Some((_, _, l)) => {
                if !l.reasoning || l.condition != InfoCondition::ScoreOnly {
                    push(
                        "llm.summaries.predictor".into(),
                        format!("`{}` must be score_only with reasoning = true", s.predictor),
                    );
                }
            }
        }
    }

    if let Some(n) = &cfg.noise {
        if n.sigmas.is_empty() {
            push("noise.sigmas".into(), "at least one sigma is required".into());
        }
        for (i, s) in n.sigmas.iter().enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                push(format!("noise.sigmas[{i}]"), format!("sigma must be finite and >= 0, got {s}"));
            }
        }
        if n.sigmas.windows(2).any(|w| w[0] > w[1]) {
            push("noise.sigmas".into(), "sigmas must be in ascending order".into());
        }
    }

    if let Some(att) = &cfg.attribution {
        if att.annotator_model.trim().is_empty() {
            push("attribution.annotator_model".into(), "model identifier is empty".into());
        }
        if !(att.kl_epsilon > 0.0 && att.kl_epsilon < 1.0) {
            push("attribution.kl_epsilon".into(), format!("must lie in (0, 1), got {}", att.kl_epsilon));
        }
        if !llm_specs(cfg).any(|(_, _, l)| l.reasoning) {
            push("attribution".into(), "needs at least one LLM predictor with reasoning = true".into());
        }
    }
    out
}
