//! Staged execution over a run directory: synth → predict → score →
//! analyze → noise → attentive → attribution → report. Completed stages
//! are skipped on re-run, and finished predictors are skipped inside a
//! partially completed predict stage.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use structamp_core::attribution::{
    aggregate_attribution, compare_to_baseline, consensus, summarize_conditions, to_factor_level, AttributionError,
    AttributionVector, BaselineComparison, ConditionResult, FactorAttribution,
};
use structamp_core::data::{load_dataset, Registry, ResponseMatrix};
use structamp_core::predictors::{
    kind_name, run_baseline, split_inputs_targets, train_bayesian_ridge, BayesianRidgeConfig, Design, LlmSpec,
    PredictionSet, PredictorKind, PredictorSpec, ReasoningTrace, SimilarityMatrix,
};
use structamp_core::stats::KlConfig;
use structamp_core::structural::{
    analyze, attentive_comparison, human_scores, model_scores, noise_sweep, performance_meta_fit,
    summarize_robustness, AnalysisConfig, StructuralReport,
};
use structamp_core::synthgen::{generate, ideal_predictor};
use structamp_llm::{
    annotate_traces, extract_summaries, predict_llm, ChatParams, Harness, HttpBackend, ResponseCache, Summaries,
};

use crate::config::{validate, LoadedConfig};
use crate::manifest::RunDir;
use crate::report::{self, AnalysisIndex, IndexEntry, ReportError};
use crate::CliError;

type Notes = BTreeMap<String, String>;

pub fn predictions_rel(id: &str) -> String {
    format!("predictions/{id}.json")
}

fn traces_rel(id: &str) -> String {
    format!("llm/{id}.traces.json")
}

const ORDER: [&str; 8] = ["synth", "predict", "score", "analyze", "noise", "attentive", "attribution", "report"];
const SUMMARIES: &str = "llm/summaries.json";
const DATASET: &str = "data/dataset.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SummaryArtifact {
    source: String,
    summaries: Summaries,
    ambiguous: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AttributionArtifact {
    weighting: String,
    vectors: Vec<(String, AttributionVector<f64>)>,
    factors: Vec<(String, FactorAttribution<f64>)>,
    baseline_comparisons: Vec<(String, BaselineComparison<f64>)>,
    skipped: Vec<(String, String)>,
}

pub struct Pipeline {
    cfg: LoadedConfig,
    registry: Registry,
    dir: RunDir,
    runtime: Option<tokio::runtime::Runtime>,
    harnesses: HashMap<(String, String), Harness>,
    dataset: Option<ResponseMatrix>,
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<(), structamp_core::data::DataError>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

impl Pipeline {
    /// Validates the config and opens (or resumes) its run directory.
    pub fn open(cfg: LoadedConfig) -> Result<Self, CliError> {
        let diagnostics = validate(&cfg);
        if !diagnostics.is_empty() {
            return Err(CliError::Invalid(diagnostics));
        }
        let registry = cfg.registry()?;
        let dir = RunDir::open(&cfg.run_dir(), &cfg.hash())?;
        Ok(Self { cfg, registry, dir, runtime: None, harnesses: HashMap::new(), dataset: None })
    }

    pub fn dir(&self) -> &RunDir {
        &self.dir
    }

    pub fn config(&self) -> &crate::config::RunConfig {
        &self.cfg.config
    }

    fn stage(&mut self, name: &str, f: impl FnOnce(&mut Self) -> anyhow::Result<Notes>) -> Result<(), CliError> {
        if self.dir.is_complete(name) {
            log::info!(target: "run", "stage {name} already complete; skipping");
            return Ok(());
        }
        log::info!(target: "run", "stage {name} starting");
        match f(self) {
            Ok(notes) => {
                // Anything downstream was computed from older inputs.
                for later in ORDER.iter().skip_while(|s| **s != name).skip(1) {
                    self.dir.reset(later);
                }
                self.dir.complete(name, notes)?;
                log::info!(target: "run", "stage {name} complete");
                Ok(())
            }
            Err(e) => {
                let msg = format!("{e:#}");
                self.dir.fail(name, &msg)?;
                match e.downcast::<ReportError>() {
                    Ok(ReportError::MissingArtifact(a)) => Err(CliError::MissingArtifact(a)),
                    Ok(other) => Err(CliError::Stage { stage: name.to_string(), source: other.into() }),
                    Err(e) => Err(CliError::Stage { stage: name.to_string(), source: e }),
                }
            }
        }
    }

    fn dataset(&mut self) -> anyhow::Result<ResponseMatrix> {
        if let Some(d) = &self.dataset {
            return Ok(d.clone());
        }
        let bytes = match &self.cfg.config.dataset {
            Some(p) => std::fs::read(self.cfg.resolve(p))?,
            None => {
                if !self.dir.has(DATASET) {
                    bail!(ReportError::MissingArtifact(DATASET.into()));
                }
                self.dir.read(DATASET)?
            }
        };
        let d = load_dataset(bytes.as_slice(), &self.registry)?;
        self.dataset = Some(d.clone());
        Ok(d)
    }

    fn runtime(&mut self) -> anyhow::Result<&tokio::runtime::Runtime> {
        if self.runtime.is_none() {
            self.runtime = Some(tokio::runtime::Builder::new_multi_thread().enable_all().build()?);
        }
        Ok(self.runtime.as_ref().expect("just built"))
    }

    fn harness(&mut self, endpoint: &str, api_key_env: &str) -> anyhow::Result<&Harness> {
        let key = (endpoint.to_string(), api_key_env.to_string());
        if !self.harnesses.contains_key(&key) {
            // reqwest's client wants a runtime context when built.
            let _guard = self.runtime()?.enter();
            let opts = self.cfg.config.llm.options.clone();
            let backend = HttpBackend::new(endpoint, api_key_env, Duration::from_secs(opts.timeout_secs))?;
            let cache = self.cfg.cache_dir().map(ResponseCache::open).transpose()?;
            self.harnesses.insert(key.clone(), Harness::new(backend, cache, opts)?);
        }
        Ok(&self.harnesses[&key])
    }

    pub fn synth(&mut self) -> Result<(), CliError> {
        let Some(gen) = self.cfg.config.synth.clone() else { return Ok(()) };
        self.stage("synth", |p| {
            let data = generate(&gen, &p.registry)?;
            let model = structamp_core::synthgen::LatentModel::new(&gen, &p.registry)?;
            p.dir.write("synth", DATASET, &csv_string(|b| data.dataset().write_csv(b))?)?;
            p.dir.write_json(
                "synth",
                "data/model.json",
                &serde_json::json!({ "config": gen, "model": model.describe(), "registry": p.registry }),
            )?;
            p.dir.write_json("synth", "data/truth.json", &data.truth)?;
            p.dataset = None;
            Ok(Notes::from([
                ("participants".into(), gen.n_participants.to_string()),
                ("inattentive".into(), (gen.n_participants - data.truth.n_attentive()).to_string()),
            ]))
        })
    }

    fn write_set(&mut self, set: &PredictionSet<f64>) -> anyhow::Result<()> {
        let id = set.predictor_id.clone();
        self.dir.write("predict", &format!("predictions/{id}.csv"), &csv_string(|b| set.predictions.write_csv(b))?)?;
        // The JSON goes last: its presence marks the predictor as done.
        self.dir.write_json("predict", &predictions_rel(&id), set)
    }

    fn run_llm(&mut self, spec: &PredictorSpec, llm: &LlmSpec, summaries: Option<&Summaries>, notes: &mut Notes) -> anyhow::Result<()> {
        let ds = self.dataset()?;
        self.harness(&llm.endpoint, &llm.api_key_env)?;
        let key = (llm.endpoint.clone(), llm.api_key_env.clone());
        let rt = self.runtime.as_ref().expect("created with the harness");
        let h = &self.harnesses[&key];
        let before = h.stats();
        let run = rt.block_on(predict_llm::<f64>(spec, &ds, &self.registry, &[], summaries, h))?;
        let after = h.stats();
        for (k, v) in [
            ("requests", after.requests - before.requests),
            ("cache_hits", after.cache_hits - before.cache_hits),
            ("retries", after.retries - before.retries),
            ("failed_calls", after.failed_calls - before.failed_calls),
        ] {
            notes.insert(format!("{}.{k}", spec.id), v.to_string());
        }
        notes.insert(format!("{}.failed_cells", spec.id), run.set.failed.len().to_string());
        if llm.reasoning {
            self.dir.write_json("predict", &traces_rel(&spec.id), &run.traces)?;
        }
        self.write_set(&run.set)
    }

    fn summaries(&mut self) -> anyhow::Result<Summaries> {
        if self.dir.has(SUMMARIES) {
            return Ok(self.dir.read_json::<SummaryArtifact>(SUMMARIES)?.summaries);
        }
        let src = self.cfg.config.llm.summaries.clone().context("no summary source configured")?;
        let spec = self.cfg.config.predictors.iter().find(|p| p.id == src.predictor).cloned().context("summary source")?;
        let PredictorKind::Llm(llm) = &spec.kind else { bail!("summary source {} is not an LLM predictor", spec.id) };
        let traces: Vec<ReasoningTrace> = self.dir.read_json(&traces_rel(&spec.id))?;
        let endpoint = src.endpoint.clone().unwrap_or_else(|| llm.endpoint.clone());
        self.harness(&endpoint, &llm.api_key_env)?;
        let h = &self.harnesses[&(endpoint, llm.api_key_env.clone())];
        let params = ChatParams { model: src.extractor_model.clone(), temperature: 0.0, max_tokens: None };
        let rt = self.runtime.as_ref().expect("created with the harness");
        let ex = rt.block_on(extract_summaries(&traces, h, &params))?;
        let artifact = SummaryArtifact { source: spec.id.clone(), summaries: ex.summaries, ambiguous: ex.ambiguous };
        self.dir.write_json("predict", SUMMARIES, &artifact)?;
        self.dir.write_json("predict", &format!("llm/{}.summarized.json", spec.id), &ex.traces)?;
        Ok(artifact.summaries)
    }

    pub fn predict(&mut self) -> Result<(), CliError> {
        self.synth()?;
        self.stage("predict", |p| {
            let ds = p.dataset()?;
            let specs = p.cfg.config.predictors.clone();
            let mut notes = Notes::new();
            let done = |p: &Self, id: &str| p.dir.has(&predictions_rel(id));
            for spec in specs.iter().filter(|s| !matches!(s.kind, PredictorKind::Llm(_))) {
                if done(p, &spec.id) {
                    log::info!(target: "predict", "{}: predictions present; skipping", spec.id);
                    continue;
                }
                log::info!(target: "predict", "{}: running {}", spec.id, kind_name(&spec.kind));
                let set = match &spec.kind {
                    PredictorKind::Ideal => {
                        let gen = p.cfg.config.synth.as_ref().context("ideal predictor without [synth]")?;
                        let ideal = ideal_predictor(gen, &p.registry)?;
                        let (inputs, _) = split_inputs_targets(&ds, &p.registry)?;
                        let mut predictions = ideal.predict::<f64>(&inputs)?;
                        if spec.round_to_scale {
                            predictions = structamp_core::predictors::round_to_scale(&predictions, &p.registry);
                        }
                        PredictionSet {
                            predictor_id: spec.id.clone(),
                            predictions,
                            failed: Vec::new(),
                            provenance: BTreeMap::from([("kind".into(), "ideal".into())]),
                        }
                    }
                    PredictorKind::Semantic { similarity } => {
                        let file = std::fs::File::open(p.cfg.resolve(similarity))?;
                        let sim = SimilarityMatrix::<f64>::read_csv(std::io::BufReader::new(file))?;
                        run_baseline(spec, &ds, &p.registry, Some(&sim))?
                    }
                    _ => run_baseline(spec, &ds, &p.registry, None)?,
                };
                p.write_set(&set)?;
            }
            // Summary conditions need the score-only traces first.
            let (plain, summarised): (Vec<&PredictorSpec>, Vec<&PredictorSpec>) = specs
                .iter()
                .filter(|s| matches!(s.kind, PredictorKind::Llm(_)))
                .partition(|s| matches!(&s.kind, PredictorKind::Llm(l) if !l.condition.uses_summary()));
            for spec in plain {
                let PredictorKind::Llm(llm) = &spec.kind else { unreachable!() };
                if done(p, &spec.id) && (!llm.reasoning || p.dir.has(&traces_rel(&spec.id))) {
                    log::info!(target: "predict", "{}: predictions present; skipping", spec.id);
                    continue;
                }
                log::info!(target: "predict", "{}: querying {} at {}", spec.id, llm.model, llm.endpoint);
                p.run_llm(spec, llm, None, &mut notes)?;
            }
            if !summarised.is_empty() {
                let summaries = p.summaries()?;
                for spec in summarised {
                    let PredictorKind::Llm(llm) = &spec.kind else { unreachable!() };
                    if done(p, &spec.id) {
                        continue;
                    }
                    log::info!(target: "predict", "{}: querying {} ({})", spec.id, llm.model, llm.condition.as_str());
                    p.run_llm(spec, llm, Some(&summaries), &mut notes)?;
                }
            }
            Ok(notes)
        })
    }

    fn require_predictions(&self) -> Result<(), CliError> {
        if !self.dir.is_complete("predict") {
            return Err(CliError::MissingArtifact("predictions (run the predict stage first)".into()));
        }
        Ok(())
    }

    fn load_set(&self, id: &str) -> anyhow::Result<PredictionSet<f64>> {
        self.dir.read_json(&predictions_rel(id))
    }

    fn analysis_config(&self) -> AnalysisConfig {
        let a = &self.cfg.config.analysis;
        AnalysisConfig { selections: a.selections.clone(), n_perm: a.n_perm, seed: a.seed, slope_model: a.slope_model }
    }

    pub fn score(&mut self) -> Result<(), CliError> {
        self.require_predictions()?;
        self.stage("score", |p| {
            let ds = p.dataset()?;
            let human = human_scores::<f64>(&ds, &p.registry)?;
            p.dir.write("score", "scores/human.csv", &csv_string(|b| human.write_csv(b))?)?;
            for spec in p.cfg.config.predictors.clone() {
                let set = p.load_set(&spec.id)?;
                let m = model_scores(&ds, &set.predictions, &p.registry)?;
                p.dir.write("score", &format!("scores/{}.csv", spec.id), &csv_string(|b| m.write_csv(b))?)?;
            }
            Ok(Notes::new())
        })
    }

    pub fn analyze(&mut self) -> Result<(), CliError> {
        self.score()?;
        self.stage("analyze", |p| {
            let ds = p.dataset()?;
            let cfg = p.analysis_config();
            let primary = cfg.selections[0];
            let specs = p.cfg.config.predictors.clone();
            let mut reports: Vec<(PredictorSpec, StructuralReport<f64>)> = Vec::new();
            let mut summary = csv::Writer::from_writer(Vec::new());
            summary.write_record([
                "predictor", "kind", "selection", "k", "intercept", "r_squared", "n_pairs", "p_r_squared",
                "kendall_tau", "p_kendall_tau", "mean_predictive_r", "failed_cells",
            ])?;
            for spec in specs {
                let set = p.load_set(&spec.id)?;
                log::info!(target: "analyze", "{}: structural analysis", spec.id);
                let report = analyze(&ds, &set.predictions, &spec.id, &p.registry, &cfg)?;
                let base = format!("analysis/{}", spec.id);
                p.dir.write("analyze", &format!("{base}.json"), report.to_json().as_bytes())?;
                p.dir.write("analyze", &format!("{base}.pairs.csv"), report.pairs_csv()?.as_bytes())?;
                p.dir.write("analyze", &format!("{base}.fits.csv"), report.fits_csv()?.as_bytes())?;
                p.dir.write("analyze", &format!("{base}.performance.csv"), report.performance_csv()?.as_bytes())?;
                for s in &report.selections {
                    summary.write_record([
                        spec.id.clone(),
                        kind_name(&spec.kind).to_string(),
                        s.selection.as_str().to_string(),
                        s.k.to_string(),
                        s.fit.intercept.to_string(),
                        s.fit.r_squared.to_string(),
                        s.fit.n_points.to_string(),
                        s.permutation_r_squared.p_value.to_string(),
                        s.permutation_kendall_tau.observed.to_string(),
                        s.permutation_kendall_tau.p_value.to_string(),
                        report.mean_predictive_r.map(|r| r.to_string()).unwrap_or_default(),
                        set.failed.len().to_string(),
                    ])?;
                }
                reports.push((spec, report));
            }
            p.dir.write("analyze", "analysis/summary.csv", &summary.into_inner()?)?;

            let mut notes = Notes::new();
            let plain: Vec<StructuralReport<f64>> = reports.iter().map(|(_, r)| r.clone()).collect();
            if plain.iter().filter(|r| r.mean_predictive_r.is_some()).count() >= 3 {
                match performance_meta_fit(&plain, primary) {
                    Ok(fit) => p.dir.write_json("analyze", "analysis/meta.json", &fit)?,
                    Err(e) => {
                        notes.insert("meta_fit".into(), e.to_string());
                    }
                }
            }

            // LLM predictors: condition grid and prompt-order robustness.
            let llm: Vec<(&LlmSpec, &StructuralReport<f64>)> = reports
                .iter()
                .filter_map(|(s, r)| match &s.kind {
                    PredictorKind::Llm(l) => Some((l, r)),
                    _ => None,
                })
                .collect();
            let cells: Vec<ConditionResult<f64>> = llm
                .iter()
                .filter(|(l, _)| l.order == structamp_core::predictors::prompt::PromptOrder::Standard)
                .filter_map(|(l, r)| {
                    let sel = r.selection(primary)?;
                    Some(ConditionResult {
                        predictor_id: l.model.clone(),
                        condition: l.condition,
                        k: sel.k,
                        mean_r: r.mean_predictive_r?,
                        fit: Some(sel.fit),
                    })
                })
                .collect();
            if cells.len() >= 3 {
                match summarize_conditions(cells) {
                    Ok(s) => p.dir.write_json("analyze", "analysis/conditions.json", &s)?,
                    Err(e) => {
                        notes.insert("conditions".into(), e.to_string());
                    }
                }
            }
            let mut groups: BTreeMap<(String, &str), Vec<(String, structamp_core::stats::AmplificationFit<f64>)>> =
                BTreeMap::new();
            for (l, r) in &llm {
                if let Some(sel) = r.selection(primary) {
                    groups
                        .entry((l.model.clone(), l.condition.as_str()))
                        .or_default()
                        .push((l.order.as_str().to_string(), sel.fit));
                }
            }
            let robustness: Vec<_> = groups
                .into_iter()
                .filter(|(_, fits)| fits.len() >= 2)
                .map(|((model, condition), fits)| {
                    serde_json::json!({
                        "model": model,
                        "condition": condition,
                        "summary": summarize_robustness(fits, cfg.slope_model),
                    })
                })
                .collect();
            if !robustness.is_empty() {
                p.dir.write_json("analyze", "analysis/robustness.json", &robustness)?;
            }

            let index = AnalysisIndex {
                primary,
                predictors: reports
                    .iter()
                    .map(|(s, _)| IndexEntry { id: s.id.clone(), kind: kind_name(&s.kind).to_string() })
                    .collect(),
            };
            p.dir.write_json("analyze", "analysis/index.json", &index)?;
            Ok(notes)
        })
    }

    pub fn noise(&mut self) -> Result<(), CliError> {
        let Some(n) = self.cfg.config.noise.clone() else { return Ok(()) };
        self.synth()?;
        self.stage("noise", |p| {
            let ds = p.dataset()?;
            let slope = p.cfg.config.analysis.slope_model;
            let pts = noise_sweep::<f64>(&ds, &p.registry, &n.sigmas, n.seed, n.selection, slope)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["sigma", "k", "intercept", "r_squared", "n_points"])?;
            for pt in &pts {
                w.write_record([
                    pt.sigma.to_string(),
                    pt.k.to_string(),
                    pt.fit.intercept.to_string(),
                    pt.fit.r_squared.to_string(),
                    pt.fit.n_points.to_string(),
                ])?;
            }
            p.dir.write("noise", "noise/noise.csv", &w.into_inner()?)?;
            p.dir.write_json("noise", "noise/noise.json", &pts)?;
            Ok(Notes::new())
        })
    }

    pub fn attentive(&mut self) -> Result<(), CliError> {
        let Some(a) = self.cfg.config.attentive.clone() else { return Ok(()) };
        self.synth()?;
        self.stage("attentive", |p| {
            let ds = p.dataset()?;
            let cmp = attentive_comparison::<f64>(&ds, &p.registry, a.selection)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["a", "b", "full_r", "attentive_r"])?;
            let v = &cmp.pairs.vector;
            for ((x, y), (f, s)) in v.labels.iter().zip(v.human_r.iter().zip(&v.model_r)) {
                w.write_record([x.clone(), y.clone(), f.to_string(), s.to_string()])?;
            }
            p.dir.write("attentive", "attentive/pairs.csv", &w.into_inner()?)?;
            p.dir.write_json("attentive", "attentive/attentive.json", &cmp)?;
            Ok(Notes::from([
                ("n_full".into(), cmp.n_full.to_string()),
                ("n_attentive".into(), cmp.n_attentive.to_string()),
            ]))
        })
    }

    pub fn attribution(&mut self) -> Result<(), CliError> {
        let Some(att) = self.cfg.config.attribution.clone() else { return Ok(()) };
        self.require_predictions()?;
        self.stage("attribution", |p| {
            let ds = p.dataset()?;
            let item_ids = p.registry.input().item_ids();
            let factor_map = p.registry.factor_map().clone();
            let kl = KlConfig::new(att.kl_epsilon)?;
            let params = ChatParams { model: att.annotator_model.clone(), temperature: 0.0, max_tokens: None };
            let mut art = AttributionArtifact {
                weighting: format!("{:?}", att.weighting),
                vectors: Vec::new(),
                factors: Vec::new(),
                baseline_comparisons: Vec::new(),
                skipped: Vec::new(),
            };
            let mut notes = Notes::new();
            for spec in p.cfg.config.predictors.clone() {
                let PredictorKind::Llm(llm) = &spec.kind else { continue };
                if !llm.reasoning {
                    continue;
                }
                let traces: Vec<ReasoningTrace> = p.dir.read_json(&traces_rel(&spec.id))?;
                let endpoint = att.endpoint.clone().unwrap_or_else(|| llm.endpoint.clone());
                p.harness(&endpoint, &llm.api_key_env)?;
                let h = &p.harnesses[&(endpoint, llm.api_key_env.clone())];
                let rt = p.runtime.as_ref().expect("created with the harness");
                log::info!(target: "attribution", "{}: annotating {} traces", spec.id, traces.len());
                let annotations =
                    rt.block_on(annotate_traces(&traces, &llm.model, &ds, &p.registry, h, &params, att.max_retries))?;
                let failures = annotations.iter().filter(|a| a.error.is_some()).count();
                notes.insert(format!("{}.annotation_failures", spec.id), failures.to_string());
                p.dir.write_json("attribution", &format!("attribution/{}.annotations.json", spec.id), &annotations)?;
                let maps: Vec<_> = annotations.into_iter().filter_map(|a| a.citations).collect();
                match aggregate_attribution::<f64>(&maps, &item_ids, att.weighting) {
                    Ok(v) => art.vectors.push((spec.id.clone(), v)),
                    Err(e @ AttributionError::NoCitations) => art.skipped.push((spec.id.clone(), e.to_string())),
                    Err(e) => return Err(e.into()),
                }
            }

            let (inputs, targets) = split_inputs_targets(&ds, &p.registry)?;
            let design = Design::<f64>::from_responses(&inputs, &targets)?;
            let (_, importance) = train_bayesian_ridge(&design, &BayesianRidgeConfig::default())?;
            for (label, v) in &art.vectors {
                art.factors.push((label.clone(), to_factor_level(v, &factor_map)?));
                art.baseline_comparisons.push((label.clone(), compare_to_baseline(v, &importance, &factor_map, &kl)?));
            }
            art.factors.push(("bayesian_ridge".into(), to_factor_level(&importance, &factor_map)?));

            let mut vw = csv::Writer::from_writer(Vec::new());
            vw.write_record(["label", "item_id", "factor", "weight"])?;
            for (label, v) in art.vectors.iter().chain(std::iter::once(&("bayesian_ridge".to_string(), importance.clone()))) {
                for (id, w) in v.item_ids.iter().zip(&v.weights) {
                    vw.write_record([label, id, &factor_map[id], &w.to_string()])?;
                }
            }
            p.dir.write("attribution", "attribution/vectors.csv", &vw.into_inner()?)?;
            let mut fw = csv::Writer::from_writer(Vec::new());
            fw.write_record(["label", "factor", "weight"])?;
            for (label, f) in &art.factors {
                for (name, w) in f.factors.iter().zip(&f.weights) {
                    fw.write_record([label, name, &w.to_string()])?;
                }
            }
            p.dir.write("attribution", "attribution/factors.csv", &fw.into_inner()?)?;
            let mut bw = csv::Writer::from_writer(Vec::new());
            bw.write_record(["label", "item_pearson", "item_kl", "factor_pearson", "factor_kl", "delta_pearson"])?;
            for (label, c) in &art.baseline_comparisons {
                bw.write_record([
                    label.clone(),
                    c.item_pearson.to_string(),
                    c.item_kl.to_string(),
                    c.factor_pearson.to_string(),
                    c.factor_kl.to_string(),
                    c.delta_pearson.to_string(),
                ])?;
            }
            p.dir.write("attribution", "attribution/baseline.csv", &bw.into_inner()?)?;
            if art.vectors.len() >= 2 {
                let m = consensus(&art.vectors, &kl)?;
                let mut cw = csv::Writer::from_writer(Vec::new());
                cw.write_record(["a", "b", "pearson", "kl"])?;
                for (i, a) in m.labels.iter().enumerate() {
                    for (j, b) in m.labels.iter().enumerate() {
                        cw.write_record([a.clone(), b.clone(), m.pearson(i, j).to_string(), m.kl(i, j).to_string()])?;
                    }
                }
                p.dir.write("attribution", "attribution/consensus.csv", &cw.into_inner()?)?;
                p.dir.write_json("attribution", "attribution/consensus.json", &m)?;
            }
            p.dir.write_json("attribution", "attribution/attribution.json", &art)?;
            Ok(notes)
        })
    }

    pub fn report(&mut self) -> Result<(), CliError> {
        self.stage(report::STAGE, |p| {
            let figures = report::render(&mut p.dir)?;
            Ok(Notes::from([("figures".into(), figures.len().to_string())]))
        })
    }

    /// Every configured stage, in order.
    pub fn run_all(&mut self) -> Result<(), CliError> {
        self.synth()?;
        self.predict()?;
        self.analyze()?;
        self.noise()?;
        self.attentive()?;
        self.attribution()?;
        self.report()
    }
}

/// `report` on a finished run directory, independent of any config.
pub fn report_dir(root: &std::path::Path) -> Result<Vec<report::FigureEntry>, CliError> {
    let mut dir = RunDir::open_existing(root)?
        .ok_or_else(|| CliError::MissingArtifact(format!("{}/manifest.json", root.display())))?;
    match report::render(&mut dir) {
        Ok(figs) => {
            dir.complete(report::STAGE, Notes::from([("figures".into(), figs.len().to_string())]))?;
            Ok(figs)
        }
        Err(ReportError::MissingArtifact(a)) => Err(CliError::MissingArtifact(a)),
        Err(ReportError::Other(e)) => Err(CliError::Stage { stage: report::STAGE.into(), source: e }),
    }
}
