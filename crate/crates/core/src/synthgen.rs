//! Seeded latent-factor generator for questionnaire data with a known
//! ground truth.
//!
//! Five correlated Big Five factors drive the input items. Every target
//! sub-scale has a latent value that is a linear function of the factors
//! plus structural noise, and drives its member items. Item responses are
//! `loading × latent + noise`, cut into the item's levels by equal-width
//! thresholds over ±3 marginal standard deviations. Inattentive
//! participants answer every item uniformly at random.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, ItemSpec, PredictionMatrix, Registry, ResponseMatrix, ScaleRole, BIG_FIVE_FACTORS};
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid factor covariance: {0}")]
    InvalidCovariance(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Loading of one item on its latent variable: a Big Five factor label for
/// input items, a target sub-scale id for target items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemLoading {
    pub item_id: String,
    pub latent: String,
    pub loading: f64,
}

/// Target sub-scale latent = `weights · factors + N(0, noise_std²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralPath {
    pub subscale_id: String,
    /// One weight per factor, in O, C, E, A, N order.
    pub weights: Vec<f64>,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_participants: usize,
    pub seed: u64,
    /// 5 × 5, O, C, E, A, N order.
    pub factor_covariance: Vec<Vec<f64>>,
    /// Overrides; items not listed load 1.0 on their registry latent.
    pub item_loadings: Vec<ItemLoading>,
    /// Overrides; sub-scales not listed get the built-in paths.
    pub structural_paths: Vec<StructuralPath>,
    pub response_noise_std: f64,
    pub inattention_rate: f64,
}

/// Big Five intercorrelations of a typical adult sample, rounded.
pub fn default_factor_covariance() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.1, 0.3, 0.1, -0.1],
        vec![0.1, 1.0, 0.2, 0.3, -0.3],
        vec![0.3, 0.2, 1.0, 0.2, -0.3],
        vec![0.1, 0.3, 0.2, 1.0, -0.2],
        vec![-0.1, -0.3, -0.3, -0.2, 1.0],
    ]
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_participants: 800,
            seed: 0,
            factor_covariance: default_factor_covariance(),
            item_loadings: Vec::new(),
            structural_paths: Vec::new(),
            response_noise_std: 1.0,
            inattention_rate: 0.0,
        }
    }
}

/// Seed of the built-in structural paths; fixed so every run shares them.
const PATH_SEED: u64 = 0x5eed_0f_5ca1e;
/// Largest share of a target latent's variance left to structural noise.
const MIN_NOISE_SHARE: f64 = 0.3;

/// Built-in paths: weights uniform in ±0.6 from a fixed stream, noise
/// chosen so the latent has unit variance (at least 30% of it noise).
pub fn default_paths(registry: &Registry, cov: &[Vec<f64>]) -> Vec<StructuralPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(PATH_SEED);
    primary_subscales(registry)
        .into_iter()
        .map(|id| {
            let mut weights: Vec<f64> = (0..5).map(|_| rng.random_range(-0.6..0.6)).collect();
            let mut var = quad(cov, &weights);
            if var > 1.0 - MIN_NOISE_SHARE {
                let s = ((1.0 - MIN_NOISE_SHARE) / var).sqrt();
                weights.iter_mut().for_each(|w| *w *= s);
                var = quad(cov, &weights);
            }
            StructuralPath { subscale_id: id, weights, noise_std: (1.0 - var).max(0.0).sqrt() }
        })
        .collect()
}

fn quad(cov: &[Vec<f64>], w: &[f64]) -> f64 {
    (0..w.len()).map(|i| (0..w.len()).map(|j| w[i] * cov[i][j] * w[j]).sum::<f64>()).sum()
}

/// Target sub-scales that are the first-listed home of at least one item,
/// in registry order. Composite sub-scales (every member already homed)
/// get no latent of their own.
fn primary_subscales(registry: &Registry) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for scale in registry.targets() {
        for item in &scale.items {
            if let Some(sub) = scale.subscales.iter().find(|s| s.items.contains(&item.item_id)) {
                if !out.contains(&sub.id) {
                    out.push(sub.id.clone());
                }
            }
        }
    }
    out
}

/// One observed item: which latent drives it and how its response is cut.
#[derive(Debug, Clone)]
struct ItemModel {
    spec: ItemSpec,
    latent: usize,
    loading: f64,
    /// Marginal standard deviation of the continuous response.
    sd: f64,
}

impl ItemModel {
    fn levels(&self) -> f64 {
        f64::from(self.spec.levels())
    }

    /// Equal-width cut over ±3 sd, reflected for reverse-scored items.
    fn discretize(&self, z: f64) -> i32 {
        let k = self.levels();
        let raw = if self.sd > 0.0 { ((z / self.sd + 3.0) / 6.0 * k).floor() } else { (k / 2.0).floor() };
        let level = raw.clamp(0.0, k - 1.0) as i32;
        let v = self.spec.response_min + level;
        if self.spec.reverse_scored {
            self.spec.response_min + self.spec.response_max - v
        } else {
            v
        }
    }

    /// Continuous response at the centre of the observed level.
    fn midpoint(&self, observed: i32) -> f64 {
        let v = if self.spec.reverse_scored {
            self.spec.response_min + self.spec.response_max - observed
        } else {
            observed
        };
        let level = f64::from(v - self.spec.response_min);
        self.sd * ((level + 0.5) * 6.0 / self.levels() - 3.0)
    }

    /// Real-valued inverse of [`Self::discretize`] on the item's scale:
    /// level midpoints map to the integers.
    fn to_scale(&self, z: f64) -> f64 {
        let v = if self.sd > 0.0 {
            f64::from(self.spec.response_min) + self.levels() * (z / self.sd + 3.0) / 6.0 - 0.5
        } else {
            f64::from(self.spec.response_min + self.spec.response_max) / 2.0
        };
        if self.spec.reverse_scored {
            f64::from(self.spec.response_min + self.spec.response_max) - v
        } else {
            v
        }
    }

    /// Variance of the rounding error made by [`Self::midpoint`].
    fn quantization_var(&self) -> f64 {
        let width = 6.0 * self.sd / self.levels();
        width * width / 12.0
    }
}

/// Validated generative model.
#[derive(Debug, Clone)]
pub struct LatentModel {
    cov: Vec<f64>,
    /// `root · rootᵀ = cov`.
    root: Vec<f64>,
    inputs: Vec<ItemModel>,
    targets: Vec<ItemModel>,
    checks: Vec<ItemSpec>,
    paths: Vec<StructuralPath>,
    /// Target sub-scale id → member item indices into `targets`.
    target_subscales: Vec<(String, Vec<usize>)>,
    noise_std: f64,
    inattention_rate: f64,
}

fn covariance_root(cov: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), SynthError> {
    let n = BIG_FIVE_FACTORS.len();
    if cov.len() != n || cov.iter().any(|r| r.len() != n) {
        return Err(SynthError::InvalidCovariance(format!("must be {n} x {n}")));
    }
    let flat: Vec<f64> = cov.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(SynthError::InvalidCovariance("non-finite entry".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (flat[i * n + j] - flat[j * n + i]).abs() > 1e-12 {
                return Err(SynthError::InvalidCovariance(format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    let (eig, vecs) = symmetric_eigen(&flat, n);
    let scale = eig.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
    if let Some(e) = eig.iter().find(|&&e| e < -1e-10 * scale) {
        return Err(SynthError::InvalidCovariance(format!("eigenvalue {e} is negative")));
    }
    let mut root = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            root[i * n + k] = vecs[i * n + k] * eig[k].max(0.0).sqrt();
        }
    }
    Ok((flat, root))
}

impl LatentModel {
    pub fn new(cfg: &GeneratorConfig, registry: &Registry) -> Result<Self, SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&cfg.inattention_rate) {
            return bad(format!("inattention_rate {} outside [0, 1]", cfg.inattention_rate));
        }
        if !(cfg.response_noise_std >= 0.0 && cfg.response_noise_std.is_finite()) {
            return bad(format!("response_noise_std must be >= 0, got {}", cfg.response_noise_std));
        }
        let (cov, root) = covariance_root(&cfg.factor_covariance)?;

        let primaries = primary_subscales(registry);
        let mut paths = default_paths(registry, &cfg.factor_covariance);
        for p in &cfg.structural_paths {
            if p.weights.len() != BIG_FIVE_FACTORS.len() {
                return bad(format!("path {}: need {} weights", p.subscale_id, BIG_FIVE_FACTORS.len()));
            }
            if !(p.noise_std >= 0.0 && p.noise_std.is_finite()) || p.weights.iter().any(|w| !w.is_finite()) {
                return bad(format!("path {}: weights must be finite and noise_std >= 0", p.subscale_id));
            }
            match paths.iter_mut().find(|d| d.subscale_id == p.subscale_id) {
                Some(slot) => *slot = p.clone(),
                None => return bad(format!("path for `{}`, which drives no items", p.subscale_id)),
            }
        }

        let mut overrides: HashMap<&str, &ItemLoading> = HashMap::new();
        for l in &cfg.item_loadings {
            if registry.item(&l.item_id).is_none() {
                return bad(format!("loading for unknown item {}", l.item_id));
            }
            if !l.loading.is_finite() {
                return bad(format!("loading for {} is not finite", l.item_id));
            }
            overrides.insert(l.item_id.as_str(), l);
        }
        let latent_of = |item: &str, default: &str, names: &[String]| -> Result<(usize, f64), SynthError> {
            let (name, loading) = overrides.get(item).map_or((default, 1.0), |l| (l.latent.as_str(), l.loading));
            let idx = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| SynthError::InvalidConfig(format!("item {item}: unknown latent `{name}`")))?;
            Ok((idx, loading))
        };

        let noise_var = cfg.response_noise_std * cfg.response_noise_std;
        let factor_names: Vec<String> = BIG_FIVE_FACTORS.iter().map(|s| s.to_string()).collect();
        let factor_map = registry.factor_map();
        let inputs = registry
            .input()
            .items
            .iter()
            .map(|it| {
                let (latent, loading) = latent_of(&it.item_id, &factor_map[&it.item_id], &factor_names)?;
                let var = loading * loading * cov[latent * 5 + latent] + noise_var;
                Ok(ItemModel { spec: it.clone(), latent, loading, sd: var.sqrt() })
            })
            .collect::<Result<Vec<_>, SynthError>>()?;

        let mut targets = Vec::new();
        let mut target_subscales = Vec::new();
        for scale in registry.targets() {
            let offset = targets.len();
            for it in &scale.items {
                let home = scale
                    .subscales
                    .iter()
                    .find(|s| s.items.contains(&it.item_id))
                    .map(|s| s.id.as_str())
                    .expect("registry validated");
                let (latent, loading) = latent_of(&it.item_id, home, &primaries)?;
                let p = &paths[latent];
                let var = loading * loading * (quad(&cfg.factor_covariance, &p.weights) + p.noise_std * p.noise_std)
                    + noise_var;
                targets.push(ItemModel { spec: it.clone(), latent, loading, sd: var.sqrt() });
            }
            for sub in &scale.subscales {
                let members =
                    sub.items.iter().map(|id| offset + scale.items.iter().position(|i| &i.item_id == id).expect("validated")).collect();
                target_subscales.push((sub.id.clone(), members));
            }
        }
        let checks = registry
            .scales()
            .iter()
            .filter(|s| s.role == ScaleRole::Check)
            .flat_map(|s| s.items.iter().cloned())
            .collect();

        Ok(Self {
            cov,
            root,
            inputs,
            targets,
            checks,
            paths,
            target_subscales,
            noise_std: cfg.response_noise_std,
            inattention_rate: cfg.inattention_rate,
        })
    }

    pub fn paths(&self) -> &[StructuralPath] {
        &self.paths
    }

    pub fn factor_covariance(&self) -> &[f64] {
        &self.cov
    }

    /// Generating parameters with every item's latent spelled out by name.
    /// Derived quantities (marginal sds, posterior weights) are left out.
    pub fn describe(&self) -> ModelDescription {
        let factors: Vec<String> = BIG_FIVE_FACTORS.iter().map(|s| s.to_string()).collect();
        let n = factors.len();
        let loading = |it: &ItemModel, name: &str| ItemLoading {
            item_id: it.spec.item_id.clone(),
            latent: name.to_string(),
            loading: it.loading,
        };
        ModelDescription {
            factor_covariance: self.cov.chunks(n).map(<[f64]>::to_vec).collect(),
            input_items: self.inputs.iter().map(|it| loading(it, &factors[it.latent])).collect(),
            target_items: self.targets.iter().map(|it| loading(it, &self.paths[it.latent].subscale_id)).collect(),
            paths: self.paths.clone(),
            response_noise_std: self.noise_std,
            inattention_rate: self.inattention_rate,
            factors,
        }
    }

    pub fn target_subscale_ids(&self) -> Vec<String> {
        self.target_subscales.iter().map(|(id, _)| id.clone()).collect()
    }

    fn structural_mean(&self, path: usize, factors: &[f64]) -> f64 {
        self.paths[path].weights.iter().zip(factors).map(|(w, f)| w * f).sum()
    }

    /// Noiseless target sub-scale values in latent units: the mean over
    /// member items of `loading × weights · factors`.
    pub fn noiseless_subscales(&self, factors: &[f64]) -> Vec<f64> {
        self.target_subscales
            .iter()
            .map(|(_, members)| {
                let s: f64 = members
                    .iter()
                    .map(|&i| self.targets[i].loading * self.structural_mean(self.targets[i].latent, factors))
                    .sum();
                s / members.len() as f64
            })
            .collect()
    }
}

/// Serializable view of a [`LatentModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub factors: Vec<String>,
    pub factor_covariance: Vec<Vec<f64>>,
    pub input_items: Vec<ItemLoading>,
    /// `latent` names the structural path driving the item.
    pub target_items: Vec<ItemLoading>,
    pub paths: Vec<StructuralPath>,
    pub response_noise_std: f64,
    pub inattention_rate: f64,
}

/// Everything the generator knows that the observed data hides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participant_ids: Vec<String>,
    /// n × 5, O, C, E, A, N.
    pub factors: Vec<f64>,
    /// n × 20 continuous input responses before discretisation.
    pub input_continuous: Vec<f64>,
    pub target_subscale_ids: Vec<String>,
    /// n × target sub-scales, see [`LatentModel::noiseless_subscales`].
    pub noiseless_targets: Vec<f64>,
    pub inattentive: Vec<bool>,
}

impl GroundTruth {
    pub fn factor_row(&self, r: usize) -> &[f64] {
        &self.factors[r * 5..(r + 1) * 5]
    }

    pub fn input_row(&self, r: usize) -> &[f64] {
        let p = self.input_continuous.len() / self.participant_ids.len().max(1);
        &self.input_continuous[r * p..(r + 1) * p]
    }

    pub fn noiseless_row(&self, r: usize) -> &[f64] {
        let m = self.target_subscale_ids.len();
        &self.noiseless_targets[r * m..(r + 1) * m]
    }

    pub fn n_attentive(&self) -> usize {
        self.inattentive.iter().filter(|f| !**f).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub big5: ResponseMatrix,
    pub targets: ResponseMatrix,
    /// Attention-check items; no columns when the registry declares none.
    pub checks: ResponseMatrix,
    pub truth: GroundTruth,
}

impl SyntheticData {
    /// All columns in one matrix, in the dataset CSV layout.
    pub fn dataset(&self) -> ResponseMatrix {
        self.big5
            .hconcat(&self.targets)
            .and_then(|m| m.hconcat(&self.checks))
            .expect("generator emits disjoint columns over one participant list")
    }
}

fn uniform_level(rng: &mut ChaCha8Rng, item: &ItemSpec) -> i32 {
    rng.random_range(item.response_min..=item.response_max)
}

/// Draws a dataset. Row `r` uses its own ChaCha stream of `cfg.seed`, so
/// rows are independent of one another and of generation order.
pub fn generate(cfg: &GeneratorConfig, registry: &Registry) -> Result<SyntheticData, SynthError> {
    let model = LatentModel::new(cfg, registry)?;
    let n = cfg.n_participants;
    let width = n.to_string().len().max(4);
    let ids: Vec<String> = (1..=n).map(|i| format!("S{i:0width$}")).collect();

    let (mut big5, mut targets, mut checks) = (Vec::new(), Vec::new(), Vec::new());
    let n_sub = model.target_subscales.len();
    let mut truth = GroundTruth {
        participant_ids: ids.clone(),
        factors: Vec::with_capacity(n * 5),
        input_continuous: Vec::with_capacity(n * model.inputs.len()),
        target_subscale_ids: model.target_subscale_ids(),
        noiseless_targets: Vec::with_capacity(n * n_sub),
        inattentive: Vec::with_capacity(n),
    };

    for row in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(row as u64);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

        let u: Vec<f64> = (0..5).map(|_| normal()).collect();
        let factors: Vec<f64> = (0..5).map(|i| (0..5).map(|k| model.root[i * 5 + k] * u[k]).sum()).collect();
        let latents: Vec<f64> = model
            .paths
            .iter()
            .enumerate()
            .map(|(p, path)| model.structural_mean(p, &factors) + path.noise_std * normal())
            .collect();
        let z_in: Vec<f64> =
            model.inputs.iter().map(|it| it.loading * factors[it.latent] + model.noise_std * normal()).collect();
        let z_out: Vec<f64> =
            model.targets.iter().map(|it| it.loading * latents[it.latent] + model.noise_std * normal()).collect();
        let inattentive = rng.random::<f64>() < model.inattention_rate;

        if inattentive {
            big5.extend(model.inputs.iter().map(|it| Some(uniform_level(&mut rng, &it.spec))));
            targets.extend(model.targets.iter().map(|it| Some(uniform_level(&mut rng, &it.spec))));
            // Random answers that happen to pass every check are redrawn so
            // that an inattentive participant always fails at least one.
            let answers = loop {
                let a: Vec<i32> = model.checks.iter().map(|it| uniform_level(&mut rng, it)).collect();
                if model.checks.is_empty() || a.iter().zip(&model.checks).any(|(v, it)| Some(*v) != it.attention_check) {
                    break a;
                }
            };
            checks.extend(answers.into_iter().map(Some));
        } else {
            big5.extend(model.inputs.iter().zip(&z_in).map(|(it, &z)| Some(it.discretize(z))));
            targets.extend(model.targets.iter().zip(&z_out).map(|(it, &z)| Some(it.discretize(z))));
            checks.extend(model.checks.iter().map(|it| it.attention_check));
        }

        truth.noiseless_targets.extend(model.noiseless_subscales(&factors));
        truth.factors.extend(factors);
        truth.input_continuous.extend(z_in);
        truth.inattentive.push(inattentive);
    }

    let item_ids = |items: &mut dyn Iterator<Item = &ItemSpec>| items.map(|i| i.item_id.clone()).collect::<Vec<_>>();
    Ok(SyntheticData {
        big5: ResponseMatrix::new(ids.clone(), item_ids(&mut model.inputs.iter().map(|m| &m.spec)), big5, registry)?,
        targets: ResponseMatrix::new(ids.clone(), item_ids(&mut model.targets.iter().map(|m| &m.spec)), targets, registry)?,
        checks: ResponseMatrix::new(ids, item_ids(&mut model.checks.iter()), checks, registry)?,
        truth,
    })
}

/// Linear-Gaussian posterior of latent factors given item responses
/// `z_i = loading_i · f[factor_i] + e_i`, `e_i ~ N(0, noise_var_i)`,
/// `f ~ N(0, cov)`.
///
/// Works in whitened coordinates `f = root · u`, so a singular `cov` is
/// fine. When every noise variance is zero the posterior collapses to the
/// least-squares solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPosterior {
    n_factors: usize,
    root: Vec<f64>,
    /// `(loading · root)` rows, one per observed item.
    design: Vec<Vec<f64>>,
    noise_var: Vec<f64>,
}

impl FactorPosterior {
    pub fn new(cov: &[f64], n_factors: usize, items: &[(usize, f64)], noise_var: &[f64]) -> Result<Self, SynthError> {
        let rows: Vec<Vec<f64>> = cov.chunks(n_factors).map(<[f64]>::to_vec).collect();
        let root = if n_factors == BIG_FIVE_FACTORS.len() {
            covariance_root(&rows)?.1
        } else {
            let (eig, vecs) = symmetric_eigen(cov, n_factors);
            let mut root = vec![0.0; n_factors * n_factors];
            for i in 0..n_factors {
                for k in 0..n_factors {
                    root[i * n_factors + k] = vecs[i * n_factors + k] * eig[k].max(0.0).sqrt();
                }
            }
            root
        };
        if items.len() != noise_var.len() {
            return Err(SynthError::InvalidConfig("one noise variance per item".into()));
        }
        let zero = noise_var.iter().all(|&v| v == 0.0);
        if !zero && noise_var.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(SynthError::InvalidConfig("noise variances must be all positive or all zero".into()));
        }
        let design = items
            .iter()
            .map(|&(f, l)| (0..n_factors).map(|k| l * root[f * n_factors + k]).collect())
            .collect();
        Ok(Self { n_factors, root, design, noise_var: noise_var.to_vec() })
    }

    /// Posterior mean of the factors.
    pub fn mean(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n_factors;
        let zero = self.noise_var.iter().all(|&v| v == 0.0);
        let mut m = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        if !zero {
            for i in 0..n {
                m[i * n + i] = 1.0;
            }
        }
        for ((row, &zi), &v) in self.design.iter().zip(z).zip(&self.noise_var) {
            let w = if zero { 1.0 } else { 1.0 / v };
            for i in 0..n {
                b[i] += w * row[i] * zi;
                for j in 0..n {
                    m[i * n + j] += w * row[i] * row[j];
                }
            }
        }
        // Pseudo-inverse through the eigenbasis; m is symmetric PSD.
        let (eig, vecs) = symmetric_eigen(&m, n);
        let top = eig.iter().fold(0.0f64, |a, &e| a.max(e));
        let mut u = vec![0.0; n];
        for k in 0..n {
            if eig[k] <= 1e-12 * top {
                continue;
            }
            let proj: f64 = (0..n).map(|i| vecs[i * n + k] * b[i]).sum::<f64>() / eig[k];
            for i in 0..n {
                u[i] += vecs[i * n + k] * proj;
            }
        }
        (0..n).map(|i| (0..n).map(|k| self.root[i * n + k] * u[k]).sum()).collect()
    }
}

/// Conditional-expectation predictor under the generating model.
#[derive(Debug, Clone)]
pub struct IdealPredictor {
    model: LatentModel,
    /// For continuous inputs: response noise only.
    continuous: FactorPosterior,
    /// For observed levels: response noise plus the rounding error of the
    /// level midpoint.
    discrete: FactorPosterior,
}

pub fn ideal_predictor(cfg: &GeneratorConfig, registry: &Registry) -> Result<IdealPredictor, SynthError> {
    let model = LatentModel::new(cfg, registry)?;
    let items: Vec<(usize, f64)> = model.inputs.iter().map(|it| (it.latent, it.loading)).collect();
    let nv = model.noise_std * model.noise_std;
    let continuous = FactorPosterior::new(&model.cov, 5, &items, &vec![nv; items.len()])?;
    let discrete_var: Vec<f64> = model.inputs.iter().map(|it| nv + it.quantization_var()).collect();
    let discrete = FactorPosterior::new(&model.cov, 5, &items, &discrete_var)?;
    Ok(IdealPredictor { model, continuous, discrete })
}

impl IdealPredictor {
    pub fn model(&self) -> &LatentModel {
        &self.model
    }

    /// Noiseless target sub-scale values implied by continuous input
    /// responses.
    pub fn subscales_from_continuous(&self, z: &[f64]) -> Vec<f64> {
        self.model.noiseless_subscales(&self.continuous.mean(z))
    }

    /// Posterior factor means for one row of observed input levels.
    pub fn factors_from_levels(&self, levels: &[i32]) -> Vec<f64> {
        let z: Vec<f64> = self.model.inputs.iter().zip(levels).map(|(it, &v)| it.midpoint(v)).collect();
        self.discrete.mean(&z)
    }

    /// Real-valued predictions for every target item. Rows with a missing
    /// input stay empty.
    pub fn predict<T: Scalar>(&self, inputs: &ResponseMatrix) -> Result<PredictionMatrix<T>, SynthError> {
        let cols: Vec<usize> = self
            .model
            .inputs
            .iter()
            .map(|it| inputs.item_index(&it.spec.item_id).ok_or_else(|| DataError::MissingColumn(it.spec.item_id.clone())))
            .collect::<Result<_, _>>()?;
        let ids: Vec<String> = self.model.targets.iter().map(|t| t.spec.item_id.clone()).collect();
        let mut out = PredictionMatrix::empty(inputs.participant_ids().to_vec(), ids);
        for r in 0..inputs.n_participants() {
            let Some(levels) = cols.iter().map(|&c| inputs.get(r, c)).collect::<Option<Vec<i32>>>() else {
                continue;
            };
            let f = self.factors_from_levels(&levels);
            for (j, t) in self.model.targets.iter().enumerate() {
                let z = t.loading * self.model.structural_mean(t.latent, &f);
                out.set(r, j, Some(T::of(t.to_scale(z))));
            }
        }
        Ok(out)
    }
}

/// Summary of a config for logs and manifests.
pub fn describe(cfg: &GeneratorConfig) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("n_participants".into(), cfg.n_participants.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("response_noise_std".into(), cfg.response_noise_std.to_string()),
        ("inattention_rate".into(), cfg.inattention_rate.to_string()),
    ])
}
