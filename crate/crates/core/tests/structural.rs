//! Structural comparison against independent end-to-end oracles.

use std::collections::HashMap;

use structamp_core::data::{ItemGrid, PredictionMatrix, Registry};
use structamp_core::predictors::{add_gaussian_noise, run_baseline, PredictorKind, PredictorSpec};
use structamp_core::stats::SlopeModel;
use structamp_core::structural::{
    analyze, attentive_comparison, noise_sweep, AnalysisConfig, PairSelection, StructuralError,
};
use structamp_core::synthgen::{generate, ideal_predictor, GeneratorConfig, SyntheticData};
use structamp_testkit as oracle;

fn data(n: usize, seed: u64, inattention: f64) -> (Registry, SyntheticData) {
    let reg = Registry::builtin();
    let cfg = GeneratorConfig { n_participants: n, seed, inattention_rate: inattention, ..GeneratorConfig::default() };
    let d = generate(&cfg, &reg).unwrap();
    (reg, d)
}

fn quick() -> AnalysisConfig {
    AnalysisConfig { n_perm: 100, ..AnalysisConfig::default() }
}

fn ideal(reg: &Registry, d: &SyntheticData, n: usize, seed: u64) -> PredictionMatrix<f64> {
    let cfg = GeneratorConfig { n_participants: n, seed, ..GeneratorConfig::default() };
    ideal_predictor(&cfg, reg).unwrap().predict(&d.big5).unwrap()
}

/// Scores by hand: mean of reverse-scored members, no missing cells.
fn oracle_scores(
    reg: &Registry,
    get: &dyn Fn(usize, &str) -> f64,
    n: usize,
    scales: &[&structamp_core::data::ScaleSpec],
) -> HashMap<String, Vec<f64>> {
    let mut out = HashMap::new();
    for scale in scales {
        for sub in &scale.subscales {
            let col = (0..n)
                .map(|r| {
                    let vals: Vec<f64> = sub
                        .items
                        .iter()
                        .map(|id| {
                            let s = reg.item(id).unwrap();
                            let v = get(r, id);
                            if s.reverse_scored { f64::from(s.response_min + s.response_max) - v } else { v }
                        })
                        .collect();
                    vals.iter().sum::<f64>() / vals.len() as f64
                })
                .collect();
            out.insert(sub.id.clone(), col);
        }
    }
    out
}

#[test]
fn matches_end_to_end_oracle() {
    let (reg, d) = data(300, 1, 0.0);
    let preds = add_gaussian_noise(&ideal(&reg, &d, 300, 1), 0.4, 7);
    let report = analyze(&d.dataset(), &preds, "ideal", &reg, &quick()).unwrap();

    let full = d.dataset();
    let targets: Vec<_> = reg.targets().collect();
    let input = [reg.input()];
    let all: Vec<_> = input.iter().copied().chain(targets.iter().copied()).collect();
    let human_get = |r: usize, id: &str| f64::from(full.get(r, full.item_index(id).unwrap()).unwrap());
    let human = oracle_scores(&reg, &human_get, 300, &all);
    let pcol: HashMap<&str, usize> = preds.item_ids().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let pred_get = |r: usize, id: &str| preds.get(r, pcol[id]).unwrap();
    let mut model = oracle_scores(&reg, &pred_get, 300, &targets);
    for f in &reg.layout().input {
        model.insert(f.clone(), human[f].clone());
    }

    let layout = reg.layout();
    for sel in [PairSelection::Big5ByTarget, PairSelection::TargetInternal] {
        let (mut hx, mut my) = (Vec::new(), Vec::new());
        for (a, b) in sel.pairs(&layout) {
            hx.push(oracle::pearson(&human[&a], &human[&b]));
            my.push(oracle::pearson(&model[&a], &model[&b]));
        }
        let (k, c, r2) = oracle::ols_line(&hx, &my);
        let s = report.selection(sel).unwrap();
        assert_eq!(s.pairs.vector.human_r.len(), hx.len());
        assert!((s.fit.k - k).abs() < 1e-9 && (s.fit.intercept - c).abs() < 1e-9 && (s.fit.r_squared - r2).abs() < 1e-9);
    }
    for p in &report.performance {
        let r = oracle::pearson(&human[&p.subscale_id], &model[&p.subscale_id]);
        assert!((p.r.unwrap() - r).abs() < 1e-9, "{}", p.subscale_id);
        assert_eq!(p.n, 300);
    }
}

#[test]
fn identity_predictor_has_unit_slope() {
    let (reg, d) = data(200, 2, 0.0);
    let preds = PredictionMatrix::<f64>::from_responses(&d.targets);
    let report = analyze(&d.dataset(), &preds, "identity", &reg, &quick()).unwrap();
    for s in &report.selections {
        assert!((s.fit.k - 1.0).abs() < 1e-12 && (s.fit.r_squared - 1.0).abs() < 1e-12, "{:?}", s.selection);
        assert!(s.fit.intercept.abs() < 1e-12);
        assert!(s.pairs.dropped.is_empty());
    }
    assert!(report.performance.iter().all(|p| (p.r.unwrap() - 1.0).abs() < 1e-12));
}

#[test]
fn overwhelming_noise_flattens_the_slope() {
    let (reg, d) = data(400, 3, 0.0);
    let preds = add_gaussian_noise(&ideal(&reg, &d, 400, 3), 100.0, 1);
    let report = analyze(&d.dataset(), &preds, "noise", &reg, &quick()).unwrap();
    let s = report.selection(PairSelection::Big5ByTarget).unwrap();
    assert!(s.k.abs() < 0.15, "k = {}", s.k);
    assert!(report.mean_predictive_r.unwrap().abs() < 0.1);
}

#[test]
fn ideal_predictor_amplifies() {
    let (reg, d) = data(800, 0, 0.0);
    let report = analyze(&d.dataset(), &ideal(&reg, &d, 800, 0), "ideal", &reg, &quick()).unwrap();
    let s = report.selection(PairSelection::Big5ByTarget).unwrap();
    assert!(s.k > 1.1 && s.fit.r_squared > 0.85, "{:?}", s.fit);
    assert!(s.permutation_r_squared.p_value < 0.05);
}

#[test]
fn zero_noise_sweep_equals_the_clean_fit() {
    let (reg, d) = data(250, 4, 0.0);
    let ds = d.dataset();
    let spec = PredictorSpec { id: "linear".into(), kind: PredictorKind::Linear, round_to_scale: false };
    let clean = run_baseline::<f64>(&spec, &ds, &reg, None).unwrap().predictions;
    let report = analyze(&ds, &clean, "linear", &reg, &quick()).unwrap();
    let sweep = noise_sweep::<f64>(&ds, &reg, &[0.0, 0.5, 1.0], 3, PairSelection::Big5ByTarget, SlopeModel::WithIntercept)
        .unwrap();
    assert_eq!(sweep[0].fit, report.selection(PairSelection::Big5ByTarget).unwrap().fit);
    assert!(sweep[0].k > sweep[1].k && sweep[1].k > sweep[2].k, "{:?}", sweep.iter().map(|p| p.k).collect::<Vec<_>>());
    assert!(matches!(
        noise_sweep::<f64>(&ds, &reg, &[0.5, 0.1], 3, PairSelection::Big5ByTarget, SlopeModel::WithIntercept),
        Err(StructuralError::InvalidSigmas)
    ));
}

#[test]
fn participant_order_does_not_matter() {
    let (reg, d) = data(200, 5, 0.0);
    let ds = d.dataset();
    let preds = ideal(&reg, &d, 200, 5);
    let a = analyze(&ds, &preds, "x", &reg, &quick()).unwrap();

    let rev: Vec<usize> = (0..200).rev().collect();
    let ds_rev = ds.select_rows(&rev);
    // Predictions keep the original order; matching is by id.
    let b = analyze(&ds_rev, &preds, "x", &reg, &quick()).unwrap();
    for (x, y) in a.selections.iter().zip(&b.selections) {
        assert!((x.fit.k - y.fit.k).abs() < 1e-10 && (x.fit.r_squared - y.fit.r_squared).abs() < 1e-10);
    }
    for (x, y) in a.performance.iter().zip(&b.performance) {
        assert!((x.r.unwrap() - y.r.unwrap()).abs() < 1e-10);
    }
}

#[test]
fn attentive_subgroup_comparison() {
    let (reg, clean) = data(300, 6, 0.0);
    let all = attentive_comparison::<f64>(&clean.dataset(), &reg, PairSelection::Big5ByTarget).unwrap();
    assert_eq!(all.n_attentive, 300);
    assert!((all.fit.k - 1.0).abs() < 1e-12 && (all.fit.r_squared - 1.0).abs() < 1e-12);

    let (reg, noisy) = data(800, 6, 0.3);
    let cmp = attentive_comparison::<f64>(&noisy.dataset(), &reg, PairSelection::Big5ByTarget).unwrap();
    assert_eq!(cmp.n_attentive, noisy.truth.n_attentive());
    assert!(cmp.fit.k > 1.2, "k = {}", cmp.fit.k);

    let (reg, hopeless) = data(100, 6, 1.0);
    match attentive_comparison::<f64>(&hopeless.dataset(), &reg, PairSelection::Big5ByTarget) {
        Err(StructuralError::SubgroupTooSmall { n: 0, minimum: 30 }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_participants_are_an_error() {
    let (reg, d) = data(60, 7, 0.0);
    let preds = ideal(&reg, &d, 60, 7);
    let mut ids = preds.participant_ids().to_vec();
    ids[3] = "ghost".into();
    let renamed = PredictionMatrix::new(ids, preds.item_ids().to_vec(), preds.values().to_vec()).unwrap();
    match analyze(&d.dataset(), &renamed, "x", &reg, &quick()) {
        Err(StructuralError::UnknownParticipant(p)) => assert_eq!(p, "ghost"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_precision_tracks_double() {
    let (reg, d) = data(300, 8, 0.0);
    let p64 = ideal(&reg, &d, 300, 8);
    let cfg = GeneratorConfig { n_participants: 300, seed: 8, ..GeneratorConfig::default() };
    let p32 = ideal_predictor(&cfg, &reg).unwrap().predict::<f32>(&d.big5).unwrap();
    let a = analyze(&d.dataset(), &p64, "x", &reg, &quick()).unwrap();
    let b = analyze(&d.dataset(), &p32, "x", &reg, &quick()).unwrap();
    for (x, y) in a.selections.iter().zip(&b.selections) {
        assert!((x.fit.k - f64::from(y.fit.k)).abs() < 1e-3);
    }
}

#[test]
fn report_tables_have_the_expected_shape() {
    let (reg, d) = data(200, 9, 0.0);
    let cfg = AnalysisConfig { selections: PairSelection::ALL.to_vec(), ..quick() };
    let report = analyze(&d.dataset(), &ideal(&reg, &d, 200, 9), "ideal", &reg, &cfg).unwrap();
    let layout = reg.layout();
    let (i, t) = (layout.input.len(), layout.target.len());
    let expected_pairs = i * t + t * (t - 1) / 2 + i * (i - 1) / 2 + (i + t) * (i + t - 1) / 2;
    let pairs = report.pairs_csv().unwrap();
    assert_eq!(pairs.lines().count(), 1 + expected_pairs);
    assert_eq!(pairs.lines().next().unwrap(), "selection,a,b,human_r,model_r");
    assert_eq!(report.fits_csv().unwrap().lines().count(), 1 + PairSelection::ALL.len());
    assert_eq!(report.performance_csv().unwrap().lines().count(), 1 + t);

    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["predictor_id"], "ideal");
    assert_eq!(json["selections"].as_array().unwrap().len(), 4);
    assert_eq!(json["selections"][0]["selection"], "big5_by_target");
}

#[test]
fn analysis_config_rejects_unknown_keys() {
    let ok: AnalysisConfig = toml::from_str("n_perm = 200\nselections = [\"all_pairs\"]").unwrap();
    assert_eq!(ok.selections, vec![PairSelection::AllPairs]);
    assert_eq!(ok.seed, 0);
    assert!(toml::from_str::<AnalysisConfig>("n_prem = 200").is_err());
}
