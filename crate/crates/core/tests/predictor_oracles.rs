//! Trained baselines against direct reference computations.

use rand::Rng;
use structamp_core::data::{ItemGrid, Registry, ResponseMatrix};
use structamp_core::predictors::{
    contiguous_folds, predict_knn, run_baseline, split_inputs_targets, train_bayesian_ridge, train_linear,
    BayesianRidgeConfig, Design, KnnModel, PredictorKind, PredictorSpec,
};
use structamp_core::synthgen::{generate, GeneratorConfig};
use structamp_testkit as oracle;

fn dataset(n: usize, seed: u64) -> ResponseMatrix {
    let cfg = GeneratorConfig { n_participants: n, seed, ..Default::default() };
    generate(&cfg, &Registry::builtin()).unwrap().dataset()
}

fn rows(m: &ResponseMatrix) -> Vec<Vec<f64>> {
    (0..m.n_participants()).map(|r| m.complete_row::<f64>(r).unwrap()).collect()
}

#[test]
fn linear_matches_normal_equations() {
    let reg = Registry::builtin();
    let (inputs, targets) = split_inputs_targets(&dataset(200, 3), &reg).unwrap();
    let design = Design::<f64>::from_responses(&inputs, &targets).unwrap();
    let model = train_linear(&design).unwrap();
    assert!(!model.regularized);
    let x = rows(&inputs);
    let y = rows(&targets);
    for j in 0..targets.n_items() {
        let col: Vec<f64> = y.iter().map(|r| r[j]).collect();
        let (b0, b) = oracle::normal_equations(&x, &col);
        assert!((model.intercept[j] - b0).abs() < 1e-8, "{j}: {} vs {b0}", model.intercept[j]);
        for (got, want) in model.coefficients(j).iter().zip(&b) {
            assert!((got - want).abs() < 1e-8);
        }
    }
}

#[test]
fn cross_validated_rows_come_from_held_out_fits() {
    let reg = Registry::builtin();
    let data = dataset(120, 4);
    let spec = PredictorSpec { id: "lin".into(), kind: PredictorKind::Linear, round_to_scale: false };
    let set = run_baseline::<f64>(&spec, &data, &reg, None).unwrap();
    let (inputs, targets) = split_inputs_targets(&data, &reg).unwrap();
    let x = rows(&inputs);
    let y = rows(&targets);
    let fold = contiguous_folds(120, 5)[2].clone();
    let keep: Vec<usize> = (0..120).filter(|r| !fold.contains(r)).collect();
    let xt: Vec<Vec<f64>> = keep.iter().map(|&r| x[r].clone()).collect();
    for j in [0, 7, targets.n_items() - 1] {
        let col: Vec<f64> = keep.iter().map(|&r| y[r][j]).collect();
        let (b0, b) = oracle::normal_equations(&xt, &col);
        for r in fold.clone() {
            let want = b0 + x[r].iter().zip(&b).map(|(a, c)| a * c).sum::<f64>();
            assert!((set.predictions.get(r, j).unwrap() - want).abs() < 1e-8);
        }
    }
}

#[test]
fn knn_matches_exhaustive_search() {
    let reg = Registry::builtin();
    let (inputs, targets) = split_inputs_targets(&dataset(60, 5), &reg).unwrap();
    let design = Design::<f64>::from_responses(&inputs, &targets).unwrap();
    let x = rows(&inputs);
    let y = rows(&targets);
    let mut rng = oracle::rng(8);
    for _ in 0..50 {
        let k = rng.random_range(1..=10);
        let q = rng.random_range(0..60);
        let exclude = rng.random_bool(0.5).then_some(q);
        let got = predict_knn(&design, &x[q], k, exclude).unwrap();
        let nn = oracle::nearest(&x, &x[q], k, exclude);
        for j in 0..y[0].len() {
            let want = nn.iter().map(|&r| y[r][j]).sum::<f64>() / k as f64;
            assert!((got[j] - want).abs() < 1e-12);
        }
    }
    // Leave-one-out never uses the participant's own row.
    let model = KnnModel::new(design, 1).unwrap();
    let loo = model.predict_leave_one_out(&inputs, &targets).unwrap();
    for r in 0..60 {
        let nn = oracle::nearest(&x, &x[r], 1, Some(r));
        assert_eq!(loo.get(r, 0), Some(y[nn[0]][0]));
    }
}

#[test]
fn baselines_are_deterministic() {
    let reg = Registry::builtin();
    let data = dataset(150, 6);
    for kind in [
        PredictorKind::Linear,
        PredictorKind::BayesianRidge { max_iter: 300, tol: 1e-6 },
        PredictorKind::Knn { k: 7 },
        PredictorKind::NoisyLinear { sigma: 0.5, seed: 3 },
    ] {
        let spec = PredictorSpec { id: "p".into(), kind, round_to_scale: false };
        let a = run_baseline::<f64>(&spec, &data, &reg, None).unwrap();
        let b = run_baseline::<f64>(&spec, &data, &reg, None).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn noisy_linear_at_zero_sigma_is_linear() {
    let reg = Registry::builtin();
    let data = dataset(100, 7);
    let lin = PredictorSpec { id: "a".into(), kind: PredictorKind::Linear, round_to_scale: false };
    let noisy = PredictorSpec { id: "a".into(), kind: PredictorKind::NoisyLinear { sigma: 0.0, seed: 1 }, round_to_scale: false };
    let a = run_baseline::<f64>(&lin, &data, &reg, None).unwrap();
    let b = run_baseline::<f64>(&noisy, &data, &reg, None).unwrap();
    assert_eq!(a.predictions, b.predictions);
}

#[test]
fn bayesian_importance_is_a_distribution() {
    let reg = Registry::builtin();
    let (inputs, targets) = split_inputs_targets(&dataset(300, 8), &reg).unwrap();
    let design = Design::<f64>::from_responses(&inputs, &targets).unwrap();
    let (model, imp) = train_bayesian_ridge(&design, &BayesianRidgeConfig::default()).unwrap();
    assert!(model.converged);
    assert_eq!(imp.weights.len(), 20);
    assert!((imp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(imp.weights.iter().all(|&w| w >= 0.0));
    assert_eq!(imp.item_ids, reg.input().item_ids());
}

#[test]
fn rounding_flag_maps_into_item_bounds() {
    let reg = Registry::builtin();
    let data = dataset(80, 9);
    let spec = PredictorSpec { id: "r".into(), kind: PredictorKind::NoisyLinear { sigma: 3.0, seed: 2 }, round_to_scale: true };
    let set = run_baseline::<f64>(&spec, &data, &reg, None).unwrap();
    for (c, id) in set.predictions.item_ids().iter().enumerate() {
        let item = reg.item(id).unwrap();
        for r in 0..80 {
            let v = set.predictions.get(r, c).unwrap();
            assert_eq!(v, v.round());
            assert!(item.contains(v as i32));
        }
    }
}
