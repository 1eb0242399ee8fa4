//! Generator properties and the ideal predictor against independent oracles.

use rand::Rng;
use structamp_core::data::{filter_attentive, score_subscales, Registry, ResponseMatrix};
use structamp_core::synthgen::{
    generate, ideal_predictor, FactorPosterior, GeneratorConfig, ItemLoading, SynthError,
};
use structamp_testkit as oracle;

fn cfg(n: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig { n_participants: n, seed, ..GeneratorConfig::default() }
}

fn column(m: &ResponseMatrix, item: &str, reg: &Registry) -> Vec<f64> {
    let c = m.item_index(item).unwrap();
    let spec = reg.item(item).unwrap();
    (0..m.n_participants())
        .map(|r| {
            let v = m.get(r, c).unwrap();
            f64::from(if spec.reverse_scored { spec.response_min + spec.response_max - v } else { v })
        })
        .collect()
}

#[test]
fn same_seed_same_data_and_rows_are_independent_streams() {
    let reg = Registry::builtin();
    let a = generate(&cfg(120, 9), &reg).unwrap();
    let b = generate(&cfg(120, 9), &reg).unwrap();
    assert_eq!(a, b);
    let c = generate(&cfg(120, 10), &reg).unwrap();
    assert_ne!(a.targets, c.targets);
    // A longer run shares its prefix with a shorter one.
    let long = generate(&cfg(300, 9), &reg).unwrap();
    for r in 0..120 {
        assert_eq!(a.big5.row(r), long.big5.row(r));
        assert_eq!(a.targets.row(r), long.targets.row(r));
        assert_eq!(a.truth.factor_row(r), long.truth.factor_row(r));
    }
}

#[test]
fn zero_noise_items_track_their_factor() {
    let reg = Registry::builtin();
    let data = generate(&GeneratorConfig { response_noise_std: 0.0, ..cfg(2000, 3) }, &reg).unwrap();
    let fmap = reg.factor_map();
    let items = reg.input().item_ids();
    let mut checked = 0;
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            if fmap[a] == fmap[b] {
                let r = oracle::pearson(&column(&data.big5, a, &reg), &column(&data.big5, b, &reg));
                assert!(r > 0.95, "{a} vs {b}: r = {r}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 30);
}

#[test]
fn full_inattention_is_independent_across_scales() {
    let reg = Registry::builtin();
    let data = generate(&GeneratorConfig { inattention_rate: 1.0, ..cfg(5000, 4) }, &reg).unwrap();
    assert_eq!(data.truth.n_attentive(), 0);
    let inputs: Vec<Vec<f64>> = reg.input().item_ids().iter().map(|id| column(&data.big5, id, &reg)).collect();
    let targets: Vec<Vec<f64>> = data.targets.item_ids().iter().map(|id| column(&data.targets, id, &reg)).collect();
    let (mut sum, mut count, mut worst) = (0.0, 0usize, 0.0f64);
    for x in &inputs {
        for y in &targets {
            let r = oracle::pearson(x, y).abs();
            sum += r;
            count += 1;
            worst = worst.max(r);
        }
    }
    // Standard error of r here is about 0.014.
    assert!(sum / (count as f64) < 0.02, "mean |r| = {}", sum / count as f64);
    assert!(worst < 0.075, "max |r| = {worst}");
}

#[test]
fn posterior_matches_quadrature_on_two_factors() {
    let mut rng = oracle::rng(17);
    for case in 0..25 {
        let s00: f64 = rng.random_range(0.5..2.0);
        let s11: f64 = rng.random_range(0.5..2.0);
        let rho: f64 = rng.random_range(-0.6..0.6);
        let s01 = rho * (s00 * s11).sqrt();
        let n_items = rng.random_range(1..=5);
        let items: Vec<(usize, f64, f64)> = (0..n_items)
            .map(|_| (rng.random_range(0..2), rng.random_range(0.3..1.5), rng.random_range(0.3..1.5)))
            .collect();
        let z: Vec<f64> = (0..n_items).map(|_| rng.random_range(-2.0..2.0)).collect();

        let expect = oracle::posterior_mean_2d([[s00, s01], [s01, s11]], &items, &z, 10.0, 800);
        let pairs: Vec<(usize, f64)> = items.iter().map(|&(k, l, _)| (k, l)).collect();
        let vars: Vec<f64> = items.iter().map(|i| i.2).collect();
        let got = FactorPosterior::new(&[s00, s01, s01, s11], 2, &pairs, &vars).unwrap().mean(&z);
        for k in 0..2 {
            assert!((got[k] - expect[k]).abs() < 1e-3, "case {case} factor {k}: {} vs {}", got[k], expect[k]);
        }
    }
}

#[test]
fn zero_noise_recovers_noiseless_targets_exactly() {
    let reg = Registry::builtin();
    let c = GeneratorConfig { response_noise_std: 0.0, ..cfg(200, 8) };
    let data = generate(&c, &reg).unwrap();
    let ideal = ideal_predictor(&c, &reg).unwrap();
    for r in 0..200 {
        let got = ideal.subscales_from_continuous(data.truth.input_row(r));
        for (g, t) in got.iter().zip(data.truth.noiseless_row(r)) {
            assert!((g - t).abs() < 1e-6, "row {r}: {g} vs {t}");
        }
    }
}

#[test]
fn factor_covariance_is_reproduced() {
    let reg = Registry::builtin();
    let c = cfg(10_000, 5);
    let data = generate(&c, &reg).unwrap();
    let n = 10_000.0;
    let (mut err, mut norm) = (0.0, 0.0);
    for i in 0..5 {
        for j in 0..5 {
            let s: f64 = (0..10_000).map(|r| data.truth.factor_row(r)[i] * data.truth.factor_row(r)[j]).sum();
            let d = s / n - c.factor_covariance[i][j];
            err += d * d;
            norm += c.factor_covariance[i][j].powi(2);
        }
    }
    assert!((err / norm).sqrt() < 0.05, "relative Frobenius error {}", (err / norm).sqrt());
}

fn mean_cross_correlation(noise: f64) -> f64 {
    let reg = Registry::builtin();
    let data = generate(&GeneratorConfig { response_noise_std: noise, ..cfg(3000, 6) }, &reg).unwrap();
    let big5 = score_subscales::<f64, _>(&data.big5, reg.input()).unwrap();
    let mut total = 0.0;
    let mut count = 0;
    for scale in reg.targets() {
        let t = score_subscales::<f64, _>(&data.targets, scale).unwrap();
        for a in 0..big5.subscale_ids.len() {
            for b in 0..t.subscale_ids.len() {
                let x: Vec<f64> = big5.column(a).into_iter().flatten().collect();
                let y: Vec<f64> = t.column(b).into_iter().flatten().collect();
                total += oracle::pearson(&x, &y).abs();
                count += 1;
            }
        }
    }
    total / f64::from(count)
}

#[test]
fn response_noise_weakens_observed_correlations() {
    let low = mean_cross_correlation(0.3);
    let high = mean_cross_correlation(2.0);
    assert!(high < 0.8 * low, "noise 0.3: {low}, noise 2.0: {high}");
}

#[test]
fn attention_filter_removes_exactly_the_planted_rows() {
    let reg = Registry::builtin();
    let data = generate(&GeneratorConfig { inattention_rate: 0.3, ..cfg(1000, 2) }, &reg).unwrap();
    let kept = filter_attentive(&data.dataset(), &reg).unwrap();
    assert_eq!(kept.n_participants(), data.truth.n_attentive());
    let planted: Vec<&String> = data
        .truth
        .participant_ids
        .iter()
        .zip(&data.truth.inattentive)
        .filter(|(_, bad)| !**bad)
        .map(|(id, _)| id)
        .collect();
    assert_eq!(kept.participant_ids().iter().collect::<Vec<_>>(), planted);
    let share = 1.0 - kept.n_participants() as f64 / 1000.0;
    assert!((share - 0.3).abs() < 0.05, "{share}");
}

#[test]
fn invalid_configs_are_rejected() {
    let reg = Registry::builtin();
    let mut bad_cov = GeneratorConfig::default();
    bad_cov.factor_covariance[0][1] = 2.0;
    bad_cov.factor_covariance[1][0] = 2.0;
    assert!(matches!(generate(&bad_cov, &reg), Err(SynthError::InvalidCovariance(_))));

    let mut asym = GeneratorConfig::default();
    asym.factor_covariance[0][1] = 0.25;
    assert!(matches!(generate(&asym, &reg), Err(SynthError::InvalidCovariance(_))));

    for c in [
        GeneratorConfig { inattention_rate: 1.5, ..GeneratorConfig::default() },
        GeneratorConfig { response_noise_std: -1.0, ..GeneratorConfig::default() },
        GeneratorConfig {
            item_loadings: vec![ItemLoading { item_id: "nope".into(), latent: "O".into(), loading: 1.0 }],
            ..GeneratorConfig::default()
        },
    ] {
        assert!(matches!(generate(&c, &reg), Err(SynthError::InvalidConfig(_))), "{c:?}");
    }
}

#[test]
fn generated_csv_round_trips() {
    let reg = Registry::builtin();
    let data = generate(&cfg(50, 1), &reg).unwrap();
    let mut buf = Vec::new();
    data.dataset().write_csv(&mut buf).unwrap();
    let back = structamp_core::data::load_dataset(buf.as_slice(), &reg).unwrap();
    assert_eq!(back, data.dataset());
}
