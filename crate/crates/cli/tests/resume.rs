mod common;

use std::time::Duration;

use common::{baseline_config, llm_predictor, read_json, run, write_config};
use structamp_cli::manifest::{sha256_hex, RunDir};
use structamp_testkit::mock::{self, MockReply, MockServer};

fn llm_config(url: &str, extra: &str) -> String {
    baseline_config(60, 4) + &llm_predictor("llm", url, "score_only") + extra
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn run_after_predict_reuses_predictions() {
    let server = MockServer::start(Duration::ZERO, |r| MockReply::Content(mock::role_play(&r.system, &r.user, false))).await;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &llm_config(&server.url, ""));
    let cfg = cfg.to_str().unwrap().to_string();

    let (code, _, err) = tokio::task::spawn_blocking({
        let cfg = cfg.clone();
        move || run(&["predict", "-c", &cfg])
    })
    .await
    .unwrap();
    assert_eq!(code, 0, "{err}");
    let after_predict = server.requests();
    assert!(after_predict > 0);

    let (code, out, err) = tokio::task::spawn_blocking({
        let cfg = cfg.clone();
        move || run(&["run", "-c", &cfg])
    })
    .await
    .unwrap();
    assert_eq!(code, 0, "{err}");
    assert_eq!(server.requests(), after_predict, "run re-queried a finished predict stage");
    assert!(out.trim().ends_with("manifest.json"));

    let root = tmp.path().join("run");
    let dir = RunDir::open_existing(&root).unwrap().unwrap();
    assert!(dir.verify().is_empty());
    for (rel, rec) in &dir.manifest().artifacts {
        let bytes = std::fs::read(root.join(rel)).unwrap();
        assert_eq!(sha256_hex(&bytes), rec.sha256, "{rel}");
        assert_eq!(bytes.len() as u64, rec.bytes, "{rel}");
    }
    for stage in ["synth", "predict", "score", "analyze", "noise", "attentive", "report"] {
        assert!(dir.is_complete(stage), "{stage} not complete");
    }
    let index = read_json(&root.join("analysis/index.json"));
    assert!(index["predictors"].as_array().unwrap().iter().any(|p| p["id"] == "llm"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn tampered_artifact_reruns_only_its_stage_chain() {
    let server = MockServer::start(Duration::ZERO, |r| MockReply::Content(mock::role_play(&r.system, &r.user, false))).await;
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &llm_config(&server.url, ""));
    let cfg = cfg.to_str().unwrap().to_string();
    let go = |cfg: String| tokio::task::spawn_blocking(move || run(&["run", "-c", &cfg]));

    let (code, _, err) = go(cfg.clone()).await.unwrap();
    assert_eq!(code, 0, "{err}");
    let first = server.requests();
    let root = tmp.path().join("run");
    let summary = std::fs::read(root.join("analysis/summary.csv")).unwrap();

    std::fs::write(root.join("analysis/summary.csv"), b"tampered").unwrap();
    let (code, _, err) = go(cfg.clone()).await.unwrap();
    assert_eq!(code, 0, "{err}");
    assert_eq!(server.requests(), first);
    assert_eq!(std::fs::read(root.join("analysis/summary.csv")).unwrap(), summary);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn changed_config_starts_over_but_the_cache_answers() {
    let server = MockServer::start(Duration::ZERO, |r| MockReply::Content(mock::role_play(&r.system, &r.user, false))).await;
    let tmp = tempfile::tempdir().unwrap();
    let body = llm_config(&server.url, "\n[llm]\ncache_dir = \"cache\"\n");
    let cfg = write_config(tmp.path(), &body).to_str().unwrap().to_string();
    let go = |cfg: String| tokio::task::spawn_blocking(move || run(&["run", "-c", &cfg]));

    let (code, _, err) = go(cfg.clone()).await.unwrap();
    assert_eq!(code, 0, "{err}");
    let first = server.requests();
    write_config(tmp.path(), &body.replace("seed = 11", "seed = 12"));
    let (code, _, err) = go(cfg.clone()).await.unwrap();
    assert_eq!(code, 0, "{err}");
    assert_eq!(server.requests(), first, "warm cache should answer every prompt");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn attribution_and_summary_conditions_end_to_end() {
    let server = MockServer::start(Duration::ZERO, mock::full_service).await;
    let tmp = tempfile::tempdir().unwrap();
    let url = server.url.clone();
    let body = llm_config(&url, "")
        + &llm_predictor("llm_summary", &url, "summary_only")
        + &llm_predictor("llm_both", &url, "summary_plus_score")
        + "\n[llm.summaries]\npredictor = \"llm\"\nextractor_model = \"mock-extractor\"\n"
        + "\n[attribution]\nannotator_model = \"mock-annotator\"\n";
    let cfg = write_config(tmp.path(), &body).to_str().unwrap().to_string();
    let (code, _, err) = tokio::task::spawn_blocking(move || run(&["run", "-c", &cfg])).await.unwrap();
    assert_eq!(code, 0, "{err}");

    let root = tmp.path().join("run");
    for rel in [
        "llm/summaries.json",
        "predictions/llm_summary.json",
        "predictions/llm_both.json",
        "attribution/attribution.json",
        "attribution/consensus.json",
        "attribution/vectors.csv",
        "reports/consensus_pearson.svg",
        "reports/consensus_kl.svg",
    ] {
        assert!(root.join(rel).exists(), "{rel} missing");
    }
    let dir = RunDir::open_existing(&root).unwrap().unwrap();
    assert!(dir.is_complete("attribution"));
    assert!(dir.verify().is_empty());
}

#[test]
fn report_on_missing_run_dir_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["report", "--run-dir", tmp.path().join("absent").to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn analyze_before_predict_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &baseline_config(40, 2));
    let (code, _, err) = run(&["analyze", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("predict"), "{err}");
}
