#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_structamp"))
}

/// Runs the binary with `args`, returning the exit code and both streams.
pub fn run(args: &[&str]) -> (i32, String, String) {
    let Output { status, stdout, stderr } = bin().args(args).output().expect("spawn structamp");
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

/// A small synthetic run with statistical predictors only.
pub fn baseline_config(n: usize, seed: u64) -> String {
    format!(
        r#"output_dir = "run"

[synth]
n_participants = {n}
seed = {seed}
inattention_rate = 0.2

[analysis]
n_perm = 200
seed = 11

[[predictors]]
id = "linear"
kind = "linear"

[[predictors]]
id = "ideal"
kind = "ideal"

[[predictors]]
id = "knn"
kind = "knn"
k = 10

[noise]
sigmas = [0.0, 0.5, 1.0]
seed = 5

[attentive]
"#
    )
}

/// An LLM predictor block pointing at `url`; no auth header is sent.
pub fn llm_predictor(id: &str, url: &str, condition: &str) -> String {
    format!(
        r#"
[[predictors]]
id = "{id}"
kind = "llm"
endpoint = "{url}"
model = "mock-reasoner"
reasoning = true
condition = "{condition}"
api_key_env = ""
"#
    )
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}
