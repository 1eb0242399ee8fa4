//! Rendered prompts must match the committed goldens byte for byte.
//! Regenerate with `python3 tests/golden/make_goldens.py`.

use std::path::PathBuf;

use serde_json::Value;
use structamp_core::data::Registry;
use structamp_core::predictors::prompt::{
    messages_to_json, render_attribution_prompt, render_prompt, render_summary_extraction_prompt, InfoCondition,
    Message, RenderOrder,
};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/v1")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(golden_dir().join(format!("{name}.json"))).unwrap()
}

struct Inputs {
    responses: Vec<Option<i32>>,
    summary: String,
    reasoning: String,
    seed: u64,
    single: usize,
    scale: String,
}

fn inputs() -> Inputs {
    let v: Value = serde_json::from_str(&golden("inputs")).unwrap();
    Inputs {
        responses: v["responses"].as_array().unwrap().iter().map(|x| Some(x.as_i64().unwrap() as i32)).collect(),
        summary: v["summary"].as_str().unwrap().into(),
        reasoning: v["reasoning"].as_str().unwrap().into(),
        seed: v["shuffle_seed"].as_u64().unwrap(),
        single: v["single_index"].as_u64().unwrap() as usize,
        scale: v["target_scale"].as_str().unwrap().into(),
    }
}

fn check(name: &str, messages: Vec<Message>) {
    assert_eq!(messages_to_json(&messages), golden(name), "golden `{name}` differs");
}

fn render(condition: InfoCondition, order: RenderOrder, summary: Option<&str>) -> Vec<Message> {
    let reg = Registry::builtin();
    let inp = inputs();
    let targets = &reg.scale(&inp.scale).unwrap().items;
    render_prompt(reg.input(), &inp.responses, targets, condition, order, summary).unwrap()
}

#[test]
fn score_only_standard() {
    check("score_only", render(InfoCondition::ScoreOnly, RenderOrder::Standard, None));
}

#[test]
fn summary_plus_score() {
    let s = inputs().summary;
    let m = render(InfoCondition::SummaryPlusScore, RenderOrder::Standard, Some(&s));
    assert!(m[0].content.contains("supplementary summary generated by a model"));
    check("summary_plus_score", m);
}

#[test]
fn summary_only() {
    let s = inputs().summary;
    check("summary_only", render(InfoCondition::SummaryOnly, RenderOrder::Standard, Some(&s)));
}

#[test]
fn random_order() {
    let seed = inputs().seed;
    let a = render(InfoCondition::ScoreOnly, RenderOrder::Random(seed), None);
    let b = render(InfoCondition::ScoreOnly, RenderOrder::Random(seed), None);
    assert_eq!(a, b);
    check("random_order", a);
}

#[test]
fn single_question() {
    let i = inputs().single;
    check("single", render(InfoCondition::ScoreOnly, RenderOrder::Single(i), None));
}

#[test]
fn attribution_annotation() {
    let reg = Registry::builtin();
    let inp = inputs();
    check("attribution", render_attribution_prompt(reg.input(), &inp.responses, &inp.scale, &inp.reasoning).unwrap());
}

#[test]
fn summary_extraction() {
    check("summary_extraction", render_summary_extraction_prompt(&inputs().reasoning).unwrap());
}

#[test]
fn format_instruction_is_verbatim() {
    let m = render(InfoCondition::ScoreOnly, RenderOrder::Standard, None);
    assert!(m[0].content.contains("Description 1:(integer from 1 to 7);Description 2:(integer from 1 to 7)..."));
}
