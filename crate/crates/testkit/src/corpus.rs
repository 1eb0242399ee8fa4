//! Seeded reply corpora for the rating and attribution parsers. Each case
//! carries the classification a correct parser must produce.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn header(rng: &mut ChaCha8Rng, i: usize) -> String {
    let word = pick(rng, &["Description", "description", "DESCRIPTION"]);
    let gap = pick(rng, &[" ", "  ", "\t", ""]);
    let colon = pick(rng, &[":", " :", ": ", ":\t", " : "]);
    format!("{word}{gap}{i}{colon}")
}

const SEPARATORS: [&str; 7] = [";", "; ", ";\n", "\n", " ; ", "\r\n", ";\r\n"];

fn render_ratings(rng: &mut ChaCha8Rng, entries: &[(usize, String)]) -> String {
    let mut out = String::from(pick(rng, &["", " ", "\n", "  \n"]));
    for (k, (i, v)) in entries.iter().enumerate() {
        if k > 0 {
            out.push_str(pick(rng, &SEPARATORS));
        }
        out.push_str(&header(rng, *i));
        out.push_str(v);
    }
    out.push_str(pick(rng, &["", ";", "\n", "; \n", " "]));
    out
}

#[derive(Debug, PartialEq)]
pub enum Expect {
    Ok(BTreeMap<usize, i32>),
    Malformed,
    OutOfRange,
    Missing(usize),
    Duplicate(usize),
    Unexpected(usize),
}

pub fn rating_case(rng: &mut ChaCha8Rng) -> (String, usize, Expect) {
    let n = rng.random_range(2..=12);
    let truth: BTreeMap<usize, i32> = (1..=n).map(|i| (i, rng.random_range(1..=7))).collect();
    let mut entries: Vec<(usize, String)> = truth.iter().map(|(&i, &v)| (i, v.to_string())).collect();
    if rng.random_bool(0.3) {
        entries.shuffle(rng);
    }
    let k = rng.random_range(0..entries.len());
    let expect = match rng.random_range(0..6) {
        0 => Expect::Ok(truth),
        1 => {
            entries[k].1 = pick(rng, &["0", "8", "9", "10", "-1", "+12", "100"]).to_string();
            Expect::OutOfRange
        }
        2 => {
            let (i, _) = entries.remove(k);
            Expect::Missing(i)
        }
        3 => {
            let dup = entries[k].clone();
            let at = rng.random_range(k + 1..=entries.len());
            entries.insert(at, dup.clone());
            Expect::Duplicate(dup.0)
        }
        4 => {
            let extra = if rng.random_bool(0.5) { n + rng.random_range(1..5) } else { 0 };
            entries.push((extra, "3".into()));
            Expect::Unexpected(extra)
        }
        _ => {
            if rng.random_bool(0.4) {
                let text = render_ratings(rng, &entries);
                let prefix = pick(rng, &["Sure! ", "Here you go:\n", "1. ", "Answer - "]);
                return (format!("{prefix}{text}"), n, Expect::Malformed);
            }
            entries[k].1 = pick(rng, &["four", "4.5", "", "4 (agree)", "4/7", "**4**"]).to_string();
            Expect::Malformed
        }
    };
    (render_ratings(rng, &entries), n, expect)
}

fn citations(rng: &mut ChaCha8Rng, items: &BTreeSet<usize>) -> String {
    if items.is_empty() {
        return pick(rng, &["None", "none", ""]).to_string();
    }
    let sep = pick(rng, &[", ", ",", " , ", ",  "]);
    items
        .iter()
        .map(|i| format!("{}{}{i}", pick(rng, &["Item", "item", "ITEM"]), pick(rng, &[" ", "", "  "])))
        .collect::<Vec<_>>()
        .join(sep)
}

#[derive(Debug, PartialEq)]
pub enum AttrExpect {
    Ok(BTreeMap<usize, BTreeSet<usize>>),
    Malformed,
    ItemRange(usize),
    DescriptionRange(usize),
}

pub fn attribution_case(rng: &mut ChaCha8Rng) -> (String, usize, AttrExpect) {
    let n = rng.random_range(1..=10);
    let truth: BTreeMap<usize, BTreeSet<usize>> = (1..=n)
        .map(|d| {
            let k = rng.random_range(0..=5);
            (d, (0..k).map(|_| rng.random_range(1..=20)).collect())
        })
        .collect();
    let mut entries = Vec::new();
    for (&d, s) in &truth {
        if !s.is_empty() || rng.random_bool(0.7) {
            entries.push((d, citations(rng, s)));
        }
    }
    if entries.is_empty() {
        entries.push((1, "None".into()));
    }
    let k = rng.random_range(0..entries.len());
    let expect = match rng.random_range(0..4) {
        0 | 1 => AttrExpect::Ok(truth),
        2 => {
            if rng.random_bool(0.5) {
                let bad = if rng.random_bool(0.5) { 0 } else { rng.random_range(21..40) };
                entries[k].1 = format!("Item {bad}");
                AttrExpect::ItemRange(bad)
            } else {
                let bad = n + rng.random_range(1..4);
                entries.push((bad, "Item 1".into()));
                AttrExpect::DescriptionRange(bad)
            }
        }
        _ => {
            entries[k].1 = pick(rng, &["Item 2 and Item 3", "2, 3", "Items 4", "Item two", "Item 5; Item"]).to_string();
            AttrExpect::Malformed
        }
    };
    let mut out = String::from(pick(rng, &["", "\n", " "]));
    for (i, (d, body)) in entries.iter().enumerate() {
        if i > 0 {
            out.push_str(pick(rng, &["; ", ";", ";\n", "\n", ". "]));
        }
        out.push_str(&header(rng, *d));
        out.push_str(body);
    }
    out.push_str(pick(rng, &["", ".", ";", "\n"]));
    (out, n, expect)
}
