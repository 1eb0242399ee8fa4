//! Seeded fuzz corpora for the reply parsers: formatting variants must
//! parse to the canonical map, corruptions must land in the right error
//! class, and arbitrary text must never panic.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::Rng;
use structamp_core::predictors::reply::{
    format_attribution, format_llm_reply, parse_attribution, parse_llm_reply, AttributionParseError, ReplyError,
};
use structamp_testkit as oracle;
use structamp_testkit::corpus::{attribution_case, pick, rating_case, AttrExpect, Expect};

const CASES: usize = 600;

#[test]
fn rating_corpus() {
    let mut rng = oracle::rng(2024);
    let mut seen = [0usize; 6];
    for case in 0..CASES {
        let (text, n, expect) = rating_case(&mut rng);
        let got = parse_llm_reply(&text, n);
        let ok = match (&expect, &got) {
            (Expect::Ok(m), Ok(g)) => {
                seen[0] += 1;
                m == g
            }
            (Expect::OutOfRange, Err(ReplyError::OutOfRangeValue { .. })) => {
                seen[1] += 1;
                true
            }
            (Expect::Missing(i), Err(ReplyError::MissingDescription(j))) => {
                seen[2] += 1;
                i == j
            }
            (Expect::Duplicate(i), Err(ReplyError::DuplicateDescription(j))) => {
                seen[3] += 1;
                i == j
            }
            (Expect::Unexpected(i), Err(ReplyError::UnexpectedDescription(j))) => {
                seen[4] += 1;
                i == j
            }
            (Expect::Malformed, Err(ReplyError::Malformed(_))) => {
                seen[5] += 1;
                true
            }
            _ => false,
        };
        assert!(ok, "case {case}: {text:?} expected {expect:?}, got {got:?}");
    }
    assert!(seen.iter().all(|&c| c >= 50), "{seen:?}");
}

#[test]
fn attribution_corpus() {
    let mut rng = oracle::rng(4048);
    let mut seen = [0usize; 4];
    for case in 0..CASES {
        let (text, n, expect) = attribution_case(&mut rng);
        let got = parse_attribution(&text, n, 20);
        let ok = match (&expect, &got) {
            (AttrExpect::Ok(m), Ok(g)) => {
                seen[0] += 1;
                m == g
            }
            (AttrExpect::Malformed, Err(AttributionParseError::MalformedEntry(_))) => {
                seen[1] += 1;
                true
            }
            (AttrExpect::ItemRange(i), Err(AttributionParseError::ItemIndexOutOfRange(j))) => {
                seen[2] += 1;
                i == j
            }
            (AttrExpect::DescriptionRange(i), Err(AttributionParseError::DescriptionIndexOutOfRange(j))) => {
                seen[3] += 1;
                i == j
            }
            _ => false,
        };
        assert!(ok, "case {case}: {text:?} expected {expect:?}, got {got:?}");
    }
    assert!(seen.iter().all(|&c| c >= 50), "{seen:?}");
}

#[test]
fn arbitrary_text_never_panics() {
    let mut rng = oracle::rng(99);
    let atoms = [
        "Description", "description ", "Item", " ", "\n", ":", ";", ",", ".", "1", "7", "20", "99999999999999999999999",
        "-", "None", "é", "中", "\u{0}", "Description 1:", "Item 3",
    ];
    for _ in 0..CASES {
        let text: String = (0..rng.random_range(0..20)).map(|_| pick(&mut rng, &atoms)).collect();
        let n = rng.random_range(0..6);
        let _ = parse_llm_reply(&text, n);
        let _ = parse_attribution(&text, n, 20);
    }
}

proptest! {
    #[test]
    fn rating_round_trip(values in prop::collection::vec(1i32..=7, 1..30)) {
        let m: BTreeMap<usize, i32> = values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect();
        prop_assert_eq!(parse_llm_reply(&format_llm_reply(&m), m.len()).unwrap(), m);
    }

    #[test]
    fn attribution_round_trip(sets in prop::collection::vec(prop::collection::btree_set(1usize..=20, 0..8), 1..12)) {
        let m: BTreeMap<usize, BTreeSet<usize>> = sets.into_iter().enumerate().map(|(i, s)| (i + 1, s)).collect();
        prop_assert_eq!(parse_attribution(&format_attribution(&m), m.len(), 20).unwrap(), m);
    }

    #[test]
    fn parsers_total_on_any_string(s in ".{0,200}", n in 0usize..8) {
        let _ = parse_llm_reply(&s, n);
        let _ = parse_attribution(&s, n, 20);
    }
}
