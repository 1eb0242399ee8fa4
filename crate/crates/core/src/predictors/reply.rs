//! Parsers for model replies: role-play ratings and attribution citations.
//!
//! Both formats are lists of `Description N: body` entries. Entries are
//! located by their `Description N:` headers, so whitespace, newlines and
//! `;` terminators between entries are all tolerated.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

/// Inclusive bounds of a role-play rating.
pub const RATING_MIN: i32 = 1;
pub const RATING_MAX: i32 = 7;

static DESCRIPTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)description\s*(\d+)\s*:").expect("valid regex"));
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+$").expect("valid regex"));
static ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^item\s*(\d+)$").expect("valid regex"));

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReplyError {
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("description {description}: value {value} outside 1..=7")]
    OutOfRangeValue { description: usize, value: i64 },
    #[error("description {0} missing from reply")]
    MissingDescription(usize),
    #[error("description {0} appears more than once")]
    DuplicateDescription(usize),
    #[error("description {0} was not requested")]
    UnexpectedDescription(usize),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AttributionParseError {
    #[error("malformed attribution entry: {0}")]
    MalformedEntry(String),
    #[error("item index {0} out of range")]
    ItemIndexOutOfRange(usize),
    #[error("description index {0} out of range")]
    DescriptionIndexOutOfRange(usize),
}

/// Splits text into `(index, body)` entries. Returns the non-blank prefix
/// before the first header as an error value.
fn entries(text: &str) -> Result<Vec<(Result<usize, String>, &str)>, String> {
    let heads: Vec<_> = DESCRIPTION.captures_iter(text).collect();
    let first = heads.first().map_or(text.len(), |c| c.get(0).expect("group 0").start());
    let prefix = text[..first].trim();
    if !prefix.is_empty() || heads.is_empty() {
        return Err(if text.trim().is_empty() { "empty reply".to_string() } else { format!("unexpected text `{}`", truncate(prefix)) });
    }
    Ok(heads
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let body_start = c.get(0).expect("group 0").end();
            let body_end = heads.get(k + 1).map_or(text.len(), |n| n.get(0).expect("group 0").start());
            let digits = &c[1];
            let idx = digits.parse::<usize>().map_err(|_| digits.to_string());
            (idx, &text[body_start..body_end])
        })
        .collect())
}

fn truncate(s: &str) -> String {
    s.chars().take(40).collect()
}

fn strip_terminator<'a>(body: &'a str, terms: &[char]) -> &'a str {
    let b = body.trim();
    b.strip_suffix(terms).map(str::trim_end).unwrap_or(b)
}

/// Parses `Description 1:4;Description 2:7` into `{1: 4, 2: 7}`.
/// The reply must cover exactly descriptions `1..=n`.
pub fn parse_llm_reply(text: &str, n: usize) -> Result<BTreeMap<usize, i32>, ReplyError> {
    let list = entries(text).map_err(ReplyError::Malformed)?;
    let mut out = BTreeMap::new();
    for (idx, body) in list {
        let idx = idx.map_err(|d| ReplyError::Malformed(format!("description index `{d}` too large")))?;
        if idx == 0 || idx > n {
            return Err(ReplyError::UnexpectedDescription(idx));
        }
        let body = strip_terminator(body, &[';']);
        if !INTEGER.is_match(body) {
            return Err(ReplyError::Malformed(format!("description {idx}: `{}` is not an integer", truncate(body))));
        }
        let value = body.parse::<i64>().unwrap_or(if body.starts_with('-') { i64::MIN } else { i64::MAX });
        if !(i64::from(RATING_MIN)..=i64::from(RATING_MAX)).contains(&value) {
            return Err(ReplyError::OutOfRangeValue { description: idx, value });
        }
        if out.insert(idx, value as i32).is_some() {
            return Err(ReplyError::DuplicateDescription(idx));
        }
    }
    if let Some(missing) = (1..=n).find(|i| !out.contains_key(i)) {
        return Err(ReplyError::MissingDescription(missing));
    }
    Ok(out)
}

/// Canonical reply text; inverse of [`parse_llm_reply`].
pub fn format_llm_reply(values: &BTreeMap<usize, i32>) -> String {
    values.iter().map(|(i, v)| format!("Description {i}:{v}")).collect::<Vec<_>>().join(";")
}

/// Parses a single-question reply: one integer in `1..=7`, optionally
/// followed by a period.
pub fn parse_single_reply(text: &str) -> Result<i32, ReplyError> {
    let body = strip_terminator(text, &['.']);
    if !INTEGER.is_match(body) {
        return Err(ReplyError::Malformed(format!("`{}` is not an integer", truncate(body))));
    }
    let value = body.parse::<i64>().unwrap_or(i64::MAX);
    if !(i64::from(RATING_MIN)..=i64::from(RATING_MAX)).contains(&value) {
        return Err(ReplyError::OutOfRangeValue { description: 1, value });
    }
    Ok(value as i32)
}

/// Parses `Description 1: Item 2, Item 3; Description 2: Item 7`.
///
/// Every description in `1..=n_descriptions` appears in the result; those
/// the annotator skipped, or marked `None`, map to an empty set. A
/// description listed twice gets the union of its citations.
pub fn parse_attribution(
    text: &str,
    n_descriptions: usize,
    n_items: usize,
) -> Result<BTreeMap<usize, BTreeSet<usize>>, AttributionParseError> {
    let list = entries(text).map_err(AttributionParseError::MalformedEntry)?;
    let mut out: BTreeMap<usize, BTreeSet<usize>> = (1..=n_descriptions).map(|i| (i, BTreeSet::new())).collect();
    for (idx, body) in list {
        let idx = idx.map_err(|_| AttributionParseError::DescriptionIndexOutOfRange(usize::MAX))?;
        if idx == 0 || idx > n_descriptions {
            return Err(AttributionParseError::DescriptionIndexOutOfRange(idx));
        }
        let body = strip_terminator(body, &[';', '.']);
        if body.is_empty() || body.eq_ignore_ascii_case("none") {
            continue;
        }
        let set = out.get_mut(&idx).expect("pre-filled");
        for part in body.split(',') {
            let part = part.trim();
            let caps = ITEM
                .captures(part)
                .ok_or_else(|| AttributionParseError::MalformedEntry(format!("description {idx}: `{}`", truncate(part))))?;
            let item = caps[1].parse::<usize>().unwrap_or(usize::MAX);
            if item == 0 || item > n_items {
                return Err(AttributionParseError::ItemIndexOutOfRange(item));
            }
            set.insert(item);
        }
    }
    Ok(out)
}

/// Canonical attribution text; inverse of [`parse_attribution`].
pub fn format_attribution(map: &BTreeMap<usize, BTreeSet<usize>>) -> String {
    map.iter()
        .map(|(d, items)| {
            let body = if items.is_empty() {
                "None".to_string()
            } else {
                items.iter().map(|i| format!("Item {i}")).collect::<Vec<_>>().join(", ")
            };
            format!("Description {d}: {body}")
        })
        .collect::<Vec<_>>()
        .join("; ")
}
