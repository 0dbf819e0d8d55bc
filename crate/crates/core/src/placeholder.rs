//! Placeholder rendering and parsing in both supported styles:
//! bracketed lowercase (`[location1]`, `[pronoun]`) and uppercase with
//! underscores (`LOCATION_1`, `PRONOUN`).

use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::text_model::EntityLabel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceholderStyle {
    #[default]
    Bracketed,
    Uppercase,
}

/// Lowercase stem used by the bracketed style.
pub fn slug(label: EntityLabel) -> &'static str {
    match label {
        EntityLabel::PersonFirstname => "firstname",
        EntityLabel::PersonLastname => "lastname",
        EntityLabel::Occupation => "occupation",
        EntityLabel::Location => "location",
        EntityLabel::Time => "time",
        EntityLabel::Organization => "organization",
        EntityLabel::Date => "date",
        EntityLabel::Address => "address",
        EntityLabel::PhoneNumber => "phonenumber",
        EntityLabel::EmailAddress => "emailaddress",
        EntityLabel::OtherIdentifyingAttribute => "otheridentifyingattribute",
        EntityLabel::Outside => "none",
        EntityLabel::Pronoun => "pronoun",
        EntityLabel::Numeric => "numeric",
    }
}

fn label_from_slug(s: &str) -> Option<EntityLabel> {
    EntityLabel::ALL.into_iter().find(|&l| slug(l) == s)
}

/// `index = None` renders the un-indexed form.
pub fn render(label: EntityLabel, index: Option<u32>, style: PlaceholderStyle) -> String {
    match (style, index) {
        (PlaceholderStyle::Bracketed, Some(i)) => format!("[{}{i}]", slug(label)),
        (PlaceholderStyle::Bracketed, None) => format!("[{}]", slug(label)),
        (PlaceholderStyle::Uppercase, Some(i)) => format!("{}_{i}", label.as_str()),
        (PlaceholderStyle::Uppercase, None) => label.as_str().to_string(),
    }
}

/// A placeholder found in text. Offsets are bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoundPlaceholder {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
    pub index: Option<u32>,
}

static BRACKETED: LazyLock<Regex> = LazyLock::new(|| {
    let slugs: Vec<&str> = EntityLabel::ALL
        .into_iter()
        .filter(|&l| l != EntityLabel::Outside)
        .map(slug)
        .collect();
    Regex::new(&format!(r"\[({})(\d*)\]", slugs.join("|"))).unwrap()
});

static UPPERCASE: LazyLock<Regex> = LazyLock::new(|| {
    let mut names: Vec<&str> = EntityLabel::ALL
        .into_iter()
        .filter(|&l| l != EntityLabel::Outside)
        .map(EntityLabel::as_str)
        .collect();
    // longest first so PERSON_FIRSTNAME is not cut short
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    Regex::new(&format!(r"\b({})(?:_(\d+))?", names.join("|"))).unwrap()
});

fn from_bracketed(caps: &Captures<'_>) -> FoundPlaceholder {
    let whole = caps.get(0).unwrap();
    FoundPlaceholder {
        start: whole.start(),
        end: whole.end(),
        label: label_from_slug(&caps[1]).expect("regex only matches known slugs"),
        index: caps[2].parse().ok(),
    }
}

fn from_uppercase(text: &str, caps: &Captures<'_>) -> Option<FoundPlaceholder> {
    let whole = caps.get(0).unwrap();
    let label: EntityLabel = caps[1].parse().expect("regex only matches known labels");
    let index = caps.get(2).and_then(|m| m.as_str().parse().ok());
    if index.is_none() {
        // bare form only for un-indexable labels, and only as a whole word
        let glued = text[whole.end()..]
            .chars()
            .next()
            .is_some_and(|c| c.is_alphanumeric() || c == '_');
        if !label.is_engine_derived() || glued {
            return None;
        }
    }
    Some(FoundPlaceholder {
        start: whole.start(),
        end: whole.end(),
        label,
        index,
    })
}

/// All placeholders of either style, in text order.
pub fn find_placeholders(text: &str) -> Vec<FoundPlaceholder> {
    let mut found: Vec<FoundPlaceholder> = BRACKETED
        .captures_iter(text)
        .map(|c| from_bracketed(&c))
        .collect();
    found.extend(
        UPPERCASE
            .captures_iter(text)
            .filter_map(|c| from_uppercase(text, &c)),
    );
    found.sort_by_key(|p| p.start);
    found
}

/// Placeholder starting exactly at byte `at`, if any.
pub fn placeholder_at(text: &str, at: usize) -> Option<FoundPlaceholder> {
    if let Some(caps) = BRACKETED.captures_at(text, at) {
        if caps.get(0).unwrap().start() == at {
            return Some(from_bracketed(&caps));
        }
    }
    let caps = UPPERCASE.captures_at(text, at)?;
    if caps.get(0).unwrap().start() != at {
        return None;
    }
    from_uppercase(text, &caps)
}

/// Removes every placeholder. Whitespace around a removed placeholder
/// collapses to a single space, or to nothing at either end of the text.
pub fn strip_placeholders(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    // a placeholder was removed since the last kept text
    let mut pending = false;
    // whitespace was dropped next to a removed placeholder
    let mut gap = false;
    let mut cursor = 0;

    let keep = |segment: &str, out: &mut String, pending: &mut bool, gap: &mut bool| {
        if !*pending {
            out.push_str(segment);
            return;
        }
        let trimmed = segment.trim_start();
        *gap |= trimmed.len() < segment.len();
        if trimmed.is_empty() {
            return;
        }
        let kept = out.trim_end().len();
        *gap |= kept < out.len();
        out.truncate(kept);
        if *gap && !out.is_empty() {
            out.push(' ');
        }
        out.push_str(trimmed);
        *pending = false;
        *gap = false;
    };

    for p in find_placeholders(text) {
        if p.start < cursor {
            continue;
        }
        keep(&text[cursor..p.start], &mut out, &mut pending, &mut gap);
        pending = true;
        cursor = p.end;
    }
    keep(&text[cursor..], &mut out, &mut pending, &mut gap);
    if pending {
        let kept = out.trim_end().len();
        out.truncate(kept);
    }
    out
}
