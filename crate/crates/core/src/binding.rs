//! Resolution of free-text asset phrases against a scenario inventory.
//!
//! Matching is token based: both sides are lowercased, split on anything that
//! is not alphanumeric, stripped of quantity words and function words, and
//! crudely singularised. An asset matches a phrase when every remaining token
//! of its label occurs in the phrase. When no asset matches that way, the
//! label's leading chunk (the words before its first function word, e.g.
//! "medical team" for "medical team for immediate on-site treatment") is
//! accepted as a contiguous token run.

use crate::model::{
    Asset, AssetId, DiagnosticCode, ParseDiagnostic, PlanOfAction, Scenario, Span,
};

const QUANTITY_WORDS: &[(&str, u32)] = &[
    ("one", 1),
    ("single", 1),
    ("two", 2),
    ("both", 2),
    ("pair", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
];

const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "with", "for", "of", "to", "in", "on", "at", "by", "from",
    "equipped", "all", "each", "several", "any", "its", "their", "plus", "as", "well",
];

fn raw_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn singular(word: String) -> String {
    if word.len() > 4 && word.ends_with("ies") {
        format!("{}y", &word[..word.len() - 3])
    } else if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") {
        word[..word.len() - 1].to_owned()
    } else {
        word
    }
}

fn is_quantity(word: &str) -> bool {
    word.chars().all(|c| c.is_ascii_digit()) || QUANTITY_WORDS.iter().any(|(w, _)| *w == word)
}

fn is_function(word: &str) -> bool {
    FUNCTION_WORDS.contains(&word)
}

/// Content tokens of `text` in order, after normalisation.
pub fn content_tokens(text: &str) -> Vec<String> {
    raw_words(text)
        .filter(|w| !is_quantity(w) && !is_function(w))
        .map(singular)
        .collect()
}

/// Leading run of content words of a label, before its first function word.
fn head_chunk(label: &str) -> Vec<String> {
    raw_words(label)
        .skip_while(|w| is_quantity(w) || is_function(w))
        .take_while(|w| !is_function(w) && !is_quantity(w))
        .map(singular)
        .collect()
}

fn contains_run(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Whether every content token of `label` occurs in `phrase`.
pub fn label_matches(label: &str, phrase: &str) -> bool {
    let label_tokens = content_tokens(label);
    if label_tokens.is_empty() {
        return false;
    }
    let phrase_tokens = content_tokens(phrase);
    label_tokens.iter().all(|t| phrase_tokens.contains(t))
}

/// Assets referenced by `phrase`, in inventory order.
pub fn match_assets(phrase: &str, assets: &[Asset]) -> Vec<AssetId> {
    let strict: Vec<AssetId> = assets
        .iter()
        .filter(|a| label_matches(&a.label, phrase))
        .map(|a| a.id.clone())
        .collect();
    if !strict.is_empty() {
        return strict;
    }
    let phrase_tokens = content_tokens(phrase);
    assets
        .iter()
        .filter(|a| contains_run(&phrase_tokens, &head_chunk(&a.label)).is_some())
        .map(|a| a.id.clone())
        .collect()
}

/// Quantity requested for `asset` within `phrase`, if one is stated.
///
/// Looks at the word immediately before the asset's head chunk (skipping an
/// article), so "one geotechnical team" yields 1 and "geotechnical team"
/// yields `None`.
pub fn requested_quantity(phrase: &str, asset: &Asset) -> Option<u32> {
    let words: Vec<String> = raw_words(phrase).collect();
    let normalized: Vec<String> = words.iter().cloned().map(singular).collect();
    let head = head_chunk(&asset.label);
    let at = contains_run(&normalized, &head)?;
    let mut i = at;
    while i > 0 {
        i -= 1;
        let w = words[i].as_str();
        if matches!(w, "the" | "a" | "an") {
            continue;
        }
        if let Ok(n) = w.parse::<u32>() {
            return Some(n);
        }
        return QUANTITY_WORDS
            .iter()
            .find(|(q, _)| *q == w)
            .map(|(_, n)| *n);
    }
    None
}

fn span_in(source: &str, needle: &str) -> Span {
    if needle.is_empty() {
        return Span::new(0, 0);
    }
    source
        .find(needle)
        .map(|start| Span::new(start, start + needle.len()))
        .unwrap_or(Span::new(0, 0))
}

/// Resolve every task's asset phrase (and, best effort, its location) against
/// the scenario. Unresolvable phrases leave `asset_refs` empty and produce an
/// `UnresolvedAsset` diagnostic; spans index into the plan's provenance source.
pub fn bind_assets(plan: &PlanOfAction, scenario: &Scenario) -> (PlanOfAction, Vec<ParseDiagnostic>) {
    let mut bound = plan.clone();
    let mut diagnostics = Vec::new();
    let source = plan.provenance.source.clone();
    for task in bound.tasks_mut() {
        task.asset_refs = match_assets(&task.raw_asset_text, &scenario.assets);
        if task.asset_refs.is_empty() {
            diagnostics.push(ParseDiagnostic::warning(
                DiagnosticCode::UnresolvedAsset,
                span_in(&source, &task.raw_asset_text),
                format!(
                    "task {}: asset phrase {:?} matches no inventory asset",
                    task.index, task.raw_asset_text
                ),
            ));
        }
        task.location = scenario
            .locations
            .iter()
            .find(|loc| label_matches(&loc.label, &task.description))
            .map(|loc| loc.id.clone());
    }
    (bound, diagnostics)
}
