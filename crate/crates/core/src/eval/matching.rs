use std::sync::LazyLock;

use regex::Regex;

static LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Da-d]\s*[.．、:：)）]\s*").expect("valid regex"));

/// Trims, collapses whitespace runs to one space and strips a leading `A.`–`D.` label.
pub fn normalize_answer(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    LABEL.replace(&collapsed, "").trim().to_string()
}

/// Maps free model text onto an option index.
///
/// Exact match after normalization wins; otherwise the answer is accepted only when
/// exactly one normalized option occurs as a substring of the normalized text.
pub fn match_answer(model_text: &str, options: &[String]) -> Option<usize> {
    let text = normalize_answer(model_text);
    let opts: Vec<String> = options.iter().map(|o| normalize_answer(o)).collect();
    if let Some(i) = opts.iter().position(|o| *o == text) {
        return Some(i);
    }
    let mut hits = opts
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.is_empty() && text.contains(o.as_str()));
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}
