use serde::{Deserialize, Serialize};

use crate::retrieval::tokenize;

use super::MetricsError;

/// Word-level post-edit effort of turning a shown suggestion into the
/// operator's final text. Edits are insertions, deletions and substitutions
/// (no block shifts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditRateReport {
    pub edits: usize,
    pub reference_length: usize,
    pub hter: f64,
}

/// Levenshtein distance over tokens, unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edits from `shown` to `final_tokens`, divided by the final length.
pub fn hter<S: AsRef<str>>(shown: &[S], final_tokens: &[S]) -> Result<EditRateReport, MetricsError> {
    if final_tokens.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let a: Vec<&str> = shown.iter().map(AsRef::as_ref).collect();
    let b: Vec<&str> = final_tokens.iter().map(AsRef::as_ref).collect();
    let edits = edit_distance(&a, &b);
    Ok(EditRateReport { edits, reference_length: b.len(), hter: edits as f64 / b.len() as f64 })
}

/// [`hter`] over texts tokenized like retrieval queries.
pub fn hter_text(shown: &str, final_text: &str) -> Result<EditRateReport, MetricsError> {
    hter(&tokenize(shown), &tokenize(final_text))
}
