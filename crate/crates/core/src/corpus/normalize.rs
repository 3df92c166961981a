//! Attribute-name normalization.
//!
//! Open-data portals use no common nomenclature for column names
//! (`Victim Age`, `victimAge`, `VICTIM_AGE`), so every name is folded into a
//! lowercase snake-case form before any comparison.

use super::CorpusError;

/// Normalize a raw column name.
///
/// Lowercases, splits camelCase boundaries, collapses every run of
/// non-alphanumeric characters into one underscore and trims underscores
/// from both ends.
pub fn normalize_attribute(raw: &str) -> Result<String, CorpusError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(raw.len() + 4);
    let mut pending_sep = false;

    for (i, &ch) in chars.iter().enumerate() {
        if is_camel_boundary(&chars, i) {
            pending_sep = true;
        }
        for lower in ch.to_lowercase() {
            if lower.is_alphanumeric() {
                if pending_sep && !out.is_empty() {
                    out.push('_');
                }
                pending_sep = false;
                out.push(lower);
            } else {
                pending_sep = true;
            }
        }
    }

    if out.is_empty() {
        return Err(CorpusError::InvalidAttributeName(raw.to_string()));
    }
    Ok(out)
}

// `aB` and `1B` split before `B`; `ABc` splits before `B` so acronyms stay whole.
fn is_camel_boundary(chars: &[char], i: usize) -> bool {
    if i == 0 || !has_lowercase_form(chars[i]) {
        return false;
    }
    let prev = chars[i - 1];
    if prev.is_lowercase() || prev.is_numeric() {
        return true;
    }
    has_lowercase_form(prev) && chars.get(i + 1).is_some_and(|next| next.is_lowercase())
}

// Uppercase letters without a lowercase mapping (e.g. mathematical letters)
// survive lowercasing, so they must not open a boundary.
fn has_lowercase_form(c: char) -> bool {
    c.is_uppercase() && !c.to_lowercase().eq(std::iter::once(c))
}

/// Normalize a category value for comparison: trimmed and lowercased.
pub fn normalize_value(raw: &str) -> String {
    raw.trim().to_lowercase()
}
