use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::{normalize_attribute, CorpusError};

/// Quasi-identifier names seen across individual-level police, health and
/// corrections datasets.
const DEFAULT_ATTRIBUTES: &[&str] = &[
    "age",
    "gender",
    "race",
    "age_group",
    "vic_age_group",
    "susp_age_group",
    "perp_age_group",
    "vict_age",
    "age_1",
    "age_at_release",
    "admission_age",
    "age_class",
    "subject_age",
    "patient_age",
    "age_range",
    "offender_age",
    "officer_age",
    "age_at_arrest",
    "sex",
    "susp_sex",
    "vic_sex",
    "perp_sex",
    "sex_1",
    "victim_gender",
    "suspect_gender",
    "complainant_sex",
    "officers_sex",
    "susp_race",
    "vic_race",
    "perp_race",
    "vict_descent",
    "victim_race",
    "suspect_race",
    "complainant_race",
    "officers_race",
    "subject_race",
    "officer_race",
];

/// Ordered set of privacy-related attribute names.
///
/// Every mutation bumps `version`; derived artifacts record the version they
/// were computed against so stale results can be detected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyDictionary {
    attributes: IndexSet<String>,
    version: u64,
}

impl Default for PrivacyDictionary {
    fn default() -> Self {
        Self::default_preset()
    }
}

impl PrivacyDictionary {
    pub fn new<I, S>(names: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let attributes = names
            .into_iter()
            .map(|n| normalize_attribute(n.as_ref()))
            .collect::<Result<IndexSet<_>, _>>()?;
        Ok(Self {
            attributes,
            version: 0,
        })
    }

    pub fn default_preset() -> Self {
        Self {
            attributes: DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            version: 0,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// Exact match on an already-normalized name.
    pub fn contains(&self, normalized: &str) -> bool {
        self.attributes.contains(normalized)
    }

    pub fn index_of(&self, normalized: &str) -> Option<usize> {
        self.attributes.get_index_of(normalized)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(String::as_str)
    }

    /// Returns whether the name was newly added.
    pub fn insert(&mut self, raw: &str) -> Result<bool, CorpusError> {
        let added = self.attributes.insert(normalize_attribute(raw)?);
        if added {
            self.version += 1;
        }
        Ok(added)
    }

    pub fn remove(&mut self, raw: &str) -> Result<bool, CorpusError> {
        let removed = self.attributes.shift_remove(&normalize_attribute(raw)?);
        if removed {
            self.version += 1;
        }
        Ok(removed)
    }

    /// Replace the whole attribute list; always bumps the version.
    pub fn replace<I, S>(&mut self, names: I) -> Result<(), CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let next = Self::new(names)?;
        self.attributes = next.attributes;
        self.version += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_contains_core_quasi_identifiers() {
        let d = PrivacyDictionary::default_preset();
        for a in [
            "age",
            "gender",
            "race",
            "sex",
            "victim_race",
            "officer_race",
        ] {
            assert!(d.contains(a), "{a}");
        }
        assert_eq!(d.index_of("age"), Some(0));
        assert!(!d.contains("Age"));
    }

    #[test]
    fn mutations_bump_version() {
        let mut d = PrivacyDictionary::new(["age", "Gender", "race"]).unwrap();
        assert!(d.contains("gender"));
        assert_eq!(d.version(), 0);
        assert!(d.insert("Victim Age").unwrap());
        assert_eq!(d.version(), 1);
        assert!(!d.insert("victim_age").unwrap());
        assert_eq!(d.version(), 1);
        assert!(d.remove("race").unwrap());
        assert_eq!(d.version(), 2);
        assert_eq!(
            d.iter().collect::<Vec<_>>(),
            ["age", "gender", "victim_age"]
        );
        d.replace(["sex"]).unwrap();
        assert_eq!(d.version(), 3);
        assert_eq!(d.len(), 1);
    }
}
