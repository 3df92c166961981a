//! Record points and vulnerable distributions.
//!
//! A record point `[a, v, c]` says that `c` rows carry value `v` for privacy
//! attribute `a`. Points with few rows single out individuals and make a
//! dataset a good entry point for linkage.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::Bins;
use crate::corpus::{
    normalize_attribute, normalize_value, Cell, ColumnKind, DatasetTable, PrivacyDictionary,
};

/// Counts at or below this mark a record point as vulnerable.
pub const DEFAULT_VULNERABLE_THRESHOLD: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VulnerabilityError {
    #[error("dataset {0:?} has no privacy attributes")]
    NoPrivacyAttributes(String),
    #[error("vulnerable set is empty")]
    EmptyVulnerableSet,
}

/// Numeric interval behind a binned record point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRange {
    pub lo: f64,
    pub hi: f64,
    /// Whether `hi` itself belongs to the bin (true for the last bin).
    pub closed: bool,
}

impl BinRange {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && (x < self.hi || (self.closed && x <= self.hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordPoint {
    pub a: String,
    pub v: String,
    pub c: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<BinRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityProfile {
    pub dataset_id: String,
    pub record_points: Vec<RecordPoint>,
    pub vulnerable: Vec<RecordPoint>,
    /// Smallest count among vulnerable points; `None` when there are none.
    pub min_count: Option<usize>,
    pub threshold: usize,
    pub dictionary_version: u64,
}

/// Record points for every dictionary attribute in the table. Categorical
/// values are grouped case-insensitively; numeric columns use four
/// equal-width bins and empty bins produce no point.
pub fn record_points(
    table: &DatasetTable,
    dictionary: &PrivacyDictionary,
) -> Result<Vec<RecordPoint>, VulnerabilityError> {
    let mut out = Vec::new();
    let mut any = false;
    for col in table
        .columns
        .iter()
        .filter(|c| dictionary.contains(&c.name))
    {
        any = true;
        let mut text_counts: BTreeMap<String, usize> = BTreeMap::new();
        for cell in &col.values {
            if let Cell::Text(s) = cell {
                *text_counts.entry(normalize_value(s)).or_default() += 1;
            }
        }
        if col.kind == ColumnKind::Numeric {
            if let Ok(bins) = Bins::over(col.numbers()) {
                let mut counts = vec![0usize; bins.len()];
                for x in col.numbers() {
                    counts[bins.index_of(x)] += 1;
                }
                for (i, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                    let (lo, hi) = bins.bounds(i);
                    out.push(RecordPoint {
                        a: col.name.clone(),
                        v: bins.label(i),
                        c,
                        range: Some(BinRange {
                            lo,
                            hi,
                            closed: i + 1 == bins.len(),
                        }),
                    });
                }
            }
        }
        out.extend(text_counts.into_iter().map(|(v, c)| RecordPoint {
            a: col.name.clone(),
            v,
            c,
            range: None,
        }));
    }
    if !any {
        return Err(VulnerabilityError::NoPrivacyAttributes(
            table.id().to_string(),
        ));
    }
    Ok(out)
}

pub fn profile(
    table: &DatasetTable,
    dictionary: &PrivacyDictionary,
    threshold: usize,
) -> Result<VulnerabilityProfile, VulnerabilityError> {
    let record_points = record_points(table, dictionary)?;
    let vulnerable: Vec<RecordPoint> = record_points
        .iter()
        .filter(|p| p.c <= threshold)
        .cloned()
        .collect();
    let min_count = vulnerable.iter().map(|p| p.c).min();
    Ok(VulnerabilityProfile {
        dataset_id: table.id().to_string(),
        record_points,
        vulnerable,
        min_count,
        threshold,
        dictionary_version: dictionary.version(),
    })
}

fn vulnerability_order(a: &VulnerabilityProfile, b: &VulnerabilityProfile) -> Ordering {
    let min = |p: &VulnerabilityProfile| p.min_count.unwrap_or(usize::MAX);
    b.vulnerable
        .len()
        .cmp(&a.vulnerable.len())
        .then_with(|| min(a).cmp(&min(b)))
        .then_with(|| a.dataset_id.cmp(&b.dataset_id))
}

/// Most vulnerable first: more vulnerable points, then a rarer rarest
/// point, then dataset id.
pub fn rank_vulnerable(mut profiles: Vec<VulnerabilityProfile>) -> Vec<VulnerabilityProfile> {
    profiles.sort_by(vulnerability_order);
    profiles
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relevance {
    pub dataset_id: String,
    pub score: f64,
    pub matched: Vec<RecordPoint>,
}

fn present_in(point: &RecordPoint, table: &DatasetTable) -> bool {
    let Ok(attr) = normalize_attribute(&point.a) else {
        return false;
    };
    let Some(col) = table.column(&attr) else {
        return false;
    };
    let value = normalize_value(&point.v);
    let as_number = value.parse::<f64>().ok();
    col.values.iter().any(|cell| match (cell, &point.range) {
        (Cell::Missing, _) => false,
        (Cell::Number(x), Some(r)) => r.contains(*x),
        (Cell::Number(x), None) => as_number == Some(*x),
        (Cell::Text(s), _) => normalize_value(s) == value,
    })
}

/// Fraction of A's vulnerable points that also occur in `b`. Categorical
/// values match case-insensitively; a binned point matches when `b` has a
/// value inside the bin's interval.
pub fn relevance_score(
    vulnerable: &[RecordPoint],
    b: &DatasetTable,
) -> Result<Relevance, VulnerabilityError> {
    if vulnerable.is_empty() {
        return Err(VulnerabilityError::EmptyVulnerableSet);
    }
    let matched: Vec<RecordPoint> = vulnerable
        .iter()
        .filter(|p| present_in(p, b))
        .cloned()
        .collect();
    Ok(Relevance {
        dataset_id: b.id().to_string(),
        score: matched.len() as f64 / vulnerable.len() as f64,
        matched,
    })
}

/// Candidate partners by descending relevance, ties by id.
pub fn rank_relevance(
    vulnerable: &[RecordPoint],
    candidates: &[&DatasetTable],
) -> Result<Vec<Relevance>, VulnerabilityError> {
    let mut out = candidates
        .iter()
        .map(|b| relevance_score(vulnerable, b))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.dataset_id.cmp(&y.dataset_id))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{read_csv, IngestConfig, MetaOverrides};

    fn table(id: &str, csv: &str) -> DatasetTable {
        read_csv(
            csv.as_bytes(),
            MetaOverrides {
                id: Some(id.into()),
                ..Default::default()
            },
            &IngestConfig::default(),
        )
        .unwrap()
    }

    fn dict() -> PrivacyDictionary {
        PrivacyDictionary::new(["age", "gender", "race"]).unwrap()
    }

    #[test]
    fn table_one_points() {
        let t = table(
            "t",
            "age,gender,notes\n11,F,x\n15,F,y\n15,M,z\n15,,w\n15,m,v\n15,M,u\n",
        );
        let pts = record_points(&t, &dict()).unwrap();
        let age: Vec<_> = pts
            .iter()
            .filter(|p| p.a == "age")
            .map(|p| (p.v.as_str(), p.c))
            .collect();
        assert_eq!(age, [("11-12", 1), ("14-15", 5)]);
        let gender: Vec<_> = pts
            .iter()
            .filter(|p| p.a == "gender")
            .map(|p| (p.v.as_str(), p.c))
            .collect();
        assert_eq!(gender, [("f", 2), ("m", 3)]);
        assert!(pts.iter().all(|p| p.a != "notes"));
    }

    #[test]
    fn constant_numeric_column_is_one_bin() {
        let t = table("t", "age\n30\n30\n30\n");
        let pts = record_points(&t, &dict()).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].v.as_str(), pts[0].c), ("30", 3));
    }

    #[test]
    fn counts_cover_non_missing_cells() {
        let t = table(
            "t",
            "race,age\nW,1\nB,\nNA,3\nw,x\n,5\nB,6\nA,7\nA,8\nA,9\nA,10\nA,11\n",
        );
        let pts = record_points(&t, &dict()).unwrap();
        for col in &t.columns {
            let total: usize = pts.iter().filter(|p| p.a == col.name).map(|p| p.c).sum();
            assert_eq!(total, col.non_missing(), "{}", col.name);
        }
    }

    #[test]
    fn no_privacy_attributes() {
        let t = table("t", "permit,fee\n1,2\n");
        assert_eq!(
            record_points(&t, &dict()),
            Err(VulnerabilityError::NoPrivacyAttributes("t".into()))
        );
    }

    fn prof(id: &str, counts: &[usize]) -> VulnerabilityProfile {
        let pts: Vec<RecordPoint> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| RecordPoint {
                a: "race".into(),
                v: format!("v{i}"),
                c,
                range: None,
            })
            .collect();
        let vulnerable: Vec<_> = pts.iter().filter(|p| p.c <= 4).cloned().collect();
        VulnerabilityProfile {
            dataset_id: id.into(),
            min_count: vulnerable.iter().map(|p| p.c).min(),
            record_points: pts,
            vulnerable,
            threshold: 4,
            dictionary_version: 0,
        }
    }

    #[test]
    fn ranking_rules() {
        let ranked = rank_vulnerable(vec![
            prof("safe", &[5, 9]),
            prof("a", &[2, 40]),
            prof("b", &[1, 1, 30]),
            prof("c", &[3, 30]),
            prof("d", &[2, 7]),
        ]);
        let ids: Vec<_> = ranked.iter().map(|p| p.dataset_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "d", "c", "safe"]);
        assert!(ranked[4].vulnerable.is_empty());
        assert_eq!(ranked[4].min_count, None);
    }

    #[test]
    fn relevance_examples() {
        let a = table(
            "a",
            "age,race\n19,Black\n20,Hawaiian\n40,white\n41,white\n42,white\n43,white\n44,white\n",
        );
        let p = profile(&a, &dict(), 4).unwrap();
        assert!(!p.vulnerable.is_empty());

        // age bins over [19, 44]: only [19, 25.25) is vulnerable (2 rows);
        // race=white has 5 rows and is not
        let vs: Vec<_> = p
            .vulnerable
            .iter()
            .map(|v| (v.a.as_str(), v.v.as_str(), v.c))
            .collect();
        assert_eq!(
            vs,
            [
                ("age", "19-25.25", 2),
                ("race", "black", 1),
                ("race", "hawaiian", 1)
            ]
        );

        let superset = table("s", "race,age\nblack,19\nHAWAIIAN,30\nwhite,60\n");
        let r = relevance_score(&p.vulnerable, &superset).unwrap();
        assert_eq!(r.score, 1.0);

        let partial = table("p", "race,age\nblack,30\n");
        let r = relevance_score(&p.vulnerable, &partial).unwrap();
        assert_eq!(r.matched.len(), 1);
        assert!((r.score - 1.0 / 3.0).abs() < 1e-15);

        let disjoint = table("d", "race,zip\nasian,1\n");
        assert_eq!(
            relevance_score(&p.vulnerable, &disjoint).unwrap().score,
            0.0
        );

        let subset = table(
            "x",
            "race,age\nblack,19\nhawaiian,20\nwhite,40\nwhite,41\nwhite,42\nwhite,43\nwhite,44\n",
        );
        assert_eq!(relevance_score(&p.vulnerable, &subset).unwrap().score, 1.0);

        assert_eq!(
            relevance_score(&[], &subset),
            Err(VulnerabilityError::EmptyVulnerableSet)
        );
    }

    #[test]
    fn half_relevance() {
        // four vulnerable categorical points, two present in B
        let a = table("a", "race,gender\nw,f\nb,m\nw,f\nb,m\nw,f\nb,m\n");
        let dict = PrivacyDictionary::new(["race", "gender"]).unwrap();
        let p = profile(&a, &dict, 4).unwrap();
        assert_eq!(p.vulnerable.len(), 4);
        let b = table(
            "b",
            "race,gender,age\nw,x,1\nw,x,2\nq,f,3\nq,x,4\nq,x,5\nq,x,6\n",
        );
        assert_eq!(relevance_score(&p.vulnerable, &b).unwrap().score, 0.5);
    }

    #[test]
    fn ranking_partners() {
        let a = table("a", "race\nblack\nhawaiian\n");
        let p = profile(&a, &dict(), 4).unwrap();
        let b1 = table("b1", "race\nblack\n");
        let b2 = table("b2", "race\nblack\nhawaiian\n");
        let b3 = table("b3", "race\nasian\n");
        let ranked = rank_relevance(&p.vulnerable, &[&b1, &b3, &b2]).unwrap();
        let ids: Vec<_> = ranked.iter().map(|r| r.dataset_id.as_str()).collect();
        assert_eq!(ids, ["b2", "b1", "b3"]);
    }
}
