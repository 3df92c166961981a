#![allow(dead_code)]

use std::path::{Path, PathBuf};

use linkrisk_core::corpus::{read_csv, DatasetTable, Granularity, IngestConfig, MetaOverrides};

pub const PLANTED_A: usize = 17;
pub const PLANTED_B: usize = 5;

const RACES: [&str; 4] = ["white", "black", "asian", "hispanic"];
const PLACES: [&str; 8] = [
    "midtown",
    "westside",
    "harbor",
    "old town",
    "riverside",
    "hilltop",
    "eastgate",
    "northpark",
];

fn person(i: usize, year: u32) -> String {
    format!(
        "{},{},{},{year}-{:02}-{:02},{}",
        18 + (i * 7) % 60,
        ["M", "F"][i % 2],
        if i == 39 {
            "native"
        } else {
            RACES[(i * 3) % 4]
        },
        1 + i % 12,
        1 + (i * 5) % 28,
        PLACES[(i * 3) % 8]
    )
}

const PLANTED: &str = "28,M,white,2020-12-01,washington park";

/// (id, granularity, tags, csv) for an 8-dataset corpus with one individual
/// planted in both `arrests` and `field_interviews`.
pub fn corpus_files() -> Vec<(&'static str, Granularity, &'static str, String)> {
    let mut arrests = vec!["age,sex,race,date,location,charge".to_string()];
    for i in 0..40 {
        arrests.push(format!(
            "{},{}",
            person(i, 2019),
            ["theft", "trespass", "assault"][i % 3]
        ));
    }
    arrests.insert(PLANTED_A + 1, format!("{PLANTED},trespass"));
    let mut interviews = vec!["age,sex,race,date,location,reason".to_string()];
    for i in 0..30 {
        interviews.push(format!(
            "{},{}",
            person(i + 10, 2021),
            ["stop", "call"][i % 2]
        ));
    }
    interviews.insert(PLANTED_B + 1, format!("{PLANTED},stop"));
    let mut lead = vec!["age,race,sex,program".to_string()];
    for i in 0..20 {
        lead.push(format!(
            "{},{},{},p{}",
            20 + i,
            RACES[i % 4],
            ["F", "M"][i % 2],
            i % 3
        ));
    }
    let mut citations = vec!["date,location,sex,vehicle".to_string()];
    for i in 0..20 {
        citations.push(format!(
            "2020-01-{:02},{},{},v{}",
            1 + i,
            PLACES[i % 8],
            ["M", "F"][i % 2],
            i % 4
        ));
    }
    let permits = std::iter::once("permit_id,fee,address".to_string())
        .chain((0..12).map(|i| format!("P{i},{},{i} main st", i * 25)))
        .collect::<Vec<_>>();
    let inspections = std::iter::once("permit_id,address,result".to_string())
        .chain((0..12).map(|i| format!("P{},{i} main st,{}", i % 6, ["pass", "fail"][i % 2])))
        .collect::<Vec<_>>();
    let budget = std::iter::once("department,amount,year".to_string())
        .chain((0..8).map(|i| format!("dept{},{},2020", i % 4, i * 1000)))
        .collect::<Vec<_>>();
    let payroll = std::iter::once("department,age,salary,year".to_string())
        .chain((0..8).map(|i| format!("dept{},{},{},2020", i % 4, 25 + i, 40000 + i * 500)))
        .collect::<Vec<_>>();

    let ind = Granularity::Individual;
    let agg = Granularity::Aggregated;
    vec![
        ("arrests", ind, "police", arrests.join("\n")),
        ("field_interviews", ind, "police", interviews.join("\n")),
        ("lead_program", ind, "health", lead.join("\n")),
        ("traffic_citations", ind, "police", citations.join("\n")),
        ("building_permits", agg, "housing", permits.join("\n")),
        ("inspections", agg, "housing", inspections.join("\n")),
        ("budget", agg, "finance", budget.join("\n")),
        ("payroll", ind, "finance", payroll.join("\n")),
    ]
}

pub fn corpus() -> Vec<DatasetTable> {
    corpus_files()
        .into_iter()
        .map(|(id, granularity, tag, csv)| {
            let o = MetaOverrides {
                id: Some(id.into()),
                granularity: Some(granularity),
                tags: Some([tag.to_string()].into()),
                portal: Some("data.example.gov".into()),
                ..Default::default()
            };
            read_csv(csv.as_bytes(), o, &IngestConfig::default()).unwrap()
        })
        .collect()
}

/// Write the corpus as CSV files plus a manifest; returns the manifest path.
pub fn write_corpus(dir: &Path) -> PathBuf {
    let mut entries = Vec::new();
    for (id, granularity, tag, csv) in corpus_files() {
        let file = format!("{id}.csv");
        std::fs::write(dir.join(&file), csv + "\n").unwrap();
        entries.push(serde_json::json!({
            "id": id,
            "portal": "data.example.gov",
            "tags": [tag],
            "granularity": granularity,
            "path": file,
        }));
    }
    let manifest = dir.join("manifest.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&entries).unwrap()).unwrap();
    manifest
}
