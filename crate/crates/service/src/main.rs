use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use linkrisk_core::audit::{audit, AuditConfig};
use linkrisk_core::corpus::{
    ingest_manifest, CatalogClient, CatalogTransport, FixtureTransport, HttpTransport,
    IngestConfig, PrivacyDictionary, RecordingTransport, DEFAULT_CATALOG_URL,
};
use linkrisk_core::disclosure::{join, suggest_features, DisclosureError, JoinKey, NumericMatch};
use linkrisk_core::embedding::EmbeddingProvider;
use linkrisk_core::grouping::{build_groups, GroupingConfig};
use linkrisk_core::pairrisk::{alpha_sweep, rank_pair_refs, RiskConfig};
use linkrisk_core::vulnerability::{profile, rank_vulnerable, VulnerabilityError};
use linkrisk_service::snapshot::Snapshot;
use linkrisk_service::{router, AppState, Config};
use serde::Serialize;

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "linkrisk",
    version,
    about = "Joinability and disclosure-risk triage for open datasets"
)]
struct Cli {
    /// TOML config file; LINKRISK_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Privacy attributes, one per line. Defaults to the built-in preset.
    #[arg(long, global = true)]
    dictionary: Option<PathBuf>,
    /// Write JSON here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus snapshot; defaults to snapshot.json in the cache directory.
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Selection {
    /// Comma-separated dataset ids; all datasets when omitted.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the datasets named by a manifest into a snapshot.
    Ingest { manifest: PathBuf },
    /// Project, cluster and rank joinable groups.
    Groups {
        #[command(flatten)]
        selection: Selection,
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank datasets by vulnerable record points.
    Vulnerable {
        #[arg(long)]
        threshold: Option<usize>,
    },
    /// Rank dataset pairs by joinability risk.
    Pairs {
        #[command(flatten)]
        selection: Selection,
    },
    /// Join two datasets and suggest disclosed attributes.
    Join {
        a: String,
        b: String,
        #[arg(long, value_delimiter = ',', required = true)]
        key: Vec<String>,
        /// Compare numeric key values exactly instead of by bin.
        #[arg(long)]
        exact: bool,
    },
    /// Groups, riskiest pairs and suggested-key joins in one report.
    Audit {
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Separation of privacy-sharing pairs across a range of alpha.
    AlphaSweep {
        #[arg(long, default_value_t = 1)]
        from: u32,
        #[arg(long, default_value_t = 100)]
        to: u32,
    },
    /// Serve the HTTP API.
    Serve,
    /// List open-data portals from the catalog.
    Catalog {
        #[arg(long, default_value = DEFAULT_CATALOG_URL)]
        url: String,
        #[arg(long, default_value_t = 0)]
        min_resources: u64,
        /// Answer requests from recorded responses in this directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Record live responses into this directory.
        #[arg(long, conflicts_with = "fixtures")]
        record: Option<PathBuf>,
    },
}

fn load_dictionary(path: Option<&Path>) -> CliResult<PrivacyDictionary> {
    let Some(path) = path else {
        return Ok(PrivacyDictionary::default_preset());
    };
    let text = std::fs::read_to_string(path)?;
    let names: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    Ok(PrivacyDictionary::new(names)?)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn select<'a>(
    snapshot: &'a Snapshot,
    ids: &[String],
) -> CliResult<Vec<&'a linkrisk_core::corpus::DatasetTable>> {
    if ids.is_empty() {
        return Ok(snapshot.tables.iter().collect());
    }
    ids.iter()
        .map(|id| {
            snapshot
                .table(id)
                .ok_or_else(|| format!("unknown dataset id {id:?}").into())
        })
        .collect()
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let dictionary = load_dictionary(cli.dictionary.as_deref())?;
    let snapshot_path = cli.snapshot.clone().unwrap_or_else(|| cfg.snapshot_path());
    let out = cli.out.as_deref();
    let risk = RiskConfig {
        alpha: cfg.alpha,
        key_size: cfg.key_size,
    };
    let load = || -> CliResult<Snapshot> {
        Snapshot::load(&snapshot_path)
            .map_err(|e| format!("cannot load snapshot {}: {e}", snapshot_path.display()).into())
    };

    match cli.command {
        Command::Ingest { manifest } => {
            let ingest = IngestConfig {
                record_cap: cfg.record_cap,
                truncate: cfg.truncate,
            };
            let snapshot = Snapshot::new(ingest_manifest(&manifest, &ingest)?)?;
            snapshot.save(&snapshot_path)?;
            emit(&snapshot.metas(), out)
        }
        Command::Groups {
            selection,
            weights,
            seed,
        } => {
            let snapshot = load()?;
            let metas: Vec<_> = select(&snapshot, &selection.ids)?
                .iter()
                .map(|t| t.meta.clone())
                .collect();
            let mut gcfg = GroupingConfig::default();
            if !weights.is_empty() {
                gcfg.weight_candidates = weights;
            }
            gcfg.projection.seed = seed.unwrap_or(cfg.seed);
            let result = build_groups(
                &metas,
                &dictionary,
                &EmbeddingProvider::default(),
                &gcfg,
                None,
            )?;
            emit(&result, out)
        }
        Command::Vulnerable { threshold } => {
            let snapshot = load()?;
            let threshold = threshold.unwrap_or(cfg.vulnerable_threshold);
            let mut profiles = Vec::new();
            for t in &snapshot.tables {
                match profile(t, &dictionary, threshold) {
                    Ok(p) => profiles.push(p),
                    Err(VulnerabilityError::NoPrivacyAttributes(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            emit(&rank_vulnerable(profiles), out)
        }
        Command::Pairs { selection } => {
            let snapshot = load()?;
            let tables = select(&snapshot, &selection.ids)?;
            emit(&rank_pair_refs(&tables, &dictionary, &risk), out)
        }
        Command::Join { a, b, key, exact } => {
            let snapshot = load()?;
            let tables = select(&snapshot, &[a, b])?;
            let (a, b) = (tables[0], tables[1]);
            let key = JoinKey::new(&key, a, b)?;
            let mode = if exact {
                NumericMatch::Exact
            } else {
                cfg.numeric_match
            };
            let outcome = join(a, b, &key, mode, None)?;
            let suggestions = match suggest_features(&outcome, a, b, cfg.nmi) {
                Ok(s) => Some(s),
                Err(DisclosureError::TooFewMatches(_)) => None,
                Err(e) => return Err(e.into()),
            };
            emit(
                &serde_json::json!({ "outcome": outcome, "suggestions": suggestions }),
                out,
            )
        }
        Command::Audit { top } => {
            let snapshot = load()?;
            let mut acfg = AuditConfig {
                risk,
                top_pairs: top,
                numeric_match: cfg.numeric_match,
                nmi: cfg.nmi,
                ..AuditConfig::default()
            };
            acfg.grouping.projection.seed = cfg.seed;
            let report = audit(
                &snapshot.tables,
                &dictionary,
                &EmbeddingProvider::default(),
                &acfg,
                None,
            )?;
            emit(&report, out)
        }
        Command::AlphaSweep { from, to } => {
            if from == 0 || from > to {
                return Err(format!("invalid alpha range {from}..={to}").into());
            }
            let snapshot = load()?;
            let tables: Vec<_> = snapshot.tables.iter().collect();
            let counts: Vec<(usize, usize)> = rank_pair_refs(&tables, &dictionary, &risk)
                .iter()
                .map(|p| (p.p, p.c))
                .collect();
            emit(&alpha_sweep(&counts, from, to), out)
        }
        Command::Serve => {
            let snapshot = load()?;
            let addr = format!("{}:{}", cfg.host, cfg.port);
            let state = Arc::new(AppState::new(cfg, snapshot, dictionary));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                eprintln!("listening on http://{addr}");
                axum::serve(listener, router(state)).await
            })?;
            Ok(())
        }
        Command::Catalog {
            url,
            min_resources,
            fixtures,
            record,
        } => {
            let transport: Box<dyn CatalogTransport> = match (fixtures, record) {
                (Some(dir), _) => Box::new(FixtureTransport::new(dir)),
                (None, Some(dir)) => Box::new(RecordingTransport::new(HttpTransport, dir)),
                (None, None) => Box::new(HttpTransport),
            };
            let client = CatalogClient::new(url, transport).with_cache_dir(&cfg.cache_dir);
            emit(&client.fetch_catalog(min_resources)?, out)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
