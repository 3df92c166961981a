//! Client for the Socrata discovery catalog.
//!
//! Transport is pluggable so tests replay recorded responses from a fixture
//! directory instead of touching the network.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CorpusError;

pub const DEFAULT_CATALOG_URL: &str = "http://api.us.socrata.com/api/catalog/v1/domains";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortalDescriptor {
    pub domain: String,
    /// Official resources counted for this portal.
    pub resource_count: u64,
}

pub trait CatalogTransport: Send + Sync {
    fn get(&self, url: &str) -> Result<String, CorpusError>;
}

pub(crate) fn http_get(url: &str) -> Result<String, CorpusError> {
    let mut resp = ureq::get(url)
        .call()
        .map_err(|e| CorpusError::Network(e.to_string()))?;
    resp.body_mut()
        .read_to_string()
        .map_err(|e| CorpusError::Network(e.to_string()))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct HttpTransport;

impl CatalogTransport for HttpTransport {
    fn get(&self, url: &str) -> Result<String, CorpusError> {
        http_get(url)
    }
}

/// File name under which the response for `url` is recorded.
pub fn fixture_name(url: &str) -> String {
    let mut name: String = url
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    name.push_str(".json");
    name
}

/// Replays responses recorded by [`RecordingTransport`].
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl CatalogTransport for FixtureTransport {
    fn get(&self, url: &str) -> Result<String, CorpusError> {
        let path = self.dir.join(fixture_name(url));
        std::fs::read_to_string(&path).map_err(|e| {
            CorpusError::Network(format!("no recorded response at {}: {e}", path.display()))
        })
    }
}

/// Forwards to another transport and saves every response body.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: CatalogTransport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<T: CatalogTransport> CatalogTransport for RecordingTransport<T> {
    fn get(&self, url: &str) -> Result<String, CorpusError> {
        let body = self.inner.get(url)?;
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.dir.join(fixture_name(url)), &body)?;
        Ok(body)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedCatalog {
    fetched_at: u64,
    base_url: String,
    min_resources: u64,
    portals: Vec<PortalDescriptor>,
}

pub struct CatalogClient {
    base_url: String,
    transport: Box<dyn CatalogTransport>,
    cache_dir: Option<PathBuf>,
    cache_lock: Mutex<()>,
}

impl CatalogClient {
    pub fn new(base_url: impl Into<String>, transport: Box<dyn CatalogTransport>) -> Self {
        Self {
            base_url: base_url.into(),
            transport,
            cache_dir: None,
            cache_lock: Mutex::new(()),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn cache_file(&self) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join("catalog.json"))
    }

    /// Portals holding at least `min_resources` official resources, largest first.
    pub fn fetch_catalog(&self, min_resources: u64) -> Result<Vec<PortalDescriptor>, CorpusError> {
        let body = self.transport.get(&self.base_url)?;
        let mut portals: Vec<_> = parse_catalog(&body)?
            .into_iter()
            .filter(|p| p.resource_count >= min_resources)
            .collect();
        portals.sort_by(|a, b| {
            b.resource_count
                .cmp(&a.resource_count)
                .then_with(|| a.domain.cmp(&b.domain))
        });
        if let Some(path) = self.cache_file() {
            self.write_cache(&path, min_resources, &portals)?;
        }
        Ok(portals)
    }

    fn write_cache(
        &self,
        path: &Path,
        min_resources: u64,
        portals: &[PortalDescriptor],
    ) -> Result<(), CorpusError> {
        let _guard = self.cache_lock.lock().unwrap_or_else(|e| e.into_inner());
        let fetched_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let cached = CachedCatalog {
            fetched_at,
            base_url: self.base_url.clone(),
            min_resources,
            portals: portals.to_vec(),
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_vec_pretty(&cached)?)?;
        Ok(())
    }
}

/// Accepts both the per-domain count listing (`{"domain", "count"}`) and
/// per-resource search results, where only `provenance=official` datasets
/// are counted.
fn parse_catalog(body: &str) -> Result<Vec<PortalDescriptor>, CorpusError> {
    let root: Value =
        serde_json::from_str(body).map_err(|e| CorpusError::MalformedResponse(e.to_string()))?;
    let results = root
        .get("results")
        .and_then(Value::as_array)
        .ok_or_else(|| CorpusError::MalformedResponse("missing `results` array".into()))?;

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for entry in results {
        if let Some(domain) = entry.get("domain").and_then(Value::as_str) {
            let count = entry.get("count").and_then(Value::as_u64).ok_or_else(|| {
                CorpusError::MalformedResponse(format!("domain {domain} has no count"))
            })?;
            *counts.entry(domain.to_string()).or_default() += count;
            continue;
        }
        let domain = entry
            .pointer("/metadata/domain")
            .and_then(Value::as_str)
            .ok_or_else(|| CorpusError::MalformedResponse("entry without a domain".into()))?;
        let slot = counts.entry(domain.to_string()).or_default();
        if is_official_dataset(entry) {
            *slot += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(domain, resource_count)| PortalDescriptor {
            domain,
            resource_count,
        })
        .collect())
}

fn is_official_dataset(entry: &Value) -> bool {
    let provenance = [
        "/provenance",
        "/resource/provenance",
        "/metadata/provenance",
    ]
    .iter()
    .find_map(|p| entry.pointer(p).and_then(Value::as_str));
    let kind = entry.pointer("/resource/type").and_then(Value::as_str);
    provenance == Some("official") && kind.is_none_or(|k| k == "dataset")
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Canned(&'static str);

    impl CatalogTransport for Canned {
        fn get(&self, _url: &str) -> Result<String, CorpusError> {
            Ok(self.0.to_string())
        }
    }

    fn client(body: &'static str) -> CatalogClient {
        CatalogClient::new(DEFAULT_CATALOG_URL, Box::new(Canned(body)))
    }

    #[test]
    fn threshold_filter() {
        let c = client(
            r#"{"results":[{"domain":"a.gov","count":1},{"domain":"b.gov","count":2},{"domain":"c.gov","count":9}]}"#,
        );
        let portals = c.fetch_catalog(2).unwrap();
        let names: Vec<_> = portals.iter().map(|p| p.domain.as_str()).collect();
        assert_eq!(names, ["c.gov", "b.gov"]);
    }

    #[test]
    fn empty_results() {
        assert!(client(r#"{"results":[]}"#)
            .fetch_catalog(0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn only_official_datasets_count() {
        let c = client(
            r#"{"results":[
              {"resource":{"type":"dataset"},"metadata":{"domain":"a.gov"},"provenance":"official"},
              {"resource":{"type":"dataset"},"metadata":{"domain":"a.gov"},"provenance":"community"},
              {"resource":{"type":"chart"},"metadata":{"domain":"a.gov"},"provenance":"official"},
              {"resource":{"type":"dataset","provenance":"official"},"metadata":{"domain":"a.gov"}},
              {"resource":{"type":"dataset"},"metadata":{"domain":"b.gov"},"provenance":"community"}
            ]}"#,
        );
        let portals = c.fetch_catalog(0).unwrap();
        assert_eq!(
            portals,
            vec![
                PortalDescriptor {
                    domain: "a.gov".into(),
                    resource_count: 2
                },
                PortalDescriptor {
                    domain: "b.gov".into(),
                    resource_count: 0
                },
            ]
        );
        assert_eq!(c.fetch_catalog(1).unwrap().len(), 1);
    }

    #[test]
    fn malformed_responses() {
        assert!(matches!(
            client("not json").fetch_catalog(0),
            Err(CorpusError::MalformedResponse(_))
        ));
        assert!(matches!(
            client(r#"{"data":[]}"#).fetch_catalog(0),
            Err(CorpusError::MalformedResponse(_))
        ));
        assert!(matches!(
            client(r#"{"results":[{"domain":"a.gov"}]}"#).fetch_catalog(0),
            Err(CorpusError::MalformedResponse(_))
        ));
    }

    #[test]
    fn record_then_replay_and_cache() {
        let dir = tempfile::tempdir().unwrap();
        let fixtures = dir.path().join("fixtures");
        let body = r#"{"results":[{"domain":"a.gov","count":5}]}"#;
        let recorder = RecordingTransport::new(Canned(body), &fixtures);
        recorder.get(DEFAULT_CATALOG_URL).unwrap();

        let c = CatalogClient::new(
            DEFAULT_CATALOG_URL,
            Box::new(FixtureTransport::new(&fixtures)),
        )
        .with_cache_dir(dir.path().join("cache"));
        let portals = c.fetch_catalog(2).unwrap();
        assert_eq!(portals[0].domain, "a.gov");

        let cached: CachedCatalog =
            serde_json::from_slice(&std::fs::read(c.cache_file().unwrap()).unwrap()).unwrap();
        assert_eq!(cached.portals, portals);
        assert!(cached.fetched_at > 0);
    }

    #[test]
    fn missing_fixture_is_network_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = CatalogClient::new("http://x/y", Box::new(FixtureTransport::new(dir.path())));
        assert!(matches!(c.fetch_catalog(0), Err(CorpusError::Network(_))));
    }
}
