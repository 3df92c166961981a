//! Python bindings. Results that are records rather than scalars come back
//! as plain dicts and lists.

use linkrisk_core::audit::{audit as run_audit, AuditConfig};
use linkrisk_core::corpus::{self, read_csv, DatasetTable, IngestConfig, MetaOverrides};
use linkrisk_core::disclosure::{self, DisclosureError, JoinKey, NmiNormalization, NumericMatch};
use linkrisk_core::embedding::EmbeddingProvider;
use linkrisk_core::grouping::{self, GroupingConfig};
use linkrisk_core::pairrisk::{self, RiskConfig};
use linkrisk_core::vulnerability::{self, DEFAULT_VULNERABLE_THRESHOLD};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

create_exception!(linkrisk, LinkRiskError, PyException);

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    LinkRiskError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_value(value).map_err(err)?)
}

fn parse_nmi(name: &str) -> PyResult<NmiNormalization> {
    match name {
        "sqrt" => Ok(NmiNormalization::Sqrt),
        "min" => Ok(NmiNormalization::Min),
        "max" => Ok(NmiNormalization::Max),
        "arithmetic" => Ok(NmiNormalization::Arithmetic),
        other => Err(LinkRiskError::new_err(format!(
            "unknown normalization {other:?}"
        ))),
    }
}

fn parse_numeric(name: &str) -> PyResult<NumericMatch> {
    match name {
        "binned" => Ok(NumericMatch::Binned),
        "exact" => Ok(NumericMatch::Exact),
        other => Err(LinkRiskError::new_err(format!(
            "unknown numeric match {other:?}"
        ))),
    }
}

#[pyclass(module = "linkrisk", name = "PrivacyDictionary")]
pub struct PyPrivacyDictionary {
    inner: corpus::PrivacyDictionary,
}

#[pymethods]
impl PyPrivacyDictionary {
    /// Built-in preset when `attributes` is omitted.
    #[new]
    #[pyo3(signature = (attributes=None))]
    fn new(attributes: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match attributes {
            Some(a) => corpus::PrivacyDictionary::new(a).map_err(err)?,
            None => corpus::PrivacyDictionary::default_preset(),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn version(&self) -> u64 {
        self.inner.version()
    }

    #[getter]
    fn attributes(&self) -> Vec<String> {
        self.inner.iter().map(String::from).collect()
    }

    fn insert(&mut self, name: &str) -> PyResult<bool> {
        self.inner.insert(name).map_err(err)
    }

    fn remove(&mut self, name: &str) -> PyResult<bool> {
        self.inner.remove(name).map_err(err)
    }

    fn replace(&mut self, attributes: Vec<String>) -> PyResult<()> {
        self.inner.replace(attributes).map_err(err)
    }

    fn __contains__(&self, name: &str) -> bool {
        corpus::normalize_attribute(name).is_ok_and(|n| self.inner.contains(&n))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(module = "linkrisk", name = "Dataset", frozen)]
pub struct PyDataset {
    inner: DatasetTable,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (path, id=None, record_cap=corpus::DEFAULT_RECORD_CAP, truncate=false))]
    fn from_csv(
        path: std::path::PathBuf,
        id: Option<String>,
        record_cap: usize,
        truncate: bool,
    ) -> PyResult<Self> {
        let overrides = MetaOverrides {
            id,
            ..Default::default()
        };
        let cfg = IngestConfig {
            record_cap,
            truncate,
        };
        Ok(Self {
            inner: corpus::ingest_csv(&path, overrides, &cfg).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (id, text, record_cap=corpus::DEFAULT_RECORD_CAP, truncate=false))]
    fn from_string(id: String, text: &str, record_cap: usize, truncate: bool) -> PyResult<Self> {
        let overrides = MetaOverrides {
            id: Some(id),
            ..Default::default()
        };
        let cfg = IngestConfig {
            record_cap,
            truncate,
        };
        Ok(Self {
            inner: read_csv(text.as_bytes(), overrides, &cfg).map_err(err)?,
        })
    }

    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn row_count(&self) -> usize {
        self.inner.row_count()
    }

    #[getter]
    fn attributes(&self) -> Vec<String> {
        self.inner.attributes().map(String::from).collect()
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.inner.meta.truncated
    }

    #[pyo3(signature = (dictionary, threshold=DEFAULT_VULNERABLE_THRESHOLD))]
    fn vulnerability<'py>(
        &self,
        py: Python<'py>,
        dictionary: &PyPrivacyDictionary,
        threshold: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let p = vulnerability::profile(&self.inner, &dictionary.inner, threshold).map_err(err)?;
        to_py(py, &p)
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(id={:?}, rows={})",
            self.inner.id(),
            self.inner.row_count()
        )
    }
}

#[pyfunction]
fn normalize_attribute(name: &str) -> PyResult<String> {
    corpus::normalize_attribute(name).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, c, alpha=pairrisk::DEFAULT_ALPHA))]
fn risk_score(p: usize, c: usize, alpha: f64) -> PyResult<f64> {
    pairrisk::risk_score(p, c, alpha).map_err(err)
}

#[pyfunction]
fn normalize_risk(risk: f64) -> f64 {
    pairrisk::normalize_risk(risk)
}

/// Shannon entropy in nats.
#[pyfunction]
fn entropy(labels: Vec<String>) -> f64 {
    pairrisk::entropy(labels.iter())
}

#[pyfunction]
#[pyo3(signature = (x, y, normalization="sqrt"))]
fn nmi(x: Vec<String>, y: Vec<String>, normalization: &str) -> PyResult<f64> {
    disclosure::nmi(&x, &y, parse_nmi(normalization)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (datasets, dictionary, alpha=pairrisk::DEFAULT_ALPHA, key_size=pairrisk::DEFAULT_KEY_SIZE))]
fn rank_pairs<'py>(
    py: Python<'py>,
    datasets: Vec<PyRef<'py, PyDataset>>,
    dictionary: &PyPrivacyDictionary,
    alpha: f64,
    key_size: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let tables: Vec<&DatasetTable> = datasets.iter().map(|d| &d.inner).collect();
    let pairs =
        pairrisk::rank_pair_refs(&tables, &dictionary.inner, &RiskConfig { alpha, key_size });
    to_py(py, &pairs)
}

#[pyfunction]
#[pyo3(signature = (vulnerable_dataset, candidates, dictionary, threshold=DEFAULT_VULNERABLE_THRESHOLD))]
fn relevance<'py>(
    py: Python<'py>,
    vulnerable_dataset: &PyDataset,
    candidates: Vec<PyRef<'py, PyDataset>>,
    dictionary: &PyPrivacyDictionary,
    threshold: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let profile = vulnerability::profile(&vulnerable_dataset.inner, &dictionary.inner, threshold)
        .map_err(err)?;
    let tables: Vec<&DatasetTable> = candidates.iter().map(|d| &d.inner).collect();
    let ranking = vulnerability::rank_relevance(&profile.vulnerable, &tables).map_err(err)?;
    to_py(py, &ranking)
}

/// Join two datasets; returns `{"outcome": ..., "suggestions": ...}`.
#[pyfunction]
#[pyo3(signature = (a, b, key, numeric_match="binned", normalization="sqrt"))]
fn join<'py>(
    py: Python<'py>,
    a: &PyDataset,
    b: &PyDataset,
    key: Vec<String>,
    numeric_match: &str,
    normalization: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let key = JoinKey::new(&key, &a.inner, &b.inner).map_err(err)?;
    let mode = parse_numeric(numeric_match)?;
    let norm = parse_nmi(normalization)?;
    let outcome = disclosure::join(&a.inner, &b.inner, &key, mode, None).map_err(err)?;
    let suggestions = match disclosure::suggest_features(&outcome, &a.inner, &b.inner, norm) {
        Ok(s) => Some(s),
        Err(DisclosureError::TooFewMatches(_)) => None,
        Err(e) => return Err(err(e)),
    };
    to_py(
        py,
        &serde_json::json!({ "outcome": outcome, "suggestions": suggestions }),
    )
}

#[pyfunction]
#[pyo3(signature = (datasets, dictionary, weights=None, seed=0))]
fn build_groups<'py>(
    py: Python<'py>,
    datasets: Vec<PyRef<'py, PyDataset>>,
    dictionary: &PyPrivacyDictionary,
    weights: Option<Vec<f64>>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let metas: Vec<_> = datasets.iter().map(|d| d.inner.meta.clone()).collect();
    let mut cfg = GroupingConfig::default();
    if let Some(w) = weights {
        cfg.weight_candidates = w;
    }
    cfg.projection.seed = seed;
    let dict = dictionary.inner.clone();
    let result = py
        .detach(|| grouping::build_groups(&metas, &dict, &EmbeddingProvider::default(), &cfg, None))
        .map_err(err)?;
    to_py(py, &result)
}

#[pyfunction]
#[pyo3(signature = (datasets, dictionary, top=5))]
fn audit<'py>(
    py: Python<'py>,
    datasets: Vec<PyRef<'py, PyDataset>>,
    dictionary: &PyPrivacyDictionary,
    top: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let tables: Vec<DatasetTable> = datasets.iter().map(|d| d.inner.clone()).collect();
    let dict = dictionary.inner.clone();
    let cfg = AuditConfig {
        top_pairs: top,
        ..AuditConfig::default()
    };
    let report = py
        .detach(|| run_audit(&tables, &dict, &EmbeddingProvider::default(), &cfg, None))
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
pub fn linkrisk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LinkRiskError", m.py().get_type::<LinkRiskError>())?;
    m.add_class::<PyPrivacyDictionary>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(normalize_attribute, m)?)?;
    m.add_function(wrap_pyfunction!(risk_score, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_risk, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(rank_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(relevance, m)?)?;
    m.add_function(wrap_pyfunction!(join, m)?)?;
    m.add_function(wrap_pyfunction!(build_groups, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
