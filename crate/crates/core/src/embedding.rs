//! Schema embeddings.
//!
//! A dataset's schema becomes the sum of its attribute-token embeddings,
//! concatenated with a weight vector that marks which privacy attributes
//! are present. Cosine distance over these vectors drives grouping.

use std::collections::HashMap;
use std::hash::Hasher;
use std::io::BufRead;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_attribute, DatasetMeta, PrivacyDictionary};

pub const DEFAULT_DIMENSION: usize = 300;
pub const DEFAULT_WEIGHT_CANDIDATES: [f64; 2] = [8.0, 17.0];

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be positive")]
    InvalidDimension,
    #[error("dataset {0:?} has no attributes")]
    EmptySchema(String),
    #[error("attribute {0:?} is empty after normalization")]
    InvalidAttribute(String),
    #[error("need at least two vectors, got {0}")]
    TooFewVectors(usize),
    #[error("vector for {id:?} has length {got}, expected {expected}")]
    DimensionMismatch {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("dataset {0:?} maps to the zero vector")]
    ZeroVector(String),
    #[error("vector file line {line}: {msg}")]
    VectorFile { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMode {
    HashedTrigrams {
        seed: u64,
    },
    /// Pre-trained vectors; out-of-vocabulary tokens fall back to hashing.
    ExternalVectors {
        vectors: HashMap<String, Vec<f64>>,
        fallback_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingProvider {
    dimension: usize,
    mode: EmbeddingMode,
}

impl Default for EmbeddingProvider {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            mode: EmbeddingMode::HashedTrigrams { seed: 0 },
        }
    }
}

impl EmbeddingProvider {
    pub fn hashed(dimension: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::InvalidDimension);
        }
        Ok(Self {
            dimension,
            mode: EmbeddingMode::HashedTrigrams { seed },
        })
    }

    /// Parse a whitespace-separated vector file: `token v1 ... v{dimension}`.
    pub fn from_reader<R: BufRead>(
        reader: R,
        dimension: usize,
        fallback_seed: u64,
    ) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::InvalidDimension);
        }
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::VectorFile {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            if values.len() != dimension {
                return Err(EmbeddingError::VectorFile {
                    line: i + 1,
                    msg: format!("expected {dimension} values, found {}", values.len()),
                });
            }
            vectors.insert(token.to_lowercase(), values);
        }
        Ok(Self {
            dimension,
            mode: EmbeddingMode::ExternalVectors {
                vectors,
                fallback_seed,
            },
        })
    }

    pub fn from_vector_file(
        path: &Path,
        dimension: usize,
        fallback_seed: u64,
    ) -> Result<Self, EmbeddingError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_reader(file, dimension, fallback_seed)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mode(&self) -> &EmbeddingMode {
        &self.mode
    }

    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        match &self.mode {
            EmbeddingMode::HashedTrigrams { seed } => hashed_trigrams(token, self.dimension, *seed),
            EmbeddingMode::ExternalVectors {
                vectors,
                fallback_seed,
            } => vectors
                .get(token)
                .cloned()
                .unwrap_or_else(|| hashed_trigrams(token, self.dimension, *fallback_seed)),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FnvHasher::with_key(splitmix64(seed));
    h.write(bytes);
    splitmix64(h.finish())
}

/// Signed feature hashing of boundary-padded character trigrams, scaled to
/// unit length.
fn hashed_trigrams(token: &str, dimension: usize, seed: u64) -> Vec<f64> {
    let padded: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut v = vec![0.0; dimension];
    let mut buf = [0u8; 12];
    for window in padded.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let h = seeded_hash(&buf[..len], seed);
        let idx = (h % dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // colliding trigrams cancelled out
        let idx = (seeded_hash(token.as_bytes(), seed) % dimension as u64) as usize;
        v[idx] = 1.0;
        return v;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Weight applied to present privacy attributes, and the values tried when
/// building groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub weight: f64,
    pub candidates: Vec<f64>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            weight: DEFAULT_WEIGHT_CANDIDATES[0],
            candidates: DEFAULT_WEIGHT_CANDIDATES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetVector {
    pub dataset_id: String,
    /// Sum of token embeddings over every attribute.
    pub base: Vec<f64>,
    /// One entry per dictionary attribute: the weight if present, else 0.
    pub weights: Vec<f64>,
    pub dictionary_version: u64,
}

impl DatasetVector {
    pub fn full(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.base.len() + self.weights.len());
        v.extend_from_slice(&self.base);
        v.extend_from_slice(&self.weights);
        v
    }

    pub fn len(&self) -> usize {
        self.base.len() + self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn dataset_vector(
    meta: &DatasetMeta,
    provider: &EmbeddingProvider,
    dictionary: &PrivacyDictionary,
    weight: f64,
) -> Result<DatasetVector, EmbeddingError> {
    if meta.attribute_names.is_empty() {
        return Err(EmbeddingError::EmptySchema(meta.id.clone()));
    }
    let mut base = vec![0.0; provider.dimension()];
    let mut weights = vec![0.0; dictionary.len()];
    // summed in sorted order so the vector is bitwise independent of column order
    let mut attrs = meta
        .attribute_names
        .iter()
        .map(|raw| {
            normalize_attribute(raw).map_err(|_| EmbeddingError::InvalidAttribute(raw.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    attrs.sort_unstable();
    for attr in attrs {
        for token in attr.split('_').filter(|t| !t.is_empty()) {
            for (acc, x) in base.iter_mut().zip(provider.embed_token(token)) {
                *acc += x;
            }
        }
        if let Some(i) = dictionary.index_of(&attr) {
            weights[i] = weight;
        }
    }
    Ok(DatasetVector {
        dataset_id: meta.id.clone(),
        base,
        weights,
        dictionary_version: dictionary.version(),
    })
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Build from square rows. Panics if the rows are not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "distance rows must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Cosine distances `1 - cos(a, b)`, clamped to `[0, 2]`.
pub fn pairwise_distances(vectors: &[DatasetVector]) -> Result<DistanceMatrix, EmbeddingError> {
    if vectors.len() < 2 {
        return Err(EmbeddingError::TooFewVectors(vectors.len()));
    }
    let expected = vectors[0].len();
    let mut full = Vec::with_capacity(vectors.len());
    let mut norms = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != expected {
            return Err(EmbeddingError::DimensionMismatch {
                id: v.dataset_id.clone(),
                got: v.len(),
                expected,
            });
        }
        let f = v.full();
        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbeddingError::ZeroVector(v.dataset_id.clone()));
        }
        full.push(f);
        norms.push(norm);
    }
    let n = vectors.len();
    let mut m = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = if full[i] == full[j] {
                0.0
            } else {
                let dot: f64 = full[i].iter().zip(&full[j]).map(|(a, b)| a * b).sum();
                (1.0 - dot / (norms[i] * norms[j])).clamp(0.0, 2.0)
            };
            m.set_symmetric(i, j, d);
        }
    }
    Ok(m)
}
