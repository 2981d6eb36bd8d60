//! tf-idf retrieval of counter-narrative suggestions.
//!
//! Each hate-message / counter-narrative pair is one document (both texts
//! concatenated). A query is vectorized with the index idf and scored
//! against every document by cosine similarity; the counter-narratives of
//! the best-scoring pairs are returned.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{CnPair, PairOrigin};
use crate::store::{StoreError, StoreHandle, WriteBatch};

pub const DEFAULT_K: usize = 4;
pub const MAX_K: usize = 10;

const ARTIFACT_MAGIC: &[u8; 8] = b"HWTFIDF\0";
const ARTIFACT_FORMAT: u32 = 1;

const SAMPLE_PAIRS: &str = include_str!("../fixtures/sample_pairs.csv");

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("no pairs for language '{0}'")]
    EmptyCorpus(String),
    #[error("query has no indexed terms")]
    UnindexableQuery,
    #[error("k must be between 1 and {MAX_K}, got {0}")]
    InvalidK(usize),
    #[error("index is for '{index}', query is '{query}'")]
    LanguageMismatch { index: String, query: String },
    #[error("invalid pair: {0}")]
    InvalidPair(#[from] crate::model::PairError),
    #[error("duplicate pair, already stored as {0}")]
    Duplicate(String),
    #[error("corpus format error: {0}")]
    Format(String),
    #[error("index artifact error: {0}")]
    Artifact(String),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<StoreError> for RetrievalError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicatePair { existing, .. } => RetrievalError::Duplicate(existing),
            other => RetrievalError::Store(other),
        }
    }
}

/// Lowercased alphanumeric runs. '#' and all other punctuation separate
/// terms; no stop-word removal and no stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sparse term-weight vector; zero weights are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermWeightVector(BTreeMap<String, f64>);

impl TermWeightVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: impl Into<String>, weight: f64) {
        let term = term.into();
        if weight != 0.0 {
            self.0.insert(term, weight);
        } else {
            self.0.remove(&term);
        }
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TermWeightVector) -> f64 {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().map(|(t, w)| w * large.get(t)).sum()
    }
}

impl FromIterator<(String, f64)> for TermWeightVector {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        let mut v = TermWeightVector::new();
        for (t, w) in iter {
            v.insert(t, w);
        }
        v
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &TermWeightVector, b: &TermWeightVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) / (na * nb)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfMode {
    /// `ln(N / df)`; terms present in every document get weight 0.
    #[default]
    Plain,
    /// `ln((1 + N) / (1 + df)) + 1`.
    Smooth,
}

impl IdfMode {
    fn idf(self, n: u64, df: u64) -> f64 {
        match self {
            IdfMode::Plain => (n as f64 / df as f64).ln(),
            IdfMode::Smooth => ((1 + n) as f64 / (1 + df) as f64).ln() + 1.0,
        }
    }
}

/// Immutable tf-idf index over one language's pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfIndex {
    pub language: String,
    pub doc_count: u64,
    pub idf_mode: IdfMode,
    /// Document frequency per term.
    pub vocabulary: BTreeMap<String, u64>,
    pub doc_vectors: BTreeMap<String, TermWeightVector>,
    pub norms: BTreeMap<String, f64>,
    pub counter_texts: BTreeMap<String, String>,
    /// Store version of the pair snapshot the index was built from, if any.
    pub source_version: Option<u64>,
}

fn term_counts(tokens: impl IntoIterator<Item = String>) -> BTreeMap<String, u64> {
    let mut tf = BTreeMap::new();
    for t in tokens {
        *tf.entry(t).or_insert(0) += 1;
    }
    tf
}

/// Raw term counts of the pair document (hate text followed by counter text).
pub fn document_terms(pair: &CnPair) -> BTreeMap<String, u64> {
    term_counts(tokenize(&pair.hate_text).into_iter().chain(tokenize(&pair.counter_text)))
}

pub fn build_index(pairs: &[CnPair], language: &str) -> Result<TfIdfIndex, RetrievalError> {
    build_index_with(pairs, language, IdfMode::Plain)
}

pub fn build_index_with(pairs: &[CnPair], language: &str, idf_mode: IdfMode) -> Result<TfIdfIndex, RetrievalError> {
    let docs: Vec<(&CnPair, BTreeMap<String, u64>)> = pairs
        .iter()
        .filter(|p| p.language == language)
        .map(|p| (p, document_terms(p)))
        .collect();
    if docs.is_empty() {
        return Err(RetrievalError::EmptyCorpus(language.to_string()));
    }
    let n = docs.len() as u64;
    let mut vocabulary: BTreeMap<String, u64> = BTreeMap::new();
    for (_, tf) in &docs {
        for t in tf.keys() {
            *vocabulary.entry(t.clone()).or_insert(0) += 1;
        }
    }
    let mut doc_vectors = BTreeMap::new();
    let mut norms = BTreeMap::new();
    let mut counter_texts = BTreeMap::new();
    for (pair, tf) in docs {
        let v: TermWeightVector = tf
            .into_iter()
            .map(|(t, c)| {
                let w = c as f64 * idf_mode.idf(n, vocabulary[&t]);
                (t, w)
            })
            .collect();
        norms.insert(pair.id.clone(), v.norm());
        doc_vectors.insert(pair.id.clone(), v);
        counter_texts.insert(pair.id.clone(), pair.counter_text.clone());
    }
    Ok(TfIdfIndex {
        language: language.to_string(),
        doc_count: n,
        idf_mode,
        vocabulary,
        doc_vectors,
        norms,
        counter_texts,
        source_version: None,
    })
}

impl TfIdfIndex {
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|df| self.idf_mode.idf(self.doc_count, *df))
    }

    pub fn with_source_version(mut self, version: u64) -> Self {
        self.source_version = Some(version);
        self
    }

    pub fn is_stale(&self, pairs_version: u64) -> bool {
        self.source_version != Some(pairs_version)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        let body = serde_json::to_vec(self).map_err(|e| RetrievalError::Artifact(e.to_string()))?;
        let mut bytes = Vec::with_capacity(body.len() + 28);
        bytes.extend_from_slice(ARTIFACT_MAGIC);
        bytes.extend_from_slice(&ARTIFACT_FORMAT.to_le_bytes());
        bytes.extend_from_slice(&self.source_version.unwrap_or(u64::MAX).to_le_bytes());
        bytes.extend_from_slice(&(body.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
        bytes.extend_from_slice(&body);
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let bytes = fs::read(path)?;
        let bad = |m: &str| RetrievalError::Artifact(m.to_string());
        if bytes.len() < 28 || &bytes[..8] != ARTIFACT_MAGIC {
            return Err(bad("not an index artifact"));
        }
        let format = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if format != ARTIFACT_FORMAT {
            return Err(RetrievalError::Artifact(format!("unsupported format {format}")));
        }
        let len = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
        let body = bytes.get(28..28 + len).ok_or_else(|| bad("truncated artifact"))?;
        if crc32fast::hash(body) != crc {
            return Err(bad("artifact checksum mismatch"));
        }
        serde_json::from_slice(body).map_err(|e| RetrievalError::Artifact(e.to_string()))
    }
}

/// tf-idf vector of a query under the index's idf. Out-of-vocabulary terms
/// and zero-idf terms are dropped.
pub fn vectorize_query(text: &str, index: &TfIdfIndex) -> Result<TermWeightVector, RetrievalError> {
    let v: TermWeightVector = term_counts(tokenize(text))
        .into_iter()
        .filter_map(|(t, c)| index.idf(&t).map(|idf| (t, c as f64 * idf)))
        .collect();
    if v.is_empty() {
        return Err(RetrievalError::UnindexableQuery);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub rank: usize,
    pub pair_id: String,
    pub counter_text: String,
    pub score: f64,
    /// Reserved for diversity re-ranking; not computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diversity: Option<f64>,
}

/// Scores every document against `query`, keeping non-zero scores, best
/// first with ties broken by ascending pair id.
pub fn score_all(query: &TermWeightVector, index: &TfIdfIndex) -> Vec<(String, f64)> {
    let qn = query.norm();
    let mut scored: Vec<(String, f64)> = index
        .doc_vectors
        .iter()
        .filter_map(|(id, v)| {
            let dn = index.norms[id];
            if qn == 0.0 || dn == 0.0 {
                return None;
            }
            let s = (query.dot(v) / (qn * dn)).clamp(0.0, 1.0);
            (s > 0.0).then(|| (id.clone(), s))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

/// Top-`k` counter-narrative suggestions for a hate message.
pub fn suggest(hate_text: &str, index: &TfIdfIndex, k: usize) -> Result<Vec<Suggestion>, RetrievalError> {
    if !(1..=MAX_K).contains(&k) {
        return Err(RetrievalError::InvalidK(k));
    }
    let query = vectorize_query(hate_text, index)?;
    Ok(score_all(&query, index)
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (pair_id, score))| Suggestion {
            rank: i + 1,
            counter_text: index.counter_texts[&pair_id].clone(),
            pair_id,
            score,
            diversity: None,
        })
        .collect())
}

/// As [`suggest`], rejecting queries in another language than the index.
pub fn suggest_in(language: &str, hate_text: &str, index: &TfIdfIndex, k: usize) -> Result<Vec<Suggestion>, RetrievalError> {
    if index.language != language {
        return Err(RetrievalError::LanguageMismatch { index: index.language.clone(), query: language.to_string() });
    }
    suggest(hate_text, index, k)
}

/// Builds a pair with a content-derived id.
pub fn new_pair(language: &str, hate_text: &str, counter_text: &str, origin: PairOrigin, created_at: DateTime<Utc>) -> CnPair {
    CnPair {
        id: CnPair::derive_id(language, hate_text, counter_text),
        language: language.to_string(),
        hate_text: hate_text.to_string(),
        counter_text: counter_text.to_string(),
        origin,
        created_at,
    }
}

/// Persists an operator-written pair. Existing index snapshots are not
/// affected; the pair shows up in the next build.
pub fn add_pair(store: &StoreHandle, pair: CnPair, languages: &[String]) -> Result<String, RetrievalError> {
    pair.validate(languages)?;
    let id = pair.id.clone();
    store.commit(WriteBatch { pairs: vec![pair], ..Default::default() })?;
    Ok(id)
}

#[derive(Debug, Deserialize)]
struct PairRow {
    id: String,
    language: String,
    hate_text: String,
    counter_text: String,
    origin: String,
    #[serde(default)]
    created_at: Option<DateTime<Utc>>,
}

impl PairRow {
    fn into_pair(self) -> Result<CnPair, RetrievalError> {
        let origin = self.origin.parse().map_err(RetrievalError::Format)?;
        Ok(CnPair {
            id: self.id,
            language: self.language,
            hate_text: self.hate_text,
            counter_text: self.counter_text,
            origin,
            created_at: self.created_at.unwrap_or(DateTime::UNIX_EPOCH),
        })
    }
}

/// Reads pairs from CSV with header `id,language,hate_text,counter_text,origin`.
pub fn read_pairs_csv(data: &str) -> Result<Vec<CnPair>, RetrievalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::None).from_reader(data.as_bytes());
    let headers = reader.headers().map_err(|e| RetrievalError::Format(e.to_string()))?.clone();
    for required in ["id", "language", "hate_text", "counter_text", "origin"] {
        if !headers.iter().any(|h| h == required) {
            return Err(RetrievalError::Format(format!("missing column '{required}'")));
        }
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<PairRow>() {
        out.push(row.map_err(|e| RetrievalError::Format(e.to_string()))?.into_pair()?);
    }
    check_unique_ids(&out)?;
    Ok(out)
}

pub fn read_pairs_jsonl(data: &str) -> Result<Vec<CnPair>, RetrievalError> {
    let mut out = Vec::new();
    for (i, line) in data.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: PairRow =
            serde_json::from_str(line).map_err(|e| RetrievalError::Format(format!("line {}: {e}", i + 1)))?;
        out.push(row.into_pair()?);
    }
    check_unique_ids(&out)?;
    Ok(out)
}

fn check_unique_ids(pairs: &[CnPair]) -> Result<(), RetrievalError> {
    let mut seen = HashSet::new();
    for p in pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(RetrievalError::Format(format!("duplicate pair id '{}'", p.id)));
        }
    }
    Ok(())
}

/// Loads a pair corpus; `.jsonl` / `.json` files are read as JSONL,
/// everything else as CSV.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<CnPair>, RetrievalError> {
    let path = path.as_ref();
    let data = fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => read_pairs_jsonl(&data),
        _ => read_pairs_csv(&data),
    }
}

/// Small bundled corpus used by the examples and tests.
pub fn sample_pairs() -> Vec<CnPair> {
    read_pairs_csv(SAMPLE_PAIRS).expect("bundled sample corpus is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, hate: &str, counter: &str) -> CnPair {
        CnPair {
            id: id.into(),
            language: "en".into(),
            hate_text: hate.into(),
            counter_text: counter.into(),
            origin: PairOrigin::Seed,
            created_at: DateTime::UNIX_EPOCH,
        }
    }

    fn three_docs() -> Vec<CnPair> {
        vec![
            pair("d1", "muslims", "terrorists"),
            pair("d2", "muslims", "doctors"),
            pair("d3", "europe", "borders"),
        ]
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(
            tokenize("Every Muslim is a potential terrorist"),
            ["every", "muslim", "is", "a", "potential", "terrorist"]
        );
        assert_eq!(tokenize("#BanIslam now!"), ["banislam", "now"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("L'Islam è"), ["l", "islam", "è"]);
    }

    #[test]
    fn single_document_index_has_empty_vector() {
        let idx = build_index(&[pair("p", "a b", "c")], "en").unwrap();
        assert_eq!(idx.doc_count, 1);
        assert!(idx.doc_vectors["p"].is_empty());
        assert_eq!(idx.norms["p"], 0.0);
    }

    #[test]
    fn idf_values() {
        let idx = build_index(&three_docs(), "en").unwrap();
        assert!((idx.idf("muslims").unwrap() - 1.5f64.ln()).abs() < 1e-12);
        assert!((idx.idf("terrorists").unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(idx.vocabulary["muslims"], 2);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_index(&[], "en"), Err(RetrievalError::EmptyCorpus(_))));
        assert!(matches!(build_index(&three_docs(), "fr"), Err(RetrievalError::EmptyCorpus(_))));
    }

    #[test]
    fn query_vector() {
        let idx = build_index(&three_docs(), "en").unwrap();
        let v = vectorize_query("muslims terrorists", &idx).unwrap();
        assert!((v.get("muslims") - 1.5f64.ln()).abs() < 1e-12);
        assert!((v.get("terrorists") - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(vectorize_query("zebra", &idx), Err(RetrievalError::UnindexableQuery)));
    }

    #[test]
    fn cosine_values() {
        let a: TermWeightVector = [("a".to_string(), 1.0), ("b".to_string(), 1.0)].into_iter().collect();
        let b: TermWeightVector = [("a".to_string(), 1.0)].into_iter().collect();
        let c: TermWeightVector = [("z".to_string(), 2.0)].into_iter().collect();
        assert!((cosine(&a, &b) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&a, &c), 0.0);
        assert_eq!(cosine(&a, &TermWeightVector::new()), 0.0);
    }

    #[test]
    fn three_doc_ranking() {
        let idx = build_index(&three_docs(), "en").unwrap();
        let s = suggest("muslims terrorists", &idx, 4).unwrap();
        assert_eq!(s[0].pair_id, "d1");
        assert_eq!(s.len(), 2, "d3 shares no term and is excluded");
        assert_eq!(s[0].rank, 1);
        assert!(s[0].score >= s[1].score);
    }

    #[test]
    fn k_bounds_and_language() {
        let idx = build_index(&three_docs(), "en").unwrap();
        assert!(matches!(suggest("muslims", &idx, 0), Err(RetrievalError::InvalidK(0))));
        assert!(matches!(suggest("muslims", &idx, 11), Err(RetrievalError::InvalidK(11))));
        assert!(matches!(
            suggest_in("fr", "muslims", &idx, 4),
            Err(RetrievalError::LanguageMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip_with_quoting() {
        let data = "id,language,hate_text,counter_text,origin\n\
                    p1,en,\"They are, all, the same\",\"No, \"\"they\"\" are not\",seed\n";
        let pairs = read_pairs_csv(data).unwrap();
        assert_eq!(pairs[0].hate_text, "They are, all, the same");
        assert_eq!(pairs[0].counter_text, "No, \"they\" are not");
        assert!(read_pairs_csv("id,language\nx,en\n").is_err());
    }

    #[test]
    fn sample_corpus_loads() {
        let pairs = sample_pairs();
        assert!(pairs.len() >= 12);
        for lang in ["en", "fr", "it"] {
            assert!(build_index(&pairs, lang).is_ok(), "{lang}");
        }
    }

    #[test]
    fn artifact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en.idx");
        let idx = build_index(&sample_pairs(), "en").unwrap().with_source_version(3);
        idx.save(&path).unwrap();
        assert_eq!(TfIdfIndex::load(&path).unwrap(), idx);
        fs::write(&path, b"garbage").unwrap();
        assert!(matches!(TfIdfIndex::load(&path), Err(RetrievalError::Artifact(_))));
    }
}
