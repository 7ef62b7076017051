//! Okapi BM25 over an in-memory inverted view of the documents.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tokenize::tokenize;
use super::{Document, RetrievalError};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

const CACHE_MAGIC: &[u8; 8] = b"CPBIDX\0\0";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    documents: Vec<Document>,
    /// Per-document term frequencies.
    term_freqs: Vec<BTreeMap<String, u32>>,
    doc_lens: Vec<u32>,
    doc_freqs: BTreeMap<String, u32>,
    avg_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub document: Document,
    pub score: f64,
}

impl Index {
    pub fn build(documents: Vec<Document>) -> Result<Self, RetrievalError> {
        if documents.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut term_freqs = Vec::with_capacity(documents.len());
        let mut doc_lens = Vec::with_capacity(documents.len());
        let mut doc_freqs: BTreeMap<String, u32> = BTreeMap::new();
        for doc in &documents {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            let terms = tokenize(&doc.text);
            doc_lens.push(terms.len() as u32);
            for t in terms {
                *tf.entry(t).or_insert(0) += 1;
            }
            for t in tf.keys() {
                *doc_freqs.entry(t.clone()).or_insert(0) += 1;
            }
            term_freqs.push(tf);
        }
        let avg_len = doc_lens.iter().map(|&l| f64::from(l)).sum::<f64>() / documents.len() as f64;
        Ok(Self {
            documents,
            term_freqs,
            doc_lens,
            doc_freqs,
            avg_len,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.doc_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn doc_len(&self, i: usize) -> u32 {
        self.doc_lens[i]
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.documents.len() as f64;
        let df = f64::from(self.doc_freq(term));
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of document `i` for pre-tokenized query terms (repeats
    /// count once per occurrence).
    pub fn score_terms(&self, i: usize, query_terms: &BTreeMap<String, u32>) -> f64 {
        let tf_doc = &self.term_freqs[i];
        let len_norm = if self.avg_len > 0.0 {
            f64::from(self.doc_lens[i]) / self.avg_len
        } else {
            0.0
        };
        query_terms
            .iter()
            .filter_map(|(term, &qtf)| {
                let tf = f64::from(*tf_doc.get(term)?);
                let sat =
                    tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * len_norm));
                Some(f64::from(qtf) * self.idf(term) * sat)
            })
            .sum()
    }

    /// Top `p` documents with positive score, nonincreasing, ties by doc id.
    /// Documents whose `source_problem_id` equals `exclude` never appear.
    pub fn search(&self, query: &str, p: usize, exclude: Option<&str>) -> Vec<ScoredDoc> {
        let mut q: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokenize(query) {
            *q.entry(t).or_insert(0) += 1;
        }
        if q.is_empty() || p == 0 {
            return Vec::new();
        }
        let mut hits: Vec<(f64, usize)> = (0..self.documents.len())
            .filter(|&i| {
                exclude.is_none() || self.documents[i].source_problem_id.as_deref() != exclude
            })
            .map(|i| (self.score_terms(i, &q), i))
            .filter(|&(s, _)| s > 0.0)
            .collect();
        hits.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.documents[a.1].doc_id.cmp(&self.documents[b.1].doc_id))
        });
        hits.truncate(p);
        hits.into_iter()
            .map(|(score, i)| ScoredDoc {
                document: self.documents[i].clone(),
                score,
            })
            .collect()
    }

    /// Hash over document ids, kinds and texts; keys the on-disk cache.
    pub fn content_hash(documents: &[Document]) -> [u8; 32] {
        let mut h = Sha256::new();
        for d in documents {
            let bytes = serde_json::to_vec(d).expect("document serializes");
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        h.finalize().into()
    }

    /// Writes the versioned cache file: magic, format version, content hash,
    /// then the CBOR-encoded index.
    pub fn save_cache(&self, path: &Path) -> Result<(), RetrievalError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(CACHE_MAGIC)?;
        f.write_all(&CACHE_VERSION.to_le_bytes())?;
        f.write_all(&Self::content_hash(&self.documents))?;
        ciborium::into_writer(self, &mut f).map_err(|e| RetrievalError::Cache(e.to_string()))?;
        Ok(())
    }

    /// Loads a cached index if the file exists, has the current format
    /// version, and was built from `documents`. Anything else is a miss.
    pub fn load_cache(path: &Path, documents: &[Document]) -> Option<Self> {
        let mut f = std::fs::File::open(path).ok()?;
        let mut header = [0u8; 8 + 4 + 32];
        f.read_exact(&mut header).ok()?;
        if &header[..8] != CACHE_MAGIC
            || header[8..12] != CACHE_VERSION.to_le_bytes()
            || header[12..] != Self::content_hash(documents)
        {
            return None;
        }
        let index: Self = ciborium::from_reader(f).ok()?;
        (index.documents == documents).then_some(index)
    }

    /// Cached build: reuse a valid cache file, otherwise build and rewrite it.
    pub fn build_cached(documents: Vec<Document>, path: &Path) -> Result<Self, RetrievalError> {
        if let Some(index) = Self::load_cache(path, &documents) {
            return Ok(index);
        }
        let index = Self::build(documents)?;
        index.save_cache(path)?;
        Ok(index)
    }
}
