//! Episodic and semantic document stores, lexical indexing, and query
//! construction.
//!
//! Episodic documents are previously seen problems (statement, editorial,
//! reference code); semantic documents are textbook-style chapters. Both are
//! indexed with BM25 (`k1 = 1.2`, `b = 0.75`). Retrieval of episodic
//! documents can exclude the problem currently being solved, which gives the
//! leave-one-out setup.

mod index;
mod tokenize;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use index::{Index, ScoredDoc, BM25_B, BM25_K1};
pub use tokenize::tokenize;

use crate::corpus::Corpus;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot index an empty document collection")]
    EmptyCorpus,
    #[error("query composition {0:?} needs a part that is missing")]
    MissingPart(Composition),
    #[error("query description is empty")]
    EmptyQuery,
    #[error("index cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Episodic,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Description,
    Solution,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub kind: DocKind,
    pub text: String,
    pub source_problem_id: Option<String>,
    pub parts_present: BTreeSet<Part>,
}

/// Which parts of a seen problem go into its episodic document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodicAblation {
    /// Description + editorial + reference code.
    #[default]
    Full,
    DescriptionOnly,
    DescriptionAndCode,
    DescriptionAndSolution,
}

impl EpisodicAblation {
    fn keeps(self, part: Part) -> bool {
        match (self, part) {
            (_, Part::Description) => true,
            (Self::Full, _) => true,
            (Self::DescriptionAndCode, Part::Code) => true,
            (Self::DescriptionAndSolution, Part::Solution) => true,
            _ => false,
        }
    }
}

pub const PART_SEPARATOR: &str = "\n\n";

/// One document per problem. Present parts are joined in the fixed order
/// description, editorial, code; empty parts are omitted.
pub fn build_episodic_documents(corpus: &Corpus, ablation: EpisodicAblation) -> Vec<Document> {
    corpus
        .problems
        .iter()
        .map(|p| {
            let mut parts_present = BTreeSet::new();
            let mut pieces = Vec::new();
            for (part, text) in [
                (Part::Description, p.statement.as_str()),
                (Part::Solution, p.editorial.as_str()),
                (Part::Code, p.reference_code.as_str()),
            ] {
                if ablation.keeps(part) && !text.trim().is_empty() {
                    parts_present.insert(part);
                    pieces.push(text.trim_end());
                }
            }
            Document {
                doc_id: format!("episodic/{}", p.problem_id),
                kind: DocKind::Episodic,
                text: pieces.join(PART_SEPARATOR),
                source_problem_id: Some(p.problem_id.clone()),
                parts_present,
            }
        })
        .collect()
}

/// One document per non-empty chapter, title prepended. Ids follow input
/// order, so duplicate titles stay distinct.
pub fn build_semantic_documents(chapters: &[(String, String)]) -> Vec<Document> {
    chapters
        .iter()
        .enumerate()
        .filter_map(|(i, (title, body))| {
            if body.trim().is_empty() {
                log::warn!("semantic chapter {i} ({title:?}) has an empty body; skipped");
                return None;
            }
            Some(Document {
                doc_id: format!("semantic/{i:04}"),
                kind: DocKind::Semantic,
                text: format!("{title}\n\n{}", body.trim_end()),
                source_problem_id: None,
                parts_present: BTreeSet::from([Part::Description]),
            })
        })
        .collect()
}

/// Reads every `*.md` file in `dir` (sorted by name) as a chapter. The title
/// is the first `# ` heading, or the file stem; the heading line is removed
/// from the body.
pub fn load_chapters(dir: &Path) -> Result<Vec<(String, String)>, RetrievalError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "md"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path)?;
            let stem = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let mut lines = text.lines();
            let first = lines.clone().find(|l| !l.trim().is_empty());
            Ok(match first.and_then(|l| l.strip_prefix("# ")) {
                Some(title) => {
                    let title = title.trim().to_string();
                    let body: Vec<&str> = lines
                        .by_ref()
                        .skip_while(|l| !l.starts_with("# "))
                        .skip(1)
                        .collect();
                    (title, body.join("\n"))
                }
                None => (stem, text),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    DescriptionOnly,
    #[default]
    DescriptionPlusCode,
    DescriptionPlusSolutionPlusCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub composition: Composition,
}

/// Concatenates exactly the parts `composition` names.
pub fn make_query(
    description: &str,
    draft_solution: Option<&str>,
    draft_code: Option<&str>,
    composition: Composition,
) -> Result<Query, RetrievalError> {
    if description.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    fn need<'a>(part: Option<&'a str>, c: Composition) -> Result<&'a str, RetrievalError> {
        part.ok_or(RetrievalError::MissingPart(c))
    }
    let text = match composition {
        Composition::DescriptionOnly => description.to_string(),
        Composition::DescriptionPlusCode => {
            [description, need(draft_code, composition)?].join(PART_SEPARATOR)
        }
        Composition::DescriptionPlusSolutionPlusCode => [
            description,
            need(draft_solution, composition)?,
            need(draft_code, composition)?,
        ]
        .join(PART_SEPARATOR),
    };
    Ok(Query { text, composition })
}

/// Top-`p` retrieval with optional leave-one-out exclusion.
pub fn retrieve(
    index: &Index,
    query: &Query,
    p: usize,
    exclude_problem_id: Option<&str>,
) -> Vec<ScoredDoc> {
    index.search(&query.text, p, exclude_problem_id)
}
