//! Documentation retrieval: chunking, exact cosine top-k, and an entropy
//! diagnostic for ambiguous results.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{cosine, BackendError, BackendKind, ChatBackend, ChatMessage, Embedder, GenerationRequest};
use crate::dataset::write_atomic;
use crate::par::{self, ExecMode};

pub const DEFAULT_CHUNK_SIZE: usize = 800;
pub const DEFAULT_CHUNK_OVERLAP: usize = 100;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("chunk size {size} must exceed overlap {overlap}")]
    ChunkParams { size: usize, overlap: usize },
    #[error("the chunk store is empty")]
    EmptyStore,
    #[error("vector dimension {got} differs from the store's {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("store file: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub vector: Vec<f64>,
}

/// Char-offset ranges of the chunks of `text`. Consecutive ranges overlap
/// by exactly `overlap` chars. Cuts prefer the end of a blank line, then a
/// sentence end, then fall back to a hard cut at `size`.
pub fn chunk_ranges(text: &str, size: usize, overlap: usize) -> Result<Vec<(usize, usize)>, RetrievalError> {
    if size <= overlap {
        return Err(RetrievalError::ChunkParams { size, overlap });
    }
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < n {
        let limit = (pos + size).min(n);
        if limit == n {
            out.push((pos, n));
            break;
        }
        // a cut at `end` must leave progress after stepping back `overlap`
        let lowest = pos + overlap + 1;
        let blank = (lowest..=limit).rev().find(|&e| e >= 2 && chars[e - 2] == '\n' && chars[e - 1] == '\n');
        let sentence = || {
            (lowest..=limit).rev().find(|&e| {
                e >= 2 && matches!(chars[e - 2], '.' | '!' | '?') && chars[e - 1].is_whitespace()
            })
        };
        let end = blank.or_else(sentence).unwrap_or(limit);
        out.push((pos, end));
        pos = end - overlap;
    }
    Ok(out)
}

fn slice_chars(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end - start).collect()
}

/// Splits and embeds documents given as `(doc_id, text)` pairs.
pub fn chunk_documents(
    docs: &[(String, String)],
    size: usize,
    overlap: usize,
    embedder: &dyn Embedder,
    mode: ExecMode,
) -> Result<Vec<Chunk>, RetrievalError> {
    let mut pieces = Vec::new();
    for (doc_id, text) in docs {
        for (ordinal, (s, e)) in chunk_ranges(text, size, overlap)?.into_iter().enumerate() {
            pieces.push((doc_id.clone(), ordinal, slice_chars(text, s, e)));
        }
    }
    let vectors = par::try_map(mode, &pieces, |(_, _, text)| embedder.embed(text))?;
    Ok(pieces
        .into_iter()
        .zip(vectors)
        .map(|((doc_id, ordinal, text), vector)| Chunk {
            doc_id,
            ordinal,
            text,
            vector,
        })
        .collect())
}

/// Reads every regular file in `dir` (sorted by name) as one document.
pub fn load_docs(dir: &Path) -> Result<Vec<(String, String)>, RetrievalError> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    let mut docs = Vec::new();
    for e in entries {
        if e.file_type()?.is_file() {
            docs.push((e.file_name().to_string_lossy().into_owned(), fs::read_to_string(e.path())?));
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkStore {
    pub dimension: usize,
    pub chunks: Vec<Chunk>,
}

impl ChunkStore {
    pub fn new(chunks: Vec<Chunk>) -> Result<Self, RetrievalError> {
        let dimension = chunks.first().map_or(0, |c| c.vector.len());
        if let Some(c) = chunks.iter().find(|c| c.vector.len() != dimension) {
            return Err(RetrievalError::Dimension {
                expected: dimension,
                got: c.vector.len(),
            });
        }
        Ok(Self { dimension, chunks })
    }

    pub fn build(
        docs: &[(String, String)],
        size: usize,
        overlap: usize,
        embedder: &dyn Embedder,
        mode: ExecMode,
    ) -> Result<Self, RetrievalError> {
        Self::new(chunk_documents(docs, size, overlap, embedder, mode)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        write_atomic(path, &serde_json::to_vec(self)?).map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let store: ChunkStore = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::new(store.chunks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
    pub normalized_entropy: f64,
}

/// Entropy of the clamped score distribution over ln(k'). All scores
/// non-positive gives 1; a single positive hit gives 0.
pub fn normalized_entropy(scores: &[f64]) -> f64 {
    let clamped: Vec<f64> = scores.iter().map(|s| s.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return 1.0;
    }
    if clamped.len() < 2 {
        return 0.0;
    }
    let h: f64 = clamped
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let p = x / total;
            -p * p.ln()
        })
        .sum();
    (h / (clamped.len() as f64).ln()).clamp(0.0, 1.0)
}

fn by_rank(a: &(f64, &Chunk), b: &(f64, &Chunk)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| a.1.doc_id.cmp(&b.1.doc_id))
        .then_with(|| a.1.ordinal.cmp(&b.1.ordinal))
}

/// Top-k by cosine against a precomputed query vector; ties go to the
/// smaller (doc_id, ordinal).
pub fn retrieve_with_vector(
    store: &ChunkStore,
    query: &[f64],
    k: usize,
    mode: ExecMode,
) -> Result<RetrievalResult, RetrievalError> {
    if store.chunks.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    if query.len() != store.dimension {
        return Err(RetrievalError::Dimension {
            expected: store.dimension,
            got: query.len(),
        });
    }
    let scores = par::map(mode, &store.chunks, |c| cosine(query, &c.vector));
    let mut ranked: Vec<(f64, &Chunk)> = scores.into_iter().zip(&store.chunks).collect();
    ranked.sort_by(by_rank);
    ranked.truncate(k);
    let hits: Vec<Hit> = ranked
        .into_iter()
        .map(|(score, c)| Hit {
            doc_id: c.doc_id.clone(),
            ordinal: c.ordinal,
            text: c.text.clone(),
            score,
        })
        .collect();
    let scores: Vec<f64> = hits.iter().map(|h| h.score).collect();
    Ok(RetrievalResult {
        normalized_entropy: normalized_entropy(&scores),
        hits,
    })
}

pub fn retrieve(
    store: &ChunkStore,
    query: &str,
    embedder: &dyn Embedder,
    k: usize,
    mode: ExecMode,
) -> Result<RetrievalResult, RetrievalError> {
    if store.chunks.is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    retrieve_with_vector(store, &embedder.embed(query)?, k, mode)
}

pub fn truncate_chars(text: &str, max: usize) -> String {
    match text.char_indices().nth(max) {
        Some((i, _)) => text[..i].to_string(),
        None => text.to_string(),
    }
}

const SUMMARY_SYSTEM: &str = "You are an expert APL code programmer.\nCondense the documentation excerpts below into a concise summary of what is relevant for understanding the given APL code. Output only the summary.";

/// Condenses retrieved chunks into at most `budget` chars. The scripted
/// mock path skips the model and concatenates the chunk texts.
pub fn summarize(
    result: &RetrievalResult,
    apl: &str,
    backend: &dyn ChatBackend,
    model: &str,
    budget: usize,
) -> Result<String, RetrievalError> {
    if result.hits.is_empty() {
        return Ok(String::new());
    }
    let joined = result.hits.iter().map(|h| h.text.trim()).collect::<Vec<_>>().join("\n\n");
    if backend.kind() == BackendKind::ScriptedMock {
        return Ok(truncate_chars(&joined, budget));
    }
    let user = format!("### APL code:\n{}\n\n### Documentation excerpts:\n{joined}\n", apl.trim_end());
    let request = GenerationRequest::new(vec![ChatMessage::system(SUMMARY_SYSTEM), ChatMessage::user(user)], model);
    Ok(truncate_chars(backend.generate(&request)?.trim(), budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{HashedNgramEmbedder, Matcher, ScriptedMock};
    use proptest::prelude::*;

    fn chunk(doc: &str, ordinal: usize, vector: Vec<f64>) -> Chunk {
        Chunk {
            doc_id: doc.into(),
            ordinal,
            text: format!("{doc}#{ordinal}"),
            vector,
        }
    }

    fn docs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn short_doc_is_one_chunk() {
        let e = HashedNgramEmbedder::default();
        let c = chunk_documents(&docs(&[("d", "⍳ generates indices.")]), 800, 100, &e, ExecMode::Sequential).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].text, "⍳ generates indices.");
        assert!(chunk_documents(&[], 800, 100, &e, ExecMode::Sequential).unwrap().is_empty());
        assert!(chunk_ranges("x", 10, 10).is_err());
    }

    #[test]
    fn consecutive_chunks_share_the_overlap() {
        let text: String = (0..1000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let ranges = chunk_ranges(&text, 400, 50).unwrap();
        assert!(ranges.len() >= 3);
        let pieces: Vec<String> = ranges.iter().map(|&(s, e)| slice_chars(&text, s, e)).collect();
        for pair in pieces.windows(2) {
            let tail: String = pair[0].chars().skip(pair[0].chars().count() - 50).collect();
            let head: String = pair[1].chars().take(50).collect();
            assert_eq!(tail, head);
        }
    }

    #[test]
    fn prefers_blank_lines_then_sentences() {
        let text = format!("{}\n\n{}", "a".repeat(30), "b".repeat(30));
        assert_eq!(chunk_ranges(&text, 40, 5).unwrap()[0], (0, 32));
        let text = format!("{}. {}", "a".repeat(30), "b".repeat(30));
        assert_eq!(chunk_ranges(&text, 40, 5).unwrap()[0], (0, 32));
    }

    #[test]
    fn self_retrieval_and_ties() {
        let e = HashedNgramEmbedder::default();
        let d = docs(&[("a", "⌈/ finds the maximum of a vector."), ("b", "⍉ transposes a matrix.")]);
        let store = ChunkStore::build(&d, 800, 100, &e, ExecMode::Sequential).unwrap();
        let r = retrieve(&store, "⍉ transposes a matrix.", &e, 5, ExecMode::Sequential).unwrap();
        assert_eq!(r.hits[0].doc_id, "b");
        assert!((r.hits[0].score - 1.0).abs() < 1e-9);

        let tie = ChunkStore::new(vec![chunk("b", 0, vec![1.0, 0.0]), chunk("a", 1, vec![1.0, 0.0]), chunk("a", 0, vec![1.0, 0.0])]).unwrap();
        let r = retrieve_with_vector(&tie, &[1.0, 0.0], 2, ExecMode::Sequential).unwrap();
        let order: Vec<(String, usize)> = r.hits.iter().map(|h| (h.doc_id.clone(), h.ordinal)).collect();
        assert_eq!(order, vec![("a".to_string(), 0), ("a".to_string(), 1)]);
    }

    #[test]
    fn store_errors_and_round_trip() {
        let e = HashedNgramEmbedder::default();
        let empty = ChunkStore::new(vec![]).unwrap();
        assert!(matches!(retrieve(&empty, "x", &e, 5, ExecMode::Sequential), Err(RetrievalError::EmptyStore)));
        assert!(ChunkStore::new(vec![chunk("a", 0, vec![1.0]), chunk("b", 0, vec![1.0, 0.0])]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::build(&docs(&[("a", "text")]), 800, 100, &e, ExecMode::Sequential).unwrap();
        let path = dir.path().join("store.json");
        store.save(&path).unwrap();
        assert_eq!(ChunkStore::load(&path).unwrap(), store);
    }

    #[test]
    fn entropy_reference_points() {
        assert!((normalized_entropy(&[0.7; 5]) - 1.0).abs() < 1e-12);
        assert_eq!(normalized_entropy(&[1.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(normalized_entropy(&[1.0, -0.3, -0.2]), 0.0);
        assert_eq!(normalized_entropy(&[-1.0, 0.0]), 1.0);
        assert_eq!(normalized_entropy(&[0.4]), 0.0);
        // two outcomes with p = (3/4, 1/4): H/ln 2 computed by hand
        let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()) / 2f64.ln();
        assert!((normalized_entropy(&[0.3, 0.1]) - expected).abs() < 1e-12);
    }

    #[test]
    fn summaries() {
        let r = RetrievalResult {
            hits: vec![
                Hit { doc_id: "a".into(), ordinal: 0, text: "first".into(), score: 0.9 },
                Hit { doc_id: "b".into(), ordinal: 0, text: "second".into(), score: 0.5 },
            ],
            normalized_entropy: 0.9,
        };
        let mock = ScriptedMock::default();
        assert_eq!(summarize(&r, "x", &mock, "m", 100).unwrap(), "first\n\nsecond");
        assert_eq!(summarize(&r, "x", &mock, "m", 7).unwrap(), "first\n\n");
        let empty = RetrievalResult { hits: vec![], normalized_entropy: 1.0 };
        assert_eq!(summarize(&empty, "x", &mock, "m", 7).unwrap(), "");

        struct Echo(ScriptedMock);
        impl ChatBackend for Echo {
            fn generate(&self, r: &GenerationRequest) -> Result<String, BackendError> {
                self.0.generate(r)
            }
            fn kind(&self) -> BackendKind {
                BackendKind::HttpChatEndpoint
            }
        }
        let mut m = ScriptedMock::default();
        m.push(vec![Matcher::Contains("second".into())], "a long model summary");
        assert_eq!(summarize(&r, "x", &Echo(m), "m", 6).unwrap(), "a long");
    }

    fn vectors(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, dim), 1..30)
    }

    proptest! {
        #[test]
        fn ranking_properties(vs in vectors(4), q in proptest::collection::vec(-1.0f64..1.0, 4), scale in 0.001f64..1000.0, k in 1usize..8) {
            let store = ChunkStore::new(vs.into_iter().enumerate().map(|(i, v)| chunk("d", i, v)).collect()).unwrap();
            let r = retrieve_with_vector(&store, &q, k, ExecMode::Sequential).unwrap();
            prop_assert!(r.hits.len() <= k);
            prop_assert!(r.hits.windows(2).all(|w| w[0].score >= w[1].score));
            prop_assert!((0.0..=1.0).contains(&r.normalized_entropy));
            let scaled: Vec<f64> = q.iter().map(|x| x * scale).collect();
            let s = retrieve_with_vector(&store, &scaled, k, ExecMode::Parallel).unwrap();
            let ids = |r: &RetrievalResult| r.hits.iter().map(|h| h.ordinal).collect::<Vec<_>>();
            prop_assert_eq!(ids(&r), ids(&s));
        }

        #[test]
        fn uniform_scores_have_unit_entropy(x in 0.01f64..1.0, n in 2usize..6) {
            prop_assert!((normalized_entropy(&vec![x; n]) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn entropy_is_one_only_when_uniform(scores in proptest::collection::vec(0.01f64..1.0, 2..6)) {
            let h = normalized_entropy(&scores);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&h));
            let spread = scores.iter().fold(0.0f64, |m, s| m.max((s - scores[0]).abs()));
            if spread == 0.0 {
                prop_assert!((h - 1.0).abs() < 1e-9);
            } else if spread > 1e-3 {
                prop_assert!(h < 1.0);
            }
        }

        #[test]
        fn chunks_reassemble(text in "[a-z .\n]{0,300}", size in 10usize..80, overlap_frac in 0.0f64..0.9) {
            let overlap = (size as f64 * overlap_frac) as usize;
            let ranges = chunk_ranges(&text, size, overlap).unwrap();
            let mut rebuilt = String::new();
            for (i, &(s, e)) in ranges.iter().enumerate() {
                prop_assert!(e - s <= size);
                let skip = if i == 0 { 0 } else { overlap };
                rebuilt.push_str(&slice_chars(&text, s + skip, e));
                if i > 0 {
                    prop_assert_eq!(s, ranges[i - 1].1 - overlap);
                }
            }
            prop_assert_eq!(rebuilt, text);
        }
    }
}
