//! External tokenizer interface and glyph-coverage metrics.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GlyphInventory;
use crate::par::{self, ExecMode};

#[derive(Debug, Error, PartialEq)]
pub enum TokenizerError {
    #[error("cannot encode {0:?}: no vocabulary entry and no <unk> token")]
    Unencodable(char),
    #[error("unknown token id {0}")]
    UnknownId(u32),
    #[error("vocabulary line {line}: {message}")]
    Vocabulary { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("tokenizer backend failed: {0}")]
    Backend(String),
}

/// Minimal encode/decode surface of a subword tokenizer.
pub trait Tokenizer: Sync {
    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError>;
    fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError>;
}

/// One token per codepoint; ids are the codepoints themselves.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTokenizer;

impl Tokenizer for IdentityTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
        Ok(text.chars().map(u32::from).collect())
    }

    fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        ids.iter()
            .map(|&id| char::from_u32(id).ok_or(TokenizerError::UnknownId(id)))
            .collect()
    }
}

/// Greedy longest-match tokenizer over a fixed vocabulary.
///
/// Vocabulary files hold one `token<TAB>id` entry per line; `\t`, `\n`,
/// `\r` and `\\` escapes are recognised in the token field. Codepoints with
/// no matching entry encode to the `<unk>` entry when the vocabulary has
/// one and fail otherwise.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    by_text: HashMap<String, u32>,
    by_id: HashMap<u32, String>,
    max_len: usize,
    unk: Option<u32>,
}

pub const UNK_TOKEN: &str = "<unk>";

impl VocabTokenizer {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut by_text = HashMap::new();
        let mut by_id = HashMap::new();
        let mut max_len = 0;
        for (text, id) in entries {
            let text = text.into();
            max_len = max_len.max(text.chars().count());
            by_id.insert(id, text.clone());
            by_text.insert(text, id);
        }
        let unk = by_text.get(UNK_TOKEN).copied();
        Self {
            by_text,
            by_id,
            max_len,
            unk,
        }
    }

    pub fn parse(source: &str) -> Result<Self, TokenizerError> {
        let mut entries = Vec::new();
        for (i, line) in source.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| TokenizerError::Vocabulary {
                line: i + 1,
                message: message.to_string(),
            };
            let (token, id) = line.rsplit_once('\t').ok_or_else(|| err("expected token<TAB>id"))?;
            let id: u32 = id.trim().parse().map_err(|_| err("id is not an unsigned integer"))?;
            let token = unescape(token);
            if token.is_empty() {
                return Err(err("empty token"));
            }
            entries.push((token, id));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, TokenizerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TokenizerError::Backend(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

impl Tokenizer for VocabTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
        let chars: Vec<char> = text.chars().collect();
        let mut ids = Vec::new();
        let mut pos = 0;
        let mut buf = String::new();
        'outer: while pos < chars.len() {
            let longest = self.max_len.min(chars.len() - pos);
            for len in (1..=longest).rev() {
                buf.clear();
                buf.extend(&chars[pos..pos + len]);
                if let Some(&id) = self.by_text.get(&buf) {
                    ids.push(id);
                    pos += len;
                    continue 'outer;
                }
            }
            match self.unk {
                Some(id) => {
                    ids.push(id);
                    pos += 1;
                }
                None => return Err(TokenizerError::Unencodable(chars[pos])),
            }
        }
        Ok(ids)
    }

    fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        ids.iter()
            .map(|id| {
                self.by_id
                    .get(id)
                    .map(String::as_str)
                    .ok_or(TokenizerError::UnknownId(*id))
            })
            .collect()
    }
}

/// True iff `decode(encode(text))` reproduces `text` exactly. Tokenizer
/// failures are returned as errors, not as failed round trips.
pub fn round_trip_check(tokenizer: &dyn Tokenizer, text: &str) -> Result<bool, TokenizerError> {
    let ids = tokenizer.encode(text)?;
    Ok(tokenizer.decode(&ids)? == text)
}

/// Corpus-level glyph tokenization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerReport {
    /// Fraction of distinct inventory glyphs present in the corpus that
    /// encode to exactly one token.
    pub single_token_rate: f64,
    /// Mean token count over all glyph occurrences.
    pub avg_tokens_per_glyph: f64,
    /// Mean encoded length of a sample (content tokens only).
    pub avg_tokens_per_sample: f64,
    pub round_trip_failures: usize,
    /// Single-token rate weighted by glyph occurrence.
    #[serde(default)]
    pub occurrence_single_token_rate: f64,
    #[serde(default)]
    pub distinct_glyphs: usize,
    #[serde(default)]
    pub glyph_occurrences: usize,
    #[serde(default)]
    pub samples: usize,
}

struct SampleStats {
    tokens: usize,
    round_trip_ok: bool,
    glyphs: BTreeMap<char, usize>,
}

pub fn tokenizer_metrics<S: AsRef<str> + Sync>(
    corpus: &[S],
    tokenizer: &dyn Tokenizer,
) -> Result<TokenizerReport, TokenizerError> {
    tokenizer_metrics_with(corpus, tokenizer, &GlyphInventory::standard(), ExecMode::default())
}

pub fn tokenizer_metrics_with<S: AsRef<str> + Sync>(
    corpus: &[S],
    tokenizer: &dyn Tokenizer,
    inventory: &GlyphInventory,
    mode: ExecMode,
) -> Result<TokenizerReport, TokenizerError> {
    if corpus.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let per_sample = par::try_map(mode, corpus, |sample| {
        let text = sample.as_ref();
        let ids = tokenizer.encode(text)?;
        let round_trip_ok = tokenizer.decode(&ids)? == text;
        let mut glyphs = BTreeMap::new();
        for c in text.chars().filter(|c| inventory.contains(*c)) {
            *glyphs.entry(c).or_insert(0) += 1;
        }
        Ok(SampleStats {
            tokens: ids.len(),
            round_trip_ok,
            glyphs,
        })
    })?;

    let mut occurrences: BTreeMap<char, usize> = BTreeMap::new();
    for s in &per_sample {
        for (c, n) in &s.glyphs {
            *occurrences.entry(*c).or_insert(0) += n;
        }
    }
    let mut single = 0usize;
    let mut single_occ = 0usize;
    let mut total_occ = 0usize;
    let mut total_glyph_tokens = 0usize;
    let mut buf = [0u8; 4];
    for (c, n) in &occurrences {
        let len = tokenizer.encode(c.encode_utf8(&mut buf))?.len();
        if len == 1 {
            single += 1;
            single_occ += n;
        }
        total_occ += n;
        total_glyph_tokens += len * n;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let total_tokens: usize = per_sample.iter().map(|s| s.tokens).sum();
    Ok(TokenizerReport {
        single_token_rate: ratio(single, occurrences.len()),
        avg_tokens_per_glyph: ratio(total_glyph_tokens, total_occ),
        avg_tokens_per_sample: ratio(total_tokens, corpus.len()),
        round_trip_failures: per_sample.iter().filter(|s| !s.round_trip_ok).count(),
        occurrence_single_token_rate: ratio(single_occ, total_occ),
        distinct_glyphs: occurrences.len(),
        glyph_occurrences: total_occ,
        samples: corpus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Encodes every inventory glyph as two tokens (raw UTF-8 halves), ASCII as one.
    struct SplittingTokenizer;

    impl Tokenizer for SplittingTokenizer {
        fn encode(&self, text: &str) -> Result<Vec<u32>, TokenizerError> {
            let mut ids = Vec::new();
            for c in text.chars() {
                let cp = u32::from(c);
                ids.push(cp << 1);
                ids.push((cp << 1) | 1);
            }
            Ok(ids)
        }
        fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
            ids.iter()
                .filter(|id| *id & 1 == 0)
                .map(|id| char::from_u32(id >> 1).ok_or(TokenizerError::UnknownId(*id)))
                .collect()
        }
    }

    fn dropping_division() -> VocabTokenizer {
        let mut entries: Vec<(String, u32)> = "ab+×"
            .chars()
            .enumerate()
            .map(|(i, c)| (c.to_string(), i as u32))
            .collect();
        entries.push((UNK_TOKEN.to_string(), 99));
        VocabTokenizer::from_entries(entries)
    }

    #[test]
    fn identity_round_trips() {
        for text in ["", "a÷b", "⍉ 2 3 ⍴ ⍳6", "⍝ ⍺ : INT[]"] {
            assert!(round_trip_check(&IdentityTokenizer, text).unwrap());
        }
    }

    #[test]
    fn unknown_division_fails_round_trip() {
        assert!(!round_trip_check(&dropping_division(), "a÷b").unwrap());
        assert!(round_trip_check(&dropping_division(), "a+b").unwrap());
    }

    #[test]
    fn full_inventory_round_trips_per_glyph() {
        let inv = GlyphInventory::standard();
        let vocab = VocabTokenizer::from_entries(inv.iter().map(|(c, _)| (c.to_string(), u32::from(c))));
        for (c, _) in inv.iter() {
            assert!(round_trip_check(&vocab, &c.to_string()).unwrap(), "{c}");
        }
        assert!(round_trip_check(&vocab, &inv.all_glyphs()).unwrap());
    }

    #[test]
    fn backend_failure_is_an_error_not_a_failure() {
        let vocab = VocabTokenizer::from_entries([("a".to_string(), 1)]);
        assert_eq!(round_trip_check(&vocab, "ab"), Err(TokenizerError::Unencodable('b')));
    }

    #[test]
    fn greedy_longest_match() {
        let vocab = VocabTokenizer::parse("a\t1\nab\t2\nabc\t3\nc\t4\n\\t\t5\n").unwrap();
        assert_eq!(vocab.encode("abcab\tc").unwrap(), vec![3, 2, 5, 4]);
        assert_eq!(vocab.decode(&[3, 5]).unwrap(), "abc\t");
        assert!(matches!(
            VocabTokenizer::parse("x 1"),
            Err(TokenizerError::Vocabulary { line: 1, .. })
        ));
    }

    #[test]
    fn identity_metrics_on_glyph_corpus() {
        let corpus = ["⍳⍴", "⍉⍉", "×÷"];
        let r = tokenizer_metrics(&corpus, &IdentityTokenizer).unwrap();
        assert_eq!(r.single_token_rate, 1.0);
        assert_eq!(r.avg_tokens_per_glyph, 1.0);
        assert_eq!(r.avg_tokens_per_sample, 2.0);
        assert_eq!(r.round_trip_failures, 0);
        assert_eq!(r.distinct_glyphs, 5);
    }

    #[test]
    fn splitting_tokenizer_metrics() {
        // Four glyph occurrences, each encoded as two tokens.
        let corpus = ["⍳⍴", "⍉⍳"];
        let r = tokenizer_metrics(&corpus, &SplittingTokenizer).unwrap();
        assert_eq!(r.single_token_rate, 0.0);
        assert_eq!(r.avg_tokens_per_glyph, 2.0);
        assert_eq!(r.glyph_occurrences, 4);
        assert_eq!(r.avg_tokens_per_sample, 4.0);
    }

    #[test]
    fn unk_glyph_counts_as_single_token_but_fails_round_trip() {
        // ÷ maps to the single <unk> token, so it is "single-token" while
        // the sample containing it fails to round trip.
        let corpus = ["a÷b÷c", "+"];
        let r = tokenizer_metrics(&corpus, &dropping_division()).unwrap();
        assert_eq!(r.round_trip_failures, 1);
        assert_eq!(r.distinct_glyphs, 2);
        assert_eq!(r.single_token_rate, 1.0);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus: [&str; 0] = [];
        assert_eq!(
            tokenizer_metrics(&corpus, &IdentityTokenizer),
            Err(TokenizerError::EmptyCorpus)
        );
    }

    #[test]
    fn metrics_are_order_invariant() {
        let a = ["⍳⍴ 3", "+/⍵", "⌈⌊÷"];
        let b = ["⌈⌊÷", "⍳⍴ 3", "+/⍵"];
        let ra = tokenizer_metrics(&a, &SplittingTokenizer).unwrap();
        let rb = tokenizer_metrics(&b, &SplittingTokenizer).unwrap();
        assert_eq!(ra.single_token_rate, rb.single_token_rate);
        assert_eq!(ra.avg_tokens_per_glyph, rb.avg_tokens_per_glyph);
    }

    #[test]
    fn report_schema_parses_published_row() {
        let row = r#"{"single_token_rate":0.715,"avg_tokens_per_glyph":1.284,
                      "avg_tokens_per_sample":262.274,"round_trip_failures":0}"#;
        let r: TokenizerReport = serde_json::from_str(row).unwrap();
        assert_eq!(r.single_token_rate, 0.715);
        assert_eq!(r.avg_tokens_per_glyph, 1.284);
        assert_eq!(r.avg_tokens_per_sample, 262.274);
        assert_eq!(r.round_trip_failures, 0);
    }
}
