//! The parallel APL/C# corpus: JSON Lines datapoints with io test cases.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::backends::{render_chatml, ChatMessage};
use crate::header::{find_functions, Valence};
use crate::lexer;
use crate::strategies;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid split ratios {0:?}: each must be >= 0 and they must sum to 1")]
    Ratios([f64; 3]),
    #[error("subset size {n} is outside 0..={available}")]
    SubsetSize { n: usize, available: usize },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One test case: APL argument expressions, the matching C# argument list,
/// and the expected output in canonical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoCase {
    pub method_name: String,
    #[serde(rename = "AplLeftArg", default, skip_serializing_if = "Option::is_none")]
    pub apl_left_arg: Option<String>,
    #[serde(rename = "AplRightArg")]
    pub apl_right_arg: String,
    #[serde(rename = "CSharpArg", default)]
    pub csharp_arg: String,
    #[serde(rename = "Output")]
    pub output: Json,
    #[serde(flatten)]
    pub extra: Map<String, Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datapoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Originating dataset tag, such as `A` or `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub apl: String,
    pub csharp: String,
    #[serde(default)]
    pub io: Vec<IoCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nl_description: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Json>,
}

impl Datapoint {
    /// The explicit id, else the first io method name, else `sample-{index}`.
    pub fn id_or(&self, index: usize) -> String {
        self.id
            .clone()
            .or_else(|| self.io.first().map(|c| c.method_name.clone()))
            .unwrap_or_else(|| format!("sample-{index}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    /// 1-based line in the JSONL file.
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub points: Vec<Datapoint>,
    /// Source line of each entry in `points`.
    pub lines: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Loaded {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

/// Which split a point is validated for; test points need io cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Evaluation,
}

/// Schema checks beyond what deserialization enforces.
pub fn check(point: &Datapoint, role: Role) -> Vec<(Severity, String)> {
    let mut out = Vec::new();
    if point.apl.trim().is_empty() {
        out.push((Severity::Error, "\"apl\" is empty".into()));
    }
    if point.csharp.trim().is_empty() {
        out.push((Severity::Error, "\"csharp\" is empty".into()));
    }
    if role == Role::Evaluation && point.io.is_empty() {
        out.push((Severity::Error, "evaluation points need at least one io case".into()));
    }
    let functions = find_functions(&point.apl);
    for (i, case) in point.io.iter().enumerate() {
        if case.apl_right_arg.trim().is_empty() {
            out.push((Severity::Error, format!("io[{i}]: AplRightArg is empty")));
        }
        let Some(f) = functions.iter().find(|f| f.definition.name == case.method_name) else {
            continue;
        };
        let dyadic = f.definition.valence == Valence::Dyadic;
        if dyadic != case.apl_left_arg.is_some() {
            out.push((
                Severity::Warning,
                format!(
                    "io[{i}]: {} is {} but AplLeftArg is {}",
                    case.method_name,
                    f.definition.valence,
                    if case.apl_left_arg.is_some() { "present" } else { "absent" }
                ),
            ));
        }
    }
    out
}

/// Parses JSONL text. Bad lines become diagnostics and are skipped.
pub fn parse_jsonl(text: &str, role: Role) -> Loaded {
    let mut loaded = Loaded::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let point: Datapoint = match serde_json::from_str(raw) {
            Ok(p) => p,
            Err(e) => {
                loaded.diagnostics.push(Diagnostic {
                    line,
                    severity: Severity::Error,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let issues = check(&point, role);
        let fatal = issues.iter().any(|(s, _)| *s == Severity::Error);
        loaded
            .diagnostics
            .extend(issues.into_iter().map(|(severity, message)| Diagnostic { line, severity, message }));
        if !fatal {
            loaded.points.push(point);
            loaded.lines.push(line);
        }
    }
    loaded
}

pub fn load(path: &Path, role: Role) -> Result<Loaded, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    Ok(parse_jsonl(&text, role))
}

pub fn to_jsonl(points: &[Datapoint]) -> Result<String, DatasetError> {
    let mut out = String::new();
    for p in points {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `contents` to a temporary file beside `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(dir))?;
    tmp.write_all(contents).map_err(io_error(path))?;
    tmp.persist(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

pub fn save(points: &[Datapoint], path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, to_jsonl(points)?.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let r = [self.train, self.valid, self.test];
        let ok = r.iter().all(|x| x.is_finite() && *x >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(DatasetError::Ratios(r))
        }
    }

    /// Split sizes for `n` points: test and valid are rounded, train takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = ((self.test * n as f64).round() as usize).min(n);
        let valid = ((self.valid * n as f64).round() as usize).min(n - test);
        (n - test - valid, valid, test)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Split {
    pub train: Vec<Datapoint>,
    pub valid: Vec<Datapoint>,
    pub test: Vec<Datapoint>,
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded partition; each part keeps the input order.
pub fn split(points: &[Datapoint], spec: &SplitSpec) -> Result<Split, DatasetError> {
    spec.validate()?;
    let (_, valid, test) = spec.sizes(points.len());
    let perm = permutation(points.len(), spec.seed);
    let mut role = vec![0u8; points.len()];
    for &i in &perm[..test] {
        role[i] = 2;
    }
    for &i in &perm[test..test + valid] {
        role[i] = 1;
    }
    let mut out = Split::default();
    for (p, r) in points.iter().zip(role) {
        match r {
            0 => out.train.push(p.clone()),
            1 => out.valid.push(p.clone()),
            _ => out.test.push(p.clone()),
        }
    }
    Ok(out)
}

/// The first `n` points of a seeded permutation, so smaller subsets are
/// contained in larger ones under the same seed.
pub fn subset(train: &[Datapoint], n: usize, seed: u64) -> Result<Vec<Datapoint>, DatasetError> {
    if n > train.len() {
        return Err(DatasetError::SubsetSize {
            n,
            available: train.len(),
        });
    }
    Ok(permutation(train.len(), seed)[..n].iter().map(|&i| train[i].clone()).collect())
}

/// One supervised fine-tuning example: the translation prompt and the
/// reference C# as the assistant turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub id: String,
    pub messages: Vec<ChatMessage>,
    /// ChatML text up to and including the assistant prefix.
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SftOptions {
    pub signatures: bool,
    pub nl_description: bool,
}

pub fn export_sft(points: &[Datapoint], options: SftOptions) -> Vec<SftRecord> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let req = strategies::request_for(p, options.signatures, options.nl_description);
            let mut messages = strategies::build_prompt(&req);
            let prompt = render_chatml(&messages);
            let completion = format!("\n{}<|im_end|>", p.csharp.trim());
            if let Some(last) = messages.last_mut() {
                last.content = format!("{}\n{}", last.content, p.csharp.trim());
            }
            SftRecord {
                id: p.id_or(i),
                messages,
                prompt,
                completion,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValenceCounts {
    pub niladic: usize,
    pub monadic: usize,
    pub dyadic: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CorpusStats {
    pub count: usize,
    pub by_source: BTreeMap<String, usize>,
    pub with_nl_description: usize,
    pub valence: ValenceCounts,
    pub io_cases: usize,
    pub points_without_io: usize,
    /// APL code-token counts bucketed by power-of-two upper bound.
    pub token_length_histogram: BTreeMap<usize, usize>,
    pub mean_apl_tokens: f64,
}

/// Valence of the first definition in the source, else inferred from io.
pub fn valence_of(point: &Datapoint) -> Option<Valence> {
    if let Some(f) = find_functions(&point.apl).first() {
        return Some(f.definition.valence);
    }
    point.io.first().map(|c| {
        if c.apl_left_arg.is_some() {
            Valence::Dyadic
        } else {
            Valence::Monadic
        }
    })
}

pub fn stats(points: &[Datapoint]) -> CorpusStats {
    let mut s = CorpusStats {
        count: points.len(),
        ..Default::default()
    };
    let mut total_tokens = 0usize;
    for p in points {
        *s.by_source.entry(p.source.clone().unwrap_or_else(|| "-".into())).or_default() += 1;
        if p.nl_description.as_deref().is_some_and(|d| !d.trim().is_empty()) {
            s.with_nl_description += 1;
        }
        match valence_of(p) {
            Some(Valence::Niladic) => s.valence.niladic += 1,
            Some(Valence::Monadic) => s.valence.monadic += 1,
            Some(Valence::Dyadic) => s.valence.dyadic += 1,
            None => s.valence.unknown += 1,
        }
        s.io_cases += p.io.len();
        if p.io.is_empty() {
            s.points_without_io += 1;
        }
        let tokens = lexer::lex(&p.apl).code_tokens().count();
        total_tokens += tokens;
        *s.token_length_histogram.entry(tokens.max(1).next_power_of_two()).or_default() += 1;
    }
    if !points.is_empty() {
        s.mean_apl_tokens = total_tokens as f64 / points.len() as f64;
    }
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    pub(crate) const XISECTR_LINE: &str = r#"{"apl": " r←y xIsectr x ...", "csharp": "public class xIsectrUtil ...", "io": [{"method_name": "xIsectr", "AplLeftArg": "2 2 ⍴ 3 4 1 2", "AplRightArg": "2 2 ⍴ 1 2 3 4", "CSharpArg": "new object[,] { { 3, 4 }, { 1, 2 } }, new   object[,] { { 1, 2 }, { 3, 4 } }", "Output": [[1, 2], [3, 4]]}, {"method_name": "xIsectr", "AplLeftArg": "2 2 ⍴ 3 5 1 3", "AplRightArg": "2 2 ⍴ 1 2 3 4", "CSharpArg": "new object[,] { { 3, 5 }, { 1, 3 } }, new object[,] { { 1, 2 }, { 3, 4 } }", "Output": []}], "nl_description": "This function computes the intersection of two matrices, **y** and **x**. \nIt takes the following inputs ..."}"#;

    fn point(i: usize) -> Datapoint {
        Datapoint {
            id: Some(format!("p{i}")),
            source: None,
            apl: format!("r←f{i} x\nr←x"),
            csharp: "class C {}".into(),
            io: Vec::new(),
            nl_description: None,
            extra: Map::new(),
        }
    }

    fn corpus(n: usize) -> Vec<Datapoint> {
        (0..n).map(point).collect()
    }

    fn ids(points: &[Datapoint]) -> Vec<String> {
        points.iter().map(|p| p.id.clone().unwrap()).collect()
    }

    #[test]
    fn xisectr_datapoint() {
        let loaded = parse_jsonl(XISECTR_LINE, Role::Evaluation);
        assert!(loaded.diagnostics.is_empty(), "{:?}", loaded.diagnostics);
        let p = &loaded.points[0];
        assert_eq!(p.io.len(), 2);
        assert_eq!(p.io[0].output, serde_json::json!([[1, 2], [3, 4]]));
        assert_eq!(p.io[1].output, serde_json::json!([]));
        assert_eq!(p.io[0].apl_left_arg.as_deref(), Some("2 2 ⍴ 3 4 1 2"));
    }

    #[test]
    fn sft_export_uses_translation_prompt() {
        let point = parse_jsonl(XISECTR_LINE, Role::Evaluation).points.remove(0);
        let plain = export_sft(std::slice::from_ref(&point), SftOptions::default());
        assert_eq!(plain[0].id, "xIsectr");
        assert!(plain[0].prompt.starts_with("<|im_start|>system\nYou are an expert APL code programmer."));
        assert!(plain[0].prompt.ends_with("### C#:"));
        assert!(!plain[0].prompt.contains("### Description:"));
        assert_eq!(plain[0].completion, "\npublic class xIsectrUtil ...<|im_end|>");
        assert!(plain[0].messages[2].content.ends_with("### C#:\npublic class xIsectrUtil ..."));
        let with_nl = export_sft(&[point], SftOptions { signatures: true, nl_description: true });
        assert!(with_nl[0].prompt.contains("### Description:\nThis function computes"));
    }

    #[test]
    fn empty_file() {
        let loaded = parse_jsonl("", Role::Train);
        assert!(loaded.points.is_empty() && loaded.diagnostics.is_empty());
    }

    #[test]
    fn missing_field_is_reported_with_line() {
        let mut v: Json = serde_json::from_str(XISECTR_LINE).unwrap();
        v.as_object_mut().unwrap().remove("csharp");
        let text = format!("{XISECTR_LINE}\n{}\n{XISECTR_LINE}\n", v);
        let loaded = parse_jsonl(&text, Role::Evaluation);
        assert_eq!(loaded.points.len(), 2);
        assert_eq!(loaded.lines, vec![1, 3]);
        assert_eq!(loaded.diagnostics.len(), 1);
        assert_eq!(loaded.diagnostics[0].line, 2);
        assert!(loaded.diagnostics[0].message.contains("csharp"));
        assert!(loaded.has_errors());
    }

    #[test]
    fn test_points_need_io() {
        let text = serde_json::to_string(&point(0)).unwrap();
        assert!(parse_jsonl(&text, Role::Evaluation).has_errors());
        assert!(!parse_jsonl(&text, Role::Train).has_errors());
    }

    #[test]
    fn valence_mismatch_warns() {
        let mut p = point(1);
        p.io.push(IoCase {
            method_name: "f1".into(),
            apl_left_arg: Some("1".into()),
            apl_right_arg: "2".into(),
            csharp_arg: "1, 2".into(),
            output: Json::from(2),
            extra: Map::new(),
        });
        let issues = check(&p, Role::Evaluation);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].0, Severity::Warning);
    }

    #[test]
    fn unknown_fields_round_trip() {
        let mut v: Json = serde_json::from_str(XISECTR_LINE).unwrap();
        v["origin"] = serde_json::json!({"repo": "x"});
        v["io"][0]["note"] = serde_json::json!(1);
        let p: Datapoint = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(serde_json::to_value(&p).unwrap(), v);
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.jsonl");
        let points = parse_jsonl(XISECTR_LINE, Role::Train).points;
        save(&points, &path).unwrap();
        assert_eq!(load(&path, Role::Train).unwrap().points, points);
    }

    #[test]
    fn published_split_sizes() {
        let spec = SplitSpec {
            train: 0.49,
            valid: 0.17,
            test: 0.34,
            seed: 7,
        };
        let s = split(&corpus(143), &spec).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (70, 24, 49));
        let all = SplitSpec {
            train: 1.0,
            valid: 0.0,
            test: 0.0,
            seed: 1,
        };
        assert_eq!(split(&corpus(10), &all).unwrap().train.len(), 10);
        assert!(split(&corpus(3), &SplitSpec { train: 0.5, ..all }).is_err());
    }

    #[test]
    fn training_total_across_datasets() {
        // (name, size, train, valid, test)
        let datasets = [
            ("A", 800, 0.85, 0.05, 0.10),
            ("B", 143, 0.49, 0.17, 0.34),
            ("C", 320, 0.85, 0.05, 0.10),
            ("I", 45, 0.98, 0.0, 0.02),
        ];
        let mut train = Vec::new();
        for (name, n, tr, va, te) in datasets {
            let mut pts = corpus(n);
            for p in &mut pts {
                p.source = Some(name.into());
            }
            let spec = SplitSpec {
                train: tr,
                valid: va,
                test: te,
                seed: 42,
            };
            train.extend(split(&pts, &spec).unwrap().train);
        }
        let s = stats(&train);
        assert_eq!(s.count, 1066);
        let expected: BTreeMap<String, usize> =
            [("A", 680), ("B", 70), ("C", 272), ("I", 44)].map(|(k, v)| (k.to_string(), v)).into();
        assert_eq!(s.by_source, expected);
    }

    #[test]
    fn stats_small_fixture() {
        assert_eq!(stats(&[]), CorpusStats::default());
        let mut pts = parse_jsonl(XISECTR_LINE, Role::Train).points;
        let mut mono = point(0);
        mono.nl_description = Some("d".into());
        pts.push(mono);
        pts.push(Datapoint {
            apl: "+/".into(),
            ..point(2)
        });
        let s = stats(&pts);
        assert_eq!(s.count, 3);
        assert_eq!(s.with_nl_description, 2);
        assert_eq!(s.io_cases, 2);
        assert_eq!(s.points_without_io, 2);
        assert_eq!(
            s.valence,
            ValenceCounts {
                niladic: 0,
                monadic: 1,
                dyadic: 1,
                unknown: 1
            }
        );
        // " r←y xIsectr x ..." lexes to 8 code tokens; "r←f0 x\nr←x" to 8; "+/" to 2.
        assert_eq!(s.token_length_histogram, BTreeMap::from([(2, 1), (8, 2)]));
    }

    #[test]
    fn subset_edges() {
        let c = corpus(30);
        assert!(subset(&c, 0, 1).unwrap().is_empty());
        let full: HashSet<String> = ids(&subset(&c, 30, 1).unwrap()).into_iter().collect();
        assert_eq!(full, ids(&c).into_iter().collect());
        assert!(subset(&c, 31, 1).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions(n in 0usize..200, a in 0u32..=100, b in 0u32..=100, seed: u64) {
            let (a, b) = (a.min(b), a.max(b));
            let spec = SplitSpec { train: a as f64 / 100.0, valid: (b - a) as f64 / 100.0, test: (100 - b) as f64 / 100.0, seed };
            let c = corpus(n);
            let s = split(&c, &spec).unwrap();
            let mut all: Vec<String> = [ids(&s.train), ids(&s.valid), ids(&s.test)].concat();
            prop_assert_eq!(all.len(), n);
            all.sort();
            let mut expected = ids(&c);
            expected.sort();
            prop_assert_eq!(all, expected);
            prop_assert_eq!(split(&c, &spec).unwrap(), s);
        }

        #[test]
        fn subsets_nest(n in 0usize..60, m_frac in 0.0f64..=1.0, k_frac in 0.0f64..=1.0, seed: u64) {
            let c = corpus(n);
            let big = (n as f64 * m_frac.max(k_frac)) as usize;
            let small = (n as f64 * m_frac.min(k_frac)) as usize;
            let big_ids: HashSet<String> = ids(&subset(&c, big, seed).unwrap()).into_iter().collect();
            for id in ids(&subset(&c, small, seed).unwrap()) {
                prop_assert!(big_ids.contains(&id));
            }
        }
    }
}
