use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::IoCase;
use crate::header::FunctionHeader;

/// The C# scaffold. `{CANDIDATE_CODE}` receives the candidate verbatim and
/// `{TEST_INVOCATIONS}` one `Run(...)` statement per test case.
pub const HARNESS_TEMPLATE: &str = include_str!("../../templates/harness.cs");

pub const CANDIDATE_PLACEHOLDER: &str = "{CANDIDATE_CODE}";
pub const INVOCATIONS_PLACEHOLDER: &str = "{TEST_INVOCATIONS}";

/// A harness ready for an executor, with the metadata the stub executor
/// needs to play back fixture tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub source: String,
    pub candidate: String,
    pub expected: Vec<serde_json::Value>,
}

impl Program {
    pub fn test_count(&self) -> usize {
        self.expected.len()
    }
}

fn csharp_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// One statement per case. Arguments are built inside a lambda so that a
/// failing constructor counts against that test only.
pub fn test_invocations(io: &[IoCase], header: Option<&FunctionHeader>) -> String {
    let mut out = String::new();
    for (i, case) in io.iter().enumerate() {
        let class = header.map_or_else(|| format!("{}Util", case.method_name), FunctionHeader::class_name);
        let args = case.csharp_arg.trim();
        let _ = writeln!(
            out,
            "        Run({}, {}, {}, () => new object[] {{ {} }});",
            i + 1,
            csharp_string(&class),
            csharp_string(&case.method_name),
            args
        );
    }
    out
}

/// Wraps the candidate in the scaffold. Emission is purely textual; any
/// problem with the candidate shows up when the program is compiled.
pub fn generate_harness(candidate: &str, io: &[IoCase], header: Option<&FunctionHeader>) -> Program {
    let source = HARNESS_TEMPLATE
        .replacen(INVOCATIONS_PLACEHOLDER, test_invocations(io, header).trim_end(), 1)
        .replacen(CANDIDATE_PLACEHOLDER, candidate, 1);
    Program {
        source,
        candidate: candidate.to_string(),
        expected: io.iter().map(|c| c.output.clone()).collect(),
    }
}

/// What the harness printed for one test.
#[derive(Debug, Clone, PartialEq)]
pub enum TestLine {
    Output(String),
    Error { kind: String, message: String },
}

/// Collects `TEST<i>:` lines from stdout, keyed by the 1-based test index.
/// Other lines (candidate logging) are ignored; the first line per index wins.
pub fn parse_test_lines(stdout: &str) -> BTreeMap<usize, TestLine> {
    let mut out = BTreeMap::new();
    for line in stdout.lines() {
        let line = line.trim_end_matches('\r');
        let Some(rest) = line.strip_prefix("TEST") else {
            continue;
        };
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        let (num, tail) = rest.split_at(digits);
        let (Ok(index), Some(payload)) = (num.parse::<usize>(), tail.strip_prefix(':')) else {
            continue;
        };
        let parsed = match payload.strip_prefix("ERROR:") {
            Some(err) => {
                let (kind, message) = err.split_once(':').unwrap_or((err, ""));
                TestLine::Error {
                    kind: kind.to_string(),
                    message: message.to_string(),
                }
            }
            None => TestLine::Output(payload.to_string()),
        };
        out.entry(index).or_insert(parsed);
    }
    out
}
