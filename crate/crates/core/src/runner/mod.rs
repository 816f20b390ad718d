//! Compile-and-execute verification: harness generation, executors, output
//! comparison, failure classification and pass-rate metrics.

mod compare;
mod exec;
mod harness;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

pub use compare::{compare_output, Diff, Tolerance};
pub use exec::{
    stub_compile_check, CommandExecutor, Executor, Limits, ProjectFile, RawExecution, SetupError, StubExecutor,
    StubOutcome, StubRule, TestScript,
};
pub use harness::{
    generate_harness, parse_test_lines, test_invocations, Program, TestLine, CANDIDATE_PLACEHOLDER, HARNESS_TEMPLATE,
    INVOCATIONS_PLACEHOLDER,
};

use crate::dataset::IoCase;
use crate::header::FunctionHeader;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStatus {
    NotCompiled,
    RuntimeFailure,
    OutputMismatch,
    Pass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// 1-based, matching the `TEST<i>:` prefix.
    pub index: usize,
    pub status: TestStatus,
    pub expected: Json,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub compile_ok: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub compiler_diagnostics: String,
    pub tests: Vec<TestReport>,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub timed_out: bool,
    #[serde(default)]
    pub compile_ms: u64,
    #[serde(default)]
    pub run_ms: u64,
}

/// Ordered so that `max` picks the better result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CompileError,
    CompiledOnly,
    PartialPass,
    FullPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    Compilation,
    Runtime,
    Functional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Pass,
    #[serde(untagged)]
    Failed(ErrorCategory),
}

impl ExecutionReport {
    /// Turns raw executor output into per-test outcomes.
    pub fn from_raw(raw: RawExecution, expected: &[Json], tol: Tolerance) -> Self {
        let tests = if raw.compile_ok {
            let lines = parse_test_lines(&raw.stdout);
            expected
                .iter()
                .enumerate()
                .map(|(i, exp)| judge(i + 1, lines.get(&(i + 1)), exp, &raw, tol))
                .collect()
        } else {
            expected
                .iter()
                .enumerate()
                .map(|(i, exp)| TestReport {
                    index: i + 1,
                    status: TestStatus::NotCompiled,
                    expected: exp.clone(),
                    actual: None,
                    diff: None,
                    error: None,
                })
                .collect()
        };
        Self {
            compile_ok: raw.compile_ok,
            compiler_diagnostics: raw.compiler_diagnostics,
            tests,
            stdout: raw.stdout,
            stderr: raw.stderr,
            exit_code: raw.exit_code,
            timed_out: raw.timed_out,
            compile_ms: raw.compile_ms,
            run_ms: raw.run_ms,
        }
    }

    pub fn passed(&self) -> usize {
        self.tests.iter().filter(|t| t.status == TestStatus::Pass).count()
    }

    pub fn verdict(&self) -> Verdict {
        let passed = self.passed();
        if !self.compile_ok {
            Verdict::CompileError
        } else if passed > 0 && passed == self.tests.len() {
            Verdict::FullPass
        } else if passed > 0 {
            Verdict::PartialPass
        } else {
            Verdict::CompiledOnly
        }
    }

    pub fn classification(&self) -> Classification {
        classify(self)
    }
}

fn judge(index: usize, line: Option<&TestLine>, expected: &Json, raw: &RawExecution, tol: Tolerance) -> TestReport {
    let mut report = TestReport {
        index,
        status: TestStatus::RuntimeFailure,
        expected: expected.clone(),
        actual: None,
        diff: None,
        error: None,
    };
    match line {
        None => {
            report.error = Some(if raw.timed_out {
                "timed out before producing output".into()
            } else {
                match raw.exit_code {
                    Some(code) => format!("no output (exit code {code})"),
                    None => "no output (process killed)".into(),
                }
            });
        }
        Some(TestLine::Error { kind, message }) => {
            report.error = Some(format!("{kind}: {message}"));
        }
        Some(TestLine::Output(text)) => match serde_json::from_str::<Json>(text) {
            Err(e) => report.error = Some(format!("unparseable output `{text}`: {e}")),
            Ok(actual) => {
                match compare_output(&actual, expected, tol) {
                    Ok(()) => report.status = TestStatus::Pass,
                    Err(d) => {
                        report.status = TestStatus::OutputMismatch;
                        report.diff = Some(d.to_string());
                    }
                }
                report.actual = Some(actual);
            }
        },
    }
    report
}

/// Builds the harness, runs it and judges every test.
pub fn evaluate(
    candidate: &str,
    io: &[IoCase],
    header: Option<&FunctionHeader>,
    executor: &dyn Executor,
    limits: &Limits,
    tol: Tolerance,
) -> Result<ExecutionReport, SetupError> {
    if io.is_empty() {
        return Err(SetupError::NoTests);
    }
    let program = generate_harness(candidate, io, header);
    let raw = executor.compile_and_run(&program, limits)?;
    Ok(ExecutionReport::from_raw(raw, &program.expected, tol))
}

/// Failure taxonomy: a compile failure is Compilation; otherwise any test
/// that crashed, timed out or printed nothing makes it Runtime, unless every
/// test passed; remaining failures are Functional.
pub fn classify(report: &ExecutionReport) -> Classification {
    if !report.compile_ok {
        return Classification::Failed(ErrorCategory::Compilation);
    }
    if !report.tests.is_empty() && report.tests.iter().all(|t| t.status == TestStatus::Pass) {
        return Classification::Pass;
    }
    if report.tests.is_empty() || report.tests.iter().any(|t| t.status == TestStatus::RuntimeFailure) {
        return Classification::Failed(ErrorCategory::Runtime);
    }
    Classification::Failed(ErrorCategory::Functional)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: usize,
    pub denominator: usize,
    /// Rounded half-up to two decimals; `None` for an empty denominator.
    pub percentage: Option<f64>,
}

impl Rate {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        Self {
            numerator,
            denominator,
            percentage: percentage(numerator, denominator),
        }
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.percentage {
            Some(p) => write!(f, "{p:.2}% ({}/{})", self.numerator, self.denominator),
            None => write!(f, "n/a ({}/{})", self.numerator, self.denominator),
        }
    }
}

/// `100 * num / den` rounded half-up to hundredths, in integer arithmetic so
/// that values like 81.625 do not fall victim to binary rounding.
pub fn percentage(numerator: usize, denominator: usize) -> Option<f64> {
    if denominator == 0 {
        return None;
    }
    let (n, d) = (numerator as u128, denominator as u128);
    let hundredths = (n * 20_000 + d) / (2 * d);
    Some(hundredths as f64 / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRateSummary {
    pub compile_rate: Rate,
    pub partial_pass_rate: Rate,
    pub full_pass_rate: Rate,
}

/// Compile, partial (at least one test) and full pass rates. Full passes
/// count toward partial.
pub fn summarize(verdicts: &[Verdict]) -> PassRateSummary {
    let total = verdicts.len();
    let at_least = |v: Verdict| verdicts.iter().filter(|x| **x >= v).count();
    PassRateSummary {
        compile_rate: Rate::new(at_least(Verdict::CompiledOnly), total),
        partial_pass_rate: Rate::new(at_least(Verdict::PartialPass), total),
        full_pass_rate: Rate::new(at_least(Verdict::FullPass), total),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationShare {
    /// 1-based.
    pub iteration: usize,
    pub samples: usize,
    pub compilation: Rate,
    pub runtime: Rate,
    pub functional: Rate,
    pub pass: Rate,
}

/// Category shares per iteration. Each inner slice is one sample's
/// classifications in iteration order; a sample that stopped early keeps its
/// last outcome in later iterations, so every row covers every sample.
pub fn error_distribution(per_sample: &[Vec<Classification>]) -> Vec<IterationShare> {
    let samples: Vec<&Vec<Classification>> = per_sample.iter().filter(|s| !s.is_empty()).collect();
    let rounds = samples.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..rounds)
        .map(|it| {
            let mut counts = [0usize; 4];
            for s in &samples {
                let c = s[it.min(s.len() - 1)];
                let slot = match c {
                    Classification::Failed(ErrorCategory::Compilation) => 0,
                    Classification::Failed(ErrorCategory::Runtime) => 1,
                    Classification::Failed(ErrorCategory::Functional) => 2,
                    Classification::Pass => 3,
                };
                counts[slot] += 1;
            }
            let n = samples.len();
            IterationShare {
                iteration: it + 1,
                samples: n,
                compilation: Rate::new(counts[0], n),
                runtime: Rate::new(counts[1], n),
                functional: Rate::new(counts[2], n),
                pass: Rate::new(counts[3], n),
            }
        })
        .collect()
}

fn cell(rate: &Rate) -> String {
    rate.to_string()
}

/// Aligned text table with one row per label.
pub fn render_summary_table(rows: &[(String, PassRateSummary)]) -> String {
    let header = ["setup", "compile", "partial pass", "full pass"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|(label, s)| {
            [
                label.clone(),
                cell(&s.compile_rate),
                cell(&s.partial_pass_rate),
                cell(&s.full_pass_rate),
            ]
        })
        .collect();
    render_rows(&header, &body)
}

pub fn render_distribution_table(shares: &[IterationShare]) -> String {
    let header = ["iteration", "compilation", "runtime", "functional", "pass"];
    let pct = |r: &Rate| r.percentage.map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}%"));
    let body: Vec<[String; 5]> = shares
        .iter()
        .map(|s| {
            [
                s.iteration.to_string(),
                pct(&s.compilation),
                pct(&s.runtime),
                pct(&s.functional),
                pct(&s.pass),
            ]
        })
        .collect();
    render_rows(&header, &body)
}

fn render_rows<const N: usize>(header: &[&str; N], body: &[[String; N]]) -> String {
    let mut widths = header.map(|h| h.chars().count());
    for row in body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in body {
        line(row.iter().map(String::as_str).collect());
    }
    out
}
