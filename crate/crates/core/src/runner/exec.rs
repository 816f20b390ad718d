use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use super::harness::Program;

/// Wall-clock limits for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(with = "secs")]
    pub compile: Duration,
    #[serde(with = "secs")]
    pub run: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            compile: Duration::from_secs(30),
            run: Duration::from_secs(10),
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// What an executor observed, before any comparison against expectations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawExecution {
    pub compile_ok: bool,
    pub compiler_diagnostics: String,
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    /// The run phase hit its limit; tests without output count as failures.
    pub timed_out: bool,
    pub compile_ms: u64,
    pub run_ms: u64,
}

/// The executor itself is unusable. Distinct from a sample failing.
#[derive(Debug, Error)]
pub enum SetupError {
    #[error("executor configuration: {0}")]
    Config(String),
    #[error("no stub rule matches the candidate")]
    NoStubRule,
    #[error("sample has no io cases")]
    NoTests,
    #[error("could not start `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("compile step timed out after {0:?}")]
    CompileTimeout(Duration),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Executor: Send + Sync {
    fn compile_and_run(&self, program: &Program, limits: &Limits) -> Result<RawExecution, SetupError>;
}

/// Scripted result for one test in a stub rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestScript {
    /// Print the expected output of the case.
    Expected,
    /// Print the expected output with every number increased by one, the
    /// visible effect of an index-origin slip. Non-numeric outputs become `[0]`.
    Shifted,
    Output(Json),
    Error {
        #[serde(rename = "type")]
        kind: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubOutcome {
    CompileError(String),
    /// One script per test, in order; missing entries print nothing.
    Tests(Vec<TestScript>),
    /// The same script for every test.
    All(TestScript),
    /// Prints results for the first `n` tests as expected, then hangs.
    TimeoutAfter(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubRule {
    /// Substrings that must all occur in the candidate.
    #[serde(default)]
    pub contains: Vec<String>,
    #[serde(flatten)]
    pub outcome: StubOutcome,
}

/// Plays back fixture tables instead of compiling. Obviously broken
/// candidates (empty, unbalanced braces, `#error`) fail to compile before
/// any rule is consulted; otherwise the first rule whose substrings all
/// occur in the candidate decides the printed output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubExecutor {
    pub rules: Vec<StubRule>,
}

fn shifted(v: &Json) -> Json {
    fn go(v: &Json, any: &mut bool) -> Json {
        match v {
            Json::Number(n) => {
                *any = true;
                match n.as_i64() {
                    Some(i) => Json::from(i.saturating_add(1)),
                    None => Json::from(n.as_f64().unwrap_or(0.0) + 1.0),
                }
            }
            Json::Bool(b) => {
                *any = true;
                Json::from(i64::from(*b) + 1)
            }
            Json::Array(items) => Json::Array(items.iter().map(|x| go(x, any)).collect()),
            other => other.clone(),
        }
    }
    let mut any = false;
    let out = go(v, &mut any);
    if any {
        out
    } else {
        serde_json::json!([0])
    }
}

/// A crude stand-in for the compiler front end.
pub fn stub_compile_check(candidate: &str) -> Result<(), String> {
    if candidate.trim().is_empty() {
        return Err("error CS8803: empty compilation unit".into());
    }
    if let Some(line) = candidate.lines().find(|l| l.trim_start().starts_with("#error")) {
        return Err(format!("error CS1029: {}", line.trim()));
    }
    let mut depth: i64 = 0;
    for c in strip_literals(candidate).chars() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err("error CS1022: unexpected '}'".into());
        }
    }
    if depth != 0 {
        return Err("error CS1513: } expected".into());
    }
    Ok(())
}

/// Drops string/char literals and comments so braces inside them are ignored.
fn strip_literals(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut chars = src.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' | '\'' => {
                while let Some(d) = chars.next() {
                    if d == '\\' {
                        chars.next();
                    } else if d == c || d == '\n' {
                        break;
                    }
                }
            }
            '/' if chars.peek() == Some(&'/') => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = ' ';
                for d in chars.by_ref() {
                    if prev == '*' && d == '/' {
                        break;
                    }
                    prev = d;
                }
            }
            c => out.push(c),
        }
    }
    out
}

impl StubExecutor {
    pub fn new(rules: Vec<StubRule>) -> Self {
        Self { rules }
    }

    /// A table where every compilable candidate passes all tests.
    pub fn always_pass() -> Self {
        Self::new(vec![StubRule {
            contains: Vec::new(),
            outcome: StubOutcome::All(TestScript::Expected),
        }])
    }

    pub fn from_file(path: &Path) -> Result<Self, SetupError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| SetupError::Config(format!("{}: {e}", path.display())))
    }

    fn line(index: usize, script: &TestScript, expected: &Json) -> String {
        match script {
            TestScript::Expected => format!("TEST{index}:{expected}"),
            TestScript::Shifted => format!("TEST{index}:{}", shifted(expected)),
            TestScript::Output(v) => format!("TEST{index}:{v}"),
            TestScript::Error { kind, message } => format!("TEST{index}:ERROR:{kind}:{message}"),
        }
    }
}

impl Executor for StubExecutor {
    fn compile_and_run(&self, program: &Program, limits: &Limits) -> Result<RawExecution, SetupError> {
        if let Err(diagnostics) = stub_compile_check(&program.candidate) {
            return Ok(RawExecution {
                compiler_diagnostics: diagnostics,
                exit_code: Some(1),
                ..RawExecution::default()
            });
        }
        let rule = self
            .rules
            .iter()
            .find(|r| r.contains.iter().all(|s| program.candidate.contains(s.as_str())))
            .ok_or(SetupError::NoStubRule)?;
        let mut raw = RawExecution {
            compile_ok: true,
            exit_code: Some(0),
            ..RawExecution::default()
        };
        let mut lines = Vec::new();
        match &rule.outcome {
            StubOutcome::CompileError(d) => {
                raw.compile_ok = false;
                raw.compiler_diagnostics = d.clone();
                raw.exit_code = Some(1);
            }
            StubOutcome::Tests(scripts) => {
                for (i, (s, e)) in scripts.iter().zip(&program.expected).enumerate() {
                    lines.push(Self::line(i + 1, s, e));
                }
            }
            StubOutcome::All(s) => {
                for (i, e) in program.expected.iter().enumerate() {
                    lines.push(Self::line(i + 1, s, e));
                }
            }
            StubOutcome::TimeoutAfter(n) => {
                for (i, e) in program.expected.iter().take(*n).enumerate() {
                    lines.push(Self::line(i + 1, &TestScript::Expected, e));
                }
                raw.timed_out = true;
                raw.exit_code = None;
                raw.run_ms = limits.run.as_millis() as u64;
            }
        }
        for l in lines {
            raw.stdout.push_str(&l);
            raw.stdout.push('\n');
        }
        Ok(raw)
    }
}

/// Runs an external C# toolchain through `sh -c` command templates.
///
/// Placeholders: `{src_dir}` (fresh temp directory), `{src}` (the program
/// file inside it) and `{out}` (an output path inside it). The compile
/// step must exit non-zero with diagnostics on failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandExecutor {
    pub compile: String,
    pub run: String,
    #[serde(default = "default_source_name")]
    pub source_name: String,
    /// Extra file written next to the source, such as a project file.
    #[serde(default)]
    pub project_file: Option<ProjectFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectFile {
    pub name: String,
    pub contents: String,
}

fn default_source_name() -> String {
    "Program.cs".into()
}

struct Captured {
    status: Option<i32>,
    stdout: String,
    stderr: String,
    timed_out: bool,
    elapsed: Duration,
}

/// Exit status of `sh` when the command itself was not found.
const SH_NOT_FOUND: i32 = 127;

impl CommandExecutor {
    pub fn new(compile: impl Into<String>, run: impl Into<String>) -> Self {
        Self {
            compile: compile.into(),
            run: run.into(),
            source_name: default_source_name(),
            project_file: None,
        }
    }

    pub fn validate(&self) -> Result<(), SetupError> {
        if self.compile.trim().is_empty() || self.run.trim().is_empty() {
            return Err(SetupError::Config("compile and run templates must be non-empty".into()));
        }
        if self.source_name.contains('/') || self.source_name.is_empty() {
            return Err(SetupError::Config(format!("bad source name `{}`", self.source_name)));
        }
        Ok(())
    }

    fn expand(template: &str, dir: &Path, src: &Path, out: &Path) -> String {
        template
            .replace("{src_dir}", &quote(dir))
            .replace("{src}", &quote(src))
            .replace("{out}", &quote(out))
    }

    fn spawn(command: &str, dir: &Path) -> Result<Child, SetupError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(command)
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        cmd.spawn().map_err(|source| SetupError::Spawn {
            command: command.to_string(),
            source,
        })
    }

    fn run_limited(command: &str, dir: &Path, limit: Duration) -> Result<Captured, SetupError> {
        let start = Instant::now();
        let mut child = Self::spawn(command, dir)?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());
        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status.code();
            }
            if start.elapsed() >= limit {
                timed_out = true;
                kill_tree(&mut child);
                let _ = child.wait();
                break None;
            }
            thread::sleep(Duration::from_millis(5));
        };
        Ok(Captured {
            status,
            stdout: stdout.join().unwrap_or_default(),
            stderr: stderr.join().unwrap_or_default(),
            timed_out,
            elapsed: start.elapsed(),
        })
    }
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Kills the whole process group so grandchildren do not keep pipes open.
fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        let group = format!("-{}", child.id());
        let _ = Command::new("kill")
            .args(["-KILL", "--", &group])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status();
    }
    let _ = child.kill();
}

impl Executor for CommandExecutor {
    fn compile_and_run(&self, program: &Program, limits: &Limits) -> Result<RawExecution, SetupError> {
        self.validate()?;
        let dir = tempfile::tempdir()?;
        let src: PathBuf = dir.path().join(&self.source_name);
        let out = dir.path().join("out");
        fs::write(&src, &program.source)?;
        if let Some(p) = &self.project_file {
            fs::write(dir.path().join(&p.name), &p.contents)?;
        }

        let compile = Self::expand(&self.compile, dir.path(), &src, &out);
        let c = Self::run_limited(&compile, dir.path(), limits.compile)?;
        if c.timed_out {
            return Err(SetupError::CompileTimeout(limits.compile));
        }
        if c.status == Some(SH_NOT_FOUND) {
            return Err(SetupError::Config(format!("compile command not found: {}", c.stderr.trim())));
        }
        let mut raw = RawExecution {
            compile_ok: c.status == Some(0),
            compile_ms: c.elapsed.as_millis() as u64,
            ..RawExecution::default()
        };
        if !raw.compile_ok {
            raw.compiler_diagnostics = format!("{}{}", c.stdout, c.stderr).trim().to_string();
            raw.exit_code = c.status;
            return Ok(raw);
        }

        let run = Self::expand(&self.run, dir.path(), &src, &out);
        let r = Self::run_limited(&run, dir.path(), limits.run)?;
        if r.status == Some(SH_NOT_FOUND) && r.stdout.is_empty() {
            return Err(SetupError::Config(format!("run command not found: {}", r.stderr.trim())));
        }
        raw.exit_code = r.status;
        raw.stdout = r.stdout;
        raw.stderr = r.stderr;
        raw.timed_out = r.timed_out;
        raw.run_ms = r.elapsed.as_millis() as u64;
        Ok(raw)
    }
}
