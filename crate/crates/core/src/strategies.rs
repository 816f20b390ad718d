//! Prompt construction and the translation strategies: direct, with a
//! natural-language description, with retrieved context, and the iterative
//! repair loop that feeds compiler and test feedback back to the model.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, ChatBackend, ChatMessage, GenerationRequest, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::backends::Embedder;
use crate::dataset::{Datapoint, IoCase};
use crate::header::{find_functions, render_csharp_signature, FunctionHeader};
use crate::par::ExecMode;
use crate::retrieval::{self, ChunkStore, RetrievalError, RetrievalResult};
use crate::runner::{self, ExecutionReport, Executor, Limits, SetupError, TestStatus, Tolerance, Verdict};

pub const SYSTEM_PROMPT: &str = "You are an expert APL code programmer.\nGiven the following APL code create C# program that implements the given code. Output only the C# program, with no example usage.";
pub const ASSISTANT_PREFIX: &str =
    "Output format: Only compilable C# program code, no explanations, no reasoning, no example usage.\n### C#:";
pub const DESCRIBE_SYSTEM: &str = "You are an expert APL code programmer.\nDescribe in plain English what the following APL code does: its inputs, its output and the steps it takes. Output only the description.";

pub const DEFAULT_MAX_ITERATIONS: usize = 5;
/// Character budget for the prior-attempt history in repair prompts.
pub const DEFAULT_FEEDBACK_BUDGET: usize = 24_000;
pub const DEFAULT_SUMMARY_BUDGET: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Direct,
    Nl,
    Rag,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Direct => "direct",
            Strategy::Nl => "nl",
            Strategy::Rag => "rag",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Strategy::Direct),
            "nl" => Ok(Strategy::Nl),
            "rag" => Ok(Strategy::Rag),
            other => Err(format!("unknown strategy `{other}` (expected direct, nl or rag)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub apl: String,
    #[serde(default)]
    pub signatures: Vec<String>,
    #[serde(default)]
    pub nl_description: Option<String>,
    #[serde(default)]
    pub rag_context: Option<String>,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub iterative: bool,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl TranslationRequest {
    pub fn new(apl: impl Into<String>) -> Self {
        Self {
            apl: apl.into(),
            signatures: Vec::new(),
            nl_description: None,
            rag_context: None,
            strategy: Strategy::Direct,
            iterative: false,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.apl.trim().is_empty() {
            return Err(StrategyError::Invalid("APL source is empty".into()));
        }
        if self.max_iterations == 0 {
            return Err(StrategyError::Invalid("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Setup(#[from] SetupError),
}

/// The user message body without the repair history.
fn user_content(req: &TranslationRequest) -> String {
    let mut out = String::new();
    if let Some(ctx) = req.rag_context.as_deref().map(str::trim).filter(|c| !c.is_empty()) {
        let _ = write!(out, "### Relevant APL documentation:\n{ctx}\n\n");
    }
    let _ = writeln!(out, "### APL code:\n{}", req.apl.trim_end());
    if !req.signatures.is_empty() {
        let _ = write!(out, "\n### C# method signatures:\n{}\n", req.signatures.join("\n"));
    }
    if let Some(d) = req.nl_description.as_deref().map(str::trim).filter(|d| !d.is_empty()) {
        let _ = write!(out, "\n### Description:\n{d}\n");
    }
    out
}

/// System instruction, user message and the open assistant prefix.
pub fn build_prompt(req: &TranslationRequest) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(user_content(req)),
        ChatMessage::assistant(ASSISTANT_PREFIX),
    ]
}

/// Code pulled out of a model response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub code: String,
    pub diagnostic: Option<String>,
}

/// Accepts raw code or fenced blocks. With several blocks the largest wins;
/// an unterminated fence runs to the end of the text.
pub fn extract_code(response: &str) -> Extracted {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in response.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(body), true) => {
                blocks.push(body.join("\n"));
                current = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    match blocks.len() {
        0 => Extracted {
            code: response.trim().to_string(),
            diagnostic: None,
        },
        1 => Extracted {
            code: blocks.remove(0).trim().to_string(),
            diagnostic: None,
        },
        n => {
            let (i, largest) = blocks
                .iter()
                .enumerate()
                .max_by_key(|(i, b)| (b.trim().len(), std::cmp::Reverse(*i)))
                .expect("n > 1");
            Extracted {
                code: largest.trim().to_string(),
                diagnostic: Some(format!("{n} fenced blocks in response; kept block {} (largest)", i + 1)),
            }
        }
    }
}

/// Rendered signatures for every function in `apl` that carries a type header.
pub fn signatures_for(apl: &str) -> Vec<String> {
    find_functions(apl)
        .iter()
        .filter_map(|f| f.header.as_ref().map(render_csharp_signature))
        .collect()
}

/// A request for a corpus datapoint. The description is taken from the
/// datapoint only when `with_nl` is set.
pub fn request_for(point: &Datapoint, with_signatures: bool, with_nl: bool) -> TranslationRequest {
    let mut req = TranslationRequest::new(point.apl.clone());
    if with_signatures {
        req.signatures = signatures_for(&point.apl);
    }
    if with_nl {
        req.nl_description = point.nl_description.clone();
    }
    req
}

/// A backend plus the request parameters used with it.
#[derive(Clone, Copy)]
pub struct Generator<'a> {
    pub backend: &'a dyn ChatBackend,
    pub model: &'a str,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl<'a> Generator<'a> {
    pub fn new(backend: &'a dyn ChatBackend, model: &'a str) -> Self {
        Self {
            backend,
            model,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: 0.0,
        }
    }

    pub fn complete(&self, messages: Vec<ChatMessage>) -> Result<String, BackendError> {
        let mut request = GenerationRequest::new(messages, self.model);
        request.max_output_tokens = self.max_output_tokens;
        request.temperature = self.temperature;
        self.backend.generate(&request)
    }
}

/// Everything needed to compile and test candidates for one sample.
#[derive(Clone, Copy)]
pub struct Verifier<'a> {
    pub io: &'a [IoCase],
    pub header: Option<&'a FunctionHeader>,
    pub executor: &'a dyn Executor,
    pub limits: Limits,
    pub tolerance: Tolerance,
}

impl Verifier<'_> {
    pub fn check(&self, candidate: &str) -> Result<ExecutionReport, SetupError> {
        runner::evaluate(candidate, self.io, self.header, self.executor, &self.limits, self.tolerance)
    }
}

/// Retrieval configuration for the rag strategy.
#[derive(Clone, Copy)]
pub struct RagStage<'a> {
    pub store: &'a ChunkStore,
    pub embedder: &'a dyn Embedder,
    pub k: usize,
    pub summary_budget: usize,
    pub summarizer: Generator<'a>,
    pub mode: ExecMode,
}

/// Intermediate artifacts behind an attempt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nl_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rag_context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationAttempt {
    /// 1-based.
    pub iteration: usize,
    pub candidate: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ExecutionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<Vec<ChatMessage>>,
}

impl TranslationAttempt {
    fn from_response(iteration: usize, response: String, prompt: Vec<ChatMessage>) -> Self {
        let Extracted { code, diagnostic } = extract_code(&response);
        Self {
            iteration,
            candidate: code,
            response,
            extraction_note: diagnostic,
            report: None,
            verdict: None,
            prompt: Some(prompt),
        }
    }

    pub fn attach(&mut self, report: ExecutionReport) {
        self.verdict = Some(report.verdict());
        self.report = Some(report);
    }

    fn rank(&self) -> (bool, usize, bool) {
        match &self.report {
            Some(r) => (r.verdict() == Verdict::FullPass, r.passed(), r.compile_ok),
            None => (false, 0, false),
        }
    }
}

/// Asks the model for a plain-English description of the APL code.
pub fn describe_apl(apl: &str, gen: &Generator<'_>) -> Result<String, StrategyError> {
    let messages = vec![
        ChatMessage::system(DESCRIBE_SYSTEM),
        ChatMessage::user(format!("### APL code:\n{}\n", apl.trim_end())),
    ];
    let text = gen.complete(messages)?.trim().to_string();
    if text.is_empty() {
        return Err(BackendError::Malformed("empty description".into()).into());
    }
    Ok(text)
}

/// Retrieves the top chunks for the APL source and condenses them.
pub fn rag_context(apl: &str, stage: &RagStage<'_>) -> Result<(String, RetrievalResult), StrategyError> {
    let result = retrieval::retrieve(stage.store, apl, stage.embedder, stage.k, stage.mode)?;
    let summary = retrieval::summarize(
        &result,
        apl,
        stage.summarizer.backend,
        stage.summarizer.model,
        stage.summary_budget,
    )?;
    Ok((summary, result))
}

/// Stages used to enrich a request before translation.
#[derive(Clone, Copy)]
pub struct Stages<'a> {
    pub describe: Option<Generator<'a>>,
    pub rag: Option<RagStage<'a>>,
}

/// Fills in the description or retrieved context the strategy calls for.
/// A description already present on the request is reused.
pub fn prepare(
    request: &TranslationRequest,
    stages: &Stages<'_>,
) -> Result<(TranslationRequest, Provenance), StrategyError> {
    request.validate()?;
    let mut req = request.clone();
    let mut prov = Provenance::default();
    match req.strategy {
        Strategy::Direct => {}
        Strategy::Nl => {
            if req.nl_description.as_deref().is_none_or(|d| d.trim().is_empty()) {
                let gen = stages
                    .describe
                    .ok_or_else(|| StrategyError::Invalid("nl strategy needs a describe backend".into()))?;
                req.nl_description = Some(describe_apl(&req.apl, &gen)?);
            }
            prov.nl_description = req.nl_description.clone();
        }
        Strategy::Rag => {
            let stage = stages
                .rag
                .ok_or_else(|| StrategyError::Invalid("rag strategy needs a retrieval store".into()))?;
            let (ctx, result) = rag_context(&req.apl, &stage)?;
            req.rag_context = Some(ctx.clone());
            prov.rag_context = Some(ctx);
            prov.retrieval = Some(result);
        }
    }
    Ok((req, prov))
}

/// One generation from the request as given.
pub fn translate_direct(req: &TranslationRequest, gen: &Generator<'_>) -> Result<TranslationAttempt, StrategyError> {
    req.validate()?;
    let prompt = build_prompt(req);
    let response = gen.complete(prompt.clone())?;
    Ok(TranslationAttempt::from_response(1, response, prompt))
}

/// Two stages: describe, then translate with the description.
pub fn translate_with_nl(
    req: &TranslationRequest,
    describe: &Generator<'_>,
    translate: &Generator<'_>,
) -> Result<(TranslationAttempt, Provenance), StrategyError> {
    let mut req = req.clone();
    req.strategy = Strategy::Nl;
    let stages = Stages {
        describe: Some(*describe),
        rag: None,
    };
    let (req, prov) = prepare(&req, &stages)?;
    Ok((translate_direct(&req, translate)?, prov))
}

pub fn translate_rag(
    req: &TranslationRequest,
    rag: &RagStage<'_>,
    translate: &Generator<'_>,
) -> Result<(TranslationAttempt, Provenance), StrategyError> {
    let mut req = req.clone();
    req.strategy = Strategy::Rag;
    let stages = Stages {
        describe: None,
        rag: Some(*rag),
    };
    let (req, prov) = prepare(&req, &stages)?;
    Ok((translate_direct(&req, translate)?, prov))
}

/// Where an iterative run was cut short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopStage {
    Request,
    Backend,
    /// The executor itself failed; a run-level problem, not a sample result.
    Setup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopError {
    /// 0 when the loop never started.
    pub iteration: usize,
    pub stage: LoopStage,
    pub message: String,
}

impl std::fmt::Display for LoopError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "iteration {}: {}", self.iteration, self.message)
    }
}

/// The history of an iterative run. `error` is set when a backend or setup
/// failure cut the loop short; the attempts so far are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeOutcome {
    pub history: Vec<TranslationAttempt>,
    /// Index into `history`.
    pub best: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<LoopError>,
}

impl IterativeOutcome {
    pub fn best_attempt(&self) -> Option<&TranslationAttempt> {
        self.best.map(|i| &self.history[i])
    }
}

/// Full pass first, then most tests passed, then compiled; remaining ties
/// go to the later attempt.
pub fn best_attempt(history: &[TranslationAttempt]) -> Option<usize> {
    history.iter().enumerate().max_by_key(|(_, a)| a.rank()).map(|(i, _)| i)
}

fn signature_for(verifier: &Verifier<'_>, req: &TranslationRequest, case: &IoCase) -> String {
    verifier
        .header
        .map(render_csharp_signature)
        .or_else(|| req.signatures.first().cloned())
        .unwrap_or_else(|| case.method_name.clone())
}

/// Feedback text for one evaluated attempt.
pub fn feedback_entry(attempt: &TranslationAttempt, req: &TranslationRequest, verifier: &Verifier<'_>) -> String {
    let mut out = String::new();
    let _ = write!(out, "### Attempt {}\n```csharp\n{}\n```\n", attempt.iteration, attempt.candidate.trim_end());
    let Some(report) = &attempt.report else {
        return out;
    };
    if !report.compile_ok {
        let diag = report.compiler_diagnostics.trim();
        let _ = write!(
            out,
            "Compiler errors:\n{}\n",
            if diag.is_empty() { "(no diagnostics)" } else { diag }
        );
        return out;
    }
    let failing: Vec<_> = report.tests.iter().filter(|t| t.status != TestStatus::Pass).collect();
    if failing.is_empty() {
        return out;
    }
    out.push_str("Failing tests:\n");
    for t in failing {
        let case = &verifier.io[t.index - 1];
        let actual = match (&t.actual, &t.error) {
            (_, Some(e)) => format!("error: {e}"),
            (Some(a), None) => a.to_string(),
            (None, None) => "no output".into(),
        };
        let _ = writeln!(
            out,
            "- Method: {}\n  Arguments: {}\n  Expected output: {}\n  Actual output: {}",
            signature_for(verifier, req, case),
            case.csharp_arg.trim(),
            t.expected,
            actual
        );
    }
    out
}

/// The base prompt with prior attempts appended to the user message,
/// dropping the oldest entries first to stay within `budget` characters.
/// The newest entry is always kept, cut to the budget if necessary.
pub fn build_feedback_prompt(req: &TranslationRequest, entries: &[String], budget: usize) -> Vec<ChatMessage> {
    let mut kept: Vec<&str> = Vec::new();
    let mut used = 0;
    for (n, e) in entries.iter().rev().enumerate() {
        let len = e.chars().count();
        if n > 0 && used + len > budget {
            break;
        }
        used += len;
        kept.push(e);
    }
    kept.reverse();
    let mut history = String::from("\n### Previous attempts:\n");
    let dropped = entries.len() - kept.len();
    if dropped > 0 {
        let _ = writeln!(history, "({dropped} earlier attempt(s) omitted)");
    }
    for e in &kept {
        if kept.len() == 1 && e.chars().count() > budget {
            history.push_str(&retrieval::truncate_chars(e, budget));
            history.push('\n');
        } else {
            history.push_str(e);
        }
        history.push('\n');
    }
    history.push_str("Fix the problems above and output the corrected C# program.\n");
    let mut messages = build_prompt(req);
    messages[1].content.push_str(&history);
    messages
}

/// Generate, verify, and repeat with feedback until a full pass or the
/// iteration budget runs out.
pub fn translate_iterative(
    req: &TranslationRequest,
    gen: &Generator<'_>,
    verifier: &Verifier<'_>,
    feedback_budget: usize,
) -> IterativeOutcome {
    let mut outcome = IterativeOutcome {
        history: Vec::new(),
        best: None,
        error: None,
    };
    let fail = |iteration, stage, message: String| LoopError {
        iteration,
        stage,
        message,
    };
    if let Err(e) = req.validate() {
        outcome.error = Some(fail(0, LoopStage::Request, e.to_string()));
        return outcome;
    }
    if verifier.io.is_empty() {
        outcome.error = Some(fail(0, LoopStage::Setup, SetupError::NoTests.to_string()));
        return outcome;
    }
    let mut entries: Vec<String> = Vec::new();
    for iteration in 1..=req.max_iterations {
        let prompt = if entries.is_empty() {
            build_prompt(req)
        } else {
            build_feedback_prompt(req, &entries, feedback_budget)
        };
        let response = match gen.complete(prompt.clone()) {
            Ok(r) => r,
            Err(e) => {
                outcome.error = Some(fail(iteration, LoopStage::Backend, e.to_string()));
                break;
            }
        };
        let mut attempt = TranslationAttempt::from_response(iteration, response, prompt);
        match verifier.check(&attempt.candidate) {
            Ok(report) => attempt.attach(report),
            Err(e) => {
                outcome.error = Some(fail(iteration, LoopStage::Setup, e.to_string()));
                outcome.history.push(attempt);
                break;
            }
        }
        let done = attempt.verdict == Some(Verdict::FullPass);
        entries.push(feedback_entry(&attempt, req, verifier));
        outcome.history.push(attempt);
        if done {
            break;
        }
    }
    outcome.best = best_attempt(&outcome.history);
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{render_chatml, HashedNgramEmbedder, Matcher, ScriptedMock};
    use crate::header::parse_header;
    use crate::retrieval::chunk_documents;
    use crate::runner::StubExecutor;
    use serde_json::json;

    const OR_FN: &str = "r←or v\nr←0\n:For e :In v\n    r∨←e\n    :If r=1 ⋄ :Leave ⋄ :EndIf\n:EndFor";

    const DIRECT_PROMPT: &str = "<|im_start|>system\nYou are an expert APL code programmer.\nGiven the following APL code create C# program that implements the given code. Output only the C# program, with no example usage.<|im_end|>\n\n<|im_start|>user\n### APL code:\nr←or v\nr←0\n:For e :In v\n    r∨←e\n    :If r=1 ⋄ :Leave ⋄ :EndIf\n:EndFor\n<|im_end|>\n\n<|im_start|>assistant\nOutput format: Only compilable C# program code, no explanations, no reasoning, no example usage.\n### C#:";

    #[test]
    fn direct_prompt_matches_fixture() {
        let messages = build_prompt(&TranslationRequest::new(OR_FN));
        assert_eq!(messages.len(), 3);
        assert_eq!(render_chatml(&messages), DIRECT_PROMPT);
    }

    #[test]
    fn signature_and_description_blocks() {
        let mut req = TranslationRequest::new("r←y xMsInt x");
        req.signatures = vec!["int[] xMsInt(int[] y, int[] x)".into()];
        let user = build_prompt(&req)[1].content.clone();
        assert_eq!(
            user,
            "### APL code:\nr←y xMsInt x\n\n### C# method signatures:\nint[] xMsInt(int[] y, int[] x)\n"
        );
        req.nl_description = Some("Membership of y in x.".into());
        req.rag_context = Some("∊ is membership.".into());
        let user = build_prompt(&req)[1].content.clone();
        let (ctx, apl, sig, desc) = (
            user.find("### Relevant APL documentation:").unwrap(),
            user.find("### APL code:").unwrap(),
            user.find("### C# method signatures:").unwrap(),
            user.find("### Description:").unwrap(),
        );
        assert!(ctx < apl && apl < sig && sig < desc);
        assert!(user.ends_with("### Description:\nMembership of y in x.\n"));
        assert_eq!(build_prompt(&req), build_prompt(&req.clone()));
    }

    #[test]
    fn fences() {
        assert_eq!(extract_code("  class A {}\n").code, "class A {}");
        let one = extract_code("Here:\n```csharp\nclass A {}\n```\nDone.");
        assert_eq!(one, Extracted { code: "class A {}".into(), diagnostic: None });
        let two = extract_code("```\nx\n```\ntext\n```cs\nclass Big { }\n```");
        assert_eq!(two.code, "class Big { }");
        assert!(two.diagnostic.unwrap().contains("2 fenced blocks"));
        assert_eq!(extract_code("```csharp\nclass A {}").code, "class A {}");
        assert_eq!(extract_code("").code, "");
    }

    fn io(outputs: &[serde_json::Value]) -> Vec<IoCase> {
        outputs
            .iter()
            .map(|o| IoCase {
                method_name: "or".into(),
                apl_left_arg: None,
                apl_right_arg: "0 1".into(),
                csharp_arg: "new int[] { 0, 1 }".into(),
                output: o.clone(),
                extra: Default::default(),
            })
            .collect()
    }

    fn stub() -> StubExecutor {
        serde_json::from_str(
            r#"{"rules": [
                {"contains": ["GOOD"], "all": "expected"},
                {"contains": ["HALF"], "tests": ["expected", "shifted"]},
                {"contains": ["WRONG"], "all": "shifted"}
            ]}"#,
        )
        .unwrap()
    }

    fn verifier<'a>(io: &'a [IoCase], exec: &'a StubExecutor) -> Verifier<'a> {
        Verifier {
            io,
            header: None,
            executor: exec,
            limits: Limits::default(),
            tolerance: Tolerance::default(),
        }
    }

    #[test]
    fn direct_with_reference_passes() {
        let mut mock = ScriptedMock::default();
        mock.push(vec![Matcher::Contains("r←or v".into())], "```csharp\npublic class orUtil { /* GOOD */ }\n```");
        let gen = Generator::new(&mock, "mock");
        let mut attempt = translate_direct(&TranslationRequest::new(OR_FN), &gen).unwrap();
        assert_eq!(attempt.candidate, "public class orUtil { /* GOOD */ }");
        let cases = io(&[json!(1)]);
        let exec = stub();
        attempt.attach(verifier(&cases, &exec).check(&attempt.candidate).unwrap());
        assert_eq!(attempt.verdict, Some(Verdict::FullPass));
    }

    #[test]
    fn empty_response_does_not_compile() {
        let mock = ScriptedMock::new(vec![crate::backends::Rule { when: vec![], respond: String::new() }]);
        let gen = Generator::new(&mock, "mock");
        let mut attempt = translate_direct(&TranslationRequest::new(OR_FN), &gen).unwrap();
        let cases = io(&[json!(1)]);
        let exec = stub();
        attempt.attach(verifier(&cases, &exec).check(&attempt.candidate).unwrap());
        assert_eq!(attempt.verdict, Some(Verdict::CompileError));
    }

    fn attempt_mock(responses: &[&str]) -> ScriptedMock {
        let mut mock = ScriptedMock::default();
        for (i, r) in responses.iter().enumerate() {
            mock.push(
                vec![Matcher::Occurrences {
                    needle: "### Attempt ".into(),
                    count: i,
                }],
                *r,
            );
        }
        mock
    }

    #[test]
    fn repairs_after_two_compile_failures() {
        let mock = attempt_mock(&["class orUtil {", "#error still broken\nclass orUtil {}", "class orUtil { GOOD }"]);
        let gen = Generator::new(&mock, "mock");
        let cases = io(&[json!(1), json!(0)]);
        let exec = stub();
        let out = translate_iterative(&TranslationRequest::new(OR_FN), &gen, &verifier(&cases, &exec), DEFAULT_FEEDBACK_BUDGET);
        assert_eq!(out.error, None);
        assert_eq!(out.history.len(), 3);
        let best = out.best_attempt().unwrap();
        assert_eq!((best.iteration, best.verdict), (3, Some(Verdict::FullPass)));
        let last_prompt = &out.history[2].prompt.as_ref().unwrap()[1].content;
        assert!(last_prompt.contains("### Attempt 1") && last_prompt.contains("### Attempt 2"));
        assert!(last_prompt.contains("Compiler errors:\nerror CS1513"));
    }

    #[test]
    fn never_improving_stops_at_five() {
        let responses = ["class orUtil { WRONG }", "class orUtil { HALF }", "class orUtil { WRONG }", "class orUtil {", "class orUtil { WRONG }"];
        let mock = attempt_mock(&responses);
        let gen = Generator::new(&mock, "mock");
        let cases = io(&[json!(1), json!(0)]);
        let exec = stub();
        let out = translate_iterative(&TranslationRequest::new(OR_FN), &gen, &verifier(&cases, &exec), DEFAULT_FEEDBACK_BUDGET);
        assert_eq!(out.history.len(), 5);
        let best = out.best_attempt().unwrap();
        assert_eq!(best.iteration, 2);
        assert_eq!(best.verdict, Some(Verdict::PartialPass));
        let prompt = &out.history[1].prompt.as_ref().unwrap()[1].content;
        assert!(prompt.contains("Arguments: new int[] { 0, 1 }"));
        assert!(prompt.contains("Expected output: 1\n  Actual output: 2"));
    }

    #[test]
    fn early_exit_on_first_pass() {
        let mock = attempt_mock(&["class orUtil { GOOD }"]);
        let gen = Generator::new(&mock, "mock");
        let cases = io(&[json!(1)]);
        let exec = stub();
        let out = translate_iterative(&TranslationRequest::new(OR_FN), &gen, &verifier(&cases, &exec), DEFAULT_FEEDBACK_BUDGET);
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best, Some(0));
    }

    #[test]
    fn backend_error_keeps_history() {
        // no rule for the second iteration
        let mock = attempt_mock(&["class orUtil { WRONG }"]);
        let gen = Generator::new(&mock, "mock");
        let cases = io(&[json!(1)]);
        let exec = stub();
        let out = translate_iterative(&TranslationRequest::new(OR_FN), &gen, &verifier(&cases, &exec), DEFAULT_FEEDBACK_BUDGET);
        assert_eq!(out.history.len(), 1);
        let err = out.error.as_ref().unwrap();
        assert_eq!((err.iteration, err.stage), (2, LoopStage::Backend));
        assert!(err.to_string().starts_with("iteration 2"));
        assert_eq!(out.best, Some(0));
    }

    #[test]
    fn history_truncates_oldest_first() {
        let req = TranslationRequest::new("r←f x");
        let entries: Vec<String> = (1..=4).map(|i| format!("### Attempt {i}\n{}\n", "x".repeat(100))).collect();
        let p = build_feedback_prompt(&req, &entries, 250);
        let user = &p[1].content;
        assert!(!user.contains("### Attempt 1") && !user.contains("### Attempt 2"));
        assert!(user.contains("### Attempt 3") && user.contains("### Attempt 4"));
        assert!(user.contains("(2 earlier attempt(s) omitted)"));
        let tiny = build_feedback_prompt(&req, &entries, 20);
        assert!(tiny[1].content.contains("### Attempt 4") && !tiny[1].content.contains(&"x".repeat(50)));
    }

    #[test]
    fn nl_and_rag_stages() {
        let mut describer = ScriptedMock::default();
        describer.push(vec![Matcher::Contains("Describe".into())], "Returns 1 if any element is 1.");
        let mut translator = ScriptedMock::default();
        translator.push(vec![Matcher::Contains("### Description:\nReturns 1".into())], "class orUtil { NL }");
        translator.push(vec![Matcher::Contains("### Relevant APL documentation:".into())], "class orUtil { RAG }");
        let (d, t) = (Generator::new(&describer, "d"), Generator::new(&translator, "t"));
        let (attempt, prov) = translate_with_nl(&TranslationRequest::new(OR_FN), &d, &t).unwrap();
        assert_eq!(attempt.candidate, "class orUtil { NL }");
        assert_eq!(prov.nl_description.as_deref(), Some("Returns 1 if any element is 1."));

        let embedder = HashedNgramEmbedder::default();
        let docs = vec![
            ("or.txt".to_string(), "∨ is logical or. :For loops iterate over a vector.".to_string()),
            ("rho.txt".to_string(), "⍴ gives the shape of an array.".to_string()),
        ];
        let store = ChunkStore::new(chunk_documents(&docs, 800, 100, &embedder, ExecMode::Sequential).unwrap()).unwrap();
        let rag = RagStage {
            store: &store,
            embedder: &embedder,
            k: 5,
            summary_budget: DEFAULT_SUMMARY_BUDGET,
            summarizer: Generator::new(&translator, "t"),
            mode: ExecMode::Sequential,
        };
        let (attempt, prov) = translate_rag(&TranslationRequest::new(OR_FN), &rag, &t).unwrap();
        assert_eq!(attempt.candidate, "class orUtil { RAG }");
        assert_eq!(prov.retrieval.unwrap().hits.len(), 2);
        assert!(prov.rag_context.unwrap().contains("logical or"));
    }

    #[test]
    fn strategy_requirements() {
        let mut req = TranslationRequest::new(OR_FN);
        req.strategy = Strategy::Rag;
        let none = Stages { describe: None, rag: None };
        assert!(matches!(prepare(&req, &none), Err(StrategyError::Invalid(_))));
        req.strategy = Strategy::Nl;
        req.nl_description = Some("given".into());
        assert_eq!(prepare(&req, &none).unwrap().1.nl_description.as_deref(), Some("given"));
        req.max_iterations = 0;
        assert!(req.validate().is_err());
        assert!(TranslationRequest::new(" ").validate().is_err());
        assert_eq!("rag".parse::<Strategy>(), Ok(Strategy::Rag));
    }

    #[test]
    fn signatures_from_headers() {
        let apl = "r←y xMsInt x\n⍝ ⍺ : INT[]   ⍵ : INT[]   → INT[]\nr←y∊x";
        let sigs = signatures_for(apl);
        assert_eq!(sigs.len(), 1);
        assert!(sigs[0].contains("xMsInt("), "{sigs:?}");
        assert!(signatures_for("r←f x\nr←x").is_empty());
    }

    #[test]
    fn feedback_uses_header_signature() {
        let header = FunctionHeader::new("or", parse_header("⍝ ⍵ : BOOL[] → BOOL").unwrap()).unwrap();
        let cases = io(&[json!(1)]);
        let exec = stub();
        let mut v = verifier(&cases, &exec);
        v.header = Some(&header);
        let mut a = TranslationAttempt::from_response(1, "class orUtil { WRONG }".into(), vec![]);
        a.attach(v.check(&a.candidate).unwrap());
        let text = feedback_entry(&a, &TranslationRequest::new(OR_FN), &v);
        assert!(text.contains(&format!("- Method: {}", render_csharp_signature(&header))), "{text}");
    }
}
