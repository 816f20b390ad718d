//! End-to-end runs: headers to signatures, optional description or
//! retrieved context, translation with optional repair, verification and
//! classification. Results go to a JSON Lines file, one record per sample,
//! appended in corpus order so an interrupted run can be resumed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{ChatBackend, Embedder};
use crate::config::{BackendConfig, ConfigError, RunConfig};
use crate::dataset::Datapoint;
use crate::header::{find_functions, FunctionHeader};
use crate::par::{self, ExecMode};
use crate::retrieval::{ChunkStore, RetrievalError};
use crate::runner::{
    classify, error_distribution, render_distribution_table, render_summary_table, summarize, Classification,
    Executor, IterationShare, PassRateSummary, Verdict,
};
use crate::strategies::{
    prepare, request_for, translate_iterative, Generator, LoopStage, Provenance, RagStage, Stages, Strategy,
    StrategyError, TranslationAttempt, Verifier,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("retrieval store: {0}")]
    Store(#[from] RetrievalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt results record: {message}")]
    Corrupt { path: String, line: usize, message: String },
    /// The executor failed in a way that says nothing about the sample.
    #[error("sample {id}: {message}")]
    Setup { id: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One results record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub id: String,
    pub strategy: Strategy,
    pub iterative: bool,
    /// Verdict of the best attempt; absent when nothing was verified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    /// Outcome after each iteration, in order.
    #[serde(default)]
    pub iterations: Vec<Classification>,
    /// 1-based iteration of the best attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<usize>,
    #[serde(default)]
    pub attempts: Vec<TranslationAttempt>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleResult {
    fn failed(id: String, cfg: &RunConfig, error: String) -> Self {
        Self {
            id,
            strategy: cfg.strategy.kind,
            iterative: cfg.strategy.iterative,
            verdict: None,
            classification: None,
            iterations: Vec::new(),
            best: None,
            attempts: Vec::new(),
            provenance: Provenance::default(),
            error: Some(error),
        }
    }

    /// Samples that never produced a verified candidate count as not compiled.
    pub fn effective_verdict(&self) -> Verdict {
        self.verdict.unwrap_or(Verdict::CompileError)
    }

    /// Row label for reports, such as `nl` or `rag+iterative`.
    pub fn setup_label(&self) -> String {
        if self.iterative {
            format!("{}+iterative", self.strategy)
        } else {
            self.strategy.to_string()
        }
    }
}

/// The header of the function under test: the one named by the io cases,
/// else the first function with a header.
pub fn header_for(point: &Datapoint) -> Option<FunctionHeader> {
    let found = find_functions(&point.apl);
    let wanted = point.io.first().map(|c| c.method_name.as_str());
    let named = found
        .iter()
        .find(|f| Some(f.definition.name.as_str()) == wanted)
        .and_then(|f| f.header.clone());
    named.or_else(|| found.into_iter().find_map(|f| f.header))
}

/// Ids as they appear in the results file. Repeats get `#<n>` suffixes.
pub fn unique_ids(points: &[Datapoint]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let id = p.id_or(i);
            let n = seen.entry(id.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                id
            } else {
                format!("{id}#{n}")
            }
        })
        .collect()
}

/// Built components of a run.
pub struct Pipeline {
    pub config: RunConfig,
    pub translate: Box<dyn ChatBackend>,
    /// Used for descriptions and retrieval summaries; falls back to `translate`.
    pub describe: Option<Box<dyn ChatBackend>>,
    pub store: Option<ChunkStore>,
    pub embedder: Option<Box<dyn Embedder>>,
    pub executor: Box<dyn Executor>,
    pub mode: ExecMode,
}

/// What [`Pipeline::run`] did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub total: usize,
    /// Already present in the results file.
    pub skipped: usize,
    pub completed: usize,
    pub interrupted: bool,
}

impl Pipeline {
    /// Validates the configuration and builds every component. Nothing is
    /// sent to a backend here.
    pub fn from_config(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let translate = config.backend.build()?;
        let describe = match &config.describe_backend {
            Some(b) => Some(b.build()?),
            None => None,
        };
        let (store, embedder) = match (&config.retrieval.store, config.strategy.kind) {
            (Some(path), Strategy::Rag) => (Some(ChunkStore::load(path)?), Some(config.retrieval.embedder.build()?)),
            _ => (None, None),
        };
        let executor = config.executor.build()?;
        Ok(Self {
            config,
            translate,
            describe,
            store,
            embedder,
            executor,
            mode: ExecMode::default(),
        })
    }

    /// A pipeline around ready-made parts, with the default stub executor
    /// and no retrieval.
    pub fn with_parts(config: RunConfig, translate: Box<dyn ChatBackend>, executor: Box<dyn Executor>) -> Self {
        Self {
            config,
            translate,
            describe: None,
            store: None,
            embedder: None,
            executor,
            mode: ExecMode::default(),
        }
    }

    fn generator<'a>(&'a self, backend: &'a dyn ChatBackend) -> Generator<'a> {
        let g = &self.config.generation;
        Generator {
            backend,
            model: &g.model,
            max_output_tokens: g.max_output_tokens,
            temperature: g.temperature,
        }
    }

    /// Runs one sample. Backend failures are recorded on the result; only
    /// executor setup problems are returned as errors.
    pub fn run_sample(&self, point: &Datapoint, id: String) -> Result<SampleResult, PipelineError> {
        let cfg = &self.config;
        let strat = &cfg.strategy;
        if point.io.is_empty() {
            return Ok(SampleResult::failed(id, cfg, "no io cases to verify against".into()));
        }
        let header = header_for(point);
        let mut req = request_for(point, strat.signatures, strat.kind == Strategy::Nl && strat.reuse_descriptions);
        req.strategy = strat.kind;
        req.iterative = strat.iterative;
        req.max_iterations = if strat.iterative { strat.max_iterations } else { 1 };

        let translate = self.generator(self.translate.as_ref());
        let aux = self.generator(self.describe.as_deref().unwrap_or(self.translate.as_ref()));
        let rag = match (&self.store, &self.embedder) {
            (Some(store), Some(embedder)) => Some(RagStage {
                store,
                embedder: embedder.as_ref(),
                k: cfg.retrieval.k,
                summary_budget: cfg.retrieval.summary_budget,
                summarizer: aux,
                mode: ExecMode::Sequential,
            }),
            _ => None,
        };
        let stages = Stages {
            describe: Some(aux),
            rag,
        };
        let (req, provenance) = match prepare(&req, &stages) {
            Ok(v) => v,
            Err(StrategyError::Setup(e)) => {
                return Err(PipelineError::Setup {
                    id,
                    message: e.to_string(),
                })
            }
            Err(e) => return Ok(SampleResult::failed(id, cfg, format!("preparation: {e}"))),
        };

        let verifier = Verifier {
            io: &point.io,
            header: header.as_ref(),
            executor: self.executor.as_ref(),
            limits: cfg.limits,
            tolerance: cfg.tolerance,
        };
        let outcome = translate_iterative(&req, &translate, &verifier, strat.feedback_budget);
        if let Some(err) = outcome.error.as_ref().filter(|e| e.stage == LoopStage::Setup) {
            return Err(PipelineError::Setup {
                id,
                message: err.to_string(),
            });
        }

        let best = outcome.best_attempt();
        let mut attempts = outcome.history.clone();
        if !strat.record_prompts {
            for a in &mut attempts {
                a.prompt = None;
            }
        }
        Ok(SampleResult {
            id,
            strategy: strat.kind,
            iterative: strat.iterative,
            verdict: best.and_then(|a| a.verdict),
            classification: best.and_then(|a| a.report.as_ref()).map(classify),
            iterations: outcome
                .history
                .iter()
                .filter_map(|a| a.report.as_ref().map(classify))
                .collect(),
            best: best.map(|a| a.iteration),
            attempts,
            provenance,
            error: outcome.error.map(|e| e.to_string()),
        })
    }

    /// Runs every sample not already in `results_path`, appending records in
    /// corpus order. Samples run concurrently within a batch; `cancel` is
    /// checked between batches, so an interrupted file is always a prefix of
    /// the complete one.
    pub fn run(
        &self,
        points: &[Datapoint],
        results_path: &Path,
        cancel: &AtomicBool,
    ) -> Result<RunStats, PipelineError> {
        let done: HashSet<String> = prepare_results_file(results_path)?
            .into_iter()
            .map(|r| r.id)
            .collect();
        let ids = unique_ids(points);
        let pending: Vec<(&Datapoint, String)> = points
            .iter()
            .zip(ids)
            .filter(|(_, id)| !done.contains(id))
            .collect();
        let mut stats = RunStats {
            total: points.len(),
            skipped: points.len() - pending.len(),
            ..RunStats::default()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(results_path)
            .map_err(io_err(results_path))?;
        let mut out = BufWriter::new(file);
        let workers = self.config.workers;
        let batch = if workers == 0 { 32 } else { workers * 4 };
        par::with_workers(workers, move || {
            for chunk in pending.chunks(batch) {
                if cancel.load(Ordering::SeqCst) {
                    stats.interrupted = true;
                    break;
                }
                let results = par::map(self.mode, chunk, |(p, id)| self.run_sample(p, id.clone()));
                for r in results {
                    let r = r?;
                    let line = serde_json::to_string(&r).expect("results serialize");
                    writeln!(out, "{line}")
                        .and_then(|()| out.flush())
                        .map_err(io_err(results_path))?;
                    log::info!("{}: {:?}", r.id, r.classification);
                    stats.completed += 1;
                }
            }
            Ok(stats)
        })
    }
}

/// Loads existing records and drops a torn last line left by an
/// interrupted write. Corruption anywhere else is an error.
fn prepare_results_file(path: &Path) -> Result<Vec<SampleResult>, PipelineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    let mut good_bytes = 0;
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        offset += line.len();
        if line.trim().is_empty() {
            good_bytes = offset;
            continue;
        }
        let complete = line.ends_with('\n');
        match serde_json::from_str::<SampleResult>(line) {
            Ok(r) if complete => {
                records.push(r);
                good_bytes = offset;
            }
            Ok(_) => {}
            Err(e) if complete => {
                return Err(PipelineError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
            Err(_) => {}
        }
    }
    if good_bytes < text.len() {
        log::warn!("{}: dropping a partial last record", path.display());
        let f = File::options().write(true).open(path).map_err(io_err(path))?;
        f.set_len(good_bytes as u64).map_err(io_err(path))?;
    }
    Ok(records)
}

/// Reads a results file. A torn last line is ignored.
pub fn load_results(path: &Path) -> Result<Vec<SampleResult>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !line.ends_with('\n') => {}
            Err(e) => {
                return Err(PipelineError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Pass rates per setup and the per-iteration error distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub samples: usize,
    pub setups: BTreeMap<String, PassRateSummary>,
    pub distribution: Vec<IterationShare>,
    /// Samples that ended with a backend or preparation error.
    pub errored: usize,
}

pub fn build_report(results: &[SampleResult]) -> Report {
    let mut groups: BTreeMap<String, Vec<Verdict>> = BTreeMap::new();
    for r in results {
        groups.entry(r.setup_label()).or_default().push(r.effective_verdict());
    }
    let per_sample: Vec<Vec<Classification>> = results.iter().map(|r| r.iterations.clone()).collect();
    Report {
        samples: results.len(),
        setups: groups.into_iter().map(|(k, v)| (k, summarize(&v))).collect(),
        distribution: error_distribution(&per_sample),
        errored: results.iter().filter(|r| r.error.is_some()).count(),
    }
}

impl Report {
    pub fn render_text(&self) -> String {
        let rows: Vec<(String, PassRateSummary)> = self.setups.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let mut out = format!("samples: {} (with errors: {})\n\n", self.samples, self.errored);
        out.push_str(&render_summary_table(&rows));
        if !self.distribution.is_empty() {
            out.push('\n');
            out.push_str(&render_distribution_table(&self.distribution));
        }
        out
    }
}

/// True when the backend config can run without network access.
pub fn is_offline(cfg: &BackendConfig) -> bool {
    match cfg {
        BackendConfig::Mock { .. } => true,
        BackendConfig::Replay { upstream, .. } => upstream.is_none(),
        BackendConfig::Http(_) => false,
    }
}
