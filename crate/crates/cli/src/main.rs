use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use aplbridge::config::RunConfig;
use aplbridge::dataset::{self, Role, SftOptions, SplitSpec};
use aplbridge::eval::{eval_expr, run_io_case, Env};
use aplbridge::header::{
    expand_overloads, find_functions, render_csharp_signature, render_dispatch_method, render_util_class, BaseKind,
    OverloadSpec, Rank,
};
use aplbridge::lexer::{tokenizer_metrics_with, GlyphInventory, IdentityTokenizer, Tokenizer, VocabTokenizer};
use aplbridge::par::{self, ExecMode};
use aplbridge::pipeline::{build_report, load_results, Pipeline};
use aplbridge::retrieval::{self, ChunkStore};
use aplbridge::runner::compare_output;
use aplbridge::strategies::Strategy;

/// APL to C# translation toolkit.
#[derive(Parser)]
#[command(name = "aplbridge", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus management.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Locate functions and render C# signatures from their type headers.
    ParseHeaders(ParseHeadersArgs),
    /// Evaluate an APL expression, or check a corpus against the interpreter.
    Eval(EvalArgs),
    /// Glyph tokenization metrics for a corpus.
    TokenizeReport(TokenizeArgs),
    /// Retrieval store management.
    #[command(subcommand)]
    Rag(RagCmd),
    /// Translate a corpus and verify every candidate.
    Translate(TranslateArgs),
    /// Pass rates and error distribution from a results file.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Train,
    Evaluation,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Train => Role::Train,
            RoleArg::Evaluation => Role::Evaluation,
        }
    }
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Check every line; exits 1 on errors.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "evaluation")]
        role: RoleArg,
    },
    /// Seeded train/valid/test partition into train.jsonl, valid.jsonl, test.jsonl.
    Split {
        file: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        valid: f64,
        #[arg(long, default_value_t = 0.1)]
        test: f64,
    },
    /// Corpus statistics as JSON.
    Stats { file: PathBuf },
    /// Seeded subset of a training file.
    Subset {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prompt/completion records for supervised fine-tuning.
    ExportSft {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Include rendered C# signatures in the prompt.
        #[arg(long)]
        signatures: bool,
        /// Include the corpus description in the prompt.
        #[arg(long)]
        nl: bool,
    },
}

#[derive(Args)]
struct ParseHeadersArgs {
    /// APL source file; `-` reads stdin.
    file: Option<PathBuf>,
    /// Print a `<Name>Util` class of stubs instead of JSON.
    #[arg(long)]
    class: bool,
    /// Expand the membership overload family for this function name.
    #[arg(long, value_name = "NAME")]
    membership: Option<String>,
    #[arg(long, default_value = "INT")]
    base: String,
    #[arg(long, default_value_t = 2)]
    max_rank: usize,
    /// With --membership, render one object-typed dispatch method.
    #[arg(long)]
    dispatch: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Expression to evaluate.
    #[arg(conflicts_with = "dataset")]
    expr: Option<String>,
    /// Check every io case of a corpus against its expected Output.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct TokenizeArgs {
    /// JSONL corpus; the `apl` field of each line is measured.
    corpus: PathBuf,
    /// `token<TAB>id` vocabulary; defaults to one token per codepoint.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Subcommand)]
enum RagCmd {
    /// Chunk and embed every file of a directory.
    Index {
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k chunks for a query.
    Query {
        query: String,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
    },
}

#[derive(Args)]
struct TranslateArgs {
    /// JSONL corpus with io cases.
    dataset: PathBuf,
    /// Results file; existing records are kept and their samples skipped.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    iterative: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Print JSON only.
    #[arg(long)]
    json: bool,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn read_source(file: Option<&Path>) -> Result<String> {
    match file {
        None => bail!("no input file (use - for stdin)"),
        Some(p) if p == Path::new("-") => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
        Some(p) => fs::read_to_string(p).with_context(|| p.display().to_string()),
    }
}

fn load_points(file: &Path, role: Role) -> Result<Vec<dataset::Datapoint>> {
    let loaded = dataset::load(file, role)?;
    for d in &loaded.diagnostics {
        log::warn!("{}:{}: {}", file.display(), d.line, d.message);
    }
    if loaded.has_errors() {
        bail!("{} has invalid lines; run `aplbridge dataset validate`", file.display());
    }
    Ok(loaded.points)
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn dataset_cmd(cmd: &DatasetCmd, cfg: &RunConfig) -> Result<ExitCode> {
    match cmd {
        DatasetCmd::Validate { file, role } => {
            let loaded = dataset::load(file, (*role).into())?;
            for d in &loaded.diagnostics {
                println!("{}:{}: {}: {}", file.display(), d.line, json!(d.severity).as_str().unwrap_or(""), d.message);
            }
            println!("{} valid datapoints, {} diagnostics", loaded.points.len(), loaded.diagnostics.len());
            return Ok(if loaded.has_errors() { ExitCode::FAILURE } else { ExitCode::SUCCESS });
        }
        DatasetCmd::Split {
            file,
            out_dir,
            train,
            valid,
            test,
        } => {
            let points = load_points(file, Role::Train)?;
            let spec = SplitSpec {
                train: *train,
                valid: *valid,
                test: *test,
                seed: cfg.seed,
            };
            let split = dataset::split(&points, &spec)?;
            fs::create_dir_all(out_dir)?;
            for (name, part) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
                dataset::save(part, &out_dir.join(format!("{name}.jsonl")))?;
            }
            println!("train {} / valid {} / test {}", split.train.len(), split.valid.len(), split.test.len());
        }
        DatasetCmd::Stats { file } => print_json(&dataset::stats(&load_points(file, Role::Train)?))?,
        DatasetCmd::Subset { file, n, out } => {
            let points = load_points(file, Role::Train)?;
            dataset::save(&dataset::subset(&points, *n, cfg.seed)?, out)?;
            println!("wrote {n} datapoints to {}", out.display());
        }
        DatasetCmd::ExportSft {
            file,
            out,
            signatures,
            nl,
        } => {
            let points = load_points(file, Role::Train)?;
            let records = dataset::export_sft(
                &points,
                SftOptions {
                    signatures: *signatures,
                    nl_description: *nl,
                },
            );
            let mut text = String::new();
            for r in &records {
                text.push_str(&serde_json::to_string(r)?);
                text.push('\n');
            }
            dataset::write_atomic(out, text.as_bytes())?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_base(name: &str) -> Result<BaseKind> {
    BaseKind::ALL
        .into_iter()
        .find(|b| b.apl_name().eq_ignore_ascii_case(name))
        .with_context(|| format!("unknown base kind {name}"))
}

fn parse_headers(args: &ParseHeadersArgs) -> Result<ExitCode> {
    if let Some(name) = &args.membership {
        let rank = Rank::from_usize(args.max_rank).context("max rank must be 0, 1 or 2")?;
        let spec = OverloadSpec::membership(name, parse_base(&args.base)?, rank);
        if args.dispatch {
            print!("{}", render_dispatch_method(&spec));
        } else {
            for h in expand_overloads(&spec) {
                println!("{}", render_csharp_signature(&h));
            }
        }
        return Ok(ExitCode::SUCCESS);
    }
    let source = read_source(args.file.as_deref())?;
    let found = find_functions(&source);
    if args.class {
        let headers: Vec<_> = found.iter().filter_map(|f| f.header.clone()).collect();
        match render_util_class(&headers) {
            Some(class) => print!("{class}"),
            None => bail!("no function with a type header"),
        }
        return Ok(ExitCode::SUCCESS);
    }
    let rows: Vec<_> = found
        .iter()
        .map(|f| {
            json!({
                "name": f.definition.name,
                "line": f.line,
                "valence": f.definition.valence,
                "signature": f.header.as_ref().map(render_csharp_signature),
                "diagnostics": f.diagnostics,
            })
        })
        .collect();
    print_json(&rows)?;
    Ok(if found.iter().any(|f| !f.diagnostics.is_empty()) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn eval_cmd(args: &EvalArgs, cfg: &RunConfig) -> Result<ExitCode> {
    if let Some(expr) = &args.expr {
        let value = eval_expr(expr, &mut Env::new(), None, None)?;
        println!("{}", value.to_json());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(file) = &args.dataset else {
        bail!("give an expression or --dataset");
    };
    let points = load_points(file, Role::Evaluation)?;
    let tol = cfg.tolerance;
    let mut failures = 0;
    let mut cases = 0;
    for (i, p) in points.iter().enumerate() {
        for (j, case) in p.io.iter().enumerate() {
            cases += 1;
            let outcome = run_io_case(&p.apl, case, j + 1)
                .map_err(|e| e.to_string())
                .and_then(|v| compare_output(&v.to_json(), &case.output, tol).map_err(|d| d.to_string()));
            if let Err(msg) = outcome {
                failures += 1;
                println!("{} io[{}]: {msg}", p.id_or(i), j + 1);
            }
        }
    }
    println!("{} of {cases} io cases agree with the interpreter", cases - failures);
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn tokenize_report(args: &TokenizeArgs, mode: ExecMode) -> Result<ExitCode> {
    let points = load_points(&args.corpus, Role::Train)?;
    let corpus: Vec<&str> = points.iter().map(|p| p.apl.as_str()).collect();
    let vocab;
    let tokenizer: &dyn Tokenizer = match &args.vocab {
        Some(path) => {
            vocab = VocabTokenizer::from_file(path)?;
            &vocab
        }
        None => &IdentityTokenizer,
    };
    print_json(&tokenizer_metrics_with(&corpus, tokenizer, &GlyphInventory::standard(), mode)?)?;
    Ok(ExitCode::SUCCESS)
}

fn rag_cmd(cmd: &RagCmd, cfg: &RunConfig, mode: ExecMode) -> Result<ExitCode> {
    let embedder = cfg.retrieval.embedder.build()?;
    match cmd {
        RagCmd::Index { docs, out } => {
            let docs = retrieval::load_docs(docs)?;
            let r = &cfg.retrieval;
            let store = ChunkStore::build(&docs, r.chunk_size, r.chunk_overlap, embedder.as_ref(), mode)?;
            store.save(out)?;
            println!("indexed {} chunks from {} documents into {}", store.chunks.len(), docs.len(), out.display());
        }
        RagCmd::Query { query, store, k } => {
            let path = store
                .as_ref()
                .or(cfg.retrieval.store.as_ref())
                .context("no store given (--store or retrieval.store)")?;
            let store = ChunkStore::load(path)?;
            let result = retrieval::retrieve(&store, query, embedder.as_ref(), k.unwrap_or(cfg.retrieval.k), mode)?;
            print_json(&result)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn translate(args: &TranslateArgs, mut cfg: RunConfig) -> Result<ExitCode> {
    if let Some(s) = args.strategy {
        cfg.strategy.kind = s;
    }
    if args.iterative {
        cfg.strategy.iterative = true;
    }
    if let Some(n) = args.max_iterations {
        cfg.strategy.max_iterations = n;
    }
    let pipeline = Pipeline::from_config(cfg)?;
    let points = load_points(&args.dataset, Role::Evaluation)?;

    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        log::warn!("no interrupt handler: {e}");
    }
    let stats = pipeline.run(&points, &args.out, &cancel)?;
    eprintln!(
        "{} samples: {} done now, {} already present{}",
        stats.total,
        stats.completed,
        stats.skipped,
        if stats.interrupted { ", interrupted" } else { "" }
    );
    let report = build_report(&load_results(&args.out)?);
    print!("{}", report.render_text());
    // conventional status for SIGINT; the results file is a valid prefix
    Ok(if stats.interrupted { ExitCode::from(130) } else { ExitCode::SUCCESS })
}

fn report(args: &ReportArgs) -> Result<ExitCode> {
    let report = build_report(&load_results(&args.results)?);
    if args.json {
        print_json(&report)?;
    } else {
        print!("{}", report.render_text());
        println!();
        print_json(&report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let mode = ExecMode::default();
    let workers = cfg.workers;
    match &cli.command {
        Command::Dataset(cmd) => dataset_cmd(cmd, &cfg),
        Command::ParseHeaders(args) => parse_headers(args),
        Command::Eval(args) => eval_cmd(args, &cfg),
        Command::TokenizeReport(args) => par::with_workers(workers, || tokenize_report(args, mode)),
        Command::Rag(cmd) => par::with_workers(workers, || rag_cmd(cmd, &cfg, mode)),
        Command::Translate(args) => translate(args, cfg.clone()),
        Command::Report(args) => report(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
