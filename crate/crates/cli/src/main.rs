//! `syneval`: expand templates, train the n-gram baseline, score suites
//! against backends and analyse the scores.
//!
//! Exit codes: 0 success, 1 other failure, 2 validation error, 3 transport
//! error, 4 protocol violation. Failures are also written to stderr as one
//! JSON object `{"error": {"kind": ..., "message": ...}}`.

mod backend;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use syneval::harness::{score_suite, sha256_hex, ScoreOptions, ScoresFile};
use syneval::metrics::{expand_analyses, AnalysisSpec};
use syneval::ngram::{train_from_file, TrainConfig};
use syneval::protocol::wire::{serve, serve_tcp};
use syneval::report::{analyze, merge_reports, AnalyzeOptions, FileRef, RunManifest};
use syneval::suite::{parse_suite, validate_measurement_regions, TestSuite};
use syneval::template::{ExpansionPlan, Template};
use syneval::{Error, ErrorKind};

use backend::open_backend;

#[derive(Parser)]
#[command(
    name = "syneval",
    version,
    about = "Targeted syntactic evaluation of language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a template into a test suite.
    Expand(ExpandArgs),
    /// Train a Kneser-Ney n-gram model.
    NgramTrain(TrainArgs),
    /// Score every sentence of a suite with a backend.
    Score(ScoreArgs),
    /// Evaluate contrasts on a scores file and write a report.
    Analyze(AnalyzeArgs),
    /// Merge report tables into one long table.
    Report(ReportArgs),
    /// Serve a backend over the wire protocol (stdio or TCP).
    Serve(ServeArgs),
    /// Validate a suite and its analyses.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Sample,
}

#[derive(Args)]
struct ExpandArgs {
    template: PathBuf,
    #[arg(long, value_enum, default_value = "sample")]
    mode: Mode,
    /// Number of items to draw in sample mode.
    #[arg(long, default_value_t = 100)]
    sample_size: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print expansion counts as JSON instead of expanding.
    #[arg(long)]
    count: bool,
    /// Output path; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file, one whitespace-tokenised sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value_t = 2)]
    unk_threshold: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    suite: PathBuf,
    /// ngram:<model>, mock:<rules>, exec:<command> or tcp:<host:port>.
    #[arg(long, env = "SYNEVAL_BACKEND")]
    backend: String,
    /// Maximum number of batches in flight.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Rerun the analysis recorded in a manifest and check the report hash.
    #[arg(long, conflicts_with_all = ["suite", "scores", "analyses"])]
    from_manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "from_manifest")]
    suite: Option<PathBuf>,
    #[arg(long, required_unless_present = "from_manifest")]
    scores: Option<PathBuf>,
    /// Analyses file (JSON list or {"analyses": [...]}); defaults to the
    /// suite's own analyses.
    #[arg(long)]
    analyses: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    #[arg(long, default_value_t = 10_000)]
    n_perm: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report table; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Where to write the run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Optional per-item values table.
    #[arg(long)]
    items: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "SYNEVAL_BACKEND")]
    backend: String,
    /// Suite whose sentences a mock backend should recognise.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Listen on this TCP address instead of stdio.
    #[arg(long)]
    listen: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    suite: PathBuf,
    #[arg(long)]
    analyses: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report_error(&err),
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Expand(a) => cmd_expand(a),
        Command::NgramTrain(a) => cmd_ngram_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Report(a) => cmd_report(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn report_error(err: &anyhow::Error) -> ExitCode {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(Error::kind);
    let (name, code) = match kind {
        Some(ErrorKind::Validation) => ("validation", 2),
        Some(ErrorKind::Transport) => ("transport", 3),
        Some(ErrorKind::Protocol) => ("protocol", 4),
        Some(ErrorKind::Io) => ("io", 1),
        Some(ErrorKind::Other) | None => ("error", 1),
    };
    let msg = serde_json::json!({"error": {"kind": name, "message": format!("{err:#}")}});
    eprintln!("{msg}");
    ExitCode::from(code)
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e).into())
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::io(format!("writing {}", p.display()), e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_suite(path: &Path) -> anyhow::Result<(TestSuite, Vec<u8>)> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Validation(format!("{} is not UTF-8", path.display())))?;
    let suite = parse_suite(&text).with_context(|| format!("in suite {}", path.display()))?;
    Ok((suite, bytes))
}

fn load_analyses(path: &Path) -> anyhow::Result<Vec<AnalysisSpec>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        List(Vec<AnalysisSpec>),
        Wrapped { analyses: Vec<AnalysisSpec> },
    }
    let text = String::from_utf8(read(path)?)
        .map_err(|_| Error::Validation(format!("{} is not UTF-8", path.display())))?;
    let doc: Doc = serde_json::from_str(&text)
        .map_err(Error::from_json)
        .with_context(|| format!("in analyses {}", path.display()))?;
    Ok(match doc {
        Doc::List(v) | Doc::Wrapped { analyses: v } => v,
    })
}

fn cmd_expand(a: ExpandArgs) -> anyhow::Result<()> {
    let template = Template::read(&a.template)
        .with_context(|| format!("in template {}", a.template.display()))?;
    if a.count {
        let c = template.count_expansions()?;
        let per: serde_json::Map<String, serde_json::Value> = c
            .per_condition
            .iter()
            .map(|(l, n)| (l.to_string(), (*n).into()))
            .collect();
        let doc = serde_json::json!({"joint": c.joint, "per_condition": per});
        return write_output(
            a.out.as_deref(),
            &format!("{}\n", serde_json::to_string_pretty(&doc)?),
        );
    }
    let plan = match a.mode {
        Mode::Exhaustive => ExpansionPlan::exhaustive(),
        Mode::Sample => ExpansionPlan::sample(a.sample_size, a.seed),
    };
    let suite = template.expand(plan)?;
    write_output(a.out.as_deref(), &suite.to_json())
}

fn cmd_ngram_train(a: TrainArgs) -> anyhow::Result<()> {
    let config = TrainConfig {
        order: a.order,
        unk_threshold: a.unk_threshold,
    };
    let model = train_from_file(&a.corpus, config)?;
    model.save(&a.out)?;
    log::info!(
        "trained order-{} model: vocabulary {}, types per order {:?}, discounts {:?}",
        model.order(),
        model.vocab().len(),
        model.type_counts(),
        model.discounts()
    );
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> anyhow::Result<()> {
    if a.jobs == 0 || a.batch_size == 0 {
        bail!(Error::Validation(
            "--jobs and --batch-size must be positive".into()
        ));
    }
    let (suite, bytes) = load_suite(&a.suite)?;
    let backend = open_backend(&a.backend, Some(&suite))?;
    let options = ScoreOptions {
        jobs: a.jobs,
        batch_size: a.batch_size,
    };
    let scores = score_suite(&suite, &sha256_hex(&bytes), backend.as_ref(), options)?;
    write_output(Some(&a.out), &scores.to_json())
}

struct AnalysisRun {
    report: String,
    items: String,
    manifest: RunManifest,
}

fn run_analysis(
    suite_path: &Path,
    scores_path: &Path,
    analyses: Option<&Path>,
    options: AnalyzeOptions,
) -> anyhow::Result<AnalysisRun> {
    let (suite, suite_bytes) = load_suite(suite_path)?;
    let scores_bytes = read(scores_path)?;
    let scores = ScoresFile::parse(
        std::str::from_utf8(&scores_bytes)
            .map_err(|_| Error::Validation(format!("{} is not UTF-8", scores_path.display())))?,
    )
    .with_context(|| format!("in scores {}", scores_path.display()))?;
    let suite_hash = sha256_hex(&suite_bytes);
    if scores.suite.sha256 != suite_hash {
        bail!(Error::Validation(format!(
            "{} was scored from a different version of {} (hash {} vs {suite_hash})",
            scores_path.display(),
            suite_path.display(),
            scores.suite.sha256
        )));
    }
    let specs = match analyses {
        Some(p) => load_analyses(p)?,
        None => suite.analyses.clone(),
    };
    let contrasts = expand_analyses(&suite, &specs)?;
    let report = analyze(&suite, &scores, &contrasts, options)?;
    let tsv = report.to_tsv();
    let manifest = RunManifest {
        tool: format!("syneval {}", env!("CARGO_PKG_VERSION")),
        suite: FileRef {
            path: suite_path.display().to_string(),
            sha256: suite_hash,
        },
        scores: FileRef {
            path: scores_path.display().to_string(),
            sha256: sha256_hex(&scores_bytes),
        },
        backend: scores.backend.clone(),
        contrasts,
        ci_level: options.ci_level,
        n_perm: options.n_perm,
        seed: options.seed,
        report: FileRef {
            path: String::new(),
            sha256: sha256_hex(tsv.as_bytes()),
        },
        created: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    Ok(AnalysisRun {
        items: report.items_tsv(),
        report: tsv,
        manifest,
    })
}

fn cmd_analyze(a: AnalyzeArgs) -> anyhow::Result<()> {
    if let Some(mpath) = &a.from_manifest {
        let text = String::from_utf8(read(mpath)?)
            .map_err(|_| Error::Validation(format!("{} is not UTF-8", mpath.display())))?;
        let recorded = RunManifest::parse(&text)
            .with_context(|| format!("in manifest {}", mpath.display()))?;
        let run = rerun_with_contrasts(&recorded)?;
        for (what, want, got) in [
            ("suite", &recorded.suite.sha256, &run.manifest.suite.sha256),
            (
                "scores",
                &recorded.scores.sha256,
                &run.manifest.scores.sha256,
            ),
            (
                "report",
                &recorded.report.sha256,
                &run.manifest.report.sha256,
            ),
        ] {
            if want != got {
                bail!(Error::Validation(format!(
                    "{what} hash {got} does not match the manifest ({want})"
                )));
            }
        }
        return write_output(a.out.as_deref(), &run.report);
    }

    let options = AnalyzeOptions {
        ci_level: a.ci_level,
        n_perm: a.n_perm,
        seed: a.seed,
    };
    let suite = a.suite.as_deref().expect("required by clap");
    let scores = a.scores.as_deref().expect("required by clap");
    let mut run = run_analysis(suite, scores, a.analyses.as_deref(), options)?;
    write_output(a.out.as_deref(), &run.report)?;
    if let Some(p) = &a.items {
        write_output(Some(p), &run.items)?;
    }
    if let Some(p) = &a.manifest {
        run.manifest.report.path = a
            .out
            .as_ref()
            .map(|o| o.display().to_string())
            .unwrap_or_default();
        write_output(Some(p), &run.manifest.to_json())?;
    }
    Ok(())
}

fn rerun_with_contrasts(m: &RunManifest) -> anyhow::Result<AnalysisRun> {
    let suite_path = Path::new(&m.suite.path);
    let scores_path = Path::new(&m.scores.path);
    let (suite, suite_bytes) = load_suite(suite_path)?;
    let scores_bytes = read(scores_path)?;
    let scores = ScoresFile::parse(
        std::str::from_utf8(&scores_bytes)
            .map_err(|_| Error::Validation(format!("{} is not UTF-8", scores_path.display())))?,
    )?;
    let report = analyze(&suite, &scores, &m.contrasts, m.options())?;
    let tsv = report.to_tsv();
    let mut manifest = m.clone();
    manifest.suite.sha256 = sha256_hex(&suite_bytes);
    manifest.scores.sha256 = sha256_hex(&scores_bytes);
    manifest.report.sha256 = sha256_hex(tsv.as_bytes());
    Ok(AnalysisRun {
        items: report.items_tsv(),
        report: tsv,
        manifest,
    })
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let tables = a
        .reports
        .iter()
        .map(|p| {
            String::from_utf8(read(p)?)
                .map_err(|_| Error::Validation(format!("{} is not UTF-8", p.display())).into())
        })
        .collect::<anyhow::Result<Vec<String>>>()?;
    write_output(a.out.as_deref(), &merge_reports(&tables)?)
}

fn cmd_serve(a: ServeArgs) -> anyhow::Result<()> {
    let suite = match &a.suite {
        Some(p) => Some(load_suite(p)?.0),
        None => None,
    };
    let backend = open_backend(&a.backend, suite.as_ref())?;
    match &a.listen {
        Some(addr) => {
            let listener = std::net::TcpListener::bind(addr)
                .map_err(|e| Error::Transport(format!("cannot listen on {addr}: {e}")))?;
            let local = listener
                .local_addr()
                .map_err(|e| Error::Transport(e.to_string()))?;
            // announce the bound address (useful with port 0)
            println!("listening on {local}");
            use std::io::Write;
            std::io::stdout().flush().ok();
            serve_tcp(std::sync::Arc::new(backend), listener)?;
        }
        None => {
            let stdin = std::io::stdin();
            serve(backend.as_ref(), stdin.lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> anyhow::Result<()> {
    let (suite, _) = load_suite(&a.suite)?;
    let specs = match &a.analyses {
        Some(p) => load_analyses(p)?,
        None => suite.analyses.clone(),
    };
    let contrasts = expand_analyses(&suite, &specs)?;
    let violations: Vec<String> = contrasts
        .iter()
        .flat_map(|c| validate_measurement_regions(&suite, c))
        .map(|v| v.to_string())
        .collect();
    if !violations.is_empty() {
        bail!(Error::Validation(violations.join("; ")));
    }
    let summary = serde_json::json!({
        "suite": suite.name,
        "items": suite.items.len(),
        "conditions": suite.cells().len(),
        "regions": suite.region_names,
        "contrasts": contrasts.iter().map(|c| c.id()).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
