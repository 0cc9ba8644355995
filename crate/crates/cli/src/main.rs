use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{NaiveDate, Utc};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use groundline_core::eval::{
    load_suite, markdown_category_table, markdown_metrics_table, run_case, run_suite, EvalEnv, EvalReport, Suite,
    Variant,
};
use groundline_core::fixtures;
use groundline_core::llm::{FaultProfile, HttpConfig};
use groundline_core::pipeline::{AnswerEnvelope, GuardPipeline, NarrationMode, PipelineConfig, PipelineError};
use groundline_core::semantic::load_model;
use groundline_core::store::{ingest_csv, IngestOptions};
use groundline_server::{AppConfig, AppState, DatasetFile, ProviderConfig};

/// `println!` that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "groundline", version, about = "Guarded natural-language analytics over CSV data")]
struct Cli {
    /// JSON config file; flags override it.
    #[arg(long, global = true, env = "APP_CONFIG")]
    config_file: Option<PathBuf>,
    /// Log more on stderr (repeat for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a CSV file and print the inferred schema and metadata.
    Ingest(IngestArgs),
    /// Answer one question and print the envelope as JSON.
    Ask(AskArgs),
    /// Run an evaluation suite and print the report.
    Eval(EvalArgs),
    /// Check a semantic model file.
    ValidateModel {
        #[arg(long)]
        file: PathBuf,
    },
    /// Serve the HTTP API (and a UI bundle, if configured).
    Serve(ServeArgs),
    /// Walk through the bundled scenarios with the scripted provider.
    Demo {
        /// Print envelopes as one JSON document instead of prose.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    file: PathBuf,
    /// Defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Scripted,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultPreset {
    None,
    Standard,
    /// Only the fabricated-field fault, at 0.3.
    FabricateField,
}

#[derive(Clone, Copy, ValueEnum)]
enum Narration {
    Template,
    Llm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Markdown,
}

#[derive(Args, Default)]
struct Sources {
    /// Load the bundled demo datasets, semantic model, and rules.
    #[arg(long)]
    fixtures: bool,
    /// CSV file to register, named after its stem. Repeatable.
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Semantic model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Rule set JSON.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Chat-completion endpoint for the http provider.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name for the http provider.
    #[arg(long)]
    llm_model: Option<String>,
    /// Script file for the scripted provider; defaults to the bundled one.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, value_enum)]
    faults: Option<FaultPreset>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AskArgs {
    #[arg(long)]
    query: String,
    /// Restrict the question to these datasets. Repeatable; default is all registered.
    #[arg(long = "dataset")]
    datasets: Vec<String>,
    /// Anchor for relative dates (YYYY-MM-DD). Required with the scripted provider.
    #[arg(long)]
    now: Option<NaiveDate>,
    #[arg(long, value_enum)]
    narration: Option<Narration>,
    /// Run with every guard layer off.
    #[arg(long)]
    baseline: bool,
    #[command(flatten)]
    sources: Sources,
}

#[derive(Args)]
struct EvalArgs {
    /// Bundled suite name (categories, vocabulary, boundaries, adversarial, mixed) or a suite file.
    #[arg(long)]
    suite: String,
    /// baseline, guarded, both, or a pipeline config JSON file.
    #[arg(long, default_value = "both")]
    config: String,
    #[arg(long, value_enum, default_value = "json")]
    report: ReportFormat,
    #[command(flatten)]
    sources: Sources,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    addr: Option<String>,
    /// Directory holding a built UI bundle.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Permissive CORS for a UI dev server.
    #[arg(long)]
    dev: bool,
    /// Anchor for relative dates when a request gives none.
    #[arg(long)]
    now: Option<NaiveDate>,
    #[command(flatten)]
    sources: Sources,
}

enum Failure {
    Usage(String),
    Operation(String),
}

type Outcome = Result<(), Failure>;

fn op(e: impl std::fmt::Display) -> Failure {
    Failure::Operation(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::INFO,
        1 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level).with_target(false).init();

    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Ask(a) => ask(&cli, a),
        Command::Eval(a) => eval(&cli, a),
        Command::ValidateModel { file } => validate_model(file),
        Command::Serve(a) => serve(&cli, a),
        Command::Demo { json } => demo(*json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Operation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn print_json(v: &impl serde::Serialize) {
    out!("{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

fn ingest(a: &IngestArgs) -> Outcome {
    let bytes = std::fs::read(&a.file).map_err(|e| op(format!("{}: {e}", a.file.display())))?;
    let name = a.name.clone().unwrap_or_else(|| stem(&a.file));
    let opts = IngestOptions {
        delimiter: a.delimiter,
        source_label: a.source.clone(),
        ingested_at: Utc::now().timestamp(),
        ..IngestOptions::default()
    };
    let ds = ingest_csv(&bytes, &name, &opts).map_err(|e| op(format!("{}: {e}", e.code())))?;
    print_json(&serde_json::json!({
        "name": ds.name,
        "columns": ds.schema.columns,
        "metadata": ds.metadata,
        "warnings": ds.warnings,
    }));
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

/// Config file, then flags.
fn app_config(cli: &Cli, s: &Sources) -> Result<AppConfig, Failure> {
    let mut cfg = match &cli.config_file {
        Some(path) => AppConfig::load(path).map_err(op)?,
        None => AppConfig::default(),
    };
    cfg.fixtures |= s.fixtures;
    cfg.datasets.extend(s.data.iter().map(|p| DatasetFile { path: p.clone(), name: None, source_label: None }));
    if s.model.is_some() {
        cfg.semantic_model = s.model.clone();
    }
    if s.rules.is_some() {
        cfg.rules = s.rules.clone();
    }
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    match s.provider {
        Some(ProviderKind::Http) => {
            let mut http = match cfg.provider {
                ProviderConfig::Http(h) => h,
                ProviderConfig::Scripted { .. } => match (&s.endpoint, &s.llm_model) {
                    (Some(e), Some(m)) => HttpConfig::new(e, m),
                    _ => {
                        return Err(Failure::Usage(
                            "--provider http needs --endpoint and --llm-model, or an http provider in the config file"
                                .into(),
                        ))
                    }
                },
            };
            if let Some(e) = &s.endpoint {
                http.endpoint = e.clone();
            }
            if let Some(m) = &s.llm_model {
                http.model = m.clone();
            }
            cfg.provider = ProviderConfig::Http(http);
        }
        Some(ProviderKind::Scripted) if !cfg.provider.is_scripted() => cfg.provider = ProviderConfig::default(),
        _ => {}
    }
    if let ProviderConfig::Scripted { script, faults } = &mut cfg.provider {
        if s.script.is_some() {
            *script = s.script.clone();
        }
        if let Some(preset) = s.faults {
            *faults = match preset {
                FaultPreset::None => FaultProfile::none(0),
                FaultPreset::Standard => FaultProfile::standard(0),
                FaultPreset::FabricateField => FaultProfile { fabricate_field: 0.3, ..FaultProfile::none(0) },
            };
        }
    } else if s.script.is_some() || s.faults.is_some() {
        return Err(Failure::Usage("--script and --faults apply to the scripted provider only".into()));
    }
    Ok(cfg)
}

fn build_state(cfg: AppConfig) -> Result<Arc<AppState>, Failure> {
    let state = AppState::from_config(cfg).map_err(op)?;
    if state.registry.names().is_empty() {
        return Err(op("no datasets registered; pass --fixtures or --data"));
    }
    Ok(Arc::new(state))
}

fn ask(cli: &Cli, a: &AskArgs) -> Outcome {
    let mut cfg = app_config(cli, &a.sources)?;
    let now = match (a.now.or(cfg.now), cfg.provider.is_scripted()) {
        (Some(d), _) => d,
        (None, true) => return Err(Failure::Usage("--now is required with the scripted provider".into())),
        (None, false) => {
            let today = Utc::now().date_naive();
            eprintln!("note: no --now given; relative dates resolve against today ({today})");
            today
        }
    };
    cfg.now = Some(now);
    let mut config = if a.baseline { PipelineConfig::baseline() } else { cfg.pipeline };
    if let Some(n) = a.narration {
        config.narration = match n {
            Narration::Template => NarrationMode::Template,
            Narration::Llm => NarrationMode::Llm,
        };
    }
    let seed = cfg.seed;
    let state = build_state(cfg)?;
    let store = state.registry.snapshot().scoped(&a.datasets).map_err(|n| op(format!("dataset {n:?} is not registered")))?;
    let model = state.model().unwrap_or_default();
    let pipeline = GuardPipeline::new(state.provider(seed), config);
    match pipeline.answer_query(&a.query, &store, &model, &state.rules, now) {
        Ok(envelope) => {
            print_json(&envelope);
            Ok(())
        }
        Err(PipelineError::Credential(var)) => Err(op(format!("provider credential missing: set {var}"))),
    }
}

fn load_named_suite(name: &str) -> Result<Suite, Failure> {
    if name == "mixed" {
        return Ok(fixtures::mixed_suite());
    }
    if let Some(s) = fixtures::suite(name) {
        return Ok(s);
    }
    let text = std::fs::read_to_string(name)
        .map_err(|e| op(format!("{name:?} is neither a bundled suite nor a readable file: {e}")))?;
    load_suite(&text).map_err(op)
}

fn variants(spec: &str) -> Result<Vec<Variant>, Failure> {
    Ok(match spec {
        "baseline" => vec![Variant::new("baseline", PipelineConfig::baseline())],
        "guarded" => vec![Variant::new("guarded", PipelineConfig::guarded())],
        "both" => vec![
            Variant::new("baseline", PipelineConfig::baseline()),
            Variant::new("guarded", PipelineConfig::guarded()),
        ],
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| op(format!("{path}: {e}")))?;
            let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| op(format!("{path}: {e}")))?;
            vec![Variant::new(stem(Path::new(path)), config)]
        }
    })
}

fn eval(cli: &Cli, a: &EvalArgs) -> Outcome {
    let mut cfg = app_config(cli, &a.sources)?;
    if cfg.datasets.is_empty() && !cfg.fixtures {
        cfg.fixtures = true;
    }
    let suite = load_named_suite(&a.suite)?;
    let variants = variants(&a.config)?;
    let seed = cfg.seed;
    let state = build_state(cfg)?;
    let env = EvalEnv { store: state.registry.snapshot(), model: state.model().unwrap_or_default(), rules: state.rules.clone() };
    tracing::info!("running {} cases x {} variants (seed {seed})", suite.cases.len(), variants.len());
    let provider_for = |s: u64| state.provider(s);
    let reports = run_suite(&suite, &variants, &[seed], &env, &provider_for);
    match a.report {
        ReportFormat::Json if reports.len() == 1 => print_json(&reports[0]),
        ReportFormat::Json => print_json(&reports),
        ReportFormat::Markdown => {
            let refs: Vec<&EvalReport> = reports.iter().collect();
            out!("{}", markdown_category_table(&refs));
            out!("{}", markdown_metrics_table(&refs));
        }
    }
    Ok(())
}

fn validate_model(file: &Path) -> Outcome {
    let text = std::fs::read_to_string(file).map_err(|e| op(format!("{}: {e}", file.display())))?;
    let model = load_model(&text).map_err(|e| op(format!("{}: {e}", e.code())))?;
    let c = model.config();
    print_json(&serde_json::json!({
        "valid": true,
        "fields": c.fields.len(),
        "metrics": c.metrics.len(),
        "synonyms": c.synonyms.len(),
        "rules": c.rules.len(),
    }));
    Ok(())
}

fn serve(cli: &Cli, a: &ServeArgs) -> Outcome {
    let mut cfg = app_config(cli, &a.sources)?;
    if let Some(addr) = &a.addr {
        cfg.addr = addr.clone();
    }
    if a.static_dir.is_some() {
        cfg.static_dir = a.static_dir.clone();
    }
    cfg.dev |= a.dev;
    if a.now.is_some() {
        cfg.now = a.now;
    }
    let addr = cfg.addr.parse().map_err(|e| Failure::Usage(format!("bad --addr {:?}: {e}", cfg.addr)))?;
    let state = Arc::new(AppState::from_config(cfg).map_err(op)?);
    let runtime = tokio::runtime::Runtime::new().map_err(op)?;
    runtime.block_on(groundline_server::serve(state, addr)).map_err(op)
}

/// Case ids from the bundled suites, with a short heading for each.
const WALKTHROUGH: [(&str, &str); 9] = [
    ("reason-000", "Known data structure: property sales by location"),
    ("agg-000", "Relative dates: users last quarter"),
    ("chart-001", "Chart output"),
    ("rel-001", "Join across sessions and campaigns"),
    ("syn-001", "A business synonym the schema does not contain"),
    ("amb-001", "A term with two defined readings"),
    ("cover-001", "A period outside the data"),
    ("intrude-001", "Prompt intrusion"),
    ("link-001", "A planted link in generated prose"),
];

fn demo(json: bool) -> Outcome {
    let suite = fixtures::mixed_suite();
    let env = fixtures::env();
    let guarded = GuardPipeline::new(
        fixtures::scripted_provider(FaultProfile::none(7)),
        PipelineConfig { narration: NarrationMode::Llm, ..PipelineConfig::guarded() },
    );
    let mut out = Vec::new();
    for (id, title) in WALKTHROUGH {
        let case = suite.cases.iter().find(|c| c.id == id).ok_or_else(|| op(format!("bundled case {id} is missing")))?;
        let (envelope, _) = run_case(&guarded, case, &env);
        if json {
            out.push(serde_json::json!({ "id": id, "query": case.query, "now": case.now, "envelope": envelope }));
        } else {
            out!("== {title}");
            out!("Q ({}): {}", case.now, case.query);
            describe(&envelope);
            out!();
        }
    }
    if json {
        print_json(&out);
    }
    Ok(())
}

fn describe(e: &AnswerEnvelope) {
    match &e.reason {
        Some(reason) if !e.is_answered() => {
            out!("abstained: {} ({})", reason.code.as_str(), reason.detail);
        }
        _ => {
            out!("answer: {}", e.answer.as_deref().unwrap_or(""));
            if let Some(r) = &e.result {
                let header: Vec<String> = r.table.columns.iter().map(|c| c.name.clone()).collect();
                let mut widths: Vec<usize> = header.iter().map(String::len).collect();
                for row in r.display.iter().take(12) {
                    for (w, cell) in widths.iter_mut().zip(row) {
                        *w = (*w).max(cell.len());
                    }
                }
                let line = |cells: &[String]| {
                    cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ")
                };
                out!("  {}", line(&header));
                for row in r.display.iter().take(12) {
                    out!("  {}", line(row));
                }
                if r.display.len() > 12 {
                    out!("  ({} more rows)", r.display.len() - 12);
                }
            }
        }
    }
    let flagged: Vec<String> = e
        .verdicts
        .iter()
        .filter(|v| !matches!(v.verdict, groundline_core::plan::Verdict::Pass))
        .map(|v| v.stage.clone())
        .collect();
    if !flagged.is_empty() {
        out!("non-pass verdicts at: {}", flagged.join(", "));
    }
}
