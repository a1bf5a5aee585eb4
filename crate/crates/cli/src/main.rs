use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use valtax::io as docs;
use valtax::mutual_aid::{self, DifferenceMeasure, MemberAggregation};
use valtax::{AlignmentScheme, Error, SelectionStrategy};

mod demo;
mod render;

type Taxonomy = valtax::ValueTaxonomy;

#[derive(Parser)]
#[command(
    name = "valtax",
    version,
    about = "Validate, propagate and align value taxonomies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `text` tables or `machine` (JSON) output.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Check structural rules of a taxonomy document.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fill in missing importances.
    Propagate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Report parents whose importance is not the mean of their children.
    Coherence {
        #[arg(long)]
        input: PathBuf,
    },
    /// Build the taxonomy for a context from a general taxonomy.
    Context {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        context: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
    },
    /// Score how well observed behaviour aligns with a taxonomy.
    Align(AlignArgs),
    /// Number of root-to-node paths for every node.
    Paths {
        #[arg(long)]
        input: PathBuf,
    },
    /// Graphviz rendering of a taxonomy.
    ExportDot {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the mutual-aid example end to end on built-in data.
    Demo,
}

#[derive(Args)]
struct SelectionArgs {
    /// Overrides the context document's selection strategy.
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Threshold for the `positive` strategy.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Positive,
    Kmeans2,
}

#[derive(Args)]
struct AlignArgs {
    /// General taxonomy; importances come from it unless --context is given.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    context: Option<PathBuf>,
    /// Event log (JSON lines) of a mutual-aid community.
    #[arg(long, conflicts_with = "sd")]
    log: Option<PathBuf>,
    /// JSON object mapping property node ids to satisfaction degrees.
    #[arg(long, required_unless_present = "log")]
    sd: Option<PathBuf>,
    #[arg(long, default_value = "community")]
    entity: String,
    #[arg(long, value_enum, default_value_t = Scheme::Mean)]
    scheme: Scheme,
    /// Score every property of the context, including unselected and detested ones,
    /// instead of only those kept in the built context taxonomy.
    #[arg(long, requires = "context")]
    full_context: bool,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Mean,
    Path,
}

#[derive(Args)]
struct DomainArgs {
    #[arg(long)]
    max_r: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_delta: Option<f64>,
    #[arg(long, value_enum)]
    measure: Option<Measure>,
    /// Score p1/p2 for the entity as a single member instead of averaging members.
    #[arg(long)]
    single_member: bool,
    /// Treat requests with no offers as the maximum ratio instead of failing.
    #[arg(long)]
    saturate: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Measure {
    Kl,
    Emd,
}

enum Failure {
    Io { path: PathBuf, source: io::Error },
    Core { file: Option<PathBuf>, error: Error },
    Incoherent { file: PathBuf, nodes: Vec<String> },
    Usage(String),
}

impl Failure {
    fn core(file: &Path) -> impl FnOnce(Error) -> Failure + '_ {
        move |error| Failure::Core {
            file: Some(file.to_owned()),
            error,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io { .. } => 3,
            Failure::Incoherent { .. } => 2,
            Failure::Core { error, .. } => match error {
                Error::IncoherentInput { .. }
                | Error::ConflictingAssignment { .. }
                | Error::RangeViolation { .. } => 2,
                _ => 1,
            },
            Failure::Usage(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io { path, source } => format!("{}: {source}", path.display()),
            Failure::Core {
                file: Some(file),
                error,
            } => format!("{}: {error}", file.display()),
            Failure::Core { file: None, error } => error.to_string(),
            Failure::Incoherent { file, nodes } => {
                format!(
                    "{}: Coherence: importance differs from the mean of children at {}",
                    file.display(),
                    nodes.join(", ")
                )
            }
            Failure::Usage(message) => message.clone(),
        }
    }
}

/// Rendered output plus an optional failure to report after it is written.
struct Outcome {
    output: String,
    failure: Option<Failure>,
}

impl From<String> for Outcome {
    fn from(output: String) -> Self {
        Self {
            output,
            failure: None,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|source| Failure::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_taxonomy(path: &Path) -> Result<Taxonomy, Failure> {
    docs::parse_taxonomy(&read(path)?).map_err(Failure::core(path))
}

fn load_context(path: &Path, selection: &SelectionArgs) -> Result<valtax::ContextSpec, Failure> {
    let mut spec = docs::parse_context(&read(path)?).map_err(Failure::core(path))?;
    match (selection.strategy, selection.threshold) {
        (Some(Strategy::Kmeans2), Some(_)) => {
            return Err(Failure::Usage(
                "--threshold only applies to --strategy positive".into(),
            ))
        }
        (Some(Strategy::Kmeans2), None) => spec.selection = SelectionStrategy::KMeansTwo,
        (Some(Strategy::Positive), t) | (None, t @ Some(_)) => {
            spec.selection = SelectionStrategy::threshold(t.unwrap_or(0.0))
                .map_err(|error| Failure::Core { file: None, error })?;
        }
        (None, None) => {}
    }
    Ok(spec)
}

fn machine(value: &serde_json::Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("output is always serialisable");
    out.push('\n');
    out
}

fn run(command: Command, format: Format) -> Result<Outcome, Failure> {
    match command {
        Command::Validate { input } => {
            let t = load_taxonomy(&input)?;
            Ok(match format {
                Format::Text => format!("valid: {} nodes, {} edges\n", t.len(), t.edges().count()),
                Format::Machine => {
                    machine(&json!({ "valid": true, "nodes": t.len(), "edges": t.edges().count() }))
                }
            }
            .into())
        }
        Command::Propagate { input } => {
            let t = load_taxonomy(&input)?;
            match valtax::propagate(&t) {
                Ok(result) => Ok(match format {
                    Format::Text => render::propagation(&result),
                    Format::Machine => docs::serialize_taxonomy(&result.taxonomy),
                }
                .into()),
                Err(failure) => {
                    let partial = render::partial_assignments(&failure.assigned);
                    Ok(Outcome {
                        output: partial,
                        failure: Some(Failure::Core {
                            file: Some(input),
                            error: failure.error,
                        }),
                    })
                }
            }
        }
        Command::Coherence { input } => {
            let t = load_taxonomy(&input)?;
            let report = valtax::check_coherence(&t, &valtax::Mean, valtax::Tolerance::default());
            let output = match format {
                Format::Text => render::coherence(&report),
                Format::Machine => machine(&render::coherence_json(&report)),
            };
            let failure = (!report.is_coherent()).then(|| Failure::Incoherent {
                file: input,
                nodes: report
                    .violations
                    .iter()
                    .map(|v| v.parent.to_string())
                    .collect(),
            });
            Ok(Outcome { output, failure })
        }
        Command::Context {
            input,
            context,
            selection,
        } => {
            let general = load_taxonomy(&input)?;
            let spec = load_context(&context, &selection)?;
            let built =
                valtax::build_context_taxonomy(&general, &spec).map_err(Failure::core(&context))?;
            for warning in &built.warnings {
                eprintln!("warning: {}: {warning:?}", context.display());
            }
            Ok(match format {
                Format::Text => render::context(&spec.id, &built),
                Format::Machine => docs::serialize_taxonomy(&built.taxonomy),
            }
            .into())
        }
        Command::Align(args) => align(args, format),
        Command::Paths { input } => {
            let t = load_taxonomy(&input)?;
            let counts = t.all_paths_counts().map_err(Failure::core(&input))?;
            Ok(match format {
                Format::Text => render::paths(&counts),
                Format::Machine => machine(
                    &counts
                        .iter()
                        .map(|(k, v)| (k.to_string(), json!(v)))
                        .collect(),
                ),
            }
            .into())
        }
        Command::ExportDot { input } => {
            let t = load_taxonomy(&input)?;
            Ok(docs::export_dot(&t).map_err(Failure::core(&input))?.into())
        }
        Command::Demo => demo::run(format)
            .map(Outcome::from)
            .map_err(|error| Failure::Core { file: None, error }),
    }
}

fn domain_config(args: &DomainArgs) -> Result<valtax::DomainConfig, Failure> {
    let mut cfg = valtax::DomainConfig::default();
    if let Some(v) = args.max_r {
        cfg.max_ratio = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.max_delta {
        cfg.max_delta = v;
    }
    if let Some(m) = args.measure {
        cfg.measure = match m {
            Measure::Kl => DifferenceMeasure::KlDivergence,
            Measure::Emd => DifferenceMeasure::EarthMovers1D,
        };
    }
    if args.single_member {
        cfg.member_aggregation = MemberAggregation::SingleEntity;
    }
    cfg.saturate_undefined_ratio = args.saturate;
    cfg.validate()
        .map_err(|error| Failure::Core { file: None, error })?;
    Ok(cfg)
}

fn load_sd(path: &Path) -> Result<std::collections::BTreeMap<valtax::NodeId, f64>, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Core {
        file: Some(path.to_owned()),
        error: valtax::ParseError::new(format!("{}:{}", e.line(), e.column()), e.to_string())
            .into(),
    })
}

fn score(
    args: &AlignArgs,
    general: &Taxonomy,
    spec: Option<&valtax::ContextSpec>,
    provider: &impl valtax::SatisfactionProvider<f64>,
    scheme: AlignmentScheme,
) -> valtax::Result<valtax::AlignmentReport> {
    match spec {
        Some(ctx) if args.full_context => {
            valtax::align_with_context(&args.entity, general, ctx, provider, scheme)
        }
        Some(ctx) => valtax::align_in_context(&args.entity, general, ctx, provider, scheme),
        None => valtax::align(&args.entity, general, provider, scheme),
    }
}

fn align(args: AlignArgs, format: Format) -> Result<Outcome, Failure> {
    let general = load_taxonomy(&args.input)?;
    let spec = args
        .context
        .as_deref()
        .map(|path| load_context(path, &args.selection))
        .transpose()?;
    let scheme = match args.scheme {
        Scheme::Mean => AlignmentScheme::MeanWeighted,
        Scheme::Path => AlignmentScheme::PathWeighted,
    };
    let (report, source) = match (&args.log, &args.sd) {
        (Some(log), _) => {
            let events = docs::parse_event_log(&read(log)?).map_err(Failure::core(log))?;
            let state = mutual_aid::ingest(&events).map_err(Failure::core(log))?;
            let provider = valtax::CommunityProvider::new(state, domain_config(&args.domain)?)
                .map_err(|error| Failure::Core { file: None, error })?;
            (
                score(&args, &general, spec.as_ref(), &provider, scheme),
                log.clone(),
            )
        }
        (None, Some(sd)) => {
            let provider = load_sd(sd)?;
            (
                score(&args, &general, spec.as_ref(), &provider, scheme),
                sd.clone(),
            )
        }
        (None, None) => return Err(Failure::Usage("one of --log or --sd is required".into())),
    };
    let report = report.map_err(|error| {
        let file = match error {
            Error::MissingSatisfaction(_) | Error::SatisfactionOutOfRange { .. } => source,
            _ => args.context.clone().unwrap_or(args.input.clone()),
        };
        Failure::Core {
            file: Some(file),
            error,
        }
    })?;
    Ok(match format {
        Format::Text => docs::render_explanation(&report, &valtax::explain(&report)),
        Format::Machine => docs::serialize_report(&report),
    }
    .into())
}

fn emit(output: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(path) => fs::write(path, output).map_err(|source| Failure::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(output.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|source| Failure::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli.command, cli.format).and_then(|outcome| {
        emit(&outcome.output, cli.output.as_deref())?;
        outcome.failure.map_or(Ok(()), Err)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
