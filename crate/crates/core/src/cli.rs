//! Command-line front end: `align`, `inspect`, `translate`, `sweep`,
//! `verify` and `eval`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::alignment::{
    align_schema, write_outputs, AlignOptions, AlignmentError, AlignmentMapping, MappingError,
};
use crate::digest::sha256_hex;
use crate::evalkit::{load_tasks, run_eval, EvalError, ScriptedAgent};
use crate::oracle::{run_all, Fault};
use crate::sampling::{
    ChatCompletionSampler, CountingSampler, FixtureFile, FixtureSampler, LiveSamplerConfig,
    Sampler, SamplerConfig, SamplingError, DEFAULT_ALPHA, DEFAULT_NUM_CANDIDATES,
    DEFAULT_TEMPERATURE,
};
use crate::schema::{ParseOptions, ToolSchema};
use crate::translation::{translate_stream, Namespace, StreamError, StreamOptions};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Failure = 1,
    Usage = 2,
    Parse = 3,
    Sampler = 4,
    Hard = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self {
            exit,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(Exit::Usage, message)
    }
}

impl From<AlignmentError> for CliError {
    fn from(e: AlignmentError) -> Self {
        let exit = match &e {
            AlignmentError::Config(_) | AlignmentError::Sampling(SamplingError::Config(_)) => {
                Exit::Usage
            }
            AlignmentError::Sampling(SamplingError::EmptyDescription { .. }) => Exit::Parse,
            AlignmentError::Sampling(_) => Exit::Sampler,
            AlignmentError::Mapping(MappingError::Io(_)) => Exit::Failure,
            AlignmentError::Peakedness { .. }
            | AlignmentError::Collision { .. }
            | AlignmentError::Schema(_)
            | AlignmentError::Mapping(_) => Exit::Hard,
        };
        Self::new(exit, e.to_string())
    }
}

fn mapping_error(path: &Path, e: MappingError) -> CliError {
    let exit = match e {
        MappingError::Io(_) => Exit::Usage,
        _ => Exit::Parse,
    };
    CliError::new(exit, format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "toolalign",
    version,
    about = "Align tool-schema names with the names a model generates most consistently"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rename every tool and parameter in a schema and write the mapping.
    Align(AlignArgs),
    /// Show the selection details recorded in a mapping.
    Inspect(InspectArgs),
    /// Translate a stream of tool calls, one JSON object per line.
    Translate(TranslateArgs),
    /// Align one schema over a grid of hyperparameters.
    Sweep(SweepArgs),
    /// Check the fast paths against brute-force oracles.
    Verify(VerifyArgs),
    /// Compare original and aligned schemas on scripted tasks.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Fixture file with scripted model outputs.
    #[arg(
        long,
        conflicts_with = "api_base",
        required_unless_present = "api_base"
    )]
    pub fixture: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible endpoint.
    #[arg(long)]
    pub api_base: Option<String>,
    /// Model id; required with --api-base.
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub api_key_env: String,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
}

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub out_schema: PathBuf,
    #[arg(long)]
    pub out_mapping: PathBuf,
    /// Defaults to `<out-mapping stem>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = DEFAULT_NUM_CANDIDATES)]
    pub num_candidates: usize,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concurrent sampling requests per component.
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Accept empty descriptions and non-identifier names; such components
    /// keep their names.
    #[arg(long)]
    pub permissive: bool,
    /// Recorded in the mapping metadata. Omit for reproducible output.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    pub mapping: PathBuf,
    /// Dotted component path, e.g. `Tool.param`.
    pub component: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    AlignedToOriginal,
    OriginalToAligned,
}

#[derive(Debug, Clone, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub mapping: PathBuf,
    /// Input calls; `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Direction::AlignedToOriginal)]
    pub direction: Direction,
    /// Repair unknown names within this edit distance when the match is unique.
    #[arg(long, value_name = "TAU")]
    pub fuzzy_repair: Option<f64>,
    #[arg(long)]
    pub fail_fast: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Comma-separated candidate counts.
    #[arg(long, default_value = "32")]
    pub grid_n: String,
    /// Comma-separated alpha values.
    #[arg(long, default_value = "0.2")]
    pub grid_alpha: String,
    /// Comma-separated temperatures.
    #[arg(long, default_value = "0.4")]
    pub grid_t: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long)]
    pub permissive: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InjectedFault {
    OffByOne,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Defaults to a clock-derived seed, which is printed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random string pairs for the distance oracles.
    #[arg(long, default_value_t = 1000)]
    pub cases: usize,
    /// Random candidate multisets for the peakedness oracles.
    #[arg(long, default_value_t = 200)]
    pub set_cases: usize,
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<InjectedFault>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Original schema.
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    /// Scripted agent responses.
    #[arg(long)]
    pub script: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub permissive: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Reproducibility record written next to the outputs of every command
/// that writes files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    /// Input path to `sha256:` digest of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_time_ms: u64,
    pub sampler_requests: usize,
}

impl RunManifest {
    fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::new(Exit::Failure, format!("{}: {e}", path.display())))
    }
}

fn default_manifest(next_to: &Path) -> PathBuf {
    let stem = next_to
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    next_to.with_file_name(format!("{stem}.manifest.json"))
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", sha256_hex(bytes))
}

fn load_schema(path: &Path, permissive: bool) -> Result<(ToolSchema, Vec<u8>), CliError> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", path.display())))?;
    let schema = ToolSchema::parse_with(&text, ParseOptions { permissive })
        .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", path.display())))?;
    Ok((schema, bytes))
}

fn load_mapping(path: &Path) -> Result<AlignmentMapping, CliError> {
    AlignmentMapping::load(path).map_err(|e| mapping_error(path, e))
}

/// A constructed sampler plus what identifies it in run records.
struct SamplerSetup {
    sampler: Box<dyn Sampler>,
    model_id: String,
    input: Option<(PathBuf, Vec<u8>)>,
}

fn build_sampler(args: &SamplerArgs, seed: u64) -> Result<SamplerSetup, CliError> {
    match (&args.fixture, &args.api_base) {
        (Some(path), None) => {
            let bytes = read_input(path)?;
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", path.display())))?;
            let file = FixtureFile::from_json(text)
                .map_err(|e| CliError::new(Exit::Parse, format!("{}: {e}", path.display())))?;
            Ok(SamplerSetup {
                sampler: Box::new(FixtureSampler::new(file, seed)),
                model_id: args.model.clone().unwrap_or_else(|| "fixture".into()),
                input: Some((path.clone(), bytes)),
            })
        }
        (None, Some(base)) => {
            let model = args
                .model
                .clone()
                .ok_or_else(|| CliError::usage("--model is required with --api-base"))?;
            let mut cfg = LiveSamplerConfig::new(base.clone(), model.clone());
            cfg.api_key = std::env::var(&args.api_key_env)
                .ok()
                .filter(|k| !k.is_empty());
            if cfg.api_key.is_none() {
                eprintln!(
                    "warning: ${} is not set; sending requests without a key",
                    args.api_key_env
                );
            }
            let sampler = ChatCompletionSampler::new(cfg)
                .map_err(|e| CliError::new(Exit::Sampler, e.to_string()))?;
            Ok(SamplerSetup {
                sampler: Box::new(sampler),
                model_id: model,
                input: None,
            })
        }
        _ => Err(CliError::usage(
            "give exactly one of --fixture or --api-base",
        )),
    }
}

/// Parses, runs and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Usage as i32
            } else {
                Exit::Ok as i32
            };
        }
    };
    let command: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match cli.command {
        Command::Align(a) => cmd_align(&a, command),
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Translate(a) => cmd_translate(&a, command),
        Command::Sweep(a) => cmd_sweep(&a, command),
        Command::Verify(a) => cmd_verify(&a),
        Command::Eval(a) => cmd_eval(&a, command),
    };
    match result {
        Ok(exit) => exit as i32,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.exit as i32
        }
    }
}

pub fn cmd_align(args: &AlignArgs, command: Vec<String>) -> Result<Exit, CliError> {
    let started = Instant::now();
    let (schema, schema_bytes) = load_schema(&args.schema, args.permissive)?;
    let setup = build_sampler(&args.sampler, args.seed)?;
    let config = SamplerConfig {
        model_id: setup.model_id.clone(),
        num_candidates: args.num_candidates,
        temperature: args.temperature,
        alpha: args.alpha,
        rng_seed: args.seed,
        max_retries: args.sampler.max_retries,
        request_parallelism: args.parallelism,
    };
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let counting = CountingSampler::new(&*setup.sampler);
    let output = align_schema(
        &schema,
        &config,
        &counting,
        &AlignOptions {
            timestamp: args.timestamp.clone(),
        },
    )?;
    write_outputs(&output, &args.out_schema, &args.out_mapping)
        .map_err(|e| CliError::new(Exit::Failure, e.to_string()))?;

    let mut inputs = BTreeMap::new();
    inputs.insert(args.schema.display().to_string(), digest(&schema_bytes));
    if let Some((path, bytes)) = &setup.input {
        inputs.insert(path.display().to_string(), digest(bytes));
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: json!({
            "sampler": config,
            "permissive": args.permissive,
            "timestamp": args.timestamp,
        }),
        inputs,
        outputs: vec![
            args.out_schema.display().to_string(),
            args.out_mapping.display().to_string(),
        ],
        wall_time_ms: started.elapsed().as_millis() as u64,
        sampler_requests: counting.requests(),
    };
    manifest.write(
        &args
            .manifest
            .clone()
            .unwrap_or_else(|| default_manifest(&args.out_mapping)),
    )?;

    let renamed = output
        .mapping
        .records
        .iter()
        .filter(|r| r.original_name != r.aligned_name)
        .count();
    eprintln!(
        "aligned {} components ({renamed} renamed) with {} sampler requests",
        output.mapping.records.len(),
        counting.requests()
    );
    Ok(Exit::Ok)
}

/// Plain-text view of every record, or of one.
pub fn render_inspect(
    mapping: &AlignmentMapping,
    component: Option<&str>,
) -> Result<String, CliError> {
    let records: Vec<_> = match component {
        None => mapping.records.iter().collect(),
        Some(path) => match mapping.record(path) {
            Some(r) => vec![r],
            None => {
                let valid: Vec<String> = mapping.records.iter().map(|r| r.path()).collect();
                let listing = if valid.is_empty() {
                    "(none)".to_string()
                } else {
                    valid.join(", ")
                };
                return Err(CliError::usage(format!(
                    "unknown component path `{path}`; valid paths: {listing}"
                )));
            }
        },
    };
    let mut out = String::new();
    let m = &mapping.metadata;
    let count = mapping.records.len();
    let _ = writeln!(out, "{count} record{}", if count == 1 { "" } else { "s" });
    let _ = writeln!(
        out,
        "model {}  N={}  t={}  alpha={}  seed={}",
        m.model_id, m.num_candidates, m.temperature, m.alpha, m.seed
    );
    for r in records {
        let _ = writeln!(out);
        let _ = writeln!(out, "{} [{}]", r.path(), r.component.kind);
        let _ = writeln!(
            out,
            "  {} -> {}  (collision resolution: {})",
            r.original_name,
            r.aligned_name,
            serde_json::to_value(r.collision_resolution)
                .expect("enum serializes")
                .as_str()
                .unwrap_or_default()
        );
        let Some(report) = &r.peakedness_report else {
            let _ = writeln!(out, "  not aligned; original name kept");
            continue;
        };
        let _ = writeln!(
            out,
            "  candidates {}  l_max {}  tau {}  reference {}",
            report.candidates.len(),
            report.max_length,
            trim_float(report.threshold),
            report.reference
        );
        let mut rows = report.ranked();
        rows.sort_by(|a, b| {
            b.occurrences
                .cmp(&a.occurrences)
                .then(b.peakedness.cmp(&a.peakedness))
                .then_with(|| a.name.cmp(&b.name))
        });
        let _ = writeln!(
            out,
            "  {:>5} {:>5} {:>6}  candidate",
            "freq", "phi", "d_ref"
        );
        for row in &rows {
            let _ = writeln!(
                out,
                "  {:>5} {:>5} {:>6}  {}",
                row.occurrences, row.peakedness, row.reference_distance, row.name
            );
        }
        let phi = report.selected_peakedness();
        let top = &rows[0];
        if top.name != report.selected
            && top.occurrences
                > rows
                    .iter()
                    .find(|x| x.name == report.selected)
                    .map_or(0, |x| x.occurrences)
        {
            let _ = writeln!(
                out,
                "  selects {} (peakedness={phi}) rather than the most frequent {} ({} occurrences)",
                report.selected, top.name, top.occurrences
            );
        } else {
            let _ = writeln!(out, "  selects {} (peakedness={phi})", report.selected);
        }
        let argmax: Vec<&str> = report.argmax_names().into_iter().collect();
        let _ = writeln!(out, "  argmax set: {}", argmax.join(", "));
        let yes_no = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(
            out,
            "  tie broken by reference: {}  lexicographically: {}",
            yes_no(report.tie_broken_by_reference),
            yes_no(report.tie_broken_lexicographically)
        );
    }
    Ok(out)
}

fn trim_float(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<Exit, CliError> {
    let mapping = load_mapping(&args.mapping)?;
    print!("{}", render_inspect(&mapping, args.component.as_deref())?);
    Ok(Exit::Ok)
}

pub fn cmd_translate(args: &TranslateArgs, command: Vec<String>) -> Result<Exit, CliError> {
    let started = Instant::now();
    if let Some(tau) = args.fuzzy_repair {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
        if !(tau >= 0.0) {
            return Err(CliError::usage(format!(
                "--fuzzy-repair must be non-negative, got {tau}"
            )));
        }
    }
    let mapping_bytes = read_input(&args.mapping)?;
    let mapping = load_mapping(&args.mapping)?;
    let index = mapping
        .index()
        .map_err(|e| mapping_error(&args.mapping, e))?;
    let options = StreamOptions {
        from: match args.direction {
            Direction::AlignedToOriginal => Namespace::Aligned,
            Direction::OriginalToAligned => Namespace::Original,
        },
        fuzzy: args.fuzzy_repair,
        fail_fast: args.fail_fast,
    };

    let input: Box<dyn io::BufRead> = if args.input.as_os_str() == "-" {
        Box::new(io::stdin().lock())
    } else {
        let file = std::fs::File::open(&args.input)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.input.display())))?;
        Box::new(BufReader::new(file))
    };
    let output: Box<dyn Write> = match &args.output {
        None => Box::new(io::stdout().lock()),
        Some(path) => Box::new(io::BufWriter::new(std::fs::File::create(path).map_err(
            |e| CliError::new(Exit::Failure, format!("{}: {e}", path.display())),
        )?)),
    };
    let result = translate_stream(input, output, &index, options);
    if let Some(path) = &args.output {
        let mut inputs = BTreeMap::new();
        inputs.insert(args.mapping.display().to_string(), digest(&mapping_bytes));
        if args.input.as_os_str() != "-" {
            inputs.insert(
                args.input.display().to_string(),
                digest(&read_input(&args.input)?),
            );
        }
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command,
            config: json!({
                "direction": format!("{:?}", args.direction),
                "fuzzy_repair": args.fuzzy_repair,
                "fail_fast": args.fail_fast,
            }),
            inputs,
            outputs: vec![path.display().to_string()],
            wall_time_ms: started.elapsed().as_millis() as u64,
            sampler_requests: 0,
        }
        .write(
            &args
                .manifest
                .clone()
                .unwrap_or_else(|| default_manifest(path)),
        )?;
    }
    match result {
        Ok(stats) => {
            eprintln!(
                "translated {} calls ({} repaired), {} errors",
                stats.translated, stats.repaired, stats.errors
            );
            Ok(Exit::Ok)
        }
        Err(StreamError::Io(e)) => Err(CliError::new(Exit::Failure, e.to_string())),
        Err(StreamError::Failed {
            line,
            category,
            message,
        }) => {
            let exit = if category == "malformed_call" {
                Exit::Parse
            } else {
                Exit::Hard
            };
            Err(CliError::new(exit, format!("line {line}: {message}")))
        }
    }
}

fn parse_grid<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let values: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| CliError::usage(format!("--{flag}: `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::usage(format!("--{flag}: empty grid")));
    }
    Ok(values)
}

/// One grid cell's outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub num_candidates: usize,
    pub alpha: f64,
    pub temperature: f64,
    pub directory: String,
    /// Component path to aligned name.
    pub aligned: BTreeMap<String, String>,
    /// Component path to the peakedness of its selection.
    pub selected_peakedness: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub component: String,
    pub num_candidates: usize,
    pub temperature: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub phi_low: usize,
    pub phi_high: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub components: usize,
    /// Components whose aligned name differs between at least two cells.
    pub unstable_components: Vec<String>,
    /// Fraction of components whose aligned name changes across cells.
    pub instability: f64,
    /// Selected peakedness never decreases as alpha grows with N and t fixed.
    pub alpha_monotone: bool,
    pub monotonicity_violations: Vec<MonotonicityViolation>,
}

impl SweepSummary {
    pub fn from_cells(cells: Vec<SweepCell>) -> Self {
        let mut names: BTreeMap<&str, std::collections::BTreeSet<&str>> = BTreeMap::new();
        for cell in &cells {
            for (path, name) in &cell.aligned {
                names.entry(path).or_default().insert(name);
            }
        }
        let unstable_components: Vec<String> = names
            .iter()
            .filter(|(_, v)| v.len() > 1)
            .map(|(k, _)| k.to_string())
            .collect();
        let components = names.len();
        let instability = if components == 0 {
            0.0
        } else {
            unstable_components.len() as f64 / components as f64
        };

        let mut groups: BTreeMap<(usize, u64), Vec<&SweepCell>> = BTreeMap::new();
        for cell in &cells {
            groups
                .entry((cell.num_candidates, cell.temperature.to_bits()))
                .or_default()
                .push(cell);
        }
        let mut violations = Vec::new();
        for group in groups.values_mut() {
            group.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
            for pair in group.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                for (path, &phi_low) in &lo.selected_peakedness {
                    if let Some(&phi_high) = hi.selected_peakedness.get(path) {
                        if phi_high < phi_low {
                            violations.push(MonotonicityViolation {
                                component: path.clone(),
                                num_candidates: lo.num_candidates,
                                temperature: lo.temperature,
                                alpha_low: lo.alpha,
                                alpha_high: hi.alpha,
                                phi_low,
                                phi_high,
                            });
                        }
                    }
                }
            }
        }
        Self {
            alpha_monotone: violations.is_empty(),
            monotonicity_violations: violations,
            cells,
            components,
            unstable_components,
            instability,
        }
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>5} {:>6} {:>6}  {:>8}  directory",
            "N", "alpha", "t", "renamed"
        );
        for c in &self.cells {
            let renamed = c
                .aligned
                .iter()
                .filter(|(path, name)| path.rsplit('.').next() != Some(name.as_str()))
                .count();
            let _ = writeln!(
                out,
                "{:>5} {:>6} {:>6}  {:>8}  {}",
                c.num_candidates, c.alpha, c.temperature, renamed, c.directory
            );
        }
        let _ = writeln!(
            out,
            "unstable components: {} of {} ({:.3})",
            self.unstable_components.len(),
            self.components,
            self.instability
        );
        let _ = writeln!(
            out,
            "peakedness monotone in alpha: {}",
            if self.alpha_monotone { "yes" } else { "no" }
        );
        out
    }
}

pub fn cmd_sweep(args: &SweepArgs, command: Vec<String>) -> Result<Exit, CliError> {
    let started = Instant::now();
    let grid_n: Vec<usize> = parse_grid("grid-n", &args.grid_n)?;
    let grid_alpha: Vec<f64> = parse_grid("grid-alpha", &args.grid_alpha)?;
    let grid_t: Vec<f64> = parse_grid("grid-t", &args.grid_t)?;
    let (schema, schema_bytes) = load_schema(&args.schema, args.permissive)?;
    let setup = build_sampler(&args.sampler, args.seed)?;
    let counting = CountingSampler::new(&*setup.sampler);

    let mut configs = Vec::new();
    for &n in &grid_n {
        for &alpha in &grid_alpha {
            for &t in &grid_t {
                let config = SamplerConfig {
                    model_id: setup.model_id.clone(),
                    num_candidates: n,
                    temperature: t,
                    alpha,
                    rng_seed: args.seed,
                    max_retries: args.sampler.max_retries,
                    request_parallelism: args.parallelism,
                };
                config.validate().map_err(|e| {
                    CliError::usage(format!("grid cell N={n} alpha={alpha} t={t}: {e}"))
                })?;
                configs.push(config);
            }
        }
    }

    let mut cells = Vec::with_capacity(configs.len());
    let mut outputs = Vec::new();
    for config in &configs {
        let name = format!(
            "n{}_a{}_t{}",
            config.num_candidates, config.alpha, config.temperature
        );
        let dir = args.out_dir.join(&name);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::new(Exit::Failure, format!("{}: {e}", dir.display())))?;
        let output = align_schema(&schema, config, &counting, &AlignOptions::default())?;
        let (schema_path, mapping_path) =
            (dir.join("aligned_schema.json"), dir.join("mapping.json"));
        write_outputs(&output, &schema_path, &mapping_path)
            .map_err(|e| CliError::new(Exit::Failure, e.to_string()))?;
        outputs.push(schema_path.display().to_string());
        outputs.push(mapping_path.display().to_string());
        cells.push(SweepCell {
            num_candidates: config.num_candidates,
            alpha: config.alpha,
            temperature: config.temperature,
            directory: name,
            aligned: output
                .mapping
                .records
                .iter()
                .map(|r| (r.path(), r.aligned_name.clone()))
                .collect(),
            selected_peakedness: output
                .mapping
                .records
                .iter()
                .filter_map(|r| {
                    r.peakedness_report
                        .as_ref()
                        .map(|p| (r.path(), p.selected_peakedness()))
                })
                .collect(),
        });
    }

    let summary = SweepSummary::from_cells(cells);
    let summary_path = args.out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&summary_path, text)
        .map_err(|e| CliError::new(Exit::Failure, format!("{}: {e}", summary_path.display())))?;
    outputs.push(summary_path.display().to_string());
    print!("{}", summary.table());

    let mut inputs = BTreeMap::new();
    inputs.insert(args.schema.display().to_string(), digest(&schema_bytes));
    if let Some((path, bytes)) = &setup.input {
        inputs.insert(path.display().to_string(), digest(bytes));
    }
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: json!({ "cells": configs, "permissive": args.permissive }),
        inputs,
        outputs,
        wall_time_ms: started.elapsed().as_millis() as u64,
        sampler_requests: counting.requests(),
    }
    .write(&args.out_dir.join("manifest.json"))?;
    Ok(Exit::Ok)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Exit, CliError> {
    let seed = args.seed.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
    });
    let fault = match args.inject_fault {
        None => Fault::None,
        Some(InjectedFault::OffByOne) => Fault::OffByOneDistance,
    };
    println!("seed {seed}");
    let outcomes = run_all(seed, args.cases, args.set_cases, fault);
    let mut failed = 0;
    for o in &outcomes {
        if o.passed() {
            println!("ok    {} ({} cases)", o.name, o.cases);
        } else {
            failed += 1;
            println!("FAIL  {} ({} of {} cases)", o.name, o.mismatches, o.cases);
            if let Some(first) = &o.first_failure {
                println!("      first: {first}");
            }
        }
    }
    if failed == 0 {
        println!("all oracles passed");
        Ok(Exit::Ok)
    } else {
        println!("{failed} oracle(s) failed; rerun with --seed {seed}");
        Ok(Exit::Failure)
    }
}

pub fn cmd_eval(args: &EvalArgs, command: Vec<String>) -> Result<Exit, CliError> {
    let started = Instant::now();
    let (schema, schema_bytes) = load_schema(&args.schema, args.permissive)?;
    let mapping = load_mapping(&args.mapping)?;
    let parse = |path: &Path, e: EvalError| {
        let exit = match e {
            EvalError::Io(_) => Exit::Usage,
            _ => Exit::Parse,
        };
        CliError::new(exit, format!("{}: {e}", path.display()))
    };
    let tasks = load_tasks(&args.tasks).map_err(|e| parse(&args.tasks, e))?;
    let agent = ScriptedAgent::load(&args.script).map_err(|e| parse(&args.script, e))?;
    let report = run_eval(&tasks, &schema, &mapping, &agent).map_err(|e| {
        let exit = match e {
            EvalError::ScriptExhausted { .. } | EvalError::Agent { .. } => Exit::Sampler,
            EvalError::Io(_) => Exit::Failure,
            _ => Exit::Hard,
        };
        CliError::new(exit, e.to_string())
    })?;
    print!("{}", report.summary_table());
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_json())
            .map_err(|e| CliError::new(Exit::Failure, format!("{}: {e}", out.display())))?;
        let mut inputs = BTreeMap::new();
        inputs.insert(args.schema.display().to_string(), digest(&schema_bytes));
        for p in [&args.mapping, &args.tasks, &args.script] {
            inputs.insert(p.display().to_string(), digest(&read_input(p)?));
        }
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command,
            config: json!({ "permissive": args.permissive }),
            inputs,
            outputs: vec![out.display().to_string()],
            wall_time_ms: started.elapsed().as_millis() as u64,
            sampler_requests: 0,
        }
        .write(
            &args
                .manifest
                .clone()
                .unwrap_or_else(|| default_manifest(out)),
        )?;
    }
    Ok(Exit::Ok)
}
