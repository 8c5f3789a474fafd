use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use nand_core::datasets::{
    convert_external, generate_dataset, load_canonical, load_pairs, write_jsonl, DatasetError, MappingProfile,
    RulebaseSpec,
};
use nand_core::engine::{EngineError, GammaMode, Mode, DEFAULT_MIN_SAMPLES};
use nand_core::label::{Label, WorldAssumption};
use nand_core::negator::negate;
use nand_core::par::Execution;
use nand_core::pipeline::{
    build_scorer, evaluate, make_pairs, write_outputs, CalibrationSource, EvalConfig, Job, PipelineError, ScorerSpec,
    Scoring,
};
use nand_core::prompting::{builtin_template, builtin_templates, load_templates, PromptTemplate, Verbalizer};
use nand_core::scoring::{BiasedOracleConfig, RemoteConfig, ScoreCache};

const EXIT_CONFIG: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_CALIBRATION: u8 = 4;
const EXIT_SCORER: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(name = "nand", version, about = "Negation augmenting and debiasing harness for prompt-based NLI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic rulebase dataset and its negation pairs.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a public dataset release into canonical records.
    Convert {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        profile: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Negate a statement, or every statement of a canonical file.
    Negate {
        /// Statement to negate when no data file is given.
        text: Option<String>,
        #[arg(long, requires = "out")]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the logically negative bias and the ND offset.
    Calibrate(RunArgs),
    /// Score, predict and report.
    Evaluate(RunArgs),
    /// Re-run an evaluation from a saved run configuration.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
enum ScorerKind {
    Oracle,
    Remote,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Template id (A1..A6), `all`, or a JSONL file of templates. Repeatable.
    #[arg(long, default_value = "A1", value_delimiter = ',')]
    template: Vec<String>,
    /// Verbalizer JSON file; the default maps E/C/N to true/false/unknown.
    #[arg(long)]
    verbalizer: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "oracle")]
    scorer: ScorerKind,
    #[arg(long, env = "NAND_SCORER_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long, default_value = "baseline")]
    mode: Mode,
    #[arg(long)]
    gamma: Option<GammaMode>,
    #[arg(long, default_value = "owa")]
    assumption: WorldAssumption,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Oracle bias preset: bert, roberta or unbiased.
    #[arg(long, default_value = "bert")]
    oracle_bias: String,
    #[arg(long)]
    oracle_margin: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    oracle_noise: f64,
    /// Calibration report from an earlier `calibrate` run.
    #[arg(long, conflicts_with = "calibration_pairs")]
    calibration: Option<PathBuf>,
    /// Held-out pairs to estimate the bias from.
    #[arg(long)]
    calibration_pairs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    min_samples: usize,
    #[arg(long, default_value = "[MASK]")]
    mask: String,
}

/// Everything needed to reproduce an evaluation, written as `run_config.json`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
struct RunConfig {
    command: String,
    data: Option<PathBuf>,
    pairs: Option<PathBuf>,
    templates: Vec<PromptTemplate>,
    verbalizer: Verbalizer,
    scorer: ScorerSpec,
    mode: Mode,
    gamma: GammaMode,
    assumption: WorldAssumption,
    seed: u64,
    cache: Option<PathBuf>,
    calibration: Option<PathBuf>,
    calibration_pairs: Option<PathBuf>,
    min_samples: usize,
    mask: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure { code, message: message.to_string() }
    }
}

fn dataset_failure(e: DatasetError) -> Failure {
    let code = match e {
        DatasetError::Io { .. } => EXIT_IO,
        DatasetError::GenerationRetryExceeded(_)
        | DatasetError::InconsistencyDetected(_)
        | DatasetError::UnstratifiedNegation
        | DatasetError::NegativeLiteralUnderCwa(_)
        | DatasetError::TooLargeForEnumeration(_) => EXIT_GENERATION,
        _ => EXIT_CONFIG,
    };
    Failure::new(code, e)
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Config(_) | PipelineError::Prompt(_) => Failure::new(EXIT_CONFIG, e),
        PipelineError::Engine(
            EngineError::InsufficientCalibrationSamples { .. }
            | EngineError::MissingCalibration
            | EngineError::NdUnderCwa,
        ) => Failure::new(EXIT_CALIBRATION, e),
        PipelineError::Engine(_) => Failure::new(EXIT_CONFIG, e),
        PipelineError::Scorer { .. } => Failure::new(EXIT_SCORER, e),
        PipelineError::Cache(_) | PipelineError::Analytics(_) => Failure::new(EXIT_IO, e),
        PipelineError::Dataset(d) => dataset_failure(d),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn cmd_generate(spec_path: &Path, out: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| io_failure(spec_path, e))?;
    let spec: RulebaseSpec =
        serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", spec_path.display())))?;
    spec.check().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let generated = generate_dataset(&spec, Execution::Parallel).map_err(dataset_failure)?;
    let instances: Vec<_> = generated.into_iter().map(|g| g.instance).collect();
    let pairs = make_pairs(&instances, Execution::Parallel);
    create_dir(out)?;
    write_jsonl(&out.join("instances.jsonl"), &instances).map_err(dataset_failure)?;
    write_jsonl(&out.join("pairs.jsonl"), &pairs.pairs).map_err(dataset_failure)?;
    let count = |l: Label| instances.iter().filter(|i| i.gold == l).count();
    println!(
        "generated {} instances (E {}, C {}, N {}), {} pairs, {} unsupported",
        instances.len(),
        count(Label::Entailment),
        count(Label::Contradiction),
        count(Label::Neutral),
        pairs.pairs.len(),
        pairs.unsupported.len()
    );
    if !pairs.unsupported.is_empty() {
        return Err(Failure::new(EXIT_GENERATION, "generated statements fell outside the negator grammar"));
    }
    Ok(())
}

fn cmd_convert(data: &Path, profile: &str, out: &Path) -> Result<(), Failure> {
    let profile: MappingProfile = profile.parse().map_err(dataset_failure)?;
    let report = convert_external(data, profile).map_err(dataset_failure)?;
    let pairs = make_pairs(&report.instances, Execution::Parallel);
    create_dir(out)?;
    write_jsonl(&out.join("instances.jsonl"), &report.instances).map_err(dataset_failure)?;
    write_jsonl(&out.join("pairs.jsonl"), &pairs.pairs).map_err(dataset_failure)?;
    println!(
        "converted {} instances, {} pairs, {} unsupported",
        report.instances.len(),
        pairs.pairs.len(),
        report.unsupported_statements
    );
    Ok(())
}

fn cmd_negate(text: Option<&str>, data: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    match (text, data, out) {
        (Some(t), None, _) => {
            let neg = negate(t).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
            println!("{neg}");
            Ok(())
        }
        (None, Some(data), Some(out)) => {
            let instances = load_canonical(data, None).map_err(dataset_failure)?;
            let pairs = make_pairs(&instances, Execution::Parallel);
            create_dir(out)?;
            write_jsonl(&out.join("pairs.jsonl"), &pairs.pairs).map_err(dataset_failure)?;
            for (id, reason) in &pairs.unsupported {
                log::warn!("{id}: {reason}");
            }
            println!("{} pairs, {} unsupported", pairs.pairs.len(), pairs.unsupported.len());
            Ok(())
        }
        _ => Err(Failure::new(EXIT_CONFIG, "give either a statement or --data with --out")),
    }
}

fn resolve_templates(specs: &[String]) -> Result<Vec<PromptTemplate>, Failure> {
    let mut out = Vec::new();
    for s in specs {
        if s == "all" {
            out.extend(builtin_templates());
        } else if Path::new(s).is_file() {
            out.extend(load_templates(Path::new(s)).map_err(|e| Failure::new(EXIT_CONFIG, e))?);
        } else {
            out.push(builtin_template(s).map_err(|e| Failure::new(EXIT_CONFIG, e))?);
        }
    }
    Ok(out)
}

fn resolve(args: &RunArgs, command: &str) -> Result<RunConfig, Failure> {
    let verbalizer = match &args.verbalizer {
        Some(p) => Verbalizer::load(p).map_err(|e| Failure::new(EXIT_CONFIG, e))?,
        None => Verbalizer::default(),
    };
    let scorer = match args.scorer {
        ScorerKind::Oracle => {
            let base = BiasedOracleConfig::by_name(&args.oracle_bias).ok_or_else(|| {
                Failure::new(EXIT_CONFIG, format!("unknown oracle bias preset {:?}", args.oracle_bias))
            })?;
            let cfg = BiasedOracleConfig {
                margin: args.oracle_margin.unwrap_or(base.margin),
                label_noise: args.oracle_noise,
                seed: args.seed,
                assumption: args.assumption,
                ..base
            };
            cfg.check().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
            ScorerSpec::Oracle(cfg)
        }
        ScorerKind::Remote => {
            let endpoint = args
                .endpoint
                .as_deref()
                .ok_or_else(|| Failure::new(EXIT_CONFIG, "--scorer remote needs --endpoint or NAND_SCORER_ENDPOINT"))?;
            let model_id = args.model_id.as_deref().unwrap_or("default");
            ScorerSpec::Remote(RemoteConfig::new(endpoint, model_id))
        }
    };
    let gamma = args.gamma.unwrap_or(if args.mode == Mode::Nand { GammaMode::Estimated } else { GammaMode::None });
    Ok(RunConfig {
        command: command.to_string(),
        data: args.data.clone(),
        pairs: args.pairs.clone(),
        templates: resolve_templates(&args.template)?,
        verbalizer,
        scorer,
        mode: args.mode,
        gamma,
        assumption: args.assumption,
        seed: args.seed,
        cache: args.cache.clone(),
        calibration: args.calibration.clone(),
        calibration_pairs: args.calibration_pairs.clone(),
        min_samples: args.min_samples,
        mask: args.mask.clone(),
    })
}

fn open_cache(path: Option<&Path>) -> Result<ScoreCache, Failure> {
    match path {
        Some(p) => {
            let cache = ScoreCache::open(p).map_err(|e| io_failure(p, e))?;
            if cache.corrupt_records() > 0 {
                log::warn!("{} corrupt cache records skipped", cache.corrupt_records());
            }
            Ok(cache)
        }
        None => Ok(ScoreCache::in_memory()),
    }
}

fn cmd_calibrate(args: &RunArgs) -> Result<(), Failure> {
    let rc = resolve(args, "calibrate")?;
    if rc.assumption == WorldAssumption::Cwa {
        return Err(Failure::new(
            EXIT_CALIBRATION,
            "negation debiasing is undefined under the closed world: no Neutral items to calibrate on",
        ));
    }
    let pairs_path = rc.pairs.as_deref().ok_or_else(|| Failure::new(EXIT_CONFIG, "calibrate needs --pairs"))?;
    let pairs = load_pairs(pairs_path).map_err(dataset_failure)?;
    let cache = open_cache(rc.cache.as_deref())?;
    let jobs: Vec<Job> = pairs.iter().flat_map(|p| [Job::original(&p.original), Job::negation(p)]).collect();
    let scorer = build_scorer(&rc.scorer, &rc.verbalizer, &rc.templates, &jobs).map_err(pipeline_failure)?;
    let scoring = Scoring {
        scorer: scorer.as_ref(),
        cache: &cache,
        verbalizer: &rc.verbalizer,
        assumption: rc.assumption,
        mask: &rc.mask,
        exec: Execution::Parallel,
    };
    let mut reports = BTreeMap::new();
    for t in &rc.templates {
        let report = scoring.calibrate(t, &pairs, rc.min_samples).map_err(pipeline_failure)?;
        println!(
            "{}: mu1 {:.4} sigma1 {:.4} mu2 {:.4} sigma2 {:.4} gamma {:.4}",
            t.id, report.mu1, report.sigma1, report.mu2, report.sigma2, report.gamma
        );
        reports.insert(t.id.clone(), report);
    }
    create_dir(&args.out)?;
    write_json(&args.out.join("calibration.json"), &reports)?;
    write_json(&args.out.join("run_config.json"), &rc)
}

fn run_evaluation(rc: &RunConfig, out: &Path) -> Result<(), Failure> {
    let data = rc.data.as_deref().ok_or_else(|| Failure::new(EXIT_CONFIG, "evaluate needs --data"))?;
    let instances = load_canonical(data, Some(rc.assumption)).map_err(dataset_failure)?;
    let pairs = match &rc.pairs {
        Some(p) => Some(load_pairs(p).map_err(dataset_failure)?),
        None => None,
    };
    let calibration = match (&rc.calibration, &rc.calibration_pairs) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let reports = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            CalibrationSource::Reports(reports)
        }
        (None, Some(path)) => CalibrationSource::Pairs(load_pairs(path).map_err(dataset_failure)?),
        (None, None) => CalibrationSource::EvaluationPairs,
    };
    let cfg = EvalConfig {
        assumption: rc.assumption,
        mode: rc.mode,
        gamma: rc.gamma,
        templates: rc.templates.clone(),
        verbalizer: rc.verbalizer.clone(),
        scorer: rc.scorer.clone(),
        mask: rc.mask.clone(),
        execution: Execution::Parallel,
        min_calibration_samples: rc.min_samples,
    };
    let cache = open_cache(rc.cache.as_deref())?;
    create_dir(out)?;
    write_json(&out.join("run_config.json"), rc)?;
    match evaluate(&cfg, &instances, pairs.as_deref(), calibration, &cache) {
        Ok(output) => {
            write_outputs(out, &output, None).map_err(pipeline_failure)?;
            if let Some(report) = &output.report {
                for m in &report.modes {
                    println!("{}: accuracy {:.4} over {} predictions", m.mode, m.accuracy, m.n);
                }
                if report.unsupported_negation > 0 {
                    println!("unsupported_negation: {}", report.unsupported_negation);
                }
            }
            for (t, r) in &output.calibration {
                println!("{t}: gamma {:.4}", r.gamma);
            }
            Ok(())
        }
        Err(PipelineError::Scorer { source, partial }) => {
            let message = format!("scorer failed: {source}");
            if let Some(partial) = partial {
                write_outputs(out, &partial, Some(&message)).map_err(pipeline_failure)?;
            }
            Err(Failure::new(EXIT_SCORER, message))
        }
        Err(e) => Err(pipeline_failure(e)),
    }
}

fn cmd_replay(config: &Path, out: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(config).map_err(|e| io_failure(config, e))?;
    let rc: RunConfig =
        serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", config.display())))?;
    if rc.command != "evaluate" {
        return Err(Failure::new(EXIT_CONFIG, format!("cannot replay a {} run", rc.command)));
    }
    run_evaluation(&rc, out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { spec, out } => cmd_generate(&spec, &out),
        Command::Convert { data, profile, out } => cmd_convert(&data, &profile, &out),
        Command::Negate { text, data, out } => cmd_negate(text.as_deref(), data.as_deref(), out.as_deref()),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Evaluate(args) => {
            let rc = resolve(&args, "evaluate")?;
            run_evaluation(&rc, &args.out)
        }
        Command::Replay { config, out } => cmd_replay(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
