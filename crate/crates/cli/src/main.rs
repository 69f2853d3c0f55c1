//! `asf-lab` command-line front end.
//!
//! Verdicts and summaries go to stdout as JSON; diagnostics go to stderr.
//! Exit codes: 0 success (any verdict), 2 incommensurate parameters,
//! 3 configuration error, 4 I/O error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use asf_lab::model::as_integer;
use asf_lab::sweep::{self, HeatmapMetric, ResultTable, SweepConfig, SweepSpec};
use asf_lab::verdict::{verdict_at_size, TrendThresholds};
use asf_lab::{
    build_cyclic_model, conjugate_exponent, painless_oracle, scale_study, GaborTriple, LabError, ScaleParams,
    Tolerances,
};
use clap::{Args, Parser, Subcommand};

const EXIT_INCOMMENSURATE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "asf-lab",
    version,
    about = "Approximate Schauder frame laboratory for Gabor-type pairs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify one (abc, alpha beta rho) tuple at exponent p
    Check(CheckArgs),
    /// Evaluate a parameter grid and write a CSV table
    Sweep(SweepArgs),
    /// Classify one tuple at several grid sizes and label the trend
    ScaleStudy(ScaleArgs),
    /// Covering counts and exact bounds for painless indicator windows
    Oracle(OracleArgs),
    /// Render a PGM heatmap from a sweep table
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// Grid spacing h
    #[arg(long, conflicts_with = "size")]
    grid_res: Option<f64>,
    /// Number of grid points L (h = period / L)
    #[arg(long)]
    size: Option<usize>,
    /// Period of the cyclic model
    #[arg(long)]
    period: f64,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Lebesgue exponent, 1 < p < inf
    #[arg(long)]
    p: f64,
    /// Synthesis triple a,b,c
    #[arg(long, value_parser = parse_triple)]
    synth: GaborTriple,
    /// Analysis triple alpha,beta,rho (defaults to the synthesis triple)
    #[arg(long, value_parser = parse_triple)]
    anal: Option<GaborTriple>,
    #[command(flatten)]
    model: ModelArgs,
    /// Seed for the estimator start vectors
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative lower/upper cutoff for NOT_ASF
    #[arg(long)]
    eps_sing: Option<f64>,
    /// Condition cap for ASF
    #[arg(long)]
    kappa_max: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Sweep spec (TOML, or JSON with a .json extension)
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Worker threads
    #[arg(long, env = "ASF_LAB_THREADS", default_value_t = 1)]
    workers: usize,
    /// Reuse rows already present in --out
    #[arg(long)]
    resume: bool,
    /// Print a JSON summary of the table to stdout
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Lebesgue exponent, 1 < p < inf
    #[arg(long)]
    p: f64,
    /// Synthesis triple a,b,c
    #[arg(long, value_parser = parse_triple)]
    synth: GaborTriple,
    /// Analysis triple alpha,beta,rho (defaults to the synthesis triple)
    #[arg(long, value_parser = parse_triple)]
    anal: Option<GaborTriple>,
    /// Period of the cyclic model
    #[arg(long)]
    period: f64,
    /// Strictly increasing grid sizes, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Seed for the estimator start vectors
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Synthesis triple a,b,c with c <= 1/b
    #[arg(long, value_parser = parse_triple)]
    synth: GaborTriple,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Sweep CSV
    #[arg(long = "in")]
    input: PathBuf,
    /// Horizontal axis
    #[arg(long)]
    x: String,
    /// Vertical axis (increasing downward)
    #[arg(long)]
    y: String,
    /// classification or condition
    #[arg(long, default_value = "classification")]
    metric: String,
    /// Output PGM path
    #[arg(long)]
    out: PathBuf,
    /// Hold another axis at a value, as name=value (repeatable)
    #[arg(long = "fix", value_parser = parse_fix)]
    fix: Vec<(String, f64)>,
    /// Condition number mapped to white
    #[arg(long, default_value_t = 1e8)]
    kappa_max: f64,
}

fn parse_triple(s: &str) -> Result<GaborTriple, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => GaborTriple::new(a, b, c).map_err(|e| e.to_string()),
        _ => Err(format!("expected three comma-separated numbers, got {s:?}")),
    }
}

fn parse_fix(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v = value.trim().parse::<f64>().map_err(|e| format!("{value:?}: {e}"))?;
    Ok((name.trim().to_string(), v))
}

#[derive(Debug)]
enum Failure {
    Lab(LabError),
    Config(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lab(LabError::Incommensurate(_)) => EXIT_INCOMMENSURATE,
            Failure::Lab(LabError::Io(_)) => EXIT_IO,
            _ => EXIT_CONFIG,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lab(e) => write!(f, "{e}"),
            Failure::Config(m) => write!(f, "{m}"),
        }
    }
}

fn grid_size(model: &ModelArgs) -> Result<usize, Failure> {
    match (model.grid_res, model.size) {
        (_, Some(0)) => Err(Failure::Config("--size must be positive".into())),
        (_, Some(l)) => Ok(l),
        (Some(h), None) => match as_integer(model.period / h) {
            Some(l) if l > 0 => Ok(l as usize),
            _ => Err(LabError::Incommensurate(format!(
                "period {} is not a multiple of grid spacing {h}",
                model.period
            ))
            .into()),
        },
        (None, None) => Err(Failure::Config("one of --grid-res or --size is required".into())),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    conjugate_exponent(args.p)?;
    let len = grid_size(&args.model)?;
    let params = ScaleParams {
        synth: args.synth,
        anal: args.anal.unwrap_or(args.synth),
        period: args.model.period,
    };
    let mut tol = Tolerances::default();
    tol.estimator.seed = args.seed;
    tol.eps_sing = args.eps_sing.unwrap_or(tol.eps_sing);
    tol.kappa_max = args.kappa_max.unwrap_or(tol.kappa_max);
    let verdict = verdict_at_size(&params, len, args.p, &tol)?;
    print_json(&verdict);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let cfg = SweepConfig::load(&args.spec)?;
    let spec = SweepSpec::from_config(&cfg)?;
    let table = if args.resume && args.out.exists() {
        let partial = ResultTable::load(&args.out)?;
        sweep::resume_sweep(&spec, &partial, args.workers)?
    } else {
        sweep::run_sweep(&spec, args.workers)?
    };
    sweep::write_atomic(&args.out, table.to_csv_string().as_bytes())?;
    eprintln!("wrote {} rows to {}", table.rows.len(), args.out.display());
    if args.json {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for row in &table.rows {
            let key = match &row.verdict {
                Some(v) => v.classification.as_str().to_string(),
                None => row.status.clone(),
            };
            *counts.entry(key).or_default() += 1;
        }
        print_json(&serde_json::json!({
            "spec": table.spec_hash,
            "rows": table.rows.len(),
            "counts": counts,
        }));
    }
    Ok(())
}

fn cmd_scale_study(args: ScaleArgs) -> Result<(), Failure> {
    conjugate_exponent(args.p)?;
    let params = ScaleParams {
        synth: args.synth,
        anal: args.anal.unwrap_or(args.synth),
        period: args.period,
    };
    let mut tol = Tolerances::default();
    tol.estimator.seed = args.seed;
    let study = scale_study(&params, args.p, &args.sizes, &tol, &TrendThresholds::default())?;
    print_json(&study);
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    let len = grid_size(&args.model)?;
    let h = args.model.period / len as f64;
    let model = build_cyclic_model(&args.synth, &args.synth, h, args.model.period)?;
    let t = args.synth;
    let oracle = painless_oracle(t.shift, t.mod_step, t.win_len, &model)?;
    print_json(&oracle);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let metric: HeatmapMetric = args.metric.parse()?;
    let table = ResultTable::load(&args.input)?;
    let fixed: BTreeMap<String, f64> = args.fix.into_iter().collect();
    let pgm = sweep::emit_heatmap(&table, &args.x, &args.y, metric, &fixed, args.kappa_max)?;
    sweep::write_atomic(&args.out, &pgm)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ScaleStudy(a) => cmd_scale_study(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("asf-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
