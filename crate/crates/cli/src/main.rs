//! `sdma`: single-dataset meta-analysis from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdma_cli::config::{AnalysisConfig, Framework, InputScale, WeightSource};
use sdma_cli::ingest::read_estimates;
use sdma_cli::json_out::{emit_json, file_digest};
use sdma_cli::report::{render_text, run_analysis, Provenance};
use sdma_cli::svg::emit_forest_svg;
use sdma_cli::CliError;
use sdma_core::{ModelKind, ScaleTag};
use sdma_sim::{reference_grid, run_condition, SimCondition, SimReport};

#[derive(Parser)]
#[command(name = "sdma", version, about = "Single-dataset meta-analysis: pool many estimates computed from one shared dataset without overstating the evidence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV of estimates (columns: label,team,y,se[,weight]).
    Analyze(AnalyzeArgs),
    /// Run the Monte Carlo study comparing adjusted and standard fits.
    Simulate(SimulateArgs),
    /// Print the tool version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Common,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameworkArg {
    Classical,
    Bayes,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputScaleArg {
    /// Values are already additive (log OR, log RR, SMD, beta).
    Additive,
    /// Values are exponentiated ratios (OR, RR); logs are taken on ingest.
    Ratio,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV path.
    #[arg(long)]
    input: PathBuf,
    /// Meta-analytic model.
    #[arg(long, value_enum, default_value = "random")]
    model: ModelArg,
    /// Inference framework(s) to run.
    #[arg(long, value_enum, default_value = "both")]
    framework: FrameworkArg,
    /// Weight scheme: equal | team-split | file:PATH. Defaults to the
    /// CSV's weight column when present, else equal.
    #[arg(long)]
    weights: Option<String>,
    /// Effect-size scale: log-or | log-rr | smd | beta | generic:UI.
    #[arg(long)]
    scale: String,
    /// Whether input effect sizes arrive additive or as ratios.
    #[arg(long, value_enum, default_value = "additive")]
    input_scale: InputScaleArg,
    /// Confidence level for classical intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Derive standard errors from ci_lower/ci_upper columns.
    #[arg(long)]
    ci_to_se: bool,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write a forest plot as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Condition grid: `paper` (the full factorial reference grid) or
    /// `custom:FILE` (CSV with header k,beta,tau,n_obs).
    #[arg(long, default_value = "paper")]
    grid: String,
    /// Repetitions per condition (full-scale default; 2000 is the quick
    /// desk-scale profile the acceptance suite uses).
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    /// Reproducibility seed.
    #[arg(long, default_value_t = 1_729)]
    seed: u64,
    /// Output path; `.json` or `.csv` extension selects the format.
    #[arg(long)]
    out: PathBuf,
}

fn parse_scale(raw: &str) -> Result<ScaleTag, CliError> {
    match raw {
        "log-or" => Ok(ScaleTag::LogOr),
        "log-rr" => Ok(ScaleTag::LogRr),
        "smd" => Ok(ScaleTag::Smd),
        "beta" => Ok(ScaleTag::Beta),
        other => {
            if let Some(ui_text) = other.strip_prefix("generic:") {
                let ui = ui_text.parse::<f64>().map_err(|e| {
                    CliError::Config(format!("cannot parse unit information '{ui_text}': {e}"))
                })?;
                Ok(ScaleTag::Generic { ui })
            } else {
                Err(CliError::Config(format!(
                    "unknown scale '{other}' (expected log-or, log-rr, smd, beta, or generic:UI)"
                )))
            }
        }
    }
}

fn parse_weights(raw: Option<&str>) -> Result<WeightSource, CliError> {
    match raw {
        None => Ok(WeightSource::Auto),
        Some("equal") => Ok(WeightSource::Equal),
        Some("team-split") => Ok(WeightSource::TeamSplit),
        Some(other) => {
            if let Some(path) = other.strip_prefix("file:") {
                Ok(WeightSource::File(PathBuf::from(path)))
            } else {
                Err(CliError::Config(format!(
                    "unknown weight scheme '{other}' (expected equal, team-split, or file:PATH)"
                )))
            }
        }
    }
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let config = AnalysisConfig {
        model_kind: match args.model {
            ModelArg::Common => ModelKind::Common,
            ModelArg::Random => ModelKind::Random,
        },
        framework: match args.framework {
            FrameworkArg::Classical => Framework::Classical,
            FrameworkArg::Bayes => Framework::Bayes,
            FrameworkArg::Both => Framework::Both,
        },
        weights: parse_weights(args.weights.as_deref())?,
        scale: parse_scale(&args.scale)?,
        input_scale: match args.input_scale {
            InputScaleArg::Additive => InputScale::Additive,
            InputScaleArg::Ratio => InputScale::Ratio,
        },
        level: args.level,
        ci_to_se: args.ci_to_se,
    };
    config.validate()?;

    let data = read_estimates(&args.input, &config)?;
    let provenance = Provenance {
        tool: "sdma".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest: file_digest(&args.input)?,
        input_path: args.input.display().to_string(),
    };
    let report = run_analysis(&config, &data, provenance)?;

    print!("{}", render_text(&report));
    if let Some(path) = &args.json {
        emit_json(&report, path)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &args.svg {
        emit_forest_svg(&report, path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_custom_grid(path: &Path, reps: usize, seed: u64) -> Result<Vec<SimCondition>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(e.to_string()))?
        .clone();
    let col = |name: &'static str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(CliError::MissingColumn(name))
    };
    let (k_idx, beta_idx, tau_idx, n_idx) = (col("k")?, col("beta")?, col("tau")?, col("n_obs")?);
    let mut grid = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| CliError::ParseError {
            row: i + 2,
            column: String::new(),
            message: e.to_string(),
        })?;
        let field = |idx: usize, column: &str| -> Result<f64, CliError> {
            row.get(idx)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| CliError::ParseError {
                    row: i + 2,
                    column: column.to_string(),
                    message: e.to_string(),
                })
        };
        grid.push(SimCondition::new(
            field(k_idx, "k")? as usize,
            field(beta_idx, "beta")?,
            field(tau_idx, "tau")?,
            field(n_idx, "n_obs")? as usize,
            reps,
            seed,
        ));
    }
    if grid.is_empty() {
        return Err(CliError::Config("custom grid has no conditions".to_string()));
    }
    Ok(grid)
}

fn write_sim_csv(reports: &[SimReport], path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Config(e.to_string()))?;
    writer
        .write_record([
            "k",
            "beta",
            "tau",
            "n_obs",
            "n_reps",
            "seed",
            "method",
            "avg_se",
            "mcse_avg_se",
            "emp_se",
            "mcse_emp_se",
            "rejection_rate",
            "mcse_rejection_rate",
            "bias",
            "mcse_bias",
            "rmse",
            "mcse_rmse",
            "n_used",
            "n_failed",
        ])
        .map_err(|e| CliError::Config(e.to_string()))?;
    for report in reports {
        let c = &report.condition;
        for (method, s) in report.method_rows() {
            writer
                .write_record([
                    c.k.to_string(),
                    format!("{:.17e}", c.beta),
                    format!("{:.17e}", c.tau),
                    c.n_obs.to_string(),
                    c.n_reps.to_string(),
                    c.seed.to_string(),
                    method.to_string(),
                    format!("{:.17e}", s.avg_se),
                    format!("{:.17e}", s.mcse_avg_se),
                    format!("{:.17e}", s.emp_se),
                    format!("{:.17e}", s.mcse_emp_se),
                    format!("{:.17e}", s.rejection_rate),
                    format!("{:.17e}", s.mcse_rejection_rate),
                    format!("{:.17e}", s.bias),
                    format!("{:.17e}", s.mcse_bias),
                    format!("{:.17e}", s.rmse),
                    format!("{:.17e}", s.mcse_rmse),
                    report.n_used.to_string(),
                    report.n_failed.to_string(),
                ])
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    writer.flush().map_err(CliError::io(path.display().to_string()))
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let grid = if args.grid == "paper" {
        reference_grid(args.reps, args.seed)
    } else if let Some(path) = args.grid.strip_prefix("custom:") {
        parse_custom_grid(Path::new(path), args.reps, args.seed)?
    } else {
        return Err(CliError::Config(format!(
            "unknown grid '{}' (expected paper or custom:FILE)",
            args.grid
        )));
    };

    let mut reports = Vec::with_capacity(grid.len());
    for (i, cond) in grid.iter().enumerate() {
        eprintln!(
            "condition {}/{}: K={} beta={} tau={} ({} reps)",
            i + 1,
            grid.len(),
            cond.k,
            cond.beta,
            cond.tau,
            cond.n_reps
        );
        let report = run_condition(cond);
        println!(
            "K={:<4} beta={:<4} tau={:<4} adjusted: avg_se={:.4} emp_se={:.4} reject={:.3} | unadjusted: avg_se={:.4} emp_se={:.4} reject={:.3} | failed={}",
            cond.k,
            cond.beta,
            cond.tau,
            report.adjusted.avg_se,
            report.adjusted.emp_se,
            report.adjusted.rejection_rate,
            report.unadjusted.avg_se,
            report.unadjusted.emp_se,
            report.unadjusted.rejection_rate,
            report.n_failed
        );
        reports.push(report);
    }

    match args.out.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_sim_csv(&reports, &args.out)?,
        _ => emit_json(&reports, &args.out)?,
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Version => {
            println!("sdma {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
