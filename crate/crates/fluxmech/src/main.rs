//! Command-line front end. Exit codes: 0 success, 1 analysis failure, 2 usage
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fluxmech::commands::{self, CommandContext, OutputFormat};
use fluxmech::config;

#[derive(Parser)]
#[command(
    name = "fluxmech",
    version,
    about = "Analysis chain for SQUID-cavity readout of a levitated superconducting sphere"
)]
struct Cli {
    /// Config file (key-value text or JSON); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifact files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for every random element of a run.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Format of tabular artifacts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a complex reflection trace (CSV: frequency_Hz,re_S21,im_S21).
    FitS21 {
        #[arg(long)]
        input: PathBuf,
    },
    /// Evaluate or fit the flux tuning curve and its responsivity.
    TuningCurve {
        /// Measured curve (CSV: phi_Phi0,f_r_GHz); the config model is used
        /// when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Welch spectrum of a demodulated I/Q trace.
    Psd {
        #[arg(long)]
        input: PathBuf,
        /// Welch segment length in samples (default: a tenth of the record).
        #[arg(long)]
        segment: Option<usize>,
    },
    /// Full calibration chain: detector units → flux → frequency → displacement.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Electromechanical coupling from a calibrated trace.
    Coupling {
        #[arg(long)]
        input: PathBuf,
    },
    /// Export the geometric coupling factors over a lateral grid.
    Fluxmap {
        #[arg(long, default_value_t = 600.0)]
        span_um: f64,
        #[arg(long, default_value_t = 10.0)]
        pitch_um: f64,
    },
    /// Invert measured flux sensitivities for the pickup placement.
    LocatePul {
        /// Prior on the vertical separation (μm); defaults to the configured
        /// loop offset.
        #[arg(long)]
        dz_prior_um: Option<f64>,
        /// Stage-1 sensitivity-ratio tolerance (fraction).
        #[arg(long, default_value_t = 0.10)]
        ratio_tol: f64,
        /// Scan pitch (μm).
        #[arg(long, default_value_t = 5.0)]
        pitch_um: f64,
    },
    /// Noise, efficiency and cooperativity budget.
    Budget,
    /// Apply the cooperativity improvement ledger.
    Project,
    /// Generate a deterministic synthetic trace.
    Synth {
        /// Trace output path (default: <out>/trace.levi).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 120.0)]
        duration_s: f64,
    },
    /// Run the golden-number suite; nonzero exit on any failure.
    Selfcheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match config::load_config(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(err) => return fail(err),
    };
    let ctx = CommandContext {
        config,
        out_dir: cli.out.clone(),
        seed: cli.seed,
        format: match cli.format {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        },
    };

    if let Command::Selfcheck = cli.command {
        let outcomes = fluxmech::selfcheck::run();
        let mut failures = 0;
        for o in &outcomes {
            let tag = if o.passed { "PASS" } else { "FAIL" };
            println!("{tag}  {:<28} {}", o.name, o.detail);
            if !o.passed {
                failures += 1;
            }
        }
        println!("{} checks, {} failed", outcomes.len(), failures);
        return if failures == 0 {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        };
    }

    let result = match &cli.command {
        Command::FitS21 { input } => commands::fit_s21(&ctx, input),
        Command::TuningCurve { input } => commands::tuning_curve(&ctx, input.as_deref()),
        Command::Psd { input, segment } => commands::psd(&ctx, input, *segment),
        Command::Calibrate { input } => commands::calibrate(&ctx, input),
        Command::Coupling { input } => commands::coupling(&ctx, input),
        Command::Fluxmap { span_um, pitch_um } => {
            commands::fluxmap(&ctx, span_um * 1e-6, pitch_um * 1e-6)
        }
        Command::LocatePul {
            dz_prior_um,
            ratio_tol,
            pitch_um,
        } => commands::locate_pul(
            &ctx,
            dz_prior_um.map(|v| v * 1e-6),
            *ratio_tol,
            pitch_um * 1e-6,
        ),
        Command::Budget => commands::budget_cmd(&ctx),
        Command::Project => commands::project(&ctx),
        Command::Synth { output, duration_s } => {
            commands::synth(&ctx, output.as_deref(), *duration_s)
        }
        Command::Selfcheck => unreachable!(),
    };

    match result {
        Ok(report) => {
            println!("{}", report.to_json_pretty());
            ExitCode::SUCCESS
        }
        Err(err) => fail(err),
    }
}

fn fail(err: fluxmech::Error) -> ExitCode {
    let body = serde_json::json!({
        "error": {
            "message": err.to_string(),
        }
    });
    println!("{}", serde_json::to_string_pretty(&body).expect("error serializes"));
    ExitCode::from(err.exit_code() as u8)
}
