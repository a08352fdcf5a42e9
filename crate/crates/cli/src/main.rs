use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use coherent_ui::error::UiError;
use coherent_ui::experiment::{
    run_experiment, run_verify, CheckStatus, ExperimentConfig, Protocol,
};
use serde_json::{json, Value};

/// Experiment runner for unambiguous identification of coherent states.
#[derive(Parser, Debug)]
#[command(name = "ui-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug)]
struct Opts {
    /// JSON experiment config; protocol defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Monte Carlo shots per point (0 = closed forms only).
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// RNG seed; overrides the config.
    #[arg(long, global = true, env = "UI_LAB_SEED")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Two references, one unknown copy.
    TwoRef,
    /// M references compared against a split unknown.
    MultiRef,
    /// Weak implementation: N diluted rounds.
    Weak,
    /// Sequential rounds with reference recovery.
    RecoveryRounds,
    /// Two rounds testing the same unknown.
    SameUnknown,
    /// Recovery against splitting the references up front.
    SplittingCompare,
    /// Phase-keyed rates under Gaussian noise.
    NoiseRates,
    /// Two-detector optimum over the coupling.
    OptimalitySweep,
    /// Gaussian averaging integrals: closed form, recursion, quadrature.
    GaussianIntegralCheck,
    /// Runs the invariant suite.
    Verify,
}

impl Command {
    fn protocol(self) -> Option<Protocol> {
        Some(match self {
            Command::TwoRef => Protocol::TwoRef,
            Command::MultiRef => Protocol::MultiRef,
            Command::Weak => Protocol::Weak,
            Command::RecoveryRounds => Protocol::RecoveryRounds,
            Command::SameUnknown => Protocol::SameUnknown,
            Command::SplittingCompare => Protocol::SplittingCompare,
            Command::NoiseRates => Protocol::NoiseRates,
            Command::OptimalitySweep => Protocol::OptimalitySweep,
            Command::GaussianIntegralCheck => Protocol::GaussianIntegralCheck,
            Command::Verify => return None,
        })
    }
}

struct Failure {
    code: u8,
    body: Value,
}

impl From<UiError> for Failure {
    fn from(e: UiError) -> Self {
        let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
        if let UiError::Config { key, .. } = &e {
            body["key"] = json!(key);
        }
        let code = match e {
            UiError::Config { .. } => 2,
            UiError::Io(_) => 3,
            _ => 1,
        };
        Failure { code, body }
    }
}

fn load_config(protocol: Protocol, opts: &Opts) -> Result<ExperimentConfig, UiError> {
    let mut cfg = match &opts.config {
        None => ExperimentConfig::default_for(protocol),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| UiError::Io(format!("{}: {e}", path.display())))?;
            let mut doc: Value = serde_json::from_str(&text)
                .map_err(|e| UiError::config("<document>", e.to_string()))?;
            let obj = doc
                .as_object_mut()
                .ok_or_else(|| UiError::config("<document>", "expected a JSON object"))?;
            obj.entry("protocol")
                .or_insert_with(|| json!(protocol.name()));
            let cfg = ExperimentConfig::from_json(&doc.to_string())?;
            if cfg.protocol != protocol {
                return Err(UiError::config(
                    "protocol",
                    format!(
                        "config is for `{}` but the subcommand is `{protocol}`",
                        cfg.protocol
                    ),
                ));
            }
            cfg
        }
    };
    if let Some(shots) = opts.shots {
        cfg.shots = shots;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(opts: &Opts, text: &str) -> Result<(), UiError> {
    match &opts.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| UiError::Io(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| UiError::Io(e.to_string())),
    }
}

fn verify(opts: &Opts) -> Result<bool, Failure> {
    let results = run_verify();
    let text = match opts.format {
        Format::Json => serde_json::to_string_pretty(&results).expect("results serialise") + "\n",
        Format::Csv => {
            let mut out = String::from("check,status,detail\n");
            for r in &results {
                let status = serde_json::to_value(r.status).expect("status serialises");
                out += &format!(
                    "{},{},\"{}\"\n",
                    r.name,
                    status.as_str().unwrap_or_default(),
                    r.detail.replace('"', "\"\"")
                );
            }
            out
        }
    };
    emit(opts, &text)?;
    Ok(results.iter().all(|r| r.status != CheckStatus::Fail))
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let Some(protocol) = cli.command.protocol() else {
        return Ok(if verify(&cli.opts)? {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        });
    };
    let cfg = load_config(protocol, &cli.opts)?;
    let table = run_experiment(&cfg)?;
    let text = match cli.opts.format {
        Format::Csv => table.to_csv()?,
        Format::Json => table.to_json(),
    };
    emit(&cli.opts, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn report(f: Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": f.body }));
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return report(Failure {
                code: 2,
                body: json!({ "kind": "UsageError", "message": e.kind().to_string(), "detail": e.to_string().trim() }),
            })
        }
    };
    run(&cli).unwrap_or_else(report)
}
