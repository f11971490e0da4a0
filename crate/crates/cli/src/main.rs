// `!(x >= lo)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod analyze;
mod config;
mod kato;
mod simulate;
mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qss_core::optics::ChannelModel;
use qss_core::QssError;

use config::Resolver;

#[derive(Debug, Parser)]
#[command(
    name = "qss",
    version,
    about = "Three-party phase-encoded secret sharing: simulation and finite-key analysis"
)]
struct Cli {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run of the protocol.
    Simulate(simulate::Args),
    /// Optimized key rate versus fiber length, as CSV.
    Sweep(sweep::Args),
    /// Sift a measured count table and bound its key rate.
    Analyze(analyze::Args),
    /// Kato-inequality coefficients for one observation.
    Kato(kato::Args),
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    /// The protocol ran but produced no key or hit its round cap.
    Abort(String),
    Core(QssError),
}

impl From<QssError> for CliError {
    fn from(e: QssError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(QssError::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 3,
            CliError::Abort(_) => 2,
            CliError::Core(e) => match e {
                QssError::CapExceeded { .. }
                | QssError::AllAbort
                | QssError::ImbalanceOutOfRange { .. } => 2,
                QssError::Numerical { .. } | QssError::DegenerateGain => 4,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Abort(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

/// Channel flags shared by the commands that need a link model.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ChannelArgs {
    /// Total channel loss in dB, detectors excluded. Overrides --L.
    #[arg(long = "loss-db")]
    pub loss_db: Option<f64>,
    /// Fiber length in km.
    #[arg(long = "L")]
    pub length: Option<f64>,
    /// Fiber attenuation in dB/km.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Detector efficiency.
    #[arg(long = "eta-d")]
    pub eta_d: Option<f64>,
    /// Dark-count probability per pulse.
    #[arg(long)]
    pub pd: Option<f64>,
    /// Misalignment error rate.
    #[arg(long)]
    pub ed: Option<f64>,
}

impl ChannelArgs {
    /// Channel from flags; with neither a loss nor a length, `default_loss_db`
    /// of lumped loss is used.
    pub fn resolve(
        &self,
        r: &mut Resolver,
        default_loss_db: f64,
    ) -> Result<ChannelModel, CliError> {
        let d = ChannelModel::default();
        let eta_d = r.get("eta-d", self.eta_d, d.det_efficiency)?;
        let pd = r.get("pd", self.pd, d.dark_count)?;
        let ed = r.get("ed", self.ed, d.misalignment)?;
        let loss = r.get_opt("loss-db", self.loss_db)?;
        let length = r.get_opt("L", self.length)?;
        let alpha = r.get("alpha", self.alpha, d.alpha_db_per_km)?;
        let ch = match (loss, length) {
            (Some(loss), _) => ChannelModel::from_total_loss_db(loss, eta_d, pd, ed)?,
            (None, Some(l)) => ChannelModel::new(alpha, l, eta_d, pd, ed)?,
            (None, None) => {
                r.note("loss-db", qss_core::report::fmt_num(default_loss_db));
                ChannelModel::from_total_loss_db(default_loss_db, eta_d, pd, ed)?
            }
        };
        Ok(ch)
    }
}

/// Write to the file when given, else to stdout.
pub fn emit(out: Option<&std::path::Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let p = config::output_path(p);
            std::fs::write(&p, text)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let resolver = Resolver::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a, resolver),
        Command::Sweep(a) => sweep::run(a, resolver),
        Command::Analyze(a) => analyze::run(a, resolver),
        Command::Kato(a) => kato::run(a, resolver),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qss: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
