use std::fmt::Write as _;
use std::path::PathBuf;

use clap::ValueEnum;
use qss_core::exp_data::{self, AnalysisConfig, CountRow, GainSource};
use qss_core::optics;
use qss_core::report::{fmt_num, Report};

use crate::config::{Resolver, Setting};
use crate::{emit, ChannelArgs, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Gain {
    /// Gain estimated from the table's sifted detections.
    Observed,
    /// Model gain from the channel flags.
    Analytic,
}

impl Setting for Gain {
    fn parse_setting(s: &str) -> Result<Self, String> {
        Gain::from_str(s, true)
    }
    fn echo(&self) -> String {
        match self {
            Gain::Observed => "observed",
            Gain::Analytic => "analytic",
        }
        .to_owned()
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Count tables (phase_a,phase_b,phase_c,spd1,spd2).
    files: Vec<PathBuf>,
    /// Analyze the nine bundled tables.
    #[arg(long)]
    bundled: bool,
    /// Total pulses behind each table.
    #[arg(long = "N")]
    n: Option<f64>,
    /// Intensity; read from the file name when omitted.
    #[arg(long)]
    mu: Option<f64>,
    /// X-basis probability; read from the file name when omitted.
    #[arg(long)]
    px: Option<f64>,
    #[arg(long, value_enum)]
    gain: Option<Gain>,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Pulse repetition rate in Hz, for the bit/s figure.
    #[arg(long = "rep-rate")]
    rep_rate: Option<f64>,
    #[arg(long)]
    fe: Option<f64>,
    #[command(flatten)]
    eps: crate::config::EpsArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

struct Row {
    name: String,
    px: f64,
    mu: f64,
    summary: exp_data::ExperimentSummary,
    key: exp_data::KeyRateReport,
}

pub const TABLE_HEADER: &str = "file,px,mu,EbX_pct,EbY_pct,Ep_pct,n_x,n_y,skr_per_pulse,skr_bps";

pub fn run(a: Args, mut r: Resolver) -> Result<(), CliError> {
    let bundled = r.switch("bundled", a.bundled)?;
    let pulses = r.get("N", a.n, 5e10)?;
    let mu = r.get_opt("mu", a.mu)?;
    let px = r.get_opt("px", a.px)?;
    let gain = r.get("gain", a.gain, Gain::Observed)?;
    let channel = match gain {
        Gain::Analytic => Some(a.channel.resolve(&mut r, 30.0)?),
        Gain::Observed => None,
    };
    let rep_rate = r.get("rep-rate", a.rep_rate, 1e8)?;
    let f_e = r.get("fe", a.fe, 1.16)?;
    let eps = a.eps.resolve(&mut r)?;
    let output = r.get_opt("output", a.output.map(|p| p.display().to_string()))?;
    let header = r.finish("analyze")?;

    let mut inputs: Vec<(String, Vec<CountRow>)> = Vec::new();
    if bundled {
        for (name, text) in exp_data::FIXTURES {
            inputs.push((name.to_owned(), exp_data::parse_counts(text.as_bytes())?));
        }
    }
    for path in &a.files {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        let rows = exp_data::parse_counts(file)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        inputs.push((path.display().to_string(), rows));
    }
    if inputs.is_empty() {
        return Err(CliError::Input(
            "no count tables given (pass files or --bundled)".into(),
        ));
    }

    let mut rows = Vec::new();
    for (name, counts) in inputs {
        let meta = exp_data::fixture_meta(&name);
        let (Some(mu), Some(px)) = (mu.or(meta.map(|m| m.mu)), px.or(meta.map(|m| m.px))) else {
            return Err(CliError::Input(format!(
                "{name}: pass --mu and --px (not encoded in the file name)"
            )));
        };
        let summary =
            exp_data::tally_sets(&counts).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        let mut cfg = AnalysisConfig::new(mu, px);
        cfg.pulses = pulses;
        cfg.ec_efficiency = f_e;
        cfg.eps = eps;
        cfg.rep_rate_hz = rep_rate;
        if let Some(ch) = &channel {
            cfg.gain = GainSource::Fixed(optics::gain(mu, ch.transmittance(), ch.dark_count));
        }
        let key = exp_data::experiment_skr(&summary, &cfg)?;
        rows.push(Row {
            name,
            px,
            mu,
            summary,
            key,
        });
    }

    let mut out = header.to_string();
    for row in &rows {
        let mut rep = Report::new();
        rep.text("file", &row.name)
            .num("px", row.px)
            .num("mu", row.mu);
        row.summary.write_into(&mut rep);
        row.key.write_into(&mut rep);
        out.push('\n');
        out.push_str(&rep.to_string());
    }
    if rows.len() > 1 {
        out.push('\n');
        out.push_str(TABLE_HEADER);
        out.push('\n');
        for row in &rows {
            let s = &row.summary;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                row.name,
                fmt_num(row.px),
                fmt_num(row.mu),
                fmt_num(100.0 * s.ebx),
                fmt_num(100.0 * s.eby),
                fmt_num(100.0 * row.key.phase_error.ep_bar),
                s.n_x,
                s.n_y,
                fmt_num(row.key.skr_per_pulse),
                fmt_num(row.key.skr_bps)
            );
        }
    }
    emit(output.as_deref().map(AsRef::as_ref), &out)?;

    let empty: Vec<&str> = rows
        .iter()
        .filter(|r| r.key.key.bits == 0)
        .map(|r| r.name.as_str())
        .collect();
    if !empty.is_empty() {
        return Err(CliError::Abort(format!(
            "zero key length for {}",
            empty.join(", ")
        )));
    }
    Ok(())
}
