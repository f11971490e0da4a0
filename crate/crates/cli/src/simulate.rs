use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use qss_core::optics::{self, SourceParams};
use qss_core::protocol::{
    self, RawKeys, RoundRecord, RunOutcome, SimOptions, StopRule, Thresholds,
};
use qss_core::report::Report;
use qss_core::QssError;

use crate::config::{self, Count, Resolver};
use crate::{emit, ChannelArgs, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    px: Option<f64>,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Run exactly this many rounds.
    #[arg(long, conflicts_with_all = ["nx", "nybc", "nyac"])]
    rounds: Option<Count>,
    /// Stop once X holds this many detections (with --nybc/--nyac).
    #[arg(long)]
    nx: Option<Count>,
    #[arg(long)]
    nybc: Option<Count>,
    #[arg(long)]
    nyac: Option<Count>,
    /// RNG seed; required, here or in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-round CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Ideal detectors: no dark counts, no misalignment.
    #[arg(long)]
    noiseless: bool,
    /// Round cap for threshold runs.
    #[arg(long)]
    cap: Option<Count>,
    #[arg(long = "block-size")]
    block_size: Option<Count>,
    #[arg(long)]
    output: Option<PathBuf>,
}

const TRACE_HEADER: &str = "i,s_a,s_b,basis_a,basis_b,basis_c,outcome,s_c,set_tag\n";

fn trace_line(w: &mut impl Write, r: &RoundRecord) -> std::io::Result<()> {
    let sc = r.s_c.map_or(String::new(), |c| c.to_string());
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        r.index,
        r.s_a,
        r.s_b,
        r.basis_a,
        r.basis_b,
        r.basis_c,
        r.outcome.label(),
        sc,
        r.tag.label()
    )
}

pub fn run(a: Args, mut r: Resolver) -> Result<(), CliError> {
    let mu = r.get("mu", a.mu, 9e-4)?;
    let px = r.get("px", a.px, 0.9)?;
    let noiseless = r.switch("noiseless", a.noiseless)?;
    let mut ch = a.channel.resolve(&mut r, 30.0)?;
    if noiseless {
        ch.dark_count = 0.0;
        ch.misalignment = 0.0;
    }
    let seed = r.get_opt("seed", a.seed.map(Count))?.map(|c| c.0);
    let Some(seed) = seed else {
        return Err(CliError::Input("--seed is required".into()));
    };
    let rounds = r.get_opt("rounds", a.rounds)?;
    let nx = r.get_opt("nx", a.nx)?;
    let nybc = r.get_opt("nybc", a.nybc)?;
    let nyac = r.get_opt("nyac", a.nyac)?;
    let stop = match (rounds, nx.or(nybc).or(nyac)) {
        (Some(_), Some(_)) => {
            return Err(CliError::Input(
                "--rounds excludes --nx/--nybc/--nyac".into(),
            ))
        }
        (Some(n), None) => StopRule::Rounds(n.0),
        (None, Some(_)) => StopRule::Thresholds(Thresholds {
            n_x: nx.map_or(0, |c| c.0),
            n_ybc: nybc.map_or(0, |c| c.0),
            n_yac: nyac.map_or(0, |c| c.0),
        }),
        (None, None) => {
            r.note("rounds", "10000000");
            StopRule::Rounds(10_000_000)
        }
    };
    let mut opts = SimOptions::default();
    if let Some(c) = r.get_opt("cap", a.cap)? {
        opts.round_cap = Some(c.0);
    }
    opts.block_size = r.get("block-size", a.block_size, Count(opts.block_size))?.0;
    if opts.block_size == 0 {
        return Err(CliError::Input("--block-size must be positive".into()));
    }
    let trace = r.get_opt("trace", a.trace.map(|p| p.display().to_string()))?;
    let output = r.get_opt("output", a.output.map(|p| p.display().to_string()))?;
    let mut report = r.finish("simulate")?;

    let params = SourceParams::new(mu, px, 1.16)?;
    ch.validate()?;

    let outcome = match &trace {
        Some(path) => {
            let path = config::output_path(path.as_ref());
            let file = File::create(&path)
                .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            w.write_all(TRACE_HEADER.as_bytes())?;
            let mut sink = |rec: &RoundRecord| trace_line(&mut w, rec);
            let res = protocol::execute(&params, &ch, stop, seed, &opts, Some(&mut sink));
            w.flush()?;
            res
        }
        None => protocol::execute(&params, &ch, stop, seed, &opts, None),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(QssError::CapExceeded { cap, partial }) => {
            // Report what was gathered before failing.
            describe(&mut report, &partial, &params, &ch)?;
            report.flag("cap_exceeded", true);
            emit(output.as_deref().map(AsRef::as_ref), &report.to_string())?;
            return Err(CliError::Abort(format!(
                "round cap {cap} reached before thresholds were met"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    describe(&mut report, &outcome, &params, &ch)?;
    emit(output.as_deref().map(AsRef::as_ref), &report.to_string())
}

fn describe(
    report: &mut Report,
    run: &RunOutcome,
    params: &SourceParams,
    ch: &qss_core::optics::ChannelModel,
) -> Result<(), CliError> {
    let t = &run.tallies;
    let eta = ch.transmittance();
    let q = optics::gain(params.intensity, eta, ch.dark_count);
    let px = params.px;
    let sifted = px.powi(3) + 2.0 * px * params.py().powi(2);
    report
        .int("rounds", run.rounds_used)
        .num("transmittance", eta)
        .int("n_x", t.n_x)
        .int("m_x", t.m_x)
        .int("n_ybc", t.n_ybc)
        .int("m_ybc", t.m_ybc)
        .int("n_yac", t.n_yac)
        .int("m_yac", t.m_yac);
    let rate = |e: Option<f64>| e.unwrap_or(f64::NAN);
    report
        .num("ebx", rate(t.error_rate_x()))
        .num("eb_ybc", rate(t.error_rate_ybc()))
        .num("eb_yac", rate(t.error_rate_yac()));
    let gain_emp = (t.n_x + t.n_ybc + t.n_yac) as f64 / (sifted * run.rounds_used as f64);
    report
        .num("gain_empirical", gain_emp)
        .num("gain_analytic", q);
    let ebx = if q > 0.0 {
        optics::bit_error_x(params.intensity, eta, ch.dark_count, ch.misalignment)?
    } else {
        f64::NAN
    };
    report.num("ebx_analytic", ebx);
    for (name, set) in [
        ("x", &run.raw_keys.x),
        ("ybc", &run.raw_keys.ybc),
        ("yac", &run.raw_keys.yac),
    ] {
        let (ka, kb, kc) = RawKeys::columns(set);
        let ok = protocol::verify_correlation(&ka, &kb, &kc)?;
        let mismatches = set.iter().filter(|k| k.a ^ k.b != k.c).count() as u64;
        report
            .flag(&format!("correlated_{name}"), ok)
            .int(&format!("mismatches_{name}"), mismatches);
    }
    Ok(())
}
