use std::fmt::Write as _;
use std::path::PathBuf;

use qss_core::keyrate::PulseCount;
use qss_core::optics::ChannelModel;
use qss_core::optimize::{self, Bounds};
use qss_core::report::fmt_num;

use crate::config::{EpsArgs, Resolver};
use crate::{emit, CliError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Total pulses sent, or `inf` for the infinite-key limit.
    #[arg(long = "N")]
    n: Option<PulseCount>,
    #[arg(long)]
    ed: Option<f64>,
    #[arg(long = "Lmin")]
    l_min: Option<f64>,
    #[arg(long = "Lmax")]
    l_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "eta-d")]
    eta_d: Option<f64>,
    #[arg(long)]
    pd: Option<f64>,
    /// Error-correction inefficiency.
    #[arg(long)]
    fe: Option<f64>,
    #[command(flatten)]
    eps: EpsArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub const CSV_HEADER: &str = "L_km,mu,px,rate_per_pulse,ell,Ep_bar,EbX,N";

pub fn run(a: Args, mut r: Resolver) -> Result<(), CliError> {
    let d = ChannelModel::default();
    let pulses = r.get("N", a.n, PulseCount::Finite(1e10))?;
    let ed = r.get("ed", a.ed, d.misalignment)?;
    let alpha = r.get("alpha", a.alpha, d.alpha_db_per_km)?;
    let eta_d = r.get("eta-d", a.eta_d, d.det_efficiency)?;
    let pd = r.get("pd", a.pd, d.dark_count)?;
    let f_e = r.get("fe", a.fe, 1.16)?;
    let l_min = r.get("Lmin", a.l_min, 0.0)?;
    let l_max = r.get("Lmax", a.l_max, 260.0)?;
    let step = r.get("step", a.step, 5.0)?;
    let eps = a.eps.resolve(&mut r)?;
    let output = r.get_opt("output", a.output.map(|p| p.display().to_string()))?;
    let header = r.finish("sweep")?;

    if !(step > 0.0) || !(l_min >= 0.0) || !(l_max >= l_min) {
        return Err(CliError::Input(format!(
            "bad distance grid {l_min}..{l_max} step {step}"
        )));
    }
    let count = ((l_max - l_min) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| l_min + step * i as f64).collect();
    let template = ChannelModel::new(alpha, 0.0, eta_d, pd, ed)?;
    let points = optimize::sweep_distance(&grid, &template, f_e, pulses, &eps, &Bounds::default())?;

    let mut out = header.to_string();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in &points {
        let ell = p.ell.map_or("inf".to_owned(), |l| l.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_num(p.length_km),
            fmt_num(p.mu),
            fmt_num(p.px),
            fmt_num(p.rate_per_pulse),
            ell,
            fmt_num(p.ep_bar),
            fmt_num(p.ebx),
            pulses
        );
    }
    emit(output.as_deref().map(AsRef::as_ref), &out)
}
