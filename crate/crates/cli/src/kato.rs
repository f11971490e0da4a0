use std::path::PathBuf;

use qss_core::finite_key::{self, Direction};
use qss_core::report::fmt_num;

use crate::config::{Resolver, Setting};
use crate::{emit, CliError};

/// Observation count: a number, or `k/2` for the symmetric point.
#[derive(Debug, Clone, PartialEq)]
pub enum Lambda {
    Value(f64),
    Half,
}

impl std::str::FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "k/2" {
            return Ok(Lambda::Half);
        }
        s.parse()
            .map(Lambda::Value)
            .map_err(|_| format!("expected a number or `k/2`: `{s}`"))
    }
}

impl Setting for Lambda {
    fn parse_setting(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn echo(&self) -> String {
        match self {
            Lambda::Value(v) => fmt_num(*v),
            Lambda::Half => "k/2".to_owned(),
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Number of trials.
    #[arg(long)]
    k: Option<f64>,
    /// Observed count, or `k/2`.
    #[arg(long)]
    lam: Option<Lambda>,
    #[arg(long)]
    eps: Option<f64>,
    /// `upper` bounds the expectation from above, `lower` from below.
    #[arg(long)]
    dir: Option<Direction>,
    /// Also print the Azuma deviation and its ratio to Kato.
    #[arg(long = "compare-azuma")]
    compare_azuma: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn run(a: Args, mut r: Resolver) -> Result<(), CliError> {
    let k = r.get("k", a.k, 1e6)?;
    let lam = r.get("lam", a.lam, Lambda::Value(100.0))?;
    let eps = r.get("eps", a.eps, 1e-10)?;
    let dir = r.get("dir", a.dir, Direction::Upper)?;
    let azuma = r.switch("compare-azuma", a.compare_azuma)?;
    let output = r.get_opt("output", a.output.map(|p| p.display().to_string()))?;
    let mut rep = r.finish("kato")?;

    let lambda = match lam {
        Lambda::Value(v) => v,
        Lambda::Half => k / 2.0,
    };
    let c = finite_key::kato_coeffs(lambda, k, eps, dir)?;
    let brute = finite_key::kato_brute_force(lambda, k, eps, dir)?;
    let a0 = finite_key::a0_deviation(k, eps)?;
    let bound = match dir {
        Direction::Upper => lambda + c.deviation,
        Direction::Lower => (lambda - c.deviation).max(0.0),
    };
    rep.num("k", k)
        .num("lambda", lambda)
        .num("eps", eps)
        .text("direction", dir)
        .num("a", c.a)
        .num("b", c.b)
        .num("deviation", c.deviation)
        .num("epsilon_back_substituted", c.epsilon)
        .num("bound", bound)
        .num("brute_force_a", brute.a)
        .num("brute_force_deviation", brute.deviation)
        .num("brute_force_delta", c.deviation - brute.deviation)
        .num("a0_deviation", a0);
    if azuma {
        let az = finite_key::azuma_deviation(k, eps)?;
        rep.num("azuma_deviation", az)
            .num("azuma_over_kato", az / c.deviation)
            .num("azuma_over_a0", az / a0);
    }
    emit(output.as_deref().map(AsRef::as_ref), &rep.to_string())
}
