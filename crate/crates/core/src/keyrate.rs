//! Key rates from the channel model: asymptotic, and finite-size with expected counts.

use std::fmt;
use std::str::FromStr;

use crate::error::{QssError, Result};
use crate::finite_key::{self, EpsilonBudget, PhaseErrorReport};
use crate::optics::{self, capped_entropy, ChannelModel, SourceParams};
use crate::report::fmt_num;

/// Total number of emitted pulse pairs, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseCount {
    Finite(f64),
    Infinite,
}

impl PulseCount {
    pub fn finite(self) -> Option<f64> {
        match self {
            PulseCount::Finite(n) => Some(n),
            PulseCount::Infinite => None,
        }
    }
}

impl fmt::Display for PulseCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PulseCount::Finite(n) => f.write_str(&fmt_num(*n)),
            PulseCount::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for PulseCount {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(PulseCount::Infinite);
        }
        let n: f64 = t
            .parse()
            .map_err(|_| format!("invalid pulse count `{s}`"))?;
        if n.is_infinite() && n > 0.0 {
            Ok(PulseCount::Infinite)
        } else if n >= 1.0 {
            Ok(PulseCount::Finite(n))
        } else {
            Err(format!("pulse count must be >= 1, got `{s}`"))
        }
    }
}

/// Asymptotic rate per sifted-X pulse pair, `Q [1 - f_e H(E_b^X) - H(E_p)]`,
/// with the Y error rate equal to the X one. Zero when the coin imbalance is
/// out of range.
pub fn asymptotic_rate(mu: f64, ch: &ChannelModel, f_e: f64) -> Result<f64> {
    ch.validate()?;
    let eta = ch.transmittance();
    let q = optics::gain(mu, eta, ch.dark_count);
    if q <= 0.0 {
        return Err(QssError::DegenerateGain);
    }
    let e = optics::bit_error_x(mu, eta, ch.dark_count, ch.misalignment)?;
    let delta = match optics::coin_imbalance(mu, q) {
        Ok(d) => d,
        Err(QssError::ImbalanceOutOfRange { .. }) => return Ok(0.0),
        Err(err) => return Err(err),
    };
    let ep = optics::phase_error_from_y(e.min(1.0), delta)?;
    let r = q * (1.0 - f_e * capped_entropy(e) - capped_entropy(ep.value));
    Ok(r.max(0.0))
}

/// One point of a rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub length_km: f64,
    pub mu: f64,
    pub px: f64,
    pub pulses: PulseCount,
    /// `ell / N`, or the asymptotic per-pulse rate for infinite `N`.
    pub rate_per_pulse: f64,
    /// Key length; `None` for infinite `N`.
    pub ell: Option<u64>,
    /// Unfloored bound, used as the optimization objective.
    pub ell_real: f64,
    pub ep_bar: f64,
    pub ebx: f64,
    pub abort: bool,
}

impl RatePoint {
    /// Smooth objective: the unfloored rate clamped at zero.
    pub fn objective(&self) -> f64 {
        match self.pulses {
            PulseCount::Finite(n) => self.ell_real.max(0.0) / n,
            PulseCount::Infinite => self.rate_per_pulse,
        }
    }

    fn aborted(ch: &ChannelModel, params: &SourceParams, pulses: PulseCount, ebx: f64) -> Self {
        RatePoint {
            length_km: ch.length_km,
            mu: params.intensity,
            px: params.px,
            pulses,
            rate_per_pulse: 0.0,
            ell: pulses.finite().map(|_| 0),
            ell_real: f64::NEG_INFINITY,
            ep_bar: 1.0,
            ebx,
            abort: true,
        }
    }
}

/// Intermediate values of a finite-size evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteEvaluation {
    pub point: RatePoint,
    pub gain: f64,
    pub n_x: f64,
    pub n_y: f64,
    pub m_y: f64,
    pub phase_error: Option<PhaseErrorReport>,
}

/// Finite-size rate with expected counts `n_X = N p_x^3 Q` and
/// `n_Y = N p_x (1 - p_x)^2 Q` per mismatched set. For infinite `N` the rate
/// is `p_x^3` times [`asymptotic_rate`].
pub fn finite_rate(
    ch: &ChannelModel,
    params: &SourceParams,
    pulses: PulseCount,
    eps: &EpsilonBudget,
) -> Result<RatePoint> {
    evaluate(ch, params, pulses, eps).map(|e| e.point)
}

pub fn evaluate(
    ch: &ChannelModel,
    params: &SourceParams,
    pulses: PulseCount,
    eps: &EpsilonBudget,
) -> Result<FiniteEvaluation> {
    ch.validate()?;
    params.validate()?;
    let mu = params.intensity;
    let px = params.px;
    let eta = ch.transmittance();
    let q = optics::gain(mu, eta, ch.dark_count);
    if q <= 0.0 {
        return Err(QssError::DegenerateGain);
    }
    let ebx = optics::bit_error_x(mu, eta, ch.dark_count, ch.misalignment)?;

    let n = match pulses {
        PulseCount::Infinite => {
            let r = asymptotic_rate(mu, ch, params.ec_efficiency)? * px.powi(3);
            let point = RatePoint {
                length_km: ch.length_km,
                mu,
                px,
                pulses,
                rate_per_pulse: r,
                ell: None,
                ell_real: r,
                ep_bar: f64::NAN,
                ebx,
                abort: r <= 0.0,
            };
            return Ok(FiniteEvaluation {
                point,
                gain: q,
                n_x: f64::INFINITY,
                n_y: f64::INFINITY,
                m_y: f64::INFINITY,
                phase_error: None,
            });
        }
        PulseCount::Finite(n) if n >= 1.0 => n,
        PulseCount::Finite(n) => return Err(QssError::domain("N", n, "N >= 1")),
    };

    let py = params.py();
    let n_x = n * px.powi(3) * q;
    let n_y = n * px * py * py * q;
    if n_y < 1.0 {
        return Err(QssError::ZeroCount {
            what: "n_Y",
            value: n_y,
        });
    }
    let m_y = n_y * ebx;
    let mut out = FiniteEvaluation {
        point: RatePoint::aborted(ch, params, pulses, ebx),
        gain: q,
        n_x,
        n_y,
        m_y,
        phase_error: None,
    };
    let report = match finite_key::phase_error_upper_bound(n_x, n_y, m_y, mu, q, eps) {
        Ok(r) => r,
        Err(QssError::ImbalanceOutOfRange { .. }) => return Ok(out),
        Err(e) => return Err(e),
    };
    let len = finite_key::key_length(n_x, report.ep_bar, ebx, params.ec_efficiency, eps)?;
    out.phase_error = Some(report);
    out.point = RatePoint {
        rate_per_pulse: len.bits as f64 / n,
        ell: Some(len.bits),
        ell_real: len.real,
        ep_bar: report.ep_bar,
        abort: len.bits == 0,
        ..out.point
    };
    Ok(out)
}
