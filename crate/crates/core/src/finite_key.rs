//! Concentration bounds and the finite-size phase-error / key-length pipeline.
//!
//! Kato's inequality bounds the gap between a sum of bounded random variables
//! `Lambda` over `k` rounds and the sum of their conditional expectations by
//! `[b + a (2 Lambda / k - 1)] sqrt(k)`, for any `b >= |a|`, with failure
//! probability `exp[-2 (b^2 - a^2) / (1 +- 4a / (3 sqrt k))^2]`. The `+` sign
//! belongs to the upper bound on the expectation, `-` to the lower one.

use std::fmt;

use crate::error::{QssError, Result};
use crate::optics::{self, capped_entropy};
use crate::report::Report;

/// Failure probabilities of the individual protocol steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBudget {
    /// Correctness (error verification).
    pub eps_c: f64,
    /// Privacy amplification.
    pub eps_pa: f64,
    /// Observed-to-expected Kato conversion.
    pub eps_a: f64,
    /// Expected-to-observed conversion.
    pub eps_b: f64,
}

impl Default for EpsilonBudget {
    fn default() -> Self {
        EpsilonBudget {
            eps_c: 1e-10,
            eps_pa: 1e-10,
            eps_a: 1e-10,
            eps_b: 1e-10,
        }
    }
}

impl EpsilonBudget {
    pub fn new(eps_c: f64, eps_pa: f64, eps_a: f64, eps_b: f64) -> Result<Self> {
        let b = EpsilonBudget {
            eps_c,
            eps_pa,
            eps_a,
            eps_b,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_c", self.eps_c),
            ("eps_PA", self.eps_pa),
            ("eps_a", self.eps_a),
            ("eps_b", self.eps_b),
        ] {
            check_eps(name, v)?;
        }
        Ok(())
    }

    /// Failure probability of the phase-error estimate.
    pub fn eps(&self) -> f64 {
        self.eps_a + self.eps_b
    }

    pub fn eps_s(&self) -> f64 {
        self.eps().sqrt() + self.eps_pa
    }

    pub fn write_into(&self, r: &mut Report) {
        r.num("eps_c", self.eps_c)
            .num("eps_PA", self.eps_pa)
            .num("eps_a", self.eps_a)
            .num("eps_b", self.eps_b)
            .num("eps", self.eps())
            .num("eps_s", self.eps_s());
    }
}

fn check_eps(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(QssError::domain(name, v, "(0, 1)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Upper bound on the expectation given an observation (or on the
    /// observation given the expectation).
    Upper,
    Lower,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Upper => 1.0,
            Direction::Lower => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "upper" => Ok(Direction::Upper),
            "lower" => Ok(Direction::Lower),
            _ => Err(format!("direction must be `upper` or `lower`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KatoCoefficients {
    pub a: f64,
    pub b: f64,
    /// `[b + a (2 Lambda / k - 1)] sqrt(k)`.
    pub deviation: f64,
    /// Failure probability implied by `(a, b)`.
    pub epsilon: f64,
    pub direction: Direction,
}

fn check_kato_inputs(lambda: f64, k: f64, eps: f64) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(QssError::domain("k", k, "k >= 1"));
    }
    if !(0.0..=k).contains(&lambda) {
        return Err(QssError::domain("Lambda_k", lambda, "0 <= Lambda_k <= k"));
    }
    check_eps("eps", eps)
}

/// `b` that meets failure probability `eps` for a given `a`.
pub fn kato_b(a: f64, k: f64, eps: f64, dir: Direction) -> f64 {
    let le = eps.ln();
    let sk = k.sqrt();
    let s = dir.sign();
    (18.0 * a * a * k - (16.0 * a * a + s * 24.0 * a * sk + 9.0 * k) * le).sqrt()
        / (3.0 * (2.0 * k).sqrt())
}

pub fn kato_deviation(a: f64, b: f64, lambda: f64, k: f64) -> f64 {
    (b + a * (2.0 * lambda / k - 1.0)) * k.sqrt()
}

/// Failure probability of the bound with coefficients `(a, b)`.
pub fn kato_failure_probability(a: f64, b: f64, k: f64, dir: Direction) -> f64 {
    let scale = 1.0 + dir.sign() * 4.0 * a / (3.0 * k.sqrt());
    (-2.0 * (b * b - a * a) / (scale * scale)).exp()
}

/// Closed-form optimal `a` for the upper direction.
fn optimal_a_upper(lambda: f64, k: f64, eps: f64) -> Result<f64> {
    let le = eps.ln();
    let sk = k.sqrt();
    let spread = lambda * (k - lambda);
    let inner = 9.0 * spread - 2.0 * k * le;
    let disc = -k * k * le * inner;
    if !(disc >= 0.0) || !disc.is_finite() {
        return Err(QssError::Numerical {
            context: "Kato coefficients",
            detail: format!("discriminant {disc} < 0 at Lambda = {lambda}, k = {k}, eps = {eps}"),
        });
    }
    let num = 3.0
        * (72.0 * sk * spread * le - 16.0 * k * sk * le * le
            + 9.0 * std::f64::consts::SQRT_2 * (k - 2.0 * lambda) * disc.sqrt());
    let den = 4.0 * (9.0 * k - 8.0 * le) * inner;
    let a = num / den;
    if !a.is_finite() {
        return Err(QssError::Numerical {
            context: "Kato coefficients",
            detail: format!("non-finite a at Lambda = {lambda}, k = {k}, eps = {eps}"),
        });
    }
    Ok(a)
}

/// Coefficients minimizing the deviation of the bound in direction `dir`.
///
/// The lower direction follows from the upper one by `xi -> 1 - xi`, which
/// maps `Lambda` to `k - Lambda` and `a` to `-a`.
pub fn kato_coeffs(lambda: f64, k: f64, eps: f64, dir: Direction) -> Result<KatoCoefficients> {
    check_kato_inputs(lambda, k, eps)?;
    let a = match dir {
        Direction::Upper => optimal_a_upper(lambda, k, eps)?,
        Direction::Lower => -optimal_a_upper(k - lambda, k, eps)?,
    };
    let b = kato_b(a, k, eps, dir);
    Ok(KatoCoefficients {
        a,
        b,
        // exact minimum is 0 at the boundary (Lambda = k upper, 0 lower); rounding can dip below
        deviation: kato_deviation(a, b, lambda, k).max(0.0),
        epsilon: kato_failure_probability(a, b, k, dir),
        direction: dir,
    })
}

pub fn kato_upper_coeffs(lambda: f64, k: f64, eps: f64) -> Result<KatoCoefficients> {
    kato_coeffs(lambda, k, eps, Direction::Upper)
}

pub fn kato_lower_coeffs(lambda: f64, k: f64, eps: f64) -> Result<KatoCoefficients> {
    kato_coeffs(lambda, k, eps, Direction::Lower)
}

/// Numerical minimizer of the deviation, for cross-checking the closed form.
///
/// With `b` eliminated through the failure-probability constraint the
/// deviation is a convex function of `a`; it is minimized by golden-section
/// search on `[-3 sqrt k, 3 sqrt k]`.
pub fn kato_brute_force(lambda: f64, k: f64, eps: f64, dir: Direction) -> Result<KatoCoefficients> {
    check_kato_inputs(lambda, k, eps)?;
    let sk = k.sqrt();
    let f = |a: f64| kato_deviation(a, kato_b(a, k, eps, dir), lambda, k);
    let a = golden_min(f, -3.0 * sk, 3.0 * sk, 200);
    let b = kato_b(a, k, eps, dir);
    Ok(KatoCoefficients {
        a,
        b,
        deviation: f(a),
        epsilon: kato_failure_probability(a, b, k, dir),
        direction: dir,
    })
}

pub(crate) fn golden_min(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Bound on the sum of conditional expectations from an observed sum.
/// The lower bound is clamped at zero.
pub fn observed_to_expected(lambda: f64, k: f64, eps: f64, dir: Direction) -> Result<f64> {
    let c = kato_coeffs(lambda, k, eps, dir)?;
    Ok(match dir {
        Direction::Upper => lambda + c.deviation,
        Direction::Lower => (lambda - c.deviation).max(0.0),
    })
}

/// Kato deviation at `a = 0`: `sqrt(k/2 ln(1/eps))`.
pub fn a0_deviation(k: f64, eps: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(QssError::domain("k", k, "k >= 1"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(QssError::domain("eps", eps, "(0, 1]"));
    }
    Ok((0.5 * k * (1.0 / eps).ln()).sqrt())
}

/// Bound on an observed sum from its expectation, using `a = 0`.
pub fn expected_to_observed(expected: f64, k: f64, eps: f64, dir: Direction) -> Result<f64> {
    let d = a0_deviation(k, eps)?;
    Ok(match dir {
        Direction::Upper => expected + d,
        Direction::Lower => (expected - d).max(0.0),
    })
}

/// Azuma-Hoeffding deviation for unit-bounded martingale differences.
pub fn azuma_deviation(k: f64, eps: f64) -> Result<f64> {
    Ok(2.0 * a0_deviation(k, eps)?)
}

/// Every intermediate of the phase-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorReport {
    pub n_x: f64,
    pub n_y: f64,
    pub m_y: f64,
    pub kato: KatoCoefficients,
    /// Upper bound on the expected number of Y errors.
    pub m_y_expected: f64,
    pub eb_y_expected: f64,
    pub delta: f64,
    pub ep_expected: f64,
    /// The phase-error formula saturated at 1.
    pub ep_saturated: bool,
    pub m_p_expected: f64,
    pub m_p_upper: f64,
    pub ep_bar: f64,
    pub ep_bar_clamped: bool,
}

impl PhaseErrorReport {
    pub fn write_into(&self, r: &mut Report) {
        r.num("n_Y", self.n_y)
            .num("m_Y", self.m_y)
            .num("kato_a", self.kato.a)
            .num("kato_b", self.kato.b)
            .num("kato_deviation", self.kato.deviation)
            .num("m_Y_expected_upper", self.m_y_expected)
            .num("EbY_expected_upper", self.eb_y_expected)
            .num("Delta", self.delta)
            .num("Ep_expected", self.ep_expected)
            .flag("Ep_saturated", self.ep_saturated)
            .num("m_p_expected", self.m_p_expected)
            .num("m_p_upper", self.m_p_upper)
            .num("Ep_bar", self.ep_bar)
            .flag("Ep_bar_clamped", self.ep_bar_clamped);
    }
}

/// Upper bound on the observed X phase-error rate from Y-set tallies, with
/// the coin imbalance computed from `mu` and `gain_for_delta`.
pub fn phase_error_upper_bound(
    n_x: f64,
    n_y: f64,
    m_y: f64,
    mu: f64,
    gain_for_delta: f64,
    eps: &EpsilonBudget,
) -> Result<PhaseErrorReport> {
    let delta = optics::coin_imbalance(mu, gain_for_delta)?;
    phase_error_upper_bound_with_delta(n_x, n_y, m_y, delta, eps)
}

/// As [`phase_error_upper_bound`] with an explicit coin imbalance.
pub fn phase_error_upper_bound_with_delta(
    n_x: f64,
    n_y: f64,
    m_y: f64,
    delta: f64,
    eps: &EpsilonBudget,
) -> Result<PhaseErrorReport> {
    eps.validate()?;
    if !(n_y >= 1.0) {
        return Err(QssError::ZeroCount {
            what: "n_Y",
            value: n_y,
        });
    }
    if !(n_x >= 1.0) {
        return Err(QssError::ZeroCount {
            what: "n_X",
            value: n_x,
        });
    }
    if !(0.0..=n_y).contains(&m_y) {
        return Err(QssError::domain("m_Y", m_y, "0 <= m_Y <= n_Y"));
    }
    let kato = kato_upper_coeffs(m_y, n_y, eps.eps_a)?;
    let m_y_expected = m_y + kato.deviation;
    let eb_y_expected = (m_y_expected / n_y).min(1.0);
    let ep = optics::phase_error_from_y(eb_y_expected, delta)?;
    let m_p_expected = ep.value * n_x;
    let m_p_upper = expected_to_observed(m_p_expected, n_x, eps.eps_b, Direction::Upper)?;
    let raw = m_p_upper / n_x;
    Ok(PhaseErrorReport {
        n_x,
        n_y,
        m_y,
        kato,
        m_y_expected,
        eb_y_expected,
        delta,
        ep_expected: ep.value,
        ep_saturated: ep.clamped,
        m_p_expected,
        m_p_upper,
        ep_bar: raw.min(1.0),
        ep_bar_clamped: raw > 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLength {
    /// Final key length in bits: the bound floored and clamped at zero.
    pub bits: u64,
    /// The unfloored, unclamped bound.
    pub real: f64,
}

/// Secret key length `n_X [1 - H(Ep_bar)] - n_X f_e H(E_b^X) - log2(2/eps_c) - log2(1/(4 eps_PA^2))`.
///
/// Entropies of rates at or above 1/2 count as 1 bit.
pub fn key_length(
    n_x: f64,
    ep_bar: f64,
    ebx: f64,
    f_e: f64,
    eps: &EpsilonBudget,
) -> Result<KeyLength> {
    if !(0.0..=1.0).contains(&ep_bar) {
        return Err(QssError::domain("Ep_bar", ep_bar, "[0, 1]"));
    }
    if !(0.0..=1.0).contains(&ebx) {
        return Err(QssError::domain("E_b^X", ebx, "[0, 1]"));
    }
    if !(n_x >= 0.0) {
        return Err(QssError::domain("n_X", n_x, "n_X >= 0"));
    }
    if !(f_e >= 0.0) {
        return Err(QssError::domain("f_e", f_e, "f_e >= 0"));
    }
    let leak = n_x * f_e * capped_entropy(ebx);
    let verify = (2.0 / eps.eps_c).log2();
    let pa = (1.0 / (4.0 * eps.eps_pa * eps.eps_pa)).log2();
    let real = n_x * (1.0 - capped_entropy(ep_bar)) - leak - verify - pa;
    let bits = if real > 0.0 { real.floor() as u64 } else { 0 };
    Ok(KeyLength { bits, real })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a0_and_azuma_examples() {
        // mpmath, 40 digits
        let d = a0_deviation(1e6, 1e-10).unwrap();
        assert!((d - 3393.070212207556).abs() < 1e-9);
        let az = azuma_deviation(1e6, 1e-10).unwrap();
        assert!((az - 6786.140424415112).abs() < 1e-9);
        assert_eq!(a0_deviation(1e6, 1.0).unwrap(), 0.0);
        assert_eq!(a0_deviation(4e6, 1e-10).unwrap() / d, 2.0);
    }

    #[test]
    fn lower_is_mirror_of_upper() {
        let (k, eps) = (1e5, 1e-10);
        for lam in [0.0, 37.0, 5e3, 5e4, 9.9e4, 1e5] {
            let lo = kato_lower_coeffs(lam, k, eps).unwrap();
            let up = kato_upper_coeffs(k - lam, k, eps).unwrap();
            assert_eq!(lo.a, -up.a);
            assert!((lo.deviation - up.deviation).abs() <= 1e-9 * up.deviation);
        }
    }

    #[test]
    fn symmetric_point_matches_analytic_minimizer() {
        let (k, eps): (f64, f64) = (1e6, 1e-10);
        let c = 0.5 * (1.0 / eps).ln();
        let expected = -(4.0 * c / (3.0 * k.sqrt())) / (1.0 + 16.0 * c / (9.0 * k));
        let co = kato_upper_coeffs(k / 2.0, k, eps).unwrap();
        assert!((co.a - expected).abs() < 1e-12);
        assert!(co.deviation <= a0_deviation(k, eps).unwrap());
    }

    #[test]
    fn closed_form_meets_target_epsilon() {
        for dir in [Direction::Upper, Direction::Lower] {
            let co = kato_coeffs(100.0, 1e6, 1e-10, dir).unwrap();
            assert!(((co.epsilon - 1e-10) / 1e-10).abs() < 1e-9);
            assert!(co.b >= co.a.abs());
            let bf = kato_brute_force(100.0, 1e6, 1e-10, dir).unwrap();
            assert!((co.deviation - bf.deviation).abs() <= 1e-6 * bf.deviation);
        }
    }

    #[test]
    fn kato_rejects_bad_inputs() {
        assert!(kato_upper_coeffs(11.0, 10.0, 1e-10).is_err());
        assert!(kato_upper_coeffs(1.0, 10.0, 0.0).is_err());
        assert!(kato_upper_coeffs(-1.0, 10.0, 0.5).is_err());
    }

    #[test]
    fn key_length_at_half_is_zero() {
        let eps = EpsilonBudget::default();
        let l = key_length(1e12, 0.5, 0.0, 1.16, &eps).unwrap();
        assert_eq!(l.bits, 0);
        let l = key_length(1e6, 0.7, 0.0, 1.16, &eps).unwrap();
        assert_eq!(l.bits, 0);
    }

    #[test]
    fn pipeline_stages_only_enlarge() {
        let eps = EpsilonBudget::default();
        let r = phase_error_upper_bound(787407.0, 9553.0, 111.0, 9e-4, 1.97e-5, &eps).unwrap();
        assert!(r.ep_bar >= r.ep_expected);
        assert!(r.ep_expected >= r.eb_y_expected);
        assert!(r.eb_y_expected >= 111.0 / 9553.0);
        assert!(!r.ep_bar_clamped);
    }

    #[test]
    fn pipeline_needs_y_counts() {
        let eps = EpsilonBudget::default();
        let err = phase_error_upper_bound_with_delta(1e6, 0.0, 0.0, 0.0, &eps).unwrap_err();
        assert!(matches!(err, QssError::ZeroCount { what: "n_Y", .. }));
    }

    #[test]
    fn budget_derivations() {
        let b = EpsilonBudget::default();
        assert_eq!(b.eps(), 2e-10);
        assert!((b.eps_s() - (2e-10f64.sqrt() + 1e-10)).abs() < 1e-20);
        assert!(EpsilonBudget::new(1.0, 0.1, 0.1, 0.1).is_err());
    }
}
