//! Analytic channel and source formulas.
//!
//! Everything here is a pure function of its arguments. Small exponents are
//! handled with `exp_m1` so that the gain and bit error rate stay accurate in
//! the regime `mu * eta ~ 1e-5` where `1 - exp(-x)` would otherwise cancel.

use std::f64::consts::FRAC_PI_2;

use crate::error::{QssError, Result};

/// Fibre channel between the two players and the central measurement station.
///
/// `length_km` is the total player-to-player distance; each arm is half of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Fibre attenuation in dB/km.
    pub alpha_db_per_km: f64,
    /// Total Alice-Bob distance in km.
    pub length_km: f64,
    /// Detector efficiency.
    pub det_efficiency: f64,
    /// Dark count probability per pulse per detector.
    pub dark_count: f64,
    /// Misalignment error probability.
    pub misalignment: f64,
}

impl Default for ChannelModel {
    /// Ultra-low-loss fibre with the detector figures of the reference apparatus.
    fn default() -> Self {
        ChannelModel {
            alpha_db_per_km: 0.167,
            length_km: 0.0,
            det_efficiency: 0.4,
            dark_count: 2e-8,
            misalignment: 0.015,
        }
    }
}

impl ChannelModel {
    pub fn new(
        alpha_db_per_km: f64,
        length_km: f64,
        det_efficiency: f64,
        dark_count: f64,
        misalignment: f64,
    ) -> Result<Self> {
        let ch = ChannelModel {
            alpha_db_per_km,
            length_km,
            det_efficiency,
            dark_count,
            misalignment,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// A channel described by its total player-to-player loss in dB instead of
    /// a fibre length. Attenuation is folded into `length_km` at 1 dB/km.
    pub fn from_total_loss_db(
        loss_db: f64,
        det_efficiency: f64,
        dark_count: f64,
        misalignment: f64,
    ) -> Result<Self> {
        Self::new(1.0, loss_db, det_efficiency, dark_count, misalignment)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(QssError::domain(
                "alpha",
                self.alpha_db_per_km,
                "alpha >= 0",
            ));
        }
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return Err(QssError::domain("length_km", self.length_km, "L >= 0"));
        }
        if !(0.0..=1.0).contains(&self.det_efficiency) {
            return Err(QssError::domain("eta_d", self.det_efficiency, "[0, 1]"));
        }
        if !(0.0..1.0).contains(&self.dark_count) {
            return Err(QssError::domain("p_d", self.dark_count, "[0, 1)"));
        }
        if !(0.0..=0.5).contains(&self.misalignment) {
            return Err(QssError::domain("e_d", self.misalignment, "[0, 0.5]"));
        }
        Ok(())
    }

    pub fn with_length(mut self, length_km: f64) -> Self {
        self.length_km = length_km;
        self
    }

    pub fn with_misalignment(mut self, misalignment: f64) -> Self {
        self.misalignment = misalignment;
        self
    }

    /// Total loss between the players in dB.
    pub fn total_loss_db(&self) -> f64 {
        self.alpha_db_per_km * self.length_km
    }

    pub fn transmittance(&self) -> f64 {
        transmittance(self)
    }
}

/// Source settings shared by both players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Mean photon number per pulse.
    pub intensity: f64,
    /// Probability of choosing the X basis.
    pub px: f64,
    /// Error-correction inefficiency `f_e >= 1`.
    pub ec_efficiency: f64,
}

impl SourceParams {
    pub fn new(intensity: f64, px: f64, ec_efficiency: f64) -> Result<Self> {
        let p = SourceParams {
            intensity,
            px,
            ec_efficiency,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(QssError::domain("mu", self.intensity, "mu >= 0"));
        }
        if !(self.px > 0.0 && self.px < 1.0) {
            return Err(QssError::domain("p_x", self.px, "(0, 1)"));
        }
        if !(self.ec_efficiency >= 1.0) {
            return Err(QssError::domain("f_e", self.ec_efficiency, "f_e >= 1"));
        }
        Ok(())
    }

    pub fn py(&self) -> f64 {
        1.0 - self.px
    }
}

/// `eta_d * 10^(-alpha L / 20)`: each player sits `L/2` from the station.
pub fn transmittance(ch: &ChannelModel) -> f64 {
    ch.det_efficiency * 10f64.powf(-ch.alpha_db_per_km * ch.length_km / 20.0)
}

/// `(1 - e^{-x}, e^{-x})` for `x = 2 mu eta`.
fn attenuation_terms(mu: f64, eta: f64) -> (f64, f64) {
    let x = 2.0 * mu * eta;
    (-(-x).exp_m1(), (-x).exp())
}

/// Total gain `Q_mu = (1 - p_d)[1 - (1 - 2 p_d) e^{-2 mu eta}]`.
///
/// This is exactly the probability that precisely one of the two detectors
/// fires when the interfering pulses have a 0 or pi phase difference.
pub fn gain(mu: f64, eta: f64, dark_count: f64) -> f64 {
    let (one_minus_e, e) = attenuation_terms(mu, eta);
    (1.0 - dark_count) * (one_minus_e + 2.0 * dark_count * e)
}

/// X-basis bit error rate `E_b^X`.
///
/// Evaluated as `e_d + (1 - 2 e_d) p_d (1 - p_d) e^{-2 mu eta} / Q_mu`, an
/// algebraic rearrangement of the two-term numerator that returns `e_d`
/// exactly when `p_d = 0`.
pub fn bit_error_x(mu: f64, eta: f64, dark_count: f64, misalignment: f64) -> Result<f64> {
    let q = gain(mu, eta, dark_count);
    if q <= 0.0 {
        return Err(QssError::DegenerateGain);
    }
    let (_, e) = attenuation_terms(mu, eta);
    let dark_term = dark_count * (1.0 - dark_count) * e / q;
    Ok(misalignment + (1.0 - 2.0 * misalignment) * dark_term)
}

/// Inner product of the X- and Y-basis source states, `e^{-mu}(cos mu + sin mu)`.
pub fn basis_overlap(mu: f64) -> f64 {
    (-mu).exp() * (mu.cos() + mu.sin())
}

/// `1 - basis_overlap(mu)` without cancellation for small `mu`.
fn overlap_deficit(mu: f64) -> f64 {
    if mu < 1e-2 {
        // overlap = 1 - mu^2 + 2/3 mu^3 - 1/6 mu^4 + ...
        let mut sum = 0.0;
        let mut pow = mu * mu;
        for c in overlap_series_coefficients() {
            sum += c * pow;
            pow *= mu;
        }
        -sum
    } else {
        1.0 - basis_overlap(mu)
    }
}

/// Taylor coefficients of `e^{-mu}(cos mu + sin mu)` for powers 2..=9.
fn overlap_series_coefficients() -> [f64; 8] {
    // Cauchy product of the e^{-mu} and (cos mu + sin mu) series
    let mut out = [0.0; 8];
    let mut fact = [1.0f64; 10];
    for n in 1..10 {
        fact[n] = fact[n - 1] * n as f64;
    }
    // cos + sin coefficients: n mod 4 -> 1, 1, -1, -1
    let trig = |n: usize| if n % 4 < 2 { 1.0 } else { -1.0 };
    for (slot, n) in (2..10).enumerate() {
        let mut c = 0.0;
        for j in 0..=n {
            let exp_c = if j % 2 == 0 { 1.0 } else { -1.0 } / fact[j];
            c += exp_c * trig(n - j) / fact[n - j];
        }
        out[slot] = c;
    }
    out
}

/// Quantum-coin imbalance `Delta` from `1 - 2 Q_mu Delta = <Psi_y|Psi_x>`.
pub fn coin_imbalance(mu: f64, gain: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(QssError::domain("mu", mu, "mu >= 0"));
    }
    if !(gain > 0.0) {
        return Err(QssError::DegenerateGain);
    }
    let delta = (overlap_deficit(mu) / (2.0 * gain)).max(0.0);
    if delta > 0.5 {
        return Err(QssError::ImbalanceOutOfRange { delta, mu, gain });
    }
    Ok(delta)
}

/// Phase error rate inferred from a Y-set bit error rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseError {
    pub value: f64,
    /// Set when the bound saturated at 1.
    pub clamped: bool,
}

/// `E_p = E_b + 4 Delta (1 - Delta)(1 - 2 E_b) + 4 (1 - 2 Delta) sqrt(Delta (1 - Delta) E_b (1 - E_b))`.
///
/// Writing `E_b = sin^2 x` and `Delta = sin^2 y` the expression is
/// `sin^2(x + 2y)`. It only bounds the phase error while `x + 2y <= pi/2`;
/// beyond that the bound is 1.
pub fn phase_error_from_y(eby: f64, delta: f64) -> Result<PhaseError> {
    if !(0.0..=1.0).contains(&eby) {
        return Err(QssError::domain("E_b^Y", eby, "[0, 1]"));
    }
    if !(0.0..=0.5).contains(&delta) {
        return Err(QssError::domain("Delta", delta, "[0, 0.5]"));
    }
    let angle = eby.sqrt().asin() + 2.0 * delta.sqrt().asin();
    if angle >= FRAC_PI_2 {
        return Ok(PhaseError {
            value: 1.0,
            clamped: true,
        });
    }
    let value = eby
        + 4.0 * delta * (1.0 - delta) * (1.0 - 2.0 * eby)
        + 4.0 * (1.0 - 2.0 * delta) * (delta * (1.0 - delta) * eby * (1.0 - eby)).sqrt();
    if value > 1.0 {
        return Ok(PhaseError {
            value: 1.0,
            clamped: true,
        });
    }
    Ok(PhaseError {
        value,
        clamped: false,
    })
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QssError::domain("x", x, "[0, 1]"));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Entropy used for key-length deductions: `H(x)` below 1/2, 1 at and above.
///
/// An error rate of 1/2 or more leaves no secrecy, so the deduction saturates
/// instead of following the falling branch of `H`.
pub(crate) fn capped_entropy(x: f64) -> f64 {
    if x >= 0.5 {
        1.0
    } else {
        binary_entropy(x.max(0.0)).unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn transmittance_examples() {
        let ch = ChannelModel::new(0.167, 0.0, 0.4, 0.0, 0.0).unwrap();
        assert_eq!(transmittance(&ch), 0.4);
        // 40-digit reference: 0.4 * 10^-0.835
        let ch = ch.with_length(100.0);
        assert!(close(transmittance(&ch), 0.058_487_086_978_268_73, 1e-13));
        let lossless = ChannelModel::new(0.0, 500.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(transmittance(&lossless), 1.0);
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelModel::new(-0.1, 0.0, 0.4, 0.0, 0.0).is_err());
        assert!(ChannelModel::new(0.2, 0.0, 1.4, 0.0, 0.0).is_err());
        assert!(ChannelModel::new(0.2, 0.0, 0.4, 1.0, 0.0).is_err());
        assert!(ChannelModel::new(0.2, 0.0, 0.4, 0.0, 0.6).is_err());
        assert!(SourceParams::new(1e-3, 1.0, 1.16).is_err());
        assert!(SourceParams::new(1e-3, 0.9, 0.9).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(0.0, 0.3, 0.0), 0.0);
        assert!(close(gain(1e6, 1.0, 0.0), 1.0, 1e-15));
        let q = gain(9e-4, 0.058478, 2e-8);
        assert!((q - 1.052_948_540_023_758e-4).abs() < 1e-16, "{q}");
    }

    #[test]
    fn bit_error_examples() {
        assert_eq!(bit_error_x(1e-3, 0.1, 0.0, 0.0).unwrap(), 0.0);
        for &ed in &[0.0, 0.015, 0.03, 0.2, 0.5] {
            assert_eq!(bit_error_x(7e-4, 0.02, 0.0, ed).unwrap(), ed);
        }
        let e = bit_error_x(9e-4, 0.058478, 2e-8, 0.015).unwrap();
        assert!(close(e, 0.015_184_225_125_259_33, 1e-12), "{e}");
        assert!(matches!(
            bit_error_x(0.0, 0.1, 0.0, 0.01),
            Err(QssError::DegenerateGain)
        ));
    }

    #[test]
    fn bit_error_matches_two_term_formula() {
        // the unrearranged numerator, evaluated directly
        for &(mu, eta, pd, ed) in &[
            (9e-4, 0.058478, 2e-8, 0.015),
            (0.1, 0.5, 1e-3, 0.03),
            (1e-5, 1e-3, 1e-6, 0.045),
        ] {
            let e = (-2.0f64 * mu * eta).exp();
            let q = (1.0 - pd) * (1.0 - (1.0 - 2.0 * pd) * e);
            let num = ed * (1.0 - pd) * (1.0 - (1.0 - pd) * e) + (1.0 - ed) * pd * (1.0 - pd) * e;
            assert!(close(bit_error_x(mu, eta, pd, ed).unwrap(), num / q, 1e-9));
        }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(basis_overlap(0.0), 1.0);
        let mu: f64 = 9e-4;
        let taylor = mu * mu - 2.0 / 3.0 * mu.powi(3) + mu.powi(4) / 6.0;
        assert!(close(overlap_deficit(mu), taylor, 1e-9));
        assert!(close(overlap_deficit(mu), 8.095_141_093_499_941e-7, 1e-12));
        // series branch and closed form agree where both are accurate
        for &m in &[2e-3, 5e-3, 9.99e-3] {
            assert!(close(overlap_deficit(m), 1.0 - basis_overlap(m), 1e-8));
        }
    }

    #[test]
    fn coin_imbalance_examples() {
        assert_eq!(coin_imbalance(0.0, 4e-8).unwrap(), 0.0);
        let d = coin_imbalance(9e-4, 1.0526e-4).unwrap();
        assert!(close(d, 3.845_307_378_633_831e-3, 1e-10), "{d}");
        let mu = 0.01;
        let q = overlap_deficit(mu) / (2.0 * 0.25);
        assert!(close(coin_imbalance(mu, q).unwrap(), 0.25, 1e-14));
        assert!(matches!(
            coin_imbalance(0.05, 1e-6),
            Err(QssError::ImbalanceOutOfRange { .. })
        ));
        assert!(matches!(
            coin_imbalance(1e-3, 0.0),
            Err(QssError::DegenerateGain)
        ));
    }

    #[test]
    fn phase_error_examples() {
        for &x in &[0.0, 0.01, 0.0116, 0.2, 0.5] {
            assert_eq!(phase_error_from_y(x, 0.0).unwrap().value, x);
        }
        for &d in &[1e-4, 0.01, 0.1] {
            let ep = phase_error_from_y(0.0, d).unwrap().value;
            assert!(close(ep, 4.0 * d * (1.0 - d), 1e-14));
        }
        // term-by-term evaluation
        let (eb, d) = (0.0116f64, 3.848e-3f64);
        let t1 = eb;
        let t2 = 4.0 * d * (1.0 - d) * (1.0 - 2.0 * eb);
        let t3 = 4.0 * (1.0 - 2.0 * d) * (d * (1.0 - d) * eb * (1.0 - eb)).sqrt();
        let ep = phase_error_from_y(eb, d).unwrap();
        assert!(!ep.clamped);
        assert!(close(ep.value, t1 + t2 + t3, 1e-14));
        assert!(close(ep.value, 0.052_890_661_282_911_95, 1e-12));
        assert!(phase_error_from_y(0.1, 0.6).is_err());
        assert!(phase_error_from_y(1.2, 0.1).is_err());
    }

    #[test]
    fn phase_error_saturates_past_turning_point() {
        let ep = phase_error_from_y(0.5, 0.3).unwrap();
        assert!(ep.clamped);
        assert_eq!(ep.value, 1.0);
        let ep = phase_error_from_y(1.0, 0.0).unwrap();
        assert_eq!(ep.value, 1.0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(close(
            binary_entropy(0.11).unwrap(),
            0.499_915_958_164_528,
            1e-12
        ));
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.01).is_err());
        assert_eq!(capped_entropy(0.7), 1.0);
    }
}
