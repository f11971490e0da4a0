//! Derivative-free search over `(mu, p_x)` and distance sweeps.
//!
//! Coordinate descent over `(log10 mu, p_x)`. Each line search first scans
//! the whole coordinate range on a coarse grid (the objective is exactly zero
//! over large regions, which would stall a pure golden-section search) and then
//! refines around the best grid cell by golden section.

use crate::error::{QssError, Result};
use crate::finite_key::{golden_min, EpsilonBudget};
use crate::keyrate::{self, PulseCount, RatePoint};
use crate::optics::{ChannelModel, SourceParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub mu: (f64, f64),
    pub px: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            mu: (1e-6, 1e-1),
            px: (0.5, 0.99),
        }
    }
}

impl Bounds {
    fn validate(&self) -> Result<()> {
        let (mlo, mhi) = self.mu;
        let (plo, phi) = self.px;
        if !(mlo > 0.0 && mlo < mhi) {
            return Err(QssError::domain("mu bounds", mlo, "0 < lo < hi"));
        }
        if !(plo > 0.0 && plo < phi && phi < 1.0) {
            return Err(QssError::domain("p_x bounds", plo, "0 < lo < hi < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: RatePoint,
    /// Every evaluated point, in evaluation order.
    pub trace: Vec<RatePoint>,
}

const SCAN_POINTS: usize = 24;
const REFINE_ITERS: usize = 48;
const MAX_CYCLES: usize = 12;

struct Search<'a> {
    ch: &'a ChannelModel,
    f_e: f64,
    pulses: PulseCount,
    eps: &'a EpsilonBudget,
    trace: Vec<RatePoint>,
}

impl Search<'_> {
    fn eval(&mut self, log_mu: f64, px: f64) -> f64 {
        let mu = 10f64.powf(log_mu);
        let point = SourceParams::new(mu, px, self.f_e)
            .and_then(|p| keyrate::finite_rate(self.ch, &p, self.pulses, self.eps))
            .unwrap_or(RatePoint {
                length_km: self.ch.length_km,
                mu,
                px,
                pulses: self.pulses,
                rate_per_pulse: 0.0,
                ell: self.pulses.finite().map(|_| 0),
                ell_real: f64::NEG_INFINITY,
                ep_bar: f64::NAN,
                ebx: f64::NAN,
                abort: true,
            });
        self.trace.push(point);
        point.objective()
    }

    /// Maximize along one coordinate; returns the new coordinate and value.
    fn line(
        &mut self,
        lo: f64,
        hi: f64,
        current: (f64, f64),
        f: impl Fn(&mut Self, f64) -> f64,
    ) -> (f64, f64) {
        let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
        let mut best = current;
        let mut best_i = None;
        for i in 0..SCAN_POINTS {
            let x = lo + step * i as f64;
            let v = f(self, x);
            if v > best.1 {
                best = (x, v);
                best_i = Some(i);
            }
        }
        let (a, b) = match best_i {
            Some(i) => (
                lo + step * i.saturating_sub(1) as f64,
                (lo + step * (i + 1) as f64).min(hi),
            ),
            None if best.1 > 0.0 => ((best.0 - step).max(lo), (best.0 + step).min(hi)),
            None => return best,
        };
        let x = golden_min(|x| -f(self, x), a, b, REFINE_ITERS);
        let v = f(self, x);
        if v > best.1 {
            (x, v)
        } else {
            best
        }
    }

    fn descend(&mut self, bounds: &Bounds, start: (f64, f64)) -> (f64, f64, f64) {
        let (lmu_lo, lmu_hi) = (bounds.mu.0.log10(), bounds.mu.1.log10());
        let (mut lmu, mut px) = start;
        let mut value = self.eval(lmu, px);
        for _ in 0..MAX_CYCLES {
            let before = value;
            let p = px;
            let (x, v) = self.line(lmu_lo, lmu_hi, (lmu, value), |s, x| s.eval(x, p));
            lmu = x;
            value = v;
            let m = lmu;
            let (y, v) = self.line(bounds.px.0, bounds.px.1, (px, value), |s, y| s.eval(m, y));
            px = y;
            value = v;
            if value <= before * (1.0 + 1e-10) && before > 0.0 {
                break;
            }
        }
        (lmu, px, value)
    }
}

/// Best `(mu, p_x)` at one distance.
pub fn optimize_params(
    ch: &ChannelModel,
    f_e: f64,
    pulses: PulseCount,
    eps: &EpsilonBudget,
    bounds: &Bounds,
) -> Result<OptimizationResult> {
    bounds.validate()?;
    ch.validate()?;
    eps.validate()?;
    let mut s = Search {
        ch,
        f_e,
        pulses,
        eps,
        trace: Vec::new(),
    };
    let (lmu_lo, lmu_hi) = (bounds.mu.0.log10(), bounds.mu.1.log10());
    let (plo, phi) = bounds.px;

    // Coarse grid to find a start inside the positive-rate region.
    let mut grid_best = (
        (lmu_lo + lmu_hi) / 2.0,
        (plo + phi) / 2.0,
        f64::NEG_INFINITY,
    );
    for i in 0..SCAN_POINTS {
        let lmu = lmu_lo + (lmu_hi - lmu_lo) * i as f64 / (SCAN_POINTS - 1) as f64;
        for j in 0..12 {
            let px = plo + (phi - plo) * j as f64 / 11.0;
            let v = s.eval(lmu, px);
            if v > grid_best.2 {
                grid_best = (lmu, px, v);
            }
        }
    }
    let starts = [
        (grid_best.0, grid_best.1),
        (lmu_lo + 0.75 * (lmu_hi - lmu_lo), plo + 0.8 * (phi - plo)),
        (lmu_lo + 0.4 * (lmu_hi - lmu_lo), plo + 0.4 * (phi - plo)),
    ];
    for start in starts {
        s.descend(bounds, start);
    }

    let best = s
        .trace
        .iter()
        .copied()
        .fold(None::<RatePoint>, |acc, p| match acc {
            Some(b) if b.objective() >= p.objective() => Some(b),
            _ => Some(p),
        })
        .filter(|b| b.rate_per_pulse > 0.0);
    match best {
        Some(best) => Ok(OptimizationResult {
            best,
            trace: s.trace,
        }),
        None => Err(QssError::AllAbort),
    }
}

/// Best intensity at fixed `p_x` over `mu_range`.
pub fn optimize_mu(
    ch: &ChannelModel,
    px: f64,
    f_e: f64,
    pulses: PulseCount,
    eps: &EpsilonBudget,
    mu_range: (f64, f64),
) -> Result<RatePoint> {
    let mut s = Search {
        ch,
        f_e,
        pulses,
        eps,
        trace: Vec::new(),
    };
    s.line(
        mu_range.0.log10(),
        mu_range.1.log10(),
        (mu_range.0.log10(), f64::NEG_INFINITY),
        |s, x| s.eval(x, px),
    );
    s.trace
        .into_iter()
        .fold(None::<RatePoint>, |acc, p| match acc {
            Some(b) if b.objective() >= p.objective() => Some(b),
            _ => Some(p),
        })
        .filter(|b| b.rate_per_pulse > 0.0)
        .ok_or(QssError::AllAbort)
}

/// Intensity maximizing [`keyrate::asymptotic_rate`] on `mu_range`.
pub fn optimize_asymptotic_mu(
    ch: &ChannelModel,
    f_e: f64,
    mu_range: (f64, f64),
) -> Result<(f64, f64)> {
    let (lo, hi) = (mu_range.0.log10(), mu_range.1.log10());
    let r = |lmu: f64| keyrate::asymptotic_rate(10f64.powf(lmu), ch, f_e).unwrap_or(0.0);
    let step = (hi - lo) / 199.0;
    let (i, _) = (0..200usize).map(|i| (i, r(lo + step * i as f64))).fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
    );
    let a = lo + step * i.saturating_sub(1) as f64;
    let b = (lo + step * (i + 1) as f64).min(hi);
    let lmu = golden_min(|x| -r(x), a, b, 200);
    let value = r(lmu);
    if value <= 0.0 {
        return Err(QssError::AllAbort);
    }
    Ok((10f64.powf(lmu), value))
}

/// Optimized rate at each distance, ordered like `lengths`. Distances where
/// every point aborts give a zero-rate point.
pub fn sweep_distance(
    lengths: &[f64],
    template: &ChannelModel,
    f_e: f64,
    pulses: PulseCount,
    eps: &EpsilonBudget,
    bounds: &Bounds,
) -> Result<Vec<RatePoint>> {
    if lengths.is_empty() {
        return Err(QssError::domain("distance grid", 0.0, "nonempty"));
    }
    let one = |&length: &f64| -> Result<RatePoint> {
        let ch = template.with_length(length);
        match optimize_params(&ch, f_e, pulses, eps, bounds) {
            Ok(r) => Ok(r.best),
            Err(QssError::AllAbort) => Ok(RatePoint {
                length_km: length,
                mu: f64::NAN,
                px: f64::NAN,
                pulses,
                rate_per_pulse: 0.0,
                ell: pulses.finite().map(|_| 0),
                ell_real: f64::NEG_INFINITY,
                ep_bar: 1.0,
                ebx: f64::NAN,
                abort: true,
            }),
            Err(e) => Err(e),
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        lengths.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        lengths.iter().map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stays_in_bounds_and_is_deterministic() {
        let ch = ChannelModel::default().with_length(100.0);
        let eps = EpsilonBudget::default();
        let b = Bounds::default();
        let r1 = optimize_params(&ch, 1.16, PulseCount::Finite(1e10), &eps, &b).unwrap();
        let r2 = optimize_params(&ch, 1.16, PulseCount::Finite(1e10), &eps, &b).unwrap();
        assert_eq!(format!("{r1:?}"), format!("{r2:?}"));
        for p in &r1.trace {
            assert!(p.mu >= 1e-6 * (1.0 - 1e-12) && p.mu <= 0.1 * (1.0 + 1e-12));
            assert!(p.px >= 0.5 && p.px <= 0.99);
        }
        let max = r1
            .trace
            .iter()
            .map(|p| p.rate_per_pulse)
            .fold(0.0, f64::max);
        assert_eq!(r1.best.rate_per_pulse, max);
    }

    #[test]
    fn all_abort_far_away() {
        let ch = ChannelModel::default().with_length(600.0);
        let r = optimize_params(
            &ch,
            1.16,
            PulseCount::Finite(1e10),
            &EpsilonBudget::default(),
            &Bounds::default(),
        );
        assert!(matches!(r, Err(QssError::AllAbort)));
    }
}
