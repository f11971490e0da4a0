//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The computations live in plain functions returning `Result<_, String>` so
//! they can be exercised natively; the `#[wasm_bindgen]` wrappers only turn
//! errors into JS exceptions. Series are returned as flat `Float64Array`s
//! with a fixed stride.

// `!(x >= lo)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use qss_core::exp_data::{self, AnalysisConfig};
use qss_core::finite_key::{self, Direction, EpsilonBudget};
use qss_core::keyrate::PulseCount;
use qss_core::optics::ChannelModel;
use qss_core::optimize::{self, Bounds};
use qss_core::report::Report;
use wasm_bindgen::prelude::*;

/// `[L_km, mu, px, rate_per_pulse]` per distance.
pub const CURVE_STRIDE: usize = 4;
/// `[k, kato / k, a0 / k, azuma / k]` per trial count.
pub const DEVIATION_STRIDE: usize = 4;

const MAX_POINTS: usize = 2000;

fn pulses_from(n: f64) -> Result<PulseCount, String> {
    if n.is_infinite() && n > 0.0 {
        Ok(PulseCount::Infinite)
    } else if n.is_finite() && n > 0.0 {
        Ok(PulseCount::Finite(n))
    } else {
        Err(format!("pulse count must be positive, got {n}"))
    }
}

/// Optimized key rate per pulse from 0 to `l_max` km with the default fiber
/// and detector; `pulses = Infinity` gives the infinite-key curve.
pub fn rate_curve(
    pulses: f64,
    misalignment: f64,
    l_max: f64,
    step: f64,
) -> Result<Vec<f64>, String> {
    let pulses = pulses_from(pulses)?;
    if !(step > 0.0 && l_max >= 0.0) || l_max / step > MAX_POINTS as f64 {
        return Err(format!("bad distance grid: 0..{l_max} step {step}"));
    }
    let grid: Vec<f64> = (0..=((l_max / step + 1e-9) as usize))
        .map(|i| step * i as f64)
        .collect();
    let template = ChannelModel::default().with_misalignment(misalignment);
    template.validate().map_err(|e| e.to_string())?;
    let pts = optimize::sweep_distance(
        &grid,
        &template,
        1.16,
        pulses,
        &EpsilonBudget::default(),
        &Bounds::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(pts
        .iter()
        .flat_map(|p| [p.length_km, p.mu, p.px, p.rate_per_pulse])
        .collect())
}

/// Relative deviations of the optimized Kato bound, the `a = 0` bound and
/// Azuma's bound for an observation fraction `frac`, log-spaced in `k`.
pub fn deviation_curve(
    frac: f64,
    eps: f64,
    k_min: f64,
    k_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(0.0..=1.0).contains(&frac) {
        return Err(format!("observed fraction must lie in [0, 1], got {frac}"));
    }
    if !(k_min >= 1.0 && k_max >= k_min) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!(
            "bad trial range {k_min}..{k_max} with {points} points"
        ));
    }
    let (lo, hi) = (k_min.log10(), k_max.log10());
    let mut out = Vec::with_capacity(points * DEVIATION_STRIDE);
    for i in 0..points {
        let k = 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64);
        let kato = finite_key::kato_coeffs(frac * k, k, eps, Direction::Upper)
            .map_err(|e| e.to_string())?;
        let a0 = finite_key::a0_deviation(k, eps).map_err(|e| e.to_string())?;
        let az = finite_key::azuma_deviation(k, eps).map_err(|e| e.to_string())?;
        out.extend([k, kato.deviation / k, a0 / k, az / k]);
    }
    Ok(out)
}

/// Sift a count table and return the `key = value` report.
pub fn analyze_counts(csv: &str, mu: f64, px: f64, pulses: f64) -> Result<String, String> {
    let rows = exp_data::parse_counts(csv.as_bytes()).map_err(|e| e.to_string())?;
    let summary = exp_data::tally_sets(&rows).map_err(|e| e.to_string())?;
    let mut cfg = AnalysisConfig::new(mu, px);
    cfg.pulses = pulses;
    let key = exp_data::experiment_skr(&summary, &cfg).map_err(|e| e.to_string())?;
    let mut r = Report::new();
    summary.write_into(&mut r);
    key.write_into(&mut r);
    Ok(r.to_string())
}

/// Name, `p_x` and `mu` of each bundled table, as `name,px,mu` lines.
pub fn bundled_index() -> String {
    exp_data::FIXTURES
        .iter()
        .filter_map(|(name, _)| {
            exp_data::fixture_meta(name).map(|m| format!("{name},{},{}\n", m.px, m.mu))
        })
        .collect()
}

pub fn bundled_csv(name: &str) -> Option<String> {
    exp_data::FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| (*text).to_owned())
}

#[wasm_bindgen(js_name = rateCurve)]
pub fn rate_curve_js(
    pulses: f64,
    misalignment: f64,
    l_max: f64,
    step: f64,
) -> Result<Vec<f64>, JsError> {
    rate_curve(pulses, misalignment, l_max, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = deviationCurve)]
pub fn deviation_curve_js(
    frac: f64,
    eps: f64,
    k_min: f64,
    k_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    deviation_curve(frac, eps, k_min, k_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = analyzeCounts)]
pub fn analyze_counts_js(csv: &str, mu: f64, px: f64, pulses: f64) -> Result<String, JsError> {
    analyze_counts(csv, mu, px, pulses).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bundledIndex)]
pub fn bundled_index_js() -> String {
    bundled_index()
}

#[wasm_bindgen(js_name = bundledCsv)]
pub fn bundled_csv_js(name: &str) -> Option<String> {
    bundled_csv(name)
}
