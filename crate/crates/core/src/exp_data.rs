//! Detection-count tables: parsing, set classification and key-rate analysis.
//!
//! A table has one row per phase setting, phases as quarter turns:
//!
//! ```text
//! phase_a,phase_b,phase_c,spd1,spd2
//! 0,0,0,95331,553
//! ```

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{QssError, Result};
use crate::finite_key::{self, EpsilonBudget, KeyLength, PhaseErrorReport};
use crate::protocol::{Basis, QuarterTurns, SetTag};
use crate::report::Report;

pub const HEADER: [&str; 5] = ["phase_a", "phase_b", "phase_c", "spd1", "spd2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CountRow {
    pub phase_a: u8,
    pub phase_b: u8,
    pub phase_c: u8,
    pub spd1: u64,
    pub spd2: u64,
}

impl CountRow {
    pub fn triple(&self) -> [u8; 3] {
        [self.phase_a, self.phase_b, self.phase_c]
    }

    pub fn total(&self) -> u64 {
        self.spd1 + self.spd2
    }
}

fn malformed(line: u64, message: impl Into<String>) -> QssError {
    QssError::MalformedLine {
        line,
        message: message.into(),
    }
}

/// Read a count table. An empty input yields no rows.
pub fn parse_counts<R: Read>(reader: R) -> Result<Vec<CountRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    let mut header_done = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if !header_done {
            if rec.iter().ne(HEADER.iter().copied()) {
                return Err(malformed(
                    line,
                    format!("expected header `{}`", HEADER.join(",")),
                ));
            }
            header_done = true;
            continue;
        }
        if rec.len() != 5 {
            return Err(malformed(
                line,
                format!("expected 5 fields, found {}", rec.len()),
            ));
        }
        let mut phase = [0u8; 3];
        for (i, p) in phase.iter_mut().enumerate() {
            *p = rec[i]
                .parse::<u8>()
                .ok()
                .filter(|&q| q < 4)
                .ok_or_else(|| {
                    malformed(
                        line,
                        format!("{} must be 0-3, got `{}`", HEADER[i], &rec[i]),
                    )
                })?;
        }
        let count = |i: usize| {
            rec[i].parse::<u64>().map_err(|_| {
                malformed(
                    line,
                    format!(
                        "{} must be a nonnegative integer, got `{}`",
                        HEADER[i], &rec[i]
                    ),
                )
            })
        };
        let row = CountRow {
            phase_a: phase[0],
            phase_b: phase[1],
            phase_c: phase[2],
            spd1: count(3)?,
            spd2: count(4)?,
        };
        if !seen.insert(row.triple()) {
            return Err(QssError::DuplicateTriple {
                line,
                triple: row.triple(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_counts<W: Write>(rows: &[CountRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let io = |e: csv::Error| QssError::Io(e.into());
    w.write_record(HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.phase_a.to_string(),
            r.phase_b.to_string(),
            r.phase_c.to_string(),
            r.spd1.to_string(),
            r.spd2.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Decoded meaning of a phase setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub tag: SetTag,
    pub s_a: u8,
    pub s_b: u8,
    /// The dealer added his balancing pi.
    pub balancing_flip: bool,
    /// Without noise only SPD1 clicks; otherwise only SPD2.
    pub expect_spd1: bool,
}

impl Classification {
    /// Clicks in the detector that should have stayed dark.
    pub fn errors(&self, row: &CountRow) -> u64 {
        if self.expect_spd1 {
            row.spd2
        } else {
            row.spd1
        }
    }
}

fn decode_player(code: u8) -> (Basis, u8) {
    match code {
        0 => (Basis::X, 0),
        2 => (Basis::X, 1),
        1 => (Basis::Y, 1),
        _ => (Basis::Y, 0),
    }
}

/// Assign a row to its sifted set and expected detector.
///
/// Only the X, Y_bc and Y_ac basis patterns are accepted; anything else is
/// an inconsistent-phase error.
pub fn classify_row(row: &CountRow) -> Result<Classification> {
    let triple = row.triple();
    let (Some(qa), Some(qb), Some(qc)) = (
        QuarterTurns::new(row.phase_a),
        QuarterTurns::new(row.phase_b),
        QuarterTurns::new(row.phase_c),
    ) else {
        return Err(QssError::InconsistentPhase {
            triple,
            reason: "phase code outside 0-3",
        });
    };
    let (basis_a, s_a) = decode_player(qa.get());
    let (basis_b, s_b) = decode_player(qb.get());
    let basis_c = if qc.get() % 2 == 0 {
        Basis::X
    } else {
        Basis::Y
    };
    let balancing_flip = qc.get() >= 2;
    let tag = crate::protocol::sift(basis_a, basis_b, basis_c, true);
    if tag == SetTag::Discard {
        return Err(QssError::InconsistentPhase {
            triple,
            reason: "basis pattern belongs to no sifted set",
        });
    }
    // Bob's pulse carries his phase plus the dealer's full phase.
    let dphi = qb.plus(qc).minus(qa).get();
    debug_assert!(dphi % 2 == 0);
    Ok(Classification {
        tag,
        s_a,
        s_b,
        balancing_flip,
        expect_spd1: dphi == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSummary {
    pub n_x: u64,
    pub m_x: u64,
    pub n_ybc: u64,
    pub m_ybc: u64,
    pub n_yac: u64,
    pub m_yac: u64,
    pub n_y: u64,
    pub ebx: f64,
    pub eb_ybc: f64,
    pub eb_yac: f64,
    /// Worst of the two Y sets.
    pub eby: f64,
}

impl ExperimentSummary {
    pub fn write_into(&self, r: &mut Report) {
        r.int("n_x", self.n_x)
            .int("m_x", self.m_x)
            .int("n_y", self.n_y)
            .int("n_ybc", self.n_ybc)
            .int("m_ybc", self.m_ybc)
            .int("n_yac", self.n_yac)
            .int("m_yac", self.m_yac)
            .num("EbX", self.ebx)
            .num("EbY_bc", self.eb_ybc)
            .num("EbY_ac", self.eb_yac)
            .num("EbY", self.eby);
    }
}

/// Sum counts per sifted set.
pub fn tally_sets(rows: &[CountRow]) -> Result<ExperimentSummary> {
    let mut n = [0u64; 3];
    let mut m = [0u64; 3];
    for row in rows {
        let c = classify_row(row)?;
        let i = match c.tag {
            SetTag::X => 0,
            SetTag::Ybc => 1,
            SetTag::Yac => 2,
            SetTag::Discard => continue,
        };
        n[i] += row.total();
        m[i] += c.errors(row);
    }
    for (i, set) in ["X", "Y_bc", "Y_ac"].into_iter().enumerate() {
        if n[i] == 0 {
            return Err(QssError::EmptySet { set });
        }
    }
    let rate = |i: usize| m[i] as f64 / n[i] as f64;
    Ok(ExperimentSummary {
        n_x: n[0],
        m_x: m[0],
        n_ybc: n[1],
        m_ybc: m[1],
        n_yac: n[2],
        m_yac: m[2],
        n_y: n[1] + n[2],
        ebx: rate(0),
        eb_ybc: rate(1),
        eb_yac: rate(2),
        eby: rate(1).max(rate(2)),
    })
}

/// Which gain enters the coin imbalance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainSource {
    /// `(n_X + n_Y) / ((p_x^3 + 2 p_x (1 - p_x)^2) N)`.
    Observed,
    /// A gain supplied by the caller, e.g. from the channel model.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub mu: f64,
    pub px: f64,
    /// Pulses sent during the run.
    pub pulses: f64,
    pub ec_efficiency: f64,
    pub eps: EpsilonBudget,
    pub gain: GainSource,
    pub rep_rate_hz: f64,
}

impl AnalysisConfig {
    /// 100 MHz repetition over 500 s, `f_e = 1.16`.
    pub fn new(mu: f64, px: f64) -> Self {
        AnalysisConfig {
            mu,
            px,
            pulses: 5e10,
            ec_efficiency: 1.16,
            eps: EpsilonBudget::default(),
            gain: GainSource::Observed,
            rep_rate_hz: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    pub gain_for_delta: f64,
    /// Set whose bound was kept.
    pub worst_set: SetTag,
    pub phase_error: PhaseErrorReport,
    pub key: KeyLength,
    pub skr_per_pulse: f64,
    pub skr_bps: f64,
}

impl KeyRateReport {
    pub fn write_into(&self, r: &mut Report) {
        r.num("Q_for_Delta", self.gain_for_delta)
            .text("worst_set", self.worst_set.label());
        self.phase_error.write_into(r);
        r.int("ell", self.key.bits)
            .num("ell_real", self.key.real)
            .num("skr_per_pulse", self.skr_per_pulse)
            .num("skr_bps", self.skr_bps)
            .flag("abort", self.key.bits == 0);
    }
}

/// Finite-key rate of an experimental run; the phase-error bound is taken
/// from whichever Y set gives the larger value.
pub fn experiment_skr(summary: &ExperimentSummary, cfg: &AnalysisConfig) -> Result<KeyRateReport> {
    let total = (summary.n_x + summary.n_y) as f64;
    if !(cfg.pulses >= total) {
        return Err(QssError::domain("N", cfg.pulses, "N >= total detections"));
    }
    if !(cfg.px > 0.0 && cfg.px < 1.0) {
        return Err(QssError::domain("p_x", cfg.px, "(0, 1)"));
    }
    let gain = match cfg.gain {
        GainSource::Observed => {
            let py = 1.0 - cfg.px;
            total / ((cfg.px.powi(3) + 2.0 * cfg.px * py * py) * cfg.pulses)
        }
        GainSource::Fixed(q) => q,
    };
    if !(gain > 0.0 && gain <= 1.0) {
        // an observed gain above one means N is too small for these counts
        return Err(QssError::domain("gain", gain, "(0, 1]"));
    }
    let n_x = summary.n_x as f64;
    let mut worst: Option<(SetTag, PhaseErrorReport)> = None;
    for (tag, n, m) in [
        (SetTag::Ybc, summary.n_ybc, summary.m_ybc),
        (SetTag::Yac, summary.n_yac, summary.m_yac),
    ] {
        let r =
            finite_key::phase_error_upper_bound(n_x, n as f64, m as f64, cfg.mu, gain, &cfg.eps)?;
        if worst.is_none_or(|(_, w)| r.ep_bar > w.ep_bar) {
            worst = Some((tag, r));
        }
    }
    let (worst_set, phase_error) = worst.expect("two sets evaluated");
    let key = finite_key::key_length(
        n_x,
        phase_error.ep_bar,
        summary.ebx,
        cfg.ec_efficiency,
        &cfg.eps,
    )?;
    let skr_per_pulse = key.bits as f64 / cfg.pulses;
    Ok(KeyRateReport {
        gain_for_delta: gain,
        worst_set,
        phase_error,
        key,
        skr_per_pulse,
        skr_bps: skr_per_pulse * cfg.rep_rate_hz,
    })
}

/// `p_x` and `mu` encoded in a fixture name such as `tableIIIa_mu9e-4.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureMeta {
    pub px: f64,
    pub mu: f64,
}

pub fn fixture_meta(file_name: &str) -> Option<FixtureMeta> {
    let stem = file_name.rsplit(['/', '\\']).next()?.strip_suffix(".csv")?;
    let rest = stem.strip_prefix("tableIII")?;
    let (letter, mu) = rest.split_once("_mu")?;
    let px = match letter {
        "a" => 0.9,
        "b" => 0.8,
        "c" => 0.7,
        _ => return None,
    };
    Some(FixtureMeta {
        px,
        mu: mu.parse().ok()?,
    })
}

macro_rules! fixture {
    ($name:literal) => {
        ($name, include_str!(concat!("../../../fixtures/", $name)))
    };
}

/// The nine bundled tables, in summary-table order.
pub const FIXTURES: [(&str, &str); 9] = [
    fixture!("tableIIIa_mu9e-4.csv"),
    fixture!("tableIIIa_mu8e-4.csv"),
    fixture!("tableIIIa_mu7e-4.csv"),
    fixture!("tableIIIb_mu9e-4.csv"),
    fixture!("tableIIIb_mu8e-4.csv"),
    fixture!("tableIIIb_mu7e-4.csv"),
    fixture!("tableIIIc_mu9e-4.csv"),
    fixture!("tableIIIc_mu8e-4.csv"),
    fixture!("tableIIIc_mu7e-4.csv"),
];

/// Parsed rows of a bundled table, looked up by file name.
pub fn bundled(name: &str) -> Option<Result<Vec<CountRow>>> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_counts(text.as_bytes()))
}
