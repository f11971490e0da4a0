//! Pulse-level Monte Carlo of preparation, interference measurement and sifting.
//!
//! # Random stream layout
//!
//! Rounds are grouped into blocks of `SimOptions::block_size` consecutive
//! indices. Block `j` draws from `ChaCha8Rng::seed_from_u64(seed)` switched
//! to stream `j`, so every block can be generated independently (and in
//! parallel) while the merged result stays a pure function of
//! `(params, channel, stop rule, seed, block_size)`. Within a round the draw
//! order is: Alice's bit, Bob's bit, Alice's, Bob's and Charlie's basis, the
//! outcome uniform, and finally the double-click resolution bit when needed.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QssError, Result};
use crate::optics::{self, ChannelModel, SourceParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Y,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "X",
            Basis::Y => "Y",
        })
    }
}

/// A phase that is an integer multiple of pi/2, stored as `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuarterTurns(u8);

impl QuarterTurns {
    pub const ZERO: QuarterTurns = QuarterTurns(0);

    pub fn new(q: u8) -> Option<Self> {
        (q < 4).then_some(QuarterTurns(q))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * FRAC_PI_2
    }

    pub fn plus(self, other: QuarterTurns) -> QuarterTurns {
        QuarterTurns((self.0 + other.0) % 4)
    }

    pub fn minus(self, other: QuarterTurns) -> QuarterTurns {
        QuarterTurns((self.0 + 4 - other.0) % 4)
    }
}

/// Player encoding: X carries `s * pi`, Y carries `(3/2 - s) * pi`.
pub fn player_quarter_turns(basis: Basis, bit: u8) -> QuarterTurns {
    debug_assert!(bit < 2);
    match basis {
        Basis::X => QuarterTurns(2 * bit),
        Basis::Y => QuarterTurns(3 - 2 * bit),
    }
}

pub fn encode_player_phase(basis: Basis, bit: u8) -> f64 {
    player_quarter_turns(basis, bit).radians()
}

/// Extra phase the dealer puts on Bob's pulse.
pub fn charlie_quarter_turns(basis: Basis) -> QuarterTurns {
    match basis {
        Basis::X => QuarterTurns(0),
        Basis::Y => QuarterTurns(1),
    }
}

pub fn charlie_phase(basis: Basis) -> f64 {
    charlie_quarter_turns(basis).radians()
}

/// Outcome probabilities of one interference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbabilities {
    /// Only SPD1 registered (bit 0).
    pub only0: f64,
    /// Only SPD2 registered (bit 1).
    pub only1: f64,
    pub none: f64,
    pub double: f64,
}

impl ClickProbabilities {
    pub fn total(&self) -> f64 {
        self.only0 + self.only1 + self.none + self.double
    }

    pub fn detection(&self) -> f64 {
        self.only0 + self.only1 + self.double
    }
}

/// Beam-splitter click model.
///
/// With `dphi = phase_b_total - phase_a`, SPD1 sees intensity
/// `2 mu eta cos^2(dphi/2)` and SPD2 `2 mu eta sin^2(dphi/2)`; each stays dark
/// with probability `(1 - p_d) e^{-I}`. Misalignment then swaps the registered
/// bit of a single click with probability `e_d`.
pub fn click_probabilities(
    phase_a: f64,
    phase_b_total: f64,
    mu: f64,
    eta: f64,
    dark_count: f64,
    misalignment: f64,
) -> ClickProbabilities {
    let dphi = (phase_b_total - phase_a).rem_euclid(TAU);
    let signal = 2.0 * mu * eta;
    let half = 0.5 * dphi;
    let i1 = signal * half.cos().powi(2);
    let i2 = signal * half.sin().powi(2);
    let dark1 = (1.0 - dark_count) * (-i1).exp();
    let dark2 = (1.0 - dark_count) * (-i2).exp();
    // complements via exp_m1 keep tiny click probabilities accurate
    let click1 = dark_count + (1.0 - dark_count) * -(-i1).exp_m1();
    let click2 = dark_count + (1.0 - dark_count) * -(-i2).exp_m1();
    let ideal0 = click1 * dark2;
    let ideal1 = dark1 * click2;
    ClickProbabilities {
        only0: (1.0 - misalignment) * ideal0 + misalignment * ideal1,
        only1: misalignment * ideal0 + (1.0 - misalignment) * ideal1,
        none: dark1 * dark2,
        double: click1 * click2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Zero,
    One,
    /// No detector fired.
    Empty,
    /// Both fired; the dealer picked `resolved` uniformly.
    Double {
        resolved: u8,
    },
}

impl Outcome {
    pub fn bit(self) -> Option<u8> {
        match self {
            Outcome::Zero => Some(0),
            Outcome::One => Some(1),
            Outcome::Empty => None,
            Outcome::Double { resolved } => Some(resolved),
        }
    }

    pub fn is_detection(self) -> bool {
        !matches!(self, Outcome::Empty)
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Zero => "0",
            Outcome::One => "1",
            Outcome::Empty => "none",
            Outcome::Double { .. } => "double",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetTag {
    X,
    Ybc,
    Yac,
    Discard,
}

impl SetTag {
    pub fn label(self) -> &'static str {
        match self {
            SetTag::X => "X",
            SetTag::Ybc => "Ybc",
            SetTag::Yac => "Yac",
            SetTag::Discard => "discard",
        }
    }
}

/// Sifted set of a round from the announced bases.
pub fn sift(a: Basis, b: Basis, c: Basis, detected: bool) -> SetTag {
    use Basis::{X, Y};
    if !detected {
        return SetTag::Discard;
    }
    match (a, b, c) {
        (X, X, X) => SetTag::X,
        (X, Y, Y) => SetTag::Ybc,
        (Y, X, Y) => SetTag::Yac,
        _ => SetTag::Discard,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRecord {
    pub index: u64,
    pub s_a: u8,
    pub s_b: u8,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub basis_c: Basis,
    pub outcome: Outcome,
    /// Dealer's bit; absent iff nothing was detected.
    pub s_c: Option<u8>,
    pub tag: SetTag,
}

impl RoundRecord {
    /// Whether the dealer's bit disagrees with `s_a xor s_b` once the Y_ac
    /// flip is applied.
    pub fn is_error(&self) -> bool {
        let Some(c) = self.s_c else { return false };
        let c = if self.tag == SetTag::Yac { c ^ 1 } else { c };
        c != self.s_a ^ self.s_b
    }
}

/// Flip the dealer's bit for Y_ac rounds; other sets pass through.
pub fn apply_yac_flip(record: RoundRecord) -> Result<RoundRecord> {
    let Some(c) = record.s_c else {
        return Err(QssError::NoDetection {
            index: record.index,
        });
    };
    if record.tag != SetTag::Yac {
        return Ok(record);
    }
    Ok(RoundRecord {
        s_c: Some(c ^ 1),
        ..record
    })
}

/// Sizes and error counts of the three sifted sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SiftedTallies {
    pub n_x: u64,
    pub m_x: u64,
    pub n_ybc: u64,
    pub m_ybc: u64,
    pub n_yac: u64,
    pub m_yac: u64,
    pub total_rounds: u64,
}

impl SiftedTallies {
    fn record(&mut self, rec: &RoundRecord) {
        let err = u64::from(rec.is_error());
        match rec.tag {
            SetTag::X => {
                self.n_x += 1;
                self.m_x += err;
            }
            SetTag::Ybc => {
                self.n_ybc += 1;
                self.m_ybc += err;
            }
            SetTag::Yac => {
                self.n_yac += 1;
                self.m_yac += err;
            }
            SetTag::Discard => {}
        }
    }

    /// Combine tallies of disjoint round ranges.
    pub fn merge(&mut self, other: &SiftedTallies) {
        self.n_x += other.n_x;
        self.m_x += other.m_x;
        self.n_ybc += other.n_ybc;
        self.m_ybc += other.m_ybc;
        self.n_yac += other.n_yac;
        self.m_yac += other.m_yac;
        self.total_rounds += other.total_rounds;
    }

    pub fn meets(&self, t: &Thresholds) -> bool {
        self.n_x >= t.n_x && self.n_ybc >= t.n_ybc && self.n_yac >= t.n_yac
    }

    pub fn error_rate_x(&self) -> Option<f64> {
        ratio(self.m_x, self.n_x)
    }

    pub fn error_rate_ybc(&self) -> Option<f64> {
        ratio(self.m_ybc, self.n_ybc)
    }

    pub fn error_rate_yac(&self) -> Option<f64> {
        ratio(self.m_yac, self.n_yac)
    }
}

fn ratio(m: u64, n: u64) -> Option<f64> {
    (n > 0).then(|| m as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub n_x: u64,
    pub n_ybc: u64,
    pub n_yac: u64,
}

/// Bits of one sifted round, with the Y_ac flip already applied to `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyTriple {
    pub a: u8,
    pub b: u8,
    pub c: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawKeys {
    pub x: Vec<KeyTriple>,
    pub ybc: Vec<KeyTriple>,
    pub yac: Vec<KeyTriple>,
}

impl RawKeys {
    fn push(&mut self, rec: &RoundRecord) {
        let Ok(flipped) = apply_yac_flip(*rec) else {
            return;
        };
        let Some(c) = flipped.s_c else { return };
        let t = KeyTriple {
            a: rec.s_a,
            b: rec.s_b,
            c,
        };
        match rec.tag {
            SetTag::X => self.x.push(t),
            SetTag::Ybc => self.ybc.push(t),
            SetTag::Yac => self.yac.push(t),
            SetTag::Discard => {}
        }
    }

    /// Split a set into the three parties' bit strings.
    pub fn columns(set: &[KeyTriple]) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let a = set.iter().map(|t| t.a).collect();
        let b = set.iter().map(|t| t.b).collect();
        let c = set.iter().map(|t| t.c).collect();
        (a, b, c)
    }
}

/// `S_c == S_a xor S_b` bit by bit.
pub fn verify_correlation(key_a: &[u8], key_b: &[u8], key_c: &[u8]) -> Result<bool> {
    if key_a.len() != key_b.len() || key_a.len() != key_c.len() {
        return Err(QssError::LengthMismatch {
            a: key_a.len(),
            b: key_b.len(),
            c: key_c.len(),
        });
    }
    Ok(key_a
        .iter()
        .zip(key_b)
        .zip(key_c)
        .all(|((a, b), c)| a ^ b == *c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub tallies: SiftedTallies,
    pub raw_keys: RawKeys,
    pub rounds_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run until every set reaches its threshold.
    Thresholds(Thresholds),
    /// Run exactly this many rounds.
    Rounds(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub block_size: u64,
    /// Round cap for threshold runs; `None` means 100x the expected count.
    pub round_cap: Option<u64>,
    /// Generate blocks on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            block_size: 1 << 16,
            round_cap: None,
            parallel: true,
        }
    }
}

/// Sampler with the four possible phase differences precomputed.
#[derive(Debug, Clone)]
pub struct RoundSampler {
    basis_x: Bernoulli,
    /// Cumulative (only0, only1, none) per phase difference in quarter turns.
    cdf: [[f64; 3]; 4],
}

impl RoundSampler {
    pub fn new(params: &SourceParams, ch: &ChannelModel) -> Result<Self> {
        params.validate()?;
        ch.validate()?;
        let eta = ch.transmittance();
        let mut cdf = [[0.0; 3]; 4];
        for (q, slot) in cdf.iter_mut().enumerate() {
            let p = click_probabilities(
                0.0,
                q as f64 * FRAC_PI_2,
                params.intensity,
                eta,
                ch.dark_count,
                ch.misalignment,
            );
            *slot = [p.only0, p.only0 + p.only1, p.only0 + p.only1 + p.none];
        }
        let basis_x =
            Bernoulli::new(params.px).map_err(|_| QssError::domain("p_x", params.px, "(0, 1)"))?;
        Ok(RoundSampler { basis_x, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, index: u64, rng: &mut R) -> RoundRecord {
        let s_a = u8::from(rng.random::<bool>());
        let s_b = u8::from(rng.random::<bool>());
        let mut basis = || {
            if self.basis_x.sample(rng) {
                Basis::X
            } else {
                Basis::Y
            }
        };
        let basis_a = basis();
        let basis_b = basis();
        let basis_c = basis();
        let bob_total = player_quarter_turns(basis_b, s_b).plus(charlie_quarter_turns(basis_c));
        let dphi = bob_total.minus(player_quarter_turns(basis_a, s_a));
        let cdf = &self.cdf[usize::from(dphi.get())];
        let u: f64 = rng.random();
        let outcome = if u < cdf[0] {
            Outcome::Zero
        } else if u < cdf[1] {
            Outcome::One
        } else if u < cdf[2] {
            Outcome::Empty
        } else {
            Outcome::Double {
                resolved: u8::from(rng.random::<bool>()),
            }
        };
        RoundRecord {
            index,
            s_a,
            s_b,
            basis_a,
            basis_b,
            basis_c,
            outcome,
            s_c: outcome.bit(),
            tag: sift(basis_a, basis_b, basis_c, outcome.is_detection()),
        }
    }
}

/// One protocol round from an arbitrary random source.
pub fn simulate_round<R: Rng + ?Sized>(
    params: &SourceParams,
    ch: &ChannelModel,
    rng: &mut R,
) -> Result<RoundRecord> {
    Ok(RoundSampler::new(params, ch)?.sample(0, rng))
}

/// The generator used for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Expected number of rounds until every threshold is reached, using the
/// slowest set: `max_s threshold_s / P(s)`.
pub fn expected_rounds(params: &SourceParams, ch: &ChannelModel, t: &Thresholds) -> f64 {
    let q = optics::gain(params.intensity, ch.transmittance(), ch.dark_count);
    let px = params.px;
    let py = params.py();
    let p_x_set = px.powi(3) * q;
    let p_y_set = px * py * py * q;
    let need = |n: u64, p: f64| if n == 0 { 0.0 } else { n as f64 / p };
    need(t.n_x, p_x_set)
        .max(need(t.n_ybc, p_y_set))
        .max(need(t.n_yac, p_y_set))
}

/// Run rounds until the thresholds are met.
pub fn run_protocol(
    params: &SourceParams,
    ch: &ChannelModel,
    thresholds: Thresholds,
    seed: u64,
    options: &SimOptions,
) -> Result<RunOutcome> {
    execute(
        params,
        ch,
        StopRule::Thresholds(thresholds),
        seed,
        options,
        None,
    )
}

/// Run a fixed number of rounds.
pub fn simulate_rounds(
    params: &SourceParams,
    ch: &ChannelModel,
    rounds: u64,
    seed: u64,
    options: &SimOptions,
) -> Result<RunOutcome> {
    execute(params, ch, StopRule::Rounds(rounds), seed, options, None)
}

pub type TraceSink<'a> = &'a mut dyn FnMut(&RoundRecord) -> std::io::Result<()>;

/// General driver. When `trace` is given it receives every round in index
/// order, including rounds without a detection.
pub fn execute(
    params: &SourceParams,
    ch: &ChannelModel,
    stop: StopRule,
    seed: u64,
    options: &SimOptions,
    mut trace: Option<TraceSink<'_>>,
) -> Result<RunOutcome> {
    let sampler = RoundSampler::new(params, ch)?;
    let block_size = options.block_size.max(1);
    let limit = match stop {
        StopRule::Rounds(n) => n,
        StopRule::Thresholds(t) => {
            if t.n_x == 0 && t.n_ybc == 0 && t.n_yac == 0 {
                return Err(QssError::domain("thresholds", 0.0, "at least one positive"));
            }
            options.round_cap.unwrap_or_else(|| {
                let expected = expected_rounds(params, ch, &t);
                if expected.is_finite() {
                    (100.0 * expected).ceil().min(u64::MAX as f64 / 2.0) as u64
                } else {
                    0
                }
            })
        }
    };
    let keep_all = trace.is_some();

    let mut tallies = SiftedTallies::default();
    let mut raw_keys = RawKeys::default();
    let batch = if options.parallel { 16 } else { 1 };
    let n_blocks = limit.div_ceil(block_size);
    let mut next_block = 0u64;

    while next_block < n_blocks {
        let end = (next_block + batch).min(n_blocks);
        let blocks = generate_blocks(
            &sampler,
            seed,
            next_block..end,
            block_size,
            limit,
            keep_all,
            options.parallel,
        );
        for block in blocks {
            for rec in &block {
                if let Some(sink) = trace.as_mut() {
                    sink(rec)?;
                }
                if !rec.outcome.is_detection() {
                    continue;
                }
                tallies.record(rec);
                raw_keys.push(rec);
                if let StopRule::Thresholds(t) = stop {
                    if tallies.meets(&t) {
                        let used = rec.index + 1;
                        tallies.total_rounds = used;
                        return Ok(RunOutcome {
                            tallies,
                            raw_keys,
                            rounds_used: used,
                        });
                    }
                }
            }
        }
        next_block = end;
    }

    tallies.total_rounds = limit;
    let outcome = RunOutcome {
        tallies,
        raw_keys,
        rounds_used: limit,
    };
    match stop {
        StopRule::Rounds(_) => Ok(outcome),
        StopRule::Thresholds(_) => Err(QssError::CapExceeded {
            cap: limit,
            partial: Box::new(outcome),
        }),
    }
}

fn simulate_block(
    sampler: &RoundSampler,
    seed: u64,
    block: u64,
    block_size: u64,
    limit: u64,
    keep_all: bool,
) -> Vec<RoundRecord> {
    let mut rng = block_rng(seed, block);
    let start = block * block_size;
    let end = (start + block_size).min(limit);
    let mut out = Vec::new();
    for index in start..end {
        let rec = sampler.sample(index, &mut rng);
        if keep_all || rec.outcome.is_detection() {
            out.push(rec);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn generate_blocks(
    sampler: &RoundSampler,
    seed: u64,
    blocks: std::ops::Range<u64>,
    block_size: u64,
    limit: u64,
    keep_all: bool,
    parallel: bool,
) -> Vec<Vec<RoundRecord>> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return blocks
            .into_par_iter()
            .map(|b| simulate_block(sampler, seed, b, block_size, limit, keep_all))
            .collect();
    }
    let _ = parallel;
    blocks
        .map(|b| simulate_block(sampler, seed, b, block_size, limit, keep_all))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn player_phases() {
        assert_eq!(encode_player_phase(Basis::X, 0), 0.0);
        assert_eq!(encode_player_phase(Basis::X, 1), PI);
        assert_eq!(encode_player_phase(Basis::Y, 1), FRAC_PI_2);
        assert_eq!(encode_player_phase(Basis::Y, 0), 3.0 * FRAC_PI_2);
    }

    #[test]
    fn charlie_phases() {
        assert_eq!(charlie_phase(Basis::X), 0.0);
        assert_eq!(charlie_phase(Basis::Y), FRAC_PI_2);
        assert_eq!(charlie_phase(Basis::Y), charlie_phase(Basis::Y));
    }

    #[test]
    fn click_probability_examples() {
        let (mu, eta) = (0.3, 0.5);
        let p = click_probabilities(0.0, 0.0, mu, eta, 0.0, 0.0);
        assert_eq!(p.only1, 0.0);
        assert!((p.only0 - (1.0 - (-2.0f64 * mu * eta).exp())).abs() < 1e-15);
        let p = click_probabilities(0.0, FRAC_PI_2, mu, eta, 0.0, 0.0);
        assert!((p.only0 - p.only1).abs() < 1e-15);
        for &(pa, pb) in &[(0.0, 0.0), (FRAC_PI_2, PI), (3.0 * FRAC_PI_2, 0.0)] {
            let p = click_probabilities(pa, pb, 0.01, 0.2, 1e-3, 0.03);
            assert!((p.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_click_probability_is_the_gain() {
        for &(mu, eta, pd) in &[(9e-4, 0.0126, 2e-8), (0.1, 0.3, 1e-3), (2.0, 1.0, 0.05)] {
            for &dphi in &[0.0, PI] {
                let p = click_probabilities(0.0, dphi, mu, eta, pd, 0.015);
                let q = optics::gain(mu, eta, pd);
                assert!(((p.only0 + p.only1) - q).abs() <= 1e-15 * q.max(1e-300) + 1e-18);
                let e = optics::bit_error_x(mu, eta, pd, 0.015).unwrap();
                let wrong = if dphi == 0.0 { p.only1 } else { p.only0 };
                assert!((wrong / (p.only0 + p.only1) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn yac_flip() {
        let rec = RoundRecord {
            index: 3,
            s_a: 0,
            s_b: 1,
            basis_a: Basis::Y,
            basis_b: Basis::X,
            basis_c: Basis::Y,
            outcome: Outcome::Zero,
            s_c: Some(0),
            tag: SetTag::Yac,
        };
        let flipped = apply_yac_flip(rec).unwrap();
        assert_eq!(flipped.s_c, Some(1));
        assert_eq!(apply_yac_flip(flipped).unwrap(), rec);
        let x = RoundRecord {
            tag: SetTag::X,
            basis_a: Basis::X,
            ..rec
        };
        assert_eq!(apply_yac_flip(x).unwrap(), x);
        let none = RoundRecord {
            outcome: Outcome::Empty,
            s_c: None,
            tag: SetTag::Discard,
            ..rec
        };
        assert!(matches!(
            apply_yac_flip(none),
            Err(QssError::NoDetection { index: 3 })
        ));
    }

    #[test]
    fn correlation_examples() {
        assert!(verify_correlation(&[0, 1, 1, 0], &[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap());
        assert!(!verify_correlation(&[0], &[0], &[1]).unwrap());
        assert!(verify_correlation(&[0, 1], &[0], &[1]).is_err());
    }

    #[test]
    fn yyy_rounds_are_discarded() {
        assert_eq!(sift(Basis::Y, Basis::Y, Basis::Y, true), SetTag::Discard);
        assert_eq!(sift(Basis::X, Basis::X, Basis::X, false), SetTag::Discard);
    }

    #[test]
    fn ideal_phase_algebra_gives_xor() {
        // dphi is 0 for s_a xor s_b = 0 in X and Y_bc, and pi extra in Y_ac
        for sa in 0..2u8 {
            for sb in 0..2u8 {
                for (a, b, c, extra) in [
                    (Basis::X, Basis::X, Basis::X, 0u8),
                    (Basis::X, Basis::Y, Basis::Y, 0),
                    (Basis::Y, Basis::X, Basis::Y, 1),
                ] {
                    let dphi = player_quarter_turns(b, sb)
                        .plus(charlie_quarter_turns(c))
                        .minus(player_quarter_turns(a, sa));
                    assert_eq!(dphi.get(), 2 * ((sa ^ sb) ^ extra), "{a}{b}{c} {sa}{sb}");
                }
            }
        }
    }

    #[test]
    fn noiseless_x_rounds_follow_interference() {
        let params = SourceParams::new(0.5, 0.9, 1.16).unwrap();
        let ch = ChannelModel::new(0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let sampler = RoundSampler::new(&params, &ch).unwrap();
        let mut rng = block_rng(11, 0);
        for i in 0..5000 {
            let rec = sampler.sample(i, &mut rng);
            if rec.basis_a == Basis::X && rec.basis_b == Basis::X && rec.basis_c == Basis::X {
                match rec.outcome {
                    Outcome::Empty => {}
                    o if rec.s_a == rec.s_b => assert_eq!(o, Outcome::Zero),
                    o => assert_eq!(o, Outcome::One),
                }
            }
            assert_eq!(rec.s_c.is_some(), rec.outcome.is_detection());
        }
    }

    #[test]
    fn cap_exceeded_reports_partial_tallies() {
        let params = SourceParams::new(1e-4, 0.9, 1.16).unwrap();
        let ch = ChannelModel::default().with_length(100.0);
        let opts = SimOptions {
            round_cap: Some(10_000),
            ..SimOptions::default()
        };
        let t = Thresholds {
            n_x: 1_000,
            n_ybc: 1_000,
            n_yac: 1_000,
        };
        let err = run_protocol(&params, &ch, t, 1, &opts).unwrap_err();
        let partial = err.partial_tallies().copied().unwrap();
        assert_eq!(partial.total_rounds, 10_000);
    }
}
