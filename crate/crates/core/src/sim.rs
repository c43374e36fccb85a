//! Monte-Carlo driver for BER, complexity and stack-size experiments.
//!
//! Every trial draws its message and channel noise from a stream keyed by
//! `(seed, point, trial)`, so all windows simulated at one operating point see
//! the same realizations and their error counts can be compared pairwise. The
//! decoder's tie-breaking stream is keyed by `(seed, point, trial, delta)`.
//! Results do not depend on thread count or batch size.

use std::fs::File;
use std::io;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ebn0_to_epsilon, ChannelError, ChannelModel, SoftObservation};
use crate::code::{CodeError, CodeSpec, Message};
use crate::decoder::{DecodeError, Decoder, DecoderConfig, Limit};

/// Trials decoded in parallel before the stopping rule is checked.
const BATCH: u64 = 512;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Hard decisions with unit weights.
    Bsc,
    /// BPSK over AWGN with soft reliabilities.
    Awgn,
}

impl FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bsc" => Ok(Self::Bsc),
            "awgn" => Ok(Self::Awgn),
            _ => Err(format!("unknown channel {s:?} (expected bsc or awgn)")),
        }
    }
}

/// How an Eb/N0 value becomes a BSC crossover probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonMap {
    /// `1/2 erfc(sqrt(Eb/N0))`.
    #[default]
    Direct,
    /// `1/2 erfc(sqrt(R Eb/N0))`, i.e. hard-decision BPSK at code rate `R`.
    RateScaled,
}

impl FromStr for EpsilonMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "rate-scaled" | "rate" => Ok(Self::RateScaled),
            _ => Err(format!("unknown epsilon map {s:?} (expected direct or rate-scaled)")),
        }
    }
}

/// Operating points of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    /// Eb/N0 values in dB.
    Ebn0(Vec<f64>),
    /// BSC crossover probabilities.
    Epsilon(Vec<f64>),
}

impl Sweep {
    /// Parses `start:stop:step` (stop inclusive) or a comma-separated list.
    pub fn parse_ebn0(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 {
            let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(format!("bad range {s:?}"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            return Ok(Self::Ebn0((0..=count).map(|k| start + k as f64 * step).collect()));
        }
        parse_list(s).map(Self::Ebn0)
    }

    pub fn parse_epsilon(s: &str) -> Result<Self, String> {
        parse_list(s).map(Self::Epsilon)
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Ebn0(v) | Self::Epsilon(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"))).collect()
}

/// Parses `10,12,15,inf`.
pub fn parse_limits(s: &str) -> Result<Vec<Limit>, String> {
    s.split(',').map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Octal generators, e.g. `554,774`.
    pub code: String,
    pub m: usize,
    /// Information bits per trial.
    pub msg_len: usize,
    pub channel: ChannelKind,
    pub sweep: Sweep,
    pub epsilon_map: EpsilonMap,
    pub deltas: Vec<Limit>,
    pub tau: Limit,
    pub openmax: Limit,
    /// Maximum trials per (point, delta).
    pub trials: u64,
    /// Stop a (point, delta) run once this many bit errors have accumulated.
    pub target_errors: Option<u64>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(code: &str, m: usize, msg_len: usize) -> Self {
        Self {
            code: code.to_string(),
            m,
            msg_len,
            channel: ChannelKind::Bsc,
            sweep: Sweep::Ebn0(Vec::new()),
            epsilon_map: EpsilonMap::Direct,
            deltas: vec![Limit::Unbounded],
            tau: Limit::Unbounded,
            openmax: Limit::Unbounded,
            trials: 1000,
            target_errors: None,
            seed: 0,
        }
    }

    pub fn code_spec(&self) -> Result<CodeSpec, SimError> {
        Ok(CodeSpec::from_octal(&self.code, self.m, self.msg_len)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.sweep.is_empty() {
            return bad("the sweep has no operating points");
        }
        if self.deltas.is_empty() {
            return bad("at least one delta is required");
        }
        if self.target_errors == Some(0) {
            return bad("target errors must be at least 1");
        }
        if self.channel == ChannelKind::Awgn && matches!(self.sweep, Sweep::Epsilon(_)) {
            return bad("an epsilon sweep needs the bsc channel");
        }
        let code = self.code_spec()?;
        for &delta in &self.deltas {
            self.decoder_config(delta, 0).validate()?;
        }
        for point in 0..self.sweep.len() {
            self.channel_at(point, &code)?;
        }
        Ok(())
    }

    fn decoder_config(&self, delta: Limit, seed: u64) -> DecoderConfig {
        DecoderConfig { delta, tau: self.tau, openmax: self.openmax, seed }
    }

    /// Eb/N0 (if the sweep is in dB) and crossover probability of a point.
    /// For AWGN the probability is that of a hard decision on one symbol.
    pub fn point(&self, point: usize, code: &CodeSpec) -> (Option<f64>, f64) {
        match &self.sweep {
            Sweep::Epsilon(v) => (None, v[point]),
            Sweep::Ebn0(v) => {
                let db = v[point];
                let scaled = db + 10.0 * code.rate_bits().log10();
                let eps = match (self.channel, self.epsilon_map) {
                    (ChannelKind::Bsc, EpsilonMap::Direct) => ebn0_to_epsilon(db),
                    _ => ebn0_to_epsilon(scaled),
                };
                (Some(db), eps)
            }
        }
    }

    pub fn channel_at(&self, point: usize, code: &CodeSpec) -> Result<ChannelModel, SimError> {
        let (db, eps) = self.point(point, code);
        Ok(match (self.channel, db) {
            (ChannelKind::Awgn, Some(db)) => ChannelModel::awgn(db, code.rate_bits())?,
            _ => ChannelModel::bsc(eps)?,
        })
    }
}

fn stream(seed: u64, point: usize, trial: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, point as u64, trial, tag]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Message and channel observation of one trial. Independent of the window.
pub fn trial_observation(
    code: &CodeSpec,
    channel: &ChannelModel,
    seed: u64,
    point: usize,
    trial: u64,
) -> (Message, SoftObservation) {
    let mut rng = stream(seed, point, trial, 0);
    let msg = Message::new((0..code.msg_len()).map(|_| rng.random_range(0..2u8)).collect()).expect("binary");
    let cw = code.encode(&msg).expect("length matches");
    let obs = channel.soften(&channel.transmit(&cw, &mut rng)).expect("variant matches");
    (msg, obs)
}

/// Tie-breaking seed for the decoder in one trial.
pub fn trial_decoder_seed(seed: u64, point: usize, trial: u64, delta_index: usize) -> u64 {
    stream(seed, point, trial, 1 + delta_index as u64).next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: u32,
    pub failed: bool,
    pub branch_computations: u64,
    pub peak_stack: usize,
}

/// Decodes trials `range` of `(point, delta_index)` in parallel, in trial order.
pub fn run_trials(
    cfg: &SimConfig,
    code: &CodeSpec,
    point: usize,
    delta_index: usize,
    range: Range<u64>,
) -> Result<Vec<TrialOutcome>, SimError> {
    let channel = cfg.channel_at(point, code)?;
    let delta = cfg.deltas[delta_index];
    range
        .into_par_iter()
        .map_init(
            || Decoder::new(code.clone()),
            |decoder, trial| {
                let (msg, obs) = trial_observation(code, &channel, cfg.seed, point, trial);
                let dcfg = cfg.decoder_config(delta, trial_decoder_seed(cfg.seed, point, trial, delta_index));
                match decoder.decode(&obs, &dcfg) {
                    Ok(res) => Ok(TrialOutcome {
                        bit_errors: msg.iter().zip(res.message.iter()).filter(|(a, b)| a != b).count() as u32,
                        failed: false,
                        branch_computations: res.stats.branch_computations,
                        peak_stack: res.stats.peak_stack,
                    }),
                    Err(DecodeError::StackExhausted(stats)) => Ok(TrialOutcome {
                        bit_errors: code.msg_len() as u32,
                        failed: true,
                        branch_computations: stats.branch_computations,
                        peak_stack: stats.peak_stack,
                    }),
                    Err(e) => Err(SimError::Decode(e)),
                }
            },
        )
        .collect()
}

/// Runs one `(point, delta)` pair under the stopping rule and returns the
/// outcomes of the trials actually counted.
pub fn run_pair(
    cfg: &SimConfig,
    code: &CodeSpec,
    point: usize,
    delta_index: usize,
) -> Result<Vec<TrialOutcome>, SimError> {
    let mut out = Vec::new();
    let mut errors = 0u64;
    let mut next = 0u64;
    while next < cfg.trials {
        let end = (next + BATCH).min(cfg.trials);
        for outcome in run_trials(cfg, code, point, delta_index, next..end)? {
            errors += u64::from(outcome.bit_errors);
            out.push(outcome);
            if cfg.target_errors.is_some_and(|t| errors >= t) {
                return Ok(out);
            }
        }
        next = end;
    }
    Ok(out)
}

/// One row of simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub code_id: String,
    pub ebn0_db: Option<f64>,
    pub epsilon: f64,
    pub delta: Limit,
    pub tau: Limit,
    pub openmax: Limit,
    pub trials: u64,
    pub info_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub decode_failures: u64,
    pub avg_branch_computations_per_bit: f64,
    pub p999_stack_size: u64,
    pub mean_peak_stack: f64,
    pub wall_seconds: f64,
    pub seed: u64,
}

/// Column names of the CSV output, in order.
pub const CSV_HEADER: [&str; 16] = [
    "code_id",
    "ebn0_db",
    "epsilon",
    "delta",
    "tau",
    "openmax",
    "trials",
    "info_bits",
    "bit_errors",
    "ber",
    "decode_failures",
    "avg_branch_computations_per_bit",
    "p999_stack_size",
    "mean_peak_stack",
    "wall_seconds",
    "seed",
];

impl SimRecord {
    fn from_outcomes(
        cfg: &SimConfig,
        code: &CodeSpec,
        point: usize,
        delta: Limit,
        outcomes: &[TrialOutcome],
        wall_seconds: f64,
    ) -> Self {
        let (ebn0_db, epsilon) = cfg.point(point, code);
        let trials = outcomes.len() as u64;
        let info_bits = trials * code.msg_len() as u64;
        let bit_errors: u64 = outcomes.iter().map(|o| u64::from(o.bit_errors)).sum();
        let branches: u64 = outcomes.iter().map(|o| o.branch_computations).sum();
        let peaks: Vec<usize> = outcomes.iter().map(|o| o.peak_stack).collect();
        if peaks.len() < 1000 {
            log::warn!("99.9% stack quantile from only {} trials", peaks.len());
        }
        Self {
            code_id: code.octal_id(),
            ebn0_db,
            epsilon,
            delta,
            tau: cfg.tau,
            openmax: cfg.openmax,
            trials,
            info_bits,
            bit_errors,
            ber: bit_errors as f64 / info_bits as f64,
            decode_failures: outcomes.iter().filter(|o| o.failed).count() as u64,
            avg_branch_computations_per_bit: branches as f64 / info_bits as f64,
            p999_stack_size: quantile_stack(&peaks, 0.999).map_or(0, |v| v as u64),
            mean_peak_stack: peaks.iter().sum::<usize>() as f64 / trials as f64,
            wall_seconds,
            seed: cfg.seed,
        }
    }
}

/// Runs every `(point, delta)` pair, points outermost.
pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<SimRecord>, SimError> {
    cfg.validate()?;
    let code = cfg.code_spec()?;
    let mut records = Vec::with_capacity(cfg.sweep.len() * cfg.deltas.len());
    for point in 0..cfg.sweep.len() {
        for (di, &delta) in cfg.deltas.iter().enumerate() {
            let start = Instant::now();
            let outcomes = run_pair(cfg, &code, point, di)?;
            let rec = SimRecord::from_outcomes(cfg, &code, point, delta, &outcomes, start.elapsed().as_secs_f64());
            log::info!(
                "point {point} delta {delta}: {} trials, {} errors, ber {:.3e}",
                rec.trials,
                rec.bit_errors,
                rec.ber
            );
            records.push(rec);
        }
    }
    Ok(records)
}

/// Nearest-rank quantile: the `ceil(q T)`-th smallest of `T` values.
/// `None` for empty input.
pub fn quantile_stack(peaks: &[usize], q: f64) -> Option<usize> {
    if peaks.is_empty() {
        return None;
    }
    let rank = ((q * peaks.len() as f64).ceil() as usize).clamp(1, peaks.len());
    let mut v = peaks.to_vec();
    let (_, kth, _) = v.select_nth_unstable(rank - 1);
    Some(*kth)
}

/// Difference of two error rates measured on the same trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDifference {
    pub trials: usize,
    /// `BER(a) - BER(b)`.
    pub diff: f64,
    /// Standard error of `diff` from the per-trial differences.
    pub std_err: f64,
}

/// Compares the common prefix of two outcome lists from the same operating
/// point. `msg_len` converts per-trial error counts into rates.
pub fn paired_difference(a: &[TrialOutcome], b: &[TrialOutcome], msg_len: usize) -> PairedDifference {
    let t = a.len().min(b.len());
    let d: Vec<f64> =
        a[..t].iter().zip(&b[..t]).map(|(x, y)| f64::from(x.bit_errors) - f64::from(y.bit_errors)).collect();
    let mean = d.iter().sum::<f64>() / t as f64;
    let var = if t > 1 { d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1) as f64 } else { 0.0 };
    let l = msg_len as f64;
    PairedDifference { trials: t, diff: mean / l, std_err: (var / t as f64).sqrt() / l }
}

pub fn write_csv<W: io::Write>(records: &[SimRecord], writer: W) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[SimRecord], path: &Path) -> Result<(), SimError> {
    write_csv(records, File::create(path)?)
}

pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<SimRecord>, SimError> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(SimError::Config(format!("unexpected CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<SimRecord>, SimError> {
    read_csv(File::open(path)?)
}
