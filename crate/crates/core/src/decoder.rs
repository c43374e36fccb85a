//! Trellis-based maximum-likelihood sequential decoding (MLSDA).
//!
//! The search repeatedly expands the best path of the Open Stack, where paths
//! are ranked by the accumulated weighted mismatch between their labels and the
//! hard decisions. Because that metric never decreases along a path, the first
//! path to reach the end of the trellis is a maximum-likelihood codeword.
//!
//! Three optional restrictions trade optimality for work and memory:
//!
//! * early elimination with window `delta`: a top path ending at level
//!   `<= l_max - delta` is dropped unexpanded, where `l_max` is the deepest
//!   level expanded so far;
//! * a backsearch limit `tau`: input bits more than `tau` levels behind the
//!   expanded frontier are decided from the path being expanded, and popped
//!   paths that disagree with the decided prefix are dropped;
//! * an Open Stack capacity `openmax`: on overflow the worst path is evicted.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::SoftObservation;
use crate::code::{CodeSpec, Codeword, Message};
use crate::stack::{Handle, OpenStack, PriorityKey};

/// A positive bound or no bound at all; printed and parsed as `inf` when
/// unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Limit {
    Finite(usize),
    #[default]
    Unbounded,
}

impl Limit {
    pub fn finite(self) -> Option<usize> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        self == Self::Unbounded
    }
}

impl From<Option<usize>> for Limit {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Self::Unbounded, Self::Finite)
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Unbounded => f.write_str("inf"),
        }
    }
}

impl From<Limit> for String {
    fn from(v: Limit) -> Self {
        v.to_string()
    }
}

impl TryFrom<String> for Limit {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for Limit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") || s == "∞" {
            return Ok(Self::Unbounded);
        }
        s.parse::<usize>().map(Self::Finite).map_err(|_| format!("expected a positive integer or `inf`, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    /// Early-elimination window, in trellis levels.
    pub delta: Limit,
    /// Backsearch limit, in trellis levels.
    pub tau: Limit,
    /// Open Stack capacity.
    pub openmax: Limit,
    /// Seed for the random tie-breaking stream.
    pub seed: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self::unbounded(0)
    }
}

impl DecoderConfig {
    /// Plain MLSDA: no window, no backsearch, unlimited stack.
    pub fn unbounded(seed: u64) -> Self {
        Self { delta: Limit::Unbounded, tau: Limit::Unbounded, openmax: Limit::Unbounded, seed }
    }

    pub fn with_delta(self, delta: Limit) -> Self {
        Self { delta, ..self }
    }

    pub fn with_tau(self, tau: Limit) -> Self {
        Self { tau, ..self }
    }

    pub fn with_openmax(self, openmax: Limit) -> Self {
        Self { openmax, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        for (name, limit) in [("delta", self.delta), ("tau", self.tau), ("openmax", self.openmax)] {
            if limit == Limit::Finite(0) {
                return Err(DecodeError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecoderStats {
    /// Branch-metric evaluations, one per successor generated.
    pub branch_computations: u64,
    /// Largest live Open Stack size.
    pub peak_stack: usize,
    pub early_eliminations: u64,
    /// Paths dropped when two paths met at the same node.
    pub merges: u64,
    /// Top-path removals, including dropped ones.
    pub pops: u64,
    pub ell_max_final: usize,
    pub evictions: u64,
    /// Popped paths dropped for disagreeing with the decided prefix.
    pub backsearch_discards: u64,
    /// Nodes expanded (each at most once).
    pub expansions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub message: Message,
    pub codeword: Codeword,
    /// Weighted mismatch of `codeword` against the observation.
    pub metric: f64,
    pub stats: DecoderStats,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("observation has {got} symbols, code expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("level {level} is outside the trellis of depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("branch has {got} outputs, code has {expected}")]
    OutputCount { expected: usize, got: usize },
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),
    /// Every path was eliminated before one reached the end of the trellis.
    #[error("open stack exhausted after {} pops", .0.pops)]
    StackExhausted(DecoderStats),
}

impl DecodeError {
    pub fn stats(&self) -> Option<&DecoderStats> {
        match self {
            Self::StackExhausted(s) => Some(s),
            _ => None,
        }
    }
}

/// `sum_i (y_{ln+i} xor outputs_i) w_{ln+i}` for the branch at `level`.
pub fn branch_metric(obs: &SoftObservation, n: usize, level: usize, outputs: &[u8]) -> Result<f64, DecodeError> {
    if outputs.len() != n {
        return Err(DecodeError::OutputCount { expected: n, got: outputs.len() });
    }
    let depth = obs.len() / n.max(1);
    if level >= depth {
        return Err(DecodeError::LevelOutOfRange { level, depth });
    }
    let base = level * n;
    Ok(outputs.iter().enumerate().filter(|&(i, &x)| obs.y()[base + i] != x).map(|(i, _)| obs.w()[base + i]).sum())
}

/// Observation repacked per trellis level for fast branch metrics.
pub(crate) struct LevelMetrics<'a> {
    n: usize,
    y_words: Vec<u32>,
    w: &'a [f64],
}

impl<'a> LevelMetrics<'a> {
    pub(crate) fn new(code: &CodeSpec, obs: &'a SoftObservation) -> Result<Self, DecodeError> {
        if obs.len() != code.code_len() {
            return Err(DecodeError::LengthMismatch { expected: code.code_len(), got: obs.len() });
        }
        let n = code.n();
        let y_words = obs
            .y()
            .chunks_exact(n)
            .map(|c| c.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i)))
            .collect();
        Ok(Self { n, y_words, w: obs.w() })
    }

    /// Same value as [`branch_metric`], summed in the same order.
    #[inline]
    pub(crate) fn branch(&self, level: usize, word: u32) -> f64 {
        let mut diff = self.y_words[level] ^ word;
        let base = level * self.n;
        let mut sum = 0.0;
        while diff != 0 {
            sum += self.w[base + diff.trailing_zeros() as usize];
            diff &= diff - 1;
        }
        sum
    }
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct PathNode {
    metric: f64,
    parent: u32,
    level: u32,
    state: u32,
    bit: u8,
}

/// Reusable MLSDA decoder. Buffers are kept between calls to
/// [`Decoder::decode`], so one instance per thread is the cheap way to run
/// many decodes.
pub struct Decoder {
    code: CodeSpec,
    stack: OpenStack,
    paths: Vec<PathNode>,
    closed: Vec<u64>,
    live: Vec<u32>,
    decided: Vec<u32>,
}

impl fmt::Debug for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Decoder").field("code", &self.code).finish_non_exhaustive()
    }
}

impl Decoder {
    pub fn new(code: CodeSpec) -> Self {
        let nodes = (code.depth() + 1) * code.num_states();
        Self {
            stack: OpenStack::new(),
            paths: Vec::new(),
            closed: vec![0; nodes.div_ceil(64)],
            live: vec![NIL; nodes],
            decided: Vec::new(),
            code,
        }
    }

    pub fn code(&self) -> &CodeSpec {
        &self.code
    }

    pub fn decode(&mut self, obs: &SoftObservation, cfg: &DecoderConfig) -> Result<DecodeResult, DecodeError> {
        self.run(obs, cfg, &mut |_, _| {})
    }

    /// Decodes with the backsearch rule active, handing decided input bits to
    /// `sink` as `(first_level, bits)` as soon as they are fixed. The final
    /// call delivers the remainder of the message.
    pub fn decode_stream(
        &mut self,
        obs: &SoftObservation,
        cfg: &DecoderConfig,
        mut sink: impl FnMut(usize, &[u8]),
    ) -> Result<DecodeResult, DecodeError> {
        if cfg.tau.is_unbounded() {
            return Err(DecodeError::InvalidConfig("streaming needs a finite tau".into()));
        }
        let msg_len = self.code.msg_len();
        let mut emitted = 0;
        let result = self.run(obs, cfg, &mut |start, bits| {
            // tail levels carry no message bits
            let end = (start + bits.len()).min(msg_len);
            if end > start {
                sink(start, &bits[..end - start]);
                emitted = end;
            }
        })?;
        if emitted < msg_len {
            sink(emitted, &result.message[emitted..]);
        }
        Ok(result)
    }

    #[inline]
    fn node(&self, level: usize, state: usize) -> usize {
        level * self.code.num_states() + state
    }

    #[inline]
    fn is_closed(&self, node: usize) -> bool {
        self.closed[node / 64] >> (node % 64) & 1 == 1
    }

    fn reset(&mut self) {
        for e in self.stack.iter() {
            let p = self.paths[e.handle.0 as usize];
            let node = p.level as usize * self.code.num_states() + p.state as usize;
            self.live[node] = NIL;
        }
        self.stack.clear();
        self.paths.clear();
        self.closed.iter_mut().for_each(|w| *w = 0);
        self.decided.clear();
        debug_assert!(self.live.iter().all(|&h| h == NIL));
    }

    fn new_path(&mut self, node: PathNode) -> u32 {
        let id = self.paths.len();
        assert!(id < NIL as usize, "path arena exhausted");
        self.paths.push(node);
        id as u32
    }

    /// Ancestor of `id` at `level` (which must not exceed the path's level).
    fn ancestor(&self, mut id: u32, level: u32) -> u32 {
        while self.paths[id as usize].level > level {
            id = self.paths[id as usize].parent;
        }
        id
    }

    fn traceback_bits(&self, mut id: u32, down_to: u32) -> Vec<u8> {
        let mut bits = Vec::new();
        while self.paths[id as usize].level > down_to {
            let p = self.paths[id as usize];
            bits.push(p.bit);
            id = p.parent;
        }
        bits.reverse();
        bits
    }

    fn run(
        &mut self,
        obs: &SoftObservation,
        cfg: &DecoderConfig,
        emit: &mut dyn FnMut(usize, &[u8]),
    ) -> Result<DecodeResult, DecodeError> {
        cfg.validate()?;
        let metrics = LevelMetrics::new(&self.code, obs)?;
        self.reset();
        if let Limit::Finite(cap) = cfg.openmax {
            if cap < self.code.num_states() {
                log::debug!("openmax {cap} is below the state count {}", self.code.num_states());
            }
        }
        self.stack.set_capacity_limit(cfg.openmax.finite());

        let depth = self.code.depth();
        let msg_len = self.code.msg_len();
        let delta = cfg.delta.finite();
        let tau = cfg.tau.finite();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut stats = DecoderStats::default();
        let mut ell_max = 0usize;
        // Levels 0..=decided_len have fixed path nodes in `self.decided`.
        let mut decided_len = 0usize;

        let origin = self.new_path(PathNode { metric: 0.0, parent: NIL, level: 0, state: 0, bit: 0 });
        self.stack.push(PriorityKey::new(0.0, 0, rng.random()), Handle(origin));
        self.live[0] = origin;
        self.decided.push(origin);

        let finish = loop {
            let Ok(top) = self.stack.pop_best() else {
                stats.peak_stack = self.stack.peak_size();
                stats.ell_max_final = ell_max;
                return Err(DecodeError::StackExhausted(stats));
            };
            stats.pops += 1;
            let id = top.handle.0;
            let path = self.paths[id as usize];
            let level = path.level as usize;
            let state = path.state as usize;
            let node = self.node(level, state);
            self.live[node] = NIL;

            if level == depth {
                break id;
            }

            if tau.is_some() && decided_len > 0 {
                let agrees = level > decided_len && self.ancestor(id, decided_len as u32) == self.decided[decided_len];
                if !agrees {
                    stats.backsearch_discards += 1;
                    continue;
                }
            }

            if let Some(delta) = delta {
                if level + delta <= ell_max {
                    stats.early_eliminations += 1;
                    continue;
                }
            }
            ell_max = ell_max.max(level);

            if let Some(tau) = tau {
                if level > decided_len + tau {
                    let target = level - tau;
                    let mut chain = Vec::with_capacity(target - decided_len);
                    let mut cur = self.ancestor(id, target as u32);
                    while self.paths[cur as usize].level as usize > decided_len {
                        chain.push(cur);
                        cur = self.paths[cur as usize].parent;
                    }
                    debug_assert_eq!(cur, self.decided[decided_len]);
                    chain.reverse();
                    let bits: Vec<u8> = chain.iter().map(|&c| self.paths[c as usize].bit).collect();
                    self.decided.extend(chain);
                    emit(decided_len, &bits);
                    decided_len = target;
                }
            }

            assert!(!self.is_closed(node), "node (level {level}, state {state}) expanded twice");
            self.closed[node / 64] |= 1 << (node % 64);
            stats.expansions += 1;

            let next_level = level + 1;
            let inputs: &[u8] = if level < msg_len { &[0, 1] } else { &[0] };
            for &bit in inputs {
                let next_state = self.code.next_state(state, bit);
                let metric = path.metric + metrics.branch(level, self.code.branch_word(state, bit));
                stats.branch_computations += 1;
                assert!(metric >= path.metric, "path metric decreased");

                let next_node = self.node(next_level, next_state);
                if self.is_closed(next_node) {
                    continue;
                }
                let rival = self.live[next_node];
                if rival != NIL {
                    let rival_metric = self.paths[rival as usize].metric;
                    stats.merges += 1;
                    if rival_metric < metric || (rival_metric == metric && rng.random::<bool>()) {
                        continue;
                    }
                    self.stack.remove(Handle(rival)).expect("live map tracks stack entries");
                    self.live[next_node] = NIL;
                }
                let child = self.new_path(PathNode {
                    metric,
                    parent: id,
                    level: next_level as u32,
                    state: next_state as u32,
                    bit,
                });
                self.live[next_node] = child;
                let key = PriorityKey::new(metric, next_level as u32, rng.random());
                if let Some(out) = self.stack.push(key, Handle(child)) {
                    stats.evictions += 1;
                    let p = self.paths[out.handle.0 as usize];
                    let out_node = self.node(p.level as usize, p.state as usize);
                    self.live[out_node] = NIL;
                }
            }
        };

        stats.peak_stack = self.stack.peak_size();
        stats.ell_max_final = ell_max;
        let mut bits = self.traceback_bits(finish, decided_len as u32);
        if decided_len < msg_len {
            emit(decided_len, &bits[..msg_len - decided_len]);
        }
        let mut message: Vec<u8> = self.decided[1..=decided_len].iter().map(|&c| self.paths[c as usize].bit).collect();
        message.append(&mut bits);
        debug_assert!(message[msg_len..].iter().all(|&b| b == 0));
        message.truncate(msg_len);

        let message = Message::new(message).expect("binary");
        let codeword = self.code.encode(&message).expect("length checked");
        Ok(DecodeResult { message, codeword, metric: self.paths[finish as usize].metric, stats })
    }
}

/// One-shot decode with a fresh [`Decoder`].
pub fn decode(code: &CodeSpec, obs: &SoftObservation, cfg: &DecoderConfig) -> Result<DecodeResult, DecodeError> {
    Decoder::new(code.clone()).decode(obs, cfg)
}

/// One-shot streaming decode; see [`Decoder::decode_stream`].
pub fn decode_stream(
    code: &CodeSpec,
    obs: &SoftObservation,
    cfg: &DecoderConfig,
    sink: impl FnMut(usize, &[u8]),
) -> Result<DecodeResult, DecodeError> {
    Decoder::new(code.clone()).decode_stream(obs, cfg, sink)
}

/// Number of branches reachable from the origin in the terminated trellis.
/// For `L >= m` this is `2 [2^m L - (m - 2) 2^m - 2]`.
pub fn trellis_branch_count(code: &CodeSpec) -> u64 {
    let (l, m) = (code.msg_len(), code.m());
    let message: u64 = (0..l).map(|level| 2u64 << level.min(m)).sum();
    let tail: u64 = (0..m).map(|j| 1u64 << l.min(m - j)).sum();
    message + tail
}
