//! Binary rate-1/n convolutional codes and their terminated block view.
//!
//! A code is described by `n` generator tap vectors of length `m + 1`. Tap 0
//! multiplies the current input bit and tap `m` the oldest register bit. The
//! encoder state holds the last `m` input bits with the most recent one in the
//! lowest bit position, so the transition out of `state` on input `b` lands in
//! `((state << 1) | b) mod 2^m`.

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

/// Largest supported memory order. The trellis tables are dense in `2^m`.
pub const MAX_MEMORY: usize = 20;
/// Outputs are packed into a `u32` per branch.
pub const MAX_OUTPUTS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("invalid octal digit {digit:?} in generator {generator:?}")]
    InvalidOctal { generator: String, digit: char },
    #[error("generator {generator:?} expands to {bits} bits, fewer than m+1 = {needed}")]
    TooShort { generator: String, bits: usize, needed: usize },
    #[error("generator {generator:?} has a nonzero bit beyond tap m = {m}")]
    NonzeroPadding { generator: String, m: usize },
    #[error("generator {index} has {got} taps, expected m+1 = {expected}")]
    TapCount { index: usize, got: usize, expected: usize },
    #[error("tap values must be 0 or 1")]
    NonBinaryTap,
    #[error("no generator has tap 0 set; effective memory is below m")]
    NoCurrentTap,
    #[error("no generator has tap m set; effective memory is below m")]
    NoOldestTap,
    #[error("a code needs between 1 and {MAX_OUTPUTS} generators, got {0}")]
    OutputCount(usize),
    #[error("memory order must be in 1..={MAX_MEMORY}, got {0}")]
    Memory(usize),
    #[error("message length must be positive")]
    EmptyMessage,
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bit values must be 0 or 1")]
    NonBinaryBit,
}

/// Expands octal generator strings into tap vectors for memory order `m`.
///
/// Each octal digit contributes three bits, most significant first. The first
/// `m + 1` bits are the taps and any remaining pad bits must be zero, so
/// `"554"` with `m = 6` is the 7-tap polynomial `1011011`.
pub fn parse_generators<S: AsRef<str>>(octal: &[S], m: usize) -> Result<Vec<Vec<u8>>, CodeError> {
    octal
        .iter()
        .map(|s| {
            let s = s.as_ref().trim();
            let mut bits = Vec::with_capacity(3 * s.len());
            for ch in s.chars() {
                let digit =
                    ch.to_digit(8).ok_or_else(|| CodeError::InvalidOctal { generator: s.to_string(), digit: ch })?;
                bits.extend([(digit >> 2) & 1, (digit >> 1) & 1, digit & 1].map(|b| b as u8));
            }
            if bits.len() < m + 1 {
                return Err(CodeError::TooShort { generator: s.to_string(), bits: bits.len(), needed: m + 1 });
            }
            if bits[m + 1..].iter().any(|&b| b != 0) {
                return Err(CodeError::NonzeroPadding { generator: s.to_string(), m });
            }
            bits.truncate(m + 1);
            Ok(bits)
        })
        .collect()
}

/// Splits a comma-separated generator list such as `"554,774"`.
pub fn parse_generator_list(list: &str, m: usize) -> Result<Vec<Vec<u8>>, CodeError> {
    let parts: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    parse_generators(&parts, m)
}

/// A binary `(n, 1, m)` convolutional code terminated after `L` message bits.
#[derive(Clone, PartialEq, Eq)]
pub struct CodeSpec {
    n: usize,
    m: usize,
    msg_len: usize,
    generators: Vec<Vec<u8>>,
    /// Generator `i` as a bit mask over the register word `input | state << 1`.
    masks: Vec<u32>,
    /// `outputs[(state << 1) | input]`, bit `i` = output of generator `i`.
    outputs: Vec<u32>,
}

impl CodeSpec {
    pub fn new(generators: Vec<Vec<u8>>, msg_len: usize) -> Result<Self, CodeError> {
        let n = generators.len();
        if n == 0 || n > MAX_OUTPUTS {
            return Err(CodeError::OutputCount(n));
        }
        let m = generators[0].len().saturating_sub(1);
        if m == 0 || m > MAX_MEMORY {
            return Err(CodeError::Memory(m));
        }
        if msg_len == 0 {
            return Err(CodeError::EmptyMessage);
        }
        for (index, g) in generators.iter().enumerate() {
            if g.len() != m + 1 {
                return Err(CodeError::TapCount { index, got: g.len(), expected: m + 1 });
            }
            if g.iter().any(|&t| t > 1) {
                return Err(CodeError::NonBinaryTap);
            }
        }
        if !generators.iter().any(|g| g[0] == 1) {
            return Err(CodeError::NoCurrentTap);
        }
        if !generators.iter().any(|g| g[m] == 1) {
            return Err(CodeError::NoOldestTap);
        }

        let masks: Vec<u32> = generators
            .iter()
            .map(|g| g.iter().enumerate().fold(0u32, |acc, (t, &b)| acc | (u32::from(b) << t)))
            .collect();
        let states = 1usize << m;
        let outputs = (0..2 * states)
            .map(|word| {
                // word = (state << 1) | input is exactly the register contents
                masks.iter().enumerate().fold(0u32, |acc, (i, &g)| acc | (((g & word as u32).count_ones() & 1) << i))
            })
            .collect();
        Ok(Self { n, m, msg_len, generators, masks, outputs })
    }

    /// Builds a code from comma-separated octal generators.
    pub fn from_octal(list: &str, m: usize, msg_len: usize) -> Result<Self, CodeError> {
        Self::new(parse_generator_list(list, m)?, msg_len)
    }

    /// Same generators, different message length.
    pub fn with_message_len(&self, msg_len: usize) -> Result<Self, CodeError> {
        if msg_len == 0 {
            return Err(CodeError::EmptyMessage);
        }
        Ok(Self { msg_len, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Message length `L` (equals the block dimension `K` for k = 1).
    pub fn msg_len(&self) -> usize {
        self.msg_len
    }

    pub fn generators(&self) -> &[Vec<u8>] {
        &self.generators
    }

    pub fn num_states(&self) -> usize {
        1 << self.m
    }

    /// Number of trellis levels, `L + m`.
    pub fn depth(&self) -> usize {
        self.msg_len + self.m
    }

    /// Block length `N = n (L + m)`.
    pub fn code_len(&self) -> usize {
        self.n * self.depth()
    }

    /// Effective block rate `K / N`.
    pub fn block_rate(&self) -> f64 {
        self.msg_len as f64 / self.code_len() as f64
    }

    /// Nominal rate `1/n` bits per symbol.
    pub fn rate_bits(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Generators rendered back to octal, MSB-first with zero padding.
    pub fn octal_id(&self) -> String {
        self.generators
            .iter()
            .map(|g| {
                let mut bits = g.clone();
                bits.resize(g.len().div_ceil(3) * 3, 0);
                bits.chunks(3).map(|c| char::from(b'0' + (c[0] << 2 | c[1] << 1 | c[2]))).collect::<String>()
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Packed branch outputs for `(state, input)`; bit `i` belongs to generator `i`.
    #[inline]
    pub fn branch_word(&self, state: usize, input: u8) -> u32 {
        self.outputs[(state << 1) | input as usize]
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: u8) -> usize {
        ((state << 1) | input as usize) & (self.num_states() - 1)
    }

    /// One trellis transition: the next state and the `n` output bits.
    pub fn trellis_step(&self, state: usize, input: u8) -> (usize, Vec<u8>) {
        debug_assert!(state < self.num_states() && input <= 1);
        let word = self.branch_word(state, input);
        let outs = (0..self.n).map(|i| ((word >> i) & 1) as u8).collect();
        (self.next_state(state, input), outs)
    }

    pub fn encode(&self, msg: &Message) -> Result<Codeword, CodeError> {
        if msg.len() != self.msg_len {
            return Err(CodeError::LengthMismatch { expected: self.msg_len, got: msg.len() });
        }
        let mut out = Vec::with_capacity(self.code_len());
        let mut state = 0usize;
        for &bit in msg.iter().chain(std::iter::repeat_n(&0u8, self.m)) {
            let word = self.branch_word(state, bit);
            out.extend((0..self.n).map(|i| ((word >> i) & 1) as u8));
            state = self.next_state(state, bit);
        }
        debug_assert_eq!(state, 0);
        Ok(Codeword(out))
    }

    /// Register masks as used by [`CodeSpec::branch_word`].
    pub fn masks(&self) -> &[u32] {
        &self.masks
    }
}

impl fmt::Debug for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodeSpec")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("msg_len", &self.msg_len)
            .field("generators", &self.octal_id())
            .finish()
    }
}

fn check_bits(bits: &[u8]) -> Result<(), CodeError> {
    if bits.iter().any(|&b| b > 1) {
        return Err(CodeError::NonBinaryBit);
    }
    Ok(())
}

/// The `L` information bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Message(Vec<u8>);

impl Message {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodeError> {
        check_bits(&bits)?;
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }
}

impl Deref for Message {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

/// A terminated codeword of length `N = n (L + m)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Codeword(Vec<u8>);

impl Codeword {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodeError> {
        check_bits(&bits)?;
        Ok(Self(bits))
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }
}

impl Deref for Codeword {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

/// Formats bits as a `0`/`1` string.
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// Parses a `0`/`1` string, ignoring whitespace.
pub fn bits_from_str(s: &str) -> Result<Vec<u8>, CodeError> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(CodeError::NonBinaryBit),
        })
        .collect()
}
