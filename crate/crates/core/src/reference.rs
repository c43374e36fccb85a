//! Ground-truth decoders over the same terminated trellis and metric as the
//! MLSDA. Tie-breaking here is deterministic, so cross-decoder checks compare
//! metrics, not messages.

use thiserror::Error;

use crate::channel::SoftObservation;
use crate::code::{CodeSpec, Message};
use crate::decoder::{DecodeError, DecodeResult, DecoderStats, LevelMetrics};

/// Largest message length [`exhaustive_ml`] will enumerate.
pub const EXHAUSTIVE_MAX_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("exhaustive search needs L <= {EXHAUSTIVE_MAX_LEN}, got {0}")]
    TooLong(usize),
}

/// Soft-metric Viterbi decoding with add-compare-select over all `L + m`
/// levels.
///
/// On equal metrics the survivor is the predecessor with the smaller state
/// index, i.e. the one whose oldest register bit is 0.
pub fn viterbi_decode(code: &CodeSpec, obs: &SoftObservation) -> Result<DecodeResult, ReferenceError> {
    let metrics = LevelMetrics::new(code, obs)?;
    let states = code.num_states();
    let depth = code.depth();
    let mut cur = vec![f64::INFINITY; states];
    let mut next = vec![f64::INFINITY; states];
    cur[0] = 0.0;
    // predecessor state of every (level + 1, state) survivor
    let mut back = vec![u32::MAX; depth * states];
    let mut stats = DecoderStats::default();

    for level in 0..depth {
        next.fill(f64::INFINITY);
        let inputs: &[u8] = if level < code.msg_len() { &[0, 1] } else { &[0] };
        for (state, &pm) in cur.iter().enumerate() {
            if pm.is_infinite() {
                continue;
            }
            for &bit in inputs {
                let ns = code.next_state(state, bit);
                let cand = pm + metrics.branch(level, code.branch_word(state, bit));
                stats.branch_computations += 1;
                if cand < next[ns] {
                    next[ns] = cand;
                    back[level * states + ns] = state as u32;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }

    let metric = cur[0];
    let mut bits = vec![0u8; depth];
    let mut state = 0usize;
    for level in (0..depth).rev() {
        bits[level] = (state & 1) as u8;
        state = back[level * states + state] as usize;
    }
    debug_assert_eq!(state, 0);
    bits.truncate(code.msg_len());
    let message = Message::new(bits).expect("binary");
    let codeword = code.encode(&message).expect("length");
    Ok(DecodeResult { message, codeword, metric, stats })
}

/// Maximum-likelihood decoding by enumerating all `2^L` messages.
///
/// Messages are visited in lexicographic order and only strict improvements
/// replace the incumbent, so ties go to the lexicographically smallest message.
pub fn exhaustive_ml(code: &CodeSpec, obs: &SoftObservation) -> Result<DecodeResult, ReferenceError> {
    let len = code.msg_len();
    if len > EXHAUSTIVE_MAX_LEN {
        return Err(ReferenceError::TooLong(len));
    }
    if obs.len() != code.code_len() {
        return Err(DecodeError::LengthMismatch { expected: code.code_len(), got: obs.len() }.into());
    }
    let mut best: Option<(f64, Message)> = None;
    for word in 0u32..(1 << len) {
        let bits = (0..len).map(|i| ((word >> (len - 1 - i)) & 1) as u8).collect();
        let msg = Message::new(bits).expect("binary");
        let cost = obs.cost(&code.encode(&msg).expect("length"));
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, msg));
        }
    }
    let (metric, message) = best.expect("at least one message");
    let codeword = code.encode(&message).expect("length");
    Ok(DecodeResult { message, codeword, metric, stats: DecoderStats::default() })
}
