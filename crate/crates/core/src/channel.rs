//! Channel simulation and conversion of channel output into hard decisions
//! with reliability weights.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::code::Codeword;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("crossover probability must lie in (0, 0.5), got {0}")]
    Crossover(f64),
    #[error("Eb/N0 must be finite, got {0}")]
    Ebn0(f64),
    #[error("rate must be positive and finite, got {0}")]
    Rate(f64),
    #[error("received sequence does not match the channel variant")]
    VariantMismatch,
    #[error("observation has {y} decisions but {w} weights")]
    LengthMismatch { y: usize, w: usize },
    #[error("reliability weights must be finite and nonnegative")]
    NegativeWeight,
    #[error("hard decisions must be 0 or 1")]
    NonBinary,
}

/// Binary-input memoryless channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Bsc {
        epsilon: f64,
    },
    /// BPSK (0 -> +1, 1 -> -1) over AWGN; `rate_bits` scales symbol energy.
    AwgnBpsk {
        ebn0_db: f64,
        rate_bits: f64,
    },
}

impl ChannelModel {
    pub fn bsc(epsilon: f64) -> Result<Self, ChannelError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(ChannelError::Crossover(epsilon));
        }
        Ok(Self::Bsc { epsilon })
    }

    /// A BSC whose crossover probability comes from [`ebn0_to_epsilon`].
    pub fn bsc_from_ebn0(ebn0_db: f64) -> Result<Self, ChannelError> {
        if !ebn0_db.is_finite() {
            return Err(ChannelError::Ebn0(ebn0_db));
        }
        Self::bsc(ebn0_to_epsilon(ebn0_db))
    }

    pub fn awgn(ebn0_db: f64, rate_bits: f64) -> Result<Self, ChannelError> {
        if !ebn0_db.is_finite() {
            return Err(ChannelError::Ebn0(ebn0_db));
        }
        if !(rate_bits > 0.0 && rate_bits.is_finite()) {
            return Err(ChannelError::Rate(rate_bits));
        }
        Ok(Self::AwgnBpsk { ebn0_db, rate_bits })
    }

    /// Noise standard deviation per real dimension (AWGN only).
    pub fn noise_sigma(&self) -> Option<f64> {
        match *self {
            Self::Bsc { .. } => None,
            Self::AwgnBpsk { ebn0_db, rate_bits } => {
                Some((1.0 / (2.0 * rate_bits * 10f64.powf(ebn0_db / 10.0))).sqrt())
            }
        }
    }

    pub fn transmit<R: Rng + ?Sized>(&self, cw: &Codeword, rng: &mut R) -> ReceivedSequence {
        match *self {
            Self::Bsc { epsilon } => {
                ReceivedSequence::Hard(cw.iter().map(|&b| b ^ u8::from(rng.random::<f64>() < epsilon)).collect())
            }
            Self::AwgnBpsk { .. } => {
                let sigma = self.noise_sigma().expect("awgn has a sigma");
                self.transmit_awgn(cw, sigma, rng)
            }
        }
    }

    /// AWGN transmission with an explicit noise level; `sigma = 0` is noiseless.
    pub fn transmit_awgn<R: Rng + ?Sized>(&self, cw: &Codeword, sigma: f64, rng: &mut R) -> ReceivedSequence {
        ReceivedSequence::Soft(
            cw.iter()
                .map(|&b| {
                    let x = if b == 0 { 1.0 } else { -1.0 };
                    let z: f64 = StandardNormal.sample(rng);
                    x + sigma * z
                })
                .collect(),
        )
    }

    /// Splits channel output into hard decisions and reliability weights.
    ///
    /// Weights are the log-likelihood magnitudes up to a positive scale: 1 for
    /// every BSC symbol and `|r_j|` for BPSK. Decoder comparisons do not depend
    /// on that scale.
    pub fn soften(&self, rx: &ReceivedSequence) -> Result<SoftObservation, ChannelError> {
        match (self, rx) {
            (Self::Bsc { .. }, ReceivedSequence::Hard(bits)) => SoftObservation::hard(bits.clone()),
            (Self::AwgnBpsk { .. }, ReceivedSequence::Soft(r)) => Ok(SoftObservation::from_llrs(r)),
            _ => Err(ChannelError::VariantMismatch),
        }
    }
}

/// `1/2 erfc(sqrt(Eb/N0))` with Eb/N0 given in dB.
pub fn ebn0_to_epsilon(ebn0_db: f64) -> f64 {
    0.5 * libm::erfc(10f64.powf(ebn0_db / 10.0).sqrt())
}

/// Raw channel output.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceivedSequence {
    Hard(Vec<u8>),
    Soft(Vec<f64>),
}

impl ReceivedSequence {
    pub fn len(&self) -> usize {
        match self {
            Self::Hard(v) => v.len(),
            Self::Soft(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Hard decisions `y` and nonnegative reliabilities `w`, one per code symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftObservation {
    y: Vec<u8>,
    w: Vec<f64>,
}

impl SoftObservation {
    pub fn new(y: Vec<u8>, w: Vec<f64>) -> Result<Self, ChannelError> {
        if y.len() != w.len() {
            return Err(ChannelError::LengthMismatch { y: y.len(), w: w.len() });
        }
        if y.iter().any(|&b| b > 1) {
            return Err(ChannelError::NonBinary);
        }
        if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(ChannelError::NegativeWeight);
        }
        Ok(Self { y, w })
    }

    /// Unit weights: metrics become Hamming distances to `y`.
    pub fn hard(y: Vec<u8>) -> Result<Self, ChannelError> {
        let w = vec![1.0; y.len()];
        Self::new(y, w)
    }

    /// From log-likelihood ratios `log P(r|0)/P(r|1)`; a zero LLR decides 0.
    pub fn from_llrs(llrs: &[f64]) -> Self {
        let y = llrs.iter().map(|&l| u8::from(l < 0.0)).collect();
        let w = llrs.iter().map(|l| l.abs()).collect();
        Self { y, w }
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Same decisions with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        Self { y: self.y.clone(), w: self.w.iter().map(|x| x * factor).collect() }
    }

    /// Weighted mismatch `sum_j (y_j xor x_j) w_j` against a full code sequence.
    pub fn cost(&self, bits: &[u8]) -> f64 {
        debug_assert_eq!(bits.len(), self.y.len());
        self.y.iter().zip(&self.w).zip(bits).filter(|((y, _), x)| *y != *x).map(|((_, w), _)| *w).sum()
    }
}
