//! Gallager-style error exponents and the window sizes derived from them.
//!
//! All rates and exponents are in nats unless a name says otherwise. For a
//! channel with Gallager function `E0(rho)` and the companion function
//!
//! ```text
//! E1(rho) = -log sum_j (sum_i p_i P_ji) (sum_i p_i P_ji^{1/(1+rho)})^rho
//! ```
//!
//! this module evaluates the random-coding exponent `E_r`, the convolutional
//! exponent `E_c`, the early-elimination exponent `E_el`, and the window
//! lengths they imply:
//!
//! * early elimination is exponentially negligible once
//!   `delta / (m + 1) > E_c(R) / E_el(R)`;
//! * Viterbi path truncation is negligible once `tau / (m + 1) > E_c(R) / E_r(R)`.

use std::f64::consts::LN_2;

use thiserror::Error;

use crate::optimize::{bisect_boundary, golden_section_max};

/// Bracket width for maximizations over `rho`.
pub const MAX_TOL: f64 = 1e-9;
/// Bracket width for the root `E0(rho) = rho R`.
pub const ROOT_TOL: f64 = 1e-10;
/// Finite-difference step for numerical capacity.
pub const CAPACITY_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("rho must lie in [0, 1], got {0}")]
    Rho(f64),
    #[error("crossover probability must lie in (0, 1), got {0}")]
    Crossover(f64),
    #[error("rate must be finite and nonnegative, got {0}")]
    Rate(f64),
    #[error("invalid channel: {0}")]
    InvalidDmc(String),
    /// The exponent bounding the extra error is zero, so no finite window works.
    #[error("{0} exponent is zero at this rate; the window is unbounded")]
    Unbounded(&'static str),
    /// `lambda = E0(rho) - rho R` is not positive.
    #[error("bound is vacuous: lambda = {0} <= 0")]
    Vacuous(f64),
}

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

fn check_rho(rho: f64) -> Result<(), ExponentError> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(ExponentError::Rho(rho))
    }
}

fn check_rate(rate: f64) -> Result<(), ExponentError> {
    if rate >= 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(ExponentError::Rate(rate))
    }
}

/// A channel with a fixed input distribution, seen through its Gallager
/// functions.
pub trait GallagerChannel {
    /// `E0(rho)` for `rho` in `[0, 1]` (callers validate the range).
    fn e0(&self, rho: f64) -> f64;
    fn e1(&self, rho: f64) -> f64;
    /// `C = E0'(0)`.
    fn capacity(&self) -> f64;

    /// `R0 = E0(1)`.
    fn cutoff_rate(&self) -> f64 {
        self.e0(1.0)
    }
}

/// Binary symmetric channel with uniform inputs, using the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bsc {
    epsilon: f64,
}

impl Bsc {
    pub fn new(epsilon: f64) -> Result<Self, ExponentError> {
        if epsilon > 0.0 && epsilon < 1.0 {
            Ok(Self { epsilon })
        } else {
            Err(ExponentError::Crossover(epsilon))
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `log(eps^{1/(1+rho)} + (1-eps)^{1/(1+rho)})`
    fn log_sum(&self, rho: f64) -> f64 {
        let a = 1.0 / (1.0 + rho);
        (self.epsilon.powf(a) + (1.0 - self.epsilon).powf(a)).ln()
    }

    /// As an explicit 2x2 channel, for the generic formulas.
    pub fn to_dmc(&self) -> Dmc {
        let e = self.epsilon;
        Dmc::new(2, 2, vec![1.0 - e, e, e, 1.0 - e], vec![0.5, 0.5]).expect("valid bsc")
    }
}

impl GallagerChannel for Bsc {
    fn e0(&self, rho: f64) -> f64 {
        rho * LN_2 - (1.0 + rho) * self.log_sum(rho)
    }

    fn e1(&self, rho: f64) -> f64 {
        rho * LN_2 - rho * self.log_sum(rho)
    }

    /// `log 2 - H(eps)`
    fn capacity(&self) -> f64 {
        let e = self.epsilon;
        LN_2 + e * e.ln() + (1.0 - e) * (1.0 - e).ln()
    }
}

/// Closed-form BSC `E0(rho)` in nats.
pub fn bsc_e0(rho: f64, eps: f64) -> Result<f64, ExponentError> {
    check_rho(rho)?;
    Ok(Bsc::new(eps)?.e0(rho))
}

/// Closed-form BSC `E1(rho)` in nats.
pub fn bsc_e1(rho: f64, eps: f64) -> Result<f64, ExponentError> {
    check_rho(rho)?;
    Ok(Bsc::new(eps)?.e1(rho))
}

/// Discrete memoryless channel with `inputs` x `outputs` transition matrix and
/// an input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dmc {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`: `transition[j * inputs + i] = P(j | i)`.
    transition: Vec<f64>,
    input_dist: Vec<f64>,
}

impl Dmc {
    pub fn new(
        inputs: usize,
        outputs: usize,
        transition: Vec<f64>,
        input_dist: Vec<f64>,
    ) -> Result<Self, ExponentError> {
        let bad = |msg: String| Err(ExponentError::InvalidDmc(msg));
        if inputs == 0 || outputs == 0 {
            return bad("alphabets must be nonempty".into());
        }
        if transition.len() != inputs * outputs {
            return bad(format!("expected {} transition entries, got {}", inputs * outputs, transition.len()));
        }
        if input_dist.len() != inputs {
            return bad(format!("expected {inputs} input probabilities, got {}", input_dist.len()));
        }
        if transition.iter().chain(&input_dist).any(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad("probabilities must be finite and nonnegative".into());
        }
        for i in 0..inputs {
            let col: f64 = (0..outputs).map(|j| transition[j * inputs + i]).sum();
            if (col - 1.0).abs() > 1e-9 {
                return bad(format!("column {i} sums to {col}"));
            }
        }
        let total: f64 = input_dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("input distribution sums to {total}"));
        }
        Ok(Self { inputs, outputs, transition, input_dist })
    }

    /// Uniform input distribution.
    pub fn uniform(inputs: usize, outputs: usize, transition: Vec<f64>) -> Result<Self, ExponentError> {
        Self::new(inputs, outputs, transition, vec![1.0 / inputs as f64; inputs])
    }

    /// Noiseless channel on `q` symbols.
    pub fn identity(q: usize) -> Self {
        let mut t = vec![0.0; q * q];
        for i in 0..q {
            t[i * q + i] = 1.0;
        }
        Self::uniform(q, q, t).expect("identity is valid")
    }

    pub fn with_input_dist(&self, input_dist: Vec<f64>) -> Result<Self, ExponentError> {
        Self::new(self.inputs, self.outputs, self.transition.clone(), input_dist)
    }

    pub fn transition(&self, j: usize, i: usize) -> f64 {
        self.transition[j * self.inputs + i]
    }

    pub fn input_dist(&self) -> &[f64] {
        &self.input_dist
    }

    /// Per output symbol: `(sum_i p_i P_ji, sum_i p_i P_ji^{1/(1+rho)})`.
    fn sums(&self, rho: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let a = 1.0 / (1.0 + rho);
        (0..self.outputs).map(move |j| {
            (0..self.inputs).fold((0.0, 0.0), |(plain, tilted), i| {
                let p = self.input_dist[i];
                let pji = self.transition(j, i);
                (plain + p * pji, tilted + p * pji.powf(a))
            })
        })
    }

    /// `I(p)` in nats, the analytic form of `E0'(0)`.
    pub fn mutual_information(&self) -> f64 {
        let q: Vec<f64> = self.sums(0.0).map(|(plain, _)| plain).collect();
        let mut total = 0.0;
        for (j, &qj) in q.iter().enumerate() {
            for i in 0..self.inputs {
                let joint = self.input_dist[i] * self.transition(j, i);
                if joint > 0.0 {
                    total += joint * (self.transition(j, i) / qj).ln();
                }
            }
        }
        total
    }
}

impl GallagerChannel for Dmc {
    fn e0(&self, rho: f64) -> f64 {
        -self.sums(rho).map(|(_, t)| t.powf(1.0 + rho)).sum::<f64>().ln()
    }

    fn e1(&self, rho: f64) -> f64 {
        -self.sums(rho).map(|(plain, t)| plain * t.powf(rho)).sum::<f64>().ln()
    }

    /// Central difference of `E0` at 0, Richardson-extrapolated over `h` and `h/2`.
    fn capacity(&self) -> f64 {
        let h = CAPACITY_STEP;
        let d = |h: f64| (self.e0(h) - self.e0(-h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }
}

/// `E0(rho, p)` for a DMC, in nats.
pub fn e0(rho: f64, dmc: &Dmc) -> Result<f64, ExponentError> {
    check_rho(rho)?;
    Ok(dmc.e0(rho))
}

/// `E1(rho, p)` for a DMC, in nats.
pub fn e1(rho: f64, dmc: &Dmc) -> Result<f64, ExponentError> {
    check_rho(rho)?;
    Ok(dmc.e1(rho))
}

pub fn cutoff_rate<C: GallagerChannel + ?Sized>(ch: &C) -> f64 {
    ch.cutoff_rate()
}

pub fn capacity<C: GallagerChannel + ?Sized>(ch: &C) -> f64 {
    ch.capacity()
}

/// Root `rho*` of `E0(rho) = rho R` in `(0, 1]`, for `R0 <= R < C`.
/// Returns 1 when `R <= R0` and 0 when `R >= C`.
pub fn rho_star<C: GallagerChannel + ?Sized>(rate: f64, ch: &C) -> Result<f64, ExponentError> {
    check_rate(rate)?;
    if rate <= ch.cutoff_rate() {
        return Ok(1.0);
    }
    if rate >= ch.capacity() {
        return Ok(0.0);
    }
    Ok(bisect_boundary(|rho| ch.e0(rho) - rho * rate > 0.0, 0.0, 1.0, ROOT_TOL))
}

/// Random-coding exponent `max_{0<=rho<=1} [E0(rho) - rho R]`, with its maximizer.
pub fn e_r_with_rho<C: GallagerChannel + ?Sized>(rate: f64, ch: &C) -> Result<(f64, f64), ExponentError> {
    check_rate(rate)?;
    let (rho, value) = golden_section_max(|rho| ch.e0(rho) - rho * rate, 0.0, 1.0, MAX_TOL);
    Ok((value.max(0.0), rho))
}

pub fn e_r<C: GallagerChannel + ?Sized>(rate: f64, ch: &C) -> Result<f64, ExponentError> {
    e_r_with_rho(rate, ch).map(|(v, _)| v)
}

/// Convolutional exponent: `R0` below the cutoff rate, `E0(rho*)` between the
/// cutoff rate and capacity, 0 above capacity.
pub fn e_c<C: GallagerChannel + ?Sized>(rate: f64, ch: &C) -> Result<f64, ExponentError> {
    check_rate(rate)?;
    let r0 = ch.cutoff_rate();
    if rate < r0 {
        return Ok(r0);
    }
    if rate >= ch.capacity() {
        return Ok(0.0);
    }
    Ok(ch.e0(rho_star(rate, ch)?))
}

/// Early-elimination exponent `max [E1(rho) - rho R]` over the closed feasible
/// set `{rho in [0, 1] : E0(rho) >= rho R}`, with its maximizer.
pub fn e_el_with_rho<C: GallagerChannel + ?Sized>(rate: f64, ch: &C) -> Result<(f64, f64), ExponentError> {
    check_rate(rate)?;
    if rate >= ch.capacity() {
        return Ok((0.0, 0.0));
    }
    let upper = rho_star(rate, ch)?;
    let (rho, value) = golden_section_max(|rho| ch.e1(rho) - rho * rate, 0.0, upper, MAX_TOL);
    Ok((value.max(0.0), rho))
}

pub fn e_el<C: GallagerChannel + ?Sized>(rate: f64, ch: &C) -> Result<f64, ExponentError> {
    e_el_with_rho(rate, ch).map(|(v, _)| v)
}

/// A window length requirement `len / (m + 1) > ratio`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRule {
    pub ratio: f64,
    /// Smallest integer length strictly above `ratio (m + 1)`.
    pub min_len: usize,
}

impl WindowRule {
    fn from_exponents(numerator: f64, denominator: f64, m: usize, name: &'static str) -> Result<Self, ExponentError> {
        if denominator <= 0.0 {
            return Err(ExponentError::Unbounded(name));
        }
        let ratio = numerator / denominator;
        let min_len = (ratio * (m + 1) as f64).floor() as usize + 1;
        Ok(Self { ratio, min_len })
    }
}

/// Early-elimination window: `ratio = E_c(R) / E_el(R)`, `min_len` = smallest
/// `delta` with `delta > ratio (m + 1)`.
pub fn elimination_window<C: GallagerChannel + ?Sized>(
    ch: &C,
    rate: f64,
    m: usize,
) -> Result<WindowRule, ExponentError> {
    WindowRule::from_exponents(e_c(rate, ch)?, e_el(rate, ch)?, m, "early-elimination")
}

/// Path-truncation window: `ratio = E_c(R) / E_r(R)`.
pub fn truncation_window<C: GallagerChannel + ?Sized>(
    ch: &C,
    rate: f64,
    m: usize,
) -> Result<WindowRule, ExponentError> {
    WindowRule::from_exponents(e_c(rate, ch)?, e_r(rate, ch)?, m, "random-coding")
}

/// `(q-1) / (1 - q^{-lambda/R}) exp[-n (m+1) E0(rho)]`, the ML error bound
/// for time-varying convolutional codes.
pub fn viterbi_error_bound<C: GallagerChannel + ?Sized>(
    q: u32,
    n: usize,
    m: usize,
    rate: f64,
    rho: f64,
    ch: &C,
) -> Result<f64, ExponentError> {
    check_rho(rho)?;
    check_rate(rate)?;
    if rate == 0.0 {
        return Err(ExponentError::Rate(rate));
    }
    let e0 = ch.e0(rho);
    let lambda = e0 - rho * rate;
    if lambda <= 0.0 {
        return Err(ExponentError::Vacuous(lambda));
    }
    let q = f64::from(q);
    Ok((q - 1.0) / (1.0 - q.powf(-lambda / rate)) * (-(n as f64) * (m + 1) as f64 * e0).exp())
}

/// `exp[-n tau E_r(R)]`, the extra error from truncating paths after `tau` levels.
pub fn truncation_error_bound<C: GallagerChannel + ?Sized>(
    n: usize,
    tau: usize,
    rate: f64,
    ch: &C,
) -> Result<f64, ExponentError> {
    Ok((-(n as f64) * tau as f64 * e_r(rate, ch)?).exp())
}

/// Everything the CLI prints for one channel and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub rate_nats: f64,
    pub rho_star: f64,
    /// `E0(rho*) - rho* R`.
    pub lambda: f64,
    pub r0_nats: f64,
    pub capacity_nats: f64,
    pub e_c: f64,
    pub e_el: f64,
    pub e_r: f64,
    pub rho_el: f64,
    pub rho_r: f64,
    pub elimination: Result<WindowRule, ExponentError>,
    pub truncation: Result<WindowRule, ExponentError>,
}

impl ExponentReport {
    pub fn window_ratio(&self) -> Option<f64> {
        self.elimination.as_ref().ok().map(|w| w.ratio)
    }

    pub fn trunc_ratio(&self) -> Option<f64> {
        self.truncation.as_ref().ok().map(|w| w.ratio)
    }
}

pub fn report<C: GallagerChannel + ?Sized>(ch: &C, rate: f64, m: usize) -> Result<ExponentReport, ExponentError> {
    let rho_star = rho_star(rate, ch)?;
    let (e_el, rho_el) = e_el_with_rho(rate, ch)?;
    let (e_r, rho_r) = e_r_with_rho(rate, ch)?;
    Ok(ExponentReport {
        rate_nats: rate,
        rho_star,
        lambda: ch.e0(rho_star) - rho_star * rate,
        r0_nats: ch.cutoff_rate(),
        capacity_nats: ch.capacity(),
        e_c: e_c(rate, ch)?,
        e_el,
        e_r,
        rho_el,
        rho_r,
        elimination: elimination_window(ch, rate, m),
        truncation: truncation_window(ch, rate, m),
    })
}
