//! Maximum-likelihood sequential decoding of binary convolutional codes with
//! an early-elimination window, together with the error-exponent calculator
//! that sizes the window and a Monte-Carlo harness for BER, complexity and
//! stack-size experiments.

pub mod channel;
pub mod code;
pub mod decoder;
pub mod exponents;
mod optimize;
pub mod reference;
pub mod sim;
pub mod stack;
