//! Core algorithms for hybrid-precision quantization of message-passing
//! MIMO detectors.
//!
//! The crate is split along the processing chain:
//!
//! * [`mimo`] — Rayleigh channel generation, QAM modulation, the real-valued
//!   system model, matched filter / Gram matrix, and bit-error counting.
//! * [`quant`] / [`profile`] — bit-exact linear quantization in `1-p-q`
//!   format and per-variable quantization profiles over the detector's
//!   variable registry.
//! * [`detector`] — floating-point and quantized AMP, its two-nearest-symbol
//!   approximation, and the hardware-friendly variant built from interval
//!   flags, shift-add means, and piecewise-linear nonlinearities.
//! * [`ipq`] — integral bitwidth selection from Monte Carlo value traces.
//! * [`fpq`] — the fractional-bitwidth search environment (state encoding,
//!   circular actions, BER-gated reward).
//! * [`ppo`] — small fully connected policy/value networks and a
//!   clipped-surrogate policy-gradient trainer, written from scratch.
//!
//! Everything here is deterministic given explicit seeds and free of I/O;
//! file formats, CLI, and parallel orchestration live in the companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod detector;
pub mod fpq;
pub mod ipq;
pub mod linalg;
pub mod mimo;
pub mod ppo;
pub mod profile;
pub mod quant;
pub mod rng;
