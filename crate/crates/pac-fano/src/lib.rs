//! Bit-accurate software model of a hardware Fano sequential decoder for
//! polarization-adjusted convolutional (PAC) codes, plus the simulation
//! harness used to measure its error rate and search complexity.
//!
//! The crate mirrors the structure of the hardware it models:
//!
//! * [`codecfg`]: code construction, covering the rate profile, the metric
//!   bias vector, decoder parameters, and validation.
//! * [`encoder`]: data insertion, rate-1 convolution, polar transform.
//! * [`channel`]: BPSK over AWGN, soft-output LLRs, LLR quantization,
//!   reproducible per-frame noise streams.
//! * [`demapper`]: the polar demapper, a successive-cancellation LLR
//!   engine with intermediate-value caching so that backtracking only pays
//!   for the tree stages a path change actually invalidates.
//! * [`fano`]: the sequential decoder itself, with the branch metric unit,
//!   the move rules, threshold bookkeeping, and the cycle-cost model.
//! * [`sim`]: frame-parallel Monte-Carlo runner, statistics, CSV output,
//!   and the throughput model.
//! * [`reference`]: deliberately slow, independent reference
//!   implementations (dense matrices, recursive LLR computation, a plain
//!   software Fano) used by the differential test suites.
//!
//! The demapper and decoder are generic over [`arith::DecoderArithmetic`],
//! which fixes the scalar types and update rules of the datapath. Two
//! backends are provided: [`arith::FixedMinSum`] reproduces the hardware
//! (Q-bit two's-complement LLRs, min-sum updates, piecewise-linear branch
//! metrics, saturating metric registers), and [`arith::ExactF64`] is an
//! unquantized floating-point reference (exact boxplus, exact metrics,
//! same move rules).

pub mod arith;
pub mod channel;
pub mod codecfg;
pub mod demapper;
pub mod encoder;
pub mod fano;
pub mod reference;
pub mod sim;

pub use arith::{BranchMetrics, DecoderArithmetic, ExactF64, FixedMinSum};
pub use codecfg::{CodeConfig, FirstVisitRule};
pub use demapper::PolarDemapper;
pub use fano::{DecodeSummary, FanoDecoder, Rule};
pub use sim::{run_point, sweep, PointParams, SimStats};

/// Demapper over the hardware-shaped fixed-point datapath.
pub type FixedDemapper = PolarDemapper<FixedMinSum>;
/// Fano decoder over the hardware-shaped fixed-point datapath.
pub type FixedFano = FanoDecoder<FixedMinSum>;
/// Demapper over the unquantized floating-point reference datapath.
pub type FloatDemapper = PolarDemapper<ExactF64>;
/// Fano decoder over the unquantized floating-point reference datapath.
pub type FloatFano = FanoDecoder<ExactF64>;
