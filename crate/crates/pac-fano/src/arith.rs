//! Decoder arithmetic backends.
//!
//! Everything the demapper and the Fano engine compute flows through the
//! [`DecoderArithmetic`] trait: LLR quantization, the two
//! successive-cancellation updates, hard signs, branch metrics, and the
//! threshold arithmetic. Keeping the rules behind a trait lets the same
//! decoder run in two modes:
//!
//! * [`FixedMinSum`] models the hardware datapath. LLRs are Q-bit
//!   two's-complement integers counted in units of `1/scale`, the
//!   check-node update is min-sum, branch metrics use the piecewise-linear
//!   table, and metric registers are two bits wider than LLRs and saturate
//!   instead of wrapping.
//! * [`ExactF64`] is the unquantized reference: `f64` LLRs, exact boxplus,
//!   and the exact logarithmic branch metric. Same rules, no rounding.
//!
//! All fixed-point values here are plain `i32`s holding *units*; a unit is
//! `1/scale` in LLR terms. Ops clamp to the configured width, so a value
//! produced by this module never leaves its register range.

use crate::channel;

/// Metric pair for the two hypotheses of one decision level.
///
/// `gamma0` scores the hypothesis that the convolved bit is 0, `gamma1`
/// that it is 1. The pair is ordered so that the hypothesis matching the
/// hard sign of the input LLR always carries the larger metric; the branch
/// unit exploits that to pick the likelier branch without a comparator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BranchMetrics<M> {
    pub gamma0: M,
    pub gamma1: M,
}

impl<M: Copy> BranchMetrics<M> {
    /// Metric for hypothesis `bit`.
    pub fn of(&self, bit: u8) -> M {
        if bit == 0 {
            self.gamma0
        } else {
            self.gamma1
        }
    }
}

/// Scalar types and update rules of one decoder datapath.
pub trait DecoderArithmetic: Clone + Send + Sync + 'static {
    /// Soft value carried through the demapper tree.
    type Llr: Copy + PartialEq + Default + std::fmt::Debug + Send + Sync + 'static;
    /// Value held in metric/threshold registers.
    type Metric: Copy + PartialOrd + Default + std::fmt::Debug + Send + Sync + 'static;

    /// Bring a real-valued channel LLR into the datapath.
    fn input_llr(&self, llr: f64) -> Self::Llr;
    /// LLR value back in real units (exact for both backends).
    fn llr_to_f64(&self, l: Self::Llr) -> f64;
    /// Hard sign: 0 for `l >= 0`, 1 otherwise.
    fn hard_sign(&self, l: Self::Llr) -> u8;
    /// Check-node update (the `f` half of an SC butterfly).
    fn check_node(&self, a: Self::Llr, b: Self::Llr) -> Self::Llr;
    /// Variable-node update (the `g` half), `bit` being the partial sum.
    fn var_node(&self, a: Self::Llr, b: Self::Llr, bit: u8) -> Self::Llr;
    /// Branch metrics for a demapped LLR under bias bit `bias`.
    fn branch_metrics(&self, z: Self::Llr, bias: u8) -> BranchMetrics<Self::Metric>;

    /// Bring a real-valued metric (e.g. the threshold spacing) into the
    /// datapath. Must be exact for values on the representable grid.
    fn metric_from_f64(&self, x: f64) -> Self::Metric;
    /// Metric value back in real units (exact for both backends).
    fn metric_to_f64(&self, m: Self::Metric) -> f64;
    fn metric_add(&self, a: Self::Metric, b: Self::Metric) -> Self::Metric;
    fn metric_sub(&self, a: Self::Metric, b: Self::Metric) -> Self::Metric;
    fn metric_zero(&self) -> Self::Metric {
        Self::Metric::default()
    }

    /// Short tag naming the backend in digests and logs.
    fn tag(&self) -> &'static str;
}

/// Hardware-shaped arithmetic: Q-bit LLRs, min-sum, saturating registers.
///
/// LLR registers hold `[-2^(Q-1), 2^(Q-1) - 1]` units; metric registers
/// are two bits wider, `[-2^(Q+1), 2^(Q+1) - 1]` units, and saturate.
/// One LLR unit is `1/scale`, so the metric constant "1" is `scale` units.
///
/// Branch metrics follow the sign/bias table: with `s = hard_sign(z)` and
/// bias bit `b`, the sign-matching hypothesis scores `1 - b` and the
/// mismatching one `1 - |z| - b` (all in LLR units times `scale`).
#[derive(Clone, Debug)]
pub struct FixedMinSum {
    q_bits: u32,
    scale: i32,
    llr_lo: i32,
    llr_hi: i32,
    met_lo: i32,
    met_hi: i32,
}

impl FixedMinSum {
    /// A `q_bits`-wide LLR datapath with `scale` units per unit LLR.
    ///
    /// `q_bits` must be in `2..=24` and `scale >= 1`; both are enforced by
    /// config validation before a decoder is built.
    pub fn new(q_bits: u32, scale: i32) -> Self {
        assert!((2..=24).contains(&q_bits), "q_bits out of range");
        assert!(scale >= 1, "scale must be positive");
        FixedMinSum {
            q_bits,
            scale,
            llr_lo: -(1 << (q_bits - 1)),
            llr_hi: (1 << (q_bits - 1)) - 1,
            met_lo: -(1 << (q_bits + 1)),
            met_hi: (1 << (q_bits + 1)) - 1,
        }
    }

    pub fn q_bits(&self) -> u32 {
        self.q_bits
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    fn clamp_llr(&self, x: i64) -> i32 {
        x.clamp(self.llr_lo as i64, self.llr_hi as i64) as i32
    }

    fn clamp_metric(&self, x: i64) -> i32 {
        x.clamp(self.met_lo as i64, self.met_hi as i64) as i32
    }
}

impl DecoderArithmetic for FixedMinSum {
    type Llr = i32;
    type Metric = i32;

    fn input_llr(&self, llr: f64) -> i32 {
        channel::quantize(llr, self.q_bits, self.scale)
    }

    fn llr_to_f64(&self, l: i32) -> f64 {
        l as f64 / self.scale as f64
    }

    fn hard_sign(&self, l: i32) -> u8 {
        (l < 0) as u8
    }

    fn check_node(&self, a: i32, b: i32) -> i32 {
        let mag = (a as i64).abs().min((b as i64).abs());
        let neg = (a < 0) != (b < 0);
        self.clamp_llr(if neg { -mag } else { mag })
    }

    fn var_node(&self, a: i32, b: i32, bit: u8) -> i32 {
        let a = a as i64;
        let b = b as i64;
        self.clamp_llr(if bit == 0 { b + a } else { b - a })
    }

    fn branch_metrics(&self, z: i32, bias: u8) -> BranchMetrics<i32> {
        let one = self.scale as i64;
        let mag = (z as i64).abs();
        let b = if bias == 0 { 0 } else { one };
        let matching = self.clamp_metric(one - b);
        let other = self.clamp_metric(one - mag - b);
        if z >= 0 {
            BranchMetrics {
                gamma0: matching,
                gamma1: other,
            }
        } else {
            BranchMetrics {
                gamma0: other,
                gamma1: matching,
            }
        }
    }

    fn metric_from_f64(&self, x: f64) -> i32 {
        let scaled = (x * self.scale as f64).round();
        self.clamp_metric(scaled as i64)
    }

    fn metric_to_f64(&self, m: i32) -> f64 {
        m as f64 / self.scale as f64
    }

    fn metric_add(&self, a: i32, b: i32) -> i32 {
        self.clamp_metric(a as i64 + b as i64)
    }

    fn metric_sub(&self, a: i32, b: i32) -> i32 {
        self.clamp_metric(a as i64 - b as i64)
    }

    fn tag(&self) -> &'static str {
        "fixed-minsum"
    }
}

/// Unquantized floating-point reference arithmetic.
///
/// Check nodes use the exact boxplus, variable nodes the exact sum, and
/// branch metrics the exact form `1 - log2(1 + exp(-(1 - 2u) z)) - b`.
/// Nothing saturates; this is the "what would the datapath do with
/// infinite precision" baseline the fixed pipeline is compared against.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactF64;

impl ExactF64 {
    pub fn new() -> Self {
        ExactF64
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub(crate) fn ln_1p_exp(x: f64) -> f64 {
    if x > 36.0 {
        // e^-x below f64 epsilon; ln(1 + e^x) = x to machine precision.
        x
    } else {
        x.exp().ln_1p()
    }
}

impl DecoderArithmetic for ExactF64 {
    type Llr = f64;
    type Metric = f64;

    fn input_llr(&self, llr: f64) -> f64 {
        llr
    }

    fn llr_to_f64(&self, l: f64) -> f64 {
        l
    }

    fn hard_sign(&self, l: f64) -> u8 {
        (l < 0.0) as u8
    }

    fn check_node(&self, a: f64, b: f64) -> f64 {
        // Exact boxplus in its numerically stable split: min-sum plus a
        // bounded correction term.
        let mag = a.abs().min(b.abs());
        let sgn = if (a < 0.0) != (b < 0.0) { -mag } else { mag };
        sgn + ln_1p_exp(-(a + b).abs()) - ln_1p_exp(-(a - b).abs())
    }

    fn var_node(&self, a: f64, b: f64, bit: u8) -> f64 {
        if bit == 0 {
            b + a
        } else {
            b - a
        }
    }

    fn branch_metrics(&self, z: f64, bias: u8) -> BranchMetrics<f64> {
        let b = bias as f64;
        let gamma0 = 1.0 - ln_1p_exp(-z) * std::f64::consts::LOG2_E - b;
        let gamma1 = 1.0 - ln_1p_exp(z) * std::f64::consts::LOG2_E - b;
        BranchMetrics { gamma0, gamma1 }
    }

    fn metric_from_f64(&self, x: f64) -> f64 {
        x
    }

    fn metric_to_f64(&self, m: f64) -> f64 {
        m
    }

    fn metric_add(&self, a: f64, b: f64) -> f64 {
        a + b
    }

    fn metric_sub(&self, a: f64, b: f64) -> f64 {
        a - b
    }

    fn tag(&self) -> &'static str {
        "exact-f64"
    }
}
