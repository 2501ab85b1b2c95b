//! Code and decoder configuration: rate profile, metric bias, validation.
//!
//! A [`CodeConfig`] fixes everything two runs must share to be comparable:
//! block and message length, the data index set, convolution taps, the
//! per-level metric bias, threshold spacing, quantizer geometry, and the
//! decoder cycle budget.
//!
//! Construction follows the Reed-Muller rate profile (keep the positions
//! with the highest index weight) and a one-bit quantization of bit-channel
//! capacities for the metric bias. Capacities come from density evolution
//! under the Gaussian approximation; a Monte-Carlo genie estimator of the
//! same quantities is provided as the cross-check oracle.

use crate::arith::{ln_1p_exp, ExactF64};
use crate::channel::{add_awgn, bpsk, channel_llrs, frame_rng, noise_sigma2};
use crate::encoder::polar_transform;
use crate::reference::genie_llr_stream;
use rand::Rng;
use std::f64::consts::LOG2_E;
use std::fmt;
use std::path::Path;

/// How the decoder decides that a forward move lands on a fresh node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FirstVisitRule {
    /// Explicit per-level visit marks, cleared when the path below a level
    /// changes. This is the modeled hardware's mechanism.
    #[default]
    Marks,
    /// The classical shortcut: treat the move as a first visit when the
    /// pre-move threshold satisfies `T + delta > 0`. Kept for comparison.
    ThresholdTest,
}

impl FirstVisitRule {
    pub fn as_str(self) -> &'static str {
        match self {
            FirstVisitRule::Marks => "marks",
            FirstVisitRule::ThresholdTest => "threshold-test",
        }
    }
}

impl std::str::FromStr for FirstVisitRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "marks" => Ok(FirstVisitRule::Marks),
            "threshold-test" | "threshold" => Ok(FirstVisitRule::ThresholdTest),
            other => Err(format!("unknown first-visit rule `{other}`")),
        }
    }
}

/// Complete code + decoder parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeConfig {
    /// Block length N (a power of two).
    pub block_len: usize,
    /// Message length K.
    pub msg_len: usize,
    /// Data index membership, length N, exactly K entries true.
    pub data_mask: Vec<bool>,
    /// Convolution taps, low order first; `gen_poly[0]` must be 1.
    pub gen_poly: Vec<u8>,
    /// Per-level metric bias bits, length N.
    pub bias: Vec<u8>,
    /// Threshold spacing in metric units; must sit on the quantizer grid.
    pub delta: f64,
    /// LLR register width in bits.
    pub quant_bits: u32,
    /// Quantizer units per unit LLR.
    pub quant_scale: i32,
    /// Decoder cycle budget per frame.
    pub max_cycles: u64,
    /// First-visit detection variant.
    pub first_visit: FirstVisitRule,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("block length {0} is not a power of two")]
    BadBlockLen(usize),
    #[error("message length {k} not in 1..={n}")]
    BadMsgLen { k: usize, n: usize },
    #[error("hex profile `{0}` is malformed")]
    BadHex(String),
    #[error("config file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("config file line {line}: expected key=value, got `{text}`")]
    BadLine { line: usize, text: String },
}

/// One structural problem found by [`CodeConfig::validate`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigViolation {
    #[error("block length {0} is not a power of two")]
    BlockLenNotPowerOfTwo(usize),
    #[error("message length {k} not in 1..={n}")]
    MsgLenOutOfRange { k: usize, n: usize },
    #[error("data mask has length {got}, expected {expected}")]
    MaskLength { expected: usize, got: usize },
    #[error("data mask selects {got} positions, expected {expected}")]
    MaskWeight { expected: usize, got: usize },
    #[error("generator polynomial is empty")]
    EmptyTaps,
    #[error("generator polynomial must start with tap 1")]
    LeadingTapNotOne,
    #[error("generator tap {index} is not a bit")]
    TapNotBinary { index: usize },
    #[error("bias vector has length {got}, expected {expected}")]
    BiasLength { expected: usize, got: usize },
    #[error("bias entry {index} is not a bit")]
    BiasNotBinary { index: usize },
    #[error("threshold spacing {0} is not positive")]
    DeltaNotPositive(f64),
    #[error("threshold spacing {delta} is not representable at scale {scale}")]
    DeltaOffGrid { delta: f64, scale: i32 },
    #[error("quantizer width {0} not in 2..=24 bits")]
    QuantBitsOutOfRange(u32),
    #[error("quantizer scale {0} is not positive")]
    ScaleNotPositive(i32),
    #[error("cycle budget must be nonzero")]
    MaxCyclesZero,
}

/// A config rejected wholesale, carrying every violation found.
#[derive(Debug, thiserror::Error)]
pub struct InvalidConfig(pub Vec<ConfigViolation>);

impl fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl CodeConfig {
    /// Reed-Muller profile plus density-evolution bias at `design_ebn0_db`,
    /// with the default decoder parameters (delta 2.0, 7-bit LLRs at scale
    /// 4, cycle budget 2^18, mark-based first-visit detection).
    pub fn rm_with_bias(
        block_len: usize,
        msg_len: usize,
        gen_poly: &[u8],
        design_ebn0_db: f64,
    ) -> Result<CodeConfig, ConfigError> {
        let data_mask = build_rm_profile(block_len, msg_len)?;
        let bias = build_bias(block_len, msg_len, design_ebn0_db);
        Ok(CodeConfig {
            block_len,
            msg_len,
            data_mask,
            gen_poly: gen_poly.to_vec(),
            bias,
            delta: 2.0,
            quant_bits: 7,
            quant_scale: 4,
            max_cycles: 1 << 18,
            first_visit: FirstVisitRule::Marks,
        })
    }

    /// log2 of the block length.
    pub fn stages(&self) -> u32 {
        self.block_len.trailing_zeros()
    }

    pub fn rate(&self) -> f64 {
        self.msg_len as f64 / self.block_len as f64
    }

    pub fn data_indices(&self) -> Vec<usize> {
        (0..self.block_len).filter(|&i| self.data_mask[i]).collect()
    }

    /// Collect every structural problem; an empty list means valid.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        let n = self.block_len;
        if !n.is_power_of_two() {
            out.push(ConfigViolation::BlockLenNotPowerOfTwo(n));
        }
        if self.msg_len == 0 || self.msg_len > n {
            out.push(ConfigViolation::MsgLenOutOfRange { k: self.msg_len, n });
        }
        if self.data_mask.len() != n {
            out.push(ConfigViolation::MaskLength {
                expected: n,
                got: self.data_mask.len(),
            });
        } else {
            let weight = self.data_mask.iter().filter(|&&m| m).count();
            if weight != self.msg_len {
                out.push(ConfigViolation::MaskWeight {
                    expected: self.msg_len,
                    got: weight,
                });
            }
        }
        if self.gen_poly.is_empty() {
            out.push(ConfigViolation::EmptyTaps);
        } else {
            if self.gen_poly[0] != 1 {
                out.push(ConfigViolation::LeadingTapNotOne);
            }
            for (index, &tap) in self.gen_poly.iter().enumerate() {
                if tap > 1 {
                    out.push(ConfigViolation::TapNotBinary { index });
                }
            }
        }
        if self.bias.len() != n {
            out.push(ConfigViolation::BiasLength {
                expected: n,
                got: self.bias.len(),
            });
        } else {
            for (index, &b) in self.bias.iter().enumerate() {
                if b > 1 {
                    out.push(ConfigViolation::BiasNotBinary { index });
                }
            }
        }
        if !(2..=24).contains(&self.quant_bits) {
            out.push(ConfigViolation::QuantBitsOutOfRange(self.quant_bits));
        }
        if self.quant_scale < 1 {
            out.push(ConfigViolation::ScaleNotPositive(self.quant_scale));
        }
        if self.delta <= 0.0 {
            out.push(ConfigViolation::DeltaNotPositive(self.delta));
        } else if self.quant_scale >= 1 && (2..=24).contains(&self.quant_bits) {
            let units = self.delta * self.quant_scale as f64;
            let limit = (1i64 << (self.quant_bits + 1)) as f64;
            if units.round() != units || units < 1.0 || units >= limit {
                out.push(ConfigViolation::DeltaOffGrid {
                    delta: self.delta,
                    scale: self.quant_scale,
                });
            }
        }
        if self.max_cycles == 0 {
            out.push(ConfigViolation::MaxCyclesZero);
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), InvalidConfig> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(InvalidConfig(v))
        }
    }
}

/// Reed-Muller rate profile: keep the `msg_len` indices of highest binary
/// weight, breaking weight ties toward the larger index.
pub fn build_rm_profile(block_len: usize, msg_len: usize) -> Result<Vec<bool>, ConfigError> {
    if !block_len.is_power_of_two() || block_len == 0 {
        return Err(ConfigError::BadBlockLen(block_len));
    }
    if msg_len == 0 || msg_len > block_len {
        return Err(ConfigError::BadMsgLen {
            k: msg_len,
            n: block_len,
        });
    }
    let mut order: Vec<usize> = (0..block_len).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((i.count_ones(), i)));
    let mut mask = vec![false; block_len];
    for &i in order.iter().take(msg_len) {
        mask[i] = true;
    }
    Ok(mask)
}

/// Mean LLRs of every bit channel under Gaussian-approximation density
/// evolution, natural order. `sigma2` is the channel noise variance.
pub fn bit_channel_mean_llrs(block_len: usize, sigma2: f64) -> Vec<f64> {
    assert!(block_len.is_power_of_two());
    let mut mus = vec![2.0 / sigma2];
    while mus.len() < block_len {
        let mut next = Vec::with_capacity(mus.len() * 2);
        for &mu in &mus {
            let p = phi(mu);
            // 1 - (1 - phi)^2, expanded to avoid cancellation at small phi.
            next.push(phi_inv(p * (2.0 - p)));
            next.push(2.0 * mu);
        }
        mus = next;
    }
    mus
}

/// Bit-channel capacities from the Gaussian approximation.
pub fn bit_channel_capacities(block_len: usize, sigma2: f64) -> Vec<f64> {
    bit_channel_mean_llrs(block_len, sigma2)
        .into_iter()
        .map(gaussian_capacity)
        .collect()
}

/// One-bit capacity quantization: bias bit 1 where the bit channel carries
/// at least half a bit at the design point.
pub fn build_bias(block_len: usize, msg_len: usize, design_ebn0_db: f64) -> Vec<u8> {
    let rate = msg_len as f64 / block_len as f64;
    let sigma2 = noise_sigma2(design_ebn0_db, rate);
    bit_channel_capacities(block_len, sigma2)
        .into_iter()
        .map(|c| (c >= 0.5) as u8)
        .collect()
}

/// Monte-Carlo genie estimate of the same capacities: random inputs, the
/// exact floating-point demapper fed true past bits, and the information
/// carried by each soft output averaged over `trials` frames.
pub fn estimate_bit_channel_capacities_mc(
    block_len: usize,
    sigma2: f64,
    trials: u64,
    seed: u64,
) -> Vec<f64> {
    assert!(block_len.is_power_of_two());
    let arith = ExactF64::new();
    let mut acc = vec![0.0f64; block_len];
    for t in 0..trials {
        let mut rng = frame_rng(seed, t);
        let u: Vec<u8> = (0..block_len).map(|_| rng.random::<bool>() as u8).collect();
        let x = polar_transform(&u);
        let mut y = bpsk(&x);
        add_awgn(&mut y, sigma2, &mut rng);
        let llrs = channel_llrs(&y, sigma2);
        let soft = genie_llr_stream(&arith, &llrs, &u);
        for (i, &z) in soft.iter().enumerate() {
            let aligned = if u[i] == 0 { z } else { -z };
            acc[i] += 1.0 - ln_1p_exp(-aligned) * LOG2_E;
        }
    }
    for a in acc.iter_mut() {
        *a /= trials as f64;
    }
    acc
}

/// Capacity of a binary-input channel whose LLR is N(mu, 2 mu).
pub fn gaussian_capacity(mu: f64) -> f64 {
    if mu < 1e-12 {
        return 0.0;
    }
    if mu > MU_CAP {
        return 1.0;
    }
    1.0 - gauss_expect(mu, |l| ln_1p_exp(-l) * LOG2_E)
}

// Above this mean the integrand underflows and every quantity of interest
// is 0 or 1 to machine precision.
const MU_CAP: f64 = 2400.0;

/// E[f(L)] for L ~ N(mu, 2 mu), Simpson's rule over +-12 sigma.
fn gauss_expect<F: Fn(f64) -> f64>(mu: f64, f: F) -> f64 {
    let sigma = (2.0 * mu).sqrt();
    let lo = mu - 12.0 * sigma;
    let hi = mu + 12.0 * sigma;
    const STEPS: usize = 800;
    let h = (hi - lo) / STEPS as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let dens = |x: f64| (-(x - mu) * (x - mu) / (4.0 * mu)).exp() * norm;
    let mut acc = f(lo) * dens(lo) + f(hi) * dens(hi);
    for i in 1..STEPS {
        let x = lo + h * i as f64;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(x) * dens(x);
    }
    acc * h / 3.0
}

/// phi(mu) = 1 - E[tanh(L/2)] = E[2 / (1 + e^L)], computed directly in the
/// second form so small values survive in floating point.
fn phi(mu: f64) -> f64 {
    if mu < 1e-12 {
        return 1.0;
    }
    if mu > MU_CAP {
        return 0.0;
    }
    gauss_expect(mu, |l| 2.0 / (1.0 + l.exp()))
}

/// Inverse of [`phi`] by bisection; phi is strictly decreasing.
fn phi_inv(y: f64) -> f64 {
    if y >= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-12, MU_CAP);
    if phi(hi) >= y {
        return hi;
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Render a membership mask as a hex string: bit `i` of the underlying
/// integer is position `i`, most significant nibble first.
pub fn mask_to_hex(mask: &[bool]) -> String {
    let digits = mask.len().div_ceil(4);
    let mut s = String::with_capacity(digits);
    for d in (0..digits).rev() {
        let mut nib = 0u32;
        for b in 0..4 {
            let i = d * 4 + b;
            if i < mask.len() && mask[i] {
                nib |= 1 << b;
            }
        }
        s.push(char::from_digit(nib, 16).unwrap());
    }
    s
}

/// Parse a hex membership mask back to `len` positions.
pub fn hex_to_mask(hex: &str, len: usize) -> Result<Vec<bool>, ConfigError> {
    let digits = len.div_ceil(4);
    if hex.len() != digits {
        return Err(ConfigError::BadHex(hex.to_string()));
    }
    let mut mask = vec![false; len];
    for (pos, ch) in hex.chars().rev().enumerate() {
        let nib = ch
            .to_digit(16)
            .ok_or_else(|| ConfigError::BadHex(hex.to_string()))?;
        for b in 0..4 {
            let i = pos * 4 + b;
            if nib & (1 << b) != 0 {
                if i >= len {
                    return Err(ConfigError::BadHex(hex.to_string()));
                }
                mask[i] = true;
            }
        }
    }
    Ok(mask)
}

/// Read a flat `key=value` config file: one pair per line, `#` comments,
/// blank lines ignored. Keys are lowercased with `-` mapped to `_`.
pub fn parse_kv_file<P: AsRef<Path>>(path: P) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
            line: idx + 1,
            text: line.to_string(),
        })?;
        out.push((
            key.trim().to_ascii_lowercase().replace('-', "_"),
            value.trim().to_string(),
        ));
    }
    Ok(out)
}
