//! BPSK over AWGN, channel LLRs, quantization, and reproducible noise.
//!
//! Simulations must be bit-identical for a given seed no matter how frames
//! are scheduled across workers, so every frame draws from its own counter
//! RNG substream: [`frame_rng`] seeds a ChaCha8 generator from the run seed
//! and selects the frame index as the stream number. Within a frame, data
//! bits are drawn first, then noise samples, in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not an LLR trace file (bad magic)")]
    BadMagic,
    #[error("unsupported LLR trace version {0}")]
    BadVersion(u32),
    #[error("LLR trace requires q_bits <= 16, got {0}")]
    TooWide(u32),
    #[error("LLR trace truncated")]
    Truncated,
    #[error("frame length {got} does not match block length {expected}")]
    FrameLength { expected: usize, got: usize },
}

/// Noise variance per real dimension for a given Eb/N0 and code rate.
pub fn noise_sigma2(ebn0_db: f64, rate: f64) -> f64 {
    assert!(rate > 0.0, "rate must be positive");
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// BPSK mapping: bit 0 -> +1.0, bit 1 -> -1.0.
pub fn bpsk(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| 1.0 - 2.0 * b as f64).collect()
}

/// The RNG substream for one frame of one run.
pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng
}

/// Add white Gaussian noise of variance `sigma2` in place.
pub fn add_awgn(symbols: &mut [f64], sigma2: f64, rng: &mut ChaCha8Rng) {
    let sigma = sigma2.sqrt();
    for y in symbols.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *y += sigma * n;
    }
}

/// Exact channel LLRs for BPSK over AWGN: `l = 2 y / sigma2`.
pub fn channel_llrs(received: &[f64], sigma2: f64) -> Vec<f64> {
    received.iter().map(|&y| 2.0 * y / sigma2).collect()
}

/// Quantize an LLR to a `q_bits`-wide two's-complement value in units of
/// `1/scale`: scale, round half away from zero, saturate at the rails.
///
/// Non-finite inputs saturate by sign (NaN quantizes to 0).
pub fn quantize(llr: f64, q_bits: u32, scale: i32) -> i32 {
    let lo = -(1i64 << (q_bits - 1));
    let hi = (1i64 << (q_bits - 1)) - 1;
    // f64 -> i64 casts saturate, so infinities land on the rails here.
    let scaled = (llr * scale as f64).round() as i64;
    scaled.clamp(lo, hi) as i32
}

const TRACE_MAGIC: &[u8; 4] = b"PACL";
const TRACE_VERSION: u32 = 1;

/// Header of an LLR trace file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LlrTraceMeta {
    pub block_len: u32,
    pub q_bits: u32,
    pub scale: i32,
    pub frames: u64,
}

/// Dump quantized LLR frames to a flat little-endian binary file, the
/// format used to replay identical channel realizations against hardware.
///
/// Layout: magic `PACL`, version, block length, q_bits, scale, frame
/// count (all little-endian), then `frames * block_len` values as `i16`.
pub fn write_llr_trace<P: AsRef<Path>>(
    path: P,
    meta: LlrTraceMeta,
    frames: &[Vec<i32>],
) -> Result<(), ChannelError> {
    if meta.q_bits > 16 {
        return Err(ChannelError::TooWide(meta.q_bits));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&meta.block_len.to_le_bytes())?;
    w.write_all(&meta.q_bits.to_le_bytes())?;
    w.write_all(&meta.scale.to_le_bytes())?;
    w.write_all(&(frames.len() as u64).to_le_bytes())?;
    for frame in frames {
        if frame.len() != meta.block_len as usize {
            return Err(ChannelError::FrameLength {
                expected: meta.block_len as usize,
                got: frame.len(),
            });
        }
        for &v in frame {
            w.write_all(&(v as i16).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read back a trace written by [`write_llr_trace`].
pub fn read_llr_trace<P: AsRef<Path>>(
    path: P,
) -> Result<(LlrTraceMeta, Vec<Vec<i32>>), ChannelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| ChannelError::Truncated)?;
    if &magic != TRACE_MAGIC {
        return Err(ChannelError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != TRACE_VERSION {
        return Err(ChannelError::BadVersion(version));
    }
    let block_len = read_u32(&mut r)?;
    let q_bits = read_u32(&mut r)?;
    let scale = read_u32(&mut r)? as i32;
    let frames = read_u64(&mut r)?;
    let meta = LlrTraceMeta {
        block_len,
        q_bits,
        scale,
        frames,
    };
    let mut out = Vec::with_capacity(frames as usize);
    let mut buf = [0u8; 2];
    for _ in 0..frames {
        let mut frame = Vec::with_capacity(block_len as usize);
        for _ in 0..block_len {
            r.read_exact(&mut buf)
                .map_err(|_| ChannelError::Truncated)?;
            frame.push(i16::from_le_bytes(buf) as i32);
        }
        out.push(frame);
    }
    Ok((meta, out))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ChannelError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| ChannelError::Truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, ChannelError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| ChannelError::Truncated)?;
    Ok(u64::from_le_bytes(b))
}
