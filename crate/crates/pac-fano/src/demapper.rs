//! Soft polar demapper: successive cancellation without the decisions.
//!
//! [`PolarDemapper`] answers one question, repeatedly: given the channel
//! LLRs and the first `i` polar-transform input bits, what is the LLR of
//! input `i`? The Fano engine asks it out of order, walking forward and
//! backward and flipping bits as it searches, so the demapper keeps the
//! intermediate stage buffers of the SC recursion and recomputes only the
//! stages whose inputs actually changed since they were last built.
//!
//! Cost accounting mirrors the modeled hardware: every stage buffer
//! rebuilt counts as one stage activation, and a query answered entirely
//! from the per-index output cache counts zero. On a clean left-to-right
//! pass the schedule is `log2 N` activations for index 0 and `1 + ntz(i)`
//! for every later index, `2N - 2` in total.
//!
//! Cache validity is tracked with change ticks instead of eager flushes:
//! `chmax[k]` remembers the tick at which any recorded bit below position
//! `k` last changed, and a buffer whose build stamp is at least the
//! `chmax` of its dependency range is still good. Backing up and re-walking
//! the same path therefore hits cache, while flipping a bit invalidates
//! exactly the buffers downstream of the flip.

use crate::arith::DecoderArithmetic;
use crate::encoder::polar_transform_in_place;

/// Errors surfaced when loading a frame.
#[derive(Debug, thiserror::Error)]
pub enum DemapError {
    #[error("frame has {got} LLRs, block length is {expected}")]
    FrameLength { expected: usize, got: usize },
}

/// Result of one demap query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemapOutcome<L> {
    /// Soft value of the queried polar input bit.
    pub llr: L,
    /// Stage buffers rebuilt to answer the query.
    pub stage_activations: u32,
    /// True when the answer came straight from the output cache.
    pub cached: bool,
}

#[derive(Clone, Debug)]
struct StageBuf<L> {
    vals: Vec<L>,
    seg: usize,
    stamp: u64,
    filled: bool,
}

#[derive(Clone, Copy, Debug)]
struct OutEntry<L> {
    llr: L,
    stamp: u64,
    filled: bool,
}

/// Stateful SC LLR engine with stage-level caching.
#[derive(Clone, Debug)]
pub struct PolarDemapper<A: DecoderArithmetic> {
    arith: A,
    n: usize,
    stages: usize,
    channel: Vec<A::Llr>,
    /// `levels[l - 1]` holds the one cached segment of stage `l`,
    /// `n >> l` values wide.
    levels: Vec<StageBuf<A::Llr>>,
    /// Per-index output cache (the z-store).
    out: Vec<OutEntry<A::Llr>>,
    /// Recorded input bits, high-water: positions past the current prefix
    /// keep their last value so a re-walk of the same path stays cached.
    recorded: Vec<u8>,
    recorded_len: usize,
    /// `chmax[k]`: tick when any recorded bit with index `< k` last changed.
    chmax: Vec<u64>,
    tick: u64,
    psum: Vec<u8>,
    loaded: bool,
}

impl<A: DecoderArithmetic> PolarDemapper<A> {
    /// Demapper for blocks of `block_len` (a power of two).
    pub fn new(block_len: usize, arith: A) -> Self {
        assert!(
            block_len.is_power_of_two(),
            "block length must be a power of two"
        );
        let stages = block_len.trailing_zeros() as usize;
        PolarDemapper {
            arith,
            n: block_len,
            stages,
            channel: vec![A::Llr::default(); block_len],
            levels: (1..=stages)
                .map(|l| StageBuf {
                    vals: vec![A::Llr::default(); block_len >> l],
                    seg: 0,
                    stamp: 0,
                    filled: false,
                })
                .collect(),
            out: vec![
                OutEntry {
                    llr: A::Llr::default(),
                    stamp: 0,
                    filled: false
                };
                block_len
            ],
            recorded: vec![0; block_len],
            recorded_len: 0,
            chmax: vec![0; block_len + 1],
            tick: 0,
            psum: vec![0; block_len / 2],
            loaded: false,
        }
    }

    pub fn block_len(&self) -> usize {
        self.n
    }

    pub fn arith(&self) -> &A {
        &self.arith
    }

    /// Load a frame of channel LLRs and drop every cached value.
    pub fn reset(&mut self, llrs: &[A::Llr]) -> Result<(), DemapError> {
        if llrs.len() != self.n {
            return Err(DemapError::FrameLength {
                expected: self.n,
                got: llrs.len(),
            });
        }
        self.channel.copy_from_slice(llrs);
        for buf in self.levels.iter_mut() {
            buf.filled = false;
        }
        for e in self.out.iter_mut() {
            e.filled = false;
        }
        self.chmax.fill(0);
        self.tick = 0;
        self.recorded_len = 0;
        self.loaded = true;
        Ok(())
    }

    /// LLR of polar input `index` given the decided inputs `prefix`
    /// (`prefix.len()` must equal `index`).
    pub fn demap(&mut self, index: usize, prefix: &[u8]) -> DemapOutcome<A::Llr> {
        assert!(self.loaded, "demap before reset");
        assert!(
            index < self.n,
            "index {index} out of range for block length {}",
            self.n
        );
        assert_eq!(
            prefix.len(),
            index,
            "prefix length must equal the queried index"
        );
        self.reconcile(prefix);

        let entry = self.out[index];
        if entry.filled && entry.stamp >= self.chmax[index] {
            return DemapOutcome {
                llr: entry.llr,
                stage_activations: 0,
                cached: true,
            };
        }

        let mut cost = 0u32;
        for level in 1..=self.stages {
            let shift = self.stages - level;
            let seg = index >> shift;
            let start = seg << shift;
            let len = self.n >> level;
            {
                let buf = &self.levels[level - 1];
                if buf.filled && buf.seg == seg && buf.stamp >= self.chmax[start] {
                    continue;
                }
            }
            cost += 1;
            let use_g = seg & 1 == 1;
            if use_g {
                let pstart = (seg - 1) << shift;
                self.psum[..len].copy_from_slice(&self.recorded[pstart..pstart + len]);
                polar_transform_in_place(&mut self.psum[..len]);
            }
            let (lower, upper) = self.levels.split_at_mut(level - 1);
            let parent: &[A::Llr] = if level == 1 {
                &self.channel
            } else {
                &lower[level - 2].vals
            };
            let child = &mut upper[0];
            for t in 0..len {
                let a = parent[t];
                let b = parent[t + len];
                child.vals[t] = if use_g {
                    self.arith.var_node(a, b, self.psum[t])
                } else {
                    self.arith.check_node(a, b)
                };
            }
            child.seg = seg;
            child.stamp = self.tick;
            child.filled = true;
        }

        let llr = if self.stages == 0 {
            self.channel[0]
        } else {
            self.levels[self.stages - 1].vals[0]
        };
        self.out[index] = OutEntry {
            llr,
            stamp: self.tick,
            filled: true,
        };
        DemapOutcome {
            llr,
            stage_activations: cost,
            cached: false,
        }
    }

    /// Fold the caller's prefix into the recorded bits. The first position
    /// that differs bumps the change tick for everything above it; fresh
    /// positions extend the record without invalidating anything.
    fn reconcile(&mut self, prefix: &[u8]) {
        let shared = self.recorded_len.min(prefix.len());
        let changed = (0..shared).find(|&j| self.recorded[j] != prefix[j]);
        if let Some(j) = changed {
            self.tick += 1;
            for k in j + 1..=self.n {
                self.chmax[k] = self.tick;
            }
        }
        self.recorded[..prefix.len()].copy_from_slice(prefix);
        self.recorded_len = self.recorded_len.max(prefix.len());
    }
}
