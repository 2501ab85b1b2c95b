//! Monte-Carlo harness: frame generation, parallel decoding, statistics.
//!
//! Reproducibility is the design constraint here. Every frame gets its own
//! RNG substream derived from (seed, frame index), so frame `k` sees the
//! same data bits and noise no matter how many workers run or in what
//! order they finish. All merged quantities are integers (counts, cycle
//! sums, histogram bins); floating-point summaries are derived only after
//! the merge, so results are bit-identical across worker counts.

use crate::arith::{DecoderArithmetic, ExactF64, FixedMinSum};
use crate::channel::{add_awgn, bpsk, channel_llrs, frame_rng, noise_sigma2};
use crate::codecfg::{mask_to_hex, CodeConfig, InvalidConfig};
use crate::demapper::PolarDemapper;
use crate::encoder::encode;
use crate::fano::FanoDecoder;
use rand::Rng;
use rayon::prelude::*;
use std::io::{self, Write};
use std::path::Path;

/// Channel LLR magnitude used for noise-free runs: far beyond any
/// quantizer rail, so both pipelines see fully saturated inputs.
pub const NOISE_FREE_LLR: f64 = 300.0;

/// One simulation point: an operating SNR plus run controls.
#[derive(Clone, Copy, Debug)]
pub struct PointParams {
    pub ebn0_db: f64,
    pub frames: u64,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime pick.
    pub workers: usize,
    /// Replace the channel with saturated correct-sign LLRs.
    pub noise_free: bool,
    /// Run the exact floating-point pipeline instead of the quantized one.
    pub float_ref: bool,
}

impl Default for PointParams {
    fn default() -> Self {
        PointParams {
            ebn0_db: 3.5,
            frames: 1000,
            seed: 1,
            workers: 0,
            noise_free: false,
            float_ref: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] InvalidConfig),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Eight sub-bins per octave: 2^(j/8) for j in 0..8, written out so the
/// bin edges are identical on every platform.
const SUBBIN: [f64; 8] = [
    1.0,
    1.0905077326652577,
    1.189207115002721,
    1.2968395546510096,
    std::f64::consts::SQRT_2,
    1.5422108254079407,
    1.6817928305074292,
    1.8340080864093424,
];

const HIST_BINS: usize = 512;

/// Logarithmic histogram of per-frame cycle counts: 64 octaves times 8
/// sub-bins, covering the whole u64 range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleHistogram {
    bins: Vec<u64>,
}

impl Default for CycleHistogram {
    fn default() -> Self {
        CycleHistogram {
            bins: vec![0; HIST_BINS],
        }
    }
}

impl CycleHistogram {
    pub fn bin_index(value: u64) -> usize {
        if value == 0 {
            return 0;
        }
        let oct = 63 - value.leading_zeros() as usize;
        let frac = value as f64 / (1u64 << oct) as f64;
        let j = SUBBIN.partition_point(|&m| m <= frac) - 1;
        oct * 8 + j
    }

    /// Smallest cycle count that maps into bin `index`.
    pub fn bin_floor(index: usize) -> u64 {
        let oct = index / 8;
        let j = index % 8;
        ((1u64 << oct) as f64 * SUBBIN[j]).ceil() as u64
    }

    pub fn record(&mut self, value: u64) {
        self.bins[Self::bin_index(value)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    pub fn merge_from(&mut self, other: &CycleHistogram) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    /// Lower edge of the bin holding quantile `q` (0 < q <= 1).
    pub fn quantile_floor(&self, q: f64) -> u64 {
        let total = self.total();
        if total == 0 {
            return 0;
        }
        let target = (q * total as f64).ceil().max(1.0) as u64;
        let mut seen = 0u64;
        for (i, &c) in self.bins.iter().enumerate() {
            seen += c;
            if seen >= target {
                return Self::bin_floor(i);
            }
        }
        Self::bin_floor(HIST_BINS - 1)
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }
}

/// Merged outcome of one simulation point.
#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub ebn0_db: f64,
    pub max_cycles: u64,
    pub seed: u64,
    pub config_digest: u64,
    pub msg_len: usize,
    pub frames: u64,
    pub frame_errors: u64,
    pub timeouts: u64,
    pub cycle_sum: u64,
    pub pd_cycle_sum: u64,
    pub fcu_cycle_sum: u64,
    pub bmu_cycle_sum: u64,
    pub hist: CycleHistogram,
}

impl SimStats {
    fn identity(ebn0_db: f64, max_cycles: u64, seed: u64, digest: u64, msg_len: usize) -> Self {
        SimStats {
            ebn0_db,
            max_cycles,
            seed,
            config_digest: digest,
            msg_len,
            frames: 0,
            frame_errors: 0,
            timeouts: 0,
            cycle_sum: 0,
            pd_cycle_sum: 0,
            fcu_cycle_sum: 0,
            bmu_cycle_sum: 0,
            hist: CycleHistogram::default(),
        }
    }

    pub fn merge(mut self, other: SimStats) -> SimStats {
        self.frames += other.frames;
        self.frame_errors += other.frame_errors;
        self.timeouts += other.timeouts;
        self.cycle_sum += other.cycle_sum;
        self.pd_cycle_sum += other.pd_cycle_sum;
        self.fcu_cycle_sum += other.fcu_cycle_sum;
        self.bmu_cycle_sum += other.bmu_cycle_sum;
        self.hist.merge_from(&other.hist);
        self
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }

    /// Wilson score interval for the FER at confidence score `z`.
    pub fn fer_interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.frame_errors, self.frames, z)
    }

    /// Average cycles per frame.
    pub fn avg_cycles(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.cycle_sum as f64 / self.frames as f64
        }
    }

    /// Lower bin edge of the q-quantile of the cycle distribution.
    pub fn cycle_quantile(&self, q: f64) -> u64 {
        self.hist.quantile_floor(q)
    }

    /// Average information throughput of the modeled decoder at `fclk_hz`:
    /// one cycle per clock, K bits per frame.
    pub fn model_throughput_bps(&self, fclk_hz: f64) -> Option<f64> {
        let acc = self.avg_cycles();
        if acc > 0.0 {
            Some(fclk_hz / acc * self.msg_len as f64)
        } else {
            None
        }
    }

    /// Guaranteed throughput when every frame burns its whole budget.
    pub fn worst_case_throughput_bps(&self, fclk_hz: f64) -> f64 {
        fclk_hz / self.max_cycles as f64 * self.msg_len as f64
    }

    /// Worst-case decoding latency implied by the cycle budget.
    pub fn decode_latency_s(&self, fclk_hz: f64) -> f64 {
        self.max_cycles as f64 / fclk_hz
    }
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - half) / denom).max(0.0),
        ((center + half) / denom).min(1.0),
    )
}

/// FNV-1a digest of everything that defines a pipeline, excluding the
/// operating point (SNR, budget, seed, frame count). Two CSV rows with the
/// same digest are comparable decoder configurations.
pub fn config_digest(cfg: &CodeConfig, pipeline_tag: &str) -> u64 {
    let bias_bits: Vec<bool> = cfg.bias.iter().map(|&b| b == 1).collect();
    let canon = format!(
        "n={};k={};a={};c={:?};b={};delta={};q={};s={};fv={};arith={}",
        cfg.block_len,
        cfg.msg_len,
        mask_to_hex(&cfg.data_mask),
        cfg.gen_poly,
        mask_to_hex(&bias_bits),
        cfg.delta,
        cfg.quant_bits,
        cfg.quant_scale,
        cfg.first_visit.as_str(),
        pipeline_tag,
    );
    fnv1a(canon.as_bytes())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Data bits and raw channel LLRs of one frame, reproducible from
/// (seed, frame) alone: the data bits are drawn first, then the noise, so
/// the same frame index always carries the same codeword and noise.
pub fn generate_frame(
    cfg: &CodeConfig,
    sigma2: f64,
    noise_free: bool,
    seed: u64,
    frame: u64,
) -> (Vec<u8>, Vec<f64>) {
    let mut rng = frame_rng(seed, frame);
    let data: Vec<u8> = (0..cfg.msg_len)
        .map(|_| rng.random_range(0..=1u8))
        .collect();
    let x = encode(&data, &cfg.data_mask, &cfg.gen_poly).expect("lengths fixed by config");
    let raw: Vec<f64> = if noise_free {
        x.iter()
            .map(|&b| {
                if b == 0 {
                    NOISE_FREE_LLR
                } else {
                    -NOISE_FREE_LLR
                }
            })
            .collect()
    } else {
        let mut y = bpsk(&x);
        add_awgn(&mut y, sigma2, &mut rng);
        channel_llrs(&y, sigma2)
    };
    (data, raw)
}

struct FrameWorker<'a, A: DecoderArithmetic> {
    cfg: &'a CodeConfig,
    arith: A,
    fano: FanoDecoder<A>,
    pd: PolarDemapper<A>,
    sigma2: f64,
    noise_free: bool,
    seed: u64,
    stats: SimStats,
}

impl<'a, A: DecoderArithmetic> FrameWorker<'a, A> {
    fn new(cfg: &'a CodeConfig, arith: A, p: &PointParams, digest: u64) -> Self {
        FrameWorker {
            cfg,
            fano: FanoDecoder::new(cfg, arith.clone()).expect("config validated by run_point"),
            pd: PolarDemapper::new(cfg.block_len, arith.clone()),
            arith,
            sigma2: noise_sigma2(p.ebn0_db, cfg.rate()),
            noise_free: p.noise_free,
            seed: p.seed,
            stats: SimStats::identity(p.ebn0_db, cfg.max_cycles, p.seed, digest, cfg.msg_len),
        }
    }

    fn run_frame(&mut self, frame: u64) {
        let cfg = self.cfg;
        let (data, raw) = generate_frame(cfg, self.sigma2, self.noise_free, self.seed, frame);
        let llrs: Vec<A::Llr> = raw.iter().map(|&l| self.arith.input_llr(l)).collect();
        let summary = self
            .fano
            .decode(&mut self.pd, &llrs)
            .expect("frame length matches");

        let mut error = summary.timed_out;
        if !error {
            let path = self.fano.path();
            let decided = (0..cfg.block_len)
                .filter(|&i| cfg.data_mask[i])
                .map(|i| path[i]);
            error = decided.zip(&data).any(|(got, &sent)| got != sent);
        }

        let s = &mut self.stats;
        s.frames += 1;
        s.frame_errors += error as u64;
        s.timeouts += summary.timed_out as u64;
        s.cycle_sum += summary.cycles;
        s.pd_cycle_sum += summary.pd_cycles;
        s.fcu_cycle_sum += summary.fcu_cycles;
        s.bmu_cycle_sum += summary.bmu_cycles;
        s.hist.record(summary.cycles);
    }
}

/// Run one simulation point and merge the per-worker statistics.
pub fn run_point(cfg: &CodeConfig, p: &PointParams) -> Result<SimStats, SimError> {
    cfg.ensure_valid()?;
    if p.float_ref {
        run_generic(cfg, ExactF64::new(), p)
    } else {
        run_generic(cfg, FixedMinSum::new(cfg.quant_bits, cfg.quant_scale), p)
    }
}

fn run_generic<A: DecoderArithmetic>(
    cfg: &CodeConfig,
    arith: A,
    p: &PointParams,
) -> Result<SimStats, SimError> {
    let digest = config_digest(cfg, arith.tag());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(p.workers)
        .build()?;
    let stats = pool.install(|| {
        (0..p.frames)
            .into_par_iter()
            .fold(
                || FrameWorker::new(cfg, arith.clone(), p, digest),
                |mut w, frame| {
                    w.run_frame(frame);
                    w
                },
            )
            .map(|w| w.stats)
            .reduce(
                || SimStats::identity(p.ebn0_db, cfg.max_cycles, p.seed, digest, cfg.msg_len),
                SimStats::merge,
            )
    });
    Ok(stats)
}

/// Run a grid of operating points: every cycle budget in `mc_list` crossed
/// with every SNR in `ebn0_list`, same seed and frame count each.
pub fn sweep(
    cfg: &CodeConfig,
    base: &PointParams,
    ebn0_list: &[f64],
    mc_list: &[u64],
) -> Result<Vec<SimStats>, SimError> {
    let mut rows = Vec::with_capacity(ebn0_list.len() * mc_list.len());
    for &mc in mc_list {
        let mut point_cfg = cfg.clone();
        point_cfg.max_cycles = mc;
        for &ebn0 in ebn0_list {
            let p = PointParams {
                ebn0_db: ebn0,
                ..*base
            };
            rows.push(run_point(&point_cfg, &p)?);
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "ebn0_db,mc,frames,frame_errors,timeouts,fer,fer_ci_lo,fer_ci_hi,acc,cc_p50,cc_p99,cc_p999,tp_model_bps,config_digest,seed";

/// Write rows in the harness CSV schema. `header` controls whether the
/// column line is emitted first.
pub fn write_csv<W: Write>(
    w: &mut W,
    rows: &[SimStats],
    fclk_hz: f64,
    header: bool,
) -> io::Result<()> {
    if header {
        writeln!(w, "{CSV_HEADER}")?;
    }
    for s in rows {
        let (lo, hi) = s.fer_interval(1.96);
        let tp = s.model_throughput_bps(fclk_hz).unwrap_or(0.0);
        writeln!(
            w,
            "{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.3},{},{},{},{:.6e},{:016x},{}",
            s.ebn0_db,
            s.max_cycles,
            s.frames,
            s.frame_errors,
            s.timeouts,
            s.fer(),
            lo,
            hi,
            s.avg_cycles(),
            s.cycle_quantile(0.50),
            s.cycle_quantile(0.99),
            s.cycle_quantile(0.999),
            tp,
            s.config_digest,
            s.seed,
        )?;
    }
    Ok(())
}

/// Append rows to a CSV file, writing the header only when the file is new
/// or empty.
pub fn append_csv_file<P: AsRef<Path>>(path: P, rows: &[SimStats], fclk_hz: f64) -> io::Result<()> {
    let need_header = std::fs::metadata(&path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)?;
    write_csv(&mut file, rows, fclk_hz, need_header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecfg::FirstVisitRule;

    fn small_cfg() -> CodeConfig {
        CodeConfig::rm_with_bias(16, 8, &[1, 1, 0, 1], 3.5).unwrap()
    }

    #[test]
    fn histogram_bins_are_monotone_and_bracket_values() {
        let mut prev = 0;
        for c in 1..5000u64 {
            let b = CycleHistogram::bin_index(c);
            assert!(b >= prev, "bin index fell at {c}");
            prev = b;
            assert!(
                CycleHistogram::bin_floor(b) <= c,
                "floor above value at {c}"
            );
            if b + 1 < HIST_BINS {
                assert!(
                    c < CycleHistogram::bin_floor(b + 1),
                    "value past next floor at {c}"
                );
            }
        }
        assert_eq!(CycleHistogram::bin_index(1), 0);
        assert_eq!(CycleHistogram::bin_index(2), 8);
        assert_eq!(CycleHistogram::bin_index(u64::MAX), HIST_BINS - 1);
    }

    #[test]
    fn histogram_quantiles_walk_the_mass() {
        let mut h = CycleHistogram::default();
        for _ in 0..90 {
            h.record(100);
        }
        for _ in 0..10 {
            h.record(10_000);
        }
        let b100 = CycleHistogram::bin_floor(CycleHistogram::bin_index(100));
        let b10k = CycleHistogram::bin_floor(CycleHistogram::bin_index(10_000));
        assert_eq!(h.quantile_floor(0.5), b100);
        assert_eq!(h.quantile_floor(0.95), b10k);
    }

    #[test]
    fn wilson_matches_textbook_values() {
        let (lo, hi) = wilson_interval(5, 100, 1.96);
        assert!((lo - 0.0215).abs() < 0.001, "lo = {lo}");
        assert!((hi - 0.1118).abs() < 0.001, "hi = {hi}");
        let (lo, hi) = wilson_interval(0, 50, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn digest_tracks_pipeline_not_operating_point() {
        let a = small_cfg();
        let mut b = a.clone();
        b.max_cycles = 77; // operating point only: digest unchanged
        assert_eq!(
            config_digest(&a, "fixed-minsum"),
            config_digest(&b, "fixed-minsum")
        );
        let mut c = a.clone();
        c.gen_poly = vec![1, 0, 1];
        assert_ne!(
            config_digest(&a, "fixed-minsum"),
            config_digest(&c, "fixed-minsum")
        );
        assert_ne!(
            config_digest(&a, "fixed-minsum"),
            config_digest(&a, "exact-f64")
        );
        let mut d = a.clone();
        d.first_visit = FirstVisitRule::ThresholdTest;
        assert_ne!(
            config_digest(&a, "fixed-minsum"),
            config_digest(&d, "fixed-minsum")
        );
    }

    #[test]
    fn noise_free_point_is_error_free_with_flat_cycles() {
        let cfg = small_cfg();
        let p = PointParams {
            frames: 40,
            noise_free: true,
            workers: 1,
            ..Default::default()
        };
        let s = run_point(&cfg, &p).unwrap();
        assert_eq!(s.frames, 40);
        assert_eq!(s.frame_errors, 0);
        assert_eq!(s.timeouts, 0);
        let clean = 5 * 16 - 2;
        assert_eq!(s.cycle_sum, 40 * clean);
        assert_eq!(s.avg_cycles(), clean as f64);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = small_cfg();
        let base = PointParams {
            ebn0_db: 1.5,
            frames: 300,
            seed: 7,
            ..Default::default()
        };
        let one = run_point(&cfg, &PointParams { workers: 1, ..base }).unwrap();
        let four = run_point(&cfg, &PointParams { workers: 4, ..base }).unwrap();
        assert_eq!(one, four);
        assert!(one.frame_errors > 0, "expected some errors at 1.5 dB");
    }

    #[test]
    fn float_pipeline_runs_and_differs_in_digest() {
        let cfg = small_cfg();
        let p = PointParams {
            frames: 50,
            float_ref: true,
            workers: 1,
            ..Default::default()
        };
        let s = run_point(&cfg, &p).unwrap();
        assert_eq!(s.frames, 50);
        let fixed = run_point(
            &cfg,
            &PointParams {
                float_ref: false,
                ..p
            },
        )
        .unwrap();
        assert_ne!(s.config_digest, fixed.config_digest);
    }

    #[test]
    fn sweep_crosses_budgets_with_snrs() {
        let cfg = small_cfg();
        let base = PointParams {
            frames: 20,
            workers: 1,
            noise_free: true,
            ..Default::default()
        };
        let rows = sweep(&cfg, &base, &[2.0, 3.0], &[1 << 10, 1 << 12]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].max_cycles, 1 << 10);
        assert_eq!(rows[3].max_cycles, 1 << 12);
        assert_eq!(rows[3].ebn0_db, 3.0);
    }

    #[test]
    fn csv_emits_header_once_per_file() {
        let cfg = small_cfg();
        let p = PointParams {
            frames: 10,
            workers: 1,
            noise_free: true,
            ..Default::default()
        };
        let s = run_point(&cfg, &p).unwrap();

        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&s), 500e6, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ebn0_db,mc,"));
        assert_eq!(text.lines().count(), 2);
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());

        let path = std::env::temp_dir().join(format!("pacsim-csv-{}.csv", std::process::id()));
        std::fs::remove_file(&path).ok();
        append_csv_file(&path, std::slice::from_ref(&s), 500e6).unwrap();
        append_csv_file(&path, &[s], 500e6).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(text.lines().filter(|l| l.starts_with("ebn0_db")).count(), 1);
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn throughput_and_latency_follow_the_cycle_model() {
        let cfg = small_cfg();
        let p = PointParams {
            frames: 10,
            workers: 1,
            noise_free: true,
            ..Default::default()
        };
        let s = run_point(&cfg, &p).unwrap();
        // Clean 16-bit frames: 78 cycles each, 8 info bits.
        let tp = s.model_throughput_bps(500e6).unwrap();
        assert!((tp - 500e6 / 78.0 * 8.0).abs() < 1e-6);
        let wc = s.worst_case_throughput_bps(500e6);
        assert!((wc - 500e6 / (1 << 18) as f64 * 8.0).abs() < 1e-9);
        assert!((s.decode_latency_s(500e6) - (1 << 18) as f64 / 500e6).abs() < 1e-15);
    }
}
