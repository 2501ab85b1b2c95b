//! Release checklist for the (128, 64) operating point.
//!
//! Nine checks, each printing one `acceptance k/9 ... PASS|FAIL` line
//! (visible with `cargo test --test acceptance -- --nocapture`) before
//! asserting. Checks 5 and 6 share a ten-million-frame run at 3.5 dB,
//! which dominates the suite's wall time; everything else finishes in
//! seconds. Measured quantities carry the band they must land in, exact
//! quantities are compared exactly.

use pac_fano::arith::{DecoderArithmetic, ExactF64, FixedMinSum};
use pac_fano::channel::noise_sigma2;
use pac_fano::codecfg::{build_rm_profile, CodeConfig};
use pac_fano::demapper::PolarDemapper;
use pac_fano::encoder::{encode, insert_data, polar_transform};
use pac_fano::fano::{FanoDecoder, Rule};
use pac_fano::reference::{conv_matrix, gf2_vec_mat, polar_matrix, sc_llr};
use pac_fano::sim::{generate_frame, run_point, CycleHistogram, PointParams, SimStats};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

const TAPS: [u8; 7] = [1, 0, 1, 1, 0, 1, 1];

fn operating_point() -> CodeConfig {
    CodeConfig::rm_with_bias(128, 64, &TAPS, 3.5).expect("the shipped code point is valid")
}

fn check(index: u32, label: &str, detail: String, ok: bool) {
    println!(
        "acceptance {index}/9 {label}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance {index}/9 {label} failed: {detail}");
}

/// The shared 3.5 dB measurement: ten million frames, seed 1, the default
/// 2^18 cycle budget. Both the error-rate and the complexity check read
/// from here, so the run happens once per test binary invocation.
fn reference_point() -> &'static SimStats {
    static STATS: OnceLock<SimStats> = OnceLock::new();
    STATS.get_or_init(|| {
        let p = PointParams {
            ebn0_db: 3.5,
            frames: 10_000_000,
            seed: 1,
            ..Default::default()
        };
        run_point(&operating_point(), &p).expect("valid config")
    })
}

#[test]
fn a1_noise_free_frame_costs_exactly_five_n_minus_two_cycles() {
    let cfg = operating_point();
    let arith = FixedMinSum::new(cfg.quant_bits, cfg.quant_scale);
    let mut fano = FanoDecoder::new(&cfg, arith.clone()).unwrap();
    let mut pd = PolarDemapper::new(cfg.block_len, arith.clone());

    let (data, raw) = generate_frame(&cfg, 1.0, true, 7, 0);
    let llrs: Vec<_> = raw.iter().map(|&l| arith.input_llr(l)).collect();
    let mut rules = Vec::new();
    let summary = fano
        .decode_traced(&mut pd, &llrs, &mut |s| rules.push(s.rule))
        .unwrap();

    let clean_walk = rules.len() == cfg.block_len && rules.iter().all(|&r| r == Rule::ForwardNew);
    let split_ok = (
        summary.cycles,
        summary.pd_cycles,
        summary.fcu_cycles,
        summary.bmu_cycles,
    ) == (638, 254, 256, 128);
    let decoded = fano.data_estimate() == data && !summary.timed_out;

    // The same frame through the harness, many times over: the histogram
    // must sit entirely on one value.
    let p = PointParams {
        frames: 32,
        seed: 7,
        noise_free: true,
        ..Default::default()
    };
    let stats = run_point(&cfg, &p).unwrap();
    let harness_ok = stats.frame_errors == 0
        && stats.timeouts == 0
        && stats.cycle_sum == 32 * 638
        && stats.pd_cycle_sum == 32 * 254
        && stats.fcu_cycle_sum == 32 * 256
        && stats.bmu_cycle_sum == 32 * 128;

    check(
        1,
        "noise-free cycle count",
        format!(
            "cc={} pd={} fcu={} bmu={}, {} forward rules",
            summary.cycles,
            summary.pd_cycles,
            summary.fcu_cycles,
            summary.bmu_cycles,
            rules.len()
        ),
        clean_walk && split_ok && decoded && harness_ok,
    );
}

#[test]
fn a2_branch_metric_table_is_exact_over_the_whole_quantized_domain() {
    let arith = FixedMinSum::new(7, 4);
    let scale = 4i32;
    let mut ok = true;
    for z in -64..=63i32 {
        for bias in 0..=1i32 {
            let bm = arith.branch_metrics(z, bias as u8);
            // Independent closed form, sign row by sign row: the hypothesis that
            // matches the hard sign of z scores 1 - b, the other one
            // 1 - |z| - b, all in LLR units times the scale.
            let m_match = scale * (1 - bias);
            let m_miss = scale - z.abs() - scale * bias;
            let (got_match, got_miss) = if z >= 0 {
                (bm.gamma0, bm.gamma1)
            } else {
                (bm.gamma1, bm.gamma0)
            };
            ok &= got_match == m_match && got_miss == m_miss;
        }
    }

    // The float backend carries the exact logarithmic metric the table
    // approximates: gamma_u = 1 - b - log2(1 + e^(-z_u)) with z aligned
    // to the hypothesis.
    let exact = ExactF64::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let z: f64 = rng.random_range(-20.0..20.0);
        for bias in 0..=1u8 {
            let bm = exact.branch_metrics(z, bias);
            let g = |aligned: f64| 1.0 - bias as f64 - (-aligned).exp().ln_1p() / 2f64.ln();
            ok &= (bm.gamma0 - g(z)).abs() < 1e-9 && (bm.gamma1 - g(-z)).abs() < 1e-9;
        }
    }
    check(
        2,
        "branch metric table",
        "all rows, all 2^7 z values, both bias bits".into(),
        ok,
    );
}

#[test]
fn a3_demapper_matches_the_recursive_oracle_bit_exactly() {
    let arith = FixedMinSum::new(7, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0u64;
    let mut ok = true;

    for stages in 1..=6u32 {
        let n = 1usize << stages;
        let vectors = 10_000 / 6 + 1;
        let mut pd = PolarDemapper::new(n, arith.clone());
        for _ in 0..vectors {
            let llrs: Vec<_> = (0..n)
                .map(|_| arith.input_llr(rng.random_range(-8.0..8.0)))
                .collect();

            // A clean in-order pass first: its stage activations must sum
            // to 2N - 2 no matter which hard bits get committed.
            pd.reset(&llrs).unwrap();
            let mut prefix: Vec<u8> = Vec::new();
            let mut activations = 0u64;
            for i in 0..n {
                let out = pd.demap(i, &prefix);
                activations += u64::from(out.stage_activations);
                ok &= out.llr == sc_llr(&arith, &llrs, &prefix);
                prefix.push(rng.random_range(0..=1));
                checked += 1;
            }
            ok &= activations == 2 * n as u64 - 2;

            // Then a random backtracking walk over the same frame: jump to
            // an arbitrary shallower level, flip the committed bits, and
            // every answer must still equal the from-scratch recursion.
            for _ in 0..2 * n {
                let depth = rng.random_range(0..n);
                prefix.truncate(depth);
                while prefix.len() < depth {
                    prefix.push(rng.random_range(0..=1));
                }
                let out = pd.demap(depth, &prefix);
                ok &= out.llr == sc_llr(&arith, &llrs, &prefix);
                checked += 1;
            }
        }
    }
    check(
        3,
        "demapper vs recursive oracle",
        format!("{checked} queries, N up to 64"),
        ok,
    );
}

#[test]
fn a4_encoder_matches_the_dense_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    for stages in 3..=5u32 {
        let n = 1usize << stages;
        let k = n / 2;
        let mask = build_rm_profile(n, k).unwrap();
        let conv = conv_matrix(&TAPS, n);
        let pol = polar_matrix(n);
        for _ in 0..10_000 {
            let data: Vec<u8> = (0..k).map(|_| rng.random_range(0..=1)).collect();
            let v = insert_data(&data, &mask).unwrap();
            let x_dense = gf2_vec_mat(&gf2_vec_mat(&v, &conv), &pol);
            ok &= encode(&data, &mask, &TAPS).unwrap() == x_dense;
        }
    }
    for _ in 0..1_000 {
        let x: Vec<u8> = (0..64).map(|_| rng.random_range(0..=1)).collect();
        ok &= polar_transform(&polar_transform(&x)) == x;
    }
    check(
        4,
        "encoder vs dense matrices",
        "N in {8,16,32}, 10^4 messages each".into(),
        ok,
    );
}

#[test]
fn a5_frame_error_rate_at_the_reference_point() {
    let stats = reference_point();
    let fer = stats.fer();
    let ok = (0.8e-5..=4.8e-5).contains(&fer);
    check(
        5,
        "frame error rate at 3.5 dB",
        format!(
            "fer={fer:.3e} from {} frames, band [8.0e-6, 4.8e-5]",
            stats.frames
        ),
        ok,
    );
}

#[test]
fn a6_average_complexity_at_the_reference_point() {
    let stats = reference_point();
    let acc = stats.avg_cycles();
    let ok = (839.0 * 0.85..=839.0 * 1.15).contains(&acc);
    check(
        6,
        "average cycles at 3.5 dB",
        format!("acc={acc:.1}, band [713.2, 964.9]"),
        ok,
    );
}

#[test]
fn a7_cycle_budget_sensitivity_at_low_snr() {
    let mut small = operating_point();
    small.max_cycles = 1 << 14;
    let mut large = operating_point();
    large.max_cycles = 1 << 18;
    let p = PointParams {
        ebn0_db: 1.0,
        frames: 10_000,
        seed: 1,
        ..Default::default()
    };
    let acc_small = run_point(&small, &p).unwrap().avg_cycles();
    let acc_large = run_point(&large, &p).unwrap().avg_cycles();
    let drop = 1.0 - acc_small / acc_large;
    let ok = (0.36..=0.66).contains(&drop);
    check(
        7,
        "budget sensitivity at 1 dB",
        format!(
            "acc(2^14)={acc_small:.0} acc(2^18)={acc_large:.0} drop={drop:.3}, band [0.36, 0.66]"
        ),
        ok,
    );
}

#[test]
fn a8_throughput_model_figures() {
    fn significant(x: f64, digits: i32) -> f64 {
        let shift = digits - 1 - x.abs().log10().floor() as i32;
        let factor = 10f64.powi(shift);
        (x * factor).round() / factor
    }

    // A synthetic run summary pinned at the nominal operating numbers.
    let stats = SimStats {
        ebn0_db: 3.5,
        max_cycles: 1 << 18,
        seed: 1,
        config_digest: 0,
        msg_len: 64,
        frames: 1,
        frame_errors: 0,
        timeouts: 0,
        cycle_sum: 839,
        pd_cycle_sum: 0,
        fcu_cycle_sum: 0,
        bmu_cycle_sum: 0,
        hist: CycleHistogram::default(),
    };
    let avg_mbps = stats.model_throughput_bps(500e6).unwrap() / 1e6;
    let worst_mbps = stats.worst_case_throughput_bps(500e6) / 1e6;
    let ok = significant(avg_mbps, 3) == 38.1 && significant(worst_mbps, 2) == 0.12;
    check(
        8,
        "throughput model",
        format!("avg={avg_mbps:.3} Mb/s -> 38.1, worst={worst_mbps:.4} Mb/s -> 0.12"),
        ok,
    );
}

#[test]
fn a9_decoder_search_properties() {
    // Comparator-free ordering: the sign-matching hypothesis never scores
    // below its sibling anywhere in the quantized domain.
    let fixed = FixedMinSum::new(7, 4);
    let mut ordering = true;
    for z in -64..=63i32 {
        for bias in 0..=1u8 {
            let bm = fixed.branch_metrics(z, bias);
            let (m, s) = if z >= 0 {
                (bm.gamma0, bm.gamma1)
            } else {
                (bm.gamma1, bm.gamma0)
            };
            ordering &= m >= s;
        }
    }

    // A hundred thousand noisy decodes of the 16-bit code with no cycle
    // budget: every one must terminate on its own, every backward move
    // must be legal, and a step under the backward-check flag must touch
    // neither the demapper nor the metric unit.
    let mut cfg16 = CodeConfig::rm_with_bias(16, 8, &TAPS, 3.5).unwrap();
    cfg16.max_cycles = u64::MAX;
    let arith = FixedMinSum::new(cfg16.quant_bits, cfg16.quant_scale);
    let mut fano = FanoDecoder::new(&cfg16, arith.clone()).unwrap();
    let mut pd = PolarDemapper::new(cfg16.block_len, arith.clone());
    let sigma2 = noise_sigma2(1.0, cfg16.rate());

    let mut legality = true;
    let mut silence = true;
    let mut finished = true;
    let mut back_moves = 0u64;
    for frame in 0..100_000u64 {
        let (_, raw) = generate_frame(&cfg16, sigma2, false, 9, frame);
        let llrs: Vec<_> = raw.iter().map(|&l| arith.input_llr(l)).collect();
        let mut t_before = 0.0f64;
        let summary = fano
            .decode_traced(&mut pd, &llrs, &mut |s| {
                let t_after = arith.metric_to_f64(s.threshold);
                match s.rule {
                    Rule::BackToLateral | Rule::BackAgain => {
                        back_moves += 1;
                        let m1 =
                            arith.metric_to_f64(s.back_metric.expect("back move has a parent"));
                        legality &= m1 + t_before <= 0.0;
                    }
                    _ => {}
                }
                if s.revisiting {
                    silence &= s.pd_activations == 0 && !s.fresh_metric;
                }
                t_before = t_after;
            })
            .unwrap();
        finished &= !summary.timed_out;
    }
    let coverage = back_moves > 10_000;

    // The harness must hand back the same numbers no matter how the
    // frames are spread over workers.
    let p1 = PointParams {
        frames: 2_000,
        seed: 5,
        workers: 1,
        ..Default::default()
    };
    let p4 = PointParams { workers: 4, ..p1 };
    let cfg = operating_point();
    let one = run_point(&cfg, &p1).unwrap();
    let four = run_point(&cfg, &p4).unwrap();
    let invariant = one.frames == four.frames
        && one.frame_errors == four.frame_errors
        && one.timeouts == four.timeouts
        && one.cycle_sum == four.cycle_sum
        && one.pd_cycle_sum == four.pd_cycle_sum
        && one.fcu_cycle_sum == four.fcu_cycle_sum
        && one.bmu_cycle_sum == four.bmu_cycle_sum
        && one.hist.bins() == four.hist.bins();

    // Unbudgeted termination for the smaller blocks too.
    let mut tiny_done = true;
    for (n, k) in [(4usize, 2usize), (8, 4)] {
        let mut cfg = CodeConfig::rm_with_bias(n, k, &TAPS, 3.5).unwrap();
        cfg.max_cycles = u64::MAX;
        let arith = FixedMinSum::new(cfg.quant_bits, cfg.quant_scale);
        let mut fano = FanoDecoder::new(&cfg, arith.clone()).unwrap();
        let mut pd = PolarDemapper::new(cfg.block_len, arith.clone());
        let sigma2 = noise_sigma2(0.5, cfg.rate());
        for frame in 0..2_000u64 {
            let (_, raw) = generate_frame(&cfg, sigma2, false, 11, frame);
            let llrs: Vec<_> = raw.iter().map(|&l| arith.input_llr(l)).collect();
            tiny_done &= !fano.decode(&mut pd, &llrs).unwrap().timed_out;
        }
    }

    check(
        9,
        "search properties",
        format!(
            "ordering={ordering} legality={legality} ({back_moves} back moves) \
             psi-silence={silence} workers={invariant} termination={}",
            finished && tiny_done
        ),
        ordering && legality && coverage && silence && finished && invariant && tiny_done,
    );
}
