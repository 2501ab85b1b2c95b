//! Simulation driver: sweeps operating points, emits CSV, traces decodes.

use clap::Parser;
use pac_fano::arith::{DecoderArithmetic, ExactF64, FixedMinSum};
use pac_fano::channel::noise_sigma2;
use pac_fano::codecfg::{
    build_bias, build_rm_profile, mask_to_hex, parse_kv_file, CodeConfig, FirstVisitRule,
};
use pac_fano::demapper::PolarDemapper;
use pac_fano::fano::FanoDecoder;
use pac_fano::sim::{append_csv_file, generate_frame, sweep, write_csv, PointParams};
use std::collections::HashMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

/// Sequential-decoding simulator for polarization-adjusted convolutional
/// codes. Sweeps Eb/N0 and cycle-budget grids, reports FER and cycle
/// statistics as CSV, and can trace every decoder move of single frames.
#[derive(Parser, Debug)]
#[command(name = "pacsim", version)]
struct Args {
    /// Block length N (power of two)
    #[arg(long)]
    n: Option<usize>,
    /// Message length K
    #[arg(long)]
    k: Option<usize>,
    /// Convolution taps as a binary string, c0 first (e.g. 1011011)
    #[arg(long)]
    gen_poly: Option<String>,
    /// Eb/N0 operating points in dB, comma separated
    #[arg(long)]
    ebn0: Option<String>,
    /// Cycle budgets per frame, comma separated
    #[arg(long)]
    mc: Option<String>,
    /// Frames per operating point
    #[arg(long)]
    frames: Option<u64>,
    /// Base RNG seed; frame k uses substream k
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = automatic)
    #[arg(long)]
    workers: Option<usize>,
    /// Threshold spacing in metric units
    #[arg(long)]
    delta: Option<f64>,
    /// LLR register width in bits
    #[arg(long)]
    quant_bits: Option<u32>,
    /// Quantizer units per unit LLR
    #[arg(long)]
    quant_scale: Option<i32>,
    /// Design Eb/N0 (dB) for the metric bias construction
    #[arg(long)]
    bias_snr: Option<f64>,
    /// Feed saturated correct-sign LLRs instead of channel noise
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    noise_free: Option<bool>,
    /// Run the exact floating-point pipeline instead of the quantized one
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    float_ref: Option<bool>,
    /// Trace every decoder move to stderr (single worker, first grid point)
    #[arg(long)]
    trace: bool,
    /// Append CSV rows to this file instead of writing to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read defaults from a key=value file (command line wins)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the rate profile and bias as hex and exit
    #[arg(long)]
    export_profile: bool,
    /// Model clock in MHz for throughput columns
    #[arg(long)]
    fclk_mhz: Option<f64>,
    /// First-visit detection: marks | threshold-test
    #[arg(long)]
    first_visit: Option<String>,
}

struct Settings {
    n: usize,
    k: usize,
    gen_poly: Vec<u8>,
    ebn0: Vec<f64>,
    mc: Vec<u64>,
    frames: u64,
    seed: u64,
    workers: usize,
    delta: f64,
    quant_bits: u32,
    quant_scale: i32,
    bias_snr: f64,
    noise_free: bool,
    float_ref: bool,
    trace: bool,
    out: Option<PathBuf>,
    export_profile: bool,
    fclk_hz: f64,
    first_visit: FirstVisitRule,
}

fn file_get<T: FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>, String>
where
    T::Err: Display,
{
    match map.get(key) {
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| format!("config key {key}: {e}")),
        None => Ok(None),
    }
}

fn file_get_bool(map: &HashMap<String, String>, key: &str) -> Result<Option<bool>, String> {
    match map.get(key).map(String::as_str) {
        None => Ok(None),
        Some("true") | Some("1") | Some("yes") => Ok(Some(true)),
        Some("false") | Some("0") | Some("no") => Ok(Some(false)),
        Some(other) => Err(format!(
            "config key {key}: expected a boolean, got `{other}`"
        )),
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, String>
where
    T::Err: Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|e| format!("{what} `{p}`: {e}")))
        .collect()
}

fn parse_taps(s: &str) -> Result<Vec<u8>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(format!("generator polynomial: `{other}` is not a bit")),
        })
        .collect()
}

fn resolve(args: Args) -> Result<Settings, String> {
    let file: HashMap<String, String> = match &args.config {
        Some(path) => parse_kv_file(path)
            .map_err(|e| e.to_string())?
            .into_iter()
            .collect(),
        None => HashMap::new(),
    };

    let gen_poly = match args.gen_poly.or(file.get("gen_poly").cloned()) {
        Some(s) => parse_taps(&s)?,
        None => vec![1, 0, 1, 1, 0, 1, 1],
    };
    let ebn0 = match args.ebn0.or(file.get("ebn0").cloned()) {
        Some(s) => parse_list::<f64>(&s, "ebn0")?,
        None => vec![3.5],
    };
    let mc = match args.mc.or(file.get("mc").cloned()) {
        Some(s) => parse_list::<u64>(&s, "mc")?,
        None => vec![1 << 18],
    };
    if ebn0.is_empty() || mc.is_empty() {
        return Err("ebn0 and mc lists must be non-empty".into());
    }
    let first_visit = match args.first_visit.or(file.get("first_visit").cloned()) {
        Some(s) => s.parse::<FirstVisitRule>()?,
        None => FirstVisitRule::Marks,
    };

    Ok(Settings {
        n: args.n.or(file_get(&file, "n")?).unwrap_or(128),
        k: args.k.or(file_get(&file, "k")?).unwrap_or(64),
        gen_poly,
        ebn0,
        mc,
        frames: args.frames.or(file_get(&file, "frames")?).unwrap_or(10_000),
        seed: args.seed.or(file_get(&file, "seed")?).unwrap_or(1),
        workers: args.workers.or(file_get(&file, "workers")?).unwrap_or(0),
        delta: args.delta.or(file_get(&file, "delta")?).unwrap_or(2.0),
        quant_bits: args
            .quant_bits
            .or(file_get(&file, "quant_bits")?)
            .unwrap_or(7),
        quant_scale: args
            .quant_scale
            .or(file_get(&file, "quant_scale")?)
            .unwrap_or(4),
        bias_snr: args
            .bias_snr
            .or(file_get(&file, "bias_snr")?)
            .unwrap_or(3.5),
        noise_free: args
            .noise_free
            .or(file_get_bool(&file, "noise_free")?)
            .unwrap_or(false),
        float_ref: args
            .float_ref
            .or(file_get_bool(&file, "float_ref")?)
            .unwrap_or(false),
        trace: args.trace,
        out: args.out.or(file_get(&file, "out")?),
        export_profile: args.export_profile,
        fclk_hz: args
            .fclk_mhz
            .or(file_get(&file, "fclk_mhz")?)
            .unwrap_or(500.0)
            * 1e6,
        first_visit,
    })
}

fn build_config(s: &Settings) -> Result<CodeConfig, String> {
    let data_mask = build_rm_profile(s.n, s.k).map_err(|e| e.to_string())?;
    let bias = build_bias(s.n, s.k, s.bias_snr);
    let cfg = CodeConfig {
        block_len: s.n,
        msg_len: s.k,
        data_mask,
        gen_poly: s.gen_poly.clone(),
        bias,
        delta: s.delta,
        quant_bits: s.quant_bits,
        quant_scale: s.quant_scale,
        max_cycles: s.mc[0],
        first_visit: s.first_visit,
    };
    cfg.ensure_valid().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn trace_frames<A: DecoderArithmetic>(
    cfg: &CodeConfig,
    s: &Settings,
    arith: A,
) -> Result<(), String> {
    let sigma2 = noise_sigma2(s.ebn0[0], cfg.rate());
    let mut fano = FanoDecoder::new(cfg, arith.clone()).map_err(|e| e.to_string())?;
    let mut pd = PolarDemapper::new(cfg.block_len, arith.clone());
    for frame in 0..s.frames {
        let (data, raw) = generate_frame(cfg, sigma2, s.noise_free, s.seed, frame);
        let llrs: Vec<A::Llr> = raw.iter().map(|&l| arith.input_llr(l)).collect();
        eprintln!("# frame {frame}");
        let summary = fano
            .decode_traced(&mut pd, &llrs, &mut |t| {
                let fmt_opt = |m: Option<A::Metric>| match m {
                    Some(m) => format!("{:+.2}", arith.metric_to_f64(m)),
                    None => "--".to_string(),
                };
                eprintln!(
                    "step={} depth={} rule={} T={:+.2} m23={} m1={} psi={} new={} cc={} pd={} fresh={}",
                    t.step,
                    t.depth,
                    t.rule,
                    arith.metric_to_f64(t.threshold),
                    fmt_opt(t.forward_metric),
                    fmt_opt(t.back_metric),
                    t.revisiting as u8,
                    t.new_node as u8,
                    t.cycles,
                    t.pd_activations,
                    t.fresh_metric as u8,
                );
            })
            .map_err(|e| e.to_string())?;
        let verdict = if summary.timed_out {
            "timeout"
        } else if fano.data_estimate() == data {
            "ok"
        } else {
            "error"
        };
        eprintln!(
            "# frame {frame}: {verdict} cycles={} (pd={} fcu={} bmu={})",
            summary.cycles, summary.pd_cycles, summary.fcu_cycles, summary.bmu_cycles
        );
    }
    Ok(())
}

fn run() -> Result<(), String> {
    let args = Args::parse();
    let s = resolve(args)?;
    let cfg = build_config(&s)?;

    if s.export_profile {
        let bias_bits: Vec<bool> = cfg.bias.iter().map(|&b| b == 1).collect();
        println!("n={} k={}", cfg.block_len, cfg.msg_len);
        println!("profile={}", mask_to_hex(&cfg.data_mask));
        println!("bias={}", mask_to_hex(&bias_bits));
        return Ok(());
    }

    if s.trace {
        if s.ebn0.len() > 1 || s.mc.len() > 1 {
            eprintln!("# trace mode uses the first ebn0/mc grid point only");
        }
        return if s.float_ref {
            trace_frames(&cfg, &s, ExactF64::new())
        } else {
            trace_frames(&cfg, &s, FixedMinSum::new(cfg.quant_bits, cfg.quant_scale))
        };
    }

    let base = PointParams {
        ebn0_db: s.ebn0[0],
        frames: s.frames,
        seed: s.seed,
        workers: s.workers,
        noise_free: s.noise_free,
        float_ref: s.float_ref,
    };
    let rows = sweep(&cfg, &base, &s.ebn0, &s.mc).map_err(|e| e.to_string())?;

    for r in &rows {
        let (lo, hi) = r.fer_interval(1.96);
        eprintln!(
            "# ebn0={} mc={} frames={} errors={} timeouts={} fer={:.3e} [{:.3e}, {:.3e}] acc={:.2}",
            r.ebn0_db,
            r.max_cycles,
            r.frames,
            r.frame_errors,
            r.timeouts,
            r.fer(),
            lo,
            hi,
            r.avg_cycles()
        );
    }

    match &s.out {
        Some(path) => append_csv_file(path, &rows, s.fclk_hz).map_err(|e| e.to_string()),
        None => {
            let stdout = std::io::stdout();
            write_csv(&mut stdout.lock(), &rows, s.fclk_hz, true).map_err(|e| e.to_string())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("pacsim: {msg}");
            ExitCode::FAILURE
        }
    }
}
