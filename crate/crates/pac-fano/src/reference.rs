//! Slow, independent reference implementations for differential testing.
//!
//! Everything in this module trades speed for obviousness: encoders as
//! dense GF(2) matrices, demapping as a from-scratch recursion, and a
//! sequential decoder written as a direct transliteration of the move
//! rules with no caching, no cost model, and unclamped `f64` threshold
//! arithmetic. Test suites diff the production pipeline against these.

use crate::arith::DecoderArithmetic;
use crate::codecfg::{CodeConfig, FirstVisitRule};
use crate::encoder::polar_transform;
use crate::fano::Rule;

/// Dense Toeplitz matrix of the rate-1 convolution: `M[i][j] = c[j - i]`.
pub fn conv_matrix(taps: &[u8], n: usize) -> Vec<Vec<u8>> {
    let mut m = vec![vec![0u8; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if j >= i && j - i < taps.len() {
                *cell = taps[j - i];
            }
        }
    }
    m
}

/// Dense polar transform matrix, built by iterated Kronecker products.
pub fn polar_matrix(n: usize) -> Vec<Vec<u8>> {
    assert!(n.is_power_of_two());
    let mut m = vec![vec![1u8]];
    while m.len() < n {
        let k = m.len();
        let mut next = vec![vec![0u8; 2 * k]; 2 * k];
        for i in 0..2 * k {
            for j in 0..2 * k {
                // Kernel [1 0; 1 1] expanded over blocks.
                let kernel = match (i / k, j / k) {
                    (0, 1) => 0,
                    _ => 1,
                };
                next[i][j] = kernel & m[i % k][j % k];
            }
        }
        m = next;
    }
    m
}

/// Row vector times matrix over GF(2).
pub fn gf2_vec_mat(v: &[u8], m: &[Vec<u8>]) -> Vec<u8> {
    assert_eq!(v.len(), m.len());
    let cols = m[0].len();
    let mut out = vec![0u8; cols];
    for (i, &vi) in v.iter().enumerate() {
        if vi == 1 {
            for (o, &cell) in out.iter_mut().zip(&m[i]) {
                *o ^= cell;
            }
        }
    }
    out
}

/// Soft output for position `prefix.len()` computed from scratch by the
/// textbook successive-cancellation recursion. No caching, no state; this
/// is the oracle the demapper's cached tree is checked against.
pub fn sc_llr<A: DecoderArithmetic>(arith: &A, llrs: &[A::Llr], prefix: &[u8]) -> A::Llr {
    let n = llrs.len();
    assert!(n.is_power_of_two());
    assert!(prefix.len() < n);
    if n == 1 {
        return llrs[0];
    }
    let half = n / 2;
    if prefix.len() < half {
        let upper: Vec<A::Llr> = (0..half)
            .map(|j| arith.check_node(llrs[j], llrs[j + half]))
            .collect();
        sc_llr(arith, &upper, prefix)
    } else {
        let psum = polar_transform(&prefix[..half]);
        let lower: Vec<A::Llr> = (0..half)
            .map(|j| arith.var_node(llrs[j], llrs[j + half], psum[j]))
            .collect();
        sc_llr(arith, &lower, &prefix[half..])
    }
}

/// All N soft outputs under a known (genie) input word `u`, recursively.
/// Used by the Monte-Carlo bit-channel estimator and by decoder tests.
pub fn genie_llr_stream<A: DecoderArithmetic>(arith: &A, llrs: &[A::Llr], u: &[u8]) -> Vec<A::Llr> {
    let mut out = Vec::with_capacity(llrs.len());
    genie_rec(arith, llrs, u, &mut out);
    out
}

fn genie_rec<A: DecoderArithmetic>(arith: &A, llrs: &[A::Llr], u: &[u8], out: &mut Vec<A::Llr>) {
    let n = llrs.len();
    if n == 1 {
        out.push(llrs[0]);
        return;
    }
    let half = n / 2;
    let upper: Vec<A::Llr> = (0..half)
        .map(|j| arith.check_node(llrs[j], llrs[j + half]))
        .collect();
    genie_rec(arith, &upper, &u[..half], out);
    let psum = polar_transform(&u[..half]);
    let lower: Vec<A::Llr> = (0..half)
        .map(|j| arith.var_node(llrs[j], llrs[j + half], psum[j]))
        .collect();
    genie_rec(arith, &lower, &u[half..], out);
}

/// One rule firing of the reference decoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefStep {
    pub depth: usize,
    pub rule: Rule,
    /// Threshold after the update, in real metric units.
    pub threshold: f64,
    pub back_check: bool,
}

/// Outcome of a reference decode.
pub struct RefDecode {
    pub path: Vec<u8>,
    pub trace: Vec<RefStep>,
    pub finished: bool,
}

/// Plain software Fano decoder: recomputes every soft value from scratch,
/// spells each rule's conditions out independently and checks that exactly
/// one rule applies per step, and accumulates the threshold in unclamped
/// `f64`. Branch metrics still come from `arith`, so a quantized datapath
/// is compared on its own metric values.
pub fn reference_fano<A: DecoderArithmetic>(
    arith: &A,
    cfg: &CodeConfig,
    llrs: &[A::Llr],
    max_steps: u64,
) -> RefDecode {
    let n = cfg.block_len;
    let delta = cfg.delta;
    let mut threshold = 0.0f64;
    let mut depth = 0usize;
    let mut back_check = false;
    let mut want_least = false;
    let mut vpath = vec![0u8; n];
    let mut upath = vec![0u8; n];
    let mut took_most_likely = vec![false; n];
    let mut visited = vec![[false; 2]; n];
    let mut trace = Vec::new();

    let conv_zero = |vp: &[u8], i: usize| -> u8 {
        let mut acc = 0u8;
        for (j, &c) in cfg.gen_poly.iter().enumerate().skip(1) {
            if j <= i {
                acc ^= c & vp[i - j];
            }
        }
        acc
    };

    for _ in 0..max_steps {
        if depth == n {
            return RefDecode {
                path: vpath,
                trace,
                finished: true,
            };
        }

        // Examination: metric of the requested child, unless this step is
        // a backward check.
        let mut cand = None;
        let m23 = if back_check {
            None
        } else {
            let z = sc_llr(arith, llrs, &upath[..depth]);
            let pair = arith.branch_metrics(z, cfg.bias[depth]);
            let u0 = conv_zero(&vpath, depth);
            let (v, u) = if cfg.data_mask[depth] {
                let likely = arith.hard_sign(z);
                let u = if want_least { likely ^ 1 } else { likely };
                (u ^ u0, u)
            } else {
                (0, u0)
            };
            cand = Some((v, u));
            Some(arith.metric_to_f64(pair.of(u)))
        };
        let m1 = if depth > 0 {
            let z = sc_llr(arith, llrs, &upath[..depth - 1]);
            let pair = arith.branch_metrics(z, cfg.bias[depth - 1]);
            Some(arith.metric_to_f64(pair.of(upath[depth - 1])))
        } else {
            None
        };

        // Each rule's conditions, written out in full. In the default
        // mode, visit marks are sticky for the whole frame so that
        // re-walked stretches never tighten T a second time; the
        // alternative infers novelty from the threshold alone.
        let is_new = match cfg.first_visit {
            FirstVisitRule::Marks => cand.is_some_and(|(v, _)| !visited[depth][v as usize]),
            FirstVisitRule::ThresholdTest => threshold + delta > 0.0,
        };
        let forward_ok = !back_check && m23.unwrap() >= threshold;
        let back_ok = m1.is_some_and(|m| m + threshold <= 0.0);
        let lateral_exists = depth > 0 && cfg.data_mask[depth - 1] && took_most_likely[depth - 1];

        let r0 = forward_ok && is_new;
        let r1 = forward_ok && !is_new;
        let r2 = !forward_ok && !back_ok;
        let r3 = !forward_ok && back_ok && lateral_exists;
        let r4 = !forward_ok && back_ok && !lateral_exists;
        assert_eq!(
            [r0, r1, r2, r3, r4].iter().filter(|&&r| r).count(),
            1,
            "rules must be total and mutually exclusive"
        );

        let rule = if r0 {
            let m = m23.unwrap();
            let mut t = threshold - m;
            if t + delta <= 0.0 {
                t += delta;
            }
            threshold = t;
            Rule::ForwardNew
        } else if r1 {
            threshold -= m23.unwrap();
            Rule::ForwardOld
        } else if r2 {
            threshold -= delta;
            Rule::LowerThreshold
        } else if r3 {
            threshold += m1.unwrap();
            Rule::BackToLateral
        } else {
            threshold += m1.unwrap();
            Rule::BackAgain
        };
        trace.push(RefStep {
            depth,
            rule,
            threshold,
            back_check,
        });

        match rule {
            Rule::ForwardNew | Rule::ForwardOld => {
                let (v, u) = cand.unwrap();
                vpath[depth] = v;
                upath[depth] = u;
                took_most_likely[depth] = !cfg.data_mask[depth] || !want_least;
                visited[depth][v as usize] = true;
                depth += 1;
                want_least = false;
                back_check = false;
            }
            Rule::LowerThreshold => {
                back_check = false;
                want_least = false;
            }
            Rule::BackToLateral => {
                depth -= 1;
                want_least = true;
                back_check = false;
            }
            Rule::BackAgain => {
                depth -= 1;
                back_check = true;
            }
        }
    }
    for slot in vpath.iter_mut().skip(depth) {
        *slot = 0;
    }
    RefDecode {
        path: vpath,
        trace,
        finished: false,
    }
}
