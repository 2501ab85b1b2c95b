//! Fano sequential decoder over the polar demapper.
//!
//! The decoder walks the code tree one node per step. A step evaluates
//! exactly one of five move rules against the running threshold `T`
//! (always a non-positive multiple of the quantizer grid, relative to the
//! current node's metric):
//!
//! * rule 0: the examined forward branch satisfies its metric and leads to
//!   a node never visited before; move forward and tighten `T` by one
//!   threshold step when there is room.
//! * rule 1: forward branch satisfies, node seen before; move forward
//!   without tightening, so a re-walk cannot ratchet the threshold.
//! * rule 2: neither forward nor backward move is available; lower `T` by
//!   one step and re-examine from the most likely branch.
//! * rule 3: forward fails, backward is legal, and the node behind still
//!   has an untried sibling branch; step back and ask for it.
//! * rule 4: forward fails, backward is legal, no sibling remains; step
//!   back carrying the revisit flag, which suppresses examination (and so
//!   all demapper and metric-unit traffic) until rule 2 or 3 clears it.
//!
//! Backward legality is comparator-free: stepping back adds the metric of
//! the branch being retracted to `T`, and the move is legal exactly when
//! the updated threshold stays non-positive.
//!
//! Cycle accounting follows the modeled datapath: two control cycles per
//! rule evaluation, one stage-activation cycle per demapper stage rebuilt,
//! and one metric cycle per soft value computed fresh rather than served
//! from a store. A clean no-backtracking decode of an N-bit frame costs
//! `5N - 2` cycles.

use crate::arith::{BranchMetrics, DecoderArithmetic};
use crate::codecfg::{CodeConfig, FirstVisitRule, InvalidConfig};
use crate::demapper::{DemapError, PolarDemapper};
use std::cmp::Ordering;

/// The five Fano move rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Forward onto a fresh node, threshold tightened when possible.
    ForwardNew,
    /// Forward onto a previously visited node.
    ForwardOld,
    /// Stuck: lower the threshold in place.
    LowerThreshold,
    /// Back up and request the sibling branch.
    BackToLateral,
    /// Back up with examination suppressed.
    BackAgain,
}

impl Rule {
    pub fn id(self) -> u8 {
        match self {
            Rule::ForwardNew => 0,
            Rule::ForwardOld => 1,
            Rule::LowerThreshold => 2,
            Rule::BackToLateral => 3,
            Rule::BackAgain => 4,
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "R{}", self.id())
    }
}

/// Everything one rule evaluation looks at.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<M> {
    /// Revisit flag carried in from the previous step; suppresses the
    /// forward examination entirely.
    pub revisiting: bool,
    /// Metric of the examined forward branch, absent while revisiting.
    pub forward_metric: Option<M>,
    /// Whether the forward move opens new ground, making the node eligible
    /// for threshold tightening.
    pub forward_is_new: bool,
    /// Metric of the branch that led into the current node, absent at the
    /// root.
    pub back_metric: Option<M>,
    /// Whether the node behind has an untried sibling branch.
    pub lateral_exists: bool,
}

/// Rule selected by one evaluation, with the updated control state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult<M> {
    pub rule: Rule,
    pub threshold: M,
    pub revisiting: bool,
}

fn le<M: PartialOrd>(a: M, b: M) -> bool {
    matches!(a.partial_cmp(&b), Some(Ordering::Less | Ordering::Equal))
}

/// One rule evaluation: pure function of the inputs, the threshold and the
/// threshold step.
pub fn fano_step<A: DecoderArithmetic>(
    arith: &A,
    threshold: A::Metric,
    delta: A::Metric,
    inp: &StepInputs<A::Metric>,
) -> StepResult<A::Metric> {
    let zero = arith.metric_zero();
    let forward_ok = !inp.revisiting
        && match inp.forward_metric {
            Some(m) => le(threshold, m),
            None => false,
        };
    let back_ok = match inp.back_metric {
        Some(m) => le(arith.metric_add(m, threshold), zero),
        None => false,
    };

    if forward_ok {
        let m = inp.forward_metric.unwrap();
        let mut t = arith.metric_sub(threshold, m);
        if inp.forward_is_new {
            let tightened = arith.metric_add(t, delta);
            if le(tightened, zero) {
                t = tightened;
            }
            StepResult {
                rule: Rule::ForwardNew,
                threshold: t,
                revisiting: false,
            }
        } else {
            StepResult {
                rule: Rule::ForwardOld,
                threshold: t,
                revisiting: false,
            }
        }
    } else if !back_ok {
        StepResult {
            rule: Rule::LowerThreshold,
            threshold: arith.metric_sub(threshold, delta),
            revisiting: false,
        }
    } else {
        let t = arith.metric_add(threshold, inp.back_metric.unwrap());
        if inp.lateral_exists {
            StepResult {
                rule: Rule::BackToLateral,
                threshold: t,
                revisiting: false,
            }
        } else {
            StepResult {
                rule: Rule::BackAgain,
                threshold: t,
                revisiting: true,
            }
        }
    }
}

/// Cycle counts and outcome of one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeSummary {
    /// Total cycles: control + stage activations + fresh metrics.
    pub cycles: u64,
    /// Demapper stage activations.
    pub pd_cycles: u64,
    /// Control cycles (two per rule evaluation).
    pub fcu_cycles: u64,
    /// Fresh soft-value metric computations.
    pub bmu_cycles: u64,
    /// True when the cycle budget ran out before the path completed.
    pub timed_out: bool,
}

/// One decoder step as seen by a trace observer.
#[derive(Clone, Copy, Debug)]
pub struct TraceStep<M> {
    /// Rule evaluations so far, counting from 0.
    pub step: u64,
    /// Depth at evaluation time.
    pub depth: usize,
    pub rule: Rule,
    /// Threshold after the update.
    pub threshold: M,
    /// Examined forward branch metric, if an examination happened.
    pub forward_metric: Option<M>,
    /// Back branch metric, when the node has a parent.
    pub back_metric: Option<M>,
    /// Revisit flag at evaluation time.
    pub revisiting: bool,
    /// Whether the examined move targeted a fresh node.
    pub new_node: bool,
    /// Total cycles after this step.
    pub cycles: u64,
    /// Demapper stage activations incurred by this step.
    pub pd_activations: u32,
    /// Whether this step computed a soft value fresh.
    pub fresh_metric: bool,
}

/// Observer invoked once per traced rule evaluation.
type StepObserver<'a, M> = &'a mut dyn FnMut(&TraceStep<M>);

/// Sequential decoder instance; reusable across frames.
#[derive(Clone, Debug)]
pub struct FanoDecoder<A: DecoderArithmetic> {
    arith: A,
    n: usize,
    data_mask: Vec<bool>,
    bias: Vec<u8>,
    taps: Vec<u8>,
    delta: A::Metric,
    max_cycles: u64,
    first_visit: FirstVisitRule,
    // Per-frame search state, kept allocated between frames.
    vpath: Vec<u8>,
    upath: Vec<u8>,
    took_most_likely: Vec<bool>,
    /// Bit `v` set: child via branch `v` at this level has been committed.
    visited: Vec<u8>,
    z_ok: Vec<bool>,
    z_val: Vec<A::Llr>,
}

impl<A: DecoderArithmetic> FanoDecoder<A> {
    pub fn new(cfg: &CodeConfig, arith: A) -> Result<Self, InvalidConfig> {
        cfg.ensure_valid()?;
        let n = cfg.block_len;
        let delta = arith.metric_from_f64(cfg.delta);
        Ok(FanoDecoder {
            n,
            data_mask: cfg.data_mask.clone(),
            bias: cfg.bias.clone(),
            taps: cfg.gen_poly.clone(),
            delta,
            max_cycles: cfg.max_cycles,
            first_visit: cfg.first_visit,
            vpath: vec![0; n],
            upath: vec![0; n],
            took_most_likely: vec![false; n],
            visited: vec![0; n],
            z_ok: vec![false; n],
            z_val: vec![A::Llr::default(); n],
            arith,
        })
    }

    pub fn block_len(&self) -> usize {
        self.n
    }

    /// Convolution input sequence chosen by the last decode.
    pub fn path(&self) -> &[u8] {
        &self.vpath
    }

    /// Message estimate: the path bits at the data positions.
    pub fn data_estimate(&self) -> Vec<u8> {
        (0..self.n)
            .filter(|&i| self.data_mask[i])
            .map(|i| self.vpath[i])
            .collect()
    }

    /// Convolution of the committed past with a zero candidate bit at `i`.
    fn conv_tail(&self, i: usize) -> u8 {
        let mut acc = 0u8;
        for (j, &c) in self.taps.iter().enumerate().skip(1) {
            if j > i {
                break;
            }
            acc ^= c & self.vpath[i - j];
        }
        acc
    }

    pub fn decode(
        &mut self,
        pd: &mut PolarDemapper<A>,
        llrs: &[A::Llr],
    ) -> Result<DecodeSummary, DemapError> {
        self.decode_inner(pd, llrs, None)
    }

    /// Decode while reporting every rule evaluation to `on_step`.
    pub fn decode_traced(
        &mut self,
        pd: &mut PolarDemapper<A>,
        llrs: &[A::Llr],
        on_step: &mut dyn FnMut(&TraceStep<A::Metric>),
    ) -> Result<DecodeSummary, DemapError> {
        self.decode_inner(pd, llrs, Some(on_step))
    }

    fn decode_inner(
        &mut self,
        pd: &mut PolarDemapper<A>,
        llrs: &[A::Llr],
        mut on_step: Option<StepObserver<'_, A::Metric>>,
    ) -> Result<DecodeSummary, DemapError> {
        assert_eq!(pd.block_len(), self.n, "demapper block length mismatch");
        pd.reset(llrs)?;
        self.vpath.fill(0);
        self.upath.fill(0);
        self.took_most_likely.fill(false);
        self.visited.fill(0);
        self.z_ok.fill(false);

        let zero = self.arith.metric_zero();
        let mut threshold = zero;
        let mut revisiting = false;
        let mut want_least = false;
        let mut depth = 0usize;
        let mut pd_cc = 0u64;
        let mut fcu_cc = 0u64;
        let mut bmu_cc = 0u64;
        let mut step = 0u64;
        let mut timed_out = false;

        loop {
            if depth == self.n {
                break;
            }
            if pd_cc + fcu_cc + bmu_cc >= self.max_cycles {
                timed_out = true;
                break;
            }

            let mut step_pd = 0u32;
            let mut fresh_metric = false;
            let mut cand: Option<(u8, u8)> = None;
            let mut forward_metric = None;
            let mut forward_is_new = false;

            if !revisiting {
                let z = if self.z_ok[depth] {
                    self.z_val[depth]
                } else {
                    let out = pd.demap(depth, &self.upath[..depth]);
                    step_pd = out.stage_activations;
                    pd_cc += out.stage_activations as u64;
                    if !out.cached {
                        bmu_cc += 1;
                        fresh_metric = true;
                    }
                    self.z_val[depth] = out.llr;
                    self.z_ok[depth] = true;
                    out.llr
                };
                let pair: BranchMetrics<A::Metric> = self.arith.branch_metrics(z, self.bias[depth]);
                let u0 = self.conv_tail(depth);
                let (v, u) = if self.data_mask[depth] {
                    let likely = self.arith.hard_sign(z);
                    let u = if want_least { likely ^ 1 } else { likely };
                    (u ^ u0, u)
                } else {
                    (0, u0)
                };
                cand = Some((v, u));
                forward_metric = Some(pair.of(u));
                // Visit marks stick for the whole frame. Clearing them when
                // the path changes would let every re-walk of explored
                // ground tighten T again, handing back the threshold drops
                // that R2 paid for and stalling the search; keeping them
                // sticky caps tightening at one step per (level, branch).
                forward_is_new = match self.first_visit {
                    FirstVisitRule::Marks => self.visited[depth] & (1 << v) == 0,
                    FirstVisitRule::ThresholdTest => {
                        !le(self.arith.metric_add(threshold, self.delta), zero)
                    }
                };
            }

            let back_metric = if depth > 0 {
                let pair = self
                    .arith
                    .branch_metrics(self.z_val[depth - 1], self.bias[depth - 1]);
                Some(pair.of(self.upath[depth - 1]))
            } else {
                None
            };
            let lateral_exists =
                depth > 0 && self.data_mask[depth - 1] && self.took_most_likely[depth - 1];

            fcu_cc += 2;
            let res = fano_step(
                &self.arith,
                threshold,
                self.delta,
                &StepInputs {
                    revisiting,
                    forward_metric,
                    forward_is_new,
                    back_metric,
                    lateral_exists,
                },
            );
            debug_assert!(
                le(res.threshold, zero),
                "threshold must stay non-positive, got {:?} after {:?}",
                res.threshold,
                res.rule
            );

            if let Some(cb) = on_step.as_deref_mut() {
                cb(&TraceStep {
                    step,
                    depth,
                    rule: res.rule,
                    threshold: res.threshold,
                    forward_metric,
                    back_metric,
                    revisiting,
                    new_node: forward_is_new,
                    cycles: pd_cc + fcu_cc + bmu_cc,
                    pd_activations: step_pd,
                    fresh_metric,
                });
            }
            step += 1;
            threshold = res.threshold;
            revisiting = res.revisiting;

            match res.rule {
                Rule::ForwardNew | Rule::ForwardOld => {
                    let (v, u) = cand.expect("forward rule without an examination");
                    // A changed path bit invalidates every z above this
                    // level, including the one probed past the deepest
                    // commit by a failed forward examination.
                    if self.vpath[depth] != v {
                        for k in depth + 1..self.n {
                            self.z_ok[k] = false;
                        }
                    }
                    self.vpath[depth] = v;
                    self.upath[depth] = u;
                    self.took_most_likely[depth] = !self.data_mask[depth] || !want_least;
                    self.visited[depth] |= 1 << v;
                    depth += 1;
                    want_least = false;
                }
                Rule::LowerThreshold => {
                    want_least = false;
                }
                Rule::BackToLateral => {
                    depth -= 1;
                    want_least = true;
                }
                Rule::BackAgain => {
                    depth -= 1;
                }
            }
        }

        if timed_out {
            for slot in self.vpath.iter_mut().skip(depth) {
                *slot = 0;
            }
        }
        Ok(DecodeSummary {
            cycles: pd_cc + fcu_cc + bmu_cc,
            pd_cycles: pd_cc,
            fcu_cycles: fcu_cc,
            bmu_cycles: bmu_cc,
            timed_out,
        })
    }
}
