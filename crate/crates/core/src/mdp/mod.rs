//! The slicing problem as an MDP: state vectors, decoding of continuous
//! actions into feasible allocations, and the SLA-based reward.

mod apportion;
mod slicing;

pub use apportion::largest_remainder;
pub use slicing::SlicingMdp;

use crate::env::{Allocation, EnvConfig, QosReport, SliceSpec};
use crate::error::{check_dim, Result};

/// Agent observation: normalised slice QoS, normalised slice populations and
/// the previous action.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec(pub Vec<f64>);

/// Raw agent output: `L` slice-share components followed by `N` UE weights,
/// each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVec(pub Vec<f64>);

impl ActionVec {
    /// The action assumed before the first decision.
    pub fn uniform(dim: usize) -> Self {
        ActionVec(vec![0.5; dim])
    }
}

/// One step of experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
}

/// Result of an environment step, in MDP terms.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Per-slice QoS of the step (empty for environments without slices).
    pub qos: Vec<f64>,
    /// Per-UE throughput of the step (empty for environments without users).
    pub throughput: Vec<f64>,
}

/// Episodic, seedable environment as seen by learners.
pub trait Environment: Send {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts a new episode whose randomness is fully determined by `seed`.
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;
}

pub fn action_dim(cfg: &EnvConfig) -> usize {
    cfg.num_slices() + cfg.num_ues()
}

pub fn state_dim(cfg: &EnvConfig) -> usize {
    2 * cfg.num_slices() + action_dim(cfg)
}

fn to_signed_unit(x: f64) -> f64 {
    2.0 * x.clamp(0.0, 1.0) - 1.0
}

/// Encodes a step report into the agent's state vector.
///
/// QoS maps through `clamp(Q / 2 lambda, 0, 1)` and UE counts through
/// `N_l / N`, both rescaled to `[-1, 1]`; the previous action is appended
/// unchanged.
pub fn encode_state(report: &QosReport, slices: &[SliceSpec], prev_action: &ActionVec) -> Result<StateVec> {
    check_dim("report qos", slices.len(), report.qos.len())?;
    let total_ues: usize = slices.iter().map(|s| s.num_ues).sum();
    check_dim("previous action", slices.len() + total_ues, prev_action.0.len())?;
    let mut v = Vec::with_capacity(2 * slices.len() + prev_action.0.len());
    for (s, &q) in slices.iter().zip(&report.qos) {
        let q = if q.is_finite() { q } else { 0.0 };
        v.push(to_signed_unit(q / (2.0 * s.qos_threshold)));
    }
    for s in slices {
        v.push(to_signed_unit(s.num_ues as f64 / total_ues as f64));
    }
    v.extend(prev_action.0.iter().map(|&a| if a.is_finite() { a.clamp(0.0, 1.0) } else { 0.0 }));
    Ok(StateVec(v))
}

/// Decodes a continuous action into a feasible allocation.
///
/// Slice shares are apportioned over the `K` RBs by largest remainder, giving
/// each slice a contiguous block; inside a block the slice's UE weights are
/// apportioned the same way. Out-of-range components are clamped to
/// `[0, 1]` and non-finite ones read as zero.
pub fn decode_action(action: &ActionVec, cfg: &EnvConfig) -> Result<Allocation> {
    let num_slices = cfg.num_slices();
    let num_ues = cfg.num_ues();
    let k_total = cfg.cell.num_rbs;
    check_dim("action", num_slices + num_ues, action.0.len())?;
    let clean: Vec<f64> = action
        .0
        .iter()
        .map(|&a| if a.is_finite() { a.clamp(0.0, 1.0) } else { 0.0 })
        .collect();

    let slice_counts = largest_remainder(&clean[..num_slices], k_total);
    let mut rb_slice = vec![None; k_total];
    let mut rb_ue = vec![None; k_total];
    let mut next_rb = 0;
    let mut first_ue = 0;
    for (l, (spec, &count)) in cfg.slices.iter().zip(&slice_counts).enumerate() {
        let ue_weights = &clean[num_slices + first_ue..num_slices + first_ue + spec.num_ues];
        let ue_counts = largest_remainder(ue_weights, count);
        for (offset, &c) in ue_counts.iter().enumerate() {
            for _ in 0..c {
                rb_slice[next_rb] = Some(l);
                rb_ue[next_rb] = Some(first_ue + offset);
                next_rb += 1;
            }
        }
        first_ue += spec.num_ues;
    }
    Allocation::from_owners(num_slices, num_ues, &rb_slice, &rb_ue)
}

/// Sum over slices of the probability of meeting the SLA.
pub fn reward(report: &QosReport) -> f64 {
    report.violation_prob.iter().map(|p| 1.0 - p).sum()
}

/// `sum_i gamma^i r_i`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}
