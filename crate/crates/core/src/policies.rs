//! Per-slot scheduling and drop policies.
//!
//! Minimizing the decision-dependent part of the drift-plus-penalty bound
//!
//! ```text
//! sum_i  -(zeta*Z_i + Q_i + Y_i) * S_i  +  (V*w_i - zeta*Z_i - Q_i) * D_i
//! ```
//!
//! splits into a max-weight allocation (the whole capacity to the flow with
//! the largest `zeta*Z + Q + Y`) and an independent threshold drop rule per
//! flow. [`oracle_min_drift`] solves the same problem by exhaustive search on
//! small instances and is what the closed forms are certified against.

use serde::{Deserialize, Serialize};

use crate::model::{ceil_snap, floor_snap, FlowConfig, PolicyKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("flow {0}: pi_hat and pi_static need this slot's arrival count")]
    MissingArrivalCount(u32),
    #[error("flow {0}: pi_bar needs drop_cap")]
    MissingDropCap(u32),
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
}

/// State of one present flow as seen by the policy at the start of a slot.
#[derive(Debug, Clone, Copy)]
pub struct FlowView<'a> {
    pub config: &'a FlowConfig,
    pub q: u64,
    pub y: f64,
    pub z: f64,
    /// Arrivals of the current slot, known before the decision.
    pub a_t: Option<u64>,
}

impl FlowView<'_> {
    /// Max-weight score `zeta*Z + Q + Y`.
    pub fn service_weight(&self) -> f64 {
        self.config.zeta * self.z + self.q as f64 + self.y
    }

    /// Coefficient of `D_i` in the drift bound, `V*w - zeta*Z - Q`.
    pub fn drop_coefficient(&self) -> f64 {
        self.config.threshold() - self.config.zeta * self.z - self.q as f64
    }
}

#[derive(Debug, Clone)]
pub struct PolicyInput<'a> {
    pub s_t: u64,
    pub flows: Vec<FlowView<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowDecision {
    pub id: u32,
    pub s_alloc: u64,
    pub d_drop: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub decisions: Vec<FlowDecision>,
}

impl PolicyOutput {
    pub fn total_allocated(&self) -> u64 {
        self.decisions.iter().map(|d| d.s_alloc).sum()
    }
}

/// Whether `Q + zeta*Z` strictly exceeds `V*w`.
pub fn over_threshold(q: u64, z: f64, config: &FlowConfig) -> bool {
    q as f64 + config.zeta * z > config.threshold()
}

/// Index of the flow receiving the whole capacity; ties go to the lowest id.
fn sra_winner(flows: &[FlowView<'_>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, f) in flows.iter().enumerate() {
        let w = f.service_weight();
        best = match best {
            None => Some((i, w)),
            Some((j, bw)) if w > bw || (w == bw && f.config.id < flows[j].config.id) => Some((i, w)),
            keep => keep,
        };
    }
    best.map(|(i, _)| i)
}

/// Max-weight service allocation: all of `S(t)` to the argmax flow.
pub fn sra_allocate(input: &PolicyInput<'_>) -> Vec<u64> {
    let mut alloc = vec![0; input.flows.len()];
    if let Some(i) = sra_winner(&input.flows) {
        alloc[i] = input.s_t;
    }
    alloc
}

/// Fixed-magnitude threshold drop: `D^max` when over threshold.
pub fn drop_pi_bar(q: u64, z: f64, config: &FlowConfig) -> Result<u64, PolicyError> {
    let cap = config.drop_cap.ok_or(PolicyError::MissingDropCap(config.id))?;
    Ok(if over_threshold(q, z, config) { cap } else { 0 })
}

/// Arrival-aware threshold drop: `max(A(t), ceil(alpha*S(t)))` when over threshold.
pub fn drop_pi_hat(q: u64, z: f64, a_t: u64, s_t: u64, config: &FlowConfig) -> u64 {
    if over_threshold(q, z, config) {
        a_t.max(ceil_snap(config.alpha * s_t as f64))
    } else {
        0
    }
}

/// Static isolating policy: each flow gets `floor(alpha*S(t))` and drops its
/// current arrivals whenever its own backlog exceeds `V*w`.
pub fn step_pi_static(input: &PolicyInput<'_>) -> Result<PolicyOutput, PolicyError> {
    let decisions = input
        .flows
        .iter()
        .map(|f| {
            let a = f.a_t.ok_or(PolicyError::MissingArrivalCount(f.config.id))?;
            let s_alloc = floor_snap(f.config.alpha * input.s_t as f64);
            let d_drop = if f.q as f64 > f.config.threshold() { a } else { 0 };
            Ok(FlowDecision {
                id: f.config.id,
                s_alloc,
                d_drop,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(PolicyOutput { decisions })
}

/// One slot's decisions under `kind`.
pub fn step_policy(kind: PolicyKind, input: &PolicyInput<'_>) -> Result<PolicyOutput, PolicyError> {
    if kind == PolicyKind::PiStatic {
        return step_pi_static(input);
    }
    let alloc = sra_allocate(input);
    let decisions = input
        .flows
        .iter()
        .zip(alloc)
        .map(|(f, s_alloc)| {
            let d_drop = match kind {
                PolicyKind::PiBar => drop_pi_bar(f.q, f.z, f.config)?,
                PolicyKind::PiHat => {
                    let a = f.a_t.ok_or(PolicyError::MissingArrivalCount(f.config.id))?;
                    drop_pi_hat(f.q, f.z, a, input.s_t, f.config)
                }
                PolicyKind::PiStatic => unreachable!(),
            };
            Ok(FlowDecision {
                id: f.config.id,
                s_alloc,
                d_drop,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(PolicyOutput { decisions })
}

/// Decision-dependent part of the drift-plus-penalty bound.
pub fn drift_objective(input: &PolicyInput<'_>, output: &PolicyOutput) -> f64 {
    input
        .flows
        .iter()
        .zip(&output.decisions)
        .map(|(f, d)| -f.service_weight() * d.s_alloc as f64 + f.drop_coefficient() * d.d_drop as f64)
        .sum()
}

pub const ORACLE_MAX_CAPACITY: u64 = 12;
pub const ORACLE_MAX_DROP: u64 = 6;
pub const ORACLE_MAX_FLOWS: usize = 3;

/// Exhaustive minimizer of [`drift_objective`] over every integer allocation
/// with `sum S_i <= S(t)` and every `D_i in 0..=d_max[i]`.
///
/// Returns the first minimizer in enumeration order and its objective.
pub fn oracle_min_drift(input: &PolicyInput<'_>, d_max: &[u64]) -> Result<(PolicyOutput, f64), PolicyError> {
    let n = input.flows.len();
    if n > ORACLE_MAX_FLOWS || input.s_t > ORACLE_MAX_CAPACITY || d_max.iter().any(|&d| d > ORACLE_MAX_DROP) {
        return Err(PolicyError::InstanceTooLarge(format!(
            "n={n}, S(t)={}, D^max={d_max:?}",
            input.s_t
        )));
    }
    assert_eq!(d_max.len(), n, "one drop cap per flow");

    let mut s = vec![0u64; n];
    let mut d = vec![0u64; n];
    let mut best: Option<(Vec<u64>, Vec<u64>, f64)> = None;
    loop {
        // Every drop vector for the current allocation.
        loop {
            let value: f64 = input
                .flows
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let w = f.config.zeta * f.z + f.q as f64 + f.y;
                    let c = f.config.v_param * f.config.weight - f.config.zeta * f.z - f.q as f64;
                    -w * s[i] as f64 + c * d[i] as f64
                })
                .sum();
            if best.as_ref().is_none_or(|b| value < b.2) {
                best = Some((s.clone(), d.clone(), value));
            }
            if !odometer(&mut d, |i| d_max[i]) {
                break;
            }
        }
        let budget = input.s_t;
        if !next_allocation(&mut s, budget) {
            break;
        }
    }
    let (s, d, value) = best.expect("at least the empty decision");
    let decisions = input
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| FlowDecision {
            id: f.config.id,
            s_alloc: s[i],
            d_drop: d[i],
        })
        .collect();
    Ok((PolicyOutput { decisions }, value))
}

/// Advances `digits` like an odometer with per-position maxima; false on wrap.
fn odometer(digits: &mut [u64], max: impl Fn(usize) -> u64) -> bool {
    for (i, digit) in digits.iter_mut().enumerate() {
        if *digit < max(i) {
            *digit += 1;
            return true;
        }
        *digit = 0;
    }
    false
}

/// Next vector with `sum <= budget` in odometer order; false on wrap.
fn next_allocation(s: &mut [u64], budget: u64) -> bool {
    for i in 0..s.len() {
        let used: u64 = s.iter().sum();
        if used < budget {
            s[i] += 1;
            return true;
        }
        s[i] = 0;
    }
    false
}
