//! The slotted simulation loop.
//!
//! Each slot runs the same pipeline:
//!
//! 1. draw the capacity `S(t)`;
//! 2. draw each present flow's arrivals `A_i(t)` (closed-loop sources first
//!    apply the feedback that has reached them);
//! 3. ask the policy for `(S_i(t), D_i(t))` from `(Q, Y, Z, A, S)`;
//! 4. serve `min(Q_i, S_i)` packets from the head of the queue;
//! 5. drop `min(Q_i - served, D_i)` packets per the drop discipline;
//! 6. append this slot's arrivals at the tail;
//! 7. update `Y` and `Z` with the decided `S_i`, `D_i`;
//! 8. send `(served, nacks)` back to closed-loop sources;
//! 9. record metrics and check the queue and delay bounds.
//!
//! Arrivals enter after service, so the smallest possible wait is one slot.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arrivals::{sample_bursty, sample_poisson, stream_rng, AimdSourceState, SimRng};
use crate::bounds::{self, BoundSet};
use crate::error::{Error, Result};
use crate::model::{
    validate_scenario, ChannelKind, ChannelModel, DropDiscipline, FlowConfig, NackMode, PolicyKind, ScenarioSpec,
    SourceSpec,
};
use crate::policies::{step_policy, FlowView, PolicyInput};

pub const SCHEMA_VERSION: u32 = 1;

/// Cap on the number of violations kept verbatim in a report.
const VIOLATION_LOG_LIMIT: usize = 1000;

/// Packets that arrived in the same slot, kept together in FIFO order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketBatch {
    pub arrival_slot: u64,
    pub count: u64,
}

/// Mutable state of a present flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    queue: VecDeque<PacketBatch>,
    q_len: u64,
    pub y: f64,
    pub z: f64,
    pub aimd: Option<AimdSourceState>,
}

impl FlowState {
    fn new(config: &FlowConfig, feedback_delay: u64) -> Self {
        FlowState {
            queue: VecDeque::new(),
            q_len: 0,
            y: 0.0,
            z: 0.0,
            aimd: config.source.is_closed_loop().then(|| AimdSourceState::new(feedback_delay)),
        }
    }

    pub fn queue_len(&self) -> u64 {
        self.q_len
    }

    pub fn batches(&self) -> impl Iterator<Item = &PacketBatch> {
        self.queue.iter()
    }

    /// Appends `count` packets stamped with `slot`.
    pub fn enqueue(&mut self, slot: u64, count: u64) {
        if count == 0 {
            return;
        }
        match self.queue.back_mut() {
            Some(b) if b.arrival_slot == slot => b.count += count,
            _ => self.queue.push_back(PacketBatch { arrival_slot: slot, count }),
        }
        self.q_len += count;
    }

    /// Removes up to `n` packets from the head, returning what was removed.
    pub fn take_head(&mut self, mut n: u64) -> Vec<PacketBatch> {
        let mut out = Vec::new();
        while n > 0 {
            let Some(front) = self.queue.front_mut() else { break };
            let k = front.count.min(n);
            out.push(PacketBatch { arrival_slot: front.arrival_slot, count: k });
            front.count -= k;
            if front.count == 0 {
                self.queue.pop_front();
            }
            n -= k;
            self.q_len -= k;
        }
        out
    }

    /// Removes up to `n` packets from the tail.
    pub fn take_tail(&mut self, mut n: u64) -> u64 {
        let mut taken = 0;
        while n > 0 {
            let Some(back) = self.queue.back_mut() else { break };
            let k = back.count.min(n);
            back.count -= k;
            if back.count == 0 {
                self.queue.pop_back();
            }
            n -= k;
            taken += k;
            self.q_len -= k;
        }
        taken
    }

    fn clear_queue(&mut self) -> u64 {
        let n = self.q_len;
        self.queue.clear();
        self.q_len = 0;
        n
    }
}

/// `Q' = Q - served - dropped + A` with realized quantities.
pub fn update_data_queue(q: u64, served_actual: u64, dropped_actual: u64, a_t: u64) -> u64 {
    q - served_actual - dropped_actual + a_t
}

/// `Y' = [Y + alpha*S(t) - S_i(t)]^+`.
pub fn update_virtual_queue(y: f64, alpha: f64, s_t: u64, s_i: u64) -> f64 {
    (y + alpha * s_t as f64 - s_i as f64).max(0.0)
}

/// `Z' = [Z + zeta*(alpha*S(t)*I - S_i(t) - D_i(t))]^+`, where `I` says whether
/// the data queue was nonempty when the decision was taken.
pub fn update_persistent_queue(z: f64, zeta: f64, alpha: f64, s_t: u64, backlogged: bool, s_i: u64, d_i: u64) -> f64 {
    let inflow = if backlogged { alpha * s_t as f64 } else { 0.0 };
    (z + zeta * (inflow - s_i as f64 - d_i as f64)).max(0.0)
}

/// Wait times of served packets, in slots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaitStats {
    pub packets: u64,
    pub total: u64,
    pub max: u64,
    histogram: Vec<u64>,
}

impl WaitStats {
    pub fn record(&mut self, wait: u64, count: u64) {
        if count == 0 {
            return;
        }
        self.packets += count;
        self.total += wait * count;
        self.max = self.max.max(wait);
        let idx = wait as usize;
        if self.histogram.len() <= idx {
            self.histogram.resize(idx + 1, 0);
        }
        self.histogram[idx] += count;
    }

    pub fn mean(&self) -> f64 {
        if self.packets == 0 {
            0.0
        } else {
            self.total as f64 / self.packets as f64
        }
    }

    /// Nonzero `(wait, packets)` pairs in increasing wait order.
    pub fn histogram(&self) -> Vec<(u64, u64)> {
        self.histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(w, &c)| (w as u64, c))
            .collect()
    }

    pub fn summary(&self) -> WaitSummary {
        WaitSummary {
            served_packets: self.packets,
            mean: self.mean(),
            max: self.max,
            histogram: self.histogram(),
        }
    }
}

/// Records `t - arrival_slot` for every served packet and returns the largest wait.
pub fn record_wait_times(stats: &mut WaitStats, served: &[PacketBatch], t: u64) -> Option<u64> {
    let mut worst = None;
    for b in served {
        let wait = t - b.arrival_slot;
        stats.record(wait, b.count);
        worst = worst.max(Some(wait));
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub id: u32,
    pub a_t: u64,
    pub s_alloc: u64,
    pub d_drop: u64,
    pub served_actual: u64,
    pub dropped_actual: u64,
    pub q_before: u64,
    pub q_after: u64,
    pub y_after: f64,
    pub z_after: f64,
    /// AIMD mean used for this slot's draw (closed-loop flows only).
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub t: u64,
    pub s_t: u64,
    pub flows: Vec<FlowTrace>,
}

/// Destination for per-slot traces.
pub trait TraceSink {
    fn record(&mut self, trace: &SlotTrace) -> Result<()>;
}

impl TraceSink for Vec<SlotTrace> {
    fn record(&mut self, trace: &SlotTrace) -> Result<()> {
        self.push(trace.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    QueueBound,
    PersistentBound,
    CombinedBound,
    VirtualBound,
    PersistentNonzero,
    DelayBound,
    Conservation,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::QueueBound => "queue_bound",
            ViolationKind::PersistentBound => "persistent_bound",
            ViolationKind::CombinedBound => "combined_bound",
            ViolationKind::VirtualBound => "virtual_bound",
            ViolationKind::PersistentNonzero => "persistent_zero",
            ViolationKind::DelayBound => "delay_bound",
            ViolationKind::Conservation => "conservation",
        }
    }

    pub const ALL: [ViolationKind; 7] = [
        ViolationKind::QueueBound,
        ViolationKind::PersistentBound,
        ViolationKind::CombinedBound,
        ViolationKind::VirtualBound,
        ViolationKind::PersistentNonzero,
        ViolationKind::DelayBound,
        ViolationKind::Conservation,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub slot: u64,
    pub flow: u32,
    pub kind: ViolationKind,
    pub observed: f64,
    pub bound: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "slot {} flow {}: {} observed {} > bound {}",
            self.slot,
            self.flow,
            self.kind.as_str(),
            self.observed,
            self.bound
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub flow: u32,
    pub status: CheckStatus,
    /// Largest value observed over the run.
    pub observed_max: Option<f64>,
    pub bound: Option<f64>,
    pub violations: u64,
}

/// Which bounds are checked for one flow, with their values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowLimits {
    pub q: Option<f64>,
    pub z: Option<f64>,
    pub qz: Option<f64>,
    pub y: Option<f64>,
    pub z_zero: bool,
    pub delay: Option<f64>,
}

impl FlowLimits {
    fn limit(&self, kind: ViolationKind) -> Option<f64> {
        match kind {
            ViolationKind::QueueBound => self.q,
            ViolationKind::PersistentBound => self.z,
            ViolationKind::CombinedBound => self.qz,
            ViolationKind::VirtualBound => self.y,
            ViolationKind::PersistentNonzero => self.z_zero.then_some(0.0),
            ViolationKind::DelayBound => self.delay,
            ViolationKind::Conservation => Some(0.0),
        }
    }
}

/// Bounds that apply to `config` under `spec`'s policy, channel and drop discipline.
pub fn flow_limits(spec: &ScenarioSpec, config: &FlowConfig) -> FlowLimits {
    let s_max = spec.channel.s_max;
    let s_min = spec.channel.floor();
    let n = spec.flows.len();
    let a_max = config.effective_a_max();
    let max_a = spec
        .flows
        .iter()
        .map(|f| f.effective_a_max())
        .try_fold(0u64, |m, a| a.map(|a| m.max(a)));
    let (v, w, zeta, alpha) = (config.v_param, config.weight, config.zeta, config.alpha);
    let fifo_exact = spec.drop_discipline == DropDiscipline::Head && s_min > 0;
    match spec.policy {
        PolicyKind::PiBar | PolicyKind::PiHat => {
            let max_v = spec.flows.iter().map(|f| f.v_param).fold(0.0, f64::max);
            let max_zeta = spec.flows.iter().map(|f| f.zeta).fold(0.0, f64::max);
            FlowLimits {
                q: a_max.map(|a| bounds::q_bound(v, w, a)),
                z: Some(bounds::z_bound(v, w, zeta, alpha, s_max)),
                qz: a_max.map(|a| bounds::qz_bound(v, w, zeta, alpha, s_max, a)),
                y: max_a.map(|m| bounds::y_bound(n, max_v, max_zeta, s_max, m)),
                z_zero: false,
                delay: match (spec.policy, a_max) {
                    (PolicyKind::PiHat, Some(a)) if fifo_exact => bounds::delay_bound_pi_hat(config, s_max, s_min, a).ok(),
                    _ => None,
                },
            }
        }
        PolicyKind::PiStatic => FlowLimits {
            q: a_max.map(|a| bounds::q_bound(v, w, a)),
            z: None,
            qz: None,
            y: None,
            z_zero: true,
            delay: match a_max {
                Some(a) if fifo_exact => bounds::delay_bound_pi_static(config, s_min, a).ok(),
                _ => None,
            },
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitSummary {
    pub served_packets: u64,
    pub mean: f64,
    pub max: u64,
    pub histogram: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochFlowMetrics {
    pub id: u32,
    pub slots: u64,
    pub arrival_rate: f64,
    pub allocated_rate: f64,
    pub served_rate: f64,
    pub drop_decision_rate: f64,
    pub weighted_drop_decision_rate: f64,
    pub actual_drop_rate: f64,
    pub weighted_actual_drop_rate: f64,
    pub queue_mean: f64,
    pub queue_std: f64,
    pub wait: WaitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub index: usize,
    pub start: u64,
    /// Last slot of the epoch, inclusive.
    pub end: u64,
    pub capacity_mean: f64,
    pub flows: Vec<EpochFlowMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub id: u32,
    pub slots_present: u64,
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    pub drop_decisions: u64,
    pub abandoned: u64,
    pub final_queue: u64,
    pub arrival_rate: f64,
    pub served_rate: f64,
    pub drop_decision_rate: f64,
    pub weighted_drop_decision_rate: f64,
    pub actual_drop_rate: f64,
    pub weighted_actual_drop_rate: f64,
    /// Mean capacity over the slots this flow was present.
    pub capacity_mean: f64,
    pub queue_mean: f64,
    pub queue_std: f64,
    pub y_final: f64,
    /// `Y` at the flow's last present slot divided by its number of present slots.
    pub y_terminal_ratio: f64,
    pub z_final: f64,
    pub wait: WaitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowBoundEntry {
    pub flow: u32,
    /// Full bound set; `None` when the flow's arrival ceiling is unknown.
    pub bounds: Option<BoundSet>,
    pub checked: FlowLimits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub seed: u64,
    pub feedback_delay: u64,
    pub capacity_mean: f64,
    /// Sum over flows of `w_i * D_i(t)`, averaged over the horizon.
    pub weighted_drop_decision_rate: f64,
    pub weighted_actual_drop_rate: f64,
    pub flows: Vec<FlowSummary>,
    pub epochs: Vec<EpochReport>,
    pub theoretical_bounds: Vec<FlowBoundEntry>,
    pub checks: Vec<CheckResult>,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
}

impl MetricsReport {
    pub fn flow(&self, id: u32) -> Option<&FlowSummary> {
        self.flows.iter().find(|f| f.id == id)
    }

    pub fn check(&self, name: &str, flow: u32) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name && c.flow == flow)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Default)]
struct Accum {
    slots: u64,
    arrivals: u64,
    allocated: u64,
    served: u64,
    dropped: u64,
    drop_decisions: u64,
    weighted_decisions: f64,
    weighted_dropped: f64,
    q_sum: f64,
    q_sq_sum: f64,
    capacity: u64,
    wait: WaitStats,
}

impl Accum {
    fn rate(&self, x: f64) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            x / self.slots as f64
        }
    }

    fn queue_moments(&self) -> (f64, f64) {
        if self.slots == 0 {
            return (0.0, 0.0);
        }
        let n = self.slots as f64;
        let mean = self.q_sum / n;
        let var = (self.q_sq_sum / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }

    fn epoch_metrics(&self, id: u32) -> EpochFlowMetrics {
        let (queue_mean, queue_std) = self.queue_moments();
        EpochFlowMetrics {
            id,
            slots: self.slots,
            arrival_rate: self.rate(self.arrivals as f64),
            allocated_rate: self.rate(self.allocated as f64),
            served_rate: self.rate(self.served as f64),
            drop_decision_rate: self.rate(self.drop_decisions as f64),
            weighted_drop_decision_rate: self.rate(self.weighted_decisions),
            actual_drop_rate: self.rate(self.dropped as f64),
            weighted_actual_drop_rate: self.rate(self.weighted_dropped),
            queue_mean,
            queue_std,
            wait: self.wait.summary(),
        }
    }
}

struct ChannelState {
    model: ChannelModel,
    rng: SimRng,
}

impl ChannelState {
    fn draw(&mut self, t: u64) -> u64 {
        match self.model.kind {
            ChannelKind::Constant => self.model.s_max,
            ChannelKind::Sequence => self.model.sequence[((t - 1) % self.model.sequence.len() as u64) as usize],
            ChannelKind::SeededRandom => self.rng.random_range(self.model.s_min..=self.model.s_max),
        }
    }
}

struct FlowRuntime {
    config: FlowConfig,
    rng: SimRng,
    state: Option<FlowState>,
    limits: FlowLimits,
    total: Accum,
    epochs: Vec<Accum>,
    abandoned: u64,
    last_y: f64,
    last_z: f64,
    /// Largest observed value per checked quantity, indexed like `ViolationKind::ALL`.
    observed: [Option<f64>; 7],
    violations: [u64; 7],
}

impl FlowRuntime {
    fn observe(&mut self, kind: ViolationKind, value: f64) {
        let i = kind as usize;
        self.observed[i] = Some(self.observed[i].map_or(value, |m: f64| m.max(value)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Abort on the first bound violation.
    pub strict: bool,
    /// Evaluate queue and delay bounds every slot.
    pub check_bounds: bool,
    /// Emit a trace every `trace_every` slots (0 disables tracing).
    pub trace_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            strict: false,
            check_bounds: true,
            trace_every: 1,
        }
    }
}

/// A scenario being simulated one slot at a time.
pub struct Simulation {
    spec: ScenarioSpec,
    opts: RunOptions,
    t: u64,
    channel: ChannelState,
    flows: Vec<FlowRuntime>,
    /// Indices into `flows`, sorted by flow id.
    order: Vec<usize>,
    epoch_starts: Vec<u64>,
    epoch: usize,
    epoch_capacity: Vec<(u64, u64)>,
    capacity_total: u64,
    violation_log: Vec<Violation>,
    violation_count: u64,
}

impl Simulation {
    pub fn new(spec: ScenarioSpec, opts: RunOptions) -> Result<Self> {
        let spec = validate_scenario(spec)?;
        let mut epoch_starts = vec![1];
        epoch_starts.extend(spec.epoch_boundaries());
        let flows: Vec<FlowRuntime> = spec
            .flows
            .iter()
            .map(|c| FlowRuntime {
                config: c.clone(),
                rng: stream_rng(spec.seed, 1 + u64::from(c.id)),
                state: None,
                limits: flow_limits(&spec, c),
                total: Accum::default(),
                epochs: vec![Accum::default(); epoch_starts.len()],
                abandoned: 0,
                last_y: 0.0,
                last_z: 0.0,
                observed: [None; 7],
                violations: [0; 7],
            })
            .collect();
        let mut order: Vec<usize> = (0..flows.len()).collect();
        order.sort_by_key(|&i| flows[i].config.id);
        Ok(Simulation {
            channel: ChannelState {
                model: spec.channel.clone(),
                rng: stream_rng(spec.seed, 0),
            },
            epoch_capacity: vec![(0, 0); epoch_starts.len()],
            epoch_starts,
            epoch: 0,
            flows,
            order,
            t: 1,
            opts,
            spec,
            capacity_total: 0,
            violation_log: Vec::new(),
            violation_count: 0,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// Next slot to be simulated.
    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t > self.spec.horizon
    }

    pub fn state(&self, id: u32) -> Option<&FlowState> {
        self.flows.iter().find(|f| f.config.id == id)?.state.as_ref()
    }

    /// Direct access to a present flow's state, for fault injection in tests.
    pub fn state_mut(&mut self, id: u32) -> Option<&mut FlowState> {
        self.flows.iter_mut().find(|f| f.config.id == id)?.state.as_mut()
    }

    fn violate(&mut self, v: Violation) -> Result<()> {
        self.violation_count += 1;
        if self.opts.strict {
            return Err(Error::BoundViolation(v));
        }
        if self.violation_log.len() < VIOLATION_LOG_LIMIT {
            self.violation_log.push(v);
        }
        Ok(())
    }

    /// Runs one slot and returns its trace.
    pub fn step(&mut self) -> Result<SlotTrace> {
        assert!(!self.is_done(), "simulation already finished");
        let t = self.t;
        if self.epoch + 1 < self.epoch_starts.len() && self.epoch_starts[self.epoch + 1] == t {
            self.epoch += 1;
        }
        let epoch = self.epoch;
        let s_t = self.channel.draw(t);
        self.capacity_total += s_t;
        self.epoch_capacity[epoch].0 += s_t;
        self.epoch_capacity[epoch].1 += 1;

        // Joins and leaves take effect at the start of the slot.
        let delay = self.spec.feedback_delay;
        for f in &mut self.flows {
            if f.config.leave_slot == Some(t) {
                if let Some(mut st) = f.state.take() {
                    f.abandoned += st.clear_queue();
                }
            }
            if f.config.join_slot == t {
                f.state = Some(FlowState::new(&f.config, delay));
            }
        }

        // Arrivals.
        let mut arrivals = vec![0u64; self.flows.len()];
        let mut lambdas = vec![None; self.flows.len()];
        for &i in &self.order {
            let f = &mut self.flows[i];
            let Some(st) = f.state.as_mut() else { continue };
            arrivals[i] = match &f.config.source {
                SourceSpec::Bursty(b) => sample_bursty(b, &mut f.rng),
                SourceSpec::Constant { count } => *count,
                SourceSpec::Aimd(_) => {
                    let src = st.aimd.as_mut().expect("closed-loop state");
                    let (acks, nacks) = src.pending_feedback.pop(t - 1);
                    src.apply(acks, nacks);
                    lambdas[i] = Some(src.lambda);
                    sample_poisson(src.lambda, &mut f.rng)
                }
            };
        }

        // Policy.
        let present: Vec<usize> = self.order.iter().copied().filter(|&i| self.flows[i].state.is_some()).collect();
        let output = {
            let views = present
                .iter()
                .map(|&i| {
                    let f = &self.flows[i];
                    let st = f.state.as_ref().expect("present");
                    FlowView {
                        config: &f.config,
                        q: st.q_len,
                        y: st.y,
                        z: st.z,
                        a_t: Some(arrivals[i]),
                    }
                })
                .collect();
            step_policy(self.spec.policy, &PolicyInput { s_t, flows: views })?
        };
        debug_assert!(output.total_allocated() <= s_t);

        let mut trace = SlotTrace {
            t,
            s_t,
            flows: Vec::with_capacity(present.len()),
        };
        let mut pending = Vec::new();
        for (&i, decision) in present.iter().zip(&output.decisions) {
            let discipline = self.spec.drop_discipline;
            let nack_mode = self.spec.nack_mode;
            let f = &mut self.flows[i];
            let st = f.state.as_mut().expect("present");
            let cfg = &f.config;
            let a_t = arrivals[i];
            let q_before = st.q_len;
            let backlogged = q_before > 0;

            let served = st.take_head(decision.s_alloc);
            let served_actual: u64 = served.iter().map(|b| b.count).sum();
            let dropped_actual = match discipline {
                DropDiscipline::Head => st.take_head(decision.d_drop).iter().map(|b| b.count).sum(),
                DropDiscipline::Tail => st.take_tail(decision.d_drop),
            };
            st.enqueue(t, a_t);
            st.y = update_virtual_queue(st.y, cfg.alpha, s_t, decision.s_alloc);
            st.z = update_persistent_queue(st.z, cfg.zeta, cfg.alpha, s_t, backlogged, decision.s_alloc, decision.d_drop);

            if let Some(src) = st.aimd.as_mut() {
                let nacks = match nack_mode {
                    NackMode::PerDecision => u64::from(decision.d_drop > 0),
                    NackMode::PerPacket => dropped_actual,
                };
                src.pending_feedback.push(t, served_actual, nacks);
            }

            for acc in [&mut f.total, &mut f.epochs[epoch]] {
                acc.slots += 1;
                acc.arrivals += a_t;
                acc.allocated += decision.s_alloc;
                acc.served += served_actual;
                acc.dropped += dropped_actual;
                acc.drop_decisions += decision.d_drop;
                acc.weighted_decisions += cfg.weight * decision.d_drop as f64;
                acc.weighted_dropped += cfg.weight * dropped_actual as f64;
                acc.q_sum += q_before as f64;
                acc.q_sq_sum += (q_before as f64) * (q_before as f64);
                acc.capacity += s_t;
            }
            record_wait_times(&mut f.total.wait, &served, t);
            let worst_wait = record_wait_times(&mut f.epochs[epoch].wait, &served, t);
            f.last_y = st.y;
            f.last_z = st.z;

            let ft = FlowTrace {
                id: cfg.id,
                a_t,
                s_alloc: decision.s_alloc,
                d_drop: decision.d_drop,
                served_actual,
                dropped_actual,
                q_before,
                q_after: st.q_len,
                y_after: st.y,
                z_after: st.z,
                lambda: lambdas[i],
            };
            pending.push((i, worst_wait));
            trace.flows.push(ft);
        }

        if self.opts.check_bounds {
            for (k, &(i, worst_wait)) in pending.iter().enumerate() {
                let ft = &trace.flows[k];
                let zeta = self.flows[i].config.zeta;
                let conservation_gap =
                    (ft.q_before + ft.a_t) as f64 - (ft.served_actual + ft.dropped_actual + ft.q_after) as f64;
                let mut values = vec![
                    (ViolationKind::QueueBound, ft.q_after as f64),
                    (ViolationKind::PersistentBound, ft.z_after),
                    (ViolationKind::CombinedBound, zeta * ft.z_after + ft.q_after as f64),
                    (ViolationKind::VirtualBound, ft.y_after),
                    (ViolationKind::PersistentNonzero, ft.z_after),
                    (ViolationKind::Conservation, conservation_gap.abs()),
                ];
                if let Some(w) = worst_wait {
                    values.push((ViolationKind::DelayBound, w as f64));
                }
                for (kind, value) in values {
                    let Some(limit) = self.flows[i].limits.limit(kind) else { continue };
                    self.flows[i].observe(kind, value);
                    if value > limit {
                        self.flows[i].violations[kind as usize] += 1;
                        self.violate(Violation {
                            slot: t,
                            flow: ft.id,
                            kind,
                            observed: value,
                            bound: limit,
                        })?;
                    }
                }
            }
        }

        self.t += 1;
        Ok(trace)
    }

    /// Runs to the horizon, passing every `trace_every`-th slot to `sink`.
    pub fn run_to_end(&mut self, mut sink: Option<&mut dyn TraceSink>) -> Result<()> {
        while !self.is_done() {
            let trace = self.step()?;
            if let Some(s) = sink.as_deref_mut() {
                let k = self.opts.trace_every;
                if k > 0 && (trace.t - 1) % k == 0 {
                    s.record(&trace)?;
                }
            }
        }
        Ok(())
    }

    /// Summarizes the slots simulated so far.
    pub fn report(&self) -> MetricsReport {
        let slots_run = self.t - 1;
        let mut flows = Vec::new();
        let mut theoretical_bounds = Vec::new();
        let mut checks = Vec::new();
        let max_a = self
            .spec
            .flows
            .iter()
            .map(|f| f.effective_a_max())
            .try_fold(0u64, |m, a| a.map(|a| m.max(a)));
        for &i in &self.order {
            let f = &self.flows[i];
            let tot = &f.total;
            let (queue_mean, queue_std) = tot.queue_moments();
            let final_queue = f.state.as_ref().map_or(0, |s| s.q_len);
            flows.push(FlowSummary {
                id: f.config.id,
                slots_present: tot.slots,
                arrivals: tot.arrivals,
                served: tot.served,
                dropped: tot.dropped,
                drop_decisions: tot.drop_decisions,
                abandoned: f.abandoned,
                final_queue,
                arrival_rate: tot.rate(tot.arrivals as f64),
                served_rate: tot.rate(tot.served as f64),
                drop_decision_rate: tot.rate(tot.drop_decisions as f64),
                weighted_drop_decision_rate: tot.rate(tot.weighted_decisions),
                actual_drop_rate: tot.rate(tot.dropped as f64),
                weighted_actual_drop_rate: tot.rate(tot.weighted_dropped),
                capacity_mean: tot.rate(tot.capacity as f64),
                queue_mean,
                queue_std,
                y_final: f.last_y,
                y_terminal_ratio: tot.rate(f.last_y),
                z_final: f.last_z,
                wait: tot.wait.summary(),
            });
            theoretical_bounds.push(FlowBoundEntry {
                flow: f.config.id,
                bounds: bounds::compute_bounds(
                    &f.config,
                    self.spec.flows.len(),
                    self.spec.channel.s_max,
                    self.spec.channel.floor(),
                    f.config.effective_a_max(),
                    max_a,
                )
                .ok(),
                checked: f.limits.clone(),
            });
            for kind in ViolationKind::ALL {
                let limit = f.limits.limit(kind);
                let status = match limit {
                    _ if !self.opts.check_bounds => CheckStatus::NotApplicable,
                    None => CheckStatus::NotApplicable,
                    Some(_) if f.violations[kind as usize] > 0 => CheckStatus::Fail,
                    Some(_) => CheckStatus::Pass,
                };
                checks.push(CheckResult {
                    check: kind.as_str().to_string(),
                    flow: f.config.id,
                    status,
                    observed_max: f.observed[kind as usize],
                    bound: limit,
                    violations: f.violations[kind as usize],
                });
            }
        }

        let mut epochs = Vec::new();
        for (e, &start) in self.epoch_starts.iter().enumerate() {
            if start > slots_run {
                break;
            }
            let end = self.epoch_starts.get(e + 1).map_or(slots_run, |&n| n - 1).min(slots_run);
            let (cap, n) = self.epoch_capacity[e];
            epochs.push(EpochReport {
                index: e,
                start,
                end,
                capacity_mean: if n == 0 { 0.0 } else { cap as f64 / n as f64 },
                flows: self
                    .order
                    .iter()
                    .filter(|&&i| self.flows[i].epochs[e].slots > 0)
                    .map(|&i| self.flows[i].epochs[e].epoch_metrics(self.flows[i].config.id))
                    .collect(),
            });
        }

        let per_slot = |x: f64| if slots_run == 0 { 0.0 } else { x / slots_run as f64 };
        MetricsReport {
            schema_version: SCHEMA_VERSION,
            policy: self.spec.policy,
            horizon: self.spec.horizon,
            seed: self.spec.seed,
            feedback_delay: self.spec.feedback_delay,
            capacity_mean: per_slot(self.capacity_total as f64),
            weighted_drop_decision_rate: per_slot(self.flows.iter().map(|f| f.total.weighted_decisions).sum()),
            weighted_actual_drop_rate: per_slot(self.flows.iter().map(|f| f.total.weighted_dropped).sum()),
            flows,
            epochs,
            theoretical_bounds,
            checks,
            violation_count: self.violation_count,
            violations: self.violation_log.clone(),
        }
    }
}

/// Validates and simulates `spec` to its horizon.
pub fn run(spec: &ScenarioSpec, opts: RunOptions, sink: Option<&mut dyn TraceSink>) -> Result<MetricsReport> {
    let mut sim = Simulation::new(spec.clone(), opts)?;
    sim.run_to_end(sink)?;
    Ok(sim.report())
}
