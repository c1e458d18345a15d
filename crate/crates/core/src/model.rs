//! Domain types shared by every other module.
//!
//! A [`ScenarioSpec`] is the complete, serializable description of one
//! experiment: the flows and their guarantees, the channel capacity process,
//! the policy, the horizon and the closed-loop feedback delay. Specs are
//! immutable after [`validate_scenario`] accepts them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arrivals::BurstySourceSpec;

/// Slack used when snapping a real product such as `alpha * S(t)` to an
/// integer, so that `0.6 * 50` is treated as exactly 30.
const ROUNDING_SLACK: f64 = 1e-9;

/// Tolerance on the admission condition `sum(alpha) <= 1`.
pub const ADMISSION_SLACK: f64 = 1e-12;

/// `ceil(x)` that ignores floating-point noise just above an integer.
pub fn ceil_snap(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= ROUNDING_SLACK {
        r.max(0.0) as u64
    } else {
        x.ceil().max(0.0) as u64
    }
}

/// `floor(x)` that ignores floating-point noise just below an integer.
pub fn floor_snap(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= ROUNDING_SLACK {
        r.max(0.0) as u64
    } else {
        x.floor().max(0.0) as u64
    }
}

/// Arrival process feeding one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    /// Open-loop truncated-Poisson bursty source.
    Bursty(BurstySourceSpec),
    /// Closed-loop Poisson source whose mean follows the AIMD law.
    Aimd(AimdSpec),
    /// Deterministic source emitting `count` packets every slot.
    Constant { count: u64 },
}

/// Parameters of the closed-loop source. The AIMD law itself is fixed; the
/// struct exists so the JSON form reads `{"aimd": {}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AimdSpec {}

impl SourceSpec {
    /// Largest possible per-slot arrival count, when the source has one.
    pub fn a_max(&self) -> Option<u64> {
        match self {
            SourceSpec::Bursty(b) => Some(b.a_max()),
            SourceSpec::Aimd(_) => None,
            SourceSpec::Constant { count } => Some(*count),
        }
    }

    pub fn is_closed_loop(&self) -> bool {
        matches!(self, SourceSpec::Aimd(_))
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_join() -> u64 {
    1
}

/// Immutable per-flow parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub id: u32,
    /// Guaranteed share of the channel capacity.
    pub alpha: f64,
    /// Weight of this flow's drop decisions in the objective.
    #[serde(default = "default_one")]
    pub weight: f64,
    /// Delay/optimality trade-off of the persistent queue.
    #[serde(default = "default_one")]
    pub zeta: f64,
    /// Drop/backlog trade-off `V`.
    pub v_param: f64,
    /// Fixed drop magnitude `D^max`, required by the one-step-optimal policy.
    #[serde(default)]
    pub drop_cap: Option<u64>,
    /// Per-slot arrival ceiling. Derived from the source when omitted.
    #[serde(default)]
    pub a_max: Option<u64>,
    pub source: SourceSpec,
    /// First slot in which the flow is present.
    #[serde(default = "default_join")]
    pub join_slot: u64,
    /// Slot at which the flow leaves; it is absent from this slot on.
    #[serde(default)]
    pub leave_slot: Option<u64>,
}

impl FlowConfig {
    /// Arrival ceiling: explicit `a_max` if given, else what the source implies.
    pub fn effective_a_max(&self) -> Option<u64> {
        self.a_max.or_else(|| self.source.a_max())
    }

    pub fn is_present(&self, t: u64) -> bool {
        t >= self.join_slot && self.leave_slot.is_none_or(|l| t < l)
    }

    /// `V * w`, the drop threshold.
    pub fn threshold(&self) -> f64 {
        self.v_param * self.weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// `S(t) = s_max` every slot.
    Constant,
    /// Cycles through `sequence`.
    Sequence,
    /// Uniform integer in `[s_min, s_max]`, drawn from the scenario seed.
    SeededRandom,
}

/// Service-capacity process `S(t)` in packets per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub s_max: u64,
    #[serde(default)]
    pub s_min: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<u64>,
}

impl ChannelModel {
    pub fn constant(s: u64) -> Self {
        ChannelModel {
            kind: ChannelKind::Constant,
            s_max: s,
            s_min: s,
            sequence: Vec::new(),
        }
    }

    /// Smallest capacity the channel can actually emit.
    pub fn floor(&self) -> u64 {
        match self.kind {
            ChannelKind::Constant => self.s_max,
            ChannelKind::Sequence => self.sequence.iter().copied().min().unwrap_or(0),
            ChannelKind::SeededRandom => self.s_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Max-weight allocation plus fixed-magnitude threshold drops.
    #[serde(rename = "pi_bar")]
    PiBar,
    /// Max-weight allocation plus arrival-aware threshold drops.
    #[serde(rename = "pi_hat")]
    PiHat,
    /// Static `alpha`-share allocation, isolating flows.
    #[serde(rename = "pi_static")]
    PiStatic,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::PiBar => "pi_bar",
            PolicyKind::PiHat => "pi_hat",
            PolicyKind::PiStatic => "pi_static",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which end of the queue realized drops are taken from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropDiscipline {
    #[default]
    Head,
    Tail,
}

/// How drop decisions are turned into NACKs for closed-loop sources.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NackMode {
    /// One NACK per slot with a nonzero drop decision.
    #[default]
    PerDecision,
    /// One NACK per packet actually dropped.
    PerPacket,
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub flows: Vec<FlowConfig>,
    pub channel: ChannelModel,
    pub policy: PolicyKind,
    pub horizon: u64,
    #[serde(default)]
    pub feedback_delay: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub drop_discipline: DropDiscipline,
    #[serde(default)]
    pub nack_mode: NackMode,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Slots at which the set of present flows changes, sorted, within `2..=horizon`.
    pub fn epoch_boundaries(&self) -> Vec<u64> {
        let mut b: Vec<u64> = self
            .flows
            .iter()
            .flat_map(|f| std::iter::once(f.join_slot).chain(f.leave_slot))
            .filter(|&s| s >= 2 && s <= self.horizon)
            .collect();
        b.sort_unstable();
        b.dedup();
        b
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("admission violation: sum of alpha is {sum:.6} > 1 over slots {from}..{to}")]
    AdmissionViolation { from: u64, to: u64, sum: f64 },
    #[error("flow {flow}: {reason}")]
    MissingDropCap { flow: u32, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Every problem found in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

fn check_flow(f: &FlowConfig, horizon: u64, errors: &mut Vec<ValidationError>) {
    let mut bad = |what: String| errors.push(ValidationError::InvalidParameter(format!("flow {}: {what}", f.id)));
    if !(0.0..=1.0).contains(&f.alpha) {
        bad(format!("alpha {} outside [0, 1]", f.alpha));
    }
    if !(0.0..=1.0).contains(&f.weight) {
        bad(format!("weight {} outside [0, 1]", f.weight));
    }
    if !(f.zeta > 0.0 && f.zeta.is_finite()) {
        bad(format!("zeta {} must be positive", f.zeta));
    }
    if !(f.v_param >= 0.0 && f.v_param.is_finite()) {
        bad(format!("v_param {} must be nonnegative", f.v_param));
    }
    if f.join_slot < 1 || f.join_slot > horizon {
        bad(format!("join_slot {} outside 1..={horizon}", f.join_slot));
    }
    if let Some(l) = f.leave_slot {
        if l <= f.join_slot || l > horizon {
            bad(format!("leave_slot {l} must lie in {}..={horizon}", f.join_slot + 1));
        }
    }
    match &f.source {
        SourceSpec::Bursty(b) => {
            if b.eta == 0 || b.nu == 0 {
                bad("bursty source needs eta >= 1 and nu >= 1".into());
            }
            if !(b.lambda >= 0.0 && b.lambda.is_finite()) {
                bad(format!("bursty lambda {} must be finite and nonnegative", b.lambda));
            }
        }
        SourceSpec::Aimd(_) => {
            if f.a_max.is_some() {
                bad("a_max cannot be declared for an unbounded closed-loop source".into());
            }
        }
        SourceSpec::Constant { .. } => {}
    }
    if let (Some(declared), Some(implied)) = (f.a_max, f.source.a_max()) {
        if declared < implied {
            bad(format!("a_max {declared} is below the source's ceiling {implied}"));
        }
    }
}

fn check_channel(c: &ChannelModel, errors: &mut Vec<ValidationError>) {
    let mut bad = |what: String| errors.push(ValidationError::InvalidParameter(format!("channel: {what}")));
    if c.s_max == 0 {
        bad("s_max must be positive".into());
    }
    if c.s_min > c.s_max {
        bad(format!("s_min {} exceeds s_max {}", c.s_min, c.s_max));
    }
    if c.kind == ChannelKind::Sequence {
        if c.sequence.is_empty() {
            bad("sequence channel needs at least one value".into());
        }
        if let Some(v) = c.sequence.iter().find(|&&v| v < c.s_min || v > c.s_max) {
            bad(format!("sequence value {v} outside [{}, {}]", c.s_min, c.s_max));
        }
    }
}

/// Checks every invariant of `spec` and returns it unchanged when all hold.
pub fn validate_scenario(spec: ScenarioSpec) -> Result<ScenarioSpec, ValidationErrors> {
    let mut errors = Vec::new();
    if spec.horizon == 0 {
        errors.push(ValidationError::InvalidParameter("horizon must be at least 1".into()));
    }
    let mut ids: Vec<u32> = spec.flows.iter().map(|f| f.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        errors.push(ValidationError::InvalidParameter("flow ids must be unique".into()));
    }
    for f in &spec.flows {
        check_flow(f, spec.horizon.max(1), &mut errors);
    }
    check_channel(&spec.channel, &mut errors);

    // The present set only changes at join/leave slots, so checking the
    // start of every interval covers every slot.
    let mut starts = vec![1];
    starts.extend(spec.epoch_boundaries());
    let mut ends: Vec<u64> = starts[1..].to_vec();
    ends.push(spec.horizon + 1);
    let mut last_bad: Option<(u64, u64, f64)> = None;
    for (&from, &end) in starts.iter().zip(&ends) {
        let sum: f64 = spec.flows.iter().filter(|f| f.is_present(from)).map(|f| f.alpha).sum();
        if sum > 1.0 + ADMISSION_SLACK {
            match &mut last_bad {
                Some((_, to, s)) if *to == from => {
                    *to = end;
                    *s = s.max(sum);
                }
                _ => {
                    if let Some((a, b, s)) = last_bad.take() {
                        errors.push(ValidationError::AdmissionViolation { from: a, to: b - 1, sum: s });
                    }
                    last_bad = Some((from, end, sum));
                }
            }
        }
    }
    if let Some((a, b, s)) = last_bad {
        errors.push(ValidationError::AdmissionViolation { from: a, to: b - 1, sum: s });
    }

    if spec.policy == PolicyKind::PiBar {
        for f in &spec.flows {
            let Some(cap) = f.drop_cap else {
                errors.push(ValidationError::MissingDropCap {
                    flow: f.id,
                    reason: "pi_bar requires drop_cap".into(),
                });
                continue;
            };
            let Some(a_max) = f.effective_a_max() else {
                errors.push(ValidationError::MissingDropCap {
                    flow: f.id,
                    reason: "pi_bar requires a bounded source (a_max unknown)".into(),
                });
                continue;
            };
            let need = a_max.max(ceil_snap(f.alpha * spec.channel.s_max as f64));
            if cap < need {
                errors.push(ValidationError::MissingDropCap {
                    flow: f.id,
                    reason: format!("drop_cap {cap} is below max(a_max, ceil(alpha*s_max)) = {need}"),
                });
            }
        }
    }

    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(ValidationErrors(errors))
    }
}
