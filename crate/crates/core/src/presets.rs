//! Ready-made scenarios and parameter sweeps.
//!
//! Unless a preset overrides them, every scenario uses a constant capacity of
//! 50 packets per slot, a horizon of 100 000 slots, `w = 1` and `zeta = 1`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::arrivals::BurstySourceSpec;
use crate::engine::{run, MetricsReport, RunOptions};
use crate::error::Result;
use crate::model::{
    ceil_snap, AimdSpec, ChannelModel, DropDiscipline, FlowConfig, NackMode, PolicyKind, ScenarioSpec, SourceSpec,
};
use crate::output::CsvTraceWriter;

pub const DEFAULT_CAPACITY: u64 = 50;
pub const DEFAULT_HORIZON: u64 = 100_000;
pub const ZETA_GRID: [f64; 7] = [1.0, 6.0, 11.0, 16.0, 21.0, 26.0, 31.0];
pub const V_GRID: [f64; 7] = [50.0, 100.0, 150.0, 200.0, 400.0, 700.0, 1000.0];
pub const ETA_GRID: [u64; 2] = [1, 10];
pub const DELAY_GRID: [u64; 8] = [0, 25, 50, 100, 200, 300, 400, 500];
pub const SNAPSHOT_DELAYS: [u64; 3] = [0, 50, 500];
/// Slot at which the second flow joins in the dynamic scenarios.
pub const SECOND_FLOW_JOIN: u64 = 30_000;
/// Slot at which the first flow leaves in the dynamic scenarios.
pub const FIRST_FLOW_LEAVE: u64 = 70_000;

/// The three two-flow service/arrival combinations used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableRow {
    /// `alpha = (0.2, 0.8)`, sources `(1, 10, 300)` and `(1, 40, 300)`.
    One,
    /// `alpha = (0.2, 0.4)`, sources `(1, 30, 300)` and `(1, 70, 300)`.
    Two,
    /// `alpha = (0.2, 0.6)`, sources `(eta, 10/eta, 300/eta)` and `(eta, 30/eta, 300/eta)`.
    Three { eta: u64 },
}

pub fn bursty(eta: u64, lambda: f64, nu: u64) -> SourceSpec {
    SourceSpec::Bursty(BurstySourceSpec { eta, lambda, nu })
}

/// A flow with the default weight and a drop cap large enough for `pi_bar`.
pub fn flow(id: u32, alpha: f64, v: f64, zeta: f64, source: SourceSpec) -> FlowConfig {
    let drop_cap = source.a_max().map(|a| a.max(ceil_snap(alpha * DEFAULT_CAPACITY as f64)));
    FlowConfig {
        id,
        alpha,
        weight: 1.0,
        zeta,
        v_param: v,
        drop_cap,
        a_max: None,
        source,
        join_slot: 1,
        leave_slot: None,
    }
}

fn base(flows: Vec<FlowConfig>, policy: PolicyKind, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        flows,
        channel: ChannelModel::constant(DEFAULT_CAPACITY),
        policy,
        horizon: DEFAULT_HORIZON,
        feedback_delay: 0,
        seed,
        drop_discipline: DropDiscipline::Head,
        nack_mode: NackMode::PerDecision,
    }
}

pub fn table_row(row: TableRow, policy: PolicyKind, v: f64, zeta: f64, seed: u64) -> ScenarioSpec {
    let flows = match row {
        TableRow::One => vec![
            flow(0, 0.2, v, zeta, bursty(1, 10.0, 300)),
            flow(1, 0.8, v, zeta, bursty(1, 40.0, 300)),
        ],
        TableRow::Two => vec![
            flow(0, 0.2, v, zeta, bursty(1, 30.0, 300)),
            flow(1, 0.4, v, zeta, bursty(1, 70.0, 300)),
        ],
        TableRow::Three { eta } => vec![
            flow(0, 0.2, v, zeta, bursty(eta, 10.0 / eta as f64, 300 / eta)),
            flow(1, 0.6, v, zeta, bursty(eta, 30.0 / eta as f64, 300 / eta)),
        ],
    };
    base(flows, policy, seed)
}

/// Two flows with source `(1, 20, 300)`: the first alone until slot 30 000,
/// the second joining then, the first leaving at slot 70 000.
pub fn join_leave(policy: PolicyKind, seed: u64) -> ScenarioSpec {
    dynamic_pair(policy, seed, || bursty(1, 20.0, 300))
}

/// The join/leave pattern with closed-loop AIMD sources and feedback delay `d`.
pub fn closed_loop(policy: PolicyKind, d: u64, seed: u64) -> ScenarioSpec {
    let mut spec = dynamic_pair(policy, seed, || SourceSpec::Aimd(AimdSpec {}));
    spec.feedback_delay = d;
    spec
}

fn dynamic_pair(policy: PolicyKind, seed: u64, source: impl Fn() -> SourceSpec) -> ScenarioSpec {
    let mut f1 = flow(0, 0.2, 1000.0, 1.0, source());
    f1.leave_slot = Some(FIRST_FLOW_LEAVE);
    let mut f2 = flow(1, 0.6, 1000.0, 1.0, source());
    f2.join_slot = SECOND_FLOW_JOIN;
    base(vec![f1, f2], policy, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetId {
    ZetaSweep,
    PolicyCompareVSweep,
    IsolationBursty,
    JoinLeave,
    FeedbackDelaySweep,
    FeedbackSnapshot,
}

impl PresetId {
    pub const ALL: [PresetId; 6] = [
        PresetId::ZetaSweep,
        PresetId::PolicyCompareVSweep,
        PresetId::IsolationBursty,
        PresetId::JoinLeave,
        PresetId::FeedbackDelaySweep,
        PresetId::FeedbackSnapshot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::ZetaSweep => "zeta_sweep",
            PresetId::PolicyCompareVSweep => "policy_compare_v_sweep",
            PresetId::IsolationBursty => "isolation_bursty",
            PresetId::JoinLeave => "join_leave",
            PresetId::FeedbackDelaySweep => "feedback_delay_sweep",
            PresetId::FeedbackSnapshot => "feedback_snapshot",
        }
    }

    /// Default trace thinning: snapshots keep every slot.
    pub fn default_thin(self) -> u64 {
        match self {
            PresetId::FeedbackSnapshot => 1,
            _ => 10,
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset {s:?}"))
    }
}

/// One scenario of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// File stem for this point's outputs.
    pub label: String,
    pub spec: ScenarioSpec,
}

fn point(label: String, spec: ScenarioSpec) -> SweepPoint {
    SweepPoint { label, spec }
}

/// Every scenario `preset` runs, in a fixed order.
pub fn expand(preset: PresetId, seed: u64) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    match preset {
        PresetId::ZetaSweep => {
            for zeta in ZETA_GRID {
                points.push(point(
                    format!("pi_hat_zeta{zeta}"),
                    table_row(TableRow::One, PolicyKind::PiHat, 1000.0, zeta, seed),
                ));
            }
        }
        PresetId::PolicyCompareVSweep => {
            for policy in [PolicyKind::PiBar, PolicyKind::PiHat] {
                for v in V_GRID {
                    points.push(point(format!("{policy}_v{v}"), table_row(TableRow::Two, policy, v, 1.0, seed)));
                }
            }
        }
        PresetId::IsolationBursty => {
            for policy in [PolicyKind::PiHat, PolicyKind::PiStatic] {
                for eta in ETA_GRID {
                    points.push(point(
                        format!("{policy}_eta{eta}"),
                        table_row(TableRow::Three { eta }, policy, 1000.0, 1.0, seed),
                    ));
                }
            }
        }
        PresetId::JoinLeave => {
            for policy in [PolicyKind::PiHat, PolicyKind::PiStatic] {
                points.push(point(format!("{policy}"), join_leave(policy, seed)));
            }
        }
        PresetId::FeedbackDelaySweep => {
            for policy in [PolicyKind::PiHat, PolicyKind::PiStatic] {
                for d in DELAY_GRID {
                    points.push(point(format!("{policy}_d{d}"), closed_loop(policy, d, seed)));
                }
            }
        }
        PresetId::FeedbackSnapshot => {
            for d in SNAPSHOT_DELAYS {
                points.push(point(format!("pi_hat_d{d}"), closed_loop(PolicyKind::PiHat, d, seed)));
            }
        }
    }
    points
}

/// Result of one sweep point: its report and rendered trace CSV.
pub struct PointResult {
    pub point: SweepPoint,
    pub report: MetricsReport,
    pub trace_csv: Vec<u8>,
}

/// Runs every point in parallel; results come back in expansion order.
pub fn run_points(points: Vec<SweepPoint>, thin: u64) -> Result<Vec<PointResult>> {
    points
        .into_par_iter()
        .map(|point| {
            let opts = RunOptions {
                strict: false,
                check_bounds: true,
                trace_every: thin,
            };
            let mut writer = CsvTraceWriter::new(Vec::new())?;
            let report = run(&point.spec, opts, Some(&mut writer))?;
            Ok(PointResult {
                point,
                report,
                trace_csv: writer.finish()?,
            })
        })
        .collect()
}

pub const AGGREGATE_COLUMNS: [&str; 25] = [
    "preset",
    "point",
    "policy",
    "zeta",
    "v",
    "eta",
    "d",
    "epoch",
    "epoch_start",
    "epoch_end",
    "flow",
    "slots",
    "arrival_rate",
    "allocated_rate",
    "served_rate",
    "drop_decision_rate",
    "weighted_drop_decision_rate",
    "actual_drop_rate",
    "weighted_actual_drop_rate",
    "queue_mean",
    "queue_std",
    "wait_mean",
    "wait_max",
    "y_terminal_ratio",
    "violations",
];

/// Aggregate CSV keyed by the swept parameters. Each point contributes one
/// whole-run row per flow (`epoch = all`) and, when flows join or leave, one
/// row per flow per epoch.
pub fn aggregate_csv(preset: PresetId, results: &[PointResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in results {
        let spec = &r.point.spec;
        let report = &r.report;
        for s in &report.flows {
            let cfg = spec.flows.iter().find(|f| f.id == s.id).expect("flow in spec");
            let eta = match &cfg.source {
                SourceSpec::Bursty(b) => b.eta.to_string(),
                _ => String::new(),
            };
            let keys = [
                preset.name().to_string(),
                r.point.label.clone(),
                spec.policy.to_string(),
                cfg.zeta.to_string(),
                cfg.v_param.to_string(),
                eta,
                spec.feedback_delay.to_string(),
            ];
            let mut rows = vec![(
                "all".to_string(),
                cfg.join_slot,
                cfg.leave_slot.map_or(spec.horizon, |l| l - 1),
                s.slots_present,
                [
                    s.arrival_rate,
                    f64::NAN,
                    s.served_rate,
                    s.drop_decision_rate,
                    s.weighted_drop_decision_rate,
                    s.actual_drop_rate,
                    s.weighted_actual_drop_rate,
                    s.queue_mean,
                    s.queue_std,
                    s.wait.mean,
                ],
                s.wait.max,
                s.y_terminal_ratio.to_string(),
            )];
            if report.epochs.len() > 1 {
                for e in &report.epochs {
                    if let Some(m) = e.flows.iter().find(|m| m.id == s.id) {
                        rows.push((
                            e.index.to_string(),
                            e.start,
                            e.end,
                            m.slots,
                            [
                                m.arrival_rate,
                                m.allocated_rate,
                                m.served_rate,
                                m.drop_decision_rate,
                                m.weighted_drop_decision_rate,
                                m.actual_drop_rate,
                                m.weighted_actual_drop_rate,
                                m.queue_mean,
                                m.queue_std,
                                m.wait.mean,
                            ],
                            m.wait.max,
                            String::new(),
                        ));
                    }
                }
            }
            let violations: u64 = report.checks.iter().filter(|c| c.flow == s.id).map(|c| c.violations).sum();
            for (epoch, start, end, slots, rates, wait_max, y_ratio) in rows {
                let mut rec: Vec<String> = keys.to_vec();
                rec.extend([epoch, start.to_string(), end.to_string(), s.id.to_string(), slots.to_string()]);
                rec.extend(rates.iter().map(|x| if x.is_nan() { String::new() } else { x.to_string() }));
                rec.extend([wait_max.to_string(), y_ratio, violations.to_string()]);
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_scenario;

    #[test]
    fn every_preset_expands_to_valid_scenarios() {
        for p in PresetId::ALL {
            let points = expand(p, 1);
            assert!(!points.is_empty());
            for pt in points {
                assert!(validate_scenario(pt.spec.clone()).is_ok(), "{p} {}", pt.label);
            }
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for p in PresetId::ALL {
            assert_eq!(p.name().parse::<PresetId>().unwrap(), p);
        }
        assert!("nope".parse::<PresetId>().is_err());
    }

    #[test]
    fn pi_bar_caps_follow_feasibility_rule() {
        let spec = table_row(TableRow::Two, PolicyKind::PiBar, 100.0, 1.0, 0);
        assert!(spec.flows.iter().all(|f| f.drop_cap == Some(300)));
        let spec = table_row(TableRow::Three { eta: 10 }, PolicyKind::PiBar, 100.0, 1.0, 0);
        assert_eq!(spec.flows[1].source, bursty(10, 3.0, 30));
        assert_eq!(spec.flows[1].drop_cap, Some(300));
    }

    #[test]
    fn join_leave_epochs() {
        assert_eq!(join_leave(PolicyKind::PiHat, 0).epoch_boundaries(), vec![30_000, 70_000]);
    }
}
