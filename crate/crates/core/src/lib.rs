//! Slotted-time simulation of QoS-aware admission and scheduling at a
//! wireless base station.
//!
//! Flows carry a guaranteed share `alpha` of a time-varying capacity `S(t)`.
//! Each slot the base station decides how much service each flow gets and how
//! many queued packets to drop. Three policies are provided:
//!
//! - [`PolicyKind::PiBar`]: whole capacity to the flow with the largest
//!   `zeta*Z + Q + Y`, fixed-size drops above a threshold;
//! - [`PolicyKind::PiHat`]: same allocation, drops sized by the current arrivals;
//! - [`PolicyKind::PiStatic`]: each flow gets its own `alpha` share.
//!
//! Runs are deterministic given the scenario seed. The engine checks every
//! closed-form queue and delay bound ([`bounds`]) while it runs.
//!
//! ```
//! use gnb_qos::presets::{table_row, TableRow};
//! use gnb_qos::{run, PolicyKind, RunOptions};
//!
//! let mut spec = table_row(TableRow::One, PolicyKind::PiHat, 1000.0, 1.0, 7);
//! spec.horizon = 2_000;
//! let report = run(&spec, RunOptions::default(), None).unwrap();
//! assert_eq!(report.violation_count, 0);
//! ```

pub mod analysis;
pub mod arrivals;
pub mod bounds;
pub mod cli;
pub mod engine;
mod error;
pub mod model;
pub mod output;
pub mod policies;
pub mod presets;

pub use engine::{run, MetricsReport, RunOptions, Simulation, SlotTrace, TraceSink};
pub use error::{Error, Result};
pub use model::{validate_scenario, ChannelModel, FlowConfig, PolicyKind, ScenarioSpec, SourceSpec};
