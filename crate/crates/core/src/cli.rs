//! Command-line front end.
//!
//! ```text
//! gnb-qos run <file> [--out DIR] [--strict] [--thin K]
//! gnb-qos preset <name> [--seed N] [--out DIR] [--thin K]
//! gnb-qos verify <file>
//! ```
//!
//! Exit status: 0 on success, 1 on input or validation errors, 2 when a bound
//! is violated (`run --strict`, or any failed check in `verify`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;

use crate::arrivals::stream_rng;
use crate::engine::{CheckStatus, RunOptions, Simulation};
use crate::error::Error;
use crate::model::{validate_scenario, PolicyKind, ScenarioSpec};
use crate::output::{write_summary, CsvTraceWriter};
use crate::policies::{
    drift_objective, oracle_min_drift, sra_allocate, FlowDecision, FlowView, PolicyInput, PolicyOutput,
    ORACLE_MAX_CAPACITY, ORACLE_MAX_DROP, ORACLE_MAX_FLOWS,
};
use crate::presets::{aggregate_csv, expand, run_points, PresetId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

/// Number of slots spot-checked against the exhaustive oracle by `verify`.
pub const ORACLE_SPOT_CHECKS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "gnb-qos", version, about = "QoS-aware base-station scheduling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario file and write run.csv and summary.json.
    Run {
        file: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Stop with exit status 2 on the first bound violation.
        #[arg(long)]
        strict: bool,
        /// Record every K-th slot in run.csv.
        #[arg(long, default_value_t = 1)]
        thin: u64,
    },
    /// Run a built-in experiment sweep.
    Preset {
        name: PresetId,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        thin: Option<u64>,
    },
    /// Run with every bound check plus oracle spot checks and print a report.
    Verify { file: PathBuf },
}

/// Options of `run` that are not part of the scenario.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub strict: bool,
    pub thin: u64,
    /// Adds `amount` to flow `flow`'s persistent queue before slot `slot`.
    pub inject_z_fault: Option<ZFault>,
}

#[derive(Debug, Clone, Copy)]
pub struct ZFault {
    pub slot: u64,
    pub flow: u32,
    pub amount: f64,
}

pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { file, out: dir, strict, thin } => cmd_run(
            &file,
            &dir,
            &RunFlags {
                strict,
                thin,
                inject_z_fault: None,
            },
            out,
        ),
        Command::Preset { name, seed, out: dir, thin } => cmd_preset(name, &dir, seed, thin, out),
        Command::Verify { file } => cmd_verify(&file, out),
    }
}

fn load(path: &Path, out: &mut dyn Write) -> Option<ScenarioSpec> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(out, "error: cannot read {}: {e}", path.display());
            return None;
        }
    };
    match ScenarioSpec::from_json(&text) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(out, "error: {}: {e}", path.display());
            None
        }
    }
}

fn report_error(e: &Error, out: &mut dyn Write) -> i32 {
    let _ = writeln!(out, "error: {e}");
    match e {
        Error::BoundViolation(_) => EXIT_VIOLATION,
        _ => EXIT_INVALID,
    }
}

pub fn cmd_run(path: &Path, dir: &Path, flags: &RunFlags, out: &mut dyn Write) -> i32 {
    let Some(spec) = load(path, out) else { return EXIT_INVALID };
    let opts = RunOptions {
        strict: flags.strict,
        check_bounds: true,
        trace_every: flags.thin.max(1),
    };
    let mut sim = match Simulation::new(spec, opts) {
        Ok(s) => s,
        Err(e) => return report_error(&e, out),
    };
    let result = (|| -> crate::Result<()> {
        fs::create_dir_all(dir)?;
        let mut writer = CsvTraceWriter::create(&dir.join("run.csv"))?;
        while !sim.is_done() {
            if let Some(f) = flags.inject_z_fault {
                if f.slot == sim.slot() {
                    if let Some(st) = sim.state_mut(f.flow) {
                        st.z += f.amount;
                    }
                }
            }
            let trace = sim.step()?;
            if (trace.t - 1) % opts.trace_every == 0 {
                crate::TraceSink::record(&mut writer, &trace)?;
            }
        }
        writer.finish()?;
        write_summary(&dir.join("summary.json"), &sim.report())?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            let report = sim.report();
            let _ = writeln!(
                out,
                "ran {} slots under {}: weighted drop-decision rate {:.4}, {} bound violations",
                report.horizon, report.policy, report.weighted_drop_decision_rate, report.violation_count
            );
            EXIT_OK
        }
        Err(e) => report_error(&e, out),
    }
}

pub fn cmd_preset(preset: PresetId, dir: &Path, seed: u64, thin: Option<u64>, out: &mut dyn Write) -> i32 {
    let thin = thin.unwrap_or(preset.default_thin()).max(1);
    let points = expand(preset, seed);
    let n = points.len();
    let result = (|| -> crate::Result<()> {
        let results = run_points(points, thin)?;
        let dir = dir.join(preset.name());
        fs::create_dir_all(&dir)?;
        for r in &results {
            fs::write(dir.join(format!("{}.csv", r.point.label)), &r.trace_csv)?;
            write_summary(&dir.join(format!("{}.summary.json", r.point.label)), &r.report)?;
        }
        fs::write(dir.join("aggregate.csv"), aggregate_csv(preset, &results)?)?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            let _ = writeln!(out, "{preset}: {n} runs written to {}", dir.join(preset.name()).display());
            EXIT_OK
        }
        Err(e) => report_error(&e, out),
    }
}

/// Compares the closed-form decision against the exhaustive oracle on a
/// shrunken copy of one slot's state. Returns `(closed_form, oracle)` objectives.
pub fn shadow_oracle_check(flows: &[FlowView<'_>], s_t: u64) -> (f64, f64) {
    let flows: Vec<FlowView<'_>> = flows.iter().take(ORACLE_MAX_FLOWS).copied().collect();
    let input = PolicyInput {
        s_t: s_t.min(ORACLE_MAX_CAPACITY),
        flows,
    };
    let caps: Vec<u64> = input
        .flows
        .iter()
        .map(|f| f.config.drop_cap.unwrap_or(ORACLE_MAX_DROP).min(ORACLE_MAX_DROP))
        .collect();
    let alloc = sra_allocate(&input);
    let decisions = input
        .flows
        .iter()
        .zip(alloc)
        .zip(&caps)
        .map(|((f, s_alloc), &cap)| FlowDecision {
            id: f.config.id,
            s_alloc,
            d_drop: if crate::policies::over_threshold(f.q, f.z, f.config) { cap } else { 0 },
        })
        .collect();
    let closed = drift_objective(&input, &PolicyOutput { decisions });
    let (_, best) = oracle_min_drift(&input, &caps).expect("shadow instance is small");
    (closed, best)
}

pub fn cmd_verify(path: &Path, out: &mut dyn Write) -> i32 {
    let Some(spec) = load(path, out) else { return EXIT_INVALID };
    let spec = match validate_scenario(spec) {
        Ok(s) => s,
        Err(e) => return report_error(&Error::Validation(e), out),
    };
    let horizon = spec.horizon;
    let policy = spec.policy;
    let mut rng = stream_rng(spec.seed, u64::MAX);
    let mut spot: Vec<u64> = (0..ORACLE_SPOT_CHECKS).map(|_| rng.random_range(1..=horizon)).collect();
    spot.sort_unstable();

    let opts = RunOptions {
        strict: false,
        check_bounds: true,
        trace_every: 0,
    };
    let mut sim = match Simulation::new(spec.clone(), opts) {
        Ok(s) => s,
        Err(e) => return report_error(&e, out),
    };
    let (mut oracle_runs, mut oracle_ok) = (0usize, 0usize);
    let mut next = spot.iter().peekable();
    while !sim.is_done() {
        let t = sim.slot();
        // State at the start of the slot; flows joining now start empty.
        let snapshot: Vec<(u32, u64, f64, f64)> = spec
            .flows
            .iter()
            .filter(|f| f.is_present(t))
            .map(|f| sim.state(f.id).map_or((f.id, 0, 0.0, 0.0), |s| (f.id, s.queue_len(), s.y, s.z)))
            .collect();
        let trace = match sim.step() {
            Ok(tr) => tr,
            Err(e) => return report_error(&e, out),
        };
        while next.peek().is_some_and(|&&s| s == t) {
            next.next();
            let mut views: Vec<FlowView<'_>> = snapshot
                .iter()
                .map(|&(id, q, y, z)| FlowView {
                    config: spec.flows.iter().find(|f| f.id == id).expect("flow in spec"),
                    q,
                    y,
                    z,
                    a_t: None,
                })
                .collect();
            views.sort_by_key(|v| v.config.id);
            if views.is_empty() {
                continue;
            }
            let (closed, best) = shadow_oracle_check(&views, trace.s_t);
            oracle_runs += 1;
            if closed == best {
                oracle_ok += 1;
            }
        }
    }
    let report = sim.report();
    let mut all_pass = oracle_ok == oracle_runs;
    for c in &report.checks {
        let name = if c.check == "persistent_zero" { "Z identically zero" } else { c.check.as_str() };
        let status = match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => {
                all_pass = false;
                "FAIL"
            }
            CheckStatus::NotApplicable => "not applicable",
        };
        let detail = match (c.observed_max, c.bound) {
            (Some(o), Some(b)) => format!(" (max observed {o}, bound {b})"),
            _ => String::new(),
        };
        let _ = writeln!(out, "flow {} {name}: {status}{detail}", c.flow);
    }
    let _ = writeln!(
        out,
        "oracle one-step optimality: {} ({oracle_ok}/{oracle_runs} slots)",
        if oracle_ok == oracle_runs { "pass" } else { "FAIL" }
    );
    if policy == PolicyKind::PiStatic {
        let _ = writeln!(out, "policy pi_static: flows isolated, persistent queues must stay zero");
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}
