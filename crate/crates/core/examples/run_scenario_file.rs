//! Loads a scenario file, streams its trace to CSV and prints the checks.
//!
//! `cargo run --example run_scenario_file -- scenarios/fading_channel.json`

use std::path::PathBuf;

use gnb_qos::engine::CheckStatus;
use gnb_qos::output::CsvTraceWriter;
use gnb_qos::{RunOptions, ScenarioSpec, Simulation};

fn main() -> gnb_qos::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/fading_channel.json"));
    let spec = ScenarioSpec::from_json(&std::fs::read_to_string(&path)?)?;
    let out = std::env::temp_dir().join("gnb_qos_trace.csv");
    let mut writer = CsvTraceWriter::create(&out)?;
    let mut sim = Simulation::new(spec, RunOptions { trace_every: 100, ..RunOptions::default() })?;
    sim.run_to_end(Some(&mut writer))?;
    writer.finish()?;

    let report = sim.report();
    println!("trace written to {}", out.display());
    for c in report.checks.iter().filter(|c| c.status != CheckStatus::NotApplicable) {
        println!("flow {} {:>16}: {:?} (max {:.1} of {:.1})", c.flow, c.check, c.status, c.observed_max.unwrap_or(0.0), c.bound.unwrap_or(0.0));
    }
    Ok(())
}
