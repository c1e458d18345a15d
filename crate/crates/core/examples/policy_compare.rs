//! Fixed-magnitude against arrival-aware drops on an overloaded pair of flows.

use gnb_qos::presets::{table_row, TableRow, V_GRID};
use gnb_qos::{run, PolicyKind, RunOptions};

fn main() {
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10}", "V", "pi_bar D", "pi_hat D", "pi_bar drop", "pi_hat drop", "Q1 hat", "Q2 hat");
    for v in V_GRID {
        let bar = run(&table_row(TableRow::Two, PolicyKind::PiBar, v, 1.0, 1), RunOptions::default(), None).unwrap();
        let hat = run(&table_row(TableRow::Two, PolicyKind::PiHat, v, 1.0, 1), RunOptions::default(), None).unwrap();
        println!(
            "{v:>6} {:>12.2} {:>12.2} {:>12.2} {:>12.2} {:>10.1} {:>10.1}",
            bar.weighted_drop_decision_rate,
            hat.weighted_drop_decision_rate,
            bar.weighted_actual_drop_rate,
            hat.weighted_actual_drop_rate,
            hat.flows[0].queue_mean,
            hat.flows[1].queue_mean
        );
    }
}
