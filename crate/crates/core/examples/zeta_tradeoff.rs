//! Larger `zeta` trades drops for delay: sweep it on the matched-load scenario.

use gnb_qos::presets::{table_row, TableRow, ZETA_GRID};
use gnb_qos::{run, PolicyKind, RunOptions};

fn main() {
    println!("{:>5} {:>10} {:>10} {:>9} {:>9}", "zeta", "served f1", "served f2", "max wait", "drops");
    for zeta in ZETA_GRID {
        let r = run(&table_row(TableRow::One, PolicyKind::PiHat, 1000.0, zeta, 1), RunOptions::default(), None)
            .expect("preset scenarios are valid");
        let max_wait = r.flows.iter().map(|f| f.wait.max).max().unwrap();
        println!(
            "{zeta:>5} {:>10.3} {:>10.3} {max_wait:>9} {:>9.4}",
            r.flows[0].served_rate, r.flows[1].served_rate, r.weighted_drop_decision_rate
        );
    }
}
