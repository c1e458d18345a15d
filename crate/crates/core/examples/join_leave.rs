//! A second flow joins and the first leaves; rates are averaged per epoch.

use gnb_qos::presets::join_leave;
use gnb_qos::{run, PolicyKind, RunOptions};

fn main() {
    for policy in [PolicyKind::PiHat, PolicyKind::PiStatic] {
        let r = run(&join_leave(policy, 1), RunOptions::default(), None).unwrap();
        println!("{policy}");
        for e in &r.epochs {
            let rates: Vec<String> = e
                .flows
                .iter()
                .map(|f| format!("f{} served {:5.2} dropped {:5.2}", f.id + 1, f.served_rate, f.actual_drop_rate))
                .collect();
            println!("  slots {:>6}..={:<6} {}", e.start, e.end, rates.join(" | "));
        }
    }
}
