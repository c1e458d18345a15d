//! Closed-loop AIMD sources under growing feedback delay, with the dominant
//! period of the first flow's arrivals while both flows are present.

use gnb_qos::analysis::dominant_period;
use gnb_qos::presets::{closed_loop, FIRST_FLOW_LEAVE, SECOND_FLOW_JOIN};
use gnb_qos::{PolicyKind, RunOptions, Simulation, SlotTrace};

fn main() {
    for d in [0, 50, 500] {
        let mut sim = Simulation::new(closed_loop(PolicyKind::PiHat, d, 1), RunOptions::default()).unwrap();
        let mut traces: Vec<SlotTrace> = Vec::new();
        sim.run_to_end(Some(&mut traces)).unwrap();
        let arrivals: Vec<f64> = traces
            .iter()
            .filter(|t| (SECOND_FLOW_JOIN..FIRST_FLOW_LEAVE).contains(&t.t))
            .map(|t| t.flows.iter().find(|f| f.id == 0).map_or(0.0, |f| f.a_t as f64))
            .collect();
        let r = sim.report();
        let period = match dominant_period(&arrivals, 3_000) {
            Some((lag, acf)) => format!("period {lag} slots (acf {acf:.2})"),
            None => "no period".into(),
        };
        println!("d={d:3}: drop rate {:6.2}, {period}", r.weighted_actual_drop_rate);
    }
}
