//! Closed-form queue and delay bounds for a flow under a range of `V` and `zeta`.

use gnb_qos::arrivals::BurstySourceSpec;
use gnb_qos::bounds::compute_bounds;
use gnb_qos::model::{FlowConfig, SourceSpec};

fn main() {
    println!("{:>6} {:>5} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10}", "V", "zeta", "Q", "Z", "Q+zZ", "Y", "delay_hat", "delay_st");
    for v in [100.0, 1000.0] {
        for zeta in [1.0, 6.0, 31.0] {
            let flow = FlowConfig {
                id: 0,
                alpha: 0.2,
                weight: 1.0,
                zeta,
                v_param: v,
                drop_cap: None,
                a_max: None,
                source: SourceSpec::Bursty(BurstySourceSpec { eta: 1, lambda: 10.0, nu: 300 }),
                join_slot: 1,
                leave_slot: None,
            };
            let b = compute_bounds(&flow, 2, 50, 50, Some(300), Some(300)).expect("bounded arrivals");
            println!(
                "{v:>6} {zeta:>5} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>10.1} {:>10.1}",
                b.q_bound,
                b.z_bound,
                b.qz_bound,
                b.y_bound,
                b.delay_bound_pi_hat.unwrap(),
                b.delay_bound_pi_static.unwrap()
            );
        }
    }
}
