//! One slot of decisions from each policy on the same state, with the
//! exhaustive-search minimum of the drift objective for comparison.

use gnb_qos::model::{FlowConfig, SourceSpec};
use gnb_qos::policies::{drift_objective, oracle_min_drift, step_policy, FlowView, PolicyInput};
use gnb_qos::PolicyKind;

fn config(id: u32, alpha: f64, v: f64) -> FlowConfig {
    FlowConfig {
        id,
        alpha,
        weight: 1.0,
        zeta: 1.0,
        v_param: v,
        drop_cap: Some(6),
        a_max: None,
        source: SourceSpec::Constant { count: 4 },
        join_slot: 1,
        leave_slot: None,
    }
}

fn main() {
    let configs = [config(0, 0.25, 10.0), config(1, 0.5, 30.0), config(2, 0.25, 5.0)];
    let state = [(12, 1.5, 0.0, 4), (20, 0.0, 2.0, 6), (3, 0.0, 0.5, 2)];
    let flows = configs
        .iter()
        .zip(state)
        .map(|(c, (q, y, z, a))| FlowView { config: c, q, y, z, a_t: Some(a) })
        .collect();
    let input = PolicyInput { s_t: 12, flows };

    for kind in [PolicyKind::PiBar, PolicyKind::PiHat, PolicyKind::PiStatic] {
        let out = step_policy(kind, &input).expect("complete state");
        let moves: Vec<String> = out.decisions.iter().map(|d| format!("f{}: S={} D={}", d.id, d.s_alloc, d.d_drop)).collect();
        println!("{:9}  {}  objective {}", kind.as_str(), moves.join(", "), drift_objective(&input, &out));
    }
    let (best, value) = oracle_min_drift(&input, &[6, 6, 6]).expect("small instance");
    let moves: Vec<String> = best.decisions.iter().map(|d| format!("f{}: S={} D={}", d.id, d.s_alloc, d.d_drop)).collect();
    println!("{:9}  {}  objective {value}", "oracle", moves.join(", "));
}
