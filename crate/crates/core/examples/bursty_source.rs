//! Draws from the truncated-Poisson bursty source and compares the empirical
//! distribution with its mean `eta * lambda`.

use gnb_qos::arrivals::{sample_bursty, stream_rng, BurstySourceSpec};

fn main() {
    let draws = 100_000;
    for spec in [
        BurstySourceSpec { eta: 1, lambda: 10.0, nu: 300 },
        BurstySourceSpec { eta: 10, lambda: 1.0, nu: 30 },
    ] {
        let mut rng = stream_rng(1, 1);
        let samples: Vec<u64> = (0..draws).map(|_| sample_bursty(&spec, &mut rng)).collect();
        let mean = samples.iter().sum::<u64>() as f64 / draws as f64;
        let var = samples.iter().map(|&a| (a as f64 - mean).powi(2)).sum::<f64>() / draws as f64;
        let zeros = samples.iter().filter(|&&a| a == 0).count() as f64 / draws as f64;
        println!(
            "eta={:2} lambda={:4} nu={:3}: mean {mean:6.3} (expected {:5.1}), variance {var:7.2}, P(A=0) {zeros:.4}, A^max {}",
            spec.eta,
            spec.lambda,
            spec.nu,
            spec.eta as f64 * spec.lambda,
            spec.a_max()
        );
    }
}
