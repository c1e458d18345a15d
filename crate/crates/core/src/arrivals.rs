//! Packet-arrival generators and the delayed ACK/NACK feedback channel.
//!
//! Open-loop flows draw i.i.d. bursty counts `eta * min(K, nu)` with
//! `K ~ Poisson(lambda)`: the mass the Poisson law puts above `nu - 1` is
//! lumped onto `nu`, which is exactly the truncated pmf. Closed-loop flows
//! draw unbounded Poisson counts whose mean follows an AIMD law driven by
//! feedback that arrives a fixed number of slots late.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Generator used everywhere in the simulator.
pub type SimRng = ChaCha8Rng;

/// Additive increase per acknowledged packet.
pub const AIMD_INCREASE: f64 = 0.05;

/// Independent reproducible stream `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Truncated-Poisson bursty source `(eta, lambda, nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstySourceSpec {
    /// Packets per burst.
    pub eta: u64,
    /// Poisson mean of the burst count.
    pub lambda: f64,
    /// Maximum bursts per slot.
    pub nu: u64,
}

impl BurstySourceSpec {
    pub fn a_max(&self) -> u64 {
        self.eta * self.nu
    }
}

/// Unbounded Poisson draw with mean `lambda`. A nonpositive mean yields 0.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("finite positive poisson mean");
    dist.sample(rng) as u64
}

/// One draw from the bursty source: `eta * k` with `k` truncated-Poisson on `0..=nu`.
pub fn sample_bursty<R: Rng + ?Sized>(spec: &BurstySourceSpec, rng: &mut R) -> u64 {
    spec.eta * sample_poisson(spec.lambda, rng).min(spec.nu)
}

/// New AIMD mean after receiving `acks` and `nacks` in one slot.
pub fn aimd_step(lambda: f64, acks: u64, nacks: u64) -> f64 {
    let halvings = i32::try_from(nacks).unwrap_or(i32::MAX);
    let next = (lambda + AIMD_INCREASE * acks as f64) * 0.5f64.powi(halvings);
    next.max(1.0)
}

/// FIFO lossless channel delivering each message exactly `delay` slots after it was sent.
#[derive(Debug, Clone, Default)]
pub struct FeedbackChannel {
    delay: u64,
    in_flight: VecDeque<(u64, u64, u64)>,
}

impl FeedbackChannel {
    pub fn new(delay: u64) -> Self {
        FeedbackChannel {
            delay,
            in_flight: VecDeque::new(),
        }
    }

    pub fn delay(&self) -> u64 {
        self.delay
    }

    pub fn push(&mut self, t: u64, acks: u64, nacks: u64) {
        debug_assert!(self.in_flight.back().is_none_or(|&(due, _, _)| due <= t + self.delay));
        self.in_flight.push_back((t + self.delay, acks, nacks));
    }

    /// Sums every message due at or before slot `t`; `(0, 0)` when nothing is due.
    pub fn pop(&mut self, t: u64) -> (u64, u64) {
        let mut out = (0, 0);
        while let Some(&(due, a, n)) = self.in_flight.front() {
            if due > t {
                break;
            }
            out.0 += a;
            out.1 += n;
            self.in_flight.pop_front();
        }
        out
    }

    /// ACK and NACK counts still travelling.
    pub fn pending(&self) -> (u64, u64) {
        self.in_flight.iter().fold((0, 0), |acc, &(_, a, n)| (acc.0 + a, acc.1 + n))
    }

    pub fn clear(&mut self) {
        self.in_flight.clear();
    }
}

/// Closed-loop source: current AIMD mean plus the feedback still in flight.
#[derive(Debug, Clone)]
pub struct AimdSourceState {
    pub lambda: f64,
    pub pending_feedback: FeedbackChannel,
}

impl AimdSourceState {
    pub fn new(delay: u64) -> Self {
        AimdSourceState {
            lambda: 1.0,
            pending_feedback: FeedbackChannel::new(delay),
        }
    }

    /// Applies the AIMD law to the given feedback counts.
    pub fn apply(&mut self, acks: u64, nacks: u64) {
        self.lambda = aimd_step(self.lambda, acks, nacks);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_rate_never_arrives() {
        let mut rng = stream_rng(3, 0);
        let spec = BurstySourceSpec { eta: 1, lambda: 1e-12, nu: 300 };
        assert!((0..10_000).all(|_| sample_bursty(&spec, &mut rng) == 0));
        let zero = BurstySourceSpec { lambda: 0.0, ..spec };
        assert_eq!(sample_bursty(&zero, &mut rng), 0);
    }

    #[test]
    fn bursty_support_is_multiples_of_eta() {
        let mut rng = stream_rng(4, 0);
        let spec = BurstySourceSpec { eta: 5, lambda: 2.0, nu: 3 };
        let mut seen = [false; 4];
        for _ in 0..20_000 {
            let a = sample_bursty(&spec, &mut rng);
            assert!(a.is_multiple_of(5) && a <= 15, "{a}");
            seen[(a / 5) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn aimd_examples() {
        assert_eq!(aimd_step(1.0, 0, 0), 1.0);
        assert_eq!(aimd_step(10.0, 20, 0), 11.0);
        assert_eq!(aimd_step(40.0, 0, 2), 10.0);
        assert_eq!(aimd_step(3.0, 0, 5), 1.0);
        assert_eq!(aimd_step(1e9, 0, u64::MAX), 1.0);
    }

    #[test]
    fn zero_delay_feedback_is_immediate() {
        let mut ch = FeedbackChannel::new(0);
        ch.push(7, 3, 1);
        assert_eq!(ch.pop(7), (3, 1));
        assert_eq!(ch.pop(8), (0, 0));
    }

    #[test]
    fn delayed_feedback_arrives_exactly_on_time() {
        let mut ch = FeedbackChannel::new(50);
        ch.push(100, 5, 0);
        assert_eq!(ch.pop(149), (0, 0));
        assert_eq!(ch.pop(150), (5, 0));
        assert_eq!(ch.pending(), (0, 0));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = stream_rng(9, 2);
        let mut b = stream_rng(9, 2);
        let mut c = stream_rng(9, 3);
        let xs: Vec<u64> = (0..100).map(|_| sample_poisson(20.0, &mut a)).collect();
        let ys: Vec<u64> = (0..100).map(|_| sample_poisson(20.0, &mut b)).collect();
        let zs: Vec<u64> = (0..100).map(|_| sample_poisson(20.0, &mut c)).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    /// Truncated pmf by direct summation: Poisson mass on `0..nu`, the rest on `nu`.
    fn truncated_pmf(lambda: f64, nu: u64) -> Vec<f64> {
        let mut pmf = Vec::with_capacity(nu as usize + 1);
        let mut log_p = -lambda;
        for k in 0..nu {
            if k > 0 {
                log_p += lambda.ln() - (k as f64).ln();
            }
            pmf.push(log_p.exp());
        }
        let head: f64 = pmf.iter().sum();
        pmf.push((1.0 - head).max(0.0));
        pmf
    }

    #[test]
    fn bursty_matches_truncated_pmf() {
        for (seed, spec) in [
            (11, BurstySourceSpec { eta: 1, lambda: 10.0, nu: 300 }),
            (12, BurstySourceSpec { eta: 10, lambda: 3.0, nu: 4 }),
        ] {
            let mut rng = stream_rng(seed, 1);
            let draws = 1_000_000;
            let mut counts = vec![0u64; spec.nu as usize + 1];
            for _ in 0..draws {
                counts[(sample_bursty(&spec, &mut rng) / spec.eta) as usize] += 1;
            }
            let pmf = truncated_pmf(spec.lambda, spec.nu);
            let tv: f64 = 0.5 * pmf.iter().zip(&counts).map(|(p, &c)| (p - c as f64 / draws as f64).abs()).sum::<f64>();
            assert!(tv < 0.005, "{spec:?}: tv {tv}");
        }
    }

    #[test]
    fn bursty_mean_is_eta_lambda() {
        let mut rng = stream_rng(13, 1);
        let spec = BurstySourceSpec { eta: 1, lambda: 10.0, nu: 300 };
        let n = 200_000;
        let mean = (0..n).map(|_| sample_bursty(&spec, &mut rng)).sum::<u64>() as f64 / n as f64;
        assert!((mean - 10.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn poisson_moments() {
        let mut rng = stream_rng(14, 1);
        let n = 200_000;
        let mean1 = (0..n).map(|_| sample_poisson(1.0, &mut rng)).sum::<u64>() as f64 / n as f64;
        assert!((mean1 - 1.0).abs() < 0.01, "{mean1}");
        let xs: Vec<f64> = (0..n).map(|_| sample_poisson(20.0, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / mean - 1.0).abs() < 0.02, "{mean} {var}");
    }
}
