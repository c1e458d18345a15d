//! Walks an AIMD source through delayed ACK/NACK feedback by hand.

use gnb_qos::arrivals::{aimd_step, FeedbackChannel};

fn main() {
    let delay = 3;
    let mut channel = FeedbackChannel::new(delay);
    let mut lambda = 1.0;
    for t in 1..=12u64 {
        let (acks, nacks) = channel.pop(t);
        lambda = aimd_step(lambda, acks, nacks);
        // Pretend the base station serves 40 packets and drops once at slot 6.
        let nack = u64::from(t == 6);
        channel.push(t, 40, nack);
        println!("slot {t:2}: received ({acks:2} acks, {nacks} nacks) -> lambda {lambda:6.2}");
    }
}
