//! Closed-form queue-length and worst-case-delay bounds.
//!
//! For a flow with guarantee `alpha`, weight `w`, parameters `V` and `zeta`,
//! arrival ceiling `A^max` and a channel with `S^min <= S(t) <= S^max`:
//!
//! ```text
//! Q          <= V*w + A^max
//! Z          <= V*w/zeta + zeta*alpha*S^max
//! zeta*Z + Q <= V*w + zeta^2*alpha*S^max + A^max
//! Y          <= n*(V + zeta^2*S^max + max_j A^max_j) + (n+1)*S^max
//! delay (max-weight, arrival-aware drops)
//!            <= S^max/S^min + (1 + 1/zeta^2)*V*w/(alpha*S^min) + A^max/(alpha*S^min)
//! delay (static shares)
//!            <= 1 + V*w/(alpha*S^min) + A^max/(alpha*S^min)
//! ```
//!
//! All bounds are exact inequalities and are compared against simulator
//! state with no tolerance.

use serde::{Deserialize, Serialize};

use crate::model::FlowConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundError {
    #[error("undefined bound: {0}")]
    UndefinedBound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub q_bound: f64,
    pub z_bound: f64,
    pub qz_bound: f64,
    pub y_bound: f64,
    /// `None` when `S^min = 0` or `alpha = 0`.
    pub delay_bound_pi_hat: Option<f64>,
    pub delay_bound_pi_static: Option<f64>,
}

pub fn q_bound(v: f64, w: f64, a_max: u64) -> f64 {
    v * w + a_max as f64
}

pub fn z_bound(v: f64, w: f64, zeta: f64, alpha: f64, s_max: u64) -> f64 {
    v * w / zeta + zeta * alpha * s_max as f64
}

pub fn qz_bound(v: f64, w: f64, zeta: f64, alpha: f64, s_max: u64, a_max: u64) -> f64 {
    v * w + zeta * zeta * alpha * s_max as f64 + a_max as f64
}

pub fn y_bound(n: usize, v: f64, zeta: f64, s_max: u64, max_a_max: u64) -> f64 {
    let n = n as f64;
    let s_max = s_max as f64;
    n * (v + zeta * zeta * s_max + max_a_max as f64) + (n + 1.0) * s_max
}

fn delay_denominator(alpha: f64, s_min: u64) -> Result<f64, BoundError> {
    let denom = alpha * s_min as f64;
    if denom > 0.0 {
        Ok(denom)
    } else {
        Err(BoundError::UndefinedBound(format!(
            "delay bound needs alpha*S^min > 0 (alpha={alpha}, S^min={s_min})"
        )))
    }
}

/// Worst-case delay in slots under max-weight allocation with arrival-aware drops.
pub fn delay_bound_pi_hat(config: &FlowConfig, s_max: u64, s_min: u64, a_max: u64) -> Result<f64, BoundError> {
    let denom = delay_denominator(config.alpha, s_min)?;
    let vw = config.threshold();
    let zeta = config.zeta;
    Ok(s_max as f64 / s_min as f64 + (1.0 + 1.0 / (zeta * zeta)) * vw / denom + a_max as f64 / denom)
}

/// Worst-case delay in slots under static shares.
pub fn delay_bound_pi_static(config: &FlowConfig, s_min: u64, a_max: u64) -> Result<f64, BoundError> {
    let denom = delay_denominator(config.alpha, s_min)?;
    Ok(1.0 + config.threshold() / denom + a_max as f64 / denom)
}

/// Every bound for one flow in a system of `n` flows.
pub fn compute_bounds(
    config: &FlowConfig,
    n: usize,
    s_max: u64,
    s_min: u64,
    a_max: Option<u64>,
    max_a_max_over_flows: Option<u64>,
) -> Result<BoundSet, BoundError> {
    let a_max = a_max.ok_or_else(|| BoundError::UndefinedBound(format!("flow {}: a_max unknown", config.id)))?;
    let max_a = max_a_max_over_flows
        .ok_or_else(|| BoundError::UndefinedBound("some flow has an unknown a_max".into()))?;
    let (v, w, zeta, alpha) = (config.v_param, config.weight, config.zeta, config.alpha);
    Ok(BoundSet {
        q_bound: q_bound(v, w, a_max),
        z_bound: z_bound(v, w, zeta, alpha, s_max),
        qz_bound: qz_bound(v, w, zeta, alpha, s_max, a_max),
        y_bound: y_bound(n, v, zeta, s_max, max_a),
        delay_bound_pi_hat: delay_bound_pi_hat(config, s_max, s_min, a_max).ok(),
        delay_bound_pi_static: delay_bound_pi_static(config, s_min, a_max).ok(),
    })
}

/// Constants `(C1, C2)` of the drift-plus-penalty bound. Each flow is given
/// as `(A^max, D^max)`.
pub fn drift_constants(flows: &[(Option<u64>, Option<u64>)], s_max: u64) -> Result<(f64, f64), BoundError> {
    let s = s_max as f64;
    let mut c1 = flows.len() as f64 * s * s;
    let mut c2 = 0.0;
    for (i, &(a, d)) in flows.iter().enumerate() {
        let (Some(a), Some(d)) = (a, d) else {
            return Err(BoundError::UndefinedBound(format!("flow #{i} lacks A^max or D^max")));
        };
        let (a, d) = (a as f64, d as f64);
        c1 += (a + s + d).powi(2) / 2.0;
        c2 += (s + d).powi(2);
    }
    Ok((c1, c2))
}
