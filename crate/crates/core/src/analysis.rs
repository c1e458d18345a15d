//! Small statistics helpers for post-run analysis of traces.

/// Sample autocorrelation of `series` at `lag`, normalized by the lag-0 variance.
pub fn autocorrelation(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    if lag >= n {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = series[..n - lag]
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    cov / var
}

/// Lag in `1..=max_lag` with the highest autocorrelation after the
/// autocorrelation first turns negative. `None` when it never does.
pub fn dominant_period(series: &[f64], max_lag: usize) -> Option<(usize, f64)> {
    let max_lag = max_lag.min(series.len().saturating_sub(1));
    let acf: Vec<f64> = (0..=max_lag).map(|l| autocorrelation(series, l)).collect();
    let first_negative = acf.iter().position(|&r| r < 0.0)?;
    acf.iter()
        .enumerate()
        .skip(first_negative)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(lag, &r)| (lag, r))
}
