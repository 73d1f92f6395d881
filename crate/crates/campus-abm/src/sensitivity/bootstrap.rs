//! Percentile bootstrap confidence intervals.

use rand::prelude::*;

/// Percentile bootstrap: resamples the data with replacement `resamples`
/// times, recomputes the statistic, and returns the central `confidence`
/// interval of the recomputed values (the [2.5%, 97.5%] percentiles at 0.95).
pub fn bootstrap_ci<T, F, R>(
    samples: &[T],
    statistic: F,
    resamples: usize,
    confidence: f64,
    rng: &mut R,
) -> (f64, f64)
where
    T: Copy,
    F: Fn(&[T]) -> f64,
    R: Rng,
{
    assert!(!samples.is_empty(), "bootstrap needs data");
    assert!(resamples >= 2, "bootstrap needs at least two resamples");
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must lie in (0, 1)"
    );
    let n = samples.len();
    let mut resample = vec![samples[0]; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in resample.iter_mut() {
            *slot = samples[rng.random_range(0..n)];
        }
        stats.push(statistic(&resample));
    }
    percentile_interval(&stats, confidence)
}

/// Central interval of a sample by linearly interpolated quantiles.
pub(crate) fn percentile_interval(values: &[f64], confidence: f64) -> (f64, f64) {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - confidence) / 2.0;
    (quantile(&sorted, alpha), quantile(&sorted, 1.0 - alpha))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let below = position.floor() as usize;
    let above = position.ceil() as usize;
    if below == above {
        sorted[below]
    } else {
        let weight = position - below as f64;
        sorted[below] * (1.0 - weight) + sorted[above] * weight
    }
}
