//! Monte Carlo loss-rate prediction and value-at-risk reporting.
//!
//! Each iteration draws a throughput value `A` and an error value `E` from
//! the fitted distributions, converts them to MByte/s via the unit scale,
//! and evaluates the shortfall `B = V * (S - (A + E))` for the iteration's
//! elephant profile. Positive shortfalls are retained as predicted losses;
//! the loss rate is the retained fraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::FittedDistribution;
use crate::error::{Error, Result};
use crate::gof::{self, Moments};
use crate::rng::CounterRng;

/// Mbps bins convert to MByte/s through this factor by default.
pub const DEFAULT_UNIT_SCALE: f64 = 0.125;

/// Confidence levels reported by default.
pub const DEFAULT_CONFIDENCES: [f64; 3] = [0.90, 0.95, 0.99];

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

/// Iterations per RNG substream chunk. Fixed so that results are identical
/// for every worker count.
const CHUNK: u64 = 1 << 16;

/// One evaluated elephant class: a rate-equivalent size in MByte/s and a
/// volume count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElephantProfile {
    pub label: String,
    pub size_mbyte_s: f64,
    pub volume: f64,
}

impl ElephantProfile {
    pub fn new(label: &str, size_mbyte_s: f64, volume: f64) -> Self {
        ElephantProfile { label: label.to_string(), size_mbyte_s, volume }
    }
}

/// The four evaluated elephant classes, spanning the full link rate down to
/// the 10% elephant threshold.
pub fn default_profiles() -> Vec<ElephantProfile> {
    vec![
        ElephantProfile::new("large", 1.25, 100.0),
        ElephantProfile::new("normal-1", 0.75, 85.0),
        ElephantProfile::new("normal-2", 0.5, 65.0),
        ElephantProfile::new("small", 0.12, 45.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarRow {
    pub confidence: f64,
    pub parametric: f64,
    pub empirical: f64,
}

/// Outcome of a Monte Carlo prediction run.
///
/// The raw retained samples stay in memory for quantile queries but are not
/// serialized; the wire form carries the histogram and summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    pub iterations: u64,
    pub retained: u64,
    pub loss_rate: f64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub histogram: Histogram,
    pub var: Vec<VarRow>,
    pub seed: u64,
    pub profiles: Vec<ElephantProfile>,
    pub a_dist: FittedDistribution,
    pub e_dist: FittedDistribution,
    #[serde(skip)]
    pub samples: Vec<f64>,
    #[serde(skip)]
    pub std: Option<f64>,
}

impl RiskReport {
    /// Largest loss any profile can produce: max volume times max size.
    pub fn loss_bound(&self) -> f64 {
        loss_bound(&self.profiles)
    }
}

pub fn loss_bound(profiles: &[ElephantProfile]) -> f64 {
    let max_v = profiles.iter().map(|p| p.volume).fold(0.0, f64::max);
    let max_s = profiles.iter().map(|p| p.size_mbyte_s).fold(0.0, f64::max);
    max_v * max_s
}

/// Run the Monte Carlo shortfall prediction.
///
/// Iterations are sharded into fixed-size chunks, each driven by the
/// substream `(seed, chunk)`, and chunk results are merged in chunk order, so
/// the report is bit-identical for any worker count. Profiles are cycled in
/// iteration order.
pub fn predict_loss(
    profiles: &[ElephantProfile],
    a_dist: FittedDistribution,
    e_dist: FittedDistribution,
    iterations: u64,
    unit_scale: f64,
    seed: u64,
) -> Result<RiskReport> {
    if iterations < 1 {
        return Err(Error::invalid("need at least one iteration"));
    }
    if profiles.is_empty() {
        return Err(Error::invalid("need at least one elephant profile"));
    }
    if !(unit_scale > 0.0) {
        return Err(Error::invalid("unit scale must be positive"));
    }

    let n_chunks = iterations.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = CounterRng::substream(seed, chunk);
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(iterations);
            let mut retained = Vec::new();
            for i in start..end {
                let profile = &profiles[(i % profiles.len() as u64) as usize];
                let a = a_dist.sample(&mut rng) as f64 * unit_scale;
                let e = e_dist.sample(&mut rng) as f64 * unit_scale;
                let shortfall = profile.volume * (profile.size_mbyte_s - (a + e));
                if shortfall > 0.0 {
                    retained.push(shortfall);
                }
            }
            retained
        })
        .collect();

    // Merge preserves chunk order regardless of which worker ran what.
    let samples: Vec<f64> = chunks.into_iter().flatten().collect();
    let retained = samples.len() as u64;
    let bound = loss_bound(profiles);
    let histogram = build_histogram(&samples, bound, DEFAULT_HISTOGRAM_BINS);

    let stats = if samples.len() >= 2 { gof::moments(&samples).ok() } else { None };
    let mut report = RiskReport {
        iterations,
        retained,
        loss_rate: retained as f64 / iterations as f64,
        mean: stats.map(|m| m.mean),
        median: stats.map(|m| m.median),
        skewness: stats.map(|m| m.skewness),
        excess_kurtosis: stats.map(|m| m.excess_kurtosis),
        histogram,
        var: Vec::new(),
        seed,
        profiles: profiles.to_vec(),
        a_dist,
        e_dist,
        samples,
        std: stats.map(|m: Moments| m.std),
    };
    if report.retained > 0 {
        report.var = confidence_sweep(&report, &DEFAULT_CONFIDENCES)?;
    }
    Ok(report)
}

fn build_histogram(samples: &[f64], bound: f64, bins: usize) -> Histogram {
    let width = bound / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let mut idx = (x / width) as usize;
        if idx >= bins {
            idx = bins - 1; // samples exactly at the bound land in the last bin
        }
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

/// Inverse standard normal CDF (Acklam's rational approximation, absolute
/// error below 1e-8 over (0, 1)).
fn inv_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Normal-approximation VaR as a positive loss-tail magnitude:
/// `mean + inverse_normal(confidence) * std`.
pub fn var_parametric(mean: f64, std: f64, confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!("confidence must be in (0,1), got {confidence}")));
    }
    if std < 0.0 {
        return Err(Error::invalid("standard deviation must be nonnegative"));
    }
    if std == 0.0 {
        return Ok(mean);
    }
    Ok(mean + inv_normal_cdf(confidence) * std)
}

/// Alternative sign convention that reports the quantile offset about the
/// negated mean, with the confidence supplied as an exceedance probability:
/// `-mean + inverse_normal(1 - u) * std`.
pub fn var_parametric_mean_offset(mean: f64, std: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!("exceedance must be in (0,1), got {u}")));
    }
    if std < 0.0 {
        return Err(Error::invalid("standard deviation must be nonnegative"));
    }
    if std == 0.0 {
        return Ok(-mean);
    }
    Ok(-mean + inv_normal_cdf(1.0 - u) * std)
}

/// Empirical VaR: the smallest retained loss `x` with `F_hat(x) >= c`,
/// i.e. order statistic `ceil(c * n)`.
pub fn var_empirical(samples: &[f64], confidence: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoLosses);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!("confidence must be in (0,1), got {confidence}")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    // Absorb float residue when c * n is an exact integer (0.95 * 100 -> 95).
    let target = confidence * n as f64;
    let rank = (target - 1e-9).ceil().max(1.0) as usize;
    Ok(xs[rank.min(n) - 1])
}

/// Both VaR variants at each confidence level.
///
/// The parametric value is capped at the maximum producible loss so that no
/// reported figure exceeds what the profile set can lose; the empirical
/// quantile respects the bound by construction.
pub fn confidence_sweep(report: &RiskReport, confidences: &[f64]) -> Result<Vec<VarRow>> {
    if report.samples.is_empty() {
        return Err(Error::NoLosses);
    }
    let (mean, std) = match (report.mean, report.std) {
        (Some(m), Some(s)) => (m, s),
        _ => return Err(Error::NoLosses),
    };
    let bound = report.loss_bound();
    confidences
        .iter()
        .map(|&c| {
            Ok(VarRow {
                confidence: c,
                parametric: var_parametric(mean, std, c)?.min(bound),
                empirical: var_empirical(&report.samples, c)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn du(n: u64) -> FittedDistribution {
        FittedDistribution::discrete_uniform(n).unwrap()
    }

    #[test]
    fn shortfall_evaluation_single_profile() {
        // A = E = 1 bin with unit scale 0.55: A + E = 1.1 MByte/s,
        // B = 100 * (1.25 - 1.1) = 15 for every iteration.
        let profiles = vec![ElephantProfile::new("large", 1.25, 100.0)];
        let report = predict_loss(&profiles, du(1), du(1), 1000, 0.55, 9).unwrap();
        assert_eq!(report.retained, 1000);
        assert_eq!(report.loss_rate, 1.0);
        for &s in &report.samples {
            assert_relative_eq!(s, 15.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn no_shortfall_yields_empty_flagged_report() {
        // A alone already covers the size for every draw.
        let profiles = vec![ElephantProfile::new("tiny", 0.1, 10.0)];
        let report = predict_loss(&profiles, du(1), du(1), 5000, 0.125, 4).unwrap();
        assert_eq!(report.retained, 0);
        assert_eq!(report.loss_rate, 0.0);
        assert!(report.mean.is_none());
        assert!(report.var.is_empty());
        assert_eq!(report.histogram.counts.iter().sum::<u64>(), 0);
    }

    #[test]
    fn loss_rate_bookkeeping_is_exact() {
        let profiles = default_profiles();
        let a = du(10);
        let e = du(3);
        let report = predict_loss(&profiles, a, e, 100_000, 0.125, 21).unwrap();
        assert_eq!(report.loss_rate, report.retained as f64 / report.iterations as f64);
        assert_eq!(report.histogram.counts.iter().sum::<u64>(), report.retained);
        for &s in &report.samples {
            assert!(s > 0.0 && s <= report.loss_bound() + 1e-12);
        }
    }

    #[test]
    fn stochastically_larger_throughput_never_raises_loss_rate() {
        // floor(8u)+1 >= floor(5u)+1 pointwise, so with a shared seed the
        // retained set under the wider uniform is a subset.
        let profiles = default_profiles();
        let e = du(2);
        let low = predict_loss(&profiles, du(5), e, 200_000, 0.125, 7).unwrap();
        let high = predict_loss(&profiles, du(8), e, 200_000, 0.125, 7).unwrap();
        assert!(high.loss_rate <= low.loss_rate);
    }

    #[test]
    fn var_parametric_reference_values() {
        assert_relative_eq!(
            var_parametric(0.0, 1.0, 0.95).unwrap(),
            1.6448536269514722,
            epsilon = 1e-8
        );
        assert_eq!(var_parametric(50.0, 0.0, 0.42).unwrap(), 50.0);
        assert!(var_parametric(0.0, 1.0, 0.5).unwrap().abs() < 1e-9);
        assert!(var_parametric(0.0, 1.0, 0.0).is_err());
        assert!(var_parametric(0.0, 1.0, 1.0).is_err());
        // Printed-sign variant at u = 1 - c mirrors about the mean.
        assert_relative_eq!(
            var_parametric_mean_offset(10.0, 1.0, 0.05).unwrap(),
            -10.0 + 1.6448536269514722,
            epsilon = 1e-7
        );
    }

    #[test]
    fn var_empirical_order_statistics() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(var_empirical(&xs, 0.95).unwrap(), 95.0);
        assert_eq!(var_empirical(&xs, 0.999).unwrap(), 100.0);
        assert_eq!(var_empirical(&xs, 0.001).unwrap(), 1.0);
        let same = vec![7.5; 40];
        for &c in &[0.1, 0.5, 0.9, 0.99] {
            assert_eq!(var_empirical(&same, c).unwrap(), 7.5);
        }
        assert!(matches!(var_empirical(&[], 0.9), Err(Error::NoLosses)));
    }

    #[test]
    fn sweep_is_monotone_and_bounded() {
        let profiles = default_profiles();
        let report =
            predict_loss(&profiles, du(10), du(3), 200_000, 0.125, 33).unwrap();
        let rows = confidence_sweep(&report, &[0.90, 0.95, 0.99]).unwrap();
        assert_eq!(rows.len(), 3);
        let bound = report.loss_bound();
        assert_relative_eq!(bound, 125.0, max_relative = 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].empirical >= w[0].empirical);
        }
        for row in &rows {
            assert!(row.empirical <= bound);
            assert!(row.parametric <= bound);
        }
    }

    #[test]
    fn identical_for_any_worker_count() {
        let profiles = default_profiles();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                predict_loss(&profiles, du(10), du(3), 300_000, 0.125, 55).unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.retained, b.retained);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
