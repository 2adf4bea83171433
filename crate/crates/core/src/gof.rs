//! Goodness-of-fit machinery: sample normalization, Kolmogorov-Smirnov and
//! Anderson-Darling statistics, moment fitting of the candidate families, and
//! the acceptance cascade that picks the reported distribution.

use serde::{Deserialize, Serialize};

use crate::dist::FittedDistribution;
use crate::error::{Error, Result};

/// Significance levels with tabulated Kolmogorov critical factors c(alpha);
/// the critical value at sample size n is c(alpha) / sqrt(n).
pub const ALPHA_TABLE: [(f64, f64); 4] = [(0.01, 1.628), (0.02, 1.517), (0.05, 1.358), (0.10, 1.224)];

/// Default Anderson-Darling acceptance threshold (upper-tail, alpha = 0.05).
pub const DEFAULT_AD_CRITICAL: f64 = 2.492;

/// Candidate distribution families for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Geometric,
    DiscreteUniform,
    NegativeBinomial,
    Poisson,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Geometric,
        Family::DiscreteUniform,
        Family::NegativeBinomial,
        Family::Poisson,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Geometric => "geometric",
            Family::DiscreteUniform => "discrete-uniform",
            Family::NegativeBinomial => "negative-binomial",
            Family::Poisson => "poisson",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Family::Geometric),
            "discrete-uniform" => Ok(Family::DiscreteUniform),
            "negative-binomial" => Ok(Family::NegativeBinomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::invalid(format!("unknown family {other:?}"))),
        }
    }
}

/// Per-alpha accept/reject decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaDecision {
    pub alpha: f64,
    pub accepted: bool,
}

/// Outcome of testing one fitted candidate against the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub dist: FittedDistribution,
    pub d_n: f64,
    /// Anderson-Darling statistic; present once the cascade needed it.
    pub a_squared: Option<f64>,
    pub p_value: f64,
    pub decisions: Vec<AlphaDecision>,
    /// True when the KS test accepts at any configured significance level.
    pub accepted: bool,
    /// Asymptotic p-value is unreliable below five samples.
    pub small_n_warning: bool,
    /// A CDF value hit 0 or 1 inside the AD sum and was clamped.
    pub ad_clamped: bool,
}

/// Result of running the selection cascade over a candidate list.
#[derive(Debug, Clone)]
pub struct Selection {
    pub best: GofReport,
    /// Every candidate's report, in the order tried.
    pub reports: Vec<GofReport>,
    /// Families whose fit was infeasible on these samples, with the reason.
    pub infeasible: Vec<(Family, String)>,
    /// True when the winner was chosen by the AD fallback after every
    /// candidate failed KS at every level.
    pub via_ad: bool,
}

/// Bin raw Mbps readings onto the positive integer lattice.
///
/// Values are rounded to the nearest multiple of `bin_width` and clamped to a
/// minimum of 1 so that geometric candidacy (support starting at 1) is never
/// ruled out by a zero bin.
pub fn normalize(raw: &[f64], bin_width: f64) -> Result<Vec<i64>> {
    if raw.is_empty() {
        return Err(Error::invalid("cannot normalize an empty sample set"));
    }
    if !(bin_width > 0.0) {
        return Err(Error::invalid("bin width must be positive"));
    }
    Ok(raw.iter().map(|&x| ((x / bin_width).round() as i64).max(1)).collect())
}

/// Kolmogorov-Smirnov statistic `D_n = sup_x |F_n(x) - F(x)|`.
///
/// Both the empirical CDF and the reference are right-continuous steps with
/// jumps on the integers, so the supremum is attained at a distinct sample
/// value, comparing function values on one side and left limits on the other.
pub fn ks_statistic<F>(samples: &[i64], cdf: F) -> Result<f64>
where
    F: Fn(i64) -> f64,
{
    if samples.is_empty() {
        return Err(Error::invalid("KS statistic needs at least one sample"));
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable();
    let n = xs.len() as f64;

    let mut d = 0.0f64;
    let mut below = 0usize; // count of samples strictly below the current value
    let mut i = 0usize;
    while i < xs.len() {
        let v = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == v {
            j += 1;
        }
        let fn_left = below as f64 / n;
        let fn_at = j as f64 / n;
        let f_at = cdf(v);
        let f_left = cdf(v - 1);
        d = d.max((fn_at - f_at).abs()).max((fn_left - f_left).abs());
        below = j;
        i = j;
    }
    Ok(d)
}

/// Asymptotic Kolmogorov tail probability `Q(z) = 2 sum (-1)^{k-1} e^{-2k^2z^2}`,
/// evaluated through the numerically stable dual-series form.
pub fn kolmogorov_q(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        let t = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * z * z)).exp();
        let p = (2.0 * std::f64::consts::PI).sqrt() / z
            * (t + t.powi(9) + t.powi(25) + t.powi(49));
        (1.0 - p).clamp(0.0, 1.0)
    } else {
        let t = (-2.0 * z * z).exp();
        (2.0 * (t - t.powi(4) + t.powi(9))).clamp(0.0, 1.0)
    }
}

fn ks_p_value(d_n: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d_n)
}

/// KS hypothesis test of `samples` against a fitted distribution.
pub fn ks_test(samples: &[i64], dist: FittedDistribution) -> Result<GofReport> {
    let d_n = ks_statistic(samples, |k| dist.cdf(k))?;
    let n = samples.len();
    let sqrt_n = (n as f64).sqrt();
    let decisions: Vec<AlphaDecision> = ALPHA_TABLE
        .iter()
        .map(|&(alpha, c)| AlphaDecision { alpha, accepted: d_n <= c / sqrt_n })
        .collect();
    let accepted = decisions.iter().any(|d| d.accepted);
    Ok(GofReport {
        dist,
        d_n,
        a_squared: None,
        p_value: ks_p_value(d_n, n),
        decisions,
        accepted,
        small_n_warning: n < 5,
        ad_clamped: false,
    })
}

/// Anderson-Darling statistic `A^2 = -N - S` over ascending samples.
///
/// CDF values are clamped away from {0, 1} by 1e-12 before the logs; the
/// returned flag records whether clamping fired.
pub fn ad_statistic<F>(sorted: &[i64], cdf: F) -> Result<(f64, bool)>
where
    F: Fn(i64) -> f64,
{
    if sorted.is_empty() {
        return Err(Error::invalid("AD statistic needs at least one sample"));
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "samples must be sorted");
    const EPS: f64 = 1e-12;
    let n = sorted.len();
    let nf = n as f64;
    let mut clamped = false;
    let f: Vec<f64> = sorted
        .iter()
        .map(|&y| {
            let v = cdf(y);
            if v < EPS || v > 1.0 - EPS {
                clamped = true;
            }
            v.clamp(EPS, 1.0 - EPS)
        })
        .collect();
    let mut s = 0.0f64;
    for i in 1..=n {
        s += (2.0 * i as f64 - 1.0) / nf * (f[i - 1].ln() + (1.0 - f[n - i]).ln());
    }
    Ok((-nf - s, clamped))
}

/// Moment-based fit of one family.
pub fn fit(family: Family, samples: &[i64]) -> Result<FittedDistribution> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot fit an empty sample set"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    match family {
        Family::Geometric => {
            if mean < 1.0 {
                return Err(Error::InfeasibleSupport { mean });
            }
            FittedDistribution::geometric(1.0 / mean)
        }
        Family::DiscreteUniform => {
            let max = *samples.iter().max().unwrap();
            if max < 1 {
                return Err(Error::invalid("discrete uniform needs positive samples"));
            }
            FittedDistribution::discrete_uniform(max as u64)
        }
        Family::Poisson => FittedDistribution::poisson(mean),
        Family::NegativeBinomial => {
            let variance = samples.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
            if variance <= mean {
                return Err(Error::OverdispersionRequired { mean, variance });
            }
            FittedDistribution::negative_binomial(mean * mean / (variance - mean), mean / variance)
        }
    }
}

/// Fit every candidate, KS-rank them, and fall back to the AD gate when the
/// KS test rejects everything at every level.
pub fn select_distribution(
    samples: &[i64],
    candidates: &[Family],
    ad_critical: f64,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::invalid("need at least one candidate family"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();

    let mut reports = Vec::new();
    let mut infeasible = Vec::new();
    for &family in candidates {
        match fit(family, samples) {
            Ok(dist) => reports.push(ks_test(samples, dist)?),
            Err(e) => infeasible.push((family, e.to_string())),
        }
    }
    if reports.is_empty() {
        return Err(Error::NoAcceptableFit { reports });
    }

    // KS phase: the lowest-D candidate that passes at any level wins.
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| reports[a].d_n.total_cmp(&reports[b].d_n));
    if let Some(&win) = order.iter().find(|&&i| reports[i].accepted) {
        let best = reports[win].clone();
        return Ok(Selection { best, reports, infeasible, via_ad: false });
    }

    // AD phase: everything was KS-rejected; accept the lowest A-squared at or
    // below the configured critical value.
    for report in &mut reports {
        let (a2, clamped) = ad_statistic(&sorted, |k| report.dist.cdf(k))?;
        report.a_squared = Some(a2);
        report.ad_clamped = clamped;
    }
    let mut ad_order: Vec<usize> = (0..reports.len()).collect();
    ad_order.sort_by(|&a, &b| {
        reports[a].a_squared.unwrap().total_cmp(&reports[b].a_squared.unwrap())
    });
    let win = ad_order[0];
    if reports[win].a_squared.unwrap() <= ad_critical {
        let mut best = reports[win].clone();
        best.accepted = true;
        reports[win].accepted = true;
        return Ok(Selection { best, reports, infeasible, via_ad: true });
    }
    Err(Error::NoAcceptableFit { reports })
}

/// Location and shape statistics with population moment conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Lower-middle order statistic for even sample counts.
    pub median: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Mean, median, population standard deviation, skewness `m3 / m2^(3/2)` and
/// excess kurtosis `m4 / m2^2 - 3`.
pub fn moments(samples: &[f64]) -> Result<Moments> {
    if samples.len() < 2 {
        return Err(Error::invalid("moments need at least two samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::invalid("skewness and kurtosis undefined at zero variance"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let median = xs[(xs.len() - 1) / 2];
    Ok(Moments {
        mean,
        median,
        std: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}
