//! Discrete distribution kernels: PMF, CDF and seeded sampling for the four
//! families the fitting stage can produce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// A fitted discrete distribution.
///
/// Supports: geometric on `{1, 2, ...}` (trial count of the first success),
/// discrete uniform on `{1, ..., n}`, negative binomial on `{0, 1, ...}`
/// (failures before the `c`-th success), Poisson on `{0, 1, ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FittedDistribution {
    Geometric { p: f64 },
    DiscreteUniform { n: u64 },
    NegativeBinomial { c: f64, p: f64 },
    Poisson { lambda: f64 },
}

impl FittedDistribution {
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("geometric needs p in (0,1], got {p}")));
        }
        Ok(FittedDistribution::Geometric { p })
    }

    pub fn discrete_uniform(n: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("discrete uniform needs n >= 1"));
        }
        Ok(FittedDistribution::DiscreteUniform { n })
    }

    pub fn negative_binomial(c: f64, p: f64) -> Result<Self> {
        if !(c > 0.0) || !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!(
                "negative binomial needs c > 0 and p in (0,1), got c={c} p={p}"
            )));
        }
        Ok(FittedDistribution::NegativeBinomial { c, p })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("poisson needs lambda > 0, got {lambda}")));
        }
        Ok(FittedDistribution::Poisson { lambda })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            FittedDistribution::Geometric { .. } => "geometric",
            FittedDistribution::DiscreteUniform { .. } => "discrete-uniform",
            FittedDistribution::NegativeBinomial { .. } => "negative-binomial",
            FittedDistribution::Poisson { .. } => "poisson",
        }
    }

    pub fn support_min(&self) -> i64 {
        match self {
            FittedDistribution::Geometric { .. } | FittedDistribution::DiscreteUniform { .. } => 1,
            _ => 0,
        }
    }

    /// Upper end of the support, `None` when unbounded.
    pub fn support_max(&self) -> Option<i64> {
        match self {
            FittedDistribution::DiscreteUniform { n } => Some(*n as i64),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FittedDistribution::Geometric { p } => 1.0 / p,
            FittedDistribution::DiscreteUniform { n } => (n as f64 + 1.0) / 2.0,
            FittedDistribution::NegativeBinomial { c, p } => c * (1.0 - p) / p,
            FittedDistribution::Poisson { lambda } => lambda,
        }
    }

    /// Probability mass at `k`; zero outside the support.
    pub fn pmf(&self, k: i64) -> f64 {
        match *self {
            FittedDistribution::Geometric { p } => {
                if k < 1 {
                    0.0
                } else {
                    (1.0 - p).powi((k - 1) as i32) * p
                }
            }
            FittedDistribution::DiscreteUniform { n } => {
                if k >= 1 && k <= n as i64 {
                    1.0 / n as f64
                } else {
                    0.0
                }
            }
            FittedDistribution::NegativeBinomial { c, p } => {
                if k < 0 {
                    0.0
                } else {
                    // C(k+c-1, k) p^c (1-p)^k via log-gamma for non-integral c.
                    let kf = k as f64;
                    let ln = ln_gamma(kf + c) - ln_gamma(kf + 1.0) - ln_gamma(c)
                        + c * p.ln()
                        + kf * (1.0 - p).ln();
                    ln.exp()
                }
            }
            FittedDistribution::Poisson { lambda } => {
                if k < 0 {
                    0.0
                } else if k <= 4096 {
                    // Running product is exact enough to keep the pmf and the
                    // cdf recurrence mutually consistent.
                    let mut t = (-lambda).exp();
                    for j in 1..=k {
                        t *= lambda / j as f64;
                    }
                    t
                } else {
                    let kf = k as f64;
                    (kf * lambda.ln() - lambda - ln_gamma(kf + 1.0)).exp()
                }
            }
        }
    }

    /// `P(X <= k)`.
    pub fn cdf(&self, k: i64) -> f64 {
        match *self {
            FittedDistribution::Geometric { p } => {
                if k < 1 {
                    0.0
                } else {
                    1.0 - (1.0 - p).powi(k as i32)
                }
            }
            FittedDistribution::DiscreteUniform { n } => {
                if k < 1 {
                    0.0
                } else {
                    (k as f64 / n as f64).min(1.0)
                }
            }
            FittedDistribution::NegativeBinomial { c, p } => {
                if k < 0 {
                    return 0.0;
                }
                // Running-sum recurrence: pmf(j+1) = pmf(j) * (j+c)/(j+1) * (1-p).
                let mut t = (c * p.ln()).exp();
                let mut acc = t;
                for j in 0..k {
                    let jf = j as f64;
                    t *= (jf + c) / (jf + 1.0) * (1.0 - p);
                    acc += t;
                }
                acc.min(1.0)
            }
            FittedDistribution::Poisson { lambda } => {
                if k < 0 {
                    return 0.0;
                }
                let mut t = (-lambda).exp();
                let mut acc = t;
                for j in 1..=k {
                    t *= lambda / j as f64;
                    acc += t;
                }
                acc.min(1.0)
            }
        }
    }

    /// Draw one value.
    ///
    /// Geometric uses inversion `ceil(ln U / ln(1-p))`; discrete uniform uses
    /// `floor(nU) + 1`; Poisson uses sequential search from the running
    /// product regardless of lambda; negative binomial sums rounded-up
    /// geometric components when `c` is integral and otherwise draws a
    /// gamma-Poisson mixture from the same stream.
    pub fn sample(&self, rng: &mut CounterRng) -> i64 {
        match *self {
            FittedDistribution::Geometric { p } => sample_geometric(rng, p),
            FittedDistribution::DiscreteUniform { n } => {
                (n as f64 * rng.uniform()).floor() as i64 + 1
            }
            FittedDistribution::NegativeBinomial { c, p } => {
                if c.fract() == 0.0 && c <= 64.0 {
                    let rounds = c as i64;
                    (0..rounds).map(|_| sample_geometric(rng, p) - 1).sum()
                } else {
                    // X | L ~ Poisson(L), L ~ Gamma(c, (1-p)/p) marginalizes
                    // to the negative binomial.
                    let scale = (1.0 - p) / p;
                    let lambda = sample_gamma(rng, c) * scale;
                    sample_poisson(rng, lambda)
                }
            }
            FittedDistribution::Poisson { lambda } => sample_poisson(rng, lambda),
        }
    }
}

fn sample_geometric(rng: &mut CounterRng, p: f64) -> i64 {
    if p >= 1.0 {
        rng.next_u64(); // keep the stream advancing uniformly
        return 1;
    }
    let u = rng.uniform_open();
    let k = (u.ln() / (1.0 - p).ln()).ceil();
    (k as i64).max(1)
}

fn sample_poisson(rng: &mut CounterRng, lambda: f64) -> i64 {
    debug_assert!(lambda >= 0.0);
    if lambda == 0.0 {
        return 0;
    }
    let u = rng.uniform();
    let mut t = (-lambda).exp();
    let mut acc = t;
    let mut k = 0i64;
    // Hard stop far into the tail so float residue cannot spin the loop.
    let cap = (lambda + 40.0 * lambda.sqrt() + 50.0) as i64;
    while u > acc && k < cap {
        k += 1;
        t *= lambda / k as f64;
        acc += t;
    }
    k
}

/// Marsaglia-Tsang gamma sampler with unit scale.
fn sample_gamma(rng: &mut CounterRng, shape: f64) -> f64 {
    if shape < 1.0 {
        // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
        let u = rng.uniform_open();
        return sample_gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = sample_standard_normal(rng);
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u = rng.uniform_open();
        if u < 1.0 - 0.0331 * x.powi(4) {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

fn sample_standard_normal(rng: &mut CounterRng) -> f64 {
    // Box-Muller, cosine branch only: fixed two-uniform consumption.
    let u1 = rng.uniform_open();
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Lanczos log-gamma (g = 7, 9 terms), relative error around 1e-13.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_spot_values() {
        let g = FittedDistribution::geometric(0.5).unwrap();
        assert_eq!(g.pmf(1), 0.5);
        assert_eq!(g.pmf(0), 0.0);

        let du = FittedDistribution::discrete_uniform(10).unwrap();
        for k in 1..=10 {
            assert_eq!(du.pmf(k), 0.1);
        }
        assert_eq!(du.pmf(11), 0.0);

        let po = FittedDistribution::poisson(1.0).unwrap();
        assert_relative_eq!(po.pmf(0), (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(po.pmf(0), 0.3678794, max_relative = 1e-6);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(FittedDistribution::geometric(0.0).is_err());
        assert!(FittedDistribution::geometric(1.5).is_err());
        assert!(FittedDistribution::discrete_uniform(0).is_err());
        assert!(FittedDistribution::negative_binomial(0.0, 0.5).is_err());
        assert!(FittedDistribution::negative_binomial(2.0, 1.0).is_err());
        assert!(FittedDistribution::poisson(0.0).is_err());
    }

    #[test]
    fn cdf_is_cumulative_pmf() {
        let dists = [
            FittedDistribution::geometric(0.3).unwrap(),
            FittedDistribution::discrete_uniform(7).unwrap(),
            FittedDistribution::negative_binomial(2.5, 0.4).unwrap(),
            FittedDistribution::poisson(3.7).unwrap(),
        ];
        for d in dists {
            let mut acc = 0.0;
            for k in d.support_min()..=60 {
                acc += d.pmf(k);
                assert_relative_eq!(d.cdf(k), acc.min(1.0), max_relative = 1e-9);
            }
            assert_eq!(d.cdf(d.support_min() - 1), 0.0);
        }
    }

    #[test]
    fn geometric_sample_mean_matches_inverse_p() {
        let d = FittedDistribution::geometric(0.25).unwrap();
        let mut rng = CounterRng::new(11);
        let n = 1_000_000;
        let sum: i64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 4.0).abs() / 4.0 < 0.01, "mean {mean}");
    }

    #[test]
    fn degenerate_uniform_always_one() {
        let d = FittedDistribution::discrete_uniform(1).unwrap();
        let mut rng = CounterRng::new(5);
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng), 1);
        }
    }

    #[test]
    fn poisson_sample_variance_matches_lambda() {
        let d = FittedDistribution::poisson(2.0).unwrap();
        let mut rng = CounterRng::new(17);
        let n = 1_000_000usize;
        let xs: Vec<i64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<i64>() as f64 / n as f64;
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 2.0).abs() / 2.0 < 0.02, "var {var}");
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..20u32 {
            let fact: f64 = (1..n).map(f64::from).product::<f64>().max(1.0);
            assert_relative_eq!(ln_gamma(n as f64), fact.ln(), epsilon = 1e-11, max_relative = 1e-11);
        }
        // Gamma(0.5) = sqrt(pi); Gamma(0.3) from reflection.
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), max_relative = 1e-12);
        assert_relative_eq!(ln_gamma(0.3), 1.0957979948180752, max_relative = 1e-12);
    }
}
