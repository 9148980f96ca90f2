//! Sufficient statistics, empirical distributions and the trend tests used
//! by the experiment drivers.

use crate::replica::Merge;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains NaN")]
    NotANumber,
}

/// Running mean and variance (Welford), mergeable across chunks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAcc {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance; zero with fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn se(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl Merge for MeanAcc {
    fn merge(&mut self, other: Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other;
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let w = other.count as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.count as f64 * w;
        self.count = n;
    }
}

/// Plain counter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Count(pub u64);

impl Merge for Count {
    fn merge(&mut self, other: Self) {
        self.0 += other.0;
    }
}

/// Sample values kept in replica order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Samples(pub Vec<f64>);

impl Merge for Samples {
    fn merge(&mut self, other: Self) {
        self.0.extend(other.0);
    }
}

/// Sorted sample with ECDF, type-7 quantiles and KS distance.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSummary {
    sorted: Vec<f64>,
}

impl EmpiricalSummary {
    pub fn new(mut values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if values.iter().any(|x| x.is_nan()) {
            return Err(StatsError::NotANumber);
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalSummary { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_i <= x} / N`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Type-7 quantile: linear interpolation between order statistics at
    /// `h = (N - 1)p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }

    /// Distribution-free standard error of the `p`-quantile: half the width
    /// of the order-statistic band `Np ± sqrt(Np(1-p))`.
    pub fn quantile_se(&self, p: f64) -> f64 {
        let n = self.sorted.len() as f64;
        let w = (n * p * (1.0 - p)).sqrt();
        let idx = |r: f64| (r.round().clamp(1.0, n) as usize) - 1;
        (self.sorted[idx(n * p + w)] - self.sorted[idx(n * p - w)]) / 2.0
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// `sup_x |F_N(x) - F(x)|`, with the left limit of `F` taken just below
    /// each sample point.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            d = d.max((j as f64 / n - cdf(x)).abs());
            d = d.max((cdf(x.next_down()) - i as f64 / n).abs());
            i = j;
        }
        d
    }
}

/// `ks_distance` on a possibly empty sample.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    Ok(EmpiricalSummary::new(values.to_vec())?.ks_distance(cdf))
}

/// Asymptotic one-sample KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    std_normal().sf(z)
}

/// One-sided sign test: `P(Bin(n, 1/2) >= successes)`.
pub fn sign_test_p(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    if successes == 0 {
        return 1.0;
    }
    Binomial::new(0.5, trials)
        .expect("valid binomial")
        .sf(successes - 1)
}

/// One-sided Welch test of `mean(a) > mean(b)`; returns `(t, p)`.
pub fn welch_greater(a: &MeanAcc, b: &MeanAcc) -> (f64, f64) {
    let va = a.variance() / a.count as f64;
    let vb = b.variance() / b.count as f64;
    let se = (va + vb).sqrt();
    let t = (a.mean - b.mean) / se;
    if !t.is_finite() {
        return (t, if a.mean > b.mean { 0.0 } else { 1.0 });
    }
    let df = (va + vb).powi(2) / (va * va / (a.count - 1) as f64 + vb * vb / (b.count - 1) as f64);
    let p = StudentsT::new(0.0, 1.0, df.max(1.0))
        .expect("valid t")
        .sf(t);
    (t, p)
}

/// One-sided test of `mean > 0` for paired differences; returns `(z, p)`.
pub fn mean_positive(d: &MeanAcc) -> (f64, f64) {
    let se = d.se();
    if se == 0.0 {
        return (f64::INFINITY, if d.mean > 0.0 { 0.0 } else { 1.0 });
    }
    let z = d.mean / se;
    (z, normal_sf(z))
}

/// One-sided two-proportion test of `x1/n1 > x2/n2`; returns `(z, p)`.
pub fn two_proportion_greater(x1: u64, n1: u64, x2: u64, n2: u64) -> (f64, f64) {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return (0.0, 1.0);
    }
    let z = (p1 - p2) / se;
    (z, normal_sf(z))
}

/// Pearson goodness of fit against `probs`; returns `(statistic, p)`.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let df = (counts.len() - 1) as f64;
    if df < 1.0 {
        return (stat, 1.0);
    }
    (stat, ChiSquared::new(df).expect("valid df").sf(stat))
}

/// Pearson test of homogeneity between two count vectors over the same
/// categories; categories empty in both are dropped.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, f64) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cats = 0;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cats += 1;
        let ea = col * na / (na + nb);
        let eb = col * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cats < 2 {
        return (stat, 1.0);
    }
    (
        stat,
        ChiSquared::new((cats - 1) as f64)
            .expect("valid df")
            .sf(stat),
    )
}
