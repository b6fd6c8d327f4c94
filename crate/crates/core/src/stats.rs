//! Statistical primitives shared by the analysis modules: proportion tests,
//! rank tests, kernel density estimation, power-law fitting, log-binned
//! histograms and seeded bootstrap resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};
use thiserror::Error;

/// Minimum usable sample count for a power-law fit under the default contract.
pub const POWERLAW_MIN_SAMPLES: usize = 10;

#[derive(Error, Debug)]
pub enum StatsError {
    #[error("undefined test: {0}")]
    UndefinedTest(String),
    #[error("undefined density: empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("divergent estimate: all samples equal xmin")]
    DivergentEstimate,
    #[error("insufficient data: {got} usable samples, need {need}")]
    InsufficientData { got: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Greater,
    Less,
}

impl std::fmt::Display for Alternative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Alternative::TwoSided => write!(f, "<>"),
            Alternative::Greater => write!(f, ">"),
            Alternative::Less => write!(f, "<"),
        }
    }
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub estimate: f64,
}

/// A density evaluated on a fixed grid, normalized so that its trapezoidal
/// integral over the grid is 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Density {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }
}

/// Evaluation grid: points `lo, lo + step, ...` up to and including `hi`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, StatsError> {
        if !(lo < hi) || !(step > 0.0) {
            return Err(StatsError::InvalidParameter(format!(
                "grid requires lo < hi and step > 0, got ({lo}, {hi}, {step})"
            )));
        }
        Ok(GridSpec { lo, hi, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

/// Histogram over geometrically increasing bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts normalized by bin width and total sample count.
    pub densities: Vec<f64>,
}

/// Power-law fit by continuous maximum likelihood.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerlawFit {
    pub alpha: f64,
    pub xmin: f64,
    pub n_used: usize,
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// One-sample proportion test of `successes/trials` against `p0`.
///
/// Uses the chi-square statistic with Yates continuity correction; when an
/// expected count (successes or failures) falls below 5 the p-value comes
/// from the exact binomial distribution instead. The estimate is the signed
/// difference `successes/trials - p0`.
pub fn one_proportion_test(
    successes: u64,
    trials: u64,
    p0: f64,
    alternative: Alternative,
) -> Result<TestResult, StatsError> {
    if trials == 0 {
        return Err(StatsError::UndefinedTest("zero trials".into()));
    }
    if successes > trials {
        return Err(StatsError::InvalidParameter(format!(
            "successes {successes} > trials {trials}"
        )));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::InvalidParameter(format!(
            "p0 must lie in (0,1), got {p0}"
        )));
    }

    let n = trials as f64;
    let k = successes as f64;
    let estimate = k / n - p0;
    let expected_s = n * p0;
    let expected_f = n * (1.0 - p0);

    if expected_s < 5.0 || expected_f < 5.0 {
        let p_value = exact_binomial_p(successes, trials, p0, alternative);
        return Ok(TestResult {
            statistic: k,
            p_value,
            alternative,
            estimate,
        });
    }

    let sigma = (n * p0 * (1.0 - p0)).sqrt();
    let d = k - expected_s;
    let normal = std_normal();
    let (statistic, p_value) = match alternative {
        Alternative::TwoSided => {
            let z = ((d.abs() - 0.5) / sigma).max(0.0);
            (z * z, (2.0 * normal.sf(z)).min(1.0))
        }
        Alternative::Greater => {
            let z = (d - 0.5) / sigma;
            (z * z, normal.sf(z))
        }
        Alternative::Less => {
            let z = (d + 0.5) / sigma;
            (z * z, normal.cdf(z))
        }
    };
    Ok(TestResult {
        statistic,
        p_value,
        alternative,
        estimate,
    })
}

/// Exact binomial p-value; the two-sided value doubles the smaller tail
/// (the convention that tracks the Yates-corrected chi-square closest).
fn exact_binomial_p(k: u64, n: u64, p0: f64, alternative: Alternative) -> f64 {
    let dist = Binomial::new(p0, n).expect("valid binomial");
    let upper = if k == 0 { 1.0 } else { dist.sf(k - 1) }; // P[X >= k]
    let lower = dist.cdf(k); // P[X <= k]
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Pooled z test for equality of two proportions `k1/n1` and `k2/n2`.
///
/// The estimate is the absolute difference of the sample proportions; the
/// alternative refers to the first sample relative to the second.
pub fn two_proportion_test(
    k1: u64,
    n1: u64,
    k2: u64,
    n2: u64,
    alternative: Alternative,
) -> Result<TestResult, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::UndefinedTest("empty sample".into()));
    }
    if k1 > n1 || k2 > n2 {
        return Err(StatsError::InvalidParameter(
            "successes exceed trials".into(),
        ));
    }
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = if se == 0.0 { 0.0 } else { (p1 - p2) / se };
    let normal = std_normal();
    let p_value = match alternative {
        Alternative::TwoSided => (2.0 * normal.sf(z.abs())).min(1.0),
        Alternative::Greater => normal.sf(z),
        Alternative::Less => normal.cdf(z),
    };
    Ok(TestResult {
        statistic: z * z,
        p_value,
        alternative,
        estimate: (p1 - p2).abs(),
    })
}

/// Two-sided Mann-Whitney rank-sum test.
///
/// Uses exact enumeration over rank assignments when the pooled size is at
/// most 12, otherwise the tie-corrected normal approximation with continuity
/// correction. The estimate is the rank-biserial correlation.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::UndefinedTest("empty sample".into()));
    }
    let n1 = a.len();
    let n2 = b.len();
    let n = n1 + n2;

    let mut pooled: Vec<(f64, usize)> = a
        .iter()
        .chain(b.iter())
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite sample values"));

    // Midranks for tied values.
    let mut ranks = vec![0.0f64; n];
    let mut tie_sizes: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for item in &pooled[i..=j] {
            ranks[item.1] = midrank;
        }
        if j > i {
            tie_sizes.push(j - i + 1);
        }
        i = j + 1;
    }

    let w: f64 = ranks[..n1].iter().sum();
    let u = w - (n1 * (n1 + 1)) as f64 / 2.0;
    let estimate = 2.0 * u / (n1 as f64 * n2 as f64) - 1.0;

    let p_value = if n <= 12 {
        exact_rank_sum_p(&ranks.iter().copied().collect::<Vec<_>>(), n1, w)
    } else {
        let mean_u = (n1 * n2) as f64 / 2.0;
        let nf = n as f64;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>()
            / (nf * (nf - 1.0));
        let var_u = (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term);
        if var_u <= 0.0 {
            1.0 // every pooled value tied
        } else {
            let z = ((u - mean_u).abs() - 0.5).max(0.0) / var_u.sqrt();
            (2.0 * std_normal().sf(z)).min(1.0)
        }
    };

    Ok(TestResult {
        statistic: u,
        p_value,
        alternative: Alternative::TwoSided,
        estimate,
    })
}

/// Exact two-sided p-value: fraction of rank assignments whose rank-sum
/// deviates from the mean at least as much as the observed one.
fn exact_rank_sum_p(ranks: &[f64], n1: usize, w_obs: f64) -> f64 {
    let n = ranks.len();
    let mean_w: f64 = ranks.iter().sum::<f64>() * n1 as f64 / n as f64;
    let obs_dev = (w_obs - mean_w).abs();
    let mut total = 0u64;
    let mut at_least = 0u64;
    // Enumerate subsets of size n1 via bitmask; n <= 12 keeps this at 4096.
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        let w: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if (w - mean_w).abs() >= obs_dev - 1e-9 {
            at_least += 1;
        }
    }
    at_least as f64 / total as f64
}

/// Gaussian kernel density estimate on a fixed grid.
///
/// Places one kernel of standard deviation `bandwidth` on each sample and
/// renormalizes so the trapezoidal integral over the grid range equals 1.
pub fn gaussian_kde(samples: &[f64], bandwidth: f64, grid: GridSpec) -> Result<Density, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(bandwidth > 0.0) {
        return Err(StatsError::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let points = grid.points();
    let values = kde_raw(samples, bandwidth, &points);
    let integral = trapezoid(&points, &values);
    if integral <= 0.0 {
        return Err(StatsError::InvalidParameter(
            "density vanishes on the requested grid".into(),
        ));
    }
    let values = values.into_iter().map(|v| v / integral).collect();
    Ok(Density {
        grid: points,
        values,
    })
}

/// Unnormalized mixture-of-Gaussians evaluation, shared with the test oracle.
pub fn kde_raw(samples: &[f64], bandwidth: f64, points: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Continuous power-law MLE `alpha = 1 + m / sum(ln(x_i / xmin))` over the
/// samples at or above `xmin`, requiring at least [`POWERLAW_MIN_SAMPLES`].
pub fn powerlaw_mle(samples: &[f64], xmin: f64) -> Result<PowerlawFit, StatsError> {
    powerlaw_mle_with_min(samples, xmin, POWERLAW_MIN_SAMPLES)
}

/// Same fit with an explicit minimum usable-sample count.
pub fn powerlaw_mle_with_min(
    samples: &[f64],
    xmin: f64,
    min_count: usize,
) -> Result<PowerlawFit, StatsError> {
    if !(xmin > 0.0) {
        return Err(StatsError::InvalidParameter(format!(
            "xmin must be positive, got {xmin}"
        )));
    }
    let used: Vec<f64> = samples.iter().copied().filter(|&x| x >= xmin).collect();
    if used.len() < min_count {
        return Err(StatsError::InsufficientData {
            got: used.len(),
            need: min_count,
        });
    }
    let log_sum: f64 = used.iter().map(|&x| (x / xmin).ln()).sum();
    if log_sum <= 0.0 {
        return Err(StatsError::DivergentEstimate);
    }
    Ok(PowerlawFit {
        alpha: 1.0 + used.len() as f64 / log_sum,
        xmin,
        n_used: used.len(),
    })
}

/// Histogram with geometric bin edges spanning `[min, max]` of the samples,
/// `bins_per_decade` bins per factor of ten.
pub fn log_binned_histogram(
    samples: &[f64],
    bins_per_decade: u32,
) -> Result<Histogram, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if bins_per_decade == 0 {
        return Err(StatsError::InvalidParameter(
            "bins_per_decade must be at least 1".into(),
        ));
    }
    if samples.iter().any(|&x| !(x > 0.0)) {
        return Err(StatsError::InvalidParameter(
            "log-binned histogram requires positive samples".into(),
        ));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio = 10f64.powf(1.0 / bins_per_decade as f64);

    let mut edges = vec![lo];
    while *edges.last().unwrap() <= hi {
        let next = lo * ratio.powi(edges.len() as i32);
        edges.push(next);
    }

    let n_bins = edges.len() - 1;
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        // Bin i covers [edges[i], edges[i+1]); the final edge exceeds max.
        let idx = edges.partition_point(|&e| e <= x).saturating_sub(1);
        counts[idx.min(n_bins - 1)] += 1;
    }
    let total = samples.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
        .collect();
    Ok(Histogram {
        bin_edges: edges,
        counts,
        densities,
    })
}

/// Bootstrap mean and sample standard deviation of `metric` over `reps`
/// resamples with replacement. Replicate r draws from a generator seeded
/// with `seed + r`, so results do not depend on evaluation order.
pub fn bootstrap_metric<T: Clone, F>(
    data: &[T],
    metric: F,
    reps: u32,
    seed: u64,
) -> Result<(f64, f64), StatsError>
where
    F: Fn(&[T]) -> f64,
{
    if data.is_empty() {
        return Err(StatsError::UndefinedTest("empty data".into()));
    }
    if reps < 2 {
        return Err(StatsError::InvalidParameter(
            "bootstrap requires at least 2 replicates".into(),
        ));
    }
    let values: Vec<f64> = (0..reps)
        .map(|rep| {
            let sample = resample_indices(data.len(), seed, rep)
                .into_iter()
                .map(|i| data[i].clone())
                .collect::<Vec<_>>();
            metric(&sample)
        })
        .collect();
    Ok(mean_and_std(&values))
}

/// Indices of bootstrap replicate `rep` for a sample of size `len`.
pub fn resample_indices(len: usize, seed: u64, rep: u32) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
    (0..len).map(|_| rng.random_range(0..len)).collect()
}

/// Mean and sample (n-1) standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Wilson score interval for a binomial proportion at the given confidence.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    let z = std_normal().inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
