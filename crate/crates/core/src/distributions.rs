//! Elementary densities and samplers: diagonal Gaussians, the truncated
//! inverse-gamma eigenvalue prior and the prior on the number of components.
//!
//! Everything is computed in log space.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::repulsion::ZkTable;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Eigenvalues of a diagonal covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagCovariance(Vec<f64>);

impl DiagCovariance {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        for (index, &value) in lambdas.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveVariance { index, value });
            }
        }
        Ok(Self(lambdas))
    }

    pub fn isotropic(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    pub fn identity(p: usize) -> Self {
        Self(vec![1.0; p])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.0
    }

    pub fn lambdas_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.0.iter().all(|&l| (lo..=hi).contains(&l))
    }
}

/// Log density of `N(mu, diag(cov))` at `y`.
pub fn mvn_diag_logpdf(y: &[f64], mu: &[f64], cov: &DiagCovariance) -> Result<f64> {
    if mu.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: mu.len(),
        });
    }
    if cov.dim() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: cov.dim(),
        });
    }
    for (index, &value) in cov.lambdas().iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveVariance { index, value });
        }
    }
    Ok(log_phi(y, mu, cov.lambdas()))
}

/// Unchecked inner-loop version of [`mvn_diag_logpdf`].
#[inline]
pub(crate) fn log_phi(y: &[f64], mu: &[f64], lambdas: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .zip(lambdas)
        .map(|((&yj, &mj), &lj)| {
            let r = yj - mj;
            -0.5 * (LN_2PI + lj.ln()) - r * r / (2.0 * lj)
        })
        .sum()
}

/// Draw from `N(mean, diag(var))`.
pub(crate) fn sample_diag_normal<R: Rng + ?Sized>(
    mean: &[f64],
    var: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    mean.iter()
        .zip(var)
        .map(|(&m, &v)| {
            let z: f64 = StandardNormal.sample(rng);
            m + v.sqrt() * z
        })
        .collect()
}

/// Draw from `N(0, scale^2 I_p)`.
pub(crate) fn sample_isotropic<R: Rng + ?Sized>(p: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

const MAX_TIG_ATTEMPTS: usize = 1_000_000;
const QUICK_REJECTION_TRIES: usize = 32;

/// Draw `lambda` with density proportional to `lambda^(-a-1) exp(-b/lambda)` on `[lo, hi]`.
///
/// `hi` may be infinite. Works on the gamma-distributed reciprocal: first plain
/// rejection from the untruncated law, then inverse-CDF on the truncated window,
/// then a uniform-envelope rejection sampler when the window mass underflows.
pub fn sample_truncated_inv_gamma<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(
            "a",
            format!("shape must be positive, got {a}"),
        ));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(
            "b",
            format!("rate must be positive, got {b}"),
        ));
    }
    if !(lo > 0.0 && lo < hi) || lo.is_nan() || hi.is_nan() {
        return Err(Error::EmptySupport { lo, hi });
    }

    let gamma = Gamma::new(a, 1.0 / b).map_err(|e| Error::invalid("a", e.to_string()))?;
    for _ in 0..QUICK_REJECTION_TRIES {
        let lambda = 1.0 / gamma.sample(rng);
        if lambda >= lo && lambda <= hi {
            return Ok(lambda);
        }
    }

    // Window for x = 1 / lambda.
    let x_lo = 1.0 / hi;
    let x_hi = 1.0 / lo;
    if let Some(x) = truncated_gamma_inverse_cdf(a, b, x_lo, x_hi, rng) {
        let lambda = (1.0 / x).clamp(lo, hi);
        return Ok(lambda);
    }

    envelope_rejection(a, b, lo, hi, rng)
}

fn truncated_gamma_inverse_cdf<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    x_lo: f64,
    x_hi: f64,
    rng: &mut R,
) -> Option<f64> {
    let p_lo = if x_lo > 0.0 {
        gamma_lr(a, b * x_lo)
    } else {
        0.0
    };
    let u: f64 = rng.random();
    // Work with whichever tail keeps the window mass well-conditioned.
    let upper = p_lo > 0.5;
    let (f_lo, f_hi, cdf): (f64, f64, fn(f64, f64) -> f64) = if upper {
        let q_lo = gamma_ur(a, b * x_lo);
        let q_hi = if x_hi.is_finite() {
            gamma_ur(a, b * x_hi)
        } else {
            0.0
        };
        (q_lo, q_hi, gamma_ur)
    } else {
        let p_hi = if x_hi.is_finite() {
            gamma_lr(a, b * x_hi)
        } else {
            1.0
        };
        (p_lo, p_hi, gamma_lr)
    };
    let mass = (f_hi - f_lo).abs();
    if !(mass > 1e-12 * f_lo.abs().max(f_hi.abs())) || !mass.is_finite() || mass < 1e-280 {
        return None;
    }
    let target = f_lo + u * (f_hi - f_lo);
    let mut left = x_lo;
    let mut right = if x_hi.is_finite() {
        x_hi
    } else {
        // Expand until the CDF passes the target.
        let mut r = (x_lo.max(a / b)) * 2.0 + 1.0;
        while (cdf(a, b * r) - target) * (f_hi - f_lo).signum() < 0.0 {
            r *= 2.0;
            if !r.is_finite() {
                return None;
            }
        }
        r
    };
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        let below = (cdf(a, b * mid) - target) * (f_hi - f_lo).signum() < 0.0;
        if below {
            left = mid;
        } else {
            right = mid;
        }
        if right - left <= 1e-15 * right {
            break;
        }
    }
    Some(0.5 * (left + right))
}

fn envelope_rejection<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !hi.is_finite() {
        return Err(Error::RejectionExhausted { attempts: 0 });
    }
    let log_f = |l: f64| -(a + 1.0) * l.ln() - b / l;
    let mode = (b / (a + 1.0)).clamp(lo, hi);
    let log_max = log_f(mode);
    for _ in 0..MAX_TIG_ATTEMPTS {
        let lambda = lo + (hi - lo) * rng.random::<f64>();
        let u: f64 = rng.random();
        if u.ln() < log_f(lambda) - log_max {
            return Ok(lambda);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: MAX_TIG_ATTEMPTS,
    })
}

/// Truncated inverse-gamma prior on each covariance eigenvalue,
/// density proportional to `1[lo <= λ <= hi] λ^(-a-1) exp(-b/λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedInvGamma {
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedInvGamma {
    pub fn new(a: f64, b: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("a0", format!("must be positive, got {a}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("b0", format!("must be positive, got {b}")));
        }
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::EmptySupport { lo, hi });
        }
        Ok(Self { a, b, lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        sample_truncated_inv_gamma(self.a, self.b, self.lo, self.hi, rng)
    }

    /// Normalized log density; `-inf` outside the window.
    pub fn log_pdf(&self, lambda: f64) -> f64 {
        if !(lambda >= self.lo && lambda <= self.hi) {
            return f64::NEG_INFINITY;
        }
        let upper = if self.lo > 0.0 {
            gamma_lr(self.a, self.b / self.lo)
        } else {
            1.0
        };
        let lower = if self.hi.is_finite() {
            gamma_lr(self.a, self.b / self.hi)
        } else {
            0.0
        };
        let log_mass = (upper - lower).ln();
        self.a * self.b.ln()
            - ln_gamma(self.a)
            - (self.a + 1.0) * lambda.ln()
            - self.b / lambda
            - log_mass
    }

    /// Conjugate update for `count` residuals with sum of squares `ss`.
    pub fn posterior(&self, count: usize, ss: f64) -> Self {
        Self {
            a: self.a + 0.5 * count as f64,
            b: self.b + 0.5 * ss,
            ..*self
        }
    }
}

/// Whether the prior on `K` is the plain zero-truncated Poisson or the
/// `Z_K`-reweighted variant `p(K) ∝ Z_K λ^K / K!`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KPriorMode {
    Plain,
    ZkAdjusted,
}

impl KPriorMode {
    pub fn name(self) -> &'static str {
        match self {
            KPriorMode::Plain => "plain",
            KPriorMode::ZkAdjusted => "zk_adjusted",
        }
    }
}

impl std::str::FromStr for KPriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(KPriorMode::Plain),
            "zk_adjusted" => Ok(KPriorMode::ZkAdjusted),
            other => Err(Error::invalid(
                "k_prior",
                format!("unknown mode `{other}` (plain|zk_adjusted)"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KPrior {
    intensity: f64,
    mode: KPriorMode,
    zk_table: Option<ZkTable>,
    cap: Option<usize>,
    log_normalizer: f64,
}

impl KPrior {
    pub fn plain(intensity: f64) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::invalid(
                "intensity",
                format!("must be positive, got {intensity}"),
            ));
        }
        // log(e^λ - 1)
        let log_normalizer = if intensity > 1.0 {
            intensity + (-(-intensity).exp()).ln_1p()
        } else {
            intensity.exp_m1().ln()
        };
        Ok(Self {
            intensity,
            mode: KPriorMode::Plain,
            zk_table: None,
            cap: None,
            log_normalizer,
        })
    }

    /// `p(K) ∝ Z_K λ^K / K!` restricted to the range covered by `table`.
    pub fn zk_adjusted(intensity: f64, table: ZkTable) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(Error::invalid(
                "intensity",
                format!("must be positive, got {intensity}"),
            ));
        }
        if table.is_empty() || table.first_k() == 0 {
            return Err(Error::invalid("zk_table", "must cover at least one K >= 1"));
        }
        let log_terms: Vec<f64> = table
            .iter()
            .map(|(k, lz)| lz + k as f64 * intensity.ln() - ln_gamma(k as f64 + 1.0))
            .collect();
        let log_normalizer = log_sum_exp(&log_terms);
        Ok(Self {
            intensity,
            mode: KPriorMode::ZkAdjusted,
            zk_table: Some(table),
            cap: None,
            log_normalizer,
        })
    }

    /// The same prior conditioned on `K <= k_max`.
    pub fn truncated(self, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::invalid("k_max", "must be positive"));
        }
        let cap = self.support_max().map_or(k_max, |s| s.min(k_max));
        let log_terms: Vec<f64> = (1..=cap).map(|k| self.log_pmf(k)).collect::<Result<_>>()?;
        let shift = log_sum_exp(&log_terms);
        Ok(Self {
            cap: Some(cap),
            log_normalizer: self.log_normalizer + shift,
            ..self
        })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn mode(&self) -> KPriorMode {
        self.mode
    }

    pub fn zk_table(&self) -> Option<&ZkTable> {
        self.zk_table.as_ref()
    }

    /// Largest `K` with positive mass, if the support is bounded.
    pub fn support_max(&self) -> Option<usize> {
        self.cap
            .or_else(|| self.zk_table.as_ref().map(|t| t.last_k()))
    }

    pub fn log_pmf(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::ZeroComponents);
        }
        if let Some(cap) = self.cap.filter(|&c| k > c) {
            return Err(Error::KOutsideTable {
                k,
                first: 1,
                last: cap,
            });
        }
        match &self.zk_table {
            None => Ok(self.plain_log_pmf(k)),
            Some(table) => {
                let lz = table.log_zk(k).ok_or(Error::KOutsideTable {
                    k,
                    first: table.first_k(),
                    last: table.last_k(),
                })?;
                Ok(lz + k as f64 * self.intensity.ln()
                    - ln_gamma(k as f64 + 1.0)
                    - self.log_normalizer)
            }
        }
    }

    /// Log pmf with `-inf` outside the support instead of an error.
    pub(crate) fn log_pmf_or_neg_inf(&self, k: usize) -> f64 {
        self.log_pmf(k).unwrap_or(f64::NEG_INFINITY)
    }

    fn plain_log_pmf(&self, k: usize) -> f64 {
        k as f64 * self.intensity.ln() - ln_gamma(k as f64 + 1.0) - self.log_normalizer
    }
}

/// Log pmf of the prior on the number of components.
pub fn k_prior_log_pmf(k: usize, prior: &KPrior) -> Result<f64> {
    prior.log_pmf(k)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Sample an index with probability proportional to `exp(log_weights[i])`.
pub(crate) fn sample_log_categorical<R: Rng + ?Sized>(
    log_weights: &[f64],
    rng: &mut R,
) -> Option<usize> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let total: f64 = log_weights.iter().map(|&w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = i;
            if u < p {
                return Some(i);
            }
            u -= p;
        }
    }
    Some(last)
}
