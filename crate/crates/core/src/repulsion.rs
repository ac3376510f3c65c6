//! Repulsive prior over component centers.
//!
//! The joint center density is `Z_K^{-1} h_K(μ_1..μ_K) Π p_μ(μ_k)` with
//! `p_μ = N(0, τ² I)` and `h_K` built from `g(x) = x / (g0 + x)` either as the
//! minimum over pairs or as the `1/K` power of the product over pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    sample_diag_normal, sample_isotropic, DiagCovariance, TruncatedInvGamma,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepulsionForm {
    /// `h_K = min_{k<k'} g(‖μ_k − μ_k'‖)`
    MinPairwise,
    /// `h_K = (Π_{k<k'} g(‖μ_k − μ_k'‖))^{1/K}`
    ProductPower,
}

impl RepulsionForm {
    pub fn name(self) -> &'static str {
        match self {
            RepulsionForm::MinPairwise => "min_pairwise",
            RepulsionForm::ProductPower => "product_power",
        }
    }
}

impl std::str::FromStr for RepulsionForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_pairwise" | "min" | "1" => Ok(RepulsionForm::MinPairwise),
            "product_power" | "product" | "2" => Ok(RepulsionForm::ProductPower),
            other => Err(Error::invalid(
                "form",
                format!(
                    "unknown repulsive form `{other}` (expected min_pairwise or product_power)"
                ),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsionSpec {
    pub form: RepulsionForm,
    pub g0: f64,
    pub tau: f64,
}

impl RepulsionSpec {
    pub fn new(form: RepulsionForm, g0: f64, tau: f64) -> Result<Self> {
        if !(g0 >= 0.0 && g0.is_finite()) {
            return Err(Error::invalid(
                "g0",
                format!("must be non-negative, got {g0}"),
            ));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(
                "tau",
                format!("must be positive, got {tau}"),
            ));
        }
        Ok(Self { form, g0, tau })
    }

    /// `g0 = 0`: the independent prior, `h ≡ 1` on distinct centers.
    pub fn is_independent(&self) -> bool {
        self.g0 == 0.0
    }

    pub fn log_prior_center(&self, mu: &[f64]) -> f64 {
        let var = self.tau * self.tau;
        mu.iter()
            .map(|&m| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - m * m / (2.0 * var))
            .sum()
    }
}

/// `g(x) = x / (g0 + x)`, with `g(0) = 0` and `g ≡ 1` on `x > 0` when `g0 = 0`.
pub fn g_repulse(x: f64, g0: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if g0 == 0.0 {
        1.0
    } else {
        x / (g0 + x)
    }
}

#[inline]
fn log_g(x: f64, g0: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else if g0 == 0.0 {
        0.0
    } else {
        -(g0 / x).ln_1p()
    }
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Running aggregate of `log g` over a set of pairs.
#[derive(Debug, Clone, Copy)]
struct PairAggregate {
    min: f64,
    sum: f64,
}

impl PairAggregate {
    const EMPTY: Self = Self { min: 0.0, sum: 0.0 };

    #[inline]
    fn push(&mut self, lg: f64) {
        self.min = self.min.min(lg);
        self.sum += lg;
    }

    fn merge(self, other: Self) -> Self {
        Self {
            min: self.min.min(other.min),
            sum: self.sum + other.sum,
        }
    }

    fn log_h(self, form: RepulsionForm, k: usize) -> f64 {
        match form {
            RepulsionForm::MinPairwise => self.min,
            RepulsionForm::ProductPower => self.sum / k as f64,
        }
    }
}

fn aggregate_pairs<C: AsRef<[f64]>>(centers: &[C], g0: f64) -> PairAggregate {
    let mut agg = PairAggregate::EMPTY;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            agg.push(log_g(dist(centers[i].as_ref(), centers[j].as_ref()), g0));
        }
    }
    agg
}

/// `log h_K` of a center configuration; `-inf` when two centers coincide.
pub fn log_repulse_h<C: AsRef<[f64]>>(centers: &[C], spec: &RepulsionSpec) -> f64 {
    if centers.len() <= 1 {
        return 0.0;
    }
    aggregate_pairs(centers, spec.g0).log_h(spec.form, centers.len())
}

pub fn repulse_h<C: AsRef<[f64]>>(centers: &[C], spec: &RepulsionSpec) -> f64 {
    log_repulse_h(centers, spec).exp()
}

/// Monte Carlo estimate of `log Z_K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZkEstimate {
    pub log_zk: f64,
    pub std_err: f64,
    pub n_mc: usize,
    /// Estimate of `E[(log g(‖μ_1 − μ_2‖))²]` under independent prior draws.
    pub mean_sq_log_g: f64,
}

impl ZkEstimate {
    /// The linear-growth constant `c1 = sqrt(E[(log g)²] / 2)` bounding `−log Z_K ≤ c1 K`.
    pub fn c1(&self) -> f64 {
        (0.5 * self.mean_sq_log_g).sqrt()
    }
}

pub const MIN_ZK_DRAWS: usize = 1_000;

/// Estimate `log Z_K = log E[h_K(μ_1..μ_K)]` with `μ_k` i.i.d. `N(0, τ² I_p)`.
pub fn estimate_log_zk<R: Rng + ?Sized>(
    k: usize,
    spec: &RepulsionSpec,
    p: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<ZkEstimate> {
    if k == 0 {
        return Err(Error::ZeroComponents);
    }
    if n_mc < MIN_ZK_DRAWS {
        return Err(Error::invalid(
            "n_mc",
            format!("need at least {MIN_ZK_DRAWS} draws, got {n_mc}"),
        ));
    }
    if p == 0 {
        return Err(Error::invalid("p", "dimension must be positive"));
    }
    if k == 1 || spec.is_independent() {
        return Ok(ZkEstimate {
            log_zk: 0.0,
            std_err: 0.0,
            n_mc,
            mean_sq_log_g: 0.0,
        });
    }

    let mut log_h = Vec::with_capacity(n_mc);
    let mut sq_log_g = 0.0;
    let mut centers = vec![vec![0.0; p]; k];
    for _ in 0..n_mc {
        for c in centers.iter_mut() {
            *c = sample_isotropic(p, spec.tau, rng);
        }
        let lg12 = log_g(dist(&centers[0], &centers[1]), spec.g0);
        sq_log_g += lg12 * lg12;
        log_h.push(log_repulse_h(&centers, spec));
    }

    let max = log_h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateEstimate { n_mc });
    }
    let n = n_mc as f64;
    let (s1, s2) = log_h.iter().fold((0.0, 0.0), |(s1, s2), &l| {
        let w = (l - max).exp();
        (s1 + w, s2 + w * w)
    });
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    // Delta method: sd(log mean) ≈ sd(mean) / mean.
    let std_err = (var / n).sqrt() / mean;
    Ok(ZkEstimate {
        log_zk: (max + mean.ln()).min(0.0),
        std_err,
        n_mc,
        mean_sq_log_g: sq_log_g / n,
    })
}

/// Tabulated `log Z_K` for a contiguous range of `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZkTable {
    first_k: usize,
    log_zk: Vec<f64>,
}

impl ZkTable {
    pub fn from_log_values(first_k: usize, log_zk: Vec<f64>) -> Self {
        Self { first_k, log_zk }
    }

    /// Estimate `log Z_K` for `K = 1..=k_max`, one independent stream per `K`.
    pub fn estimate(
        spec: &RepulsionSpec,
        p: usize,
        k_max: usize,
        n_mc: usize,
        seed: u64,
    ) -> Result<Self> {
        let log_zk = (1..=k_max)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                estimate_log_zk(k, spec, p, n_mc, &mut rng).map(|e| e.log_zk)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { first_k: 1, log_zk })
    }

    pub fn first_k(&self) -> usize {
        self.first_k
    }

    pub fn last_k(&self) -> usize {
        self.first_k + self.log_zk.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.log_zk.is_empty()
    }

    pub fn log_zk(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.first_k)
            .and_then(|i| self.log_zk.get(i).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_zk
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.first_k + i, v))
    }

    /// Two columns `K log_zk`, one row per `K`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.iter() {
            writeln!(out, "{k} {v:e}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason,
            };
            let mut it = line.split_whitespace();
            let (Some(k), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err("expected two columns".into()));
            };
            let k: usize = k.parse().map_err(|e| parse_err(format!("bad K: {e}")))?;
            let v: f64 = v
                .parse()
                .map_err(|e| parse_err(format!("bad log_zk: {e}")))?;
            if let Some(&(prev, _)) = rows.last() {
                if k != prev + 1 {
                    return Err(parse_err(format!(
                        "K must be contiguous, got {k} after {prev}"
                    )));
                }
            }
            rows.push((k, v));
        }
        let Some(&(first_k, _)) = rows.first() else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                reason: "empty Z_K table".into(),
            });
        };
        Ok(Self {
            first_k,
            log_zk: rows.into_iter().map(|(_, v)| v).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }
}

/// Proposal law for one free center in [`sample_centers_rejection`].
#[derive(Debug, Clone, PartialEq)]
pub enum CenterProposal {
    /// The prior `N(0, τ² I)`.
    Prior,
    /// `N(mean, diag(var))`, e.g. a conjugate cluster posterior.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl CenterProposal {
    fn draw<R: Rng + ?Sized>(&self, p: usize, tau: f64, rng: &mut R) -> Vec<f64> {
        match self {
            CenterProposal::Prior => sample_isotropic(p, tau, rng),
            CenterProposal::Gaussian { mean, var } => sample_diag_normal(mean, var, rng),
        }
    }
}

pub const DEFAULT_MAX_ATTEMPTS: usize = 100_000;

/// Accept-reject draw of the free centers given fixed ones.
///
/// Free centers are proposed independently and the whole configuration is kept
/// when `U < h_K(fixed ∪ free)`. Returned in the order of `proposals`.
pub(crate) fn sample_free_centers<F: AsRef<[f64]>, R: Rng + ?Sized>(
    fixed: &[F],
    proposals: &[CenterProposal],
    p: usize,
    spec: &RepulsionSpec,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let k = fixed.len() + proposals.len();
    if spec.is_independent() || k <= 1 {
        return Ok(proposals.iter().map(|q| q.draw(p, spec.tau, rng)).collect());
    }
    let fixed_agg = aggregate_pairs(fixed, spec.g0);
    let bound = fixed_agg.log_h(spec.form, k);
    let mut free: Vec<Vec<f64>> = Vec::with_capacity(proposals.len());
    for _ in 0..max_attempts {
        let log_u = rng.random::<f64>().ln();
        if log_u >= bound {
            // Fixed pairs alone already reject; the proposal would be discarded.
            continue;
        }
        free.clear();
        free.extend(proposals.iter().map(|q| q.draw(p, spec.tau, rng)));
        let mut agg = PairAggregate::EMPTY;
        for (j, c) in free.iter().enumerate() {
            for f in fixed {
                agg.push(log_g(dist(c, f.as_ref()), spec.g0));
            }
            for other in &free[..j] {
                agg.push(log_g(dist(c, other), spec.g0));
            }
        }
        if log_u < fixed_agg.merge(agg).log_h(spec.form, k) {
            return Ok(free);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: max_attempts,
    })
}

/// Draw a full `K`-configuration: entries of `fixed` stay at their indices, every
/// other index is proposed from the matching entry of `proposals` (in increasing
/// index order), and the configuration is accepted with probability `h_K`.
pub fn sample_centers_rejection<R: Rng + ?Sized>(
    k: usize,
    fixed: &[(usize, Vec<f64>)],
    proposals: &[CenterProposal],
    spec: &RepulsionSpec,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::ZeroComponents);
    }
    let mut is_fixed = vec![false; k];
    for (idx, _) in fixed {
        if *idx >= k || std::mem::replace(&mut is_fixed[*idx], true) {
            return Err(Error::invalid(
                "fixed",
                format!("index {idx} out of range or repeated"),
            ));
        }
    }
    let n_free = k - fixed.len();
    if proposals.len() != n_free {
        return Err(Error::DimensionMismatch {
            expected: n_free,
            found: proposals.len(),
        });
    }
    let p = fixed
        .first()
        .map(|(_, c)| c.len())
        .or_else(|| {
            proposals.iter().find_map(|q| match q {
                CenterProposal::Gaussian { mean, .. } => Some(mean.len()),
                CenterProposal::Prior => None,
            })
        })
        .ok_or_else(|| {
            Error::invalid(
                "proposals",
                "cannot infer dimension from prior-only proposals",
            )
        })?;
    for q in proposals {
        if let CenterProposal::Gaussian { mean, var } = q {
            if mean.len() != p || var.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: mean.len().max(var.len()),
                });
            }
        }
    }
    let fixed_centers: Vec<&[f64]> = fixed.iter().map(|(_, c)| c.as_slice()).collect();
    let mut free =
        sample_free_centers(&fixed_centers, proposals, p, spec, max_attempts, rng)?.into_iter();
    let mut fixed_at: Vec<Option<&Vec<f64>>> = vec![None; k];
    for (idx, c) in fixed {
        fixed_at[*idx] = Some(c);
    }
    Ok(fixed_at
        .into_iter()
        .map(|slot| match slot {
            Some(c) => c.clone(),
            None => free.next().expect("one free draw per open slot"),
        })
        .collect())
}

/// `p(μ_1, Σ_1, …, μ_K, Σ_K | K)` in log space. Coincident centers give `-inf`.
pub fn joint_prior_logdensity<C: AsRef<[f64]>>(
    centers: &[C],
    covs: &[DiagCovariance],
    spec: &RepulsionSpec,
    log_zk: f64,
    cov_prior: &TruncatedInvGamma,
) -> Result<f64> {
    if centers.len() != covs.len() {
        return Err(Error::DimensionMismatch {
            expected: centers.len(),
            found: covs.len(),
        });
    }
    let log_centers: f64 = centers
        .iter()
        .map(|c| spec.log_prior_center(c.as_ref()))
        .sum();
    let log_covs: f64 = covs
        .iter()
        .flat_map(|c| c.lambdas().iter())
        .map(|&l| cov_prior.log_pdf(l))
        .sum();
    Ok(-log_zk + log_centers + log_covs + log_repulse_h(centers, spec))
}

/// Conjugate posterior of a center under `N(0, τ² I)` given `count` observations
/// with coordinate sums `sum` and diagonal covariance `lambdas`: returns `(mean, var)`.
pub fn conjugate_center_posterior(
    sum: &[f64],
    count: usize,
    lambdas: &[f64],
    tau: f64,
) -> (Vec<f64>, Vec<f64>) {
    let prior_prec = 1.0 / (tau * tau);
    let var: Vec<f64> = lambdas
        .iter()
        .map(|&l| 1.0 / (count as f64 / l + prior_prec))
        .collect();
    let mean = sum
        .iter()
        .zip(&var)
        .zip(lambdas)
        .map(|((&s, &v), &l)| v * s / l)
        .collect();
    (mean, var)
}
