//! Exchangeable partition calculus for the mixture of finite mixtures.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{log_sum_exp, sample_log_categorical, KPrior};
use crate::error::{Error, Result};

/// Set partition of `{0, …, n−1}` stored as cluster labels `0..ℓ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    assignments: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Build from arbitrary labels, relabelled in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = HashMap::new();
        let mut sizes = Vec::new();
        let assignments = labels
            .iter()
            .map(|l| {
                let next = map.len();
                let c = *map.entry(*l).or_insert(next);
                if c == sizes.len() {
                    sizes.push(0);
                }
                sizes[c] += 1;
                c
            })
            .collect();
        Self { assignments, sizes }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self {
            assignments: vec![0; n],
            sizes: if n == 0 { vec![] } else { vec![n] },
        }
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignments[i]
    }

    /// Whether labels are in order of first appearance.
    pub fn is_canonical(&self) -> bool {
        let mut next = 0;
        for &a in &self.assignments {
            if a == next {
                next += 1;
            } else if a > next {
                return false;
            }
        }
        true
    }

    /// Relabel in order of first appearance; returns `perm` with `perm[old] = new`.
    pub fn canonicalize(&mut self) -> Vec<usize> {
        let mut perm = vec![usize::MAX; self.sizes.len()];
        let mut next = 0;
        for a in self.assignments.iter_mut() {
            if perm[*a] == usize::MAX {
                perm[*a] = next;
                next += 1;
            }
            *a = perm[*a];
        }
        let mut sizes = vec![0; self.sizes.len()];
        for (old, &new) in perm.iter().enumerate() {
            sizes[new] = self.sizes[old];
        }
        self.sizes = sizes;
        perm
    }

    pub fn validate(&self) -> Result<()> {
        let mut counts = vec![0usize; self.sizes.len()];
        for &a in &self.assignments {
            if a >= counts.len() {
                return Err(Error::invalid(
                    "partition",
                    format!("label {a} without a cluster"),
                ));
            }
            counts[a] += 1;
        }
        if counts != self.sizes || counts.contains(&0) {
            return Err(Error::invalid(
                "partition",
                "cluster sizes inconsistent with assignments",
            ));
        }
        Ok(())
    }

    /// Take observation `i` out of its cluster, leaving it unassigned. When the
    /// cluster empties it is removed by moving the last cluster into its slot
    /// (the same relabelling as `Vec::swap_remove`); returns the removed index.
    pub(crate) fn detach(&mut self, i: usize) -> Option<usize> {
        let c = self.assignments[i];
        self.assignments[i] = usize::MAX;
        self.sizes[c] -= 1;
        if self.sizes[c] > 0 {
            return None;
        }
        let last = self.sizes.len() - 1;
        if c != last {
            for a in self.assignments.iter_mut() {
                if *a == last {
                    *a = c;
                }
            }
        }
        self.sizes.swap_remove(c);
        Some(c)
    }

    /// Put a detached observation into `cluster`; `cluster == n_clusters()` opens a new one.
    pub(crate) fn attach(&mut self, i: usize, cluster: usize) {
        debug_assert_eq!(self.assignments[i], usize::MAX);
        if cluster == self.sizes.len() {
            self.sizes.push(0);
        }
        self.assignments[i] = cluster;
        self.sizes[cluster] += 1;
    }

    /// Whether `i` and `j` share a cluster.
    pub fn together(&self, i: usize, j: usize) -> bool {
        self.assignments[i] == self.assignments[j]
    }
}

fn ln_falling(k: usize, ell: usize) -> f64 {
    if ell > k {
        f64::NEG_INFINITY
    } else {
        ln_gamma(k as f64 + 1.0) - ln_gamma((k - ell) as f64 + 1.0)
    }
}

fn ln_rising(x: f64, n: usize) -> f64 {
    ln_gamma(x + n as f64) - ln_gamma(x)
}

/// `log V_n(ℓ)` for `ℓ = 1..=ell_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct VnTable {
    n: usize,
    beta: f64,
    log_vn: Vec<f64>,
    tol: f64,
}

impl VnTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn ell_max(&self) -> usize {
        self.log_vn.len()
    }

    /// `log V_n(ℓ)`; `-inf` when `ℓ` exceeds the support of the prior on `K`.
    pub fn log_vn(&self, ell: usize) -> Result<f64> {
        if ell == 0 || ell > self.log_vn.len() {
            return Err(Error::EllOutsideTable {
                ell,
                max: self.log_vn.len(),
            });
        }
        Ok(self.log_vn[ell - 1])
    }

    /// `log[V_n(ℓ+1) β / V_n(ℓ)]`, the weight for opening a new cluster.
    pub fn log_new_cluster_weight(&self, ell: usize) -> Result<f64> {
        if ell == 0 {
            // No other clusters: opening one is the only option.
            return Ok(0.0);
        }
        let next = if ell + 1 > self.log_vn.len() && ell + 1 > self.n {
            f64::NEG_INFINITY
        } else {
            self.log_vn(ell + 1)?
        };
        Ok(next + self.beta.ln() - self.log_vn(ell)?)
    }
}

const VN_MAX_TERMS: usize = 1_000_000;
const VN_QUIET_TERMS: usize = 50;

/// `V_n(ℓ) = Σ_{K≥ℓ} K_(ℓ) / (βK)^(n) · p_K(K)`, with falling factorial `K_(ℓ)` and
/// rising factorial `(βK)^(n)`.
pub fn compute_vn_table(
    n: usize,
    beta: f64,
    prior: &KPrior,
    ell_max: usize,
    tol: f64,
) -> Result<VnTable> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    if ell_max == 0 || ell_max > n {
        return Err(Error::invalid(
            "ell_max",
            format!("must lie in 1..={n}, got {ell_max}"),
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(
            "tol",
            format!("must lie in (0, 1), got {tol}"),
        ));
    }
    let ln_tol = tol.ln();
    let support = prior.support_max();
    let log_vn = (1..=ell_max)
        .map(|ell| {
            if support.is_some_and(|s| ell > s) {
                return Ok(f64::NEG_INFINITY);
            }
            let mut acc = f64::NEG_INFINITY;
            let mut quiet = 0;
            for (terms, k) in (ell..).enumerate() {
                if support.is_some_and(|s| k > s) {
                    break;
                }
                if terms >= VN_MAX_TERMS {
                    return Err(Error::SeriesNotConverged { ell, terms });
                }
                let term = ln_falling(k, ell) - ln_rising(beta * k as f64, n)
                    + prior.log_pmf_or_neg_inf(k);
                let vanished = term == f64::NEG_INFINITY && support.is_none() && k > ell;
                if vanished || (acc > f64::NEG_INFINITY && term < ln_tol + acc) {
                    quiet += 1;
                } else {
                    quiet = 0;
                }
                acc = log_add(acc, term);
                if quiet >= VN_QUIET_TERMS {
                    break;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VnTable {
        n,
        beta,
        log_vn,
        tol,
    })
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log p(C) = log V_n(|C|) + Σ_c [log Γ(β+|c|) − log Γ(β)]`.
pub fn log_partition_prior(part: &Partition, table: &VnTable, beta: f64) -> Result<f64> {
    if part.n() != table.n() {
        return Err(Error::DimensionMismatch {
            expected: table.n(),
            found: part.n(),
        });
    }
    let lgb = ln_gamma(beta);
    let blocks: f64 = part
        .sizes()
        .iter()
        .map(|&s| ln_gamma(beta + s as f64) - lgb)
        .sum();
    Ok(table.log_vn(part.n_clusters())? + blocks)
}

/// How the conditional law of `K` given a partition is weighted over the window
/// `ℓ..=ℓ+m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KWeightRule {
    /// `p_K(K) K_(ℓ) / (βK)^(n)` for the configured `β` and prior.
    Exact,
    /// `K! / ((K+n)! (K−ℓ)!)`, the closed form quoted for `β = λ = 1`.
    Approximate,
}

impl KWeightRule {
    pub fn name(self) -> &'static str {
        match self {
            KWeightRule::Exact => "exact",
            KWeightRule::Approximate => "approximate",
        }
    }
}

impl std::str::FromStr for KWeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(KWeightRule::Exact),
            "approximate" | "approx" => Ok(KWeightRule::Approximate),
            other => Err(Error::invalid(
                "k_weights",
                format!("unknown rule `{other}` (exact|approximate)"),
            )),
        }
    }
}

/// Unnormalized log weights of `K = ℓ..=ℓ+m` given a partition with `ℓ` blocks of `n` items.
pub fn k_given_partition_log_weights(
    ell: usize,
    n: usize,
    m: usize,
    rule: KWeightRule,
    beta: f64,
    prior: &KPrior,
) -> Vec<f64> {
    (ell..=ell + m)
        .map(|k| match rule {
            KWeightRule::Approximate => {
                ln_gamma(k as f64 + 1.0)
                    - ln_gamma((k + n) as f64 + 1.0)
                    - ln_gamma((k - ell) as f64 + 1.0)
            }
            KWeightRule::Exact => {
                prior.log_pmf_or_neg_inf(k) + ln_falling(k, ell) - ln_rising(beta * k as f64, n)
            }
        })
        .collect()
}

/// Draw `K ∈ {ℓ, …, ℓ+m}` with weights `K! / ((K+n)! (K−ℓ)!)`.
pub fn sample_k_given_partition<R: Rng + ?Sized>(
    ell: usize,
    n: usize,
    m: usize,
    rng: &mut R,
) -> usize {
    let prior = KPrior::plain(1.0).expect("unit intensity");
    let w = k_given_partition_log_weights(ell, n, m, KWeightRule::Approximate, 1.0, &prior);
    ell + sample_log_categorical(&w, rng).unwrap_or(0)
}

/// Like [`sample_k_given_partition`] under an explicit weighting rule.
pub fn sample_k_given_partition_with<R: Rng + ?Sized>(
    ell: usize,
    n: usize,
    m: usize,
    rule: KWeightRule,
    beta: f64,
    prior: &KPrior,
    rng: &mut R,
) -> Option<usize> {
    let w = k_given_partition_log_weights(ell, n, m, rule, beta, prior);
    sample_log_categorical(&w, rng).map(|i| ell + i)
}

pub const MAX_ENUMERATION_N: usize = 12;

/// All set partitions of `{0, …, n−1}` as restricted growth strings.
pub fn enumerate_set_partitions(n: usize) -> Result<Vec<Partition>> {
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    if n == 0 {
        return Ok(vec![Partition::single_cluster(0)]);
    }
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    // `maxes[i]` = max label among labels[..i].
    fn recurse(i: usize, max_so_far: usize, labels: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == labels.len() {
            out.push(Partition::from_labels(labels));
            return;
        }
        for l in 0..=max_so_far + 1 {
            labels[i] = l;
            recurse(i + 1, max_so_far.max(l), labels, out);
        }
    }
    labels[0] = 0;
    recurse(1, 0, &mut labels, &mut out);
    Ok(out)
}

const BRUTE_FORCE_MAX_N: usize = 8;
const BRUTE_FORCE_MAX_LABELINGS: f64 = 5e8;

/// Partition probabilities obtained by summing `p(z | K) p(K)` over every labeling
/// `z ∈ {1..K}^n` and every `K ≤ k_max`. Same order as [`enumerate_set_partitions`].
pub fn bruteforce_partition_prior(
    n: usize,
    beta: f64,
    prior: &KPrior,
    k_max: usize,
) -> Result<Vec<(Partition, f64)>> {
    if n == 0 || n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let k_max = prior.support_max().map_or(k_max, |s| s.min(k_max));
    let covered: f64 = (1..=k_max).map(|k| prior.log_pmf_or_neg_inf(k).exp()).sum();
    let tail = (1.0 - covered).max(0.0);
    if tail >= 1e-10 {
        return Err(Error::TruncationInsufficient { k_max, tail });
    }
    let work: f64 = (1..=k_max).map(|k| (k as f64).powi(n as i32)).sum();
    if work > BRUTE_FORCE_MAX_LABELINGS {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }

    let parts = enumerate_set_partitions(n)?;
    // Canonical labelings read as base-n numbers.
    let code = |labels: &[usize]| {
        labels
            .iter()
            .fold(0u64, |acc, &l| acc * n as u64 + l as u64)
    };
    let index: HashMap<u64, usize> = parts
        .iter()
        .enumerate()
        .map(|(i, p)| (code(p.assignments()), i))
        .collect();
    let mut probs = vec![0.0; parts.len()];
    let lgb = ln_gamma(beta);
    let block_term: Vec<f64> = (0..=n).map(|c| ln_gamma(beta + c as f64) - lgb).collect();
    let mut z = vec![0usize; n];
    let mut counts = Vec::new();
    let mut relabel = Vec::new();
    for k in 1..=k_max {
        let log_pk = prior.log_pmf_or_neg_inf(k);
        if log_pk == f64::NEG_INFINITY {
            continue;
        }
        let kb = k as f64 * beta;
        let head = ln_gamma(kb) - ln_gamma(n as f64 + kb) + log_pk;
        z.iter_mut().for_each(|v| *v = 0);
        counts.clear();
        counts.resize(k, 0usize);
        relabel.clear();
        relabel.resize(k, usize::MAX);
        loop {
            let mut next = 0;
            let mut key = 0u64;
            for &l in &z {
                counts[l] += 1;
                if relabel[l] == usize::MAX {
                    relabel[l] = next;
                    next += 1;
                }
                key = key * n as u64 + relabel[l] as u64;
            }
            let mut log_pz = head;
            for &l in &z {
                if relabel[l] != usize::MAX {
                    log_pz += block_term[counts[l]];
                    relabel[l] = usize::MAX;
                }
                counts[l] = 0;
            }
            probs[index[&key]] += log_pz.exp();
            // Odometer increment over {0..k}^n.
            let mut pos = 0;
            loop {
                if pos == n {
                    break;
                }
                z[pos] += 1;
                if z[pos] < k {
                    break;
                }
                z[pos] = 0;
                pos += 1;
            }
            if pos == n {
                break;
            }
        }
    }
    Ok(parts.into_iter().zip(probs).collect())
}

/// Log-sum of [`log_partition_prior`] over all set partitions; should be `0`.
pub fn log_total_partition_mass(n: usize, table: &VnTable, beta: f64) -> Result<f64> {
    let logs = enumerate_set_partitions(n)?
        .iter()
        .map(|p| log_partition_prior(p, table, beta))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(&logs))
}
