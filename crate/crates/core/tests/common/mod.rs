//! Tiny one-dimensional posterior checks with fixed unit covariances, shared by
//! the acceptance suite and the oracle tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use rgm::config::ModelConfig;
use rgm::datasets::Dataset;
use rgm::distributions::KPriorMode;
use rgm::partition::{enumerate_set_partitions, Partition};
use rgm::repulsion::{log_repulse_h, RepulsionSpec};
use rgm::sampler::{run_chain_with_model, Model, RunSpec};
use rgm::trace::Trace;

pub const TINY: [f64; 4] = [-1.2, -0.4, 0.9, 2.1];
pub const TINY_TAU: f64 = 10.0;
pub const TINY_SWEEPS: usize = 200_000;
pub const TINY_BURN_IN: usize = 1_000;

pub fn tiny_config(g0: f64) -> ModelConfig {
    ModelConfig {
        g0,
        beta: 1.0,
        m: 0,
        k_intensity: 1.0,
        k_prior: KPriorMode::Plain,
        fixed_lambda: Some(1.0),
        tau: TINY_TAU,
        k_init: 1,
        k_max: 12,
        zk_mc: 100_000,
        ..Default::default()
    }
}

/// Log marginal likelihood of the points in one cluster: `y ~ N(0, I + τ² 11ᵀ)`.
pub fn cluster_log_marginal(y: &[f64], tau: f64) -> f64 {
    let s = y.len() as f64;
    let t2 = tau * tau;
    let sum: f64 = y.iter().sum();
    let sq: f64 = y.iter().map(|v| v * v).sum();
    let quad = sq - t2 * sum * sum / (1.0 + s * t2);
    -0.5 * (s * (2.0 * std::f64::consts::PI).ln() + (1.0 + s * t2).ln() + quad)
}

pub fn blocks(part: &Partition, data: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); part.n_clusters()];
    for (i, &c) in part.assignments().iter().enumerate() {
        out[c].push(data[i]);
    }
    out
}

pub fn normalize_log(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn partition_frequencies(trace: &Trace, parts: &[Partition]) -> Vec<f64> {
    let index: HashMap<&[usize], usize> = parts
        .iter()
        .enumerate()
        .map(|(i, p)| (p.assignments(), i))
        .collect();
    let mut freq = vec![0.0; parts.len()];
    for s in &trace.snapshots {
        freq[index[s.assignments.as_slice()]] += 1.0;
    }
    let t = trace.len() as f64;
    freq.iter_mut().for_each(|f| *f /= t);
    freq
}

pub fn run_tiny(cfg: &ModelConfig, sweeps: usize, seed: u64) -> Trace {
    let data = Dataset::new("tiny", 1, TINY.to_vec(), None).unwrap();
    let model = Model::new(cfg, data.n(), 1).unwrap();
    run_chain_with_model(
        &data,
        &model,
        RunSpec {
            sweeps: TINY_BURN_IN + sweeps,
            burn_in: TINY_BURN_IN,
            thin: 1,
            seed,
        },
    )
    .unwrap()
}

/// Full-model posterior over partitions for the repulsive tiny case by importance
/// sampling. For a partition `C` with `ℓ` blocks and `K ≥ ℓ` components,
/// `p(C, K | y) ∝ p(K) / Z_K · K_(ℓ) Γ(K)/Γ(n+K) Π_c Γ(1+|c|) · E[h_K Π_c L_c(μ_c)]`
/// with all centers from the prior. Proposing each occupied center from its
/// conjugate posterior instead turns the likelihood factor into the product of
/// cluster marginal likelihoods and leaves `h_K` as the importance weight.
/// `log_prior_over_zk(K, log Z_K)` gives `log p(K) - log Z_K` up to a constant.
pub fn repulsive_oracle<F: Fn(usize, f64) -> f64>(
    spec: &RepulsionSpec,
    k_top: usize,
    log_prior_over_zk: F,
    total_draws: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = TINY.len();
    // log Z_K by plain Monte Carlo over prior draws.
    let mut log_zk = vec![0.0; k_top + 1];
    for (k, slot) in log_zk.iter_mut().enumerate().skip(2) {
        let draws = 1_000_000;
        let mut acc = 0.0;
        let mut centers = vec![vec![0.0]; k];
        for _ in 0..draws {
            for c in centers.iter_mut() {
                c[0] = spec.tau * rng.sample::<f64, _>(StandardNormal);
            }
            acc += log_repulse_h(&centers, spec).exp();
        }
        *slot = (acc / draws as f64).ln();
    }
    let parts = enumerate_set_partitions(n).unwrap();
    let pairs: usize = parts.iter().map(|p| k_top + 1 - p.n_clusters()).sum();
    let per_pair = total_draws / pairs;
    let logs: Vec<f64> = parts
        .iter()
        .map(|part| {
            let bl = blocks(part, &TINY);
            let ell = bl.len();
            let post: Vec<(f64, f64)> = bl
                .iter()
                .map(|b| {
                    let v = 1.0 / (b.len() as f64 + 1.0 / (spec.tau * spec.tau));
                    (v * b.iter().sum::<f64>(), v)
                })
                .collect();
            let log_ml: f64 = bl.iter().map(|b| cluster_log_marginal(b, spec.tau)).sum();
            let log_blocks: f64 = bl.iter().map(|b| ln_gamma(1.0 + b.len() as f64)).sum();
            let terms: Vec<f64> = (ell..=k_top)
                .map(|k| {
                    let mut acc = 0.0;
                    let mut centers = vec![vec![0.0]; k];
                    for _ in 0..per_pair {
                        for (j, c) in centers.iter_mut().enumerate() {
                            let z: f64 = rng.sample(StandardNormal);
                            c[0] = match post.get(j) {
                                Some(&(m, v)) => m + v.sqrt() * z,
                                None => spec.tau * z,
                            };
                        }
                        acc += log_repulse_h(&centers, spec).exp();
                    }
                    let kf = k as f64;
                    let log_falling = ln_gamma(kf + 1.0) - ln_gamma(kf - ell as f64 + 1.0);
                    let log_dm = ln_gamma(kf) - ln_gamma(kf + n as f64);
                    log_prior_over_zk(k, log_zk[k])
                        + log_falling
                        + log_dm
                        + (acc / per_pair as f64).ln()
                })
                .collect();
            let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln() + log_blocks + log_ml
        })
        .collect();
    normalize_log(&logs)
}
