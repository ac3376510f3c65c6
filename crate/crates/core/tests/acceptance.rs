//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//! Pass criterion numbers as arguments (or set `RGM_ACCEPTANCE=1,3`) to run a
//! subset. The exit status is non-zero on failures only when
//! `RGM_ACCEPTANCE_STRICT=1`, so known failures stay visible without breaking
//! the workspace test run.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;

use common::*;
use rgm::config::ModelConfig;
use rgm::datasets::{generate_synthetic, Scenario};
use rgm::diagnostics::{
    coclustering, posterior_k_distribution, posterior_k_mode, predictive_density_grid,
    shrinkage_constant, GridSpec, ShrinkageForm,
};
use rgm::distributions::{KPrior, KPriorMode};
use rgm::partition::{
    bruteforce_partition_prior, compute_vn_table, enumerate_set_partitions, log_partition_prior,
};
use rgm::repulsion::{estimate_log_zk, RepulsionForm, RepulsionSpec};
use rgm::sampler::{run_chain_with_model, Model, RunSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (
        1,
        "exact posterior over partitions, independent prior",
        exact_posterior,
    ),
    (
        2,
        "posterior over partitions, repulsive tiny case",
        repulsive_tiny_case,
    ),
    (3, "normalizing-constant sandwich", zk_sandwich),
    (4, "partition prior normalization", partition_normalization),
    (5, "trimodal density and number of components", trimodal),
    (6, "shrinkage of K under repulsion", shrinkage),
    (7, "ten-dimensional clustering", ten_dimensional),
    (8, "thirteen-component recovery", thirteen),
    (9, "shrinkage constant", shrinkage_constant_checks),
    (10, "byte-identical traces", determinism),
];

fn main() {
    let mut wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if let Ok(v) = std::env::var("RGM_ACCEPTANCE") {
        wanted.extend(v.split(',').filter_map(|s| s.trim().parse::<usize>().ok()));
    }
    let (mut passed, mut failed) = (0, 0);
    for (id, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} [{tag}] {name}: {} ({secs:.1} s)",
            out.detail
        );
        passed += usize::from(out.pass);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {passed} passed, {failed} failed");
    let strict = std::env::var("RGM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------

fn exact_posterior() -> Outcome {
    let start = Instant::now();
    let parts = enumerate_set_partitions(4).unwrap();
    let prior = KPrior::plain(1.0).unwrap();
    let vn = compute_vn_table(4, 1.0, &prior, 4, 1e-14).unwrap();
    let logs: Vec<f64> = parts
        .iter()
        .map(|p| {
            let lik: f64 = blocks(p, &TINY)
                .iter()
                .map(|b| cluster_log_marginal(b, TINY_TAU))
                .sum();
            log_partition_prior(p, &vn, 1.0).unwrap() + lik
        })
        .collect();
    let exact = normalize_log(&logs);
    let trace = run_tiny(&tiny_config(0.0), TINY_SWEEPS, 2024);
    let freq = partition_frequencies(&trace, &parts);
    let d = tv(&exact, &freq);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        d < 0.02 && secs < 120.0,
        format!("TV = {d:.4} (< 0.02) over {} sweeps", trace.len()),
    )
}

fn repulsive_tiny_case() -> Outcome {
    let g0 = 5.0;
    let log_pk = KPrior::plain(1.0).unwrap();
    let spec = RepulsionSpec::new(RepulsionForm::MinPairwise, g0, TINY_TAU).unwrap();
    let oracle = repulsive_oracle(
        &spec,
        12,
        |k, log_zk| log_pk.log_pmf(k).unwrap() - log_zk,
        10_000_000,
        77,
    );
    let parts = enumerate_set_partitions(4).unwrap();
    let trace = run_tiny(&tiny_config(g0), TINY_SWEEPS, 2025);
    let freq = partition_frequencies(&trace, &parts);
    let d = tv(&oracle, &freq);
    Outcome::new(
        d < 0.03,
        format!("TV = {d:.4} (< 0.03) against the importance-sampling posterior"),
    )
}

// ---------------------------------------------------------------------------

fn zk_sandwich() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for g0 in [1.0, 10.0] {
        let spec = RepulsionSpec::new(RepulsionForm::MinPairwise, g0, 10.0).unwrap();
        for k in 2..=8 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
            let est = estimate_log_zk(k, &spec, 2, 200_000, &mut rng).unwrap();
            let neg = -est.log_zk;
            let upper = est.c1() * k as f64 + 4.0 * est.std_err;
            ok &= neg >= 0.0 && neg <= upper;
            worst = worst.min(upper - neg);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        ok && secs < 60.0,
        format!(
            "0 <= -log Z_K <= c1 K + 4 SE for K = 2..8, g0 in {{1, 10}}; smallest slack {worst:.3}"
        ),
    )
}

fn partition_normalization() -> Outcome {
    let mut worst_total: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for n in 2..=5 {
        for beta in [0.5, 1.0] {
            for lambda in [1.0, 3.0] {
                let prior = KPrior::plain(lambda).unwrap();
                let vn = compute_vn_table(n, beta, &prior, n, 1e-14).unwrap();
                let brute = bruteforce_partition_prior(n, beta, &prior, 30).unwrap();
                let mut total = 0.0;
                for (part, b) in &brute {
                    let p = log_partition_prior(part, &vn, beta).unwrap().exp();
                    total += p;
                    worst_rel = worst_rel.max((p - b).abs() / b);
                }
                worst_total = worst_total.max((total - 1.0).abs());
            }
        }
    }
    Outcome::new(
        worst_total <= 1e-6 && worst_rel <= 1e-6,
        format!(
            "max |sum - 1| = {worst_total:.2e}, max relative gap to brute force = {worst_rel:.2e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// Synthetic experiments at full size: 2000 sweeps, 1000 burn-in.

fn full_run(seed: u64) -> RunSpec {
    RunSpec {
        sweeps: 2000,
        burn_in: 1000,
        thin: 1,
        seed,
    }
}

fn trimodal() -> Outcome {
    let data = generate_synthetic(Scenario::Trimodal2D, 1000, 101).unwrap();
    let cfg = ModelConfig {
        g0: 10.0,
        tau: 10.0,
        m: 2,
        sigma_lo: 0.1,
        sigma_hi: 10.0,
        k_max: 15,
        zk_mc: 100_000,
        ..Default::default()
    };
    let model = Model::new(&cfg, data.n(), data.p()).unwrap();
    let trace = run_chain_with_model(&data, &model, full_run(102)).unwrap();
    let dist = posterior_k_distribution(&trace);
    let mode = posterior_k_mode(&trace);
    let p3 = dist.get(&3).copied().unwrap_or(0.0);
    let grid = predictive_density_grid(&trace, &GridSpec::square(2, -16.0, 16.0, 129)).unwrap();
    let l1 = grid.l1_distance(|x| Scenario::Trimodal2D.density(x).unwrap());
    Outcome::new(
        mode == Some(3) && p3 > 0.5 && l1 < 0.1,
        format!("mode K = {mode:?}, P(K=3) = {p3:.3} (> 0.5), grid L1 = {l1:.4} (< 0.1)"),
    )
}

fn shrinkage() -> Outcome {
    let mut wins = 0;
    let mut pairs = Vec::new();
    for rep in 0..5u64 {
        let data = generate_synthetic(Scenario::EmgConvolution2D, 1000, 200 + rep).unwrap();
        let mean_k = |g0: f64| {
            let cfg = ModelConfig {
                g0,
                tau: 10.0,
                m: 2,
                fixed_lambda: Some(1.0),
                k_prior: KPriorMode::ZkAdjusted,
                k_intensity: 1.0,
                k_max: 20,
                zk_mc: 100_000,
                ..Default::default()
            };
            let model = Model::new(&cfg, data.n(), data.p()).unwrap();
            let trace = run_chain_with_model(&data, &model, full_run(300 + rep)).unwrap();
            trace.snapshots.iter().map(|s| s.k as f64).sum::<f64>() / trace.len() as f64
        };
        let (rep_k, ind_k) = (mean_k(7.0), mean_k(0.0));
        wins += usize::from(rep_k < ind_k);
        pairs.push(format!("{rep_k:.2}/{ind_k:.2}"));
    }
    Outcome::new(
        wins >= 4,
        format!(
            "E[K] repulsive < independent in {wins}/5 replicates ({})",
            pairs.join(", ")
        ),
    )
}

fn ten_dimensional() -> Outcome {
    let data = generate_synthetic(Scenario::TenD3Comp, 500, 401).unwrap();
    let cfg = ModelConfig {
        g0: 70.0,
        k_init: 10,
        k_max: 15,
        zk_mc: 100_000,
        ..Default::default()
    };
    let model = Model::new(&cfg, data.n(), data.p()).unwrap();
    let trace = run_chain_with_model(&data, &model, full_run(402)).unwrap();
    let mode = posterior_k_mode(&trace);
    let first3 = trace.k_path.iter().position(|&k| k == 3).map(|i| i + 1);
    let mis = coclustering(&trace, data.labels())
        .unwrap()
        .misclassification
        .unwrap();
    Outcome::new(
        mode == Some(3) && first3.is_some_and(|s| s <= 100) && mis < 1e-3,
        format!("mode K = {mode:?}, first K = 3 at sweep {first3:?} (<= 100), misclassification = {mis:.3e} (< 1e-3)"),
    )
}

fn thirteen() -> Outcome {
    let data = generate_synthetic(Scenario::ThirteenComp2D, 2000, 501).unwrap();
    let cfg = ModelConfig {
        g0: 10.0,
        k_max: 25,
        zk_mc: 100_000,
        k_init: 20,
        ..Default::default()
    };
    let model = Model::new(&cfg, data.n(), data.p()).unwrap();
    let trace = run_chain_with_model(&data, &model, full_run(502)).unwrap();
    let dist = posterior_k_distribution(&trace);
    let mode = posterior_k_mode(&trace);
    let shown: Vec<String> = dist.iter().map(|(k, f)| format!("{k}:{f:.2}")).collect();
    Outcome::new(
        mode == Some(13),
        format!("mode K = {mode:?} (distribution {})", shown.join(" ")),
    )
}

// ---------------------------------------------------------------------------

/// `χ_r(0) = 1` and, on a log-spaced `g0` grid, the values after the first
/// interior turning point never increase.
fn shrinkage_constant_checks() -> Outcome {
    let (n, big_n, tau, p, e0, delta) = (1000, 5, 10.0, 2, 0.05, 1e-4);
    let mut ok = true;
    let mut notes = Vec::new();
    for (label, r) in [("r=1", ShrinkageForm::R1), ("r=2", ShrinkageForm::R2)] {
        let chi = |g0: f64| shrinkage_constant(r, g0, n, big_n, tau, p, e0, delta).unwrap();
        let at_zero = chi(0.0);
        let grid: Vec<f64> = (0..=1200)
            .map(|i| chi(10f64.powf(-4.0 + i as f64 / 100.0)))
            .collect();
        let turn = grid
            .windows(3)
            .position(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
            .map(|i| i + 1);
        let after_ok = turn.is_some_and(|t| grid[t..].windows(2).all(|w| w[1] <= w[0]));
        ok &= at_zero == 1.0 && after_ok;
        let turn_g0 = turn.map(|t| 10f64.powf(-4.0 + t as f64 / 100.0));
        notes.push(format!(
            "{label}: chi(0) = {at_zero}, turning point g0 ~ {}, non-increasing after = {after_ok}, chi(1e8) = {:.3}",
            turn_g0.map_or("none".into(), |g| format!("{g:.3e}")),
            grid[1200]
        ));
    }
    Outcome::new(ok, notes.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(Scenario::Trimodal2D, 200, 601).unwrap();
    let cfg = ModelConfig {
        k_max: 12,
        zk_mc: 20_000,
        ztilde_mc: 200,
        ..Default::default()
    };
    let run = RunSpec {
        sweeps: 60,
        burn_in: 20,
        thin: 1,
        seed: 602,
    };
    let write = |name: &str| {
        let model = Model::new(&cfg, data.n(), data.p()).unwrap();
        let path = dir.path().join(name);
        run_chain_with_model(&data, &model, run)
            .unwrap()
            .save(&path)
            .unwrap();
        std::fs::read(path).unwrap()
    };
    let (a, b) = (write("a.jsonl"), write("b.jsonl"));
    Outcome::new(
        a == b && !a.is_empty(),
        format!(
            "two runs wrote {} and {} bytes, identical = {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}
