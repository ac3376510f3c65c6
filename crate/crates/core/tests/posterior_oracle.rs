//! Sampler output against an importance-sampling posterior over partitions,
//! for prior and kernel settings the acceptance suite does not cover.

mod common;

use common::*;
use rgm::distributions::KPriorMode;
use rgm::partition::enumerate_set_partitions;
use rgm::repulsion::{RepulsionForm, RepulsionSpec};
use statrs::function::gamma::ln_gamma;

const SWEEPS: usize = 60_000;

fn check(form: RepulsionForm, k_prior: KPriorMode, m: usize, seed: u64) -> f64 {
    let g0 = 4.0;
    let k_max = 10;
    let mut cfg = tiny_config(g0);
    cfg.form = form;
    cfg.k_prior = k_prior;
    cfg.m = m;
    cfg.k_max = k_max;
    cfg.ztilde_mc = 500;
    let spec = RepulsionSpec::new(form, g0, TINY_TAU).unwrap();
    // Unit intensity: p(K) ∝ 1/K!, times Z_K under the adjusted prior.
    let oracle = repulsive_oracle(
        &spec,
        k_max,
        |k, log_zk| {
            let base = -ln_gamma(k as f64 + 1.0);
            match k_prior {
                KPriorMode::Plain => base - log_zk,
                KPriorMode::ZkAdjusted => base,
            }
        },
        4_000_000,
        seed,
    );
    let parts = enumerate_set_partitions(4).unwrap();
    let freq = partition_frequencies(&run_tiny(&cfg, SWEEPS, seed + 1), &parts);
    tv(&oracle, &freq)
}

#[test]
fn adjusted_prior_with_auxiliary_components() {
    let d = check(RepulsionForm::MinPairwise, KPriorMode::ZkAdjusted, 2, 31);
    assert!(d < 0.03, "TV = {d}");
}

#[test]
fn product_form_plain_prior() {
    let d = check(RepulsionForm::ProductPower, KPriorMode::Plain, 1, 41);
    assert!(d < 0.03, "TV = {d}");
}
