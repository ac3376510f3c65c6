//! Blocked-collapsed Gibbs sampler for the repulsive Gaussian mixture.
//!
//! One sweep runs, in order:
//! 1. reassignment of every observation with an auxiliary empty component,
//! 2. covariance updates for the occupied clusters,
//! 3. a draw of `K` over `ℓ..=ℓ+m` with the centers integrated out,
//! 4. a joint accept-reject draw of all `K` centers.
//!
//! Covariances are refreshed before `K` so that the center integral in step 3
//! conditions on the current partition and covariances only.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ModelConfig;
use crate::datasets::Dataset;
use crate::distributions::{
    log_phi, sample_diag_normal, sample_isotropic, sample_log_categorical, KPrior, KPriorMode,
    TruncatedInvGamma,
};
use crate::error::{Error, Result};
use crate::partition::{compute_vn_table, k_given_partition_log_weights, Partition, VnTable};
use crate::repulsion::{
    conjugate_center_posterior, log_repulse_h, sample_free_centers, CenterProposal, RepulsionSpec,
    ZkTable,
};
use crate::trace::{Snapshot, Trace, TraceMeta};

/// Everything a chain needs besides its state: the configuration and the
/// precomputed `Z_K` and `V_n` tables for one dataset shape.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    spec: RepulsionSpec,
    n: usize,
    p: usize,
    k_prior: KPrior,
    zk: ZkTable,
    vn: VnTable,
    cov_prior: TruncatedInvGamma,
}

/// `Z_K` table for `config` in dimension `p`: exact zeros when `g0 = 0`, else
/// Monte Carlo with a seed derived from the configuration.
pub fn build_zk_table(config: &ModelConfig, p: usize) -> Result<ZkTable> {
    if config.g0 == 0.0 {
        return Ok(ZkTable::from_log_values(1, vec![0.0; config.k_max]));
    }
    ZkTable::estimate(
        &config.spec(),
        p,
        config.k_max,
        config.zk_mc,
        config.zk_seed(p),
    )
}

/// Like [`build_zk_table`], reading and writing `zk-<key>.txt` under `dir`.
pub fn cached_zk_table(config: &ModelConfig, p: usize, dir: &Path) -> Result<ZkTable> {
    let path = dir.join(format!("zk-{}.txt", config.zk_key(p)));
    if path.exists() {
        if let Ok(t) = ZkTable::load(&path) {
            if t.first_k() == 1 && t.last_k() == config.k_max {
                log::debug!("loaded Z_K table from {}", path.display());
                return Ok(t);
            }
        }
        log::warn!("ignoring unusable Z_K cache file {}", path.display());
    }
    let table = build_zk_table(config, p)?;
    std::fs::create_dir_all(dir)?;
    table.save(&path)?;
    Ok(table)
}

impl Model {
    pub fn new(config: &ModelConfig, n: usize, p: usize) -> Result<Self> {
        config.validate()?;
        let zk = build_zk_table(config, p)?;
        Self::with_zk_table(config, n, p, zk)
    }

    pub fn with_zk_table(config: &ModelConfig, n: usize, p: usize, zk: ZkTable) -> Result<Self> {
        config.validate()?;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if p == 0 {
            return Err(Error::invalid("p", "dimension must be positive"));
        }
        if zk.first_k() != 1 || zk.last_k() != config.k_max {
            return Err(Error::invalid(
                "zk_table",
                format!(
                    "must cover 1..={}, covers {}..={}",
                    config.k_max,
                    zk.first_k(),
                    zk.last_k()
                ),
            ));
        }
        let k_prior = match config.k_prior {
            KPriorMode::Plain => KPrior::plain(config.k_intensity)?,
            KPriorMode::ZkAdjusted => KPrior::zk_adjusted(config.k_intensity, zk.clone())?,
        };
        // Z_K is only tabulated up to k_max, so a repulsive model lives on K <= k_max.
        let k_prior = if config.g0 > 0.0 {
            k_prior.truncated(config.k_max)?
        } else {
            k_prior
        };
        let vn = compute_vn_table(n, config.beta, &k_prior, n, config.vn_tol)?;
        let cov_prior =
            TruncatedInvGamma::new(config.a0, config.b0, config.lambda_lo(), config.lambda_hi())?;
        Ok(Self {
            config: config.clone(),
            spec: config.spec(),
            n,
            p,
            k_prior,
            zk,
            vn,
            cov_prior,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn zk_table(&self) -> &ZkTable {
        &self.zk
    }

    pub fn vn_table(&self) -> &VnTable {
        &self.vn
    }

    pub fn k_prior(&self) -> &KPrior {
        &self.k_prior
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.p() != self.p || data.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n * self.p,
                found: data.n() * data.p(),
            });
        }
        Ok(())
    }

    fn draw_prior_lambdas<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self.config.fixed_lambda {
            Some(l) => Ok(vec![l; self.p]),
            None => (0..self.p).map(|_| self.cov_prior.sample(rng)).collect(),
        }
    }

    fn log_zk(&self, k: usize) -> Result<f64> {
        self.zk.log_zk(k).ok_or(Error::KOutsideTable {
            k,
            first: self.zk.first_k(),
            last: self.zk.last_k(),
        })
    }

    /// Accept-reject draw with one fresh retry after the attempt cap.
    fn sample_centers<F: AsRef<[f64]>, R: Rng + ?Sized>(
        &self,
        fixed: &[F],
        proposals: &[CenterProposal],
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let attempts = self.config.max_attempts;
        match sample_free_centers(fixed, proposals, self.p, &self.spec, attempts, rng) {
            Err(Error::RejectionExhausted { .. }) => {
                log::warn!("center rejection sampler hit {attempts} attempts; retrying once");
                sample_free_centers(fixed, proposals, self.p, &self.spec, attempts, rng).map_err(
                    |e| match e {
                        Error::RejectionExhausted { attempts } => Error::RejectionExhausted {
                            attempts: 2 * attempts,
                        },
                        other => other,
                    },
                )
            }
            other => other,
        }
    }
}

/// Current partition, occupied-cluster parameters and the `K − ℓ` empty components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    part: Partition,
    centers: Vec<Vec<f64>>,
    lambdas: Vec<Vec<f64>>,
    k: usize,
    empty_centers: Vec<Vec<f64>>,
    empty_lambdas: Vec<Vec<f64>>,
}

impl MixtureState {
    /// State with the given partition and occupied parameters and no empty components.
    pub fn new(part: Partition, centers: Vec<Vec<f64>>, lambdas: Vec<Vec<f64>>) -> Result<Self> {
        let state = Self {
            k: part.n_clusters(),
            part,
            centers,
            lambdas,
            empty_centers: Vec::new(),
            empty_lambdas: Vec::new(),
        };
        state.validate()?;
        Ok(state)
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.part.n_clusters()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn lambdas(&self) -> &[Vec<f64>] {
        &self.lambdas
    }

    pub fn empty_centers(&self) -> &[Vec<f64>] {
        &self.empty_centers
    }

    pub fn empty_lambdas(&self) -> &[Vec<f64>] {
        &self.empty_lambdas
    }

    /// All `K` centers, occupied clusters first.
    pub fn all_centers(&self) -> impl Iterator<Item = &Vec<f64>> + '_ {
        self.centers.iter().chain(&self.empty_centers)
    }

    pub fn all_lambdas(&self) -> impl Iterator<Item = &Vec<f64>> + '_ {
        self.lambdas.iter().chain(&self.empty_lambdas)
    }

    pub fn validate(&self) -> Result<()> {
        self.part.validate()?;
        let ell = self.ell();
        if self.centers.len() != ell || self.lambdas.len() != ell {
            return Err(Error::invalid(
                "state",
                "one center and covariance per occupied cluster",
            ));
        }
        if self.k < ell
            || self.empty_centers.len() != self.k - ell
            || self.empty_lambdas.len() != self.k - ell
        {
            return Err(Error::invalid(
                "state",
                format!("K = {} inconsistent with ℓ = {ell}", self.k),
            ));
        }
        let p = self.centers.first().map_or(0, Vec::len);
        if self
            .all_centers()
            .chain(self.all_lambdas())
            .any(|v| v.len() != p)
        {
            return Err(Error::invalid(
                "state",
                "parameter vectors of unequal length",
            ));
        }
        Ok(())
    }

    /// Per-component mixing weights `(|c|+β)/(n+Kβ)` for occupied and `β/(n+Kβ)`
    /// for empty components, in [`MixtureState::all_centers`] order.
    pub fn predictive_weights(&self, beta: f64) -> Vec<f64> {
        let denom = self.part.n() as f64 + self.k as f64 * beta;
        self.part
            .sizes()
            .iter()
            .map(|&s| (s as f64 + beta) / denom)
            .chain(std::iter::repeat_n(beta / denom, self.k - self.ell()))
            .collect()
    }

    fn cluster_sums(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; data.p()]; self.ell()];
        for (i, y) in data.rows().enumerate() {
            let s = &mut sums[self.part.cluster_of(i)];
            s.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        }
        sums
    }

    fn drop_empties(&mut self) {
        self.empty_centers.clear();
        self.empty_lambdas.clear();
        self.k = self.ell();
    }

    fn canonicalize(&mut self) {
        let perm = self.part.canonicalize();
        let mut centers = vec![Vec::new(); perm.len()];
        let mut lambdas = vec![Vec::new(); perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            centers[new] = std::mem::take(&mut self.centers[old]);
            lambdas[new] = std::mem::take(&mut self.lambdas[old]);
        }
        self.centers = centers;
        self.lambdas = lambdas;
    }
}

/// `k_init` centers from the prior, unit covariances clipped into the eigenvalue
/// bounds (or the fixed value), and each observation on its most likely component.
pub fn init_state<R: Rng + ?Sized>(
    data: &Dataset,
    model: &Model,
    k_init: usize,
    rng: &mut R,
) -> Result<MixtureState> {
    model.check_data(data)?;
    if k_init == 0 || k_init > data.n() {
        return Err(Error::invalid(
            "k_init",
            format!("must lie in 1..={}, got {k_init}", data.n()),
        ));
    }
    let cfg = &model.config;
    let lambda = cfg
        .fixed_lambda
        .unwrap_or_else(|| 1.0f64.clamp(cfg.lambda_lo(), cfg.lambda_hi()));
    let centers: Vec<Vec<f64>> = (0..k_init)
        .map(|_| sample_isotropic(data.p(), cfg.tau, rng))
        .collect();
    let lambdas = vec![vec![lambda; data.p()]; k_init];
    let labels: Vec<usize> = data
        .rows()
        .map(|y| {
            let mut best = (0, f64::NEG_INFINITY);
            for (k, (mu, l)) in centers.iter().zip(&lambdas).enumerate() {
                let lp = log_phi(y, mu, l);
                if lp > best.1 {
                    best = (k, lp);
                }
            }
            best.0
        })
        .collect();
    let part = Partition::from_labels(&labels);
    // Keep the used components in order of first appearance.
    let mut order = Vec::new();
    for &l in &labels {
        if !order.contains(&l) {
            order.push(l);
        }
    }
    let centers = order.iter().map(|&k| centers[k].clone()).collect();
    let lambdas = order.iter().map(|&k| lambdas[k].clone()).collect();
    MixtureState::new(part, centers, lambdas)
}

/// Step 1 for observation `i`: reseat it among the other clusters and one
/// auxiliary empty component.
pub fn reassign_step<R: Rng + ?Sized>(
    state: &mut MixtureState,
    i: usize,
    data: &Dataset,
    model: &Model,
    rng: &mut R,
) -> Result<()> {
    let cfg = &model.config;
    let y = data.row(i);
    state.drop_empties();
    let c = state.part.cluster_of(i);
    let singleton = state.part.sizes()[c] == 1;
    let own = singleton.then(|| (state.centers[c].clone(), state.lambdas[c].clone()));
    if let Some(removed) = state.part.detach(i) {
        state.centers.swap_remove(removed);
        state.lambdas.swap_remove(removed);
    }
    let ell = state.part.n_clusters();

    let log_new = model.vn.log_new_cluster_weight(ell)?;
    let aux = match own {
        Some(a) => Some(a),
        None if log_new == f64::NEG_INFINITY => None,
        None => draw_auxiliary(state, model, rng)?,
    };

    let mut weights: Vec<f64> = state
        .part
        .sizes()
        .iter()
        .zip(state.centers.iter().zip(&state.lambdas))
        .map(|(&s, (mu, l))| (s as f64 + cfg.beta).ln() + log_phi(y, mu, l))
        .collect();
    weights.push(match &aux {
        Some((mu, l)) => log_new + log_phi(y, mu, l),
        None => f64::NEG_INFINITY,
    });
    let choice = sample_log_categorical(&weights, rng).ok_or_else(|| {
        Error::invalid(
            "reassign",
            format!("observation {i} has zero weight everywhere"),
        )
    })?;
    if choice == ell {
        let (mu, l) = aux.expect("finite weight implies an auxiliary draw");
        state.centers.push(mu);
        state.lambdas.push(l);
    }
    state.part.attach(i, choice);
    state.k = state.part.n_clusters();
    Ok(())
}

/// Auxiliary component for a non-singleton: `K` from its conditional given the
/// other clusters plus a new one, a prior covariance, and the lowest-indexed of
/// `K − ℓ` empty centers drawn from the prior thinned by `h_K`.
fn draw_auxiliary<R: Rng + ?Sized>(
    state: &MixtureState,
    model: &Model,
    rng: &mut R,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let cfg = &model.config;
    let ell = state.part.n_clusters();
    let w = k_given_partition_log_weights(
        ell + 1,
        model.n,
        cfg.m,
        cfg.k_weights,
        cfg.beta,
        &model.k_prior,
    );
    let Some(offset) = sample_log_categorical(&w, rng) else {
        return Ok(None);
    };
    let k = ell + 1 + offset;
    let lambdas = model.draw_prior_lambdas(rng)?;
    let proposals = vec![CenterProposal::Prior; k - ell];
    let mut empties = model.sample_centers(&state.centers, &proposals, rng)?;
    Ok(Some((empties.swap_remove(0), lambdas)))
}

/// Step 2: draw `K ∈ ℓ..=ℓ+m` with weight `Z̃_K w(K) / Z_K`, where `Z̃_K` is a
/// Monte Carlo estimate of `E[h_K]` with occupied centers from their conjugate
/// posteriors and empty centers from the prior.
pub fn resample_k_step<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &Dataset,
    model: &Model,
    rng: &mut R,
) -> Result<()> {
    let log_w = k_log_weights(state, data, model, rng)?;
    let idx = sample_log_categorical(&log_w, rng).ok_or(Error::DegenerateEstimate {
        n_mc: model.config.ztilde_mc,
    })?;
    state.drop_empties();
    state.k = state.ell() + idx;
    // Placeholders until the center step; keeps the state consistent.
    state.empty_centers = vec![vec![0.0; model.p]; idx];
    state.empty_lambdas = vec![vec![0.0; model.p]; idx];
    Ok(())
}

/// Unnormalized log weights of `K = ℓ..=ℓ+m` used by [`resample_k_step`].
pub fn k_log_weights<R: Rng + ?Sized>(
    state: &MixtureState,
    data: &Dataset,
    model: &Model,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cfg = &model.config;
    let ell = state.ell();
    let base =
        k_given_partition_log_weights(ell, model.n, cfg.m, cfg.k_weights, cfg.beta, &model.k_prior);
    let candidates = base.iter().filter(|w| w.is_finite()).count();
    let posteriors: Vec<(Vec<f64>, Vec<f64>)> = state
        .cluster_sums(data)
        .iter()
        .zip(state.part.sizes())
        .zip(&state.lambdas)
        .map(|((s, &n), l)| conjugate_center_posterior(s, n, l, cfg.tau))
        .collect();
    base.iter()
        .enumerate()
        .map(|(j, &w)| {
            if w == f64::NEG_INFINITY {
                return Ok(w);
            }
            let k = ell + j;
            if model.spec.is_independent() {
                return Ok(w);
            }
            let log_zk = model.log_zk(k)?;
            let log_ztilde = if candidates > 1 {
                log_ztilde(&posteriors, k, model, rng)
            } else {
                0.0
            };
            Ok(w + log_ztilde - log_zk)
        })
        .collect()
}

fn log_ztilde<R: Rng + ?Sized>(
    posteriors: &[(Vec<f64>, Vec<f64>)],
    k: usize,
    model: &Model,
    rng: &mut R,
) -> f64 {
    let n_mc = model.config.ztilde_mc;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut log_h = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        centers.clear();
        centers.extend(
            posteriors
                .iter()
                .map(|(m, v)| sample_diag_normal(m, v, rng)),
        );
        centers
            .extend((posteriors.len()..k).map(|_| sample_isotropic(model.p, model.spec.tau, rng)));
        log_h.push(log_repulse_h(&centers, &model.spec));
    }
    crate::distributions::log_sum_exp(&log_h) - (n_mc as f64).ln()
}

/// Covariance update: `λ_jc ~ IG(a0 + |c|/2, b0 + ½ Σ_{i∈c} (y_ij − γ_cj)²)`
/// truncated to the eigenvalue bounds. No-op when covariances are fixed.
pub fn resample_covariances_step<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &Dataset,
    model: &Model,
    rng: &mut R,
) -> Result<()> {
    if model.config.fixed_lambda.is_some() {
        return Ok(());
    }
    let mut ss = vec![vec![0.0; model.p]; state.ell()];
    for (i, y) in data.rows().enumerate() {
        let c = state.part.cluster_of(i);
        for ((s, &v), &mu) in ss[c].iter_mut().zip(y).zip(&state.centers[c]) {
            *s += (v - mu) * (v - mu);
        }
    }
    for (c, s) in ss.iter().enumerate() {
        let count = state.part.sizes()[c];
        for (j, &sj) in s.iter().enumerate() {
            state.lambdas[c][j] = model.cov_prior.posterior(count, sj).sample(rng)?;
        }
    }
    Ok(())
}

/// Center update: occupied clusters proposed from `N(m_c, V_c)` with
/// `V_c = (|c|/λ + τ^{-2})^{-1}` and `m_c = V_c Σ_{i∈c} y_i / λ`, empty components from
/// the prior, the whole configuration accepted when `U < h_K`. Empty covariances
/// are drawn from their prior.
pub fn resample_centers_step<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &Dataset,
    model: &Model,
    rng: &mut R,
) -> Result<()> {
    let ell = state.ell();
    let n_empty = state.k - ell;
    let mut proposals: Vec<CenterProposal> = state
        .cluster_sums(data)
        .iter()
        .zip(state.part.sizes())
        .zip(&state.lambdas)
        .map(|((s, &n), l)| {
            let (mean, var) = conjugate_center_posterior(s, n, l, model.config.tau);
            CenterProposal::Gaussian { mean, var }
        })
        .collect();
    proposals.extend(std::iter::repeat_n(CenterProposal::Prior, n_empty));
    let mut centers = model.sample_centers::<Vec<f64>, _>(&[], &proposals, rng)?;
    state.empty_centers = centers.split_off(ell);
    state.centers = centers;
    state.empty_lambdas = (0..n_empty)
        .map(|_| model.draw_prior_lambdas(rng))
        .collect::<Result<_>>()?;
    Ok(())
}

/// One full sweep; labels are canonicalized at the end.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &Dataset,
    model: &Model,
    rng: &mut R,
) -> Result<()> {
    for i in 0..data.n() {
        reassign_step(state, i, data, model, rng)?;
    }
    resample_covariances_step(state, data, model, rng)?;
    resample_k_step(state, data, model, rng)?;
    resample_centers_step(state, data, model, rng)?;
    state.canonicalize();
    debug_assert!(state.validate().is_ok());
    Ok(())
}

/// `log Σ_k w_k φ(y_i | μ_k, Λ_k)` for every observation.
pub fn log_predictive(state: &MixtureState, data: &Dataset, beta: f64) -> Vec<f64> {
    let log_w: Vec<f64> = state
        .predictive_weights(beta)
        .iter()
        .map(|w| w.ln())
        .collect();
    let comps: Vec<(&Vec<f64>, &Vec<f64>)> = state.all_centers().zip(state.all_lambdas()).collect();
    let mut buf = vec![0.0; comps.len()];
    data.rows()
        .map(|y| {
            for (b, ((mu, l), lw)) in buf.iter_mut().zip(comps.iter().zip(&log_w)) {
                *b = lw + log_phi(y, mu, l);
            }
            crate::distributions::log_sum_exp(&buf)
        })
        .collect()
}

fn snapshot(iteration: usize, state: &MixtureState, data: &Dataset, beta: f64) -> Snapshot {
    Snapshot {
        iteration,
        k: state.k,
        ell: state.ell(),
        sizes: state.part.sizes().to_vec(),
        weights: state.predictive_weights(beta),
        centers: state.all_centers().flatten().copied().collect(),
        lambdas: state.all_lambdas().flatten().copied().collect(),
        assignments: state.part.assignments().to_vec(),
        log_pred: log_predictive(state, data, beta),
    }
}

/// Sweep schedule for [`run_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.burn_in >= self.sweeps {
            return Err(Error::invalid(
                "burn_in",
                format!(
                    "need burn_in < sweeps, got {} and {}",
                    self.burn_in, self.sweeps
                ),
            ));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin", "must be positive"));
        }
        Ok(())
    }

    fn retains(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in - 1).is_multiple_of(self.thin)
    }
}

/// Build the model (estimating `Z_K` if needed) and run one chain.
pub fn run_chain(
    data: &Dataset,
    config: &ModelConfig,
    n_sweeps: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<Trace> {
    let run = RunSpec {
        sweeps: n_sweeps,
        burn_in,
        thin,
        seed,
    };
    run.validate()?;
    let model = Model::new(config, data.n(), data.p())?;
    run_chain_with_model(data, &model, run)
}

/// Run one chain from `init_state` with a `ChaCha8` stream seeded by `run.seed`.
/// Records retained snapshots and the `K` path of every sweep.
pub fn run_chain_with_model(data: &Dataset, model: &Model, run: RunSpec) -> Result<Trace> {
    run.validate()?;
    model.check_data(data)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let beta = model.config.beta;
    let cap = model.k_prior.support_max().unwrap_or(usize::MAX);
    let k_init = model.config.k_init.min(data.n()).min(cap);
    let mut state = init_state(data, model, k_init, &mut rng)?;
    let mut snapshots = Vec::with_capacity((run.sweeps - run.burn_in).div_ceil(run.thin));
    let mut k_path = Vec::with_capacity(run.sweeps);
    for iteration in 1..=run.sweeps {
        sweep(&mut state, data, model, &mut rng).map_err(|e| Error::Sweep {
            iteration,
            source: Box::new(e),
        })?;
        k_path.push(state.k);
        if run.retains(iteration) {
            snapshots.push(snapshot(iteration, &state, data, beta));
        }
    }
    Ok(Trace {
        meta: Some(TraceMeta {
            seed: run.seed,
            config_hash: model.config.content_hash(),
            elapsed_secs: start.elapsed().as_secs_f64(),
        }),
        snapshots,
        k_path,
    })
}

/// Independent chains sharing one model, run concurrently; one trace per seed.
pub fn run_chains(
    data: &Dataset,
    model: &Model,
    run: RunSpec,
    seeds: &[u64],
) -> Result<Vec<Trace>> {
    seeds
        .par_iter()
        .map(|&seed| run_chain_with_model(data, model, RunSpec { seed, ..run }))
        .collect()
}
