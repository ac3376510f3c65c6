//! Post-processing of traces.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::distributions::{log_phi, log_sum_exp};
use crate::error::{Error, Result};
use crate::trace::{Snapshot, Trace};

/// `Σ_i log[(1/T) Σ_t p(y_i | Θ_t)]` over the `T` retained sweeps. Larger is better.
pub fn log_cpo(trace: &Trace) -> Result<f64> {
    let first = trace.snapshots.first().ok_or(Error::EmptyDataset)?;
    let n = first.log_pred.len();
    let t = trace.len() as f64;
    let mut col = Vec::with_capacity(trace.len());
    let mut total = 0.0;
    for i in 0..n {
        col.clear();
        col.extend(trace.snapshots.iter().map(|s| s.log_pred[i]));
        let v = log_sum_exp(&col) - t.ln();
        if v == f64::NEG_INFINITY {
            log::warn!("observation {i} has zero predictive density in every sweep");
        }
        total += v;
    }
    Ok(total)
}

/// Regular grid: `points[j]` nodes from `lo[j]` to `hi[j]` inclusive on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn square(p: usize, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            lo: vec![lo; p],
            hi: vec![hi; p],
            points: vec![points; p],
        }
    }

    fn axes(&self) -> Result<Vec<Vec<f64>>> {
        if self.lo.len() != self.hi.len()
            || self.lo.len() != self.points.len()
            || self.lo.is_empty()
        {
            return Err(Error::invalid(
                "grid",
                "lo, hi and points must have equal positive length",
            ));
        }
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(&self.points)
            .map(|((&lo, &hi), &m)| {
                if m < 2 || lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                    return Err(Error::invalid(
                        "grid",
                        format!("axis [{lo}, {hi}] with {m} points"),
                    ));
                }
                let step = (hi - lo) / (m - 1) as f64;
                Ok((0..m).map(|i| lo + i as f64 * step).collect())
            })
            .collect()
    }
}

/// Density values on a grid, row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coordinates of grid node `idx`.
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.axes.len()];
        for (j, axis) in self.axes.iter().enumerate().rev() {
            x[j] = axis[idx % axis.len()];
            idx /= axis.len();
        }
        x
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a[1] - a[0]).product()
    }

    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// `∫ |f̂ − f|` approximated on the grid.
    pub fn l1_distance<F: Fn(&[f64]) -> f64 + Sync>(&self, truth: F) -> f64 {
        let vol = self.cell_volume();
        (0..self.len())
            .into_par_iter()
            .map(|i| (self.values[i] - truth(&self.point(i))).abs())
            .sum::<f64>()
            * vol
    }

    /// CSV with columns `x1,…,xp,density`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header: Vec<String> = (1..=self.axes.len()).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},density", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let coords: Vec<String> = self.point(i).iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{},{v:?}", coords.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mixture_density(s: &Snapshot, x: &[f64]) -> f64 {
    (0..s.k)
        .map(|k| s.weights[k] * log_phi(x, s.center(k), s.lambda(k)).exp())
        .sum()
}

/// Average over retained sweeps of each sweep's mixture density.
pub fn predictive_density_grid(trace: &Trace, grid: &GridSpec) -> Result<DensityGrid> {
    let first = trace.snapshots.first().ok_or(Error::EmptyDataset)?;
    let axes = grid.axes()?;
    if first.p() != axes.len() {
        return Err(Error::DimensionMismatch {
            expected: first.p(),
            found: axes.len(),
        });
    }
    let mut out = DensityGrid {
        values: vec![0.0; axes.iter().map(Vec::len).product()],
        axes,
    };
    let t = trace.len() as f64;
    let values: Vec<f64> = (0..out.len())
        .into_par_iter()
        .map(|i| {
            let x = out.point(i);
            trace
                .snapshots
                .iter()
                .map(|s| mixture_density(s, &x))
                .sum::<f64>()
                / t
        })
        .collect();
    out.values = values;
    Ok(out)
}

/// Relative frequency of each `K` over retained sweeps.
pub fn posterior_k_distribution(trace: &Trace) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for s in &trace.snapshots {
        *counts.entry(s.k).or_insert(0.0) += 1.0;
    }
    let t = trace.len() as f64;
    counts.values_mut().for_each(|c| *c /= t);
    counts
}

/// Most frequent `K` (smallest on ties).
pub fn posterior_k_mode(trace: &Trace) -> Option<usize> {
    posterior_k_distribution(trace)
        .into_iter()
        .fold(None, |best: Option<(usize, f64)>, (k, f)| match best {
            Some((_, bf)) if bf >= f => best,
            _ => Some((k, f)),
        })
        .map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoClusterSummary {
    pub n: usize,
    /// Posterior co-clustering probabilities, `n × n` row-major.
    pub h_matrix: Vec<f64>,
    /// Ground-truth co-membership indicators when labels are given.
    pub s_matrix: Option<Vec<f64>>,
    /// `‖Ĥ − S‖_F / n²`.
    pub misclassification: Option<f64>,
}

impl CoClusterSummary {
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h_matrix[i * self.n + j]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for row in self.h_matrix.chunks_exact(self.n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn coclustering(trace: &Trace, true_labels: Option<&[usize]>) -> Result<CoClusterSummary> {
    let first = trace.snapshots.first().ok_or(Error::EmptyDataset)?;
    let n = first.assignments.len();
    if let Some(l) = true_labels {
        if l.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: l.len(),
            });
        }
    }
    let t = trace.len() as f64;
    let h_matrix: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut row = vec![0u32; n];
            for s in &trace.snapshots {
                let a = &s.assignments;
                for (j, r) in row.iter_mut().enumerate() {
                    *r += u32::from(a[i] == a[j]);
                }
            }
            row.into_iter().map(move |c| c as f64 / t)
        })
        .collect();
    let s_matrix = true_labels.map(|l| {
        (0..n * n)
            .map(|idx| f64::from(u8::from(l[idx / n] == l[idx % n])))
            .collect::<Vec<f64>>()
    });
    let misclassification = s_matrix.as_ref().map(|s| {
        let fro: f64 = h_matrix
            .iter()
            .zip(s)
            .map(|(h, s)| (h - s) * (h - s))
            .sum::<f64>()
            .sqrt();
        fro / (n * n) as f64
    });
    Ok(CoClusterSummary {
        n,
        h_matrix,
        s_matrix,
        misclassification,
    })
}

/// Which of the two shrinkage-constant forms to evaluate (matching the two
/// repulsive function classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkageForm {
    R1,
    R2,
}

/// Shrinkage constant `χ_r(g0; n, N)` of the posterior tail bound on `K`, with
/// `S = [2pτ² + (2n/N) τ⁴ e0_quad]^{1/2}`:
/// `r = 1`: `(1 + g0^{3/2} δ)^{2/3} S / (g0 + S)`; `r = 2`: `(1 + δ √g0) S / (g0 + S)`.
#[allow(clippy::too_many_arguments)]
pub fn shrinkage_constant(
    r: ShrinkageForm,
    g0: f64,
    n: usize,
    big_n: usize,
    tau: f64,
    p: usize,
    e0_quad: f64,
    delta_tau: f64,
) -> Result<f64> {
    if big_n < 3 {
        return Err(Error::invalid(
            "N",
            format!("must be at least 3, got {big_n}"),
        ));
    }
    if g0 < 0.0 || !(tau > 0.0) || e0_quad < 0.0 || delta_tau < 0.0 {
        return Err(Error::invalid(
            "shrinkage",
            "g0, e0_quad, delta_tau must be non-negative and tau positive",
        ));
    }
    let tau2 = tau * tau;
    let s = (2.0 * p as f64 * tau2 + 2.0 * n as f64 / big_n as f64 * tau2 * tau2 * e0_quad).sqrt();
    let lead = match r {
        ShrinkageForm::R1 => (1.0 + g0.powf(1.5) * delta_tau).powf(2.0 / 3.0),
        ShrinkageForm::R2 => 1.0 + delta_tau * g0.sqrt(),
    };
    Ok(lead * s / (g0 + s))
}

/// Sample autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::invalid(
            "max_lag",
            format!(
                "series of length {} too short for lag {max_lag}",
                series.len()
            ),
        ));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c0: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if c0 == 0.0 {
        log::warn!("constant series; autocorrelation defined as 1 at lag 0 and 0 elsewhere");
        return Ok((0..=max_lag)
            .map(|l| if l == 0 { 1.0 } else { 0.0 })
            .collect());
    }
    Ok((0..=max_lag)
        .map(|lag| {
            let c: f64 = series
                .iter()
                .zip(&series[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n;
            c / c0
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn snap(k: usize, assignments: Vec<usize>, log_pred: Vec<f64>) -> Snapshot {
        let ell = assignments.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; ell];
        assignments.iter().for_each(|&a| sizes[a] += 1);
        Snapshot {
            iteration: 1,
            k,
            ell,
            sizes,
            weights: vec![1.0 / k as f64; k],
            centers: vec![0.0; 2 * k],
            lambdas: vec![1.0; 2 * k],
            assignments,
            log_pred,
        }
    }

    #[test]
    fn cpo_direct_values() {
        let t = Trace::from_snapshots(vec![
            snap(1, vec![0], vec![0.2f64.ln()]),
            snap(1, vec![0], vec![0.6f64.ln()]),
        ]);
        assert_relative_eq!(log_cpo(&t).unwrap(), 0.4f64.ln(), epsilon = 1e-12);
        let d = 0.3f64;
        let t = Trace::from_snapshots(vec![snap(1, vec![0, 0, 0], vec![d.ln(); 3]); 4]);
        assert_relative_eq!(log_cpo(&t).unwrap(), 3.0 * d.ln(), epsilon = 1e-12);
        let z = Trace::from_snapshots(vec![snap(1, vec![0], vec![f64::NEG_INFINITY])]);
        assert_eq!(log_cpo(&z).unwrap(), f64::NEG_INFINITY);
        assert!(log_cpo(&Trace::default()).is_err());
    }

    #[test]
    fn cpo_is_order_invariant() {
        let a = Trace::from_snapshots(vec![
            snap(1, vec![0, 0], vec![-1.0, -2.0]),
            snap(1, vec![0, 0], vec![-3.0, -0.5]),
        ]);
        let b = Trace::from_snapshots(vec![
            snap(1, vec![0, 0], vec![-2.0, -1.0]),
            snap(1, vec![0, 0], vec![-0.5, -3.0]),
        ]);
        assert_relative_eq!(log_cpo(&a).unwrap(), log_cpo(&b).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn single_gaussian_grid() {
        let t = Trace::from_snapshots(vec![snap(1, vec![0], vec![0.0])]);
        let g = predictive_density_grid(&t, &GridSpec::square(2, -10.0, 10.0, 201)).unwrap();
        for i in (0..g.len()).step_by(997) {
            let x = g.point(i);
            let expect = (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp() / (2.0 * std::f64::consts::PI);
            assert!((g.values[i] - expect).abs() < 1e-12);
        }
        assert!((g.riemann_sum() - 1.0).abs() < 0.02);
        assert!(predictive_density_grid(&t, &GridSpec::square(3, -1.0, 1.0, 5)).is_err());
    }

    #[test]
    fn grid_is_linear_in_concatenation() {
        let mut a = snap(2, vec![0, 1], vec![0.0, 0.0]);
        a.centers = vec![1.0, 0.0, -2.0, 1.0];
        a.weights = vec![0.3, 0.7];
        let mut b = snap(1, vec![0, 0], vec![0.0, 0.0]);
        b.lambdas = vec![2.0, 0.5];
        let spec = GridSpec::square(2, -5.0, 5.0, 41);
        let ga = predictive_density_grid(&Trace::from_snapshots(vec![a.clone()]), &spec).unwrap();
        let gb = predictive_density_grid(&Trace::from_snapshots(vec![b.clone(), b.clone()]), &spec)
            .unwrap();
        let gab =
            predictive_density_grid(&Trace::from_snapshots(vec![a, b.clone(), b]), &spec).unwrap();
        for i in 0..gab.len() {
            assert!((gab.values[i] - (ga.values[i] + 2.0 * gb.values[i]) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn k_distribution() {
        let t = Trace::from_snapshots(vec![snap(3, vec![0], vec![0.0]); 5]);
        assert_eq!(posterior_k_distribution(&t), BTreeMap::from([(3, 1.0)]));
        let t = Trace::from_snapshots(vec![
            snap(2, vec![0], vec![0.0]),
            snap(3, vec![0], vec![0.0]),
            snap(3, vec![0], vec![0.0]),
            snap(4, vec![0], vec![0.0]),
        ]);
        let d = posterior_k_distribution(&t);
        assert_relative_eq!(d.values().sum::<f64>(), 1.0);
        assert_eq!(posterior_k_mode(&t), Some(3));
    }

    #[test]
    fn coclustering_properties() {
        let t = Trace::from_snapshots(vec![
            snap(2, vec![0, 0, 1], vec![0.0; 3]),
            snap(2, vec![0, 1, 1], vec![0.0; 3]),
        ]);
        let c = coclustering(&t, Some(&[5, 5, 7])).unwrap();
        for i in 0..3 {
            assert_eq!(c.h(i, i), 1.0);
            for j in 0..3 {
                assert_eq!(c.h(i, j), c.h(j, i));
            }
        }
        assert_eq!(c.h(0, 1), 0.5);
        // Off by 0.5 on the (0,1), (1,0), (1,2), (2,1) entries.
        assert_relative_eq!(c.misclassification.unwrap(), 1.0 / 9.0, epsilon = 1e-12);
        let perfect = Trace::from_snapshots(vec![snap(2, vec![0, 0, 1], vec![0.0; 3]); 3]);
        assert_eq!(
            coclustering(&perfect, Some(&[4, 4, 0]))
                .unwrap()
                .misclassification,
            Some(0.0)
        );
        assert!(coclustering(&perfect, Some(&[0])).is_err());
    }

    #[allow(clippy::too_many_arguments)]
    fn chi_reference(
        r: u8,
        g0: f64,
        n: f64,
        big_n: f64,
        tau: f64,
        p: f64,
        e0: f64,
        delta: f64,
    ) -> f64 {
        // Written from the displayed formula, term by term.
        let inner = 2.0 * p * tau.powi(2) + (2.0 * n / big_n) * tau.powi(4) * e0;
        let root = inner.powf(0.5);
        let num = if r == 1 {
            (1.0 + g0 * g0.sqrt() * delta).cbrt().powi(2) * root
        } else {
            (1.0 + delta * g0.powf(0.5)) * root
        };
        num / (g0 + root)
    }

    #[test]
    fn shrinkage_constant_values() {
        for r in [ShrinkageForm::R1, ShrinkageForm::R2] {
            assert_eq!(
                shrinkage_constant(r, 0.0, 1000, 5, 10.0, 2, 0.5, 0.3).unwrap(),
                1.0
            );
        }
        let got = shrinkage_constant(ShrinkageForm::R1, 7.0, 1000, 5, 10.0, 2, 0.37, 0.2).unwrap();
        assert_relative_eq!(
            got,
            chi_reference(1, 7.0, 1000.0, 5.0, 10.0, 2.0, 0.37, 0.2),
            max_relative = 1e-13
        );
        let got = shrinkage_constant(ShrinkageForm::R2, 7.0, 1000, 5, 10.0, 2, 0.37, 0.2).unwrap();
        assert_relative_eq!(
            got,
            chi_reference(2, 7.0, 1000.0, 5.0, 10.0, 2.0, 0.37, 0.2),
            max_relative = 1e-13
        );
        assert!(shrinkage_constant(ShrinkageForm::R1, 1.0, 10, 2, 1.0, 1, 0.0, 0.0).is_err());
    }

    #[test]
    fn autocorrelation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let noise: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let acf = autocorrelation(&noise, 20).unwrap();
        assert_eq!(acf[0], 1.0);
        assert!(acf[1..].iter().all(|a| a.abs() < 4.0 / 100.0));
        let mut ar = vec![0.0f64; 20_000];
        for t in 1..ar.len() {
            let e: f64 = rng.sample(StandardNormal);
            ar[t] = 0.5 * ar[t - 1] + e;
        }
        assert!((autocorrelation(&ar, 1).unwrap()[1] - 0.5).abs() < 0.05);
        assert_eq!(autocorrelation(&[2.0; 5], 2).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }
}
