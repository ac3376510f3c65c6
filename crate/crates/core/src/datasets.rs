//! Synthetic scenarios, the consecutive-pairing transform and CSV I/O.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::erf::erfc;

use crate::distributions::log_phi;
use crate::error::{Error, Result};

/// `n × p` observations stored row-major, with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    p: usize,
    obs: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        p: usize,
        obs: Vec<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("p", "dimension must be positive"));
        }
        if obs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !obs.len().is_multiple_of(p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: obs.len() % p,
            });
        }
        if let Some(i) = obs.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "obs",
                format!("non-finite value in row {}", i / p),
            ));
        }
        let n = obs.len() / p;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            p,
            obs,
            labels,
        })
    }

    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.len(),
            });
        }
        Self::new(name, p, rows.concat(), labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.obs.len() / self.p
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.obs.chunks_exact(self.p)
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Trimodal2D,
    EmgConvolution2D,
    TenD3Comp,
    ThirteenComp2D,
}

/// Shift `μ0` of the normal part in the exponential-convolution scenario.
pub const EMG_MU0: f64 = -4.0;

const TEN_D_SIGMA1: [f64; 10] = [
    5.5729, 5.0110, 3.6832, 8.1931, 5.7717, 3.0267, 3.5011, 7.8291, 4.2233, 4.3885,
];

const THIRTEEN_CENTERS: [[f64; 2]; 12] = [
    [6.0, 6.0],
    [6.0, 12.0],
    [12.0, 6.0],
    [-6.0, 6.0],
    [-6.0, 12.0],
    [-12.0, 6.0],
    [6.0, -6.0],
    [6.0, -12.0],
    [12.0, -6.0],
    [-6.0, -6.0],
    [-6.0, -12.0],
    [-12.0, -6.0],
];

/// One Gaussian component with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Trimodal2D,
        Scenario::EmgConvolution2D,
        Scenario::TenD3Comp,
        Scenario::ThirteenComp2D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Trimodal2D => "trimodal",
            Scenario::EmgConvolution2D => "emg",
            Scenario::TenD3Comp => "ten-d",
            Scenario::ThirteenComp2D => "thirteen",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Scenario::TenD3Comp => 10,
            _ => 2,
        }
    }

    /// Mixture components of the generating law; `None` for the continuous mixture.
    pub fn components(self) -> Option<Vec<Component>> {
        let comp = |weight: f64, mean: Vec<f64>, lambdas: Vec<f64>| Component {
            weight,
            mean,
            lambdas,
        };
        match self {
            Scenario::Trimodal2D => Some(vec![
                comp(0.4, vec![0.0, 0.0], vec![2.0, 1.0]),
                comp(0.3, vec![-6.0, -6.0], vec![3.0, 3.0]),
                comp(0.3, vec![6.0, 6.0], vec![2.0, 2.0]),
            ]),
            Scenario::EmgConvolution2D => None,
            Scenario::TenD3Comp => Some(vec![
                comp(0.4, vec![0.0; 10], TEN_D_SIGMA1.to_vec()),
                comp(0.3, vec![-6.0; 10], vec![3.0; 10]),
                comp(0.3, vec![6.0; 10], vec![2.0; 10]),
            ]),
            Scenario::ThirteenComp2D => {
                let mut out: Vec<Component> = THIRTEEN_CENTERS
                    .iter()
                    .map(|c| comp(1.0 / 24.0, c.to_vec(), vec![1.0, 1.0]))
                    .collect();
                out.push(comp(0.5, vec![0.0, 0.0], vec![30.0, 30.0]));
                Some(out)
            }
        }
    }

    /// Density of the generating law at `y`.
    pub fn density(self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        Ok(match self.components() {
            Some(comps) => comps
                .iter()
                .map(|c| c.weight * log_phi(y, &c.mean, &c.lambdas).exp())
                .sum(),
            None => y
                .iter()
                .map(|&v| emg_marginal_density(v, EMG_MU0))
                .product(),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        let found = match key.as_str() {
            "trimodal" | "trimodal2d" => Some(Scenario::Trimodal2D),
            "emg" | "emgconvolution2d" => Some(Scenario::EmgConvolution2D),
            "ten-d" | "tend3comp" => Some(Scenario::TenD3Comp),
            "thirteen" | "thirteencomp2d" => Some(Scenario::ThirteenComp2D),
            _ => None,
        };
        found.ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::invalid(
                "scenario",
                format!("unknown `{s}`; valid names: {}", names.join(", ")),
            )
        })
    }
}

/// Draw `n` i.i.d. observations from the scenario with a `ChaCha8` stream seeded by `seed`.
pub fn generate_synthetic(s: Scenario, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = s.dim();
    let mut obs = Vec::with_capacity(n * p);
    let labels = match s.components() {
        None => {
            for _ in 0..n * p {
                let z: f64 = rng.sample(StandardNormal);
                let e: f64 = Exp1.sample(&mut rng);
                obs.push(EMG_MU0 + z + e);
            }
            None
        }
        Some(comps) => {
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let k = comps
                    .iter()
                    .position(|c| {
                        acc += c.weight;
                        u < acc
                    })
                    .unwrap_or(comps.len() - 1);
                let c = &comps[k];
                for (m, l) in c.mean.iter().zip(&c.lambdas) {
                    let z: f64 = rng.sample(StandardNormal);
                    obs.push(m + l.sqrt() * z);
                }
                labels.push(k);
            }
            Some(labels)
        }
    };
    Dataset::new(s.name(), p, obs, labels)
}

/// `½ exp(μ0 − y + ½) erfc((μ0 + 1 − y)/√2)`, the law of `N(μ0, 1) + Exp(1)`.
pub fn emg_marginal_density(y: f64, mu0: f64) -> f64 {
    let x = (mu0 + 1.0 - y) / std::f64::consts::SQRT_2;
    if x < 20.0 {
        0.5 * (mu0 - y + 0.5).exp() * erfc(x)
    } else {
        // erfc(x) underflows while the exponential overflows; combine the exponents
        // and use the asymptotic series of erfc.
        let x2 = x * x;
        let series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
        0.5 * (mu0 - y + 0.5 - x2).exp() * series / (x * std::f64::consts::PI.sqrt())
    }
}

/// Rows `(series[i], series[i+1])`.
pub fn pair_consecutive(series: &[f64]) -> Result<Dataset> {
    if series.len() < 2 {
        return Err(Error::invalid(
            "series",
            format!("need at least 2 values, got {}", series.len()),
        ));
    }
    let obs = series.windows(2).flat_map(|w| [w[0], w[1]]).collect();
    Dataset::new("paired", 2, obs, None)
}

/// Read a CSV with an optional header row. A header column named `label` holds
/// integer labels; all other columns are coordinates.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let records = reader.records();
    let mut label_col = None;
    let mut width = None;
    let mut obs = Vec::new();
    let mut labels = Vec::new();
    let mut first = true;
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if first {
            first = false;
            if rec.iter().any(|f| f.parse::<f64>().is_err()) {
                label_col = rec.iter().position(|f| f == "label");
                width = Some(rec.len());
                continue;
            }
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(parse_err(
                line,
                format!("expected {w} columns, found {}", rec.len()),
            ));
        }
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == label_col {
                let l = field.parse::<usize>().map_err(|_| {
                    parse_err(
                        line,
                        format!("label `{field}` is not a non-negative integer"),
                    )
                })?;
                labels.push(l);
            } else {
                let v = field.parse::<f64>().map_err(|_| {
                    parse_err(
                        line,
                        format!("column {} value `{field}` is not a number", j + 1),
                    )
                })?;
                if !v.is_finite() {
                    return Err(parse_err(
                        line,
                        format!("column {} value is not finite", j + 1),
                    ));
                }
                obs.push(v);
            }
        }
    }
    let Some(w) = width else {
        return Err(Error::EmptyDataset);
    };
    if obs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = w - usize::from(label_col.is_some());
    let name = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Dataset::new(name, p, obs, label_col.map(|_| labels))
}

/// Write a CSV with header `x1,…,xp[,label]`; values use the shortest
/// representation that round-trips exactly.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header: Vec<String> = (1..=ds.p()).map(|j| format!("x{j}")).collect();
    if ds.labels().is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in ds.rows().enumerate() {
        let mut line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = ds.labels() {
            line.push(l[i].to_string());
        }
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
