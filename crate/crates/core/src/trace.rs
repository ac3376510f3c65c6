//! Sampler output: retained snapshots, written one JSON object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State after one retained sweep. `centers` and `lambdas` hold all `K`
/// components row-major, occupied clusters first; `weights` are the matching
/// predictive mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub k: usize,
    pub ell: usize,
    pub sizes: Vec<usize>,
    pub weights: Vec<f64>,
    pub centers: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub assignments: Vec<usize>,
    /// `log p(y_i | Θ)` under this sweep's mixture, per observation.
    pub log_pred: Vec<f64>,
}

impl Snapshot {
    pub fn p(&self) -> usize {
        self.centers.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn center(&self, k: usize) -> &[f64] {
        let p = self.p();
        &self.centers[k * p..(k + 1) * p]
    }

    pub fn lambda(&self, k: usize) -> &[f64] {
        let p = self.p();
        &self.lambdas[k * p..(k + 1) * p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_hash: String,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    /// Present for traces produced in this process; not stored in trace files.
    pub meta: Option<TraceMeta>,
    pub snapshots: Vec<Snapshot>,
    /// `K` after every sweep, burn-in included.
    pub k_path: Vec<usize>,
}

impl Trace {
    pub fn from_snapshots(snapshots: Vec<Snapshot>) -> Self {
        Self {
            meta: None,
            k_path: snapshots.iter().map(|s| s.k).collect(),
            snapshots,
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.snapshots {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut snapshots: Vec<Snapshot> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                reason,
            };
            let s: Snapshot = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            let n = s.assignments.len();
            let consistent = s.sizes.len() == s.ell
                && s.k >= s.ell
                && s.weights.len() == s.k
                && s.log_pred.len() == n
                && s.centers.len() == s.lambdas.len()
                && (s.k == 0 || s.centers.len().is_multiple_of(s.k))
                && s.sizes.iter().sum::<usize>() == n;
            if !consistent {
                return Err(err("snapshot fields have inconsistent lengths".into()));
            }
            if let Some(prev) = snapshots.last() {
                if s.iteration <= prev.iteration || s.assignments.len() != prev.assignments.len() {
                    return Err(err("snapshots out of order or of differing size".into()));
                }
            }
            snapshots.push(s);
        }
        Ok(Self::from_snapshots(snapshots))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(iteration: usize) -> Snapshot {
        Snapshot {
            iteration,
            k: 2,
            ell: 1,
            sizes: vec![2],
            weights: vec![0.75, 0.25],
            centers: vec![0.1, -0.2, 3.0, 1e-300],
            lambdas: vec![1.0, 2.0, 0.5, 0.25],
            assignments: vec![0, 0],
            log_pred: vec![-1.5, -2.0 / 3.0],
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let trace = Trace::from_snapshots(vec![snap(3), snap(4)]);
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"iteration\":3,\"k\":2,\"ell\":1,"));
        let back = Trace::read_jsonl(&buf[..], Path::new("t")).unwrap();
        assert_eq!(back, trace);
        assert_eq!(back.snapshots[0].center(1), &[3.0, 1e-300]);
        assert_eq!(back.snapshots[0].lambda(0), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_malformed_lines() {
        let mut bad = snap(1);
        bad.weights.pop();
        let text = format!(
            "{}\n{}\n",
            serde_json::to_string(&snap(1)).unwrap(),
            serde_json::to_string(&bad).unwrap()
        );
        assert!(matches!(
            Trace::read_jsonl(text.as_bytes(), Path::new("t")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(Trace::read_jsonl(&b"{not json\n"[..], Path::new("t")).is_err());
        let twice = format!("{0}\n{0}\n", serde_json::to_string(&snap(1)).unwrap());
        assert!(Trace::read_jsonl(twice.as_bytes(), Path::new("t")).is_err());
    }
}
