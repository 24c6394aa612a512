use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Backend;
use crate::datagen::fmt_f64;
use crate::error::{Error, Result};

/// Per-backend run statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    /// Post-burn-in acceptance rate per random-walk block.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub acceptance: BTreeMap<String, f64>,
    /// Proposal scale per random-walk block after adaptation.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub proposal_scale: BTreeMap<String, f64>,
    /// Post-burn-in divergent transitions (NUTS).
    pub divergences: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_tree_depth: Option<f64>,
    /// Post-burn-in iterations that hit the maximum tree depth.
    pub max_depth_hits: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step_size: Option<f64>,
    /// Mean acceptance statistic after burn-in (NUTS).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_accept_stat: Option<f64>,
}

/// Retained draws on the constrained scale, `n_draws x dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub names: Vec<String>,
    pub samples: Vec<f64>,
    pub constrained: bool,
    pub backend: Backend,
    pub seed: u64,
    pub n_iter: usize,
    pub n_burn: usize,
    pub n_thin: usize,
    /// Wall-clock seconds of the sampling loop, burn-in included.
    pub t_s: f64,
    pub stats: ChainStats,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    backend: Backend,
    seed: u64,
    n_iter: usize,
    n_burn: usize,
    n_thin: usize,
    n_samples: usize,
    t_s: f64,
    constrained: bool,
    stats: ChainStats,
}

impl Chain {
    pub(crate) fn new(
        names: Vec<String>,
        samples: Vec<f64>,
        backend: Backend,
        seed: u64,
        (n_iter, n_burn, n_thin): (usize, usize, usize),
        t_s: f64,
        stats: ChainStats,
    ) -> Self {
        Self { names, samples, constrained: true, backend, seed, n_iter, n_burn, n_thin, t_s, stats }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n_draws(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.samples.len() / self.names.len()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.samples[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim().max(1))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_at(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.column_at(j))
    }

    /// Columns belonging to a block: `name` itself or `name[..]`.
    pub fn block_indices(&self, block: &str) -> Vec<usize> {
        let prefix = format!("{block}[");
        self.names
            .iter()
            .enumerate()
            .filter(|(_, n)| *n == block || n.starts_with(&prefix))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.rows().map(|r| r[j]).sum::<f64>() / self.n_draws() as f64
    }

    /// Stack draws of several chains with identical columns.
    pub fn concat(chains: &[Chain]) -> Result<Chain> {
        let first = chains.first().ok_or_else(|| Error::Empty("no chains to pool".into()))?;
        let mut out = first.clone();
        for c in &chains[1..] {
            if c.names != first.names {
                return Err(Error::Config("cannot pool chains with different columns".into()));
            }
            out.samples.extend_from_slice(&c.samples);
            out.t_s = out.t_s.max(c.t_s);
        }
        Ok(out)
    }

    /// Write draws as CSV (header = parameter names) plus a JSON metadata sidecar.
    pub fn write(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(&self.names)?;
        for r in self.rows() {
            w.write_record(r.iter().map(|v| fmt_f64(*v)))?;
        }
        w.flush()?;
        let meta = Metadata {
            backend: self.backend,
            seed: self.seed,
            n_iter: self.n_iter,
            n_burn: self.n_burn,
            n_thin: self.n_thin,
            n_samples: self.n_draws(),
            t_s: self.t_s,
            constrained: self.constrained,
            stats: self.stats.clone(),
        };
        std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Inverse of [`Chain::write`].
    pub fn read(csv_path: &Path, meta_path: &Path) -> Result<Chain> {
        let meta: Metadata = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        let mut r = csv::Reader::from_path(csv_path)?;
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut samples = Vec::new();
        for rec in r.records() {
            for field in rec?.iter() {
                samples.push(field.parse::<f64>().map_err(|e| Error::Config(format!("bad number `{field}`: {e}")))?);
            }
        }
        Ok(Chain {
            names,
            samples,
            constrained: meta.constrained,
            backend: meta.backend,
            seed: meta.seed,
            n_iter: meta.n_iter,
            n_burn: meta.n_burn,
            n_thin: meta.n_thin,
            t_s: meta.t_s,
            stats: meta.stats,
        })
    }
}
