//! Experiment driver: configuration, chain execution with timing, parallel
//! chains, repeated-dataset sweeps and report emission.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{gen_aft, gen_linear, gen_logistic, gen_mixture, Covariates, Dataset};
use crate::diagnostics::{default_subset, ess, ess_report, fit_report, EssReport, FitReport};
use crate::error::{Error, Result};
use crate::model::{Family, ModelInstance, Parameterization, Prior};
use crate::rng::{derive_seed, domain};
use crate::samplers::{sample, Adaptation, Backend, Chain, ChainStats, SamplerConfig};

mod report;

pub use report::{emit_report, emit_sweep, read_report_csv, write_report, Cell, ReportRow, SummaryRow, REPORT_COLUMNS};

/// Output format of emitted reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Default `(N_it, N_b, N_s)` for each model/prior pair.
pub fn default_schedule(prior: Prior) -> (usize, usize, usize) {
    match prior {
        Prior::LmC => (11000, 1000, 5000),
        Prior::LmWi | Prior::LmNi => (15000, 5000, 5000),
        Prior::LmL => (20000, 10000, 5000),
        Prior::LrN => (20000, 10000, 5000),
        Prior::LrL => (15000, 10000, 2500),
        Prior::Mm => (20000, 10000, 5000),
        Prior::AftNh | Prior::AftNi => (10000, 5000, 2500),
    }
}

fn default_backends() -> Vec<Backend> {
    Backend::ALL.to_vec()
}

fn one() -> usize {
    1
}

/// One benchmark experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model family; inferred from the prior when absent.
    pub model: Option<Family>,
    pub prior: Prior,
    pub n: usize,
    /// Number of coefficients for regressions.
    pub p: usize,
    /// Number of components for mixtures.
    pub h: usize,
    pub covariates: Covariates,
    pub zero_pattern: usize,
    /// Expected censored fraction for AFT data.
    pub k: f64,
    #[serde(default = "default_backends")]
    pub backends: Vec<Backend>,
    pub n_iter: Option<usize>,
    pub n_burn: Option<usize>,
    pub n_thin: Option<usize>,
    #[serde(default = "one")]
    pub chains: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Worker threads for parallel chains; host cores minus one by default.
    pub workers: Option<usize>,
    /// Mixture parameterization for Gibbs and RWMH. NUTS always uses the
    /// marginal form.
    pub parameterization: Option<Parameterization>,
    pub hyper: BTreeMap<String, f64>,
    pub adaptation: Adaptation,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            prior: Prior::LmC,
            n: 100,
            p: 4,
            h: 2,
            covariates: Covariates::Continuous,
            zero_pattern: 0,
            k: 0.2,
            backends: default_backends(),
            n_iter: None,
            n_burn: None,
            n_thin: None,
            chains: 1,
            seed: 42,
            repeats: 1,
            out: None,
            format: Format::Csv,
            workers: None,
            parameterization: None,
            hyper: BTreeMap::new(),
            adaptation: Adaptation::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(prior: Prior) -> Self {
        Self { prior, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.model {
            if m != self.prior.family() {
                return Err(Error::Config(format!("prior {} does not belong to model {m}", self.prior)));
            }
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.backends.is_empty() {
            return Err(Error::Config("no backends requested".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.parameterization == Some(Parameterization::Latent) && self.prior.family() != Family::MM {
            return Err(Error::Config("latent parameterization applies to mixtures only".into()));
        }
        self.sampler_config(Backend::Gibbs, 0).validate()
    }

    /// `(N_it, N_b, N_thin)` after overrides.
    pub fn schedule(&self) -> (usize, usize, usize) {
        let (it, b, _) = default_schedule(self.prior);
        (self.n_iter.unwrap_or(it), self.n_burn.unwrap_or(b), self.n_thin.unwrap_or(2))
    }

    pub fn sampler_config(&self, backend: Backend, seed: u64) -> SamplerConfig {
        let (n_iter, n_burn, n_thin) = self.schedule();
        SamplerConfig { backend, n_iter, n_burn, n_thin, seed, adaptation: self.adaptation }
    }

    /// `p` for regressions, `H` for mixtures.
    pub fn p_or_h(&self) -> usize {
        if self.prior.family() == Family::MM {
            self.h
        } else {
            self.p
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1).saturating_sub(1).max(1)
        })
    }

    /// Seed of dataset `r`.
    pub fn dataset_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, domain::DATASET, r as u64)
    }

    /// Seed of chain `k` on dataset `r`.
    pub fn chain_seed(&self, r: usize, k: usize) -> u64 {
        derive_seed(self.dataset_seed(r), domain::CHAIN, k as u64)
    }

    /// Simulate dataset `r`.
    pub fn dataset(&self, r: usize) -> Result<Dataset> {
        let seed = self.dataset_seed(r);
        match self.prior.family() {
            Family::LM => gen_linear(self.n, self.p, self.covariates, self.zero_pattern, seed),
            Family::LR => gen_logistic(self.n, self.p, self.zero_pattern, seed),
            Family::MM => gen_mixture(self.n, self.h, seed),
            Family::AFT => gen_aft(self.n, self.p, self.k, seed),
        }
    }

    /// Model instance a backend runs on, or the reason it cannot run.
    pub fn model_for(&self, backend: Backend, data: &Arc<Dataset>) -> Result<std::result::Result<ModelInstance, String>> {
        let mut b = ModelInstance::builder(self.prior, data.clone());
        for (k, v) in &self.hyper {
            b = b.hyper(k, *v);
        }
        if self.prior.family() == Family::MM {
            b = b.components(self.h);
            let param = match (backend, self.parameterization) {
                (Backend::Nuts, Some(Parameterization::Latent)) => {
                    return Ok(Err("NUTS needs a differentiable target; latent allocations are discrete".into()))
                }
                (Backend::Nuts, _) => Parameterization::Marginal,
                (_, Some(p)) => p,
                (_, None) => Parameterization::Latent,
            };
            b = b.parameterization(param);
        }
        b.build().map(Ok)
    }
}

/// Which chain a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainTag {
    Single(usize),
    Pooled,
}

/// Metrics of a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Per-parameter E on the headline subset; absent for pooled views.
    pub ess: Option<EssReport>,
    pub mean_e: f64,
    /// Mean E per monitored block.
    pub per_block_e: Vec<(String, f64)>,
    pub fit: FitReport,
    pub n_it: usize,
    pub t_s: f64,
    pub n_it_per_s: f64,
    pub n_divergences: Option<usize>,
    pub stats: ChainStats,
}

/// One row of an experiment: a backend on a dataset, for one chain or the
/// pooled view of several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub prior: Prior,
    pub backend: Backend,
    pub n: usize,
    pub p_or_h: usize,
    pub dataset: usize,
    pub chain: ChainTag,
    pub seed: u64,
    /// Metrics, or the note explaining why the run was skipped.
    pub outcome: std::result::Result<RunMetrics, String>,
}

impl RunReport {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.outcome.as_ref().ok()
    }

    pub fn is_skipped(&self) -> bool {
        self.outcome.is_err()
    }
}

fn block_of(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

/// Mean E per block over all monitored columns. Columns with a degenerate
/// series are left out.
pub fn per_block_e(chain: &Chain) -> Vec<(String, f64)> {
    let n_s = chain.n_draws() as f64;
    let mut acc: Vec<(String, f64, usize)> = Vec::new();
    for (j, name) in chain.names.iter().enumerate() {
        let Ok(e) = ess(&chain.column_at(j)) else { continue };
        let b = block_of(name);
        let e = (e / n_s).min(1.0);
        match acc.iter_mut().find(|(n, _, _)| n == b) {
            Some(slot) => {
                slot.1 += e;
                slot.2 += 1;
            }
            None => acc.push((b.to_string(), e, 1)),
        }
    }
    acc.into_iter().map(|(n, s, c)| (n, s / c as f64)).collect()
}

/// Diagnostics for a finished chain.
pub fn summarize(model: &ModelInstance, chain: &Chain) -> Result<RunMetrics> {
    let ess = ess_report(chain, default_subset(model.family()))?;
    let fit = fit_report(model, chain)?;
    Ok(RunMetrics {
        mean_e: ess.mean_e,
        ess: Some(ess),
        per_block_e: per_block_e(chain),
        fit,
        n_it: chain.n_iter,
        t_s: chain.t_s,
        n_it_per_s: chain.n_iter as f64 / chain.t_s,
        n_divergences: (chain.backend == Backend::Nuts).then_some(chain.stats.divergences),
        stats: chain.stats.clone(),
    })
}

/// Run one chain and keep it alongside its report.
pub fn run_chain(
    cfg: &ExperimentConfig,
    model: &ModelInstance,
    backend: Backend,
    dataset: usize,
    k: usize,
) -> Result<(Chain, RunReport)> {
    let seed = cfg.chain_seed(dataset, k);
    let chain = sample(model, &cfg.sampler_config(backend, seed))?;
    let metrics = summarize(model, &chain)?;
    let report = base_report(cfg, backend, dataset, ChainTag::Single(k), seed, Ok(metrics));
    Ok((chain, report))
}

fn base_report(
    cfg: &ExperimentConfig,
    backend: Backend,
    dataset: usize,
    chain: ChainTag,
    seed: u64,
    outcome: std::result::Result<RunMetrics, String>,
) -> RunReport {
    RunReport { prior: cfg.prior, backend, n: cfg.n, p_or_h: cfg.p_or_h(), dataset, chain, seed, outcome }
}

/// Chains of one backend on one dataset, with the pooled view.
#[derive(Debug, Clone)]
pub struct ChainBatch {
    pub per_chain: Vec<RunReport>,
    pub pooled: RunReport,
    pub wall_s: f64,
}

fn skipped_batch(cfg: &ExperimentConfig, backend: Backend, dataset: usize, note: String) -> ChainBatch {
    let seed = cfg.dataset_seed(dataset);
    let pooled = base_report(cfg, backend, dataset, ChainTag::Pooled, seed, Err(note.clone()));
    let per_chain = (0..cfg.chains)
        .map(|k| base_report(cfg, backend, dataset, ChainTag::Single(k), cfg.chain_seed(dataset, k), Err(note.clone())))
        .collect();
    ChainBatch { per_chain, pooled, wall_s: 0.0 }
}

fn pool(cfg: &ExperimentConfig, model: &ModelInstance, backend: Backend, dataset: usize, chains: &[Chain], runs: &[RunReport], wall_s: f64) -> Result<RunReport> {
    let metrics: Vec<&RunMetrics> = runs.iter().filter_map(RunReport::metrics).collect();
    let k = metrics.len() as f64;
    let mean_e = metrics.iter().map(|m| m.mean_e).sum::<f64>() / k;
    let mut per_block: Vec<(String, f64)> = metrics[0].per_block_e.iter().map(|(n, _)| (n.clone(), 0.0)).collect();
    for (name, v) in per_block.iter_mut() {
        let vals: Vec<f64> =
            metrics.iter().filter_map(|m| m.per_block_e.iter().find(|(b, _)| b == name).map(|(_, e)| *e)).collect();
        *v = vals.iter().sum::<f64>() / vals.len() as f64;
    }
    let all = Chain::concat(chains)?;
    let n_it = metrics.iter().map(|m| m.n_it).sum();
    let pooled = RunMetrics {
        ess: None,
        mean_e,
        per_block_e: per_block,
        fit: fit_report(model, &all)?,
        n_it,
        t_s: wall_s,
        n_it_per_s: n_it as f64 / wall_s,
        n_divergences: metrics[0].n_divergences.map(|_| metrics.iter().filter_map(|m| m.n_divergences).sum()),
        stats: ChainStats::default(),
    };
    Ok(base_report(cfg, backend, dataset, ChainTag::Pooled, cfg.dataset_seed(dataset), Ok(pooled)))
}

/// Run `cfg.chains` independent chains of one backend on a shared dataset,
/// concurrently on at most `cfg.workers()` threads.
pub fn run_chains(cfg: &ExperimentConfig, data: &Arc<Dataset>, backend: Backend, dataset: usize) -> Result<ChainBatch> {
    let model = match cfg.model_for(backend, data)? {
        Ok(m) => m,
        Err(note) => return Ok(skipped_batch(cfg, backend, dataset, note)),
    };
    let pool_threads = cfg.workers().min(cfg.chains);
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(pool_threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let clock = Instant::now();
    let results: Vec<Result<(Chain, RunReport)>> =
        threads.install(|| (0..cfg.chains).into_par_iter().map(|k| run_chain(cfg, &model, backend, dataset, k)).collect());
    let wall_s = clock.elapsed().as_secs_f64();
    let mut chains = Vec::with_capacity(cfg.chains);
    let mut per_chain = Vec::with_capacity(cfg.chains);
    for r in results {
        match r {
            Ok((c, rep)) => {
                chains.push(c);
                per_chain.push(rep);
            }
            Err(Error::Unsupported(note)) => return Ok(skipped_batch(cfg, backend, dataset, note)),
            Err(e) => return Err(e),
        }
    }
    let pooled = pool(cfg, &model, backend, dataset, &chains, &per_chain, wall_s)?;
    Ok(ChainBatch { per_chain, pooled, wall_s })
}

/// Single-chain run of every requested backend on one simulated dataset.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let single = ExperimentConfig { chains: 1, ..cfg.clone() };
    let data = Arc::new(single.dataset(0)?);
    let mut out = Vec::with_capacity(cfg.backends.len());
    for &b in &cfg.backends {
        let mut batch = run_chains(&single, &data, b, 0)?;
        out.push(batch.per_chain.remove(0));
    }
    Ok(out)
}

/// `K` chains per backend on one dataset: per-chain rows followed by the
/// pooled row, for each backend.
pub fn run_parallel_chains(cfg: &ExperimentConfig) -> Result<Vec<ChainBatch>> {
    cfg.validate()?;
    if cfg.chains < 2 {
        return Err(Error::Config("parallel chains need chains >= 2".into()));
    }
    let data = Arc::new(cfg.dataset(0)?);
    cfg.backends.iter().map(|&b| run_chains(cfg, &data, b, 0)).collect()
}

/// Per-dataset rows and summary statistics of a repeated-dataset sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<RunReport>,
    pub summary: Vec<SummaryRow>,
}

/// Mean, sd, min and max of a sample.
fn describe(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, sd, min, max)
}

/// Run every backend on `cfg.repeats` datasets with derived seeds.
pub fn repeated_datasets(cfg: &ExperimentConfig) -> Result<Sweep> {
    cfg.validate()?;
    if cfg.repeats < 2 {
        return Err(Error::Config("a sweep needs repeats >= 2".into()));
    }
    let single = ExperimentConfig { chains: 1, ..cfg.clone() };
    let mut rows = Vec::new();
    for r in 0..cfg.repeats {
        let data = Arc::new(single.dataset(r)?);
        for &b in &cfg.backends {
            let mut batch = run_chains(&single, &data, b, r)?;
            log::info!("dataset {r} backend {b} done");
            rows.push(batch.per_chain.remove(0));
        }
    }
    let mut summary = Vec::new();
    for &b in &cfg.backends {
        let done: Vec<&RunMetrics> = rows.iter().filter(|r| r.backend == b).filter_map(RunReport::metrics).collect();
        if done.is_empty() {
            continue;
        }
        let metrics: [(&str, Vec<f64>); 2] = [
            ("mean_E", done.iter().map(|m| m.mean_e).collect()),
            ("N_it_per_s", done.iter().map(|m| m.n_it_per_s).collect()),
        ];
        for (name, xs) in metrics {
            let (mean, sd, min, max) = describe(&xs);
            summary.push(SummaryRow {
                prior: cfg.prior.tag().to_string(),
                backend: b.tag().to_string(),
                metric: name.to_string(),
                count: xs.len(),
                mean,
                sd,
                min,
                max,
            });
        }
    }
    Ok(Sweep { rows, summary })
}

/// Everything `run` produces, flattened into report rows.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    if cfg.repeats > 1 {
        Ok(repeated_datasets(cfg)?.rows)
    } else if cfg.chains > 1 {
        Ok(run_parallel_chains(cfg)?
            .into_iter()
            .flat_map(|b| b.per_chain.into_iter().chain(std::iter::once(b.pooled)))
            .collect())
    } else {
        run_experiment(cfg)
    }
}
