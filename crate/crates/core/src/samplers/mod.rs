//! Sampler backends: random-walk Metropolis-Hastings, Gibbs with slice
//! fallback, and NUTS.

mod chain;
mod gibbs;
mod nuts;
mod rwmh;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConditionalSpec, GibbsBlock, ModelInstance, Transform};
use crate::rng::{rng_from_seed, SimRng};

pub use chain::{Chain, ChainStats};
pub use gibbs::{run_gibbs, slice_step};
pub use nuts::{leapfrog, run_nuts, Leapfrog};
pub use rwmh::run_rwmh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Gibbs,
    Nuts,
    Rwmh,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Gibbs, Backend::Nuts, Backend::Rwmh];

    pub fn tag(&self) -> &'static str {
        match self {
            Backend::Gibbs => "gibbs",
            Backend::Nuts => "nuts",
            Backend::Rwmh => "rwmh",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gibbs" => Ok(Backend::Gibbs),
            "nuts" => Ok(Backend::Nuts),
            "rwmh" => Ok(Backend::Rwmh),
            other => Err(Error::Config(format!("unknown backend `{other}`"))),
        }
    }
}

/// Tuning constants for the three backends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Adaptation {
    pub rwmh_target_accept_scalar: f64,
    pub rwmh_target_accept_block: f64,
    pub nuts_target_accept: f64,
    pub nuts_max_tree_depth: usize,
    pub slice_width: f64,
    pub slice_max_doublings: usize,
}

impl Default for Adaptation {
    fn default() -> Self {
        Self {
            rwmh_target_accept_scalar: 0.44,
            rwmh_target_accept_block: 0.234,
            nuts_target_accept: 0.8,
            nuts_max_tree_depth: 10,
            slice_width: 1.0,
            slice_max_doublings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub backend: Backend,
    pub n_iter: usize,
    pub n_burn: usize,
    pub n_thin: usize,
    pub seed: u64,
    pub adaptation: Adaptation,
}

impl SamplerConfig {
    /// Config with the default thinning stride of 2.
    pub fn new(backend: Backend, n_iter: usize, n_burn: usize, seed: u64) -> Self {
        Self { backend, n_iter, n_burn, n_thin: 2, seed, adaptation: Adaptation::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_thin == 0 {
            return Err(Error::Config("thinning stride must be at least 1".into()));
        }
        if self.n_iter <= self.n_burn {
            return Err(Error::Config(format!(
                "total iterations ({}) must exceed burn-in ({})",
                self.n_iter, self.n_burn
            )));
        }
        if (self.n_iter - self.n_burn) % self.n_thin != 0 {
            return Err(Error::Config(format!(
                "thinning stride {} does not divide {} post-burn-in iterations",
                self.n_thin,
                self.n_iter - self.n_burn
            )));
        }
        Ok(())
    }

    /// Number of retained draws, `(n_iter - n_burn) / n_thin`.
    pub fn n_samples(&self) -> usize {
        (self.n_iter - self.n_burn) / self.n_thin
    }

    /// Whether 1-based iteration `t` is retained.
    pub fn keeps(&self, t: usize) -> bool {
        t > self.n_burn && (t - self.n_burn) % self.n_thin == 0
    }
}

/// How the random-walk backend treats a block.
#[derive(Debug, Clone, PartialEq)]
pub enum RwBlock {
    /// Gaussian random-walk proposal on the listed coordinates.
    Walk { name: String, coords: Range<usize> },
    /// Exact draw from the block's closed-form conditional.
    Exact(GibbsBlock),
}

/// A density the backends can sample, on an unconstrained space.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Unnormalized log density; `-inf` outside the support.
    fn log_density(&self, u: &[f64]) -> f64;

    /// Log density, writing its gradient into `grad`.
    fn log_density_grad(&self, _u: &[f64], _grad: &mut [f64]) -> Result<f64> {
        Err(Error::Unsupported("target has no gradient".into()))
    }

    fn initial_point(&self) -> Vec<f64>;

    fn monitored_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x[{i}]")).collect()
    }

    /// Values stored in the chain for one state.
    fn monitored(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn rw_blocks(&self) -> Vec<RwBlock> {
        vec![RwBlock::Walk { name: "x".into(), coords: 0..self.dim() }]
    }

    fn gibbs_blocks(&self) -> Vec<GibbsBlock> {
        (0..self.dim())
            .map(|i| GibbsBlock {
                name: format!("x[{}]", i + 1),
                id: crate::model::BlockId::Coord(i),
                coords: i..i + 1,
                transform: Transform::Identity,
            })
            .collect()
    }

    fn conditional(&self, b: &GibbsBlock, u: &[f64]) -> Result<ConditionalSpec<'_>> {
        let c = b.coords.start;
        let mut uu = u.to_vec();
        Ok(ConditionalSpec::Generic(Box::new(move |v| {
            uu[c] = v;
            self.log_density(&uu)
        })))
    }
}

impl Target for ModelInstance {
    fn dim(&self) -> usize {
        ModelInstance::dim(self)
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        self.evaluate(u, None).total()
    }

    fn log_density_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.log_density_and_grad(u, grad)
    }

    fn initial_point(&self) -> Vec<f64> {
        ModelInstance::initial_point(self)
    }

    fn monitored_names(&self) -> Vec<String> {
        self.layout().monitored_names()
    }

    fn monitored(&self, u: &[f64]) -> Vec<f64> {
        self.layout().monitored_values(u)
    }

    fn rw_blocks(&self) -> Vec<RwBlock> {
        let labels: Vec<GibbsBlock> = ModelInstance::gibbs_blocks(self)
            .into_iter()
            .filter(|b| b.transform == Transform::Label)
            .collect();
        let mut out: Vec<RwBlock> = labels.into_iter().map(RwBlock::Exact).collect();
        for b in self.layout().blocks().iter().filter(|b| b.transform != Transform::Label) {
            out.push(RwBlock::Walk { name: b.name.clone(), coords: b.range() });
        }
        out
    }

    fn gibbs_blocks(&self) -> Vec<GibbsBlock> {
        ModelInstance::gibbs_blocks(self)
    }

    fn conditional(&self, b: &GibbsBlock, u: &[f64]) -> Result<ConditionalSpec<'_>> {
        ModelInstance::conditional(self, b, u)
    }
}

/// Run the configured backend with an RNG seeded from `cfg.seed`.
pub fn sample<T: Target + ?Sized>(target: &T, cfg: &SamplerConfig) -> Result<Chain> {
    let mut rng = rng_from_seed(cfg.seed);
    run_with(target, cfg, &mut rng)
}

pub fn run_with<T: Target + ?Sized>(target: &T, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<Chain> {
    match cfg.backend {
        Backend::Gibbs => run_gibbs(target, cfg, rng),
        Backend::Nuts => run_nuts(target, cfg, rng),
        Backend::Rwmh => run_rwmh(target, cfg, rng),
    }
}

/// Accumulates retained draws.
struct Recorder<'a> {
    cfg: &'a SamplerConfig,
    samples: Vec<f64>,
    width: usize,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a SamplerConfig, width: usize) -> Self {
        Self { cfg, samples: Vec::with_capacity(cfg.n_samples() * width), width }
    }

    fn offer<T: Target + ?Sized>(&mut self, t: usize, target: &T, u: &[f64]) {
        if self.cfg.keeps(t) {
            let row = target.monitored(u);
            debug_assert_eq!(row.len(), self.width);
            self.samples.extend_from_slice(&row);
        }
    }

    fn finish<T: Target + ?Sized>(self, target: &T, t_s: f64, stats: ChainStats) -> Chain {
        Chain::new(
            target.monitored_names(),
            self.samples,
            self.cfg.backend,
            self.cfg.seed,
            (self.cfg.n_iter, self.cfg.n_burn, self.cfg.n_thin),
            t_s.max(1e-9),
            stats,
        )
    }
}

fn check_start<T: Target + ?Sized>(target: &T, u: &[f64]) -> Result<f64> {
    if u.len() != target.dim() {
        return Err(Error::Shape { expected: target.dim(), got: u.len() });
    }
    let lp = target.log_density(u);
    if lp.is_finite() {
        Ok(lp)
    } else {
        Err(Error::InvalidParameter(format!("log density is {lp} at the initial point")))
    }
}
