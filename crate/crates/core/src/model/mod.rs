//! Bayesian model/prior pairs with a uniform evaluation surface.
//!
//! Every [`ModelInstance`] exposes the unnormalized log-posterior on the
//! unconstrained scale (log-Jacobian included), its gradient, per-block full
//! conditionals for Gibbs sampling, and the pointwise log-likelihood used by
//! the predictive diagnostics.

mod conditionals;
mod eval;
pub mod params;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::distributions::logpdf;
use crate::error::{Error, Result};
use crate::samplers::Chain;

pub use conditionals::{BlockId, ConditionalSpec, GibbsBlock};
pub use eval::LogPosteriorParts;
pub use params::{Block, Layout, ParamVec, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    LM,
    LR,
    MM,
    AFT,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::LM => "LM",
            Family::LR => "LR",
            Family::MM => "MM",
            Family::AFT => "AFT",
        }
    }

    pub fn is_regression(&self) -> bool {
        !matches!(self, Family::MM)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LM" => Ok(Family::LM),
            "LR" => Ok(Family::LR),
            "MM" => Ok(Family::MM),
            "AFT" => Ok(Family::AFT),
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

/// Model/prior pair, identified by its tag (`"LM-C"`, `"AFT-NH"`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Prior {
    LmC,
    LmWi,
    LmNi,
    LmL,
    LrN,
    LrL,
    Mm,
    AftNh,
    AftNi,
}

impl Prior {
    pub const ALL: [Prior; 9] =
        [Prior::LmC, Prior::LmWi, Prior::LmNi, Prior::LmL, Prior::LrN, Prior::LrL, Prior::Mm, Prior::AftNh, Prior::AftNi];

    pub fn tag(&self) -> &'static str {
        match self {
            Prior::LmC => "LM-C",
            Prior::LmWi => "LM-WI",
            Prior::LmNi => "LM-NI",
            Prior::LmL => "LM-L",
            Prior::LrN => "LR-N",
            Prior::LrL => "LR-L",
            Prior::Mm => "MM",
            Prior::AftNh => "AFT-NH",
            Prior::AftNi => "AFT-NI",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Prior::LmC | Prior::LmWi | Prior::LmNi | Prior::LmL => Family::LM,
            Prior::LrN | Prior::LrL => Family::LR,
            Prior::Mm => Family::MM,
            Prior::AftNh | Prior::AftNi => Family::AFT,
        }
    }

    /// Default hyperparameter values.
    pub fn default_hyperparameters(&self) -> Hyperparameters {
        let pairs: &[(&str, f64)] = match self {
            Prior::LmC => &[("sigma0_sq", 1.0), ("eta0", 1e-4)],
            Prior::LmWi => &[("M", 100.0), ("d0", 2.5)],
            Prior::LmNi => &[("M", 100.0), ("sigma0", 1000.0)],
            Prior::LmL => &[("lambda0", 0.1), ("nu0", 1e-4), ("sigma0_sq", 1.0)],
            Prior::LrN => &[("b0_sq", 10.0)],
            Prior::LrL => &[("lambda0", 0.1)],
            Prior::Mm => &[("a0", 1.0), ("b0", 1.0), ("c0", 1.0), ("d0", 1.0)],
            Prior::AftNh => &[("b0_sq", 10.0), ("lambda0", 1.0)],
            Prior::AftNi => &[("M", 100.0), ("sigma0", 1000.0)],
        };
        Hyperparameters(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Prior {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Prior::ALL
            .iter()
            .find(|p| p.tag() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown prior `{s}`")))
    }
}

impl TryFrom<String> for Prior {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Prior> for String {
    fn from(p: Prior) -> String {
        p.tag().to_string()
    }
}

/// Mixture parameterization: marginal likelihood or latent allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    Marginal,
    Latent,
}

impl FromStr for Parameterization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginal" => Ok(Parameterization::Marginal),
            "latent" => Ok(Parameterization::Latent),
            other => Err(Error::Config(format!("unknown parameterization `{other}`"))),
        }
    }
}

/// Named hyperparameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters(pub BTreeMap<String, f64>);

impl Hyperparameters {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing hyperparameter `{name}`")))
    }
}

/// Typed hyperparameters, resolved once at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PriorSpec {
    LmC { sigma0_sq: f64, eta0: f64 },
    LmWi { m: f64, d0: f64 },
    LmNi { m: f64, sigma0: f64 },
    LmL { lambda0: f64, nu0: f64, sigma0_sq: f64 },
    LrN { b0_sq: f64 },
    LrL { lambda0: f64 },
    Mm { a0: f64, b0: f64, c0: f64, d0: f64 },
    AftNh { b0_sq: f64, lambda0: f64 },
    AftNi { m: f64, sigma0: f64 },
}

impl PriorSpec {
    fn resolve(prior: Prior, h: &Hyperparameters) -> Result<Self> {
        let g = |k: &str| -> Result<f64> {
            let v = h.get(k)?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidParameter(format!("hyperparameter `{k}` must be > 0, got {v}")))
            }
        };
        Ok(match prior {
            Prior::LmC => PriorSpec::LmC { sigma0_sq: g("sigma0_sq")?, eta0: g("eta0")? },
            Prior::LmWi => PriorSpec::LmWi { m: g("M")?, d0: g("d0")? },
            Prior::LmNi => PriorSpec::LmNi { m: g("M")?, sigma0: g("sigma0")? },
            Prior::LmL => PriorSpec::LmL { lambda0: g("lambda0")?, nu0: g("nu0")?, sigma0_sq: g("sigma0_sq")? },
            Prior::LrN => PriorSpec::LrN { b0_sq: g("b0_sq")? },
            Prior::LrL => PriorSpec::LrL { lambda0: g("lambda0")? },
            Prior::Mm => PriorSpec::Mm { a0: g("a0")?, b0: g("b0")?, c0: g("c0")?, d0: g("d0")? },
            Prior::AftNh => PriorSpec::AftNh { b0_sq: g("b0_sq")?, lambda0: g("lambda0")? },
            Prior::AftNi => PriorSpec::AftNi { m: g("M")?, sigma0: g("sigma0")? },
        })
    }
}

/// Normal-inverse-gamma posterior under the conjugate linear-model prior.
///
/// `beta | sigma2, y ~ N(mean, sigma2 * v_n)` and `sigma2 | y ~ IG(shape, scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePosterior {
    pub mean: Vec<f64>,
    pub v_n: DMatrix<f64>,
    pub shape: f64,
    pub scale: f64,
}

impl ConjugatePosterior {
    /// Marginal posterior covariance of beta (multivariate t), when it exists.
    pub fn beta_covariance(&self) -> Option<DMatrix<f64>> {
        (self.shape > 1.0).then(|| &self.v_n * (self.scale / (self.shape - 1.0)))
    }

    pub fn sigma2_mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }
}

/// A dataset bound to a model/prior pair.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    prior: Prior,
    hyper: Hyperparameters,
    pub(crate) spec: PriorSpec,
    data: Arc<Dataset>,
    parameterization: Parameterization,
    components: usize,
    layout: Arc<Layout>,
    pub(crate) xtx: DMatrix<f64>,
    pub(crate) xty: DVector<f64>,
    pub(crate) log_y: Vec<f64>,
}

/// Builder for [`ModelInstance`].
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    prior: Prior,
    data: Arc<Dataset>,
    hyper: Hyperparameters,
    parameterization: Parameterization,
    components: Option<usize>,
}

impl ModelBuilder {
    pub fn hyper(mut self, name: &str, value: f64) -> Self {
        self.hyper.0.insert(name.to_string(), value);
        self
    }

    pub fn parameterization(mut self, p: Parameterization) -> Self {
        self.parameterization = p;
        self
    }

    pub fn components(mut self, h: usize) -> Self {
        self.components = Some(h);
        self
    }

    pub fn build(self) -> Result<ModelInstance> {
        let family = self.prior.family();
        let spec = PriorSpec::resolve(self.prior, &self.hyper)?;
        let data = self.data;
        let n = data.n();
        let p = data.p();
        if family.is_regression() && p == 0 {
            return Err(Error::Config(format!("{} needs a design matrix with at least one column", self.prior)));
        }
        if family == Family::LR && data.y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Config("logistic responses must be 0/1".into()));
        }
        if family == Family::AFT {
            if data.delta.as_ref().map(|d| d.len()) != Some(n) {
                return Err(Error::Config("AFT data needs one censoring indicator per observation".into()));
            }
            if data.y.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config("AFT times must be positive".into()));
            }
        }
        if family != Family::MM && self.parameterization == Parameterization::Latent {
            return Err(Error::Config("latent parameterization applies to mixtures only".into()));
        }
        let components = match family {
            Family::MM => {
                let h = self
                    .components
                    .or_else(|| data.truth.mixture.as_ref().map(|m| m.means.len()))
                    .ok_or_else(|| Error::Config("mixture needs the number of components".into()))?;
                if h < 2 {
                    return Err(Error::Config(format!("mixture needs at least 2 components, got {h}")));
                }
                h
            }
            _ => 0,
        };
        let layout = Arc::new(build_layout(spec, p, components, n, self.parameterization));
        let (xtx, xty) = if family.is_regression() {
            let yv = DVector::from_column_slice(&data.y);
            (data.x.transpose() * &data.x, data.x.transpose() * yv)
        } else {
            (DMatrix::zeros(0, 0), DVector::zeros(0))
        };
        let log_y = if family == Family::AFT { data.y.iter().map(|v| v.ln()).collect() } else { Vec::new() };
        Ok(ModelInstance {
            prior: self.prior,
            hyper: self.hyper,
            spec,
            data,
            parameterization: self.parameterization,
            components,
            layout,
            xtx,
            xty,
            log_y,
        })
    }
}

fn build_layout(spec: PriorSpec, p: usize, h: usize, n: usize, param: Parameterization) -> Layout {
    use Transform::*;
    let beta = ("beta", Identity, p);
    match spec {
        PriorSpec::LmC { .. } => Layout::new([beta, ("sigma2", Log, 1)]),
        PriorSpec::LmWi { .. } => Layout::new([beta, ("sigma", Log, 1)]),
        PriorSpec::LmNi { sigma0, .. } => Layout::new([beta, ("sigma", ScaledLogit { upper: sigma0 }, 1)]),
        PriorSpec::LmL { .. } => Layout::new([beta, ("sigma2", Log, 1), ("lambda2", Log, 1)]),
        PriorSpec::LrN { .. } => Layout::new([beta]),
        PriorSpec::LrL { .. } => Layout::new([beta, ("lambda2", Log, 1)]),
        PriorSpec::AftNh { .. } => Layout::new([beta, ("sigma", Log, 1)]),
        PriorSpec::AftNi { sigma0, .. } => Layout::new([beta, ("sigma", ScaledLogit { upper: sigma0 }, 1)]),
        PriorSpec::Mm { .. } => {
            let mut blocks = vec![("mu", Identity, h), ("sigma2", Log, h), ("p", Simplex, h), ("v2", Log, 1)];
            if param == Parameterization::Latent {
                blocks.push(("z", Label, n));
            }
            Layout::new(blocks)
        }
    }
}

impl ModelInstance {
    pub fn builder(prior: Prior, data: Arc<Dataset>) -> ModelBuilder {
        let parameterization = Parameterization::Marginal;
        ModelBuilder { prior, data, hyper: prior.default_hyperparameters(), parameterization, components: None }
    }

    /// Model with default hyperparameters (marginal parameterization for mixtures).
    pub fn new(prior: Prior, data: Arc<Dataset>) -> Result<Self> {
        Self::builder(prior, data).build()
    }

    pub fn prior(&self) -> Prior {
        self.prior
    }

    pub fn family(&self) -> Family {
        self.prior.family()
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn data(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub(crate) fn p(&self) -> usize {
        self.data.p()
    }

    /// Same model and data, other mixture parameterization.
    pub fn with_parameterization(&self, param: Parameterization) -> Result<Self> {
        if param == self.parameterization {
            return Ok(self.clone());
        }
        ModelBuilder {
            prior: self.prior,
            data: Arc::clone(&self.data),
            hyper: self.hyper.clone(),
            parameterization: param,
            components: Some(self.components).filter(|h| *h > 0),
        }
        .build()
    }

    /// Wrap unconstrained values in a checked [`ParamVec`].
    pub fn param_vec(&self, values: Vec<f64>) -> Result<ParamVec> {
        ParamVec::new(Arc::clone(&self.layout), values)
    }

    fn check(&self, theta: &ParamVec) -> Result<()> {
        if *theta.layout != *self.layout {
            return Err(Error::Shape { expected: self.layout.dim(), got: theta.values.len() });
        }
        self.layout.check(&theta.values)
    }

    /// Unnormalized log-posterior on the unconstrained scale.
    pub fn log_posterior(&self, theta: &ParamVec) -> Result<f64> {
        self.check(theta)?;
        Ok(self.evaluate(&theta.values, None).total())
    }

    /// Likelihood, prior and Jacobian contributions separately.
    pub fn log_posterior_parts(&self, theta: &ParamVec) -> Result<LogPosteriorParts> {
        self.check(theta)?;
        Ok(self.evaluate(&theta.values, None))
    }

    /// Gradient of the log-posterior with respect to the unconstrained values.
    pub fn grad_log_posterior(&self, theta: &ParamVec) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut g = vec![0.0; self.dim()];
        self.log_density_and_grad(&theta.values, &mut g)?;
        Ok(g)
    }

    pub(crate) fn log_density_and_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        if self.parameterization == Parameterization::Latent {
            return Err(Error::Unsupported("gradient of the latent-allocation mixture (discrete labels)".into()));
        }
        Ok(self.evaluate(u, Some(grad)).total())
    }

    /// `ln f(y_i | theta)` for every observation.
    pub fn pointwise_log_lik(&self, theta: &ParamVec) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut out = Vec::with_capacity(self.data.n());
        self.evaluate_pointwise(&theta.values, &mut out);
        Ok(out)
    }

    /// Observed-data pointwise log-likelihood from a monitored (constrained)
    /// draw, as stored in a [`Chain`]. Mixtures always use the marginal
    /// likelihood, whatever the sampling parameterization.
    pub fn observed_log_lik(&self, monitored: &[f64]) -> Result<Vec<f64>> {
        if self.family() == Family::MM {
            let h = self.components;
            if monitored.len() != 3 * h + 1 {
                return Err(Error::Shape { expected: 3 * h + 1, got: monitored.len() });
            }
            let (mu, rest) = monitored.split_at(h);
            let (s2, rest) = rest.split_at(h);
            let w = &rest[..h];
            return Ok(self.data.y.iter().map(|&y| mixture_log_density(y, w, mu, s2)).collect());
        }
        let u = self.layout.unconstrain(monitored)?;
        let mut out = Vec::with_capacity(self.data.n());
        self.evaluate_pointwise(&u, &mut out);
        Ok(out)
    }

    /// Posterior predictive density of a mixture at `y`, averaged over the chain.
    pub fn predictive_density(&self, chain: &Chain, y: f64) -> Result<f64> {
        Ok(self.predictive_density_grid(chain, &[y])?[0])
    }

    /// [`ModelInstance::predictive_density`] evaluated on many points at once.
    pub fn predictive_density_grid(&self, chain: &Chain, ys: &[f64]) -> Result<Vec<f64>> {
        if self.family() != Family::MM {
            return Err(Error::Unsupported("predictive density is defined for mixtures".into()));
        }
        if chain.n_draws() == 0 {
            return Err(Error::Empty("chain has no draws".into()));
        }
        let h = self.components;
        let col = |name: &str| -> Result<usize> {
            chain.column_index(name).ok_or_else(|| Error::Config(format!("chain lacks column `{name}`")))
        };
        let mut idx = Vec::with_capacity(h);
        for k in 1..=h {
            idx.push((col(&format!("mu[{k}]"))?, col(&format!("sigma2[{k}]"))?, col(&format!("p[{k}]"))?));
        }
        let mut q = vec![0.0; ys.len()];
        for row in chain.rows() {
            for &(im, is, ip) in &idx {
                let (m, s2, w) = (row[im], row[is], row[ip]);
                let c = w / (2.0 * std::f64::consts::PI * s2).sqrt();
                for (qv, y) in q.iter_mut().zip(ys) {
                    let d = y - m;
                    *qv += c * (-0.5 * d * d / s2).exp();
                }
            }
        }
        let n = chain.n_draws() as f64;
        Ok(q.into_iter().map(|v| v / n).collect())
    }

    /// Closed-form posterior under the conjugate linear-model prior.
    pub fn closed_form_posterior(&self) -> Result<ConjugatePosterior> {
        let PriorSpec::LmC { sigma0_sq, eta0 } = self.spec else {
            return Err(Error::Unsupported(format!("closed-form posterior requires LM-C, model is {}", self.prior)));
        };
        let p = self.p();
        let n = self.data.n() as f64;
        let precision = &self.xtx + DMatrix::identity(p, p);
        let v_n = precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("X'X + I is not positive definite".into()))?
            .inverse();
        let mean = &v_n * &self.xty;
        let yty: f64 = self.data.y.iter().map(|v| v * v).sum();
        let quad = (mean.transpose() * &precision * &mean)[(0, 0)];
        Ok(ConjugatePosterior {
            mean: mean.iter().copied().collect(),
            v_n,
            shape: 0.5 * (eta0 + n),
            scale: 0.5 * (eta0 * sigma0_sq + yty - quad),
        })
    }

    /// Deterministic starting point on the unconstrained scale.
    pub fn initial_point(&self) -> Vec<f64> {
        let y = &self.data.y;
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(1e-2);
        let mut x = Vec::with_capacity(self.layout.constrained_dim());
        for b in self.layout.blocks() {
            match (b.name.as_str(), self.family()) {
                ("beta", _) => x.extend(std::iter::repeat_n(0.0, b.len)),
                ("sigma2", Family::LM) => x.push(var),
                ("sigma", Family::LM) => x.push(var.sqrt()),
                ("sigma", _) => x.push(1.0),
                ("lambda2", _) => x.push(1.0),
                ("mu", _) => {
                    let mut s = y.clone();
                    s.sort_by(f64::total_cmp);
                    let h = b.len as f64;
                    x.extend((0..b.len).map(|k| crate::diagnostics::quantile_sorted(&s, (k as f64 + 0.5) / h)));
                }
                ("sigma2", Family::MM) => x.extend(std::iter::repeat_n(var / b.len as f64, b.len)),
                ("p", _) => x.extend(std::iter::repeat_n(1.0 / b.len as f64, b.len)),
                ("v2", _) => {
                    let mu = &x[..self.components];
                    x.push(1.0 + mu.iter().map(|m| m * m).sum::<f64>() / mu.len() as f64);
                }
                ("z", _) => {
                    let h = self.components;
                    let mu = x[..h].to_vec();
                    x.extend(y.iter().map(|v| {
                        (0..h).min_by(|a, b| (v - mu[*a]).abs().total_cmp(&(v - mu[*b]).abs())).unwrap() as f64
                    }));
                }
                (other, _) => unreachable!("no initial value rule for block `{other}`"),
            }
        }
        // Keep bounded scales strictly inside their support.
        for b in self.layout.blocks() {
            if let Transform::ScaledLogit { upper } = b.transform {
                let v = &mut x[b.constrained_offset];
                *v = v.clamp(1e-3 * upper, 0.5 * upper);
            }
        }
        self.layout.unconstrain(&x).expect("initial values lie in the support")
    }
}

/// `ln sum_h w_h N(y | mu_h, s2_h)`.
pub(crate) fn mixture_log_density(y: f64, w: &[f64], mu: &[f64], s2: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..w.len()).map(|h| w[h].ln() + logpdf::normal(y, mu[h], s2[h])).collect();
    log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests;
