//! Full conditionals for Gibbs sampling.

use std::ops::Range;

use nalgebra::DMatrix;

use super::eval::label_index;
use super::params::Transform;
use super::{ModelInstance, Parameterization, ParamVec, PriorSpec};
use crate::distributions::{logpdf, Distribution};
use crate::error::{Error, Result};

/// What a Gibbs block updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    /// All regression coefficients jointly.
    Beta,
    BetaCoord(usize),
    /// Observation scale (`sigma2` or `sigma`).
    Scale,
    Lambda2,
    Mu(usize),
    MixVar(usize),
    Weights,
    V2,
    Label(usize),
    /// One unconstrained coordinate, updated through the joint density.
    Coord(usize),
}

/// A block of coordinates updated together.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsBlock {
    pub name: String,
    pub id: BlockId,
    /// Unconstrained coordinates covered.
    pub coords: Range<usize>,
    /// Map between the block's natural scale and its unconstrained coordinates.
    pub transform: Transform,
}

/// Full conditional of one block.
pub enum ConditionalSpec<'a> {
    /// Exact distribution on the block's natural scale.
    ClosedForm(Distribution),
    /// Log density, up to a constant, of a single unconstrained coordinate
    /// (Jacobian included).
    Generic(Box<dyn FnMut(f64) -> f64 + 'a>),
}

impl std::fmt::Debug for ConditionalSpec<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConditionalSpec::ClosedForm(d) => f.debug_tuple("ClosedForm").field(d).finish(),
            ConditionalSpec::Generic(_) => f.write_str("Generic(..)"),
        }
    }
}

fn block(name: impl Into<String>, id: BlockId, coords: Range<usize>, transform: Transform) -> GibbsBlock {
    GibbsBlock { name: name.into(), id, coords, transform }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ModelInstance {
    /// Gibbs update schedule, in sweep order.
    pub fn gibbs_blocks(&self) -> Vec<GibbsBlock> {
        let p = self.p();
        let layout = &self.layout;
        let scale = || {
            let b = &layout.blocks()[1];
            block(b.name.clone(), BlockId::Scale, b.range(), b.transform)
        };
        let lambda2 = |i: usize| block("lambda2", BlockId::Lambda2, i..i + 1, Transform::Log);
        let coords = || (0..p).map(|j| block(format!("beta[{}]", j + 1), BlockId::BetaCoord(j), j..j + 1, Transform::Identity));
        match self.spec {
            PriorSpec::LmC { .. } | PriorSpec::LmWi { .. } | PriorSpec::LmNi { .. } => {
                vec![block("beta", BlockId::Beta, 0..p, Transform::Identity), scale()]
            }
            PriorSpec::LmL { .. } => coords().chain([scale(), lambda2(p + 1)]).collect(),
            PriorSpec::LrN { .. } => coords().collect(),
            PriorSpec::LrL { .. } => coords().chain([lambda2(p)]).collect(),
            PriorSpec::AftNh { .. } | PriorSpec::AftNi { .. } => coords().chain([scale()]).collect(),
            PriorSpec::Mm { .. } => {
                let h = self.components;
                match self.parameterization {
                    Parameterization::Latent => {
                        let z0 = 3 * h;
                        let mut v: Vec<GibbsBlock> = (0..self.data.n())
                            .map(|i| block(format!("z[{}]", i + 1), BlockId::Label(i), z0 + i..z0 + i + 1, Transform::Label))
                            .collect();
                        v.push(block("p", BlockId::Weights, 2 * h..3 * h - 1, Transform::Simplex));
                        v.extend((0..h).map(|k| block(format!("mu[{}]", k + 1), BlockId::Mu(k), k..k + 1, Transform::Identity)));
                        v.extend(
                            (0..h).map(|k| block(format!("sigma2[{}]", k + 1), BlockId::MixVar(k), h + k..h + k + 1, Transform::Log)),
                        );
                        v.push(block("v2", BlockId::V2, 3 * h - 1..3 * h, Transform::Log));
                        v
                    }
                    Parameterization::Marginal => {
                        let mut v = Vec::new();
                        for b in layout.blocks() {
                            for i in 0..b.free_len {
                                let name = if b.len == 1 { b.name.clone() } else { format!("{}[{}]", b.name, i + 1) };
                                let c = b.offset + i;
                                v.push(block(name, BlockId::Coord(c), c..c + 1, Transform::Identity));
                            }
                        }
                        v
                    }
                }
            }
        }
    }

    /// Full conditional of the named Gibbs block at `theta`.
    pub fn full_conditional(&self, block: &str, theta: &ParamVec) -> Result<ConditionalSpec<'_>> {
        self.check(theta)?;
        let b = self
            .gibbs_blocks()
            .into_iter()
            .find(|b| b.name == block)
            .ok_or_else(|| Error::Config(format!("{} has no Gibbs block `{block}`", self.prior)))?;
        self.conditional(&b, &theta.values)
    }

    pub(crate) fn conditional(&self, b: &GibbsBlock, u: &[f64]) -> Result<ConditionalSpec<'_>> {
        let p = self.p();
        let n = self.data.n();
        match (b.id, self.spec) {
            (BlockId::Beta, PriorSpec::LmC { .. }) => {
                let s2 = u[p].exp();
                let prec = &self.xtx + DMatrix::identity(p, p);
                let v_n = prec
                    .cholesky()
                    .ok_or_else(|| Error::InvalidParameter("X'X + I is not positive definite".into()))?
                    .inverse();
                let mean = &v_n * &self.xty;
                let cov = v_n * s2;
                Ok(ConditionalSpec::ClosedForm(Distribution::mv_gaussian(mean.as_slice().to_vec(), to_rows(&cov))?))
            }
            (BlockId::Beta, PriorSpec::LmWi { m, .. } | PriorSpec::LmNi { m, .. }) => {
                let mut sc = Vec::with_capacity(1);
                self.layout.blocks()[1].transform.forward(&u[p..p + 1], &mut sc);
                let s2 = sc[0] * sc[0];
                let prec = &self.xtx / s2 + DMatrix::identity(p, p) / (m * m);
                let cov = prec
                    .cholesky()
                    .ok_or_else(|| Error::InvalidParameter("beta conditional precision is not positive definite".into()))?
                    .inverse();
                let mean = &cov * &self.xty / s2;
                Ok(ConditionalSpec::ClosedForm(Distribution::mv_gaussian(mean.as_slice().to_vec(), to_rows(&cov))?))
            }
            (BlockId::Scale, PriorSpec::LmC { sigma0_sq, eta0 }) => {
                let beta = &u[..p];
                let rss = self.rss(beta);
                let bb: f64 = beta.iter().map(|v| v * v).sum();
                let shape = 0.5 * (eta0 + (n + p) as f64);
                let scale = 0.5 * (eta0 * sigma0_sq + rss + bb);
                Ok(ConditionalSpec::ClosedForm(Distribution::inverse_gamma(shape, scale)?))
            }
            (BlockId::Scale, PriorSpec::LmL { nu0, sigma0_sq, .. }) => {
                let rss = self.rss(&u[..p]);
                let shape = 0.5 * (nu0 + n as f64);
                let scale = 0.5 * (nu0 * sigma0_sq + rss);
                Ok(ConditionalSpec::ClosedForm(Distribution::inverse_gamma(shape, scale)?))
            }
            (BlockId::Scale | BlockId::Lambda2, _) => {
                let c = b.coords.start;
                let eta = self.linear_predictor(&u[..p]);
                let mut uu = u.to_vec();
                Ok(ConditionalSpec::Generic(Box::new(move |v| {
                    uu[c] = v;
                    self.eval_regression(&uu, &eta, None, None).total()
                })))
            }
            (BlockId::BetaCoord(j), _) => {
                let xj: Vec<f64> = self.data.x.column(j).iter().copied().collect();
                let mut eta = self.linear_predictor(&u[..p]);
                for (e, x) in eta.iter_mut().zip(&xj) {
                    *e -= x * u[j];
                }
                let base = eta.clone();
                let mut uu = u.to_vec();
                Ok(ConditionalSpec::Generic(Box::new(move |v| {
                    uu[j] = v;
                    for i in 0..eta.len() {
                        eta[i] = base[i] + xj[i] * v;
                    }
                    self.eval_regression(&uu, &eta, None, None).total()
                })))
            }
            (BlockId::Coord(c), _) => {
                let mut uu = u.to_vec();
                Ok(ConditionalSpec::Generic(Box::new(move |v| {
                    uu[c] = v;
                    self.evaluate(&uu, None).total()
                })))
            }
            (id, PriorSpec::Mm { a0, b0, c0, d0 }) => self.mixture_conditional(id, u, (a0, b0, c0, d0)),
            (id, _) => Err(Error::Unsupported(format!("{} has no conditional for block {id:?}", self.prior))),
        }
    }

    fn rss(&self, beta: &[f64]) -> f64 {
        let eta = self.linear_predictor(beta);
        self.data.y.iter().zip(&eta).map(|(y, e)| (y - e) * (y - e)).sum()
    }

    fn mixture_conditional(&self, id: BlockId, u: &[f64], (a0, b0, c0, d0): (f64, f64, f64, f64)) -> Result<ConditionalSpec<'_>> {
        let h = self.components;
        let y = &self.data.y;
        let mu = &u[..h];
        let s2: Vec<f64> = u[h..2 * h].iter().map(|v| v.exp()).collect();
        let z = &u[3 * h..];
        let members = |k: usize| y.iter().zip(z).filter(move |(_, zi)| label_index(**zi, h) == k).map(|(yi, _)| *yi);
        let dist = match id {
            BlockId::Label(i) => {
                let mut w = Vec::with_capacity(h);
                Transform::Simplex.forward(&u[2 * h..3 * h - 1], &mut w);
                let lw: Vec<f64> = (0..h).map(|k| w[k].ln() + logpdf::normal(y[i], mu[k], s2[k])).collect();
                let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let probs: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
                Distribution::categorical_unnormalized(&probs)?
            }
            BlockId::Weights => {
                let alpha = (0..h).map(|k| 1.0 + members(k).count() as f64).collect();
                Distribution::dirichlet(alpha)?
            }
            BlockId::Mu(k) => {
                let v2 = u[3 * h - 1].exp();
                let (cnt, sum) = members(k).fold((0.0, 0.0), |(c, s), v| (c + 1.0, s + v));
                let prec = cnt / s2[k] + 1.0 / v2;
                Distribution::gaussian(sum / s2[k] / prec, 1.0 / prec)?
            }
            BlockId::MixVar(k) => {
                let (cnt, ss) = members(k).fold((0.0, 0.0), |(c, s), v| (c + 1.0, s + (v - mu[k]).powi(2)));
                Distribution::inverse_gamma(c0 + 0.5 * cnt, d0 + 0.5 * ss)?
            }
            BlockId::V2 => {
                let ss: f64 = mu.iter().map(|m| m * m).sum();
                Distribution::inverse_gamma(a0 + 0.5 * h as f64, b0 + 0.5 * ss)?
            }
            other => return Err(Error::Unsupported(format!("mixture has no conditional for block {other:?}"))),
        };
        Ok(ConditionalSpec::ClosedForm(dist))
    }
}
