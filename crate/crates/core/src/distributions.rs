//! Probability distributions used by the models and samplers.
//!
//! Parameterizations follow the usual textbook glossary forms:
//! the Gaussian is parameterized by its variance, the Weibull by shape `alpha`
//! and rate-like `lambda` (`f(x) = alpha*lambda*x^(alpha-1)*exp(-lambda*x^alpha)`),
//! and the inverse gamma by shape/scale with kernel `x^-(alpha+1) exp(-beta/x)`.
//!
//! Log-densities return `-inf` outside the support so that samplers can
//! propose freely. Parameter validation happens once, at construction.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution as _, Gamma, StandardNormal};
use statrs::function::{erf::erfc, gamma::ln_gamma};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Distribution family and parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DistKind {
    Gaussian { mean: f64, var: f64 },
    MvGaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Uniform { a: f64, b: f64 },
    Bernoulli { p: f64 },
    Exponential { rate: f64 },
    DoubleExponential { loc: f64, scale: f64 },
    Cauchy { loc: f64, scale: f64 },
    HalfCauchy { loc: f64, scale: f64 },
    InverseGamma { shape: f64, scale: f64 },
    Weibull { shape: f64, rate: f64 },
    Dirichlet { alpha: Vec<f64> },
    Categorical { probs: Vec<f64> },
}

/// A validated, immutable distribution.
#[derive(Debug, Clone)]
pub struct Distribution {
    kind: DistKind,
    // Cholesky factor (lower) and log-determinant for the multivariate Gaussian.
    mv: Option<(DMatrix<f64>, f64)>,
}

impl PartialEq for Distribution {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

impl Distribution {
    pub fn new(kind: DistKind) -> Result<Self> {
        let mut mv = None;
        match &kind {
            DistKind::Gaussian { mean, var } => {
                finite("mean", *mean)?;
                positive("variance", *var)?;
            }
            DistKind::MvGaussian { mean, cov } => {
                let k = mean.len();
                if k == 0 {
                    return Err(Error::InvalidParameter("empty mean vector".into()));
                }
                if cov.len() != k || cov.iter().any(|r| r.len() != k) {
                    return Err(Error::Shape { expected: k, got: cov.len() });
                }
                for m in mean {
                    finite("mean", *m)?;
                }
                let s = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
                let chol = Cholesky::new(s).ok_or_else(|| {
                    Error::InvalidParameter("covariance is not positive definite".into())
                })?;
                let l = chol.l();
                let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
                mv = Some((l, log_det));
            }
            DistKind::Uniform { a, b } => {
                finite("a", *a)?;
                finite("b", *b)?;
                if a >= b {
                    return Err(Error::InvalidParameter(format!("uniform needs a < b, got ({a}, {b})")));
                }
            }
            DistKind::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidParameter(format!("bernoulli p must lie in [0,1], got {p}")));
                }
            }
            DistKind::Exponential { rate } => positive("rate", *rate)?,
            DistKind::DoubleExponential { loc, scale }
            | DistKind::Cauchy { loc, scale }
            | DistKind::HalfCauchy { loc, scale } => {
                finite("location", *loc)?;
                positive("scale", *scale)?;
            }
            DistKind::InverseGamma { shape, scale } => {
                positive("shape", *shape)?;
                positive("scale", *scale)?;
            }
            DistKind::Weibull { shape, rate } => {
                positive("shape", *shape)?;
                positive("rate", *rate)?;
            }
            DistKind::Dirichlet { alpha } => {
                if alpha.len() < 2 {
                    return Err(Error::InvalidParameter("dirichlet needs at least 2 components".into()));
                }
                for a in alpha {
                    positive("alpha", *a)?;
                }
            }
            DistKind::Categorical { probs } => {
                if probs.is_empty() {
                    return Err(Error::InvalidParameter("categorical needs at least 1 class".into()));
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidParameter("categorical weights must be nonnegative".into()));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("categorical weights sum to {s}, not 1")));
                }
            }
        }
        Ok(Self { kind, mv })
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        Self::new(DistKind::Gaussian { mean, var })
    }
    pub fn mv_gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(DistKind::MvGaussian { mean, cov })
    }
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(DistKind::Uniform { a, b })
    }
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(DistKind::Bernoulli { p })
    }
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(DistKind::Exponential { rate })
    }
    pub fn double_exponential(loc: f64, scale: f64) -> Result<Self> {
        Self::new(DistKind::DoubleExponential { loc, scale })
    }
    pub fn cauchy(loc: f64, scale: f64) -> Result<Self> {
        Self::new(DistKind::Cauchy { loc, scale })
    }
    pub fn half_cauchy(loc: f64, scale: f64) -> Result<Self> {
        Self::new(DistKind::HalfCauchy { loc, scale })
    }
    pub fn inverse_gamma(shape: f64, scale: f64) -> Result<Self> {
        Self::new(DistKind::InverseGamma { shape, scale })
    }
    pub fn weibull(shape: f64, rate: f64) -> Result<Self> {
        Self::new(DistKind::Weibull { shape, rate })
    }
    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self> {
        Self::new(DistKind::Dirichlet { alpha })
    }
    /// Weights may be unnormalized; they are normalized here.
    pub fn categorical_unnormalized(weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("categorical weights sum to {s}")));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / s).collect();
        // Absorb rounding so the sum check holds exactly.
        let drift = 1.0 - probs.iter().sum::<f64>();
        if let Some(m) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *m += drift;
        }
        Self::new(DistKind::Categorical { probs })
    }

    pub fn kind(&self) -> &DistKind {
        &self.kind
    }

    /// Dimension of a point drawn from this distribution.
    pub fn dim(&self) -> usize {
        match &self.kind {
            DistKind::MvGaussian { mean, .. } => mean.len(),
            DistKind::Dirichlet { alpha } => alpha.len(),
            _ => 1,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, DistKind::Bernoulli { .. } | DistKind::Categorical { .. })
    }

    /// Log-density of a scalar distribution; `NaN` for vector-valued ones.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match &self.kind {
            DistKind::Gaussian { mean, var } => logpdf::normal(x, *mean, *var),
            DistKind::Uniform { a, b } => logpdf::uniform(x, *a, *b),
            DistKind::Bernoulli { p } => {
                if x == 1.0 {
                    p.ln()
                } else if x == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistKind::Exponential { rate } => logpdf::exponential(x, *rate),
            DistKind::DoubleExponential { loc, scale } => logpdf::double_exponential(x, *loc, *scale),
            DistKind::Cauchy { loc, scale } => {
                let d = x - loc;
                scale.ln() - PI.ln() - (d * d + scale * scale).ln()
            }
            DistKind::HalfCauchy { loc, scale } => logpdf::half_cauchy(x, *loc, *scale),
            DistKind::InverseGamma { shape, scale } => logpdf::inverse_gamma(x, *shape, *scale),
            DistKind::Weibull { shape, rate } => {
                if x > 0.0 {
                    shape.ln() + rate.ln() + (shape - 1.0) * x.ln() - rate * x.powf(*shape)
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistKind::Categorical { probs } => {
                if x >= 0.0 && x.fract() == 0.0 && (x as usize) < probs.len() {
                    probs[x as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistKind::MvGaussian { .. } | DistKind::Dirichlet { .. } => f64::NAN,
        }
    }

    /// Log-density at `x`. Scalar distributions take a slice of length one;
    /// categorical points are 0-based class indices. Dirichlet points may be
    /// given on the full simplex (K coordinates) or by the first K-1.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DistKind::MvGaussian { mean, .. } => {
                if x.len() != mean.len() {
                    return f64::NAN;
                }
                let (l, log_det) = self.mv.as_ref().expect("validated");
                let d = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, m)| a - m));
                let z = l.solve_lower_triangular(&d).expect("nonsingular factor");
                -0.5 * (x.len() as f64 * LN_2PI + log_det + z.norm_squared())
            }
            DistKind::Dirichlet { alpha } => {
                let k = alpha.len();
                let last = match x.len() {
                    n if n == k => x[k - 1],
                    n if n + 1 == k => 1.0 - x.iter().sum::<f64>(),
                    _ => return f64::NAN,
                };
                let head = &x[..k - 1];
                if head.iter().any(|v| *v <= 0.0 || *v >= 1.0) || last <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                if x.len() == k && (x.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return f64::NEG_INFINITY;
                }
                let a0: f64 = alpha.iter().sum();
                let mut lp = ln_gamma(a0) - alpha.iter().map(|a| ln_gamma(*a)).sum::<f64>();
                for (xi, a) in head.iter().zip(alpha) {
                    lp += (a - 1.0) * xi.ln();
                }
                lp + (alpha[k - 1] - 1.0) * last.ln()
            }
            _ => {
                if x.len() != 1 {
                    return f64::NAN;
                }
                self.ln_pdf(x[0])
            }
        }
    }

    /// Gradient of the log-density with respect to the point.
    ///
    /// The double exponential uses the subgradient 0 at its kink. Dirichlet
    /// gradients are taken in the K-1 free coordinates.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        let scalar = |x: &[f64]| -> Result<f64> {
            if x.len() == 1 {
                Ok(x[0])
            } else {
                Err(Error::Shape { expected: 1, got: x.len() })
            }
        };
        let g = match &self.kind {
            DistKind::Bernoulli { .. } | DistKind::Categorical { .. } => {
                return Err(Error::Unsupported("gradient of a discrete distribution".into()))
            }
            DistKind::Gaussian { mean, var } => -(scalar(x)? - mean) / var,
            DistKind::Uniform { .. } => {
                scalar(x)?;
                0.0
            }
            DistKind::Exponential { rate } => {
                scalar(x)?;
                -rate
            }
            DistKind::DoubleExponential { loc, scale } => {
                let d = scalar(x)? - loc;
                if d > 0.0 {
                    -1.0 / scale
                } else if d < 0.0 {
                    1.0 / scale
                } else {
                    0.0
                }
            }
            DistKind::Cauchy { loc, scale } | DistKind::HalfCauchy { loc, scale } => {
                let d = scalar(x)? - loc;
                -2.0 * d / (d * d + scale * scale)
            }
            DistKind::InverseGamma { shape, scale } => {
                let v = scalar(x)?;
                -(shape + 1.0) / v + scale / (v * v)
            }
            DistKind::Weibull { shape, rate } => {
                let v = scalar(x)?;
                (shape - 1.0) / v - rate * shape * v.powf(shape - 1.0)
            }
            DistKind::MvGaussian { mean, .. } => {
                if x.len() != mean.len() {
                    return Err(Error::Shape { expected: mean.len(), got: x.len() });
                }
                let (l, _) = self.mv.as_ref().expect("validated");
                let d = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, m)| a - m));
                let z = l.solve_lower_triangular(&d).expect("nonsingular factor");
                let w = l.tr_solve_lower_triangular(&z).expect("nonsingular factor");
                return Ok(w.iter().map(|v| -v).collect());
            }
            DistKind::Dirichlet { alpha } => {
                let k = alpha.len();
                if x.len() + 1 != k {
                    return Err(Error::Shape { expected: k - 1, got: x.len() });
                }
                let last = 1.0 - x.iter().sum::<f64>();
                let tail = (alpha[k - 1] - 1.0) / last;
                return Ok(x.iter().zip(alpha).map(|(xi, a)| (a - 1.0) / xi - tail).collect());
            }
        };
        Ok(vec![g])
    }

    /// Cumulative distribution function of a scalar distribution.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let c = match &self.kind {
            DistKind::Gaussian { mean, var } => 0.5 * erfc(-(x - mean) / (2.0 * var).sqrt()),
            DistKind::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            DistKind::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            DistKind::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            DistKind::DoubleExponential { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            DistKind::Cauchy { loc, scale } => 0.5 + ((x - loc) / scale).atan() / PI,
            DistKind::HalfCauchy { loc, scale } => {
                if x <= *loc {
                    0.0
                } else {
                    2.0 * ((x - loc) / scale).atan() / PI
                }
            }
            DistKind::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs::function::gamma::gamma_ur(*shape, scale / x)
                }
            }
            DistKind::Weibull { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x.powf(*shape)).exp_m1()
                }
            }
            DistKind::Categorical { probs } => {
                if x < 0.0 {
                    0.0
                } else {
                    let upto = (x.floor() as usize).min(probs.len() - 1);
                    probs[..=upto].iter().sum::<f64>().min(1.0)
                }
            }
            DistKind::MvGaussian { .. } | DistKind::Dirichlet { .. } => {
                return Err(Error::Unsupported("cdf of a multivariate distribution".into()))
            }
        };
        Ok(c)
    }

    /// Draw a scalar; vector-valued distributions return their first coordinate.
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            DistKind::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            DistKind::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            DistKind::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            DistKind::Exponential { rate } => -open_unit(rng).ln() / rate,
            DistKind::DoubleExponential { loc, scale } => {
                let u = rng.random::<f64>() - 0.5;
                loc - scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
            DistKind::Cauchy { loc, scale } => loc + scale * (PI * (open_unit(rng) - 0.5)).tan(),
            DistKind::HalfCauchy { loc, scale } => {
                loc + scale * (0.5 * PI * open_unit(rng)).tan()
            }
            DistKind::InverseGamma { shape, scale } => {
                let g = Gamma::new(*shape, 1.0).expect("validated").sample(rng);
                scale / g
            }
            DistKind::Weibull { shape, rate } => (-open_unit(rng).ln() / rate).powf(1.0 / shape),
            DistKind::Categorical { probs } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i as f64;
                    }
                }
                // Rounding left u above the final cumulative weight.
                probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as f64
            }
            DistKind::MvGaussian { .. } | DistKind::Dirichlet { .. } => self.sample(rng)[0],
        }
    }

    /// Draw a point. Dirichlet draws are returned on the full simplex.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            DistKind::MvGaussian { mean, .. } => {
                let (l, _) = self.mv.as_ref().expect("validated");
                let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let d = l * z;
                mean.iter().zip(d.iter()).map(|(m, v)| m + v).collect()
            }
            DistKind::Dirichlet { alpha } => {
                let mut g: Vec<f64> = alpha
                    .iter()
                    .map(|a| Gamma::new(*a, 1.0).expect("validated").sample(rng))
                    .collect();
                let s: f64 = g.iter().sum();
                for v in &mut g {
                    *v /= s;
                }
                g
            }
            _ => vec![self.sample_scalar(rng)],
        }
    }

    /// Mean of a scalar distribution, where it exists.
    pub fn mean(&self) -> Option<f64> {
        match &self.kind {
            DistKind::Gaussian { mean, .. } => Some(*mean),
            DistKind::Uniform { a, b } => Some(0.5 * (a + b)),
            DistKind::Bernoulli { p } => Some(*p),
            DistKind::Exponential { rate } => Some(1.0 / rate),
            DistKind::DoubleExponential { loc, .. } => Some(*loc),
            DistKind::InverseGamma { shape, scale } if *shape > 1.0 => Some(scale / (shape - 1.0)),
            DistKind::Weibull { shape, rate } => {
                Some(rate.powf(-1.0 / shape) * statrs::function::gamma::gamma(1.0 + 1.0 / shape))
            }
            _ => None,
        }
    }
}

/// Scalar log-densities without construction-time validation, for hot loops.
pub mod logpdf {
    use super::{ln_gamma, LN_2, LN_2PI, PI};

    pub fn normal(x: f64, mean: f64, var: f64) -> f64 {
        let d = x - mean;
        -0.5 * (LN_2PI + var.ln()) - 0.5 * d * d / var
    }

    pub fn uniform(x: f64, a: f64, b: f64) -> f64 {
        if x >= a && x <= b {
            -(b - a).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn exponential(x: f64, rate: f64) -> f64 {
        if x >= 0.0 {
            rate.ln() - rate * x
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn double_exponential(x: f64, loc: f64, scale: f64) -> f64 {
        -(2.0 * scale).ln() - (x - loc).abs() / scale
    }

    pub fn half_cauchy(x: f64, loc: f64, scale: f64) -> f64 {
        if x >= loc {
            let d = x - loc;
            LN_2 + scale.ln() - PI.ln() - (d * d + scale * scale).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn inverse_gamma(x: f64, shape: f64, scale: f64) -> f64 {
        if x > 0.0 {
            shape * scale.ln() - ln_gamma(shape) - scale / x - (shape + 1.0) * x.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// d/dx of [`inverse_gamma`].
    pub fn inverse_gamma_grad(x: f64, shape: f64, scale: f64) -> f64 {
        -(shape + 1.0) / x + scale / (x * x)
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn standard_normal_at_mode() {
        let d = Distribution::gaussian(0.0, 1.0).unwrap();
        assert_relative_eq!(d.ln_pdf(0.0), -0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
        assert_relative_eq!(d.ln_pdf(0.0), -0.9189385332046727, epsilon = 1e-15);
    }

    #[test]
    fn flat_dirichlet_is_two_on_the_simplex() {
        let d = Distribution::dirichlet(vec![1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(d.log_density(&[0.2, 0.3, 0.5]), LN_2, epsilon = 1e-14);
        assert_relative_eq!(d.log_density(&[0.6, 0.1]), LN_2, epsilon = 1e-14);
        assert_eq!(d.log_density(&[0.6, 0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn weibull_hand_value() {
        let d = Distribution::weibull(2.0, 1.0).unwrap();
        assert_relative_eq!(d.ln_pdf(1.0), LN_2 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn outside_support_is_neg_infinity() {
        assert_eq!(Distribution::weibull(2.0, 1.0).unwrap().ln_pdf(-1.0), f64::NEG_INFINITY);
        assert_eq!(Distribution::inverse_gamma(2.0, 1.0).unwrap().ln_pdf(0.0), f64::NEG_INFINITY);
        assert_eq!(Distribution::exponential(1.0).unwrap().ln_pdf(-0.1), f64::NEG_INFINITY);
        assert_eq!(Distribution::half_cauchy(1.0, 1.0).unwrap().ln_pdf(0.5), f64::NEG_INFINITY);
        assert_eq!(Distribution::uniform(0.0, 1.0).unwrap().ln_pdf(1.5), f64::NEG_INFINITY);
        assert_eq!(Distribution::exponential(2.0).unwrap().ln_pdf(0.0), 2f64.ln());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Distribution::gaussian(0.0, 0.0).is_err());
        assert!(Distribution::uniform(1.0, 1.0).is_err());
        assert!(Distribution::bernoulli(1.2).is_err());
        assert!(Distribution::dirichlet(vec![1.0, -1.0]).is_err());
        assert!(Distribution::new(DistKind::Categorical { probs: vec![0.5, 0.4] }).is_err());
        assert!(Distribution::new(DistKind::Categorical { probs: vec![0.5, 0.5] }).is_ok());
        assert!(Distribution::weibull(0.0, 1.0).is_err());
        assert!(Distribution::mv_gaussian(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn normalization_by_quadrature() {
        let close = |total: f64, d: &Distribution| {
            assert!((total - 1.0).abs() < 1e-6, "{:?} integrates to {total}", d.kind());
        };
        // Real line: split at the location so kinks sit on a node.
        for (d, loc) in [
            (Distribution::gaussian(0.3, 2.0).unwrap(), 0.3),
            (Distribution::double_exponential(0.5, 0.7).unwrap(), 0.5),
        ] {
            let f = |x: f64| d.ln_pdf(x).exp();
            close(simpson(&f, loc - 40.0, loc, 200_000) + simpson(&f, loc, loc + 40.0, 200_000), &d);
        }
        let u = Distribution::uniform(-1.0, 2.0).unwrap();
        close(simpson(|x| u.ln_pdf(x).exp(), -1.0, 2.0, 1000), &u);
        // Positive support: substitute x = e^t.
        for d in [
            Distribution::exponential(1.5).unwrap(),
            Distribution::inverse_gamma(3.0, 2.0).unwrap(),
            Distribution::weibull(2.0, 1.3).unwrap(),
            Distribution::weibull(0.7, 1.0).unwrap(),
        ] {
            close(simpson(|t: f64| (d.ln_pdf(t.exp()) + t).exp(), -40.0, 10.0, 400_000), &d);
        }
        // Heavy tails: x = loc + scale * tan(t).
        let c = Distribution::cauchy(0.5, 2.0).unwrap();
        let jac = |t: f64| 2.0 / t.cos().powi(2);
        let edge = PI / 2.0 - 1e-9;
        close(simpson(|t| c.ln_pdf(0.5 + 2.0 * t.tan()).exp() * jac(t), -edge, edge, 200_000), &c);
        let hc = Distribution::half_cauchy(0.0, 2.0).unwrap();
        close(simpson(|t| hc.ln_pdf(1e-300 + 2.0 * t.tan()).exp() * jac(t), 0.0, edge, 200_000), &hc);
    }

    #[test]
    fn uniform_sample_mean() {
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let m = (0..n).map(|_| d.sample_scalar(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 0.5).abs() < 0.005);
    }

    #[test]
    fn degenerate_bernoulli() {
        let d = Distribution::bernoulli(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| d.sample_scalar(&mut rng) == 1.0));
    }

    #[test]
    fn weibull_shape_one_is_exponential() {
        let lambda = 2.5;
        let d = Distribution::weibull(1.0, lambda).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample_scalar(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        // Exponential(lambda): sd = 1/lambda.
        let se = (1.0 / lambda) / (n as f64).sqrt();
        assert!((m - 1.0 / lambda).abs() < 3.0 * se, "mean {m}");
    }

    #[test]
    fn gradient_examples() {
        let g = Distribution::gaussian(1.5, 2.0).unwrap();
        assert_eq!(g.grad_log_density(&[1.5]).unwrap(), vec![0.0]);
        assert_relative_eq!(g.grad_log_density(&[2.5]).unwrap()[0], -0.5);
        let ig = Distribution::inverse_gamma(3.0, 2.0).unwrap();
        assert!(ig.grad_log_density(&[2.0 / 4.0]).unwrap()[0].abs() < 1e-12);
        let hc = Distribution::half_cauchy(0.0, 2.0).unwrap();
        assert_relative_eq!(hc.grad_log_density(&[2.0]).unwrap()[0], -0.5, epsilon = 1e-15);
        let de = Distribution::double_exponential(0.0, 1.0).unwrap();
        assert_eq!(de.grad_log_density(&[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            Distribution::bernoulli(0.3).unwrap().grad_log_density(&[1.0]),
            Err(Error::Unsupported(_))
        ));
    }

    fn fd_check(d: &Distribution, x: &[f64]) {
        let g = d.grad_log_density(x).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (d.log_density(&xp) - d.log_density(&xm)) / (2.0 * h);
            assert!(
                (g[i] - fd).abs() / (1.0 + g[i].abs()) < 1e-5,
                "{:?} at {x:?}: analytic {} vs fd {fd}",
                d.kind(),
                g[i]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        for _ in 0..100 {
            let d = Distribution::gaussian(u(-3.0, 3.0), u(0.2, 4.0)).unwrap();
            fd_check(&d, &[u(-5.0, 5.0)]);
            let d = Distribution::exponential(u(0.2, 4.0)).unwrap();
            fd_check(&d, &[u(0.1, 5.0)]);
            let loc = u(-2.0, 2.0);
            let d = Distribution::double_exponential(loc, u(0.2, 3.0)).unwrap();
            let off = u(0.01, 3.0) * if u(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
            fd_check(&d, &[loc + off]);
            let d = Distribution::cauchy(u(-2.0, 2.0), u(0.2, 3.0)).unwrap();
            fd_check(&d, &[u(-5.0, 5.0)]);
            let loc = u(-2.0, 2.0);
            let d = Distribution::half_cauchy(loc, u(0.2, 3.0)).unwrap();
            fd_check(&d, &[loc + u(0.05, 5.0)]);
            let d = Distribution::inverse_gamma(u(0.5, 5.0), u(0.5, 5.0)).unwrap();
            fd_check(&d, &[u(0.2, 5.0)]);
            let d = Distribution::weibull(u(0.5, 3.0), u(0.3, 3.0)).unwrap();
            fd_check(&d, &[u(0.2, 3.0)]);
            let d = Distribution::uniform(-1.0, 1.0).unwrap();
            fd_check(&d, &[u(-0.9, 0.9)]);
            let d = Distribution::dirichlet(vec![u(0.5, 4.0), u(0.5, 4.0), u(0.5, 4.0)]).unwrap();
            let a = u(0.1, 0.45);
            let b = u(0.1, 0.45);
            fd_check(&d, &[a, b]);
            let s = u(0.5, 2.0);
            let d = Distribution::mv_gaussian(
                vec![u(-1.0, 1.0), u(-1.0, 1.0)],
                vec![vec![s, 0.3], vec![0.3, 1.0]],
            )
            .unwrap();
            fd_check(&d, &[u(-2.0, 2.0), u(-2.0, 2.0)]);
        }
    }

    #[test]
    fn mv_gaussian_matches_product_of_univariates_when_diagonal() {
        let d = Distribution::mv_gaussian(vec![1.0, -1.0], vec![vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let a = Distribution::gaussian(1.0, 2.0).unwrap();
        let b = Distribution::gaussian(-1.0, 0.5).unwrap();
        assert_relative_eq!(d.log_density(&[0.3, 0.2]), a.ln_pdf(0.3) + b.ln_pdf(0.2), epsilon = 1e-13);
    }

    // Kolmogorov-Smirnov statistic against the analytic CDF; 1% critical
    // value for n = 10^4 is 1.628 / sqrt(n).
    fn ks(d: &Distribution, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10_000;
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample_scalar(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        let mut dmax: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let c = d.cdf(*x).unwrap();
            dmax = dmax.max((c - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - c).abs());
        }
        dmax
    }

    #[test]
    fn sampler_agrees_with_cdf() {
        let crit = 1.628 / (10_000f64).sqrt();
        for (i, d) in [
            Distribution::gaussian(1.0, 3.0).unwrap(),
            Distribution::exponential(0.7).unwrap(),
            Distribution::weibull(1.7, 0.8).unwrap(),
            Distribution::uniform(-2.0, 5.0).unwrap(),
            Distribution::inverse_gamma(3.0, 2.0).unwrap(),
            Distribution::double_exponential(0.0, 2.0).unwrap(),
            Distribution::half_cauchy(0.0, 1.0).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let stat = ks(d, 100 + i as u64);
            assert!(stat < crit, "{:?}: KS {stat} >= {crit}", d.kind());
        }
    }

    #[test]
    fn categorical_and_dirichlet_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = Distribution::categorical_unnormalized(&[1.0, 2.0, 7.0]).unwrap();
        let n = 50_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[c.sample_scalar(&mut rng) as usize] += 1;
        }
        assert!((counts[2] as f64 / n as f64 - 0.7).abs() < 0.01);
        let d = Distribution::dirichlet(vec![2.0, 3.0, 5.0]).unwrap();
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let x = d.sample(&mut rng);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for k in 0..3 {
                mean[k] += x[k] / n as f64;
            }
        }
        assert!((mean[2] - 0.5).abs() < 0.01);
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let d = Distribution::inverse_gamma(2.0, 3.0).unwrap();
        let draw = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..100).map(|_| d.sample_scalar(&mut rng).to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(draw(1), draw(1));
        assert_ne!(draw(1), draw(2));
    }
}
