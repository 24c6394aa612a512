//! Log-posterior and gradient evaluation.

use std::f64::consts::{LN_2, PI};

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use super::params::{logistic_parts, softplus, Transform};
use super::{Family, ModelInstance, Parameterization, PriorSpec};
use crate::distributions::logpdf;

/// Additive pieces of the unconstrained log-posterior.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogPosteriorParts {
    pub log_lik: f64,
    pub log_prior: f64,
    pub log_jacobian: f64,
}

impl LogPosteriorParts {
    pub fn total(&self) -> f64 {
        let t = self.log_lik + self.log_prior + self.log_jacobian;
        if t.is_nan() {
            f64::NEG_INFINITY
        } else {
            t
        }
    }
}

/// A constrained scalar and its derivatives with respect to the free coordinate.
struct Scalar {
    value: f64,
    dvalue: f64,
    log_jac: f64,
    dlog_jac: f64,
}

fn constrain_scalar(t: Transform, u: f64) -> Scalar {
    match t {
        Transform::Log => {
            let v = u.exp();
            Scalar { value: v, dvalue: v, log_jac: u, dlog_jac: 1.0 }
        }
        Transform::ScaledLogit { upper } => {
            let (s, ln_s, ln_1ms) = logistic_parts(u);
            let value = upper * s;
            Scalar {
                value,
                dvalue: value * ln_1ms.exp(),
                log_jac: upper.ln() + ln_s + ln_1ms,
                dlog_jac: 1.0 - 2.0 * s,
            }
        }
        other => unreachable!("{other:?} is not a scalar scale transform"),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sum_j ln N(beta_j | 0, var)`, writing `d/dbeta_j` into `g` when non-empty.
fn normal_block(beta: &[f64], var: f64, g: &mut [f64]) -> f64 {
    let mut lp = 0.0;
    for (j, b) in beta.iter().enumerate() {
        lp += logpdf::normal(*b, 0.0, var);
        if !g.is_empty() {
            g[j] = -b / var;
        }
    }
    lp
}

/// `sum_j ln DE(beta_j | 0, 1/sqrt(lambda2))` and its derivative in `lambda2`.
fn laplace_block(beta: &[f64], lambda2: f64, g: &mut [f64]) -> (f64, f64) {
    let lambda = lambda2.sqrt();
    let mut lp = 0.0;
    let mut dl = 0.0;
    for (j, b) in beta.iter().enumerate() {
        lp += logpdf::double_exponential(*b, 0.0, 1.0 / lambda);
        dl += 0.5 / lambda2 - 0.5 * b.abs() / lambda;
        if !g.is_empty() {
            g[j] = if *b == 0.0 { 0.0 } else { -lambda * b.signum() };
        }
    }
    (lp, dl)
}

impl ModelInstance {
    pub(crate) fn evaluate(&self, u: &[f64], grad: Option<&mut [f64]>) -> LogPosteriorParts {
        if self.family() == Family::MM {
            self.eval_mixture(u, grad, None)
        } else {
            let eta = self.linear_predictor(&u[..self.p()]);
            self.eval_regression(u, &eta, grad, None)
        }
    }

    pub(crate) fn evaluate_pointwise(&self, u: &[f64], out: &mut Vec<f64>) {
        if self.family() == Family::MM {
            self.eval_mixture(u, None, Some(out));
        } else {
            let eta = self.linear_predictor(&u[..self.p()]);
            self.eval_regression(u, &eta, None, Some(out));
        }
    }

    pub(crate) fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let eta = &self.data.x * DVector::from_column_slice(beta);
        eta.as_slice().to_vec()
    }

    /// Index of the scale parameter (if any) and of `lambda2` (if any).
    pub(crate) fn regression_indices(&self) -> (Option<usize>, Option<usize>) {
        let p = self.p();
        match self.spec {
            PriorSpec::LrN { .. } => (None, None),
            PriorSpec::LrL { .. } => (None, Some(p)),
            PriorSpec::LmL { .. } => (Some(p), Some(p + 1)),
            _ => (Some(p), None),
        }
    }

    /// Regression log-posterior given a precomputed linear predictor `eta = X beta`.
    pub(crate) fn eval_regression(
        &self,
        u: &[f64],
        eta: &[f64],
        grad: Option<&mut [f64]>,
        mut pw: Option<&mut Vec<f64>>,
    ) -> LogPosteriorParts {
        let p = self.p();
        let y = &self.data.y;
        let n = y.len();
        let beta = &u[..p];
        let (scale_idx, lambda_idx) = self.regression_indices();
        let scale = scale_idx.map(|i| constrain_scalar(self.layout.blocks()[1].transform, u[i]));
        let want = grad.is_some();

        let mut dl_deta = if want { vec![0.0; n] } else { Vec::new() };
        // Derivative of the log-likelihood in the natural scale parameter.
        let mut dl_dscale = 0.0;
        let mut ll = 0.0;
        match self.family() {
            Family::LM => {
                let sv = scale.as_ref().expect("linear models carry a scale").value;
                let is_sd = matches!(self.spec, PriorSpec::LmWi { .. } | PriorSpec::LmNi { .. });
                let s2 = if is_sd { sv * sv } else { sv };
                let c = -0.5 * (2.0 * PI * s2).ln();
                let mut ds2 = 0.0;
                for i in 0..n {
                    let r = y[i] - eta[i];
                    let li = c - 0.5 * r * r / s2;
                    ll += li;
                    if let Some(pw) = pw.as_deref_mut() {
                        pw.push(li);
                    }
                    if want {
                        dl_deta[i] = r / s2;
                        ds2 += 0.5 * r * r / (s2 * s2);
                    }
                }
                if want {
                    ds2 -= 0.5 * n as f64 / s2;
                    dl_dscale = if is_sd { ds2 * 2.0 * sv } else { ds2 };
                }
            }
            Family::LR => {
                for i in 0..n {
                    let li = y[i] * eta[i] - softplus(eta[i]);
                    ll += li;
                    if let Some(pw) = pw.as_deref_mut() {
                        pw.push(li);
                    }
                    if want {
                        dl_deta[i] = y[i] - sigmoid(eta[i]);
                    }
                }
            }
            Family::AFT => {
                let sigma = scale.as_ref().expect("AFT models carry a scale").value;
                let ln_sigma = sigma.ln();
                let ln_ln2 = LN_2.ln();
                let delta = self.data.delta.as_ref().expect("checked at construction");
                for i in 0..n {
                    let t = (self.log_y[i] - eta[i]) / sigma;
                    let et = LN_2 * t.exp();
                    let li = if delta[i] { -ln_sigma + ln_ln2 + t - self.log_y[i] - et } else { -et };
                    ll += li;
                    if let Some(pw) = pw.as_deref_mut() {
                        pw.push(li);
                    }
                    if want {
                        let d = if delta[i] { 1.0 } else { 0.0 };
                        let g_t = d - et;
                        dl_deta[i] = -g_t / sigma;
                        dl_dscale += -d / sigma - t * g_t / sigma;
                    }
                }
            }
            Family::MM => unreachable!("mixtures are evaluated separately"),
        }

        let mut gb = if want { vec![0.0; p] } else { Vec::new() };
        let mut lp = 0.0;
        let mut dp_dscale = 0.0;
        let mut dp_dlambda = 0.0;
        let sv = scale.as_ref().map_or(f64::NAN, |s| s.value);
        let lambda2 = lambda_idx.map_or(f64::NAN, |i| u[i].exp());
        match self.spec {
            PriorSpec::LmC { sigma0_sq, eta0 } => {
                lp += normal_block(beta, sv, &mut gb);
                let bb: f64 = beta.iter().map(|b| b * b).sum();
                let (a, b) = (0.5 * eta0, 0.5 * eta0 * sigma0_sq);
                lp += logpdf::inverse_gamma(sv, a, b);
                dp_dscale += -0.5 * p as f64 / sv + 0.5 * bb / (sv * sv) + logpdf::inverse_gamma_grad(sv, a, b);
            }
            PriorSpec::LmWi { m, d0 } => {
                lp += normal_block(beta, m * m, &mut gb);
                lp += logpdf::half_cauchy(sv, 0.0, d0);
                dp_dscale += -2.0 * sv / (d0 * d0 + sv * sv);
            }
            PriorSpec::LmNi { m, sigma0 } | PriorSpec::AftNi { m, sigma0 } => {
                lp += normal_block(beta, m * m, &mut gb);
                lp += logpdf::uniform(sv, 0.0, sigma0);
            }
            PriorSpec::LmL { lambda0, nu0, sigma0_sq } => {
                let (l, dl) = laplace_block(beta, lambda2, &mut gb);
                lp += l + logpdf::exponential(lambda2, lambda0);
                dp_dlambda += dl - lambda0;
                let (a, b) = (0.5 * nu0, 0.5 * nu0 * sigma0_sq);
                lp += logpdf::inverse_gamma(sv, a, b);
                dp_dscale += logpdf::inverse_gamma_grad(sv, a, b);
            }
            PriorSpec::LrN { b0_sq } => lp += normal_block(beta, b0_sq, &mut gb),
            PriorSpec::LrL { lambda0 } => {
                let (l, dl) = laplace_block(beta, lambda2, &mut gb);
                lp += l + logpdf::exponential(lambda2, lambda0);
                dp_dlambda += dl - lambda0;
            }
            PriorSpec::AftNh { b0_sq, lambda0 } => {
                lp += normal_block(beta, b0_sq, &mut gb);
                lp += logpdf::exponential(sv, lambda0);
                dp_dscale -= lambda0;
            }
            PriorSpec::Mm { .. } => unreachable!(),
        }

        let mut lj = 0.0;
        if let Some(s) = &scale {
            lj += s.log_jac;
        }
        if let Some(i) = lambda_idx {
            lj += u[i];
        }

        if let Some(g) = grad {
            let xt_d = self.data.x.tr_mul(&DVector::from_vec(dl_deta));
            for j in 0..p {
                g[j] = xt_d[j] + gb[j];
            }
            if let (Some(i), Some(s)) = (scale_idx, &scale) {
                g[i] = (dl_dscale + dp_dscale) * s.dvalue + s.dlog_jac;
            }
            if let Some(i) = lambda_idx {
                g[i] = dp_dlambda * lambda2 + 1.0;
            }
        }
        LogPosteriorParts { log_lik: ll, log_prior: lp, log_jacobian: lj }
    }

    fn eval_mixture(&self, u: &[f64], grad: Option<&mut [f64]>, mut pw: Option<&mut Vec<f64>>) -> LogPosteriorParts {
        let PriorSpec::Mm { a0, b0, c0, d0 } = self.spec else { unreachable!() };
        let h = self.components;
        let mu = &u[..h];
        let ln_s2 = &u[h..2 * h];
        let s2: Vec<f64> = ln_s2.iter().map(|v| v.exp()).collect();
        let mut w = Vec::with_capacity(h);
        let simplex_lj = Transform::Simplex.forward(&u[2 * h..3 * h - 1], &mut w);
        let lnw: Vec<f64> = w.iter().map(|v| v.ln()).collect();
        let v2_idx = 3 * h - 1;
        let v2 = u[v2_idx].exp();
        let y = &self.data.y;
        let want = grad.is_some();

        let mut ll = 0.0;
        let mut lp = 0.0;
        let (mut gmu, mut gs2, mut gw) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
        match self.parameterization {
            Parameterization::Marginal => {
                let c: Vec<f64> = (0..h).map(|k| lnw[k] - 0.5 * (2.0 * PI * s2[k]).ln()).collect();
                let mut terms = vec![0.0; h];
                for &yi in y {
                    for k in 0..h {
                        let d = yi - mu[k];
                        terms[k] = c[k] - 0.5 * d * d / s2[k];
                    }
                    let lse = super::log_sum_exp(&terms);
                    ll += lse;
                    if let Some(pw) = pw.as_deref_mut() {
                        pw.push(lse);
                    }
                    if want {
                        for k in 0..h {
                            let r = (terms[k] - lse).exp();
                            let d = yi - mu[k];
                            gmu[k] += r * d / s2[k];
                            gs2[k] += r * (0.5 * d * d / (s2[k] * s2[k]) - 0.5 / s2[k]);
                            gw[k] += r / w[k];
                        }
                    }
                }
            }
            Parameterization::Latent => {
                let z = &u[3 * h - 1 + 1..];
                for (yi, zi) in y.iter().zip(z) {
                    let k = label_index(*zi, h);
                    let li = logpdf::normal(*yi, mu[k], s2[k]);
                    ll += li;
                    lp += lnw[k];
                    if let Some(pw) = pw.as_deref_mut() {
                        pw.push(li);
                    }
                }
            }
        }

        let mut sum_mu2 = 0.0;
        for k in 0..h {
            lp += logpdf::normal(mu[k], 0.0, v2) + logpdf::inverse_gamma(s2[k], c0, d0);
            sum_mu2 += mu[k] * mu[k];
        }
        lp += logpdf::inverse_gamma(v2, a0, b0) + ln_gamma(h as f64);
        let lj = ln_s2.iter().sum::<f64>() + simplex_lj + u[v2_idx];

        if let Some(g) = grad {
            for k in 0..h {
                g[k] = gmu[k] - mu[k] / v2;
                g[h + k] = (gs2[k] + logpdf::inverse_gamma_grad(s2[k], c0, d0)) * s2[k] + 1.0;
            }
            let dot: f64 = gw.iter().zip(&w).map(|(a, b)| a * b).sum();
            for j in 0..h - 1 {
                g[2 * h + j] = w[j] * (gw[j] - dot) + 1.0 - h as f64 * w[j];
            }
            g[v2_idx] = (-0.5 * h as f64 / v2 + 0.5 * sum_mu2 / (v2 * v2) + logpdf::inverse_gamma_grad(v2, a0, b0))
                * v2
                + 1.0;
        }
        LogPosteriorParts { log_lik: ll, log_prior: lp, log_jacobian: lj }
    }
}

pub(crate) fn label_index(z: f64, h: usize) -> usize {
    (z.round().max(0.0) as usize).min(h - 1)
}
