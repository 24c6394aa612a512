//! Chain-quality and model-fit diagnostics.

use std::f64::consts::LN_2;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_sum_exp, Family, ModelInstance};
use crate::samplers::Chain;

/// Smallest admissible denominator `1 + 2 sum rho` in the ESS formula.
pub const TAU_FLOOR: f64 = 1e-6;

fn mean_and_centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    if series.len() < 2 {
        return Err(Error::DegenerateSeries(format!("need at least 2 values, got {}", series.len())));
    }
    let n = series.len() as f64;
    let m = series.iter().sum::<f64>() / n;
    let c: Vec<f64> = series.iter().map(|v| v - m).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n;
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateSeries("series has zero or non-finite variance".into()));
    }
    Ok((c, c0))
}

fn autocov(c: &[f64], lag: usize) -> f64 {
    c[..c.len() - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / c.len() as f64
}

/// Sample autocorrelations at lags `0..=max_lag`, biased estimator
/// (divide by N, overall mean).
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let (c, c0) = mean_and_centered(series)?;
    if max_lag >= series.len() {
        return Err(Error::InvalidParameter(format!("max_lag {max_lag} must be below the series length {}", series.len())));
    }
    Ok((0..=max_lag).map(|l| autocov(&c, l) / c0).collect())
}

/// `1 + 2 sum_{l>=1} rho_l`, truncated by Geyer's initial positive sequence.
fn integrated_autocorrelation(series: &[f64]) -> Result<f64> {
    let (c, c0) = mean_and_centered(series)?;
    let n = c.len();
    // tau = -1 + 2 sum_k (rho_{2k} + rho_{2k+1}) over the initial positive run.
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = (autocov(&c, 2 * k) + autocov(&c, 2 * k + 1)) / c0;
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        k += 1;
    }
    Ok(tau.max(TAU_FLOOR))
}

/// Effective sample size `N / (1 + 2 sum rho)`.
pub fn ess(series: &[f64]) -> Result<f64> {
    Ok(series.len() as f64 / integrated_autocorrelation(series)?)
}

/// Per-parameter ESS fractions over a subset of chain columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    pub names: Vec<String>,
    pub ess: Vec<f64>,
    /// `ess / N_s`, clamped to 1.
    pub per_param_e: Vec<f64>,
    /// `ess / N_s` before clamping.
    pub raw_e: Vec<f64>,
    pub mean_e: f64,
    pub n_s: usize,
}

/// Blocks averaged into the headline E statistic: coefficients for
/// regressions, the shared scale `v2` for mixtures.
pub fn default_subset(family: Family) -> &'static [&'static str] {
    match family {
        Family::MM => &["v2"],
        _ => &["beta"],
    }
}

/// ESS fractions of the chain columns in the listed blocks.
pub fn ess_report(chain: &Chain, subset: &[&str]) -> Result<EssReport> {
    if chain.n_thin != 2 {
        warn!("E computed on a chain thinned by {} rather than 2", chain.n_thin);
    }
    let idx: Vec<usize> = subset.iter().flat_map(|b| chain.block_indices(b)).collect();
    if idx.is_empty() {
        return Err(Error::Empty(format!("no chain columns match {subset:?}")));
    }
    let n_s = chain.n_draws();
    let mut r = EssReport { names: Vec::new(), ess: Vec::new(), per_param_e: Vec::new(), raw_e: Vec::new(), mean_e: 0.0, n_s };
    for j in idx {
        let e = ess(&chain.column_at(j))?;
        let raw = e / n_s as f64;
        if raw > 1.0 {
            log::debug!("E for {} clamped from {raw:.4}", chain.names[j]);
        }
        r.names.push(chain.names[j].clone());
        r.ess.push(e);
        r.raw_e.push(raw);
        r.per_param_e.push(raw.min(1.0));
    }
    r.mean_e = r.per_param_e.iter().sum::<f64>() / r.per_param_e.len() as f64;
    Ok(r)
}

fn check_matrix(loglik: &[Vec<f64>]) -> Result<usize> {
    let n = loglik.first().ok_or_else(|| Error::Empty("log-likelihood matrix has no draws".into()))?.len();
    if let Some(bad) = loglik.iter().find(|r| r.len() != n) {
        return Err(Error::Shape { expected: n, got: bad.len() });
    }
    Ok(n)
}

/// Log pseudo-marginal likelihood from an `N_s x n` matrix of pointwise
/// log-likelihoods (one row per draw), via the harmonic-mean CPO.
pub fn lpml(loglik: &[Vec<f64>]) -> Result<f64> {
    let n = check_matrix(loglik)?;
    let ln_ns = (loglik.len() as f64).ln();
    let mut col = vec![0.0; loglik.len()];
    let mut total = 0.0;
    for i in 0..n {
        for (c, r) in col.iter_mut().zip(loglik) {
            *c = -r[i];
        }
        let ln_cpo = ln_ns - log_sum_exp(&col);
        if ln_cpo == f64::NEG_INFINITY {
            warn!("observation {i} has zero likelihood under some draw; LPML is -inf");
        }
        total += ln_cpo;
    }
    Ok(total)
}

/// Log pointwise predictive density, the first sum of WAIC.
pub fn lppd(loglik: &[Vec<f64>]) -> Result<f64> {
    let n = check_matrix(loglik)?;
    let ln_ns = (loglik.len() as f64).ln();
    let mut col = vec![0.0; loglik.len()];
    let mut total = 0.0;
    for i in 0..n {
        for (c, r) in col.iter_mut().zip(loglik) {
            *c = r[i];
        }
        total += log_sum_exp(&col) - ln_ns;
    }
    Ok(total)
}

/// WAIC on the log-density scale: lppd minus the summed pointwise sample
/// variance of the log-likelihood.
pub fn waic(loglik: &[Vec<f64>]) -> Result<f64> {
    let n = check_matrix(loglik)?;
    let ns = loglik.len();
    if ns < 2 {
        return Err(Error::InvalidParameter("WAIC needs at least 2 draws".into()));
    }
    let mut penalty = 0.0;
    for i in 0..n {
        let m = loglik.iter().map(|r| r[i]).sum::<f64>() / ns as f64;
        penalty += loglik.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / (ns - 1) as f64;
    }
    Ok(lppd(loglik)? - penalty)
}

/// Integration grid for [`kl_divergence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    /// `[min mean - 6, max mean + 6]` with 2001 points.
    pub fn around(means: &[f64]) -> Self {
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - 6.0;
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 6.0;
        Grid { lo, hi, points: 2001 }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + i as f64 * h).collect()
    }
}

/// Composite Simpson rule over equally spaced values (odd count).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// `KL(p || q)` in bits, by Simpson quadrature on `grid`.
pub fn kl_divergence(p: impl Fn(f64) -> f64, q: impl Fn(f64) -> f64, grid: Grid) -> Result<f64> {
    let qs: Vec<f64> = grid.nodes().iter().map(|&y| q(y)).collect();
    kl_from_values(&grid.nodes().iter().map(|&y| p(y)).collect::<Vec<_>>(), &qs, grid)
}

pub(crate) fn kl_from_values(ps: &[f64], qs: &[f64], grid: Grid) -> Result<f64> {
    if grid.points < 3 || grid.points % 2 == 0 || !(grid.hi > grid.lo) {
        return Err(Error::InvalidParameter("KL grid needs an odd number (>= 3) of points on lo < hi".into()));
    }
    let h = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let mut f = Vec::with_capacity(ps.len());
    for (&pv, &qv) in ps.iter().zip(qs) {
        if pv <= 0.0 {
            f.push(0.0);
        } else if qv <= 0.0 {
            if pv > 1e-300 {
                warn!("predictive density vanishes where the true density does not; KL is +inf");
                return Ok(f64::INFINITY);
            }
            f.push(0.0);
        } else {
            f.push(pv * (pv.ln() - qv.ln()) / LN_2);
        }
    }
    Ok(simpson(&f, h))
}

/// Sum of squared differences between estimates and truth.
pub fn beta_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Shape { expected: truth.len(), got: estimate.len() });
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (position `(n - 1) * prob`).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed credible interval at `level`.
pub fn credible_interval(series: &[f64], level: f64) -> Result<(f64, f64)> {
    if series.is_empty() {
        return Err(Error::Empty("credible interval of an empty series".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    let mut s = series.to_vec();
    s.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - level);
    Ok((quantile_sorted(&s, a), quantile_sorted(&s, 1.0 - a)))
}

/// 1-based indices of the block's coefficients whose credible interval excludes 0.
pub fn hard_shrinkage_select(chain: &Chain, block: &str, level: f64) -> Result<Vec<usize>> {
    let idx = chain.block_indices(block);
    if idx.is_empty() {
        return Err(Error::Empty(format!("chain has no `{block}` columns")));
    }
    let mut keep = Vec::new();
    for (k, j) in idx.into_iter().enumerate() {
        let (lo, hi) = credible_interval(&chain.column_at(j), level)?;
        if !(lo <= 0.0 && 0.0 <= hi) {
            keep.push(k + 1);
        }
    }
    Ok(keep)
}

/// Model-fit summary of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub lpml: f64,
    pub waic: f64,
    /// Predictive KL in bits (mixtures).
    pub kl: Option<f64>,
    /// Squared coefficient error against the truth (regressions).
    pub error: Option<f64>,
    /// 95% intervals per monitored parameter: `(name, lo, hi)`.
    pub ci: Vec<(String, f64, f64)>,
}

/// Pointwise observed-data log-likelihood of every draw (`N_s x n`).
pub fn loglik_matrix(model: &ModelInstance, chain: &Chain) -> Result<Vec<Vec<f64>>> {
    chain.rows().map(|r| model.observed_log_lik(r)).collect()
}

/// LPML, WAIC, KL or coefficient error, and 95% intervals for a chain.
pub fn fit_report(model: &ModelInstance, chain: &Chain) -> Result<FitReport> {
    if chain.n_draws() == 0 {
        return Err(Error::Empty("chain has no draws".into()));
    }
    let ll = loglik_matrix(model, chain)?;
    let lpml_v = lpml(&ll)?;
    let waic_v = if ll.len() >= 2 { waic(&ll)? } else { f64::NAN };
    let truth = &model.data().truth;
    let kl = match (&truth.mixture, model.family()) {
        (Some(mix), Family::MM) => {
            let grid = Grid::around(&mix.means);
            let nodes = grid.nodes();
            let q = model.predictive_density_grid(chain, &nodes)?;
            let p: Vec<f64> = nodes.iter().map(|&y| mix.density(y)).collect();
            Some(kl_from_values(&p, &q, grid)?)
        }
        _ => None,
    };
    let error = if model.family().is_regression() && !truth.beta.is_empty() {
        let means: Vec<f64> = chain.block_indices("beta").into_iter().map(|j| chain.mean(j)).collect();
        Some(beta_error(&means, &truth.beta)?)
    } else {
        None
    };
    let mut ci = Vec::with_capacity(chain.dim());
    for (j, name) in chain.names.iter().enumerate() {
        let (lo, hi) = credible_interval(&chain.column_at(j), 0.95)?;
        ci.push((name.clone(), lo, hi));
    }
    Ok(FitReport { lpml: lpml_v, waic: waic_v, kl, error, ci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let sd = (1.0 - rho * rho).sqrt();
        let mut x = rng.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|_| {
                x = rho * x + sd * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn autocorrelation_examples() {
        let iid = ar1(100_000, 0.0, 1);
        assert!(autocorrelation(&iid, 1).unwrap()[1].abs() < 0.01);
        let a = ar1(100_000, 0.9, 2);
        assert!((autocorrelation(&a, 1).unwrap()[1] - 0.9).abs() < 0.01);
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = autocorrelation(&alt, 1).unwrap();
        assert_eq!(r[0], 1.0);
        assert!((r[1] + 0.9).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(ess(&[3.0; 50]), Err(Error::DegenerateSeries(_))));
        assert!(matches!(autocorrelation(&[3.0; 50], 2), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn ess_of_ar1_matches_analytic() {
        let n = 100_000;
        let e = ess(&ar1(n, 0.9, 3)).unwrap();
        let expect = n as f64 * 0.1 / 1.9;
        assert!((e / expect - 1.0).abs() < 0.15, "{e} vs {expect}");
    }

    #[test]
    fn alternating_series_hits_the_floor_not_a_negative() {
        let alt: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = ess(&alt).unwrap();
        assert!(e > 0.0 && e <= 1000.0 / TAU_FLOOR);
    }

    #[test]
    fn ess_is_affine_invariant() {
        let a = ar1(5000, 0.5, 4);
        let b: Vec<f64> = a.iter().map(|v| -3.0 * v + 7.0).collect();
        let (ea, eb) = (ess(&a).unwrap(), ess(&b).unwrap());
        assert!((ea - eb).abs() <= 1e-10 * ea);
    }

    fn naive_lpml(m: &[Vec<f64>]) -> f64 {
        let ns = m.len() as f64;
        (0..m[0].len()).map(|i| (1.0 / (m.iter().map(|r| 1.0 / r[i].exp()).sum::<f64>() / ns)).ln()).sum()
    }

    fn naive_waic(m: &[Vec<f64>]) -> f64 {
        let ns = m.len() as f64;
        (0..m[0].len())
            .map(|i| {
                let first = (m.iter().map(|r| r[i].exp()).sum::<f64>() / ns).ln();
                let mean = m.iter().map(|r| r[i]).sum::<f64>() / ns;
                let var = m.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (ns - 1.0);
                first - var
            })
            .sum()
    }

    #[test]
    fn log_space_matches_naive_arithmetic() {
        let mut rng = rng_from_seed(5);
        for ns in 2..=4 {
            for n in 1..=4 {
                let m: Vec<Vec<f64>> = (0..ns).map(|_| (0..n).map(|_| -3.0 * rng.random::<f64>()).collect()).collect();
                assert!((lpml(&m).unwrap() - naive_lpml(&m)).abs() < 1e-12);
                assert!((waic(&m).unwrap() - naive_waic(&m)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn waic_hand_example() {
        let m = vec![vec![0.0], vec![-2.0]];
        let expect = ((1.0 + (-2.0f64).exp()) / 2.0).ln() - 2.0;
        assert!((waic(&m).unwrap() - expect).abs() < 1e-14);
        assert!(waic(&[vec![0.0]]).is_err());
    }

    #[test]
    fn lpml_single_draw_and_constant() {
        let one = vec![vec![-1.0, -2.5]];
        assert!((lpml(&one).unwrap() + 3.5).abs() < 1e-14);
        let constant = vec![vec![-1.0, -2.5]; 7];
        assert!((lpml(&constant).unwrap() + 3.5).abs() < 1e-12);
        assert!(lpml(&constant).unwrap() <= lppd(&constant).unwrap() + 1e-12);
    }

    fn gauss(m: f64) -> impl Fn(f64) -> f64 {
        move |y: f64| (-0.5 * (y - m) * (y - m)).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn kl_examples() {
        let g = Grid { lo: -12.0, hi: 13.0, points: 2001 };
        assert!(kl_divergence(gauss(0.0), gauss(0.0), g).unwrap().abs() < 1e-8);
        let v = kl_divergence(gauss(0.0), gauss(1.0), g).unwrap();
        assert!((v - 0.5 / LN_2).abs() < 1e-3);
        assert_eq!(kl_divergence(gauss(0.0), |_| 0.0, g).unwrap(), f64::INFINITY);
    }

    #[test]
    fn beta_error_examples() {
        assert_eq!(beta_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(beta_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert!(beta_error(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn credible_interval_examples() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = credible_interval(&s, 0.95).unwrap();
        assert!((lo - 3.475).abs() < 1e-12 && (hi - 97.525).abs() < 1e-12);
        assert_eq!(credible_interval(&[2.5; 10], 0.95).unwrap(), (2.5, 2.5));
        let sym: Vec<f64> = (-50..=50).map(|v| v as f64 * 0.3).collect();
        let (lo, hi) = credible_interval(&sym, 0.95).unwrap();
        assert!((lo + hi).abs() < 1e-12);
        assert!(credible_interval(&[], 0.95).is_err());
    }
}
