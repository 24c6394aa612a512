//! Synthetic datasets for the benchmark models.
//!
//! One seed drives every generator. Independent ChaCha streams are used for
//! coefficients, scale, covariates and responses, so changing `n` leaves the
//! true parameters untouched.

use std::f64::consts::LN_2;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};

mod stream {
    pub const BETA: u64 = 0;
    pub const SCALE: u64 = 1;
    pub const COVARIATES: u64 = 2;
    pub const RESPONSE: u64 = 3;
    pub const BINARY_PROBS: u64 = 4;
    pub const CENSORING: u64 = 5;
    pub const LABELS: u64 = 6;
}

/// Bernoulli probabilities for columns 2..=16 with sixteen binary covariates.
pub const BINARY_P16: [f64; 15] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.6, 0.7, 0.8, 0.9];
/// Bernoulli probabilities for columns 2..=4 with four binary covariates.
pub const BINARY_P4: [f64; 3] = [0.1, 0.5, 0.8];
/// Component means for the four-component mixture.
pub const MIXTURE_MEANS_H4: [f64; 4] = [-4.0, 0.0, 2.0, 6.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Covariates {
    #[default]
    Continuous,
    Binary,
}

impl std::str::FromStr for Covariates {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Covariates::Continuous),
            "binary" => Ok(Covariates::Binary),
            other => Err(Error::Config(format!("unknown covariate kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureTruth {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl MixtureTruth {
    pub fn density(&self, y: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| {
                let z = (y - m) / s;
                w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum()
    }
}

/// Parameter values used to simulate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    pub sigma2: Option<f64>,
    pub mixture: Option<MixtureTruth>,
    pub censoring_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    /// n x p design, first column all ones for regression families.
    pub x: DMatrix<f64>,
    /// Event indicator for censored data (true = event observed).
    pub delta: Option<Vec<bool>>,
    pub truth: GroundTruth,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn censored_fraction(&self) -> Option<f64> {
        let d = self.delta.as_ref()?;
        Some(d.iter().filter(|e| !**e).count() as f64 / d.len().max(1) as f64)
    }

    /// Write `y[,delta],x1..xp` rows to `path` and the truth to a JSON sidecar.
    pub fn write_csv(&self, path: &Path, truth_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["y".to_string()];
        if self.delta.is_some() {
            header.push("delta".into());
        }
        header.extend((1..=self.p()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row = vec![fmt_f64(self.y[i])];
            if let Some(d) = &self.delta {
                row.push(if d[i] { "1".into() } else { "0".into() });
            }
            row.extend((0..self.p()).map(|j| fmt_f64(self.x[(i, j)])));
            w.write_record(&row)?;
        }
        w.flush()?;
        std::fs::write(truth_path, serde_json::to_string_pretty(&self.truth)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path, truth_path: Option<&Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let has_delta = header.iter().any(|h| h == "delta");
        let p = header.iter().filter(|h| h.starts_with('x')).count();
        let mut y = Vec::new();
        let mut delta = Vec::new();
        let mut xs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Config(format!("bad number `{s}` in {}", path.display())))
            };
            y.push(parse(&rec[0])?);
            let mut col = 1;
            if has_delta {
                delta.push(&rec[1] == "1");
                col = 2;
            }
            for j in 0..p {
                xs.push(parse(&rec[col + j])?);
            }
        }
        let n = y.len();
        let x = DMatrix::from_row_slice(n, p, &xs);
        let truth = match truth_path {
            Some(tp) => serde_json::from_str(&std::fs::read_to_string(tp)?)?,
            None => GroundTruth::default(),
        };
        Ok(Dataset { y, x, delta: has_delta.then_some(delta), truth })
    }
}

/// Shortest representation that round-trips exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Coefficients drawn U(lo, hi) with the trailing `zeros` non-intercept entries zeroed.
fn draw_beta(seed: u64, p: usize, zeros: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::Config("need at least one covariate (the intercept)".into()));
    }
    if zeros >= p {
        return Err(Error::Config(format!("cannot zero {zeros} of {p} coefficients (intercept is never zeroed)")));
    }
    let mut rng = substream(seed, stream::BETA);
    let mut beta: Vec<f64> = (0..p).map(|_| uniform(&mut rng, lo, hi)).collect();
    for b in beta.iter_mut().skip(p - zeros) {
        *b = 0.0;
    }
    Ok(beta)
}

fn continuous_design(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = substream(seed, stream::COVARIATES);
    // Row-major fill so row i does not depend on n.
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..p {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    x
}

/// Column probabilities for the binary-covariate schedules.
pub fn binary_schedule(seed: u64, p: usize) -> Result<Vec<f64>> {
    match p {
        4 => Ok(BINARY_P4.to_vec()),
        16 => Ok(BINARY_P16.to_vec()),
        50 => {
            let mut rng = substream(seed, stream::BINARY_PROBS);
            Ok((0..49).map(|_| uniform(&mut rng, 0.05, 0.95)).collect())
        }
        _ => Err(Error::Config(format!("binary covariates are defined only for p in {{4, 16, 50}}, got {p}"))),
    }
}

fn binary_design(seed: u64, n: usize, p: usize) -> Result<DMatrix<f64>> {
    let probs = binary_schedule(seed, p)?;
    let mut rng = substream(seed, stream::COVARIATES);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..p {
            x[(i, j)] = if rng.random::<f64>() < probs[j - 1] { 1.0 } else { 0.0 };
        }
    }
    Ok(x)
}

/// Linear-model data: `y_i ~ N(x_i'beta, sigma2)`.
pub fn gen_linear(n: usize, p: usize, covariates: Covariates, zero_pattern: usize, seed: u64) -> Result<Dataset> {
    let beta = draw_beta(seed, p, zero_pattern, -7.0, 7.0)?;
    let sigma2 = uniform(&mut substream(seed, stream::SCALE), 2.0, 10.0);
    let x = match covariates {
        Covariates::Continuous => continuous_design(seed, n, p),
        Covariates::Binary => binary_design(seed, n, p)?,
    };
    let eta = &x * nalgebra::DVector::from_column_slice(&beta);
    let mut rng = substream(seed, stream::RESPONSE);
    let sd = sigma2.sqrt();
    let y = eta.iter().map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(Dataset {
        y,
        x,
        delta: None,
        truth: GroundTruth { beta, sigma2: Some(sigma2), ..Default::default() },
    })
}

/// Logistic-regression data: `y_i ~ Bernoulli(1 / (1 + exp(-x_i'beta)))`.
pub fn gen_logistic(n: usize, p: usize, zero_pattern: usize, seed: u64) -> Result<Dataset> {
    let beta = draw_beta(seed, p, zero_pattern, -7.0, 7.0)?;
    let x = continuous_design(seed, n, p);
    Ok(logistic_response(x, beta, seed))
}

/// Logistic responses for a given design and coefficient vector.
pub fn logistic_response(x: DMatrix<f64>, beta: Vec<f64>, seed: u64) -> Dataset {
    let eta = &x * nalgebra::DVector::from_column_slice(&beta);
    let mut rng = substream(seed, stream::RESPONSE);
    let y = eta
        .iter()
        .map(|e| if rng.random::<f64>() < 1.0 / (1.0 + (-e).exp()) { 1.0 } else { 0.0 })
        .collect();
    Dataset { y, x, delta: None, truth: GroundTruth { beta, ..Default::default() } }
}

/// Univariate Gaussian mixture with equal weights and unit component sds.
pub fn gen_mixture(n: usize, h: usize, seed: u64) -> Result<Dataset> {
    let means = match h {
        4 => MIXTURE_MEANS_H4.to_vec(),
        2 => {
            let mut rng = substream(seed, stream::BETA);
            vec![uniform(&mut rng, -2.0, 0.0), uniform(&mut rng, 1.0, 3.0)]
        }
        _ => return Err(Error::Config(format!("mixture data defined for H in {{2, 4}}, got {h}"))),
    };
    let mut labels = substream(seed, stream::LABELS);
    let mut noise = substream(seed, stream::RESPONSE);
    let y = (0..n)
        .map(|_| {
            let z = labels.random_range(0..h);
            means[z] + noise.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(Dataset {
        y,
        x: DMatrix::zeros(n, 0),
        delta: None,
        truth: GroundTruth {
            mixture: Some(MixtureTruth { weights: vec![1.0 / h as f64; h], means, sds: vec![1.0; h] }),
            ..Default::default()
        },
    })
}

/// Right-censored Weibull AFT data with expected censored fraction `k`.
pub fn gen_aft(n: usize, p: usize, k: f64, seed: u64) -> Result<Dataset> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Config(format!("censoring fraction must lie in (0, 1), got {k}")));
    }
    let beta = draw_beta(seed, p, 0, -1.0, 1.0)?;
    let sigma2 = uniform(&mut substream(seed, stream::SCALE), 2.0, 10.0);
    let sigma = sigma2.sqrt();
    let x = continuous_design(seed, n, p);
    let eta = &x * nalgebra::DVector::from_column_slice(&beta);
    let mut t_rng = substream(seed, stream::RESPONSE);
    let mut c_rng = substream(seed, stream::CENSORING);
    let odds = k / (1.0 - k);
    let mut y = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for e in eta.iter() {
        let rate = LN_2 * (-e / sigma).exp();
        let t = Distribution::weibull(1.0 / sigma, rate)?.sample_scalar(&mut t_rng);
        let c = Distribution::weibull(1.0 / sigma, odds * rate)?.sample_scalar(&mut c_rng);
        y.push(t.min(c));
        delta.push(t <= c);
    }
    Ok(Dataset {
        y,
        x,
        delta: Some(delta),
        truth: GroundTruth { beta, sigma2: Some(sigma2), censoring_k: Some(k), ..Default::default() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_p4_schedule() {
        assert_eq!(binary_schedule(1, 4).unwrap(), vec![0.1, 0.5, 0.8]);
        assert!(binary_schedule(1, 5).is_err());
        let d = gen_linear(20_000, 4, Covariates::Binary, 0, 3).unwrap();
        for (j, p) in BINARY_P4.iter().enumerate() {
            let m = d.x.column(j + 1).mean();
            assert!((m - p).abs() < 0.015, "column {} mean {m}", j + 2);
        }
        assert!(gen_linear(10, 7, Covariates::Binary, 0, 3).is_err());
    }

    #[test]
    fn binary_p50_probabilities_in_range() {
        let probs = binary_schedule(9, 50).unwrap();
        assert_eq!(probs.len(), 49);
        assert!(probs.iter().all(|p| (0.05..0.95).contains(p)));
    }

    #[test]
    fn lasso_zero_patterns() {
        let d = gen_linear(50, 30, Covariates::Continuous, 28, 1).unwrap();
        assert_eq!(d.truth.beta.iter().filter(|b| **b == 0.0).count(), 28);
        assert_ne!(d.truth.beta[0], 0.0);
        let d = gen_logistic(50, 100, 98, 1).unwrap();
        assert_eq!(d.truth.beta.iter().filter(|b| **b != 0.0).count(), 2);
        assert!(gen_linear(10, 4, Covariates::Continuous, 4, 1).is_err());
    }

    #[test]
    fn ranges_and_intercept() {
        let d = gen_linear(100, 8, Covariates::Continuous, 0, 5).unwrap();
        assert!(d.truth.beta.iter().all(|b| (-7.0..7.0).contains(b)));
        assert!((2.0..10.0).contains(&d.truth.sigma2.unwrap()));
        assert!(d.x.column(0).iter().all(|v| *v == 1.0));
        let a = gen_aft(100, 4, 0.5, 5).unwrap();
        assert!(a.truth.beta.iter().all(|b| (-1.0..1.0).contains(b)));
        assert!(a.y.iter().all(|v| *v > 0.0));
        assert!(a.x.column(0).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(gen_linear(30, 4, Covariates::Continuous, 0, 11).unwrap(), gen_linear(30, 4, Covariates::Continuous, 0, 11).unwrap());
        assert_ne!(gen_linear(30, 4, Covariates::Continuous, 0, 11).unwrap(), gen_linear(30, 4, Covariates::Continuous, 0, 12).unwrap());
        assert_eq!(gen_aft(30, 4, 0.2, 2).unwrap(), gen_aft(30, 4, 0.2, 2).unwrap());
        assert_eq!(gen_mixture(30, 2, 2).unwrap(), gen_mixture(30, 2, 2).unwrap());
    }

    #[test]
    fn changing_n_keeps_truth() {
        let a = gen_linear(30, 4, Covariates::Continuous, 0, 11).unwrap();
        let b = gen_linear(300, 4, Covariates::Continuous, 0, 11).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.x.row(7), b.x.row(7));
    }

    #[test]
    fn logistic_symmetry_and_saturation() {
        let x = continuous_design(4, 10_000, 3);
        let d = logistic_response(x, vec![0.0; 3], 4);
        let m = d.y.iter().sum::<f64>() / d.n() as f64;
        assert!((m - 0.5).abs() < 0.015);
        let x = DMatrix::from_element(1000, 1, 1.0);
        let d = logistic_response(x, vec![7.0], 4);
        assert!(d.y.iter().sum::<f64>() >= 995.0);
    }

    #[test]
    fn mixture_settings() {
        let d = gen_mixture(10, 4, 1).unwrap();
        assert_eq!(d.truth.mixture.unwrap().means, vec![-4.0, 0.0, 2.0, 6.0]);
        for seed in 0..20 {
            let m = gen_mixture(5, 2, seed).unwrap().truth.mixture.unwrap();
            assert!((-2.0..=0.0).contains(&m.means[0]) && (1.0..=3.0).contains(&m.means[1]));
            assert_eq!(m.weights, vec![0.5, 0.5]);
            assert_eq!(m.sds, vec![1.0, 1.0]);
        }
        assert!(gen_mixture(10, 3, 1).is_err());
    }

    #[test]
    fn mixture_component_proportions() {
        // Labels are drawn uniformly; recover them by nearest true mean is
        // unreliable, so regenerate the label stream directly.
        let n = 100_000;
        for h in [2usize, 4] {
            let mut labels = substream(21, stream::LABELS);
            let mut counts = vec![0usize; h];
            for _ in 0..n {
                counts[labels.random_range(0..h)] += 1;
            }
            for c in counts {
                assert!((c as f64 / n as f64 - 1.0 / h as f64).abs() < 0.01);
            }
        }
        // The generator consumes that same stream.
        let d = gen_mixture(n, 4, 21).unwrap();
        let mean = d.y.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn censoring_calibration() {
        for k in [0.2, 0.5, 0.8] {
            let d = gen_aft(10_000, 4, k, 8).unwrap();
            let f = d.censored_fraction().unwrap();
            assert!((f - k).abs() < 0.015, "k={k}: censored {f}");
        }
        assert!(gen_aft(10, 4, 1.0, 1).is_err());
        assert!(gen_aft(10, 4, 0.0, 1).is_err());
    }

    #[test]
    fn median_failure_time_is_one_at_zero_predictor() {
        // T ~ Wei(1/sigma, ln 2): S(1) = exp(-ln 2) = 1/2 for any sigma.
        let mut rng = substream(3, 0);
        for sigma in [0.5, 1.0, 2.5] {
            let d = Distribution::weibull(1.0 / sigma, LN_2).unwrap();
            let mut t: Vec<f64> = (0..20_001).map(|_| d.sample_scalar(&mut rng)).collect();
            t.sort_by(f64::total_cmp);
            assert!((t[10_000] - 1.0).abs() < 0.05 * sigma.max(1.0), "median {}", t[10_000]);
            assert!((d.cdf(1.0).unwrap() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = gen_aft(25, 3, 0.5, 4).unwrap();
        let (a, b) = (dir.path().join("d.csv"), dir.path().join("t.json"));
        d.write_csv(&a, &b).unwrap();
        let back = Dataset::read_csv(&a, Some(&b)).unwrap();
        assert_eq!(back, d);
        let header = std::fs::read_to_string(&a).unwrap();
        assert!(header.starts_with("y,delta,x1,x2,x3\n"));
    }
}
