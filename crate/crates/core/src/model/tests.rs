use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use super::*;
use crate::datagen::{gen_aft, gen_linear, gen_logistic, gen_mixture, Covariates, Dataset, GroundTruth, MixtureTruth};
use crate::distributions::{DistKind, Distribution};
use crate::rng::rng_from_seed;
use crate::samplers::{Backend, ChainStats};

fn dataset(prior: Prior, seed: u64) -> Arc<Dataset> {
    Arc::new(match prior.family() {
        Family::LM => gen_linear(40, 3, Covariates::Continuous, 0, seed).unwrap(),
        Family::LR => gen_logistic(40, 3, 0, seed).unwrap(),
        Family::MM => gen_mixture(30, 2, seed).unwrap(),
        Family::AFT => gen_aft(40, 3, 0.5, seed).unwrap(),
    })
}

fn tiny(y: Vec<f64>, x: Vec<f64>, p: usize) -> Arc<Dataset> {
    let n = y.len();
    Arc::new(Dataset { y, x: DMatrix::from_row_slice(n, p, &x), delta: None, truth: GroundTruth::default() })
}

fn random_point(m: &ModelInstance, rng: &mut impl Rng) -> Vec<f64> {
    m.initial_point().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect()
}

#[test]
fn tags_round_trip() {
    for p in Prior::ALL {
        assert_eq!(p.tag().parse::<Prior>().unwrap(), p);
    }
    assert!("LM-X".parse::<Prior>().is_err());
    assert_eq!(serde_json::to_string(&Prior::AftNh).unwrap(), "\"AFT-NH\"");
}

#[test]
fn default_hyperparameters() {
    let h = Prior::LmC.default_hyperparameters();
    assert_eq!(h.get("sigma0_sq").unwrap(), 1.0);
    assert_eq!(h.get("eta0").unwrap(), 1e-4);
    let h = Prior::LmWi.default_hyperparameters();
    assert_eq!((h.get("M").unwrap(), h.get("d0").unwrap()), (100.0, 2.5));
    let h = Prior::LmL.default_hyperparameters();
    assert_eq!((h.get("lambda0").unwrap(), h.get("nu0").unwrap()), (0.1, 1e-4));
    assert_eq!(Prior::LrN.default_hyperparameters().get("b0_sq").unwrap(), 10.0);
    assert_eq!(Prior::AftNi.default_hyperparameters().get("sigma0").unwrap(), 1000.0);
    assert_eq!(Prior::Mm.default_hyperparameters().0.len(), 4);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = rng_from_seed(11);
    for prior in Prior::ALL {
        let m = ModelInstance::new(prior, dataset(prior, 3)).unwrap();
        for _ in 0..100 {
            let u = random_point(&m, &mut rng);
            let theta = m.param_vec(u.clone()).unwrap();
            let g = m.grad_log_posterior(&theta).unwrap();
            for j in 0..u.len() {
                let h = 1e-6;
                let (mut up, mut um) = (u.clone(), u.clone());
                up[j] += h;
                um[j] -= h;
                let fd = (m.evaluate(&up, None).total() - m.evaluate(&um, None).total()) / (2.0 * h);
                assert!((g[j] - fd).abs() / (1.0 + g[j].abs()) < 1e-5, "{prior} coord {j}: {} vs {fd}", g[j]);
            }
        }
    }
}

#[test]
fn pointwise_sums_to_likelihood_part() {
    let mut rng = rng_from_seed(12);
    for prior in Prior::ALL {
        for param in [Parameterization::Marginal, Parameterization::Latent] {
            if param == Parameterization::Latent && prior != Prior::Mm {
                continue;
            }
            let m = ModelInstance::builder(prior, dataset(prior, 4)).parameterization(param).build().unwrap();
            let theta = m.param_vec(random_point(&m, &mut rng)).unwrap();
            let parts = m.log_posterior_parts(&theta).unwrap();
            let pw: f64 = m.pointwise_log_lik(&theta).unwrap().iter().sum();
            let lp = m.log_posterior(&theta).unwrap();
            assert!((pw - (lp - parts.log_prior - parts.log_jacobian)).abs() < 1e-10, "{prior}");
            assert!((parts.log_jacobian - theta.log_jacobian()).abs() < 1e-12, "{prior}");
        }
    }
}

#[test]
fn lm_c_hand_evaluation() {
    let m = ModelInstance::new(Prior::LmC, tiny(vec![0.0], vec![1.0], 1)).unwrap();
    let theta = m.param_vec(vec![0.0, 0.0]).unwrap();
    let eta0 = 1e-4;
    let n01 = Distribution::gaussian(0.0, 1.0).unwrap().ln_pdf(0.0);
    let ig = Distribution::inverse_gamma(eta0 / 2.0, eta0 / 2.0).unwrap().ln_pdf(1.0);
    // Jacobian of sigma2 = exp(u) at u = 0 is ln 1 = 0.
    assert!((m.log_posterior(&theta).unwrap() - (2.0 * n01 + ig)).abs() < 1e-12);
}

#[test]
fn lm_truth_beats_perturbed_beta() {
    let data = Arc::new(gen_linear(200, 4, Covariates::Continuous, 0, 5).unwrap());
    let m = ModelInstance::new(Prior::LmC, Arc::clone(&data)).unwrap();
    let mut x = data.truth.beta.clone();
    x.push(data.truth.sigma2.unwrap());
    let at_truth = ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap();
    x[1] += 10.0;
    let off = ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap();
    let (a, b) = (m.log_posterior(&at_truth).unwrap(), m.log_posterior(&off).unwrap());
    assert!(a.is_finite() && a > b);
}

#[test]
fn aft_all_censored_is_survival_only() {
    let mut d = (*dataset(Prior::AftNh, 6)).clone();
    d.delta = Some(vec![false; d.n()]);
    let d = Arc::new(d);
    let m = ModelInstance::new(Prior::AftNh, Arc::clone(&d)).unwrap();
    let beta = [0.3, -0.2, 0.1];
    let sigma: f64 = 1.7;
    let mut x = beta.to_vec();
    x.push(sigma);
    let theta = ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap();
    let mut expect = 0.0;
    for i in 0..d.n() {
        let eta: f64 = (0..3).map(|j| d.x[(i, j)] * beta[j]).sum();
        let lambda = LN_2 * (-eta / sigma).exp();
        expect -= lambda * d.y[i].powf(1.0 / sigma);
    }
    let parts = m.log_posterior_parts(&theta).unwrap();
    assert!((parts.log_lik - expect).abs() < 1e-10 * expect.abs().max(1.0));
    let prior: f64 = beta.iter().map(|b| logpdf::normal(*b, 0.0, 10.0)).sum::<f64>() + logpdf::exponential(sigma, 1.0);
    assert!((parts.log_prior - prior).abs() < 1e-12);
}

#[test]
fn aft_uncensored_reduces_to_weibull() {
    let mut d = (*dataset(Prior::AftNh, 7)).clone();
    d.delta = Some(vec![true; d.n()]);
    let d = Arc::new(d);
    let m = ModelInstance::new(Prior::AftNh, Arc::clone(&d)).unwrap();
    let beta = [0.5, 0.1, -0.4];
    let sigma = 0.8;
    let mut x = beta.to_vec();
    x.push(sigma);
    let theta = ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap();
    let mut expect = 0.0;
    for i in 0..d.n() {
        let eta: f64 = (0..3).map(|j| d.x[(i, j)] * beta[j]).sum();
        let w = Distribution::weibull(1.0 / sigma, LN_2 * (-eta / sigma).exp()).unwrap();
        expect += w.ln_pdf(d.y[i]);
    }
    let got: f64 = m.pointwise_log_lik(&theta).unwrap().iter().sum();
    assert!((got - expect).abs() < 1e-10);
}

#[test]
fn aft_pointwise_hand_value() {
    let mut d = Dataset {
        y: vec![2.5],
        x: DMatrix::from_row_slice(1, 1, &[1.0]),
        delta: Some(vec![true]),
        truth: GroundTruth::default(),
    };
    let m = ModelInstance::new(Prior::AftNh, Arc::new(d.clone())).unwrap();
    let theta = ParamVec::from_constrained(Arc::clone(m.layout()), &[0.0, 1.0]).unwrap();
    let ll = m.pointwise_log_lik(&theta).unwrap()[0];
    assert!((ll - (LN_2.ln() - LN_2 * 2.5)).abs() < 1e-14);
    d.delta = Some(vec![false]);
    let m = ModelInstance::new(Prior::AftNh, Arc::new(d)).unwrap();
    assert!((m.pointwise_log_lik(&theta).unwrap()[0] + LN_2 * 2.5).abs() < 1e-14);
}

#[test]
fn lr_n_gradient_hand_value() {
    let m = ModelInstance::new(Prior::LrN, tiny(vec![1.0], vec![1.0], 1)).unwrap();
    let g = m.grad_log_posterior(&m.param_vec(vec![0.0]).unwrap()).unwrap();
    assert!((g[0] - 0.5).abs() < 1e-15);
}

#[test]
fn lm_ni_beta_gradient_formula() {
    let d = dataset(Prior::LmNi, 8);
    let m = ModelInstance::new(Prior::LmNi, Arc::clone(&d)).unwrap();
    let beta = [1.0, -2.0, 0.5];
    let sigma: f64 = 2.0;
    let mut x = beta.to_vec();
    x.push(sigma);
    let theta = ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap();
    let g = m.grad_log_posterior(&theta).unwrap();
    for j in 0..3 {
        let mut lik = 0.0;
        for i in 0..d.n() {
            let eta: f64 = (0..3).map(|k| d.x[(i, k)] * beta[k]).sum();
            lik += (d.y[i] - eta) * d.x[(i, j)] / (sigma * sigma);
        }
        let prior = -beta[j] / 1e4;
        assert!((g[j] - (lik + prior)).abs() < 1e-9 * (1.0 + lik.abs()));
    }
}

/// Damped Newton ascent with a finite-difference Hessian of the analytic gradient.
fn find_mode(m: &ModelInstance) -> Vec<f64> {
    let mut u = m.initial_point();
    let d = u.len();
    let grad = |u: &[f64]| m.grad_log_posterior(&m.param_vec(u.to_vec()).unwrap()).unwrap();
    let mut damping = 1.0;
    for _ in 0..500 {
        let g = grad(&u);
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-9 {
            break;
        }
        let mut neg_hess = DMatrix::zeros(d, d);
        for j in 0..d {
            let h = 1e-5;
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += h;
            um[j] -= h;
            let (gp, gm) = (grad(&up), grad(&um));
            for i in 0..d {
                neg_hess[(i, j)] = -(gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let neg_hess = (&neg_hess + neg_hess.transpose()) * 0.5;
        let lp0 = m.evaluate(&u, None).total();
        loop {
            let a = &neg_hess + DMatrix::identity(d, d) * damping;
            let step = a.lu().solve(&nalgebra::DVector::from_vec(g.clone()));
            if let Some(step) = step {
                let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
                if m.evaluate(&cand, None).total() >= lp0 {
                    u = cand;
                    damping = (damping * 0.1).max(1e-12);
                    break;
                }
            }
            damping *= 10.0;
            if damping > 1e12 {
                return u;
            }
        }
    }
    u
}

#[test]
fn gradient_vanishes_at_posterior_mode() {
    for prior in [Prior::LmC, Prior::LmWi, Prior::LrN, Prior::AftNh] {
        let m = ModelInstance::new(prior, dataset(prior, 9)).unwrap();
        let u = find_mode(&m);
        let g = m.grad_log_posterior(&m.param_vec(u).unwrap()).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-4, "{prior}: {norm}");
    }
}

#[test]
fn layout_mismatch_is_a_shape_error() {
    let m = ModelInstance::new(Prior::LmC, dataset(Prior::LmC, 1)).unwrap();
    assert!(matches!(m.param_vec(vec![0.0; 2]), Err(Error::Shape { .. })));
    let other = ModelInstance::new(Prior::LrN, dataset(Prior::LrN, 1)).unwrap();
    let theta = other.param_vec(other.initial_point()).unwrap();
    assert!(matches!(m.log_posterior(&theta), Err(Error::Shape { .. })));
}

#[test]
fn latent_mixture_has_no_gradient() {
    let m = ModelInstance::builder(Prior::Mm, dataset(Prior::Mm, 2))
        .parameterization(Parameterization::Latent)
        .build()
        .unwrap();
    let theta = m.param_vec(m.initial_point()).unwrap();
    assert!(matches!(m.grad_log_posterior(&theta), Err(Error::Unsupported(_))));
}

fn mixture_theta(m: &ModelInstance, mu: &[f64], s2: &[f64], w: &[f64], v2: f64, z: &[f64]) -> ParamVec {
    let mut x: Vec<f64> = mu.to_vec();
    x.extend_from_slice(s2);
    x.extend_from_slice(w);
    x.push(v2);
    x.extend_from_slice(z);
    ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap()
}

#[test]
fn mixture_marginal_equals_latent_sum() {
    let y = vec![-1.3, 0.2, 2.1, 0.7, -0.4, 3.3, 1.1, -2.0];
    for n in 1..=y.len() {
        let d = Arc::new(Dataset {
            y: y[..n].to_vec(),
            x: DMatrix::zeros(n, 0),
            delta: None,
            truth: GroundTruth::default(),
        });
        let marg = ModelInstance::builder(Prior::Mm, Arc::clone(&d)).components(2).build().unwrap();
        let lat = marg.with_parameterization(Parameterization::Latent).unwrap();
        let (mu, s2, w, v2) = ([-0.5, 1.5], [0.8, 1.7], [0.3, 0.7], 2.2);
        let target = marg.log_posterior(&mixture_theta(&marg, &mu, &s2, &w, v2, &[])).unwrap();
        let mut terms = Vec::new();
        for mask in 0..(1u32 << n) {
            let z: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
            terms.push(lat.log_posterior(&mixture_theta(&lat, &mu, &s2, &w, v2, &z)).unwrap());
        }
        assert!((log_sum_exp(&terms) - target).abs() < 1e-10, "n = {n}");
    }
}

#[test]
fn mixture_label_permutation_invariance() {
    let d = dataset(Prior::Mm, 3);
    let m = ModelInstance::builder(Prior::Mm, d).components(3).build().unwrap();
    let (mu, s2, w) = ([-1.0, 0.5, 2.0], [0.5, 1.0, 2.0], [0.2, 0.3, 0.5]);
    let base: f64 = m.pointwise_log_lik(&mixture_theta(&m, &mu, &s2, &w, 1.0, &[])).unwrap().iter().sum();
    for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0], [2, 0, 1], [0, 2, 1]] {
        let pm: Vec<f64> = perm.iter().map(|&k| mu[k]).collect();
        let ps: Vec<f64> = perm.iter().map(|&k| s2[k]).collect();
        let pw: Vec<f64> = perm.iter().map(|&k| w[k]).collect();
        let v: f64 = m.pointwise_log_lik(&mixture_theta(&m, &pm, &ps, &pw, 1.0, &[])).unwrap().iter().sum();
        assert!((v - base).abs() < 1e-12, "{perm:?}");
    }
}

#[test]
fn mixture_identical_components_pointwise() {
    let d = Arc::new(Dataset { y: vec![0.0], x: DMatrix::zeros(1, 0), delta: None, truth: GroundTruth::default() });
    let m = ModelInstance::builder(Prior::Mm, d).components(2).build().unwrap();
    let theta = mixture_theta(&m, &[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.5], 1.0, &[]);
    let v = m.pointwise_log_lik(&theta).unwrap()[0];
    assert!((v + 0.5 * (2.0 * PI).ln()).abs() < 1e-14);
}

#[test]
fn closed_form_posterior_examples() {
    let m = ModelInstance::new(Prior::LmC, tiny(vec![0.0], vec![1.0], 1)).unwrap();
    assert_eq!(m.closed_form_posterior().unwrap().mean, vec![0.0]);

    let empty = Arc::new(Dataset { y: vec![], x: DMatrix::zeros(0, 2), delta: None, truth: GroundTruth::default() });
    let post = ModelInstance::new(Prior::LmC, empty).unwrap().closed_form_posterior().unwrap();
    assert_eq!(post.mean, vec![0.0, 0.0]);
    assert_eq!(post.v_n, DMatrix::identity(2, 2));
    assert!((post.shape - 0.5e-4).abs() < 1e-18 && (post.scale - 0.5e-4).abs() < 1e-18);

    let lr = ModelInstance::new(Prior::LrN, dataset(Prior::LrN, 1)).unwrap();
    assert!(matches!(lr.closed_form_posterior(), Err(Error::Unsupported(_))));
}

#[test]
fn lm_c_conditionals_match_algebra() {
    let d = dataset(Prior::LmC, 10);
    let m = ModelInstance::new(Prior::LmC, Arc::clone(&d)).unwrap();
    let beta = [0.4, -1.0, 2.0];
    let s2 = 3.0;
    let mut x = beta.to_vec();
    x.push(s2);
    let theta = ParamVec::from_constrained(Arc::clone(m.layout()), &x).unwrap();
    let ConditionalSpec::ClosedForm(ig) = m.full_conditional("sigma2", &theta).unwrap() else { panic!() };
    let rss: f64 = (0..d.n())
        .map(|i| {
            let eta: f64 = (0..3).map(|j| d.x[(i, j)] * beta[j]).sum();
            (d.y[i] - eta).powi(2)
        })
        .sum();
    let bb: f64 = beta.iter().map(|b| b * b).sum();
    match ig.kind() {
        DistKind::InverseGamma { shape, scale } => {
            assert!((shape - 0.5 * (1e-4 + (d.n() + 3) as f64)).abs() < 1e-12);
            assert!((scale - 0.5 * (1e-4 + rss + bb)).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
    let ConditionalSpec::ClosedForm(mvn) = m.full_conditional("beta", &theta).unwrap() else { panic!() };
    let post = m.closed_form_posterior().unwrap();
    match mvn.kind() {
        DistKind::MvGaussian { mean, cov } => {
            for j in 0..3 {
                assert!((mean[j] - post.mean[j]).abs() < 1e-10);
                for k in 0..3 {
                    assert!((cov[j][k] - s2 * post.v_n[(j, k)]).abs() < 1e-10);
                }
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn generic_conditionals_track_the_joint() {
    let mut rng = rng_from_seed(13);
    for prior in [Prior::LrN, Prior::LmL, Prior::AftNi, Prior::LmWi] {
        let m = ModelInstance::new(prior, dataset(prior, 14)).unwrap();
        let u = random_point(&m, &mut rng);
        let theta = m.param_vec(u.clone()).unwrap();
        for b in m.gibbs_blocks() {
            let ConditionalSpec::Generic(mut f) = m.full_conditional(&b.name, &theta).unwrap() else { continue };
            let c = b.coords.start;
            let (a, bb) = (u[c] - 0.3, u[c] + 0.2);
            let (mut ua, mut ub) = (u.clone(), u.clone());
            ua[c] = a;
            ub[c] = bb;
            let joint = m.evaluate(&ua, None).total() - m.evaluate(&ub, None).total();
            assert!((f(a) - f(bb) - joint).abs() < 1e-9, "{prior} block {}", b.name);
        }
    }
    let lr = ModelInstance::new(Prior::LrN, dataset(Prior::LrN, 1)).unwrap();
    let theta = lr.param_vec(lr.initial_point()).unwrap();
    assert!(matches!(lr.full_conditional("beta[1]", &theta).unwrap(), ConditionalSpec::Generic(_)));
}

#[test]
fn latent_label_conditional_enumerates_components() {
    let d = dataset(Prior::Mm, 15);
    let m = ModelInstance::builder(Prior::Mm, Arc::clone(&d))
        .parameterization(Parameterization::Latent)
        .build()
        .unwrap();
    let z = vec![0.0; d.n()];
    let theta = mixture_theta(&m, &[-1.0, 2.0], &[1.0, 0.5], &[0.4, 0.6], 1.0, &z);
    let ConditionalSpec::ClosedForm(cat) = m.full_conditional("z[3]", &theta).unwrap() else { panic!() };
    let DistKind::Categorical { probs } = cat.kind() else { panic!() };
    let y = d.y[2];
    let w: Vec<f64> = [(0.4, -1.0, 1.0), (0.6, 2.0, 0.5)]
        .iter()
        .map(|(p, mu, s2)| p * logpdf::normal(y, *mu, *s2).exp())
        .collect();
    let tot: f64 = w.iter().sum();
    for k in 0..2 {
        assert!((probs[k] - w[k] / tot).abs() < 1e-12);
    }
    // Joint-density ratio between the two label values agrees.
    let mut z1 = z.clone();
    z1[2] = 1.0;
    let t1 = mixture_theta(&m, &[-1.0, 2.0], &[1.0, 0.5], &[0.4, 0.6], 1.0, &z1);
    let ratio = m.log_posterior(&t1).unwrap() - m.log_posterior(&theta).unwrap();
    assert!((ratio - (probs[1] / probs[0]).ln()).abs() < 1e-10);
}

fn one_draw_chain(m: &ModelInstance, row: Vec<f64>, copies: usize) -> Chain {
    let mut samples = Vec::new();
    for _ in 0..copies {
        samples.extend_from_slice(&row);
    }
    Chain::new(m.layout().monitored_names(), samples, Backend::Gibbs, 0, (3, 1, 2), 1.0, ChainStats::default())
}

#[test]
fn predictive_density_examples() {
    let m = ModelInstance::builder(Prior::Mm, dataset(Prior::Mm, 16)).components(2).build().unwrap();
    let row = vec![-1.0, 2.0, 0.5, 1.5, 0.3, 0.7, 1.0];
    let truth = MixtureTruth { weights: vec![0.3, 0.7], means: vec![-1.0, 2.0], sds: vec![0.5f64.sqrt(), 1.5f64.sqrt()] };
    let one = one_draw_chain(&m, row.clone(), 1);
    for y in [-2.0, 0.0, 1.3] {
        assert!((m.predictive_density(&one, y).unwrap() - truth.density(y)).abs() < 1e-14);
        let many = one_draw_chain(&m, row.clone(), 5);
        assert!((m.predictive_density(&many, y).unwrap() - m.predictive_density(&one, y).unwrap()).abs() < 1e-14);
    }
    let grid: Vec<f64> = (0..=4000).map(|i| -20.0 + 0.01 * i as f64).collect();
    let q = m.predictive_density_grid(&one, &grid).unwrap();
    let mass = crate::diagnostics::simpson(&q[..4001], 0.01);
    assert!((mass - 1.0).abs() < 1e-3);
    let empty = one_draw_chain(&m, row, 0);
    assert!(m.predictive_density(&empty, 0.0).is_err());
}

#[test]
fn observed_log_lik_matches_pointwise() {
    let mut rng = rng_from_seed(17);
    for prior in Prior::ALL {
        let m = ModelInstance::new(prior, dataset(prior, 18)).unwrap();
        let theta = m.param_vec(random_point(&m, &mut rng)).unwrap();
        let a = m.pointwise_log_lik(&theta).unwrap();
        let b = m.observed_log_lik(&m.layout().monitored_values(&theta.values)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{prior}");
        }
    }
}

#[test]
fn initial_points_are_finite() {
    for prior in Prior::ALL {
        let m = ModelInstance::new(prior, dataset(prior, 19)).unwrap();
        let theta = m.param_vec(m.initial_point()).unwrap();
        assert!(m.log_posterior(&theta).unwrap().is_finite(), "{prior}");
    }
    let lat = ModelInstance::builder(Prior::Mm, dataset(Prior::Mm, 19))
        .parameterization(Parameterization::Latent)
        .build()
        .unwrap();
    assert!(lat.log_posterior(&lat.param_vec(lat.initial_point()).unwrap()).unwrap().is_finite());
}

#[test]
fn construction_errors() {
    let lm = dataset(Prior::LmC, 1);
    assert!(ModelInstance::builder(Prior::LmC, Arc::clone(&lm)).hyper("eta0", -1.0).build().is_err());
    assert!(ModelInstance::new(Prior::LrN, Arc::clone(&lm)).is_err());
    assert!(ModelInstance::new(Prior::AftNh, lm).is_err());
    assert!(ModelInstance::builder(Prior::Mm, dataset(Prior::Mm, 1)).components(1).build().is_err());
}
