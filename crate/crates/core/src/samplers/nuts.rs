use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_start, ChainStats, Recorder, SamplerConfig, Target};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::samplers::Chain;

/// Energy error beyond which a transition is flagged divergent.
const MAX_DELTA_H: f64 = 1000.0;

/// Result of one leapfrog step.
#[derive(Debug, Clone, PartialEq)]
pub struct Leapfrog {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Set when a gradient evaluation was not finite.
    pub divergent: bool,
}

/// One leapfrog step (half kick, drift, half kick) for a unit mass matrix.
///
/// `grad` writes the gradient of the log density at its first argument.
pub fn leapfrog<G>(grad: &mut G, q: &[f64], p: &[f64], eps: f64) -> Leapfrog
where
    G: FnMut(&[f64], &mut [f64]) + ?Sized,
{
    let d = q.len();
    let mut g = vec![0.0; d];
    grad(q, &mut g);
    let mut divergent = !g.iter().all(|v| v.is_finite());
    let mut p1: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi + 0.5 * eps * gi).collect();
    let q1: Vec<f64> = q.iter().zip(&p1).map(|(qi, pi)| qi + eps * pi).collect();
    grad(&q1, &mut g);
    divergent |= !g.iter().all(|v| v.is_finite());
    for (pi, gi) in p1.iter_mut().zip(&g) {
        *pi += 0.5 * eps * gi;
    }
    Leapfrog { q: q1, p: p1, divergent }
}

#[derive(Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

impl Point {
    fn hamiltonian(&self) -> f64 {
        let h = -self.lp + 0.5 * dot(&self.p, &self.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }
}

struct Subtree {
    end: Point,
    proposal: Point,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    rho: Vec<f64>,
    log_weight: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// No-U-turn criterion for a trajectory with end momenta `a`, `b` and summed momentum `rho`.
fn no_u_turn(a: &[f64], b: &[f64], rho: &[f64]) -> bool {
    dot(a, rho) > 0.0 && dot(b, rho) > 0.0
}

struct Integrator<'a, T: Target + ?Sized> {
    target: &'a T,
    eps: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_accept: f64,
    divergent: bool,
    error: Option<Error>,
}

impl<T: Target + ?Sized> Integrator<'_, T> {
    fn step(&mut self, z: &Point, eps: f64) -> Option<Point> {
        let mut p: Vec<f64> = z.p.iter().zip(&z.grad).map(|(pi, gi)| pi + 0.5 * eps * gi).collect();
        let q: Vec<f64> = z.q.iter().zip(&p).map(|(qi, pi)| qi + eps * pi).collect();
        let mut grad = vec![0.0; q.len()];
        let lp = match self.target.log_density_grad(&q, &mut grad) {
            Ok(v) => v,
            Err(e) => {
                self.error = Some(e);
                return None;
            }
        };
        if !grad.iter().all(|v| v.is_finite()) {
            return Some(Point { q, p, grad, lp: f64::NEG_INFINITY });
        }
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * eps * gi;
        }
        Some(Point { q, p, grad, lp })
    }

    /// Build a subtree of `2^depth` leapfrog steps from `z` in direction `dir`.
    /// `None` when the subtree diverges or turns back on itself.
    fn build<R: Rng + ?Sized>(&mut self, z: &Point, depth: usize, dir: f64, rng: &mut R) -> Option<Subtree> {
        if depth == 0 {
            let z1 = self.step(z, dir * self.eps)?;
            self.n_leapfrog += 1;
            let log_w = self.h0 - z1.hamiltonian();
            self.sum_accept += if log_w > 0.0 { 1.0 } else { log_w.exp() };
            if -log_w > MAX_DELTA_H || !log_w.is_finite() {
                self.divergent = true;
                return None;
            }
            return Some(Subtree {
                p_beg: z1.p.clone(),
                p_end: z1.p.clone(),
                rho: z1.p.clone(),
                log_weight: log_w,
                proposal: z1.clone(),
                end: z1,
            });
        }
        let left = self.build(z, depth - 1, dir, rng)?;
        let right = self.build(&left.end, depth - 1, dir, rng)?;
        let log_weight = log_add(left.log_weight, right.log_weight);
        let rho = add(&left.rho, &right.rho);
        let persist = no_u_turn(&left.p_beg, &right.p_end, &rho)
            && no_u_turn(&left.p_beg, &right.p_beg, &add(&left.rho, &right.p_beg))
            && no_u_turn(&left.p_end, &right.p_end, &add(&right.rho, &left.p_end));
        if !persist {
            return None;
        }
        let take_right = rng.random::<f64>() < (right.log_weight - log_weight).exp();
        let proposal = if take_right { right.proposal } else { left.proposal };
        Some(Subtree { end: right.end, proposal, p_beg: left.p_beg, p_end: right.p_end, rho, log_weight })
    }
}

struct Transition {
    point: Point,
    accept_stat: f64,
    depth: usize,
    divergent: bool,
}

fn transition<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    z0: &Point,
    eps: f64,
    max_depth: usize,
    rng: &mut R,
) -> Result<Transition> {
    let mut z0 = z0.clone();
    for v in &mut z0.p {
        *v = rng.sample(StandardNormal);
    }
    let mut it = Integrator {
        target,
        eps,
        h0: z0.hamiltonian(),
        n_leapfrog: 0,
        sum_accept: 0.0,
        divergent: false,
        error: None,
    };
    let mut fwd = z0.clone();
    let mut bck = z0.clone();
    let (mut p_fwd, mut p_bck) = (z0.p.clone(), z0.p.clone());
    let mut rho = z0.p.clone();
    let mut sample = z0.clone();
    let mut log_weight = 0.0;
    let mut depth = 0;
    while depth < max_depth {
        let forward = rng.random::<bool>();
        let sub = if forward { it.build(&fwd, depth, 1.0, rng) } else { it.build(&bck, depth, -1.0, rng) };
        if let Some(e) = it.error.take() {
            return Err(e);
        }
        depth += 1;
        let Some(sub) = sub else { break };

        // Biased progressive sampling favours the new subtree.
        if sub.log_weight > log_weight || rng.random::<f64>() < (sub.log_weight - log_weight).exp() {
            sample = sub.proposal.clone();
        }
        log_weight = log_add(log_weight, sub.log_weight);

        let rho_new = add(&rho, &sub.rho);
        let persist = if forward {
            let ok = no_u_turn(&p_bck, &sub.p_end, &rho_new)
                && no_u_turn(&p_bck, &sub.p_beg, &add(&rho, &sub.p_beg))
                && no_u_turn(&p_fwd, &sub.p_end, &add(&sub.rho, &p_fwd));
            fwd = sub.end;
            p_fwd = sub.p_end;
            ok
        } else {
            let ok = no_u_turn(&sub.p_end, &p_fwd, &rho_new)
                && no_u_turn(&sub.p_end, &p_bck, &add(&sub.rho, &p_bck))
                && no_u_turn(&sub.p_beg, &p_fwd, &add(&rho, &sub.p_beg));
            bck = sub.end;
            p_bck = sub.p_end;
            ok
        };
        rho = rho_new;
        if !persist {
            break;
        }
    }
    Ok(Transition {
        point: sample,
        accept_stat: it.sum_accept / it.n_leapfrog.max(1) as f64,
        depth,
        divergent: it.divergent,
    })
}

/// Step size for which one leapfrog step has acceptance near one half.
fn initial_step_size<T: Target + ?Sized, R: Rng + ?Sized>(target: &T, z: &Point, rng: &mut R) -> f64 {
    let mut z = z.clone();
    for v in &mut z.p {
        *v = rng.sample(StandardNormal);
    }
    let mut it = Integrator { target, eps: 1.0, h0: z.hamiltonian(), n_leapfrog: 0, sum_accept: 0.0, divergent: false, error: None };
    let log_ratio = |it: &mut Integrator<'_, T>, eps: f64| -> f64 {
        match it.step(&z, eps) {
            Some(z1) => {
                let v = it.h0 - z1.hamiltonian();
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }
            None => f64::NEG_INFINITY,
        }
    };
    let mut eps = 1.0;
    let direction = if log_ratio(&mut it, eps) > 0.5f64.ln() { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let lr = log_ratio(&mut it, eps);
        if direction * lr <= -direction * 2f64.ln() {
            break;
        }
        eps *= 2f64.powf(direction);
    }
    eps.clamp(1e-10, 1e3)
}

/// Dual-averaging step-size adaptation.
struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps_bar: f64,
    m: usize,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, target: f64) -> Self {
        Self { mu: (10.0 * eps0).ln(), target, h_bar: 0.0, log_eps_bar: 0.0, m: 0 }
    }

    /// Feed one acceptance statistic; returns the next step size.
    fn update(&mut self, accept: f64) -> f64 {
        self.m += 1;
        let m = self.m as f64;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        let log_eps = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_step_size(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// No-U-turn sampler with multinomial trajectory sampling, unit mass matrix
/// and dual-averaging step-size adaptation during burn-in.
pub fn run_nuts<T: Target + ?Sized>(target: &T, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<Chain> {
    cfg.validate()?;
    let q = target.initial_point();
    check_start(target, &q)?;
    let mut grad = vec![0.0; q.len()];
    let lp = target.log_density_grad(&q, &mut grad)?;
    let mut z = Point { p: vec![0.0; q.len()], q, grad, lp };

    let mut eps = initial_step_size(target, &z, rng);
    let mut da = DualAveraging::new(eps, cfg.adaptation.nuts_target_accept);
    let max_depth = cfg.adaptation.nuts_max_tree_depth.max(1);
    let mut rec = Recorder::new(cfg, target.monitored_names().len());
    let mut stats = ChainStats::default();
    let (mut depth_sum, mut accept_sum) = (0usize, 0.0);

    let clock = Instant::now();
    for t in 1..=cfg.n_iter {
        let tr = transition(target, &z, eps, max_depth, rng)?;
        z = tr.point;
        if t <= cfg.n_burn {
            eps = da.update(tr.accept_stat);
            if t == cfg.n_burn {
                eps = da.final_step_size();
            }
        } else {
            depth_sum += tr.depth;
            accept_sum += tr.accept_stat;
            stats.divergences += tr.divergent as usize;
            stats.max_depth_hits += (tr.depth >= max_depth) as usize;
        }
        rec.offer(t, target, &z.q);
    }
    let t_s = clock.elapsed().as_secs_f64();
    let kept = (cfg.n_iter - cfg.n_burn) as f64;
    stats.mean_tree_depth = Some(depth_sum as f64 / kept);
    stats.mean_accept_stat = Some(accept_sum / kept);
    stats.step_size = Some(eps);
    Ok(rec.finish(target, t_s, stats))
}
