use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_start, ChainStats, Recorder, RwBlock, SamplerConfig, Target};
use crate::error::{Error, Result};
use crate::model::ConditionalSpec;
use crate::rng::SimRng;
use crate::samplers::Chain;

const MIN_SCALE: f64 = 1e-8;

struct WalkState {
    name: String,
    start: usize,
    len: usize,
    log_scale: f64,
    target_accept: f64,
    /// Updates made so far, for the Robbins-Monro gain.
    updates: usize,
    accepted_after_burn: usize,
    tried_after_burn: usize,
}

/// Per-block Gaussian random-walk Metropolis-Hastings.
///
/// Proposal scales follow a Robbins-Monro recursion on the log scale during
/// burn-in and are frozen afterwards.
pub fn run_rwmh<T: Target + ?Sized>(target: &T, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<Chain> {
    cfg.validate()?;
    let mut u = target.initial_point();
    let mut lp = check_start(target, &u)?;
    let blocks = target.rw_blocks();
    let mut walks = Vec::new();
    for b in &blocks {
        if let RwBlock::Walk { name, coords } = b {
            let len = coords.len();
            let target_accept =
                if len == 1 { cfg.adaptation.rwmh_target_accept_scalar } else { cfg.adaptation.rwmh_target_accept_block };
            walks.push(WalkState {
                name: name.clone(),
                start: coords.start,
                len,
                log_scale: (0.1 * 2.38 / (len as f64).sqrt()).ln(),
                target_accept,
                updates: 0,
                accepted_after_burn: 0,
                tried_after_burn: 0,
            });
        }
    }
    let mut rec = Recorder::new(cfg, target.monitored_names().len());
    let mut proposal = u.clone();
    let clock = Instant::now();
    for t in 1..=cfg.n_iter {
        let adapting = t <= cfg.n_burn;
        let mut wi = 0;
        let mut stale = false;
        for b in &blocks {
            match b {
                RwBlock::Exact(gb) => {
                    match target.conditional(gb, &u)? {
                        ConditionalSpec::ClosedForm(d) => {
                            let x = d.sample(rng);
                            let mut out = Vec::with_capacity(gb.coords.len());
                            gb.transform.inverse(&x, &mut out)?;
                            u[gb.coords.clone()].copy_from_slice(&out);
                        }
                        ConditionalSpec::Generic(_) => {
                            return Err(Error::Unsupported(format!("block `{}` has no exact conditional", gb.name)))
                        }
                    }
                    stale = true;
                }
                RwBlock::Walk { .. } => {
                    if stale {
                        lp = target.log_density(&u);
                        stale = false;
                    }
                    let w = &mut walks[wi];
                    wi += 1;
                    let scale = w.log_scale.exp().max(MIN_SCALE);
                    proposal.copy_from_slice(&u);
                    for c in w.start..w.start + w.len {
                        proposal[c] += scale * rng.sample::<f64, _>(StandardNormal);
                    }
                    let lp_new = target.log_density(&proposal);
                    let log_alpha = lp_new - lp;
                    let alpha = if log_alpha.is_nan() { 0.0 } else { log_alpha.min(0.0).exp() };
                    let accept = rng.random::<f64>() < alpha;
                    if accept {
                        u[w.start..w.start + w.len].copy_from_slice(&proposal[w.start..w.start + w.len]);
                        lp = lp_new;
                    }
                    if adapting {
                        w.updates += 1;
                        let gain = (w.updates as f64).powf(-0.6);
                        w.log_scale = (w.log_scale + gain * (alpha - w.target_accept)).max(MIN_SCALE.ln());
                    } else {
                        w.tried_after_burn += 1;
                        w.accepted_after_burn += accept as usize;
                    }
                }
            }
        }
        rec.offer(t, target, &u);
    }
    let t_s = clock.elapsed().as_secs_f64();
    let mut stats = ChainStats::default();
    for w in &walks {
        let rate = w.accepted_after_burn as f64 / w.tried_after_burn.max(1) as f64;
        stats.acceptance.insert(w.name.clone(), rate);
        stats.proposal_scale.insert(w.name.clone(), w.log_scale.exp().max(MIN_SCALE));
    }
    Ok(rec.finish(target, t_s, stats))
}
