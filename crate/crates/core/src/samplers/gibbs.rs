use std::time::Instant;

use rand::Rng;

use super::{check_start, ChainStats, Recorder, SamplerConfig, Target};
use crate::error::{Error, Result};
use crate::model::ConditionalSpec;
use crate::rng::SimRng;
use crate::samplers::Chain;

/// Shrinkage steps before the slice is declared collapsed.
const MAX_SHRINK: usize = 200;

/// One stepping-out and shrinkage slice-sampling update of a 1-D density.
///
/// `w` is the initial bracket width and `m` bounds the number of step-out
/// expansions. Errors when `logdens(x0)` is not finite or when shrinkage
/// collapses the bracket onto `x0` without finding a point on the slice.
pub fn slice_step<F, R>(logdens: &mut F, x0: f64, w: f64, m: usize, rng: &mut R) -> Result<f64>
where
    F: FnMut(f64) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let fail = |reason: String| Error::Slice { block: String::new(), reason };
    let f0 = logdens(x0);
    if !f0.is_finite() {
        return Err(fail(format!("log density is {f0} at x0 = {x0}")));
    }
    let log_y = f0 + (1.0 - rng.random::<f64>()).ln();

    let mut l = x0 - w * rng.random::<f64>();
    let mut r = l + w;
    let mut j = (m as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = (m - 1).saturating_sub(j);
    while j > 0 && logdens(l) > log_y {
        l -= w;
        j -= 1;
    }
    while k > 0 && logdens(r) > log_y {
        r += w;
        k -= 1;
    }

    for _ in 0..MAX_SHRINK {
        let x1 = l + (r - l) * rng.random::<f64>();
        if logdens(x1) > log_y {
            return Ok(x1);
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
        if r - l <= f64::EPSILON * x0.abs().max(1.0) {
            break;
        }
    }
    Err(fail(format!("shrinkage collapsed onto x0 = {x0} without finding a point on the slice")))
}

/// Systematic-scan Gibbs sampler: closed-form blocks are drawn exactly, the
/// rest advance by one slice step per sweep.
pub fn run_gibbs<T: Target + ?Sized>(target: &T, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<Chain> {
    cfg.validate()?;
    let mut u = target.initial_point();
    check_start(target, &u)?;
    let blocks = target.gibbs_blocks();
    let (w, m) = (cfg.adaptation.slice_width, cfg.adaptation.slice_max_doublings.max(1));
    let mut rec = Recorder::new(cfg, target.monitored_names().len());
    let mut buf = Vec::new();
    let clock = Instant::now();
    for t in 1..=cfg.n_iter {
        for b in &blocks {
            match target.conditional(b, &u)? {
                ConditionalSpec::ClosedForm(d) => {
                    let x = d.sample(rng);
                    buf.clear();
                    b.transform.inverse(&x, &mut buf).map_err(|e| Error::Slice {
                        block: b.name.clone(),
                        reason: format!("conditional draw left the support: {e}"),
                    })?;
                    u[b.coords.clone()].copy_from_slice(&buf);
                }
                ConditionalSpec::Generic(mut f) => {
                    let c = b.coords.start;
                    u[c] = slice_step(&mut *f, u[c], w, m, rng).map_err(|e| match e {
                        Error::Slice { reason, .. } => Error::Slice { block: b.name.clone(), reason },
                        other => other,
                    })?;
                }
            }
        }
        rec.offer(t, target, &u);
    }
    let t_s = clock.elapsed().as_secs_f64();
    Ok(rec.finish(target, t_s, ChainStats::default()))
}
