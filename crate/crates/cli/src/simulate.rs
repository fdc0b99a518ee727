//! Synthetic episodes drawn from the configured mechanism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tlc_core::estimator::Episode;
use tlc_core::floor::{apply_equity_floor, parallel_cutoffs, EquityFloor};
use tlc_core::mechanism::{cutoffs, tlc_policy_linear};

use crate::config::Resolved;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    pub n: usize,
    pub seed: u64,
    pub noise: f64,
    pub override_shift: f64,
    pub screening_beta: Option<f64>,
}

/// Upper cutoff of the schedule actually paid, including a parallel floor.
pub fn effective_theta_hi(resolved: &Resolved) -> Result<f64> {
    let p = &resolved.params;
    Ok(match &resolved.config.floor {
        Some(EquityFloor::Parallel { offset }) if *offset > 0.0 => parallel_cutoffs(p, *offset)?.theta_hi,
        _ => cutoffs(p)?.theta_hi,
    })
}

/// Payout at `theta` before noise and overrides.
pub fn scheduled_payout(resolved: &Resolved, theta: f64, screening_beta: Option<f64>) -> Result<f64> {
    let p = &resolved.params;
    let b = match &resolved.config.floor {
        Some(floor) => apply_equity_floor(theta, floor, p)?.b,
        None => tlc_policy_linear(theta, p)?,
    };
    Ok(match screening_beta {
        Some(beta) => beta.min(b),
        None => b,
    })
}

/// Draws `n` episodes. Each row consumes one shock draw and one standard
/// normal draw in that order, so the shock sequence does not depend on the
/// noise level.
pub fn simulate(resolved: &Resolved, opts: &SimulateOptions) -> Result<Vec<Episode>> {
    if opts.n == 0 {
        return Err(CliError::Validation("simulate: n must be at least 1".into()));
    }
    if !(opts.noise >= 0.0 && opts.noise.is_finite()) {
        return Err(CliError::Validation(format!(
            "simulate: noise sigma = {} must be finite and non-negative",
            opts.noise
        )));
    }
    if !opts.override_shift.is_finite() {
        return Err(CliError::Validation("simulate: override shift must be finite".into()));
    }
    let theta_hi = effective_theta_hi(resolved)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(opts.n);
    for _ in 0..opts.n {
        let theta = resolved.distribution.sample(&mut rng).min(resolved.params.theta_bar);
        let z: f64 = StandardNormal.sample(&mut rng);
        let mut b = scheduled_payout(resolved, theta, opts.screening_beta)?;
        if theta > theta_hi {
            b += opts.override_shift;
        }
        b = (b + opts.noise * z).max(0.0);
        out.push(Episode::new(theta, b));
    }
    Ok(out)
}
