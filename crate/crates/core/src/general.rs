//! Optimal bailout for a general concave benefit, solved through the KKT
//! system of the box-constrained problem.
//!
//! With marginal benefit `G(b, theta)` the stationarity condition is
//! `G(b, theta) - omega_t - c b - mu + nu = 0` with `mu >= 0` on `b >= 0` and
//! `nu >= 0` on `b <= b_bar`. Because `G` is non-increasing in `b`, the
//! residual `h(b) = G(b, theta) - omega_t - c b` is strictly decreasing, so
//! exactly one of three branches applies: zero, cap, or a unique interior root.

use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;

/// Absolute tolerance on `b` for the interior bisection.
pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;

/// Marginal benefit `G(b, theta) = dB/db`.
pub trait MarginalBenefit {
    fn marginal(&self, b: f64, theta: f64) -> f64;

    /// Declares `G` non-increasing in `b` (weak concavity of the benefit).
    fn concave_in_b(&self) -> bool {
        true
    }

    /// Declares `G` non-decreasing in `theta` (single crossing).
    fn increasing_in_theta(&self) -> bool {
        true
    }
}

/// Linear benefit `omega_b * theta * b`, whose marginal benefit ignores `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBenefit {
    pub omega_b: f64,
}

impl MarginalBenefit for LinearBenefit {
    fn marginal(&self, _b: f64, theta: f64) -> f64 {
        self.omega_b * theta
    }
}

/// Marginal benefit given by a closure, with explicitly declared shape.
pub struct BenefitFn<F> {
    g: F,
    concave: bool,
    increasing: bool,
}

impl<F: Fn(f64, f64) -> f64> BenefitFn<F> {
    /// A closure declared concave in `b` and single-crossing in `theta`.
    pub fn new(g: F) -> Self {
        Self {
            g,
            concave: true,
            increasing: true,
        }
    }

    pub fn with_declarations(g: F, concave: bool, increasing: bool) -> Self {
        Self {
            g,
            concave,
            increasing,
        }
    }
}

impl<F: Fn(f64, f64) -> f64> MarginalBenefit for BenefitFn<F> {
    fn marginal(&self, b: f64, theta: f64) -> f64 {
        (self.g)(b, theta)
    }

    fn concave_in_b(&self) -> bool {
        self.concave
    }

    fn increasing_in_theta(&self) -> bool {
        self.increasing
    }
}

/// Checks the declared shape of `g` on an `n x n` grid over
/// `[0, b_max] x [0, theta_max]`, and that `G(0, theta)` is finite.
pub fn verify_benefit<G: MarginalBenefit + ?Sized>(g: &G, b_max: f64, theta_max: f64, n: usize) -> Result<()> {
    let n = n.max(2);
    let at = |i: usize, hi: f64| hi * i as f64 / (n - 1) as f64;
    for j in 0..n {
        let theta = at(j, theta_max);
        let mut prev = g.marginal(0.0, theta);
        if !prev.is_finite() {
            return Err(Error::InvalidBenefit(format!("G(0, {theta}) is not finite")));
        }
        for i in 1..n {
            let cur = g.marginal(at(i, b_max), theta);
            if g.concave_in_b() && cur > prev {
                return Err(Error::InvalidBenefit(format!(
                    "G increases in b at theta = {theta} despite declared concavity"
                )));
            }
            prev = cur;
        }
    }
    if g.increasing_in_theta() {
        for i in 0..n {
            let b = at(i, b_max);
            let mut prev = g.marginal(b, 0.0);
            for j in 1..n {
                let cur = g.marginal(b, at(j, theta_max));
                if cur < prev {
                    return Err(Error::InvalidBenefit(format!(
                        "G decreases in theta at b = {b} despite declared single crossing"
                    )));
                }
                prev = cur;
            }
        }
    }
    Ok(())
}

/// Which KKT branch produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktBranch {
    /// Shock below the admissibility threshold, or a zero cap.
    Inadmissible,
    /// `G(0, theta) <= omega_t`: the lower bound binds.
    Zero,
    /// Unique interior root of the first-order condition.
    Interior,
    /// `G(b_bar, theta) >= omega_t + c b_bar`: the cap binds.
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktSolution {
    pub b: f64,
    pub branch: KktBranch,
    /// `G(b, theta) - omega_t - c b` at the returned point. Equals `-mu` on the
    /// zero branch and `nu` on the cap branch.
    pub foc_residual: f64,
    pub iterations: usize,
}

fn finite(v: f64, b: f64, theta: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericalInconsistency(format!(
            "marginal benefit not finite at b = {b}, theta = {theta}"
        )))
    }
}

/// Solves the box-constrained problem for a general marginal benefit.
pub fn solve_kkt<G: MarginalBenefit + ?Sized>(
    theta: f64,
    g: &G,
    params: &MechanismParams,
) -> Result<KktSolution> {
    params.validate()?;
    if !(0.0..=params.theta_bar).contains(&theta) {
        return Err(Error::OutOfDomain {
            what: "theta",
            value: theta,
            lo: 0.0,
            hi: params.theta_bar,
        });
    }
    if !g.concave_in_b() {
        return Err(Error::InvalidBenefit(
            "solver requires G declared non-increasing in b".into(),
        ));
    }
    let residual = |b: f64| -> Result<f64> {
        Ok(finite(g.marginal(b, theta), b, theta)? - params.omega_t - params.c * b)
    };

    if theta < params.threshold || params.b_bar == 0.0 {
        return Ok(KktSolution {
            b: 0.0,
            branch: KktBranch::Inadmissible,
            foc_residual: residual(0.0)?,
            iterations: 0,
        });
    }

    let h0 = residual(0.0)?;
    if h0 <= 0.0 {
        return Ok(KktSolution {
            b: 0.0,
            branch: KktBranch::Zero,
            foc_residual: h0,
            iterations: 0,
        });
    }

    let (mut hi, mut h_hi) = if params.is_cap_unbounded() {
        // Expand until the residual turns negative; it falls at rate >= c.
        let mut hi = 1.0_f64;
        let mut h = residual(hi)?;
        while h > 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NumericalInconsistency(
                    "no finite upper bracket for an unbounded cap".into(),
                ));
            }
            h = residual(hi)?;
        }
        (hi, h)
    } else {
        let h = residual(params.b_bar)?;
        if h >= 0.0 {
            return Ok(KktSolution {
                b: params.b_bar,
                branch: KktBranch::Cap,
                foc_residual: h,
                iterations: 0,
            });
        }
        (params.b_bar, h)
    };

    let (mut lo, mut h_lo) = (0.0_f64, h0);
    let mut iterations = 0;
    while hi - lo > BISECTION_TOL {
        if iterations == BISECTION_MAX_ITER {
            return Err(Error::NumericalInconsistency(format!(
                "bisection did not reach tolerance in {BISECTION_MAX_ITER} iterations"
            )));
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let h = residual(mid)?;
        if h > h_lo || h < h_hi {
            return Err(Error::NumericalInconsistency(format!(
                "first-order residual not monotone in b near {mid}; G violates declared concavity"
            )));
        }
        if h > 0.0 {
            lo = mid;
            h_lo = h;
        } else {
            hi = mid;
            h_hi = h;
        }
    }
    let b = 0.5 * (lo + hi);
    Ok(KktSolution {
        b,
        branch: KktBranch::Interior,
        foc_residual: residual(b)?,
        iterations,
    })
}

/// Optimal bailout under a general concave benefit.
pub fn tlc_policy_general<G: MarginalBenefit + ?Sized>(
    theta: f64,
    g: &G,
    params: &MechanismParams,
) -> Result<f64> {
    solve_kkt(theta, g, params).map(|s| s.b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::tlc_policy_linear;

    fn params(omega_t: f64, c: f64, b_bar: f64, t: f64) -> MechanismParams {
        MechanismParams::new(1.0, c, omega_t, t, b_bar, 5.0).unwrap()
    }

    fn grid_argmax(u: impl Fn(f64) -> f64, b_max: f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| b_max * i as f64 / n as f64)
            .max_by(|a, b| u(*a).total_cmp(&u(*b)))
            .unwrap()
    }

    #[test]
    fn interior_root_of_reciprocal_benefit() {
        // G = theta / (1 + b), omega_t = 0, c = 1: root of b^2 + b - theta = 0.
        let g = BenefitFn::new(|b: f64, theta: f64| theta / (1.0 + b));
        let s = solve_kkt(2.0, &g, &params(0.0, 1.0, 10.0, 0.0)).unwrap();
        assert_eq!(s.branch, KktBranch::Interior);
        assert!((s.b - 1.0).abs() < 1e-9);
        // Benefit theta * ln(1 + b) has this G; check against grid search.
        let u = |b: f64| 2.0 * (1.0 + b).ln() - 0.5 * b * b;
        assert!((grid_argmax(u, 10.0, 1_000_000) - s.b).abs() < 2e-5);
    }

    #[test]
    fn cap_branch() {
        let g = BenefitFn::new(|b: f64, theta: f64| theta / (1.0 + b));
        let s = solve_kkt(2.0, &g, &params(0.0, 1.0, 0.5, 0.0)).unwrap();
        assert_eq!(s.branch, KktBranch::Cap);
        assert_eq!(s.b, 0.5);
        assert!(s.foc_residual > 0.0);
        let u = |b: f64| 2.0 * (1.0 + b).ln() - 0.5 * b * b;
        assert!((grid_argmax(u, 0.5, 100_000) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_and_inadmissible_branches() {
        let g = BenefitFn::new(|b: f64, theta: f64| theta / (1.0 + b));
        let s = solve_kkt(0.5, &g, &params(0.6, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!((s.b, s.branch), (0.0, KktBranch::Zero));
        let s = solve_kkt(0.5, &g, &params(0.0, 1.0, 1.0, 0.7)).unwrap();
        assert_eq!((s.b, s.branch), (0.0, KktBranch::Inadmissible));
    }

    #[test]
    fn unbounded_cap_expands_bracket() {
        let g = BenefitFn::new(|b: f64, theta: f64| theta / (1.0 + b));
        let b = tlc_policy_general(5.0, &g, &params(0.0, 0.01, f64::INFINITY, 0.0)).unwrap();
        // b^2 + b - 500 = 0
        let exact = (-1.0 + (1.0f64 + 2000.0).sqrt()) / 2.0;
        assert!((b - exact).abs() < 1e-8);
    }

    #[test]
    fn linear_benefit_matches_closed_form() {
        for &(omega_t, c, b_bar, t) in &[(0.3, 2.0, 0.7, 0.1), (0.0, 1.0, 10.0, 0.5), (1.0, 0.5, 0.2, 0.0)] {
            let p = MechanismParams::new(1.7, c, omega_t, t, b_bar, 5.0).unwrap();
            let g = LinearBenefit { omega_b: 1.7 };
            for i in 0..=500 {
                let theta = 5.0 * i as f64 / 500.0;
                let gen = tlc_policy_general(theta, &g, &p).unwrap();
                let lin = tlc_policy_linear(theta, &p).unwrap();
                assert!((gen - lin).abs() < 1e-9, "theta={theta}: {gen} vs {lin}");
            }
        }
    }

    #[test]
    fn increasing_marginal_benefit_is_flagged() {
        let g = BenefitFn::new(|b: f64, theta: f64| theta + 4.0 * (5.0 * b).sin());
        let err = solve_kkt(1.0, &g, &params(0.0, 1.0, 10.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NumericalInconsistency(_)));
        assert!(verify_benefit(&g, 2.0, 1.0, 20).is_err());
    }

    #[test]
    fn undeclared_concavity_rejected() {
        let g = BenefitFn::with_declarations(|_b: f64, theta: f64| theta, false, true);
        assert!(matches!(
            solve_kkt(1.0, &g, &params(0.0, 1.0, 1.0, 0.0)),
            Err(Error::InvalidBenefit(_))
        ));
    }

    #[test]
    fn verify_accepts_well_shaped_benefits() {
        let g = BenefitFn::new(|b: f64, theta: f64| theta / (1.0 + b));
        verify_benefit(&g, 5.0, 5.0, 40).unwrap();
        verify_benefit(&LinearBenefit { omega_b: 2.0 }, 5.0, 5.0, 40).unwrap();
        let bad = BenefitFn::new(|b: f64, theta: f64| (1.0 - theta) / (1.0 + b));
        assert!(verify_benefit(&bad, 1.0, 1.0, 10).is_err());
    }
}
