//! Closed-form threshold-linear-cap policy under linear benefits and
//! quadratic implementation cost.
//!
//! The province maximizes `omega_b * theta * b - omega_t * b - (c / 2) * b^2`
//! over `b in [0, b_bar]`, with `b = 0` whenever `theta < threshold`. The
//! solution is the projection of `(omega_b * theta - omega_t) / c` onto the
//! box, which switches regime at the two cutoffs returned by [`cutoffs`].

use serde::{Deserialize, Serialize};

use crate::distribution::ShockDistribution;
use crate::error::{check, Error, Result};

/// One instance of the bailout problem.
///
/// `b_bar` may be `f64::INFINITY` for an unbounded consent cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Marginal benefit per unit of bailout per unit of shock.
    pub omega_b: f64,
    /// Curvature of the quadratic implementation cost.
    pub c: f64,
    /// Political shadow cost of one public dollar.
    pub omega_t: f64,
    /// Externality admissibility threshold `T`, in shock units.
    pub threshold: f64,
    /// Consent cap on any bailout.
    pub b_bar: f64,
    /// Upper bound of the shock support.
    pub theta_bar: f64,
}

impl MechanismParams {
    pub fn new(
        omega_b: f64,
        c: f64,
        omega_t: f64,
        threshold: f64,
        b_bar: f64,
        theta_bar: f64,
    ) -> Result<Self> {
        let p = Self {
            omega_b,
            c,
            omega_t,
            threshold,
            b_bar,
            theta_bar,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.omega_b.is_finite() && self.omega_b > 0.0,
            "omega_b",
            self.omega_b,
            "must be finite and positive",
        )?;
        check(self.c.is_finite() && self.c > 0.0, "c", self.c, "must be finite and positive")?;
        check(
            self.omega_t.is_finite() && self.omega_t >= 0.0,
            "omega_t",
            self.omega_t,
            "must be finite and non-negative",
        )?;
        check(
            self.theta_bar.is_finite() && self.theta_bar > 0.0,
            "theta_bar",
            self.theta_bar,
            "must be finite and positive",
        )?;
        check(
            self.threshold >= 0.0 && self.threshold <= self.theta_bar,
            "threshold",
            self.threshold,
            "must lie in [0, theta_bar]",
        )?;
        check(
            self.b_bar >= 0.0 && !self.b_bar.is_nan(),
            "b_bar",
            self.b_bar,
            "must be non-negative (infinity allowed)",
        )
    }

    /// Interior slope `omega_b / c`.
    pub fn slope(&self) -> f64 {
        self.omega_b / self.c
    }

    /// Unprojected first-order candidate `(omega_b * theta - omega_t) / c`.
    pub fn interior(&self, theta: f64) -> f64 {
        (self.omega_b * theta - self.omega_t) / self.c
    }

    pub fn is_cap_unbounded(&self) -> bool {
        self.b_bar == f64::INFINITY
    }

    pub fn with_omega_t(self, omega_t: f64) -> Self {
        Self { omega_t, ..self }
    }

    pub fn with_b_bar(self, b_bar: f64) -> Self {
        Self { b_bar, ..self }
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Self { threshold, ..self }
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if (0.0..=self.theta_bar).contains(&theta) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                what: "theta",
                value: theta,
                lo: 0.0,
                hi: self.theta_bar,
            })
        }
    }
}

/// Regime switches of the schedule: zero below `theta_lo`, linear on the
/// closed interval `[theta_lo, theta_hi]`, capped strictly above `theta_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub theta_lo: f64,
    pub theta_hi: f64,
}

/// Upper cutoff before it is constrained to lie at or above the lower one.
pub(crate) fn raw_theta_hi(p: &MechanismParams) -> f64 {
    (p.omega_t + p.c * p.b_bar) / p.omega_b
}

/// Lower and upper cutoffs of the closed-form schedule.
///
/// `theta_hi` never falls below `theta_lo`: when the admissibility threshold
/// sits above the point where the interior line reaches the cap, the schedule
/// jumps from zero straight to the cap at `theta_lo`. A zero cap collapses
/// both cutoffs onto `theta_lo`; an unbounded cap reports `theta_hi = inf`.
pub fn cutoffs(params: &MechanismParams) -> Result<Cutoffs> {
    params.validate()?;
    let theta_lo = params.threshold.max(params.omega_t / params.omega_b);
    let theta_hi = if params.b_bar == 0.0 {
        theta_lo
    } else {
        raw_theta_hi(params).max(theta_lo)
    };
    Ok(Cutoffs { theta_lo, theta_hi })
}

/// Projection of the interior candidate onto `[0, b_bar]`, zero below the
/// admissibility threshold. Assumes validated parameters and `theta` in range.
pub(crate) fn project(p: &MechanismParams, theta: f64) -> f64 {
    if theta < p.threshold || p.b_bar == 0.0 {
        return 0.0;
    }
    p.interior(theta).max(0.0).min(p.b_bar)
}

/// Optimal bailout under linear benefits.
pub fn tlc_policy_linear(theta: f64, params: &MechanismParams) -> Result<f64> {
    params.validate()?;
    params.check_theta(theta)?;
    Ok(project(params, theta))
}

/// True iff the optimal bailout is zero over the whole support: either the
/// consent cap is zero or the political cost exceeds the largest marginal
/// benefit `omega_b * theta_bar`.
pub fn knife_edge(params: &MechanismParams) -> Result<bool> {
    params.validate()?;
    Ok(params.b_bar == 0.0 || params.omega_t >= params.omega_b * params.theta_bar)
}

/// Local derivatives of the schedule and its cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparativeStatics {
    /// `d b* / d theta` on the interior segment.
    pub db_dtheta: f64,
    /// `d b* / d omega_t` on the interior segment.
    pub db_domega_t: f64,
    pub dtheta_hi_domega_t: f64,
    pub dtheta_hi_db_bar: f64,
    pub dtheta_lo_domega_t: f64,
}

pub fn comparative_statics(params: &MechanismParams) -> Result<ComparativeStatics> {
    params.validate()?;
    let p = params;
    let cost_pins_lower = p.omega_t / p.omega_b > p.threshold;
    let dtheta_lo_domega_t = if cost_pins_lower { 1.0 / p.omega_b } else { 0.0 };
    let theta_lo = p.threshold.max(p.omega_t / p.omega_b);
    // Once the upper cutoff is clamped to theta_lo it inherits theta_lo's motion.
    let (dtheta_hi_domega_t, dtheta_hi_db_bar) = if raw_theta_hi(p) < theta_lo {
        (dtheta_lo_domega_t, 0.0)
    } else {
        (1.0 / p.omega_b, p.c / p.omega_b)
    };
    Ok(ComparativeStatics {
        db_dtheta: p.omega_b / p.c,
        db_domega_t: -1.0 / p.c,
        dtheta_hi_domega_t,
        dtheta_hi_db_bar,
        dtheta_lo_domega_t,
    })
}

/// Net movement of the upper cutoff under a joint institutional shift:
/// `(d_omega_t + c * d_b_bar) / omega_b`.
pub fn delta_theta_hi(params: &MechanismParams, d_omega_t: f64, d_b_bar: f64) -> f64 {
    (d_omega_t + params.c * d_b_bar) / params.omega_b
}

/// Closed-form `d E[b*] / d T = -((omega_b T - omega_t) / c) f(T)`.
///
/// Valid only while `T` pins the lower cutoff and the cap is slack at `T`.
pub fn activation_derivative(params: &MechanismParams, dist: &ShockDistribution) -> Result<f64> {
    params.validate()?;
    let p = params;
    if p.threshold < p.omega_t / p.omega_b {
        return Err(Error::PiecewiseRegime(format!(
            "threshold {} lies below omega_t/omega_b = {}",
            p.threshold,
            p.omega_t / p.omega_b
        )));
    }
    if raw_theta_hi(p) <= p.threshold {
        return Err(Error::PiecewiseRegime(format!(
            "cap binds at the threshold (theta_hi = {} <= T = {})",
            raw_theta_hi(p),
            p.threshold
        )));
    }
    Ok(-p.interior(p.threshold) * dist.pdf(p.threshold))
}

/// `E[b*]` by composite midpoint quadrature on `n` cells over `[T, theta_bar]`.
pub fn expected_bailout(params: &MechanismParams, dist: &ShockDistribution, n: usize) -> Result<f64> {
    params.validate()?;
    let n = n.max(1);
    let lo = params.threshold;
    let hi = params.theta_bar.min(dist.theta_bar());
    if hi <= lo {
        return Ok(0.0);
    }
    let h = (hi - lo) / n as f64;
    let total: f64 = (0..n)
        .map(|i| {
            let theta = lo + (i as f64 + 0.5) * h;
            project(params, theta) * dist.pdf(theta)
        })
        .sum();
    Ok(total * h)
}

/// Probability that a bailout is paid, `1 - F(theta_lo)`.
pub fn activation_rate(params: &MechanismParams, dist: &ShockDistribution) -> Result<f64> {
    if knife_edge(params)? {
        return Ok(0.0);
    }
    Ok(dist.survivor(cutoffs(params)?.theta_lo))
}

/// Political cost that delivers a target activation rate, backed out from
/// `theta_lo = omega_t / omega_b = F^-1(1 - rate)`.
///
/// Fails when the target exceeds `1 - F(T)`, which no `omega_t` can reach.
pub fn calibrate_omega_t(target_rate: f64, params: &MechanismParams, dist: &ShockDistribution) -> Result<f64> {
    params.validate()?;
    check(
        (0.0..=1.0).contains(&target_rate),
        "target_rate",
        target_rate,
        "must lie in [0, 1]",
    )?;
    let ceiling = dist.survivor(params.threshold);
    if target_rate > ceiling {
        return Err(Error::InvalidParameter {
            name: "target_rate",
            value: target_rate,
            reason: "exceeds the activation rate allowed by the threshold",
        });
    }
    let theta_lo = dist.quantile(1.0 - target_rate).max(params.threshold);
    Ok(params.omega_b * theta_lo)
}

/// Gap between political and social shadow costs and the resulting shift of
/// both cutoffs, holding the cap fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareWedge {
    pub wedge: f64,
    pub cutoff_shift: f64,
    pub interior_slope: f64,
}

pub fn welfare_wedge_shift(params: &MechanismParams, lambda_soc: f64) -> Result<WelfareWedge> {
    params.validate()?;
    let wedge = params.omega_t - lambda_soc;
    Ok(WelfareWedge {
        wedge,
        cutoff_shift: wedge / params.omega_b,
        interior_slope: params.slope(),
    })
}

/// Screening-style payout `min(beta, b*(theta_hat))`.
pub fn screened_payout(beta: f64, theta_hat: f64, params: &MechanismParams) -> Result<f64> {
    check(beta >= 0.0, "beta", beta, "screening cap must be non-negative")?;
    Ok(beta.min(tlc_policy_linear(theta_hat, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(omega_b: f64, c: f64, omega_t: f64, t: f64, b_bar: f64) -> MechanismParams {
        MechanismParams::new(omega_b, c, omega_t, t, b_bar, 3.0).unwrap()
    }

    #[test]
    fn cutoff_examples() {
        let c = cutoffs(&p(2.0, 4.0, 1.0, 0.1, 0.5)).unwrap();
        assert_eq!((c.theta_lo, c.theta_hi), (0.5, 1.5));
        let c = cutoffs(&p(1.0, 1.0, 0.0, 0.3, 1.0)).unwrap();
        assert_eq!((c.theta_lo, c.theta_hi), (0.3, 1.0));
        let c = cutoffs(&p(1.0, 1.0, 0.5, 0.2, 0.0)).unwrap();
        assert_eq!((c.theta_lo, c.theta_hi), (0.5, 0.5));
    }

    #[test]
    fn unbounded_cap_has_infinite_upper_cutoff() {
        let params = p(1.0, 1.0, 0.2, 0.0, f64::INFINITY);
        assert!(params.is_cap_unbounded());
        assert_eq!(cutoffs(&params).unwrap().theta_hi, f64::INFINITY);
        assert!((tlc_policy_linear(3.0, &params).unwrap() - 2.8).abs() < 1e-15);
    }

    #[test]
    fn upper_cutoff_clamped_to_threshold() {
        // Interior line reaches the cap at 0.5 but nothing is paid below T = 0.9.
        let params = p(1.0, 1.0, 0.0, 0.9, 0.5);
        let c = cutoffs(&params).unwrap();
        assert_eq!((c.theta_lo, c.theta_hi), (0.9, 0.9));
        assert_eq!(tlc_policy_linear(0.89, &params).unwrap(), 0.0);
        assert_eq!(tlc_policy_linear(0.9, &params).unwrap(), 0.5);
    }

    #[test]
    fn policy_examples() {
        let params = p(2.0, 4.0, 1.0, 0.1, 0.5);
        assert_eq!(tlc_policy_linear(1.0, &params).unwrap(), 0.25);
        assert_eq!(tlc_policy_linear(0.3, &params).unwrap(), 0.0);
        assert_eq!(tlc_policy_linear(2.0, &params).unwrap(), 0.5);
    }

    #[test]
    fn cap_binding_matches_grid_search() {
        let theta = 2.0;
        let n = 50_000;
        let best = (0..=n)
            .map(|i| 0.5 * i as f64 / n as f64)
            .max_by(|a, b| {
                let u = |b: f64| 2.0 * theta * b - b - 2.0 * b * b;
                u(*a).total_cmp(&u(*b))
            })
            .unwrap();
        assert!((best - 0.5).abs() < 1e-5);
    }

    #[test]
    fn policy_rejects_out_of_support() {
        let params = p(2.0, 4.0, 1.0, 0.1, 0.5);
        assert!(matches!(
            tlc_policy_linear(-0.1, &params),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(tlc_policy_linear(3.01, &params).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MechanismParams::new(0.0, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(MechanismParams::new(1.0, -1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(MechanismParams::new(1.0, 1.0, -0.1, 0.0, 1.0, 1.0).is_err());
        assert!(MechanismParams::new(1.0, 1.0, 0.0, 1.5, 1.0, 1.0).is_err());
        assert!(MechanismParams::new(1.0, 1.0, 0.0, 0.0, -1.0, 1.0).is_err());
        assert!(MechanismParams::new(1.0, 1.0, 0.0, 0.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn knife_edge_examples() {
        let k = |omega_t, b_bar| {
            knife_edge(&MechanismParams::new(1.0, 1.0, omega_t, 0.0, b_bar, 2.0).unwrap()).unwrap()
        };
        assert!(k(3.0, 1.0));
        assert!(k(1.0, 0.0));
        assert!(!k(1.0, 1.0));
        // Cost exactly equal to the largest marginal benefit still blocks.
        assert!(k(2.0, 1.0));
    }

    #[test]
    fn comparative_statics_examples() {
        let cs = comparative_statics(&p(2.0, 4.0, 1.0, 0.1, 0.5)).unwrap();
        assert_eq!(cs.db_dtheta, 0.5);
        assert_eq!(cs.db_domega_t, -0.25);
        assert_eq!(cs.dtheta_hi_domega_t, 0.5);
        assert_eq!(cs.dtheta_hi_db_bar, 2.0);
        assert_eq!(cs.dtheta_lo_domega_t, 0.5);
        let pinned = comparative_statics(&p(1.0, 1.0, 0.1, 0.3, 1.0)).unwrap();
        assert_eq!(pinned.dtheta_lo_domega_t, 0.0);
        let d = delta_theta_hi(&p(1.0, 1.0, 0.0, 0.0, 1.0), 0.2, -0.1);
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn activation_derivative_examples() {
        let dist = ShockDistribution::uniform(1.0).unwrap();
        let params = MechanismParams::new(1.0, 1.0, 0.2, 0.4, 10.0, 1.0).unwrap();
        let d = activation_derivative(&params, &dist).unwrap();
        assert!((d + 0.2).abs() < 1e-15);
        let edge = params.with_threshold(0.2);
        assert_eq!(activation_derivative(&edge, &dist).unwrap(), 0.0);
        let below = params.with_threshold(0.1);
        assert!(matches!(
            activation_derivative(&below, &dist),
            Err(Error::PiecewiseRegime(_))
        ));
        let capped = params.with_b_bar(0.1);
        assert!(matches!(
            activation_derivative(&capped, &dist),
            Err(Error::PiecewiseRegime(_))
        ));
    }

    #[test]
    fn expected_bailout_uniform_closed_form() {
        // E[b*] = int_{0.4}^{1} (theta - 0.2) dtheta = 0.3
        let dist = ShockDistribution::uniform(1.0).unwrap();
        let params = MechanismParams::new(1.0, 1.0, 0.2, 0.4, 10.0, 1.0).unwrap();
        let e = expected_bailout(&params, &dist, 10_000).unwrap();
        assert!((e - 0.3).abs() < 1e-9);
    }

    #[test]
    fn calibration_round_trip() {
        let dist = ShockDistribution::uniform(2.0).unwrap();
        let params = MechanismParams::new(2.0, 1.0, 0.0, 0.2, 1.0, 2.0).unwrap();
        let omega_t = calibrate_omega_t(0.25, &params, &dist).unwrap();
        assert!((omega_t - 3.0).abs() < 1e-12);
        let rate = activation_rate(&params.with_omega_t(omega_t), &dist).unwrap();
        assert!((rate - 0.25).abs() < 1e-12);
        assert!(calibrate_omega_t(0.95, &params, &dist).is_err());
    }

    #[test]
    fn welfare_wedge_examples() {
        let params = MechanismParams::new(2.0, 1.0, 1.0, 0.0, 1.0, 3.0).unwrap();
        let w = welfare_wedge_shift(&params, 0.6).unwrap();
        assert!((w.wedge - 0.4).abs() < 1e-15);
        assert!((w.cutoff_shift - 0.2).abs() < 1e-15);
        assert_eq!(w.interior_slope, 2.0);
        assert_eq!(welfare_wedge_shift(&params, 1.0).unwrap().cutoff_shift, 0.0);
        let social = cutoffs(&params.with_omega_t(0.6)).unwrap();
        let political = cutoffs(&params).unwrap();
        assert!((political.theta_lo - social.theta_lo - w.cutoff_shift).abs() < 1e-12);
        assert!((political.theta_hi - social.theta_hi - w.cutoff_shift).abs() < 1e-12);
    }

    #[test]
    fn screened_payout_examples() {
        let params = p(2.0, 4.0, 1.0, 0.1, 0.5);
        assert_eq!(screened_payout(0.3, 1.0, &params).unwrap(), 0.25);
        assert_eq!(screened_payout(0.1, 1.0, &params).unwrap(), 0.1);
        assert!(screened_payout(-0.1, 1.0, &params).is_err());
        for i in 0..=300 {
            let theta = i as f64 * 0.01;
            assert_eq!(
                screened_payout(f64::INFINITY, theta, &params).unwrap(),
                tlc_policy_linear(theta, &params).unwrap()
            );
        }
    }
}
