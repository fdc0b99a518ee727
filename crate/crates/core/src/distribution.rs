//! Shock distributions on a bounded support `[0, theta_bar]`.
//!
//! Every family exposes its CDF, density, survivor function and the
//! generalized inverse `F^-1(u) = inf{x : F(x) >= u}`. Sampling goes through
//! the inverse so a seeded generator reproduces draws exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF};

use crate::error::{check, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Uniform,
    /// Exponential with the given rate, truncated to the support.
    Exponential { rate: f64 },
    /// Beta(alpha, beta) rescaled from `[0, 1]` onto the support.
    Beta { alpha: f64, beta: f64 },
}

/// Distribution of the fiscal shock `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockDistribution {
    family: Family,
    theta_bar: f64,
}

impl ShockDistribution {
    pub fn new(family: Family, theta_bar: f64) -> Result<Self> {
        check(
            theta_bar.is_finite() && theta_bar > 0.0,
            "theta_bar",
            theta_bar,
            "support bound must be finite and positive",
        )?;
        match family {
            Family::Uniform => {}
            Family::Exponential { rate } => {
                check(rate.is_finite() && rate > 0.0, "rate", rate, "must be positive")?
            }
            Family::Beta { alpha, beta } => {
                check(alpha.is_finite() && alpha > 0.0, "alpha", alpha, "must be positive")?;
                check(beta.is_finite() && beta > 0.0, "beta", beta, "must be positive")?;
            }
        }
        Ok(Self { family, theta_bar })
    }

    pub fn uniform(theta_bar: f64) -> Result<Self> {
        Self::new(Family::Uniform, theta_bar)
    }

    pub fn exponential(rate: f64, theta_bar: f64) -> Result<Self> {
        Self::new(Family::Exponential { rate }, theta_bar)
    }

    pub fn beta(alpha: f64, beta: f64, theta_bar: f64) -> Result<Self> {
        Self::new(Family::Beta { alpha, beta }, theta_bar)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta_bar(&self) -> f64 {
        self.theta_bar
    }

    fn unit_beta(alpha: f64, beta: f64) -> Beta {
        // Parameters were validated at construction.
        Beta::new(alpha, beta).expect("validated beta parameters")
    }

    /// Normalizing mass `1 - exp(-rate * theta_bar)` of the truncated exponential.
    fn exp_mass(rate: f64, theta_bar: f64) -> f64 {
        -(-rate * theta_bar).exp_m1()
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= self.theta_bar {
            return 1.0;
        }
        match self.family {
            Family::Uniform => theta / self.theta_bar,
            Family::Exponential { rate } => {
                -(-rate * theta).exp_m1() / Self::exp_mass(rate, self.theta_bar)
            }
            Family::Beta { alpha, beta } => {
                Self::unit_beta(alpha, beta).cdf(theta / self.theta_bar)
            }
        }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        if !(0.0..=self.theta_bar).contains(&theta) {
            return 0.0;
        }
        match self.family {
            Family::Uniform => 1.0 / self.theta_bar,
            Family::Exponential { rate } => {
                rate * (-rate * theta).exp() / Self::exp_mass(rate, self.theta_bar)
            }
            Family::Beta { alpha, beta } => {
                Self::unit_beta(alpha, beta).pdf(theta / self.theta_bar) / self.theta_bar
            }
        }
    }

    pub fn survivor(&self, theta: f64) -> f64 {
        1.0 - self.cdf(theta)
    }

    /// Generalized inverse of the CDF; `u` is clamped to `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.theta_bar;
        }
        let x = match self.family {
            Family::Uniform => u * self.theta_bar,
            Family::Exponential { rate } => {
                -(-u * Self::exp_mass(rate, self.theta_bar)).ln_1p() / rate
            }
            Family::Beta { alpha, beta } => {
                Self::unit_beta(alpha, beta).inverse_cdf(u) * self.theta_bar
            }
        };
        x.clamp(0.0, self.theta_bar)
    }

    /// Draws one shock by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Uniform => 0.5 * self.theta_bar,
            Family::Exponential { rate } => {
                let m = Self::exp_mass(rate, self.theta_bar);
                1.0 / rate - self.theta_bar * (-rate * self.theta_bar).exp() / m
            }
            Family::Beta { alpha, beta } => self.theta_bar * alpha / (alpha + beta),
        }
    }
}

/// Hazard rate `f(theta) / (1 - F(theta))`.
pub fn hazard(theta: f64, dist: &ShockDistribution) -> Result<f64> {
    let survivor = dist.survivor(theta);
    if survivor <= 0.0 {
        return Err(Error::ZeroSurvivor(theta));
    }
    Ok(dist.pdf(theta) / survivor)
}
