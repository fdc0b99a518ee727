//! Weighted consent: how a quota-based legislature caps the bailout and how
//! representation sets the political cost of public funds.
//!
//! Beneficiary representatives vote for a proposal `b` iff `b <= x * theta`,
//! where `x` is their private support threshold; taxpayer representatives
//! always vote against. A proposal passes iff the weighted support reaches the
//! quota `tau` (ties pass).

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Distribution `H` of beneficiary support thresholds on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ThresholdDist {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    /// Finitely many atoms `(x, mass)`; masses sum to one.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl ThresholdDist {
    /// Discrete distribution with atoms sorted by location.
    pub fn discrete(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let d = ThresholdDist::Discrete { atoms };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThresholdDist::Uniform { lo, hi } => {
                check(lo.is_finite() && *lo >= 0.0, "h.lo", *lo, "must be finite and non-negative")?;
                check(hi.is_finite() && hi > lo, "h.hi", *hi, "must be finite and above lo")
            }
            ThresholdDist::Exponential { rate } => {
                check(rate.is_finite() && *rate > 0.0, "h.rate", *rate, "must be positive")
            }
            ThresholdDist::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidLegislature("threshold distribution has no atoms".into()));
                }
                if atoms.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidLegislature(
                        "atoms must be at strictly increasing locations".into(),
                    ));
                }
                for &(x, m) in atoms {
                    check(x.is_finite() && x >= 0.0, "atom", x, "location must be finite and non-negative")?;
                    check(m.is_finite() && m >= 0.0, "mass", m, "must be non-negative")?;
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                check((total - 1.0).abs() <= WEIGHT_SUM_TOL, "mass total", total, "must equal 1")
            }
        }
    }

    /// `H(x) = P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            ThresholdDist::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            ThresholdDist::Exponential { rate } => -(-rate * x).exp_m1(),
            ThresholdDist::Discrete { atoms } => atoms.iter().take_while(|a| a.0 <= x).map(|a| a.1).sum(),
        }
    }

    /// Lower generalized inverse `inf{x >= 0 : H(x) >= u}`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            ThresholdDist::Uniform { lo, hi } => lo + u.min(1.0) * (hi - lo),
            ThresholdDist::Exponential { rate } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-u).ln_1p() / rate
                }
            }
            ThresholdDist::Discrete { atoms } => {
                let mut cum = 0.0;
                for &(x, m) in atoms {
                    cum += m;
                    if cum >= u {
                        return x;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// Upper generalized inverse `inf{x >= 0 : H(x) > u}`, equivalently the
    /// largest `x` with `P(X >= x) >= 1 - u`.
    ///
    /// Agrees with [`quantile`](Self::quantile) wherever `H` is continuous and
    /// strictly increasing; at atoms it is the value consistent with voting,
    /// since a representative with threshold `x` still supports `b = x * theta`.
    pub fn upper_quantile(&self, u: f64) -> f64 {
        match self {
            ThresholdDist::Uniform { lo, hi } => {
                if u < 0.0 {
                    0.0
                } else {
                    lo + u.min(1.0) * (hi - lo)
                }
            }
            ThresholdDist::Exponential { .. } => self.quantile(u.max(0.0)),
            ThresholdDist::Discrete { atoms } => {
                if u < 0.0 {
                    return 0.0;
                }
                let mut cum = 0.0;
                for &(x, m) in atoms {
                    cum += m;
                    if cum > u {
                        return x;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }
}

/// Two-bloc legislature: beneficiaries with weight `w_b`, taxpayers with the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub w_b: f64,
    pub tau: f64,
    pub h: ThresholdDist,
    /// Admissibility threshold at which the uniform cap is evaluated.
    pub threshold: f64,
}

impl WeightProfile {
    pub fn w_t(&self) -> f64 {
        1.0 - self.w_b
    }

    pub fn validate(&self) -> Result<()> {
        check((0.0..=1.0).contains(&self.w_b), "w_b", self.w_b, "must lie in [0, 1]")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau", self.tau, "must lie in (0, 1]")?;
        check(
            self.threshold.is_finite() && self.threshold >= 0.0,
            "threshold",
            self.threshold,
            "must be finite and non-negative",
        )?;
        self.h.validate()
    }
}

/// θ-uniform consent cap `T * H^-1(1 - tau / w_b)`, zero when `tau > w_b`.
///
/// Uses the upper generalized inverse, which reproduces the pass/fail scan of
/// a finite legislature at atoms of `H`.
pub fn consent_cap_analytic(profile: &WeightProfile) -> Result<f64> {
    profile.validate()?;
    if profile.tau > profile.w_b {
        return Ok(0.0);
    }
    let u = 1.0 - profile.tau / profile.w_b;
    Ok(profile.threshold * profile.h.upper_quantile(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bloc {
    Taxpayer,
    Beneficiary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub weight: f64,
    pub bloc: Bloc,
    /// Support threshold; ignored for taxpayers.
    #[serde(default)]
    pub x: f64,
}

/// A concrete legislature of weighted representatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteLegislature {
    reps: Vec<Representative>,
    /// Beneficiary `(x, weight)` sorted by descending `x`.
    beneficiaries: Vec<(f64, f64)>,
    /// `prefix[k]` is the weight of the first `k` sorted beneficiaries.
    prefix: Vec<f64>,
}

impl FiniteLegislature {
    pub fn new(reps: Vec<Representative>) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::InvalidLegislature("no representatives".into()));
        }
        for r in &reps {
            check(r.weight.is_finite() && r.weight >= 0.0, "weight", r.weight, "must be non-negative")?;
            if r.bloc == Bloc::Beneficiary {
                check(r.x.is_finite() && r.x >= 0.0, "x", r.x, "threshold must be finite and non-negative")?;
            }
        }
        let total: f64 = reps.iter().map(|r| r.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidLegislature(format!("weights sum to {total}, not 1")));
        }
        let mut beneficiaries: Vec<(f64, f64)> = reps
            .iter()
            .filter(|r| r.bloc == Bloc::Beneficiary)
            .map(|r| (r.x, r.weight))
            .collect();
        beneficiaries.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut prefix = Vec::with_capacity(beneficiaries.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for &(_, w) in &beneficiaries {
            acc += w;
            prefix.push(acc);
        }
        Ok(Self {
            reps,
            beneficiaries,
            prefix,
        })
    }

    /// Beneficiary bloc with the given thresholds sharing `w_b` equally, and a
    /// single taxpayer representative holding the remaining weight.
    pub fn two_bloc(w_b: f64, thresholds: &[f64]) -> Result<Self> {
        check((0.0..=1.0).contains(&w_b), "w_b", w_b, "must lie in [0, 1]")?;
        let each = w_b / thresholds.len().max(1) as f64;
        let mut reps: Vec<Representative> = thresholds
            .iter()
            .map(|&x| Representative {
                weight: each,
                bloc: Bloc::Beneficiary,
                x,
            })
            .collect();
        reps.push(Representative {
            weight: 1.0 - w_b,
            bloc: Bloc::Taxpayer,
            x: 0.0,
        });
        Self::new(reps)
    }

    pub fn representatives(&self) -> &[Representative] {
        &self.reps
    }

    pub fn beneficiary_weight(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }

    /// Number of sorted beneficiaries voting for `b` at shock `theta`.
    fn supporters(&self, b: f64, theta: f64) -> usize {
        self.beneficiaries.partition_point(|&(x, _)| b <= x * theta)
    }
}

/// Weighted support `Y(b, theta) = sum of w_r over beneficiaries with b <= x_r theta`.
pub fn aggregate_support(b: f64, theta: f64, leg: &FiniteLegislature) -> f64 {
    leg.prefix[leg.supporters(b, theta)]
}

/// Largest proposal that reaches the quota, `sup{b >= 0 : Y(b, theta) >= tau}`,
/// with `sup of the empty set = 0`.
///
/// Scans the breakpoints `x_r * theta` from the top, aggregating tied
/// breakpoints, and uses the same prefix sums as [`aggregate_support`].
pub fn empirical_cap(theta: f64, leg: &FiniteLegislature, tau: f64) -> f64 {
    let n = leg.beneficiaries.len();
    let mut j = 0;
    while j < n {
        let v = leg.beneficiaries[j].0 * theta;
        let end = leg.supporters(v, theta);
        if leg.prefix[end] >= tau {
            return v;
        }
        j = end.max(j + 1);
    }
    0.0
}

/// Shape of the salience map `phi` in `omega_t = lambda0 + lambda1 * phi(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phi", rename_all = "lowercase")]
pub enum Salience {
    Identity,
    /// `max(s, 0)^exponent`.
    Power { exponent: f64 },
    /// `1 / (1 + exp(-steepness * (s - midpoint)))`.
    Logistic { steepness: f64, midpoint: f64 },
}

impl Salience {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Salience::Identity => s,
            Salience::Power { exponent } => s.max(0.0).powf(exponent),
            Salience::Logistic { steepness, midpoint } => 1.0 / (1.0 + (-steepness * (s - midpoint)).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoliticalCostSpec {
    pub lambda0: f64,
    pub lambda1: f64,
    #[serde(flatten)]
    pub phi: Salience,
}

impl PoliticalCostSpec {
    pub fn validate(&self) -> Result<()> {
        check(self.lambda0.is_finite() && self.lambda0 >= 0.0, "lambda0", self.lambda0, "must be non-negative")?;
        check(self.lambda1.is_finite() && self.lambda1 >= 0.0, "lambda1", self.lambda1, "must be non-negative")?;
        match self.phi {
            Salience::Identity => {}
            Salience::Power { exponent } => check(exponent > 0.0, "exponent", exponent, "must be positive")?,
            Salience::Logistic { steepness, .. } => {
                check(steepness >= 0.0, "steepness", steepness, "must be non-negative")?
            }
        }
        // Sampled monotonicity of phi on [0, 1].
        let mut prev = self.phi.eval(0.0);
        for i in 1..=256 {
            let cur = self.phi.eval(i as f64 / 256.0);
            if !(cur >= prev) {
                return Err(Error::InvalidParameter {
                    name: "phi",
                    value: i as f64 / 256.0,
                    reason: "salience map must be non-decreasing",
                });
            }
            prev = cur;
        }
        Ok(())
    }
}

/// `omega_t = lambda0 + lambda1 * phi(salience)`.
pub fn political_cost(spec: &PoliticalCostSpec, salience: f64) -> Result<f64> {
    spec.validate()?;
    Ok(spec.lambda0 + spec.lambda1 * spec.phi.eval(salience))
}

/// Institutional levers before or after a reform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levers {
    pub omega_t: f64,
    pub b_bar: f64,
}

/// Co-monotone bundle: a reform that raises the political cost must not
/// loosen the consent cap.
pub fn bundle_check(before: Levers, after: Levers) -> bool {
    !(after.omega_t >= before.omega_t) || after.b_bar <= before.b_bar
}
