//! Sectioned TOML configuration.
//!
//! ```toml
//! [mechanism]
//! omega_b = 2.0
//! c = 4.0
//! omega_t = 1.0
//! threshold = 0.1
//! b_bar = 0.5
//!
//! [distribution]
//! family = "uniform"
//! theta_bar = 2.0
//! ```
//!
//! `omega_t` may instead come from `[political_cost]`, and `b_bar` from
//! `[legislature]`. Validation errors point at the offending line.

use std::path::Path;

use serde::Deserialize;
use tlc_core::distribution::{Family, ShockDistribution};
use tlc_core::estimator::BenefitFamily;
use tlc_core::floor::EquityFloor;
use tlc_core::mechanism::MechanismParams;
use tlc_core::voting::{
    consent_cap_analytic, empirical_cap, political_cost, FiniteLegislature, PoliticalCostSpec, Representative,
    Salience, ThresholdDist, WeightProfile,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mechanism: MechanismSection,
    pub distribution: Option<DistributionSection>,
    pub legislature: Option<LegislatureSection>,
    pub political_cost: Option<PoliticalCostSection>,
    pub floor: Option<EquityFloor>,
    pub simulate: Option<SimulateSection>,
    pub sweep: Option<SweepSection>,
    pub audit: Option<AuditSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    pub omega_b: f64,
    pub c: f64,
    pub omega_t: Option<f64>,
    pub threshold: f64,
    /// Omitted, or the string "inf", for an unbounded cap unless a legislature is given.
    pub b_bar: Option<CapValue>,
    pub theta_bar: Option<f64>,
    /// Published quota; defaults to the legislature's.
    pub tau: Option<f64>,
    /// Free-text provenance copied onto the rule card.
    pub minutes: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum CapValue {
    Finite(f64),
    Named(CapName),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapName {
    Inf,
}

impl CapValue {
    fn value(self) -> f64 {
        match self {
            CapValue::Finite(v) => v,
            CapValue::Named(CapName::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct DistributionSection {
    #[serde(flatten)]
    pub family: Family,
    pub theta_bar: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegislatureSection {
    pub tau: f64,
    /// Beneficiary weight for the analytic model.
    pub w_b: Option<f64>,
    /// Threshold distribution `H` for the analytic model.
    pub h: Option<ThresholdDist>,
    /// Explicit representatives; the cap is then scanned at the threshold.
    pub representatives: Option<Vec<Representative>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PoliticalCostSection {
    pub lambda0: f64,
    pub lambda1: f64,
    pub salience: f64,
    #[serde(flatten)]
    pub phi: Salience,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    /// Constant added to every episode above the upper cutoff.
    pub override_shift: Option<f64>,
    /// Screening cap `beta`: payouts become `min(beta, b*)`.
    pub screening_beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[serde(alias = "omega_T")]
    OmegaT,
    BBar,
    Tau,
    #[serde(alias = "w_B")]
    WB,
    #[serde(alias = "T")]
    Threshold,
}

impl SweepParam {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "omega_t" | "omega_T" => Some(SweepParam::OmegaT),
            "b_bar" => Some(SweepParam::BBar),
            "tau" => Some(SweepParam::Tau),
            "w_b" | "w_B" => Some(SweepParam::WB),
            "threshold" | "T" => Some(SweepParam::Threshold),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::OmegaT => "omega_t",
            SweepParam::BBar => "b_bar",
            SweepParam::Tau => "tau",
            SweepParam::WB => "w_b",
            SweepParam::Threshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// When sweeping `omega_t`, move `b_bar` by this much per unit of `omega_t`.
    pub coupled_b_bar_slope: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub knot_grid: Option<usize>,
    pub tol: Option<f64>,
    pub family: Option<BenefitFamily>,
    pub announced_d_omega_t: Option<f64>,
    pub announced_d_b_bar: Option<f64>,
}

/// Where the consent cap on the rule card came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapSource {
    Config,
    AnalyticLegislature,
    FiniteLegislature,
}

impl CapSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CapSource::Config => "config",
            CapSource::AnalyticLegislature => "weighted consent (analytic H)",
            CapSource::FiniteLegislature => "weighted consent (finite legislature)",
        }
    }
}

/// A validated configuration with every derived quantity filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: Config,
    pub params: MechanismParams,
    pub distribution: ShockDistribution,
    pub tau: Option<f64>,
    pub cap_source: CapSource,
    /// Raw bytes of the config file, for hashing.
    pub source: String,
}

/// Loads and validates a config file.
pub fn load(path: &Path) -> Result<Resolved> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&source, &path.display().to_string())
}

/// Parses and validates config text; `origin` names the source in diagnostics.
pub fn parse(source: &str, origin: &str) -> Result<Resolved> {
    let config: Config = toml::from_str(source)
        .map_err(|e| CliError::Validation(format!("{origin}: {}", e.to_string().trim_end())))?;
    resolve(config, source).map_err(|(section, key, msg)| {
        let at = match locate(source, section, key) {
            Some(line) => format!("{origin}:{line}"),
            None => origin.to_string(),
        };
        CliError::Validation(format!("{at}: [{section}] {key}: {msg}"))
    })
}

type Located<T> = std::result::Result<T, (&'static str, &'static str, String)>;

fn core_err(section: &'static str, e: tlc_core::Error) -> (&'static str, &'static str, String) {
    let key = match &e {
        tlc_core::Error::InvalidParameter { name, .. } => name,
        tlc_core::Error::OutOfDomain { what, .. } => what,
        _ => "",
    };
    (section, key, e.to_string())
}

fn resolve(config: Config, source: &str) -> Located<Resolved> {
    let m = &config.mechanism;

    let omega_t = match (m.omega_t, &config.political_cost) {
        (Some(_), Some(_)) => {
            return Err(("mechanism", "omega_t", "give omega_t or [political_cost], not both".into()));
        }
        (Some(w), None) => w,
        (None, Some(pc)) => {
            let spec = PoliticalCostSpec {
                lambda0: pc.lambda0,
                lambda1: pc.lambda1,
                phi: pc.phi,
            };
            political_cost(&spec, pc.salience).map_err(|e| core_err("political_cost", e))?
        }
        (None, None) => return Err(("mechanism", "omega_t", "missing (or add a [political_cost] section)".into())),
    };

    let theta_bar = match (m.theta_bar, &config.distribution) {
        (Some(a), Some(d)) if a != d.theta_bar => {
            return Err((
                "mechanism",
                "theta_bar",
                format!("{a} disagrees with [distribution] theta_bar = {}", d.theta_bar),
            ));
        }
        (Some(a), _) => a,
        (None, Some(d)) => d.theta_bar,
        (None, None) => return Err(("mechanism", "theta_bar", "missing (or add a [distribution] section)".into())),
    };

    let distribution = match &config.distribution {
        Some(d) => ShockDistribution::new(d.family, d.theta_bar).map_err(|e| core_err("distribution", e))?,
        None => ShockDistribution::uniform(theta_bar).map_err(|e| core_err("mechanism", e))?,
    };

    let (b_bar, cap_source, leg_tau) = match (m.b_bar, &config.legislature) {
        (Some(_), Some(_)) => {
            return Err(("mechanism", "b_bar", "give b_bar or [legislature], not both".into()));
        }
        (Some(v), None) => (v.value(), CapSource::Config, None),
        (None, None) => (f64::INFINITY, CapSource::Config, None),
        (None, Some(leg)) => {
            let (cap, src) = legislature_cap(leg, m.threshold)?;
            (cap, src, Some(leg.tau))
        }
    };

    let params = MechanismParams::new(m.omega_b, m.c, omega_t, m.threshold, b_bar, theta_bar)
        .map_err(|e| core_err(if cap_source == CapSource::Config { "mechanism" } else { "legislature" }, e))?;

    if let Some(floor) = &config.floor {
        floor.validate().map_err(|e| ("floor", "kind", e.to_string()))?;
    }
    if let Some(tau) = m.tau {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(("mechanism", "tau", format!("{tau} must lie in (0, 1]")));
        }
    }
    if let Some(s) = &config.simulate {
        if let Some(noise) = s.noise {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(("simulate", "noise", format!("{noise} must be finite and non-negative")));
            }
        }
        if let Some(beta) = s.screening_beta {
            if !(beta >= 0.0) {
                return Err(("simulate", "screening_beta", format!("{beta} must be non-negative")));
            }
        }
    }
    if let Some(s) = &config.sweep {
        if s.steps < 2 || !s.from.is_finite() || !s.to.is_finite() {
            return Err(("sweep", "steps", "need at least 2 steps over a finite range".into()));
        }
    }
    if let Some(a) = &config.audit {
        if let Some(tol) = a.tol {
            if !(tol >= 0.0) {
                return Err(("audit", "tol", format!("{tol} must be non-negative")));
            }
        }
    }

    Ok(Resolved {
        tau: m.tau.or(leg_tau),
        params,
        distribution,
        cap_source,
        source: source.to_string(),
        config,
    })
}

fn legislature_cap(leg: &LegislatureSection, threshold: f64) -> Located<(f64, CapSource)> {
    match (&leg.representatives, leg.w_b, &leg.h) {
        (Some(reps), None, None) => {
            if !(leg.tau > 0.0 && leg.tau <= 1.0) {
                return Err(("legislature", "tau", format!("{} must lie in (0, 1]", leg.tau)));
            }
            let l = FiniteLegislature::new(reps.clone()).map_err(|e| ("legislature", "representatives", e.to_string()))?;
            Ok((empirical_cap(threshold, &l, leg.tau), CapSource::FiniteLegislature))
        }
        (None, Some(w_b), Some(h)) => {
            let profile = WeightProfile {
                w_b,
                tau: leg.tau,
                h: h.clone(),
                threshold,
            };
            let cap = consent_cap_analytic(&profile).map_err(|e| core_err("legislature", e))?;
            Ok((cap, CapSource::AnalyticLegislature))
        }
        _ => Err((
            "legislature",
            "tau",
            "give either `representatives`, or both `w_b` and `h`".into(),
        )),
    }
}

/// 1-based line of `key` inside `[section]`, falling back to the section header.
pub fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    let mut header = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim_matches(|c| c == '[' || c == ']').trim();
            if current == section && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

impl Resolved {
    pub fn simulate(&self) -> SimulateSection {
        self.config.simulate.clone().unwrap_or_default()
    }

    pub fn audit(&self) -> AuditSection {
        self.config.audit.clone().unwrap_or_default()
    }

    /// Cap that the legislature section would produce at another threshold or quota.
    pub fn cap_for(&self, threshold: f64, tau: Option<f64>, w_b: Option<f64>) -> Result<f64> {
        let Some(leg) = &self.config.legislature else {
            return Ok(self.params.b_bar);
        };
        let mut leg = leg.clone();
        if let Some(t) = tau {
            leg.tau = t;
        }
        if let Some(w) = w_b {
            if leg.w_b.is_none() {
                return Err(CliError::Validation(
                    "sweeping w_b needs an analytic legislature (w_b and h)".into(),
                ));
            }
            leg.w_b = Some(w);
        }
        legislature_cap(&leg, threshold)
            .map(|(cap, _)| cap)
            .map_err(|(section, key, msg)| CliError::Validation(format!("[{section}] {key}: {msg}")))
    }
}
