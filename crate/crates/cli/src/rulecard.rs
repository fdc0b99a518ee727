//! Published rule card: the numbers an auditor needs to check compliance.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tlc_core::mechanism::{cutoffs, knife_edge};

use crate::config::Resolved;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCard {
    pub status: String,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub interior_slope: f64,
    pub b_bar: f64,
    pub cap_source: String,
    pub omega_b: f64,
    pub c: f64,
    pub omega_t: f64,
    pub theta_bar: f64,
    pub knife_edge: bool,
    pub config_sha256: String,
    pub timestamp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minutes: Option<String>,
}

pub const STATUS_ACTIVE: &str = "ACTIVE";
pub const STATUS_NO_BAILOUT: &str = "NO-BAILOUT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds the card. `timestamp` is recorded verbatim; pass `None` for
/// reproducible output.
pub fn build(resolved: &Resolved, timestamp: Option<&str>) -> Result<RuleCard> {
    let p = &resolved.params;
    let cut = cutoffs(p)?;
    let knife = knife_edge(p)?;
    Ok(RuleCard {
        status: if knife { STATUS_NO_BAILOUT } else { STATUS_ACTIVE }.to_string(),
        threshold: p.threshold,
        tau: resolved.tau,
        theta_lo: cut.theta_lo,
        theta_hi: cut.theta_hi,
        interior_slope: p.slope(),
        b_bar: p.b_bar,
        cap_source: resolved.cap_source.as_str().to_string(),
        omega_b: p.omega_b,
        c: p.c,
        omega_t: p.omega_t,
        theta_bar: p.theta_bar,
        knife_edge: knife,
        config_sha256: sha256_hex(resolved.source.as_bytes()),
        timestamp: timestamp.unwrap_or("none").to_string(),
        minutes: resolved.config.mechanism.minutes.clone(),
    })
}

fn knife_reason(card: &RuleCard) -> &'static str {
    if card.b_bar == 0.0 {
        "cap-driven: b_bar = 0"
    } else {
        "cost-driven: omega_t >= omega_b * theta_bar"
    }
}

/// Human-readable card.
pub fn render_text(card: &RuleCard) -> String {
    let mut s = String::new();
    s.push_str("RULE CARD\n");
    if card.knife_edge {
        s.push_str(&format!("status: {} ({})\n", card.status, knife_reason(card)));
    } else {
        s.push_str(&format!("status: {}\n", card.status));
    }
    s.push_str(&format!("admissibility threshold T: {}\n", card.threshold));
    match card.tau {
        Some(t) => s.push_str(&format!("consent quota tau: {t}\n")),
        None => s.push_str("consent quota tau: not published\n"),
    }
    s.push_str(&format!("lower cutoff theta_lo: {}\n", card.theta_lo));
    s.push_str(&format!("upper cutoff theta_hi: {}\n", card.theta_hi));
    s.push_str(&format!("interior slope omega_b/c: {}\n", card.interior_slope));
    s.push_str(&format!("cap b_bar: {} [{}]\n", card.b_bar, card.cap_source));
    s.push_str(&format!(
        "schedule: b = 0 below theta_lo; b = {} * theta - {} on [theta_lo, theta_hi]; b = {} above\n",
        card.interior_slope,
        card.omega_t / card.c,
        card.b_bar
    ));
    s.push_str(&format!("shock support: [0, {}]\n", card.theta_bar));
    s.push_str(&format!("config sha256: {}\n", card.config_sha256));
    s.push_str(&format!("timestamp: {}\n", card.timestamp));
    if let Some(m) = &card.minutes {
        s.push_str(&format!("minutes: {m}\n"));
    }
    s
}

pub fn to_toml(card: &RuleCard) -> Result<String> {
    toml::to_string(card).map_err(|e| CliError::Validation(format!("rule card: {e}")))
}

pub fn from_toml(text: &str) -> Result<RuleCard> {
    toml::from_str(text).map_err(|e| CliError::Validation(format!("rule card: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    fn card(src: &str) -> RuleCard {
        build(&parse(src, "t.toml").unwrap(), None).unwrap()
    }

    const BASIC: &str = "\
[mechanism]
omega_b = 2.0
c = 4.0
omega_t = 1.0
threshold = 0.1
b_bar = 0.5
theta_bar = 2.0
";

    #[test]
    fn basic_card() {
        let c = card(BASIC);
        assert_eq!((c.theta_lo, c.theta_hi, c.interior_slope), (0.5, 1.5, 0.5));
        assert_eq!(c.status, STATUS_ACTIVE);
        let text = render_text(&c);
        assert!(text.contains("lower cutoff theta_lo: 0.5\n"));
        assert!(text.contains("upper cutoff theta_hi: 1.5\n"));
        assert!(text.contains("timestamp: none\n"));
    }

    #[test]
    fn knife_edge_is_stamped() {
        let c = card(&BASIC.replace("omega_t = 1.0", "omega_t = 4.0"));
        assert!(c.knife_edge);
        assert!(render_text(&c).contains("NO-BAILOUT"));
    }

    #[test]
    fn toml_copy_round_trips_exactly() {
        let c = card(&BASIC.replace("omega_t = 1.0", "omega_t = 0.7").replace("c = 4.0", "c = 3.0"));
        let back = from_toml(&to_toml(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.theta_hi.to_bits(), c.theta_hi.to_bits());
    }

    #[test]
    fn unbounded_cap_round_trips() {
        let c = card(&BASIC.replace("b_bar = 0.5", "b_bar = \"inf\""));
        assert!(c.theta_hi.is_infinite());
        assert_eq!(from_toml(&to_toml(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn hash_tracks_config_bytes() {
        let a = card(BASIC);
        let b = card(&format!("{BASIC}\n"));
        assert_ne!(a.config_sha256, b.config_sha256);
        assert_eq!(a.config_sha256.len(), 64);
    }
}
