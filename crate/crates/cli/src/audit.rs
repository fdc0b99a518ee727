//! Ex-post compliance audit of realized bailouts against a published rule.

use std::fmt::Write;

use tlc_core::estimator::{
    attribute_shift, classify_episodes, default_tolerance, detect_override_shift, fit_tlc, AnnouncedShift,
    BenefitFamily, Episode, FitOptions, OverrideReport, Regime, RegimeCounts, ShiftAttribution, TlcFit,
    SLOPE_SHIFT_LIMIT,
};
use tlc_core::mechanism::tlc_policy_linear;

use crate::config::Resolved;
use crate::error::Result;
use crate::rulecard::{self, RuleCard};
use crate::svg::Chart;

/// Share of non-cap episodes allowed to sit off the fitted rule before the
/// piecewise-linearity check fails.
pub const OFF_RULE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuditOptions {
    pub knot_grid: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotIdentified,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotIdentified => "NOT-IDENTIFIED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

/// Fit and override report for one regime of data.
#[derive(Debug, Clone)]
pub struct RegimeFit {
    pub fit: TlcFit,
    pub overrides: OverrideReport,
    /// The fit used for classification: the dummy refit when a systematic
    /// override was found, otherwise the plain fit.
    pub rule: TlcFit,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub card: RuleCard,
    pub primary: RegimeFit,
    pub tol: f64,
    pub labels: Vec<Regime>,
    pub counts: RegimeCounts,
    pub checks: Vec<SignatureCheck>,
    pub after: Option<RegimeFit>,
    pub attribution: Option<ShiftAttribution>,
    /// Lever-unit tolerance used for the announced-change comparison.
    pub attribution_tol: f64,
}

impl AuditReport {
    pub fn failed_checks(&self) -> Vec<&SignatureCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect()
    }
}

fn fit_regime(data: &[Episode], opts: &FitOptions) -> Result<RegimeFit> {
    let fit = fit_tlc(data, opts)?;
    let overrides = detect_override_shift(data, &fit)?;
    let rule = if overrides.systematic { overrides.rule_fit(&fit) } else { fit.clone() };
    Ok(RegimeFit { fit, overrides, rule })
}

/// Knot uncertainty: grid spacing, the data gap around the knot, and the
/// noise band translated into shock units.
fn knot_tolerance(data: &[Episode], rule: &TlcFit, knot: f64) -> f64 {
    let below = data.iter().map(|e| e.theta).filter(|&t| t <= knot).fold(f64::NEG_INFINITY, f64::max);
    let above = data.iter().map(|e| e.theta).filter(|&t| t >= knot).fold(f64::INFINITY, f64::min);
    let gap = if below.is_finite() && above.is_finite() { above - below } else { 0.0 };
    let noise = if rule.s > 0.0 { 2.0 * rule.rse() / rule.s } else { 0.0 };
    rule.knot_resolution.max(gap).max(noise)
}

fn checks(data: &[Episode], card: &RuleCard, rf: &RegimeFit, labels: &[Regime]) -> Vec<SignatureCheck> {
    let rule = &rf.rule;
    let theta_min = data.iter().map(|e| e.theta).fold(f64::INFINITY, f64::min);
    let theta_max = data.iter().map(|e| e.theta).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();

    let below = data.iter().filter(|e| e.theta < rule.theta1).count();
    let above = data.iter().filter(|e| e.theta > rule.theta2).count();
    let (status, detail) = if rule.degenerate {
        (CheckStatus::NotIdentified, "no positive bailouts; cutoffs not identified".to_string())
    } else if rule.no_interior {
        (
            CheckStatus::Fail,
            format!("fitted knots coincide at {}; no interior segment", rule.theta1),
        )
    } else if below == 0 || above == 0 {
        (
            CheckStatus::NotIdentified,
            format!("{below} episodes below theta1 and {above} above theta2; both regions must be observed"),
        )
    } else {
        (
            CheckStatus::Pass,
            format!("zero below {:.6}, cap above {:.6}, slope {:.6} between", rule.theta1, rule.theta2, rule.s),
        )
    };
    out.push(SignatureCheck { name: "two-cutoff", status, detail });

    let (status, detail) = if rule.degenerate {
        (CheckStatus::NotIdentified, "no interior segment to measure".to_string())
    } else if !rule.structural_slope {
        (
            CheckStatus::NotIdentified,
            "concave benefit declared; slope is not omega_b/c".to_string(),
        )
    } else {
        let rel = (rule.s - card.interior_slope).abs() / card.interior_slope;
        let status = if rel <= SLOPE_SHIFT_LIMIT { CheckStatus::Pass } else { CheckStatus::Fail };
        (
            status,
            format!(
                "fitted {:.6} vs published {:.6} (relative gap {:.4}, limit {})",
                rule.s, card.interior_slope, rel, SLOPE_SHIFT_LIMIT
            ),
        )
    };
    out.push(SignatureCheck { name: "slope match", status, detail });

    let off_rule = data
        .iter()
        .zip(labels)
        .filter(|(e, &l)| l == Regime::Override && e.theta <= rule.theta2)
        .count();
    let non_cap = data.iter().filter(|e| e.theta <= rule.theta2).count();
    let share = if non_cap > 0 { off_rule as f64 / non_cap as f64 } else { 0.0 };
    let (status, detail) = if rule.degenerate {
        (CheckStatus::NotIdentified, "no positive bailouts".to_string())
    } else if rf.overrides.slope_changed {
        (
            CheckStatus::Fail,
            format!(
                "interior slope moves by {:.4} once cap overrides are netted out",
                rf.overrides.slope_shift
            ),
        )
    } else if share > OFF_RULE_SHARE {
        (
            CheckStatus::Fail,
            format!("{off_rule} of {non_cap} episodes off the rule below the cap region ({share:.4} > {OFF_RULE_SHARE})"),
        )
    } else {
        (
            CheckStatus::Pass,
            format!("{off_rule} of {non_cap} episodes off the rule below the cap region; only the cap segment may jump"),
        )
    };
    out.push(SignatureCheck { name: "piecewise-linearity", status, detail });

    let (status, detail) = if rule.degenerate {
        if card.knife_edge {
            (CheckStatus::Pass, "published NO-BAILOUT and no bailouts observed".to_string())
        } else {
            (CheckStatus::NotIdentified, "no positive bailouts".to_string())
        }
    } else {
        let tol_lo = knot_tolerance(data, rule, card.theta_lo);
        let lo_ok = (rule.theta1 - card.theta_lo).abs() <= tol_lo;
        let hi_seen = card.theta_hi.is_finite() && card.theta_hi < theta_max && card.theta_hi > theta_min;
        let mut detail = format!(
            "theta1 {:.6} vs theta_lo {:.6} (tolerance {:.6})",
            rule.theta1, card.theta_lo, tol_lo
        );
        let status = if !hi_seen {
            let _ = write!(detail, "; theta_hi {} outside the observed shocks", card.theta_hi);
            if lo_ok { CheckStatus::NotIdentified } else { CheckStatus::Fail }
        } else {
            let tol_hi = knot_tolerance(data, rule, card.theta_hi);
            let hi_ok = (rule.theta2 - card.theta_hi).abs() <= tol_hi;
            let _ = write!(
                detail,
                "; theta2 {:.6} vs theta_hi {:.6} (tolerance {:.6})",
                rule.theta2, card.theta_hi, tol_hi
            );
            if lo_ok && hi_ok { CheckStatus::Pass } else { CheckStatus::Fail }
        };
        (status, detail)
    };
    out.push(SignatureCheck { name: "card match", status, detail });
    out
}

/// Runs the audit. `after` is data from a second institutional regime.
pub fn run_audit(
    resolved: &Resolved,
    data: &[Episode],
    after: Option<&[Episode]>,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    let section = resolved.audit();
    let p = &resolved.params;
    let mut fit_opts = FitOptions::new(p.threshold).with_family(section.family.unwrap_or(BenefitFamily::Linear));
    if let Some(k) = opts.knot_grid.or(section.knot_grid) {
        fit_opts = fit_opts.with_knot_grid(k);
    }
    let card = rulecard::build(resolved, None)?;
    let primary = fit_regime(data, &fit_opts)?;
    let tol = opts.tol.or(section.tol).unwrap_or_else(|| default_tolerance(data, &primary.rule));
    let labels = classify_episodes(data, &primary.rule, tol);
    let counts = RegimeCounts::tally(&labels);
    debug_assert_eq!(counts.total(), data.len());
    let checks = checks(data, &card, &primary, &labels);

    let mut attribution_tol = 0.0;
    let (after_fit, attribution) = match after {
        Some(next) => {
            let rf = fit_regime(next, &fit_opts)?;
            let knot_tol = [
                knot_tolerance(data, &primary.rule, primary.rule.theta1),
                knot_tolerance(data, &primary.rule, primary.rule.theta2),
                knot_tolerance(next, &rf.rule, rf.rule.theta1),
                knot_tolerance(next, &rf.rule, rf.rule.theta2),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            attribution_tol = 2.0 * p.omega_b * knot_tol * (1.0f64).max(1.0 / p.c);
            let announced = match (section.announced_d_omega_t, section.announced_d_b_bar) {
                (None, None) => None,
                (w, b) => Some(AnnouncedShift {
                    d_omega_t: w.unwrap_or(0.0),
                    d_b_bar: b.unwrap_or(0.0),
                }),
            };
            let attr = attribute_shift(&primary.rule, &rf.rule, p.omega_b, p.c, announced, attribution_tol)?;
            (Some(rf), Some(attr))
        }
        None => (None, None),
    };

    Ok(AuditReport {
        card,
        primary,
        tol,
        labels,
        counts,
        checks,
        after: after_fit,
        attribution,
        attribution_tol,
    })
}

fn write_fit(s: &mut String, title: &str, rf: &RegimeFit) {
    let f = &rf.fit;
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "  episodes: {}", f.n_obs);
    let _ = writeln!(s, "  slope s: {:.6}", f.s);
    let _ = writeln!(s, "  theta1: {:.6}", f.theta1);
    let _ = writeln!(s, "  theta2: {:.6}", f.theta2);
    let _ = writeln!(s, "  cap level: {:.6}", f.cap_level);
    let _ = writeln!(s, "  sse: {:.6e}", f.sse);
    let _ = writeln!(s, "  residual s.e.: {:.6e}", f.rse());
    let _ = writeln!(
        s,
        "  knot grid: {} intervals, spacing {:.6}, {} knot pairs evaluated",
        f.knot_grid, f.knot_resolution, f.candidates
    );
    let _ = writeln!(
        s,
        "  flags: degenerate={} no_interior={} structural_slope={}",
        f.degenerate, f.no_interior, f.structural_slope
    );
    let o = &rf.overrides;
    if !o.identified {
        let _ = writeln!(
            s,
            "  cap-region dummy: not identified ({} episodes above theta2)",
            o.n_cap_region
        );
        return;
    }
    let _ = writeln!(
        s,
        "  cap-region dummy: {:.6} (s.e. {:.6e}, {:.3} x residual s.e., F = {:.3}) over {} episodes",
        o.dummy, o.dummy_se, o.dummy_over_rse, o.f_ratio, o.n_cap_region
    );
    let _ = writeln!(s, "  systematic override: {}", o.systematic);
    let _ = writeln!(
        s,
        "  interior slope with dummy: {:.6}; netted plain refit: {:.6}; shift {:.4}; changed: {}",
        o.refit_s, o.baseline_s, o.slope_shift, o.slope_changed
    );
    if o.systematic {
        let r = &rf.rule;
        let _ = writeln!(
            s,
            "  rule after removing the override: s {:.6}, theta1 {:.6}, theta2 {:.6}, cap level {:.6}",
            r.s, r.theta1, r.theta2, r.cap_level
        );
    }
}

/// Plain-text report.
pub fn render_report(r: &AuditReport, data: &[Episode]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "COMPLIANCE AUDIT");
    let _ = writeln!(
        s,
        "published rule: theta_lo {:.6}, theta_hi {:.6}, slope {:.6}, cap {}, threshold {}",
        r.card.theta_lo, r.card.theta_hi, r.card.interior_slope, r.card.b_bar, r.card.threshold
    );
    let _ = writeln!(s, "config sha256: {}", r.card.config_sha256);
    let _ = writeln!(s);
    write_fit(&mut s, "FIT", &r.primary);
    let _ = writeln!(s);
    let _ = writeln!(s, "CLASSIFICATION (tolerance {:.6e})", r.tol);
    let _ = writeln!(s, "  zero: {}", r.counts.zero);
    let _ = writeln!(s, "  interior: {}", r.counts.interior);
    let _ = writeln!(s, "  cap: {}", r.counts.cap);
    let _ = writeln!(s, "  override: {}", r.counts.overrides);
    let _ = writeln!(s, "  total: {}", r.counts.total());
    let (mut in_cap, mut below_cap) = (0, 0);
    for (e, l) in data.iter().zip(&r.labels) {
        if *l == Regime::Override {
            if e.theta > r.primary.rule.theta2 {
                in_cap += 1;
            } else {
                below_cap += 1;
            }
        }
    }
    let _ = writeln!(s, "  overrides in cap region: {in_cap}; elsewhere: {below_cap}");
    let _ = writeln!(s);
    let _ = writeln!(s, "SIGNATURE CHECKS");
    for c in &r.checks {
        let _ = writeln!(s, "  {}: {} ({})", c.name, c.status.as_str(), c.detail);
    }
    if let (Some(after), Some(a)) = (&r.after, &r.attribution) {
        let _ = writeln!(s);
        write_fit(&mut s, "SECOND REGIME FIT", after);
        let _ = writeln!(s);
        let _ = writeln!(s, "SHIFT ATTRIBUTION");
        let _ = writeln!(s, "  delta theta1: {:.6}", a.delta_theta1);
        let _ = writeln!(s, "  delta theta2: {:.6}", a.delta_theta2);
        if a.omega_t_identified {
            let _ = writeln!(s, "  implied delta omega_t: {:.6}", a.implied_d_omega_t);
        } else {
            let _ = writeln!(s, "  implied delta omega_t: not identified (theta1 pinned at the threshold)");
        }
        let _ = writeln!(s, "  implied delta b_bar: {:.6}", a.implied_d_b_bar);
        let _ = writeln!(
            s,
            "  decomposition of delta theta2: cost {:.6} + cap {:.6}",
            a.cost_component, a.cap_component
        );
        let _ = writeln!(s, "  bundle consistent: {}", a.bundle_consistent);
        match (a.announced, a.announced_match) {
            (Some(ann), Some(ok)) => {
                let _ = writeln!(
                    s,
                    "  announced delta omega_t {}, delta b_bar {}: {} (tolerance {:.6})",
                    ann.d_omega_t,
                    ann.d_b_bar,
                    if ok { "CONSISTENT" } else { "INCONSISTENT" },
                    r.attribution_tol
                );
            }
            _ => {
                let _ = writeln!(s, "  announced changes: none given");
            }
        }
    }
    s
}

/// Report written when the fit itself cannot be produced.
pub fn render_failure(message: &str, data: &[Episode]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "COMPLIANCE AUDIT");
    let _ = writeln!(s, "status: ESTIMATION FAILED");
    let _ = writeln!(s, "reason: {message}");
    let _ = writeln!(s, "episodes: {}", data.len());
    let distinct = {
        let mut t: Vec<f64> = data.iter().map(|e| e.theta).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t.len()
    };
    let _ = writeln!(s, "distinct shocks: {distinct}");
    let positive = data.iter().filter(|e| e.b > 0.0).count();
    let _ = writeln!(s, "positive bailouts: {positive}");
    s
}

/// Episodes with their audit labels, in input order.
pub fn labelled(data: &[Episode], labels: &[Regime]) -> Vec<Episode> {
    data.iter()
        .zip(labels)
        .map(|(e, &l)| Episode { regime: Some(l), ..*e })
        .collect()
}

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::Zero => "#7f8c8d",
        Regime::Interior => "#2980b9",
        Regime::Cap => "#27ae60",
        Regime::Override => "#c0392b",
    }
}

/// Scatter by regime with the fitted schedule and the published rule.
pub fn render_plot(r: &AuditReport, data: &[Episode], resolved: &Resolved) -> String {
    let mut chart = Chart::new("Realized bailouts against the published rule", "shock theta", "bailout b");
    for regime in [Regime::Zero, Regime::Interior, Regime::Cap, Regime::Override] {
        let xy: Vec<(f64, f64)> = data
            .iter()
            .zip(&r.labels)
            .filter(|(_, &l)| l == regime)
            .map(|(e, _)| (e.theta, e.b))
            .collect();
        if !xy.is_empty() {
            chart.points(xy, regime_color(regime), regime.as_str());
        }
    }
    let lo = data.iter().map(|e| e.theta).fold(f64::INFINITY, f64::min).min(0.0);
    let hi = data.iter().map(|e| e.theta).fold(f64::NEG_INFINITY, f64::max);
    let grid = 400;
    let xs: Vec<f64> = (0..=grid).map(|k| lo + (hi - lo) * k as f64 / grid as f64).collect();
    let rule = &r.primary.rule;
    let mut knots = vec![rule.theta1, rule.theta2];
    knots.retain(|t| t.is_finite() && *t > lo && *t < hi);
    let mut fx = xs.clone();
    fx.extend(knots);
    fx.sort_by(f64::total_cmp);
    chart.line(fx.iter().map(|&t| (t, rule.predict(t))).collect(), "#000000", "fitted", false);
    let p = &resolved.params;
    let card_line: Vec<(f64, f64)> = xs
        .iter()
        .filter_map(|&t| tlc_policy_linear(t.min(p.theta_bar).max(0.0), p).ok().map(|b| (t, b)))
        .collect();
    chart.line(card_line, "#e67e22", "published", true);
    chart.vrule(r.card.theta_lo, "#8e44ad", "theta_lo");
    if r.card.theta_hi <= hi {
        chart.vrule(r.card.theta_hi, "#8e44ad", "theta_hi");
    }
    chart.render()
}
