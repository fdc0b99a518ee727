//! Ex-post compliance: episode classification, cap-override detection and
//! attribution of knot shifts to institutional levers.

use serde::{Deserialize, Serialize};

use super::fit::{
    check_fit_input, consider, fit_tlc, knot_candidates, Best, DummyEval, Episode, FitOptions, Profile, Regime, TlcFit,
};
use crate::error::{check, Result};
use crate::voting::{bundle_check, Levers};

/// Relative slope movement that counts as a change in the interior rule.
pub const SLOPE_SHIFT_LIMIT: f64 = 0.05;
/// Critical value of the F-ratio of the dummy refit against the plain fit.
///
/// The refit also searches the upper knot, so the ratio is not F-distributed;
/// the value sits above the simulated 99th null percentile (about 12) across
/// sample sizes 60 to 1000.
pub const OVERRIDE_F_CRIT: f64 = 15.0;
/// Relative floor of the default compliance tolerance.
pub const TOL_FLOOR: f64 = 1e-6;

/// Twice the residual standard error, floored at `TOL_FLOOR` times the
/// bailout scale so that exact data are not judged on rounding noise.
pub fn default_tolerance(data: &[Episode], fit: &TlcFit) -> f64 {
    let scale = data.iter().map(|e| e.b.abs()).fold(1.0, f64::max);
    (2.0 * fit.rse()).max(TOL_FLOOR * scale)
}

pub fn classify_episode(e: &Episode, fit: &TlcFit, tol: f64) -> Regime {
    if e.theta < fit.theta1 {
        if e.b.abs() <= tol {
            return Regime::Zero;
        }
    } else if e.theta <= fit.theta2 {
        if (e.b - fit.s * (e.theta - fit.theta1)).abs() <= tol {
            return Regime::Interior;
        }
    } else if (e.b - fit.cap_level).abs() <= tol {
        return Regime::Cap;
    }
    Regime::Override
}

pub fn classify_episodes(data: &[Episode], fit: &TlcFit, tol: f64) -> Vec<Regime> {
    data.iter().map(|e| classify_episode(e, fit, tol)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegimeCounts {
    pub zero: usize,
    pub interior: usize,
    pub cap: usize,
    pub overrides: usize,
}

impl RegimeCounts {
    pub fn tally(labels: &[Regime]) -> Self {
        let mut c = Self::default();
        for r in labels {
            match r {
                Regime::Zero => c.zero += 1,
                Regime::Interior => c.interior += 1,
                Regime::Cap => c.cap += 1,
                Regime::Override => c.overrides += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.zero + self.interior + self.cap + self.overrides
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideReport {
    /// False when fewer than two episodes lie above the fitted upper knot.
    pub identified: bool,
    pub n_cap_region: usize,
    /// Additive shift of the cap-region level.
    pub dummy: f64,
    pub dummy_se: f64,
    /// Dummy divided by the residual standard error of the refit.
    pub dummy_over_rse: f64,
    /// t-ratio conditional on the selected knots.
    pub dummy_t: f64,
    /// `(sse_plain - sse_dummy) / (sse_dummy / (n - 4))`.
    pub f_ratio: f64,
    pub systematic: bool,
    pub refit_s: f64,
    pub refit_theta1: f64,
    pub refit_theta2: f64,
    pub refit_sse: f64,
    /// Slope of a plain fit after the estimated override is netted out of
    /// the cap region.
    pub baseline_s: f64,
    /// `|refit_s - baseline_s| / baseline_s`.
    pub slope_shift: f64,
    pub slope_changed: bool,
}

impl OverrideReport {
    /// The rule implied by the refit, with the dummy stripped from the plateau.
    pub fn rule_fit(&self, fit: &TlcFit) -> TlcFit {
        let mut out = fit.clone();
        out.s = self.refit_s;
        out.theta1 = self.refit_theta1;
        out.theta2 = self.refit_theta2;
        out.cap_level = self.refit_s * (self.refit_theta2 - self.refit_theta1);
        out.sse = self.refit_sse;
        out
    }

    fn not_identified(fit: &TlcFit, n_cap_region: usize) -> Self {
        Self {
            identified: false,
            n_cap_region,
            dummy: 0.0,
            dummy_se: f64::NAN,
            dummy_over_rse: 0.0,
            dummy_t: 0.0,
            f_ratio: 0.0,
            systematic: false,
            refit_s: fit.s,
            refit_theta1: fit.theta1,
            refit_theta2: fit.theta2,
            refit_sse: fit.sse,
            baseline_s: fit.s,
            slope_shift: 0.0,
            slope_changed: false,
        }
    }
}

/// Refits with a free level shift on `theta > theta2`, searching knots again.
///
/// The slope then comes only from the linear segment, so a constant
/// override in the cap region leaves it unaffected. The slope flag compares
/// it with a plain refit on the data with the estimated override netted out.
pub fn detect_override_shift(data: &[Episode], fit: &TlcFit) -> Result<OverrideReport> {
    let n_cap_region = data.iter().filter(|e| e.theta > fit.theta2).count();
    if n_cap_region < 2 {
        return Ok(OverrideReport::not_identified(fit, n_cap_region));
    }
    check_fit_input(data, fit.threshold)?;
    let profile = Profile::new(data);
    let (cands, _) = knot_candidates(&profile, fit.threshold, fit.knot_grid);
    let le: Vec<usize> = cands.iter().map(|&t| profile.count_le(t)).collect();

    let mut best: Option<Best<DummyEval>> = None;
    for a in 0..cands.len() {
        for z in a..cands.len() {
            let e = profile.dummy_blocks(cands[a], cands[z], le[a], le[z]);
            consider(&mut best, cands[a], cands[z], e, e.sse);
        }
    }
    let threshold = fit.threshold;
    profile.block_proposals(true, |t1, t2| {
        if t1 >= threshold && t2 >= t1 {
            let e = profile.dummy(t1, t2);
            consider(&mut best, t1, t2, e, e.sse);
        }
    });
    let mut best = best.expect("at least one candidate pair");
    if best.eval.n_cap < 2 || best.eval.s == 0.0 {
        return Ok(OverrideReport::not_identified(fit, n_cap_region));
    }
    // Every upper knot in the gap below the first cap-region shock fits
    // equally well; take the one the plateau itself implies, so that the
    // dummy only carries what no compliant schedule can explain.
    let j2 = profile.count_le(best.t2);
    let gap_lo = if j2 > 0 { profile.theta[j2 - 1].max(best.t1) } else { best.t1 };
    let gap_hi = profile.theta[j2];
    let implied = best.t1 + (best.eval.delta + best.eval.s * (best.t2 - best.t1)) / best.eval.s;
    let t2 = implied.clamp(gap_lo, gap_lo.max(gap_hi - (gap_hi - gap_lo) * 1e-9));
    if t2 != best.t2 {
        let e = profile.dummy(best.t1, t2);
        if e.n_cap == best.eval.n_cap {
            best.t2 = t2;
            best.eval = e;
        }
    }

    let e = best.eval;
    let dof = data.len().saturating_sub(4).max(1) as f64;
    let rse = (e.sse / dof).sqrt();
    let dummy_se = rse * e.delta_var_factor.sqrt();
    let ratio = |x: f64, d: f64| if d > 0.0 { x / d } else if x == 0.0 { 0.0 } else { f64::INFINITY.copysign(x) };
    let dummy_t = ratio(e.delta, dummy_se);
    let f_ratio = ratio((fit.sse - e.sse).max(0.0), e.sse / dof);
    let scale = data.iter().map(|e| e.b.abs()).fold(1.0, f64::max);
    let netted: Vec<Episode> = data
        .iter()
        .map(|d| {
            let b = if d.theta > best.t2 { (d.b - e.delta).max(0.0) } else { d.b };
            Episode::new(d.theta, b)
        })
        .collect();
    let options = FitOptions::new(fit.threshold).with_knot_grid(fit.knot_grid);
    let baseline_s = fit_tlc(&netted, &options)?.s;
    let slope_shift = if baseline_s > 0.0 { (e.s - baseline_s).abs() / baseline_s } else { 0.0 };
    Ok(OverrideReport {
        identified: true,
        n_cap_region,
        dummy: e.delta,
        dummy_se,
        dummy_over_rse: ratio(e.delta, rse),
        dummy_t,
        f_ratio,
        systematic: f_ratio > OVERRIDE_F_CRIT && e.delta.abs() > TOL_FLOOR * scale,
        refit_s: e.s,
        refit_theta1: best.t1,
        refit_theta2: best.t2,
        refit_sse: e.sse,
        baseline_s,
        slope_shift,
        slope_changed: slope_shift > SLOPE_SHIFT_LIMIT,
    })
}

/// Announced changes of the two institutional levers between regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnouncedShift {
    pub d_omega_t: f64,
    pub d_b_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftAttribution {
    pub delta_theta1: f64,
    pub delta_theta2: f64,
    /// `omega_b * delta_theta1`; assumed zero when not identified.
    pub implied_d_omega_t: f64,
    pub implied_d_b_bar: f64,
    /// `implied_d_omega_t / omega_b`.
    pub cost_component: f64,
    /// `c * implied_d_b_bar / omega_b`.
    pub cap_component: f64,
    /// False when the lower knot sits on the threshold in either regime.
    pub omega_t_identified: bool,
    /// The implied lever movements respect the political bundle.
    pub bundle_consistent: bool,
    pub announced: Option<AnnouncedShift>,
    /// Each announced lever change is matched within the tolerance.
    pub announced_match: Option<bool>,
}

/// True when the lower knot is held at the threshold.
pub fn pinned_at_threshold(fit: &TlcFit) -> bool {
    (fit.theta1 - fit.threshold).abs() <= 1e-9 * fit.threshold.abs().max(1.0)
}

/// Splits the movement of the knots into a political-cost part and a cap part.
pub fn attribute_shift(
    before: &TlcFit,
    after: &TlcFit,
    omega_b: f64,
    c: f64,
    announced: Option<AnnouncedShift>,
    tol: f64,
) -> Result<ShiftAttribution> {
    check(omega_b > 0.0 && omega_b.is_finite(), "omega_b", omega_b, "must be positive and finite")?;
    check(c > 0.0 && c.is_finite(), "c", c, "must be positive and finite")?;
    check(tol >= 0.0, "tol", tol, "must be non-negative")?;
    let delta_theta1 = after.theta1 - before.theta1;
    let delta_theta2 = after.theta2 - before.theta2;
    let omega_t_identified = !pinned_at_threshold(before) && !pinned_at_threshold(after);
    let implied_d_omega_t = if omega_t_identified { omega_b * delta_theta1 } else { 0.0 };
    let implied_d_b_bar = (omega_b * delta_theta2 - implied_d_omega_t) / c;
    let announced_match = announced.map(|a| {
        let cap_ok = (a.d_b_bar - implied_d_b_bar).abs() <= tol;
        let cost_ok = !omega_t_identified || (a.d_omega_t - implied_d_omega_t).abs() <= tol;
        cap_ok && cost_ok
    });
    let bundle_consistent = bundle_check(
        Levers { omega_t: 0.0, b_bar: 0.0 },
        Levers {
            omega_t: implied_d_omega_t,
            b_bar: implied_d_b_bar,
        },
    );
    Ok(ShiftAttribution {
        delta_theta1,
        delta_theta2,
        implied_d_omega_t,
        implied_d_b_bar,
        cost_component: implied_d_omega_t / omega_b,
        cap_component: c * implied_d_b_bar / omega_b,
        omega_t_identified,
        bundle_consistent,
        announced,
        announced_match,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(s: f64, t1: f64, t2: f64, threshold: f64) -> TlcFit {
        TlcFit {
            s,
            theta1: t1,
            theta2: t2,
            sse: 0.0,
            cap_level: s * (t2 - t1),
            n_obs: 10,
            threshold,
            knot_resolution: 0.01,
            knot_grid: 200,
            candidates: 0,
            degenerate: false,
            no_interior: false,
            structural_slope: true,
        }
    }

    fn rule(theta: f64, s: f64, t1: f64, t2: f64) -> f64 {
        s * (theta - t1).max(0.0).min(t2 - t1)
    }

    #[test]
    fn classification_examples() {
        let f = fit(1.0, 0.5, 1.5, 0.0);
        let c = |t, b| classify_episode(&Episode::new(t, b), &f, 0.01);
        assert_eq!(c(0.3, 0.0), Regime::Zero);
        assert_eq!(c(1.0, 0.5), Regime::Interior);
        assert_eq!(c(1.8, 1.7), Regime::Override);
        assert_eq!(c(1.8, 1.0), Regime::Cap);
        assert_eq!(c(0.3, 0.2), Regime::Override);
    }

    #[test]
    fn counts_sum_to_total() {
        let labels = [Regime::Zero, Regime::Cap, Regime::Cap, Regime::Override];
        let c = RegimeCounts::tally(&labels);
        assert_eq!((c.zero, c.interior, c.cap, c.overrides), (1, 0, 2, 1));
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn pure_cost_shift() {
        let a = attribute_shift(&fit(1.0, 0.5, 1.5, 0.0), &fit(1.0, 0.7, 1.7, 0.0), 1.0, 1.0, None, 1e-9).unwrap();
        assert!((a.implied_d_omega_t - 0.2).abs() < 1e-12);
        assert!(a.implied_d_b_bar.abs() < 1e-12);
        assert!(a.omega_t_identified);
        assert!((a.delta_theta2 - (a.cost_component + a.cap_component)).abs() < 1e-12);
    }

    #[test]
    fn cap_tightening_with_pinned_threshold() {
        let announced = AnnouncedShift {
            d_omega_t: 0.0,
            d_b_bar: -0.3,
        };
        let a = attribute_shift(
            &fit(1.0, 0.5, 1.5, 0.5),
            &fit(1.0, 0.5, 1.2, 0.5),
            1.0,
            1.0,
            Some(announced),
            1e-6,
        )
        .unwrap();
        assert!(!a.omega_t_identified);
        assert!((a.implied_d_b_bar + 0.3).abs() < 1e-12);
        assert_eq!(a.announced_match, Some(true));
        assert!(a.bundle_consistent);
    }

    #[test]
    fn bundle_violation_detected() {
        // Cost up and cap up together.
        let a = attribute_shift(&fit(1.0, 0.5, 1.5, 0.0), &fit(1.0, 0.7, 2.2, 0.0), 1.0, 1.0, None, 1e-9).unwrap();
        assert!(a.implied_d_omega_t > 0.0 && a.implied_d_b_bar > 0.0);
        assert!(!a.bundle_consistent);
    }

    fn jump_data(jump: f64) -> Vec<Episode> {
        (0..=200)
            .map(|i| {
                let t = i as f64 * 0.01;
                let b = rule(t, 0.5, 0.4, 1.2) + if t > 1.2 { jump } else { 0.0 };
                Episode::new(t, b)
            })
            .collect()
    }

    #[test]
    fn cap_jump_is_absorbed_by_dummy() {
        let data = jump_data(0.2);
        let f = fit_tlc(&data, &FitOptions::new(0.0)).unwrap();
        let r = detect_override_shift(&data, &f).unwrap();
        assert!(r.identified && r.systematic);
        // The jump is only located to within the sample spacing of 0.01.
        assert!((r.dummy - 0.2).abs() <= 0.5 * 0.01 + 1e-9, "{r:?}");
        assert!((r.refit_s - 0.5).abs() < 1e-9);
        assert!((1.2 - 1e-9..=1.21).contains(&r.refit_theta2));
        assert!(!r.slope_changed);
        assert!(!r.slope_changed);
        let rule_fit = r.rule_fit(&f);
        let labels = classify_episodes(&data, &rule_fit, 1e-6);
        for (e, l) in data.iter().zip(&labels) {
            assert_eq!(*l == Regime::Override, e.theta > 1.2 + 1e-9, "{e:?}");
        }
    }

    #[test]
    fn compliant_data_has_no_dummy() {
        let data = jump_data(0.0);
        let f = fit_tlc(&data, &FitOptions::new(0.0)).unwrap();
        let r = detect_override_shift(&data, &f).unwrap();
        assert!(r.identified && !r.systematic && !r.slope_changed);
        assert!(r.dummy.abs() < 1e-9);
    }

    #[test]
    fn no_cap_region_is_not_identified() {
        let data: Vec<Episode> = (0..=10).map(|i| Episode::new(i as f64 * 0.1, rule(i as f64 * 0.1, 1.0, 0.2, 5.0))).collect();
        let f = fit(1.0, 0.2, 5.0, 0.0);
        let r = detect_override_shift(&data, &f).unwrap();
        assert!(!r.identified && !r.slope_changed && !r.systematic);
    }

    #[test]
    fn default_tolerance_is_floored() {
        let data = jump_data(0.0);
        let f = fit_tlc(&data, &FitOptions::new(0.0)).unwrap();
        let tol = default_tolerance(&data, &f);
        assert!(tol >= TOL_FLOOR);
        assert!(classify_episodes(&data, &f, tol).iter().all(|r| *r != Regime::Override));
    }
}
