//! One-parameter sweeps of the cutoffs and the consent cap.

use std::fmt::Write;

use tlc_core::mechanism::{cutoffs, knife_edge, MechanismParams};
use tlc_core::voting::{bundle_check, Levers};

use crate::config::{Resolved, SweepParam};
use crate::error::{CliError, Result};
use crate::svg::Chart;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Change in `b_bar` per unit of `omega_t` when sweeping `omega_t`.
    pub coupled_b_bar_slope: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(CliError::Validation(format!("sweep: steps = {} must be at least 2", self.steps)));
        }
        if !self.from.is_finite() || !self.to.is_finite() || self.from == self.to {
            return Err(CliError::Validation(format!(
                "sweep: range [{}, {}] must be finite and non-empty",
                self.from, self.to
            )));
        }
        if self.coupled_b_bar_slope.is_some() && self.parameter != SweepParam::OmegaT {
            return Err(CliError::Validation("sweep: a coupled b_bar schedule needs parameter omega_t".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k == self.steps - 1 { self.to } else { self.from + (self.to - self.from) * k as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub b_bar: f64,
    pub knife_edge: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

fn params_at(resolved: &Resolved, spec: &SweepSpec, v: f64) -> Result<MechanismParams> {
    let base = resolved.params;
    let legislated = resolved.config.legislature.is_some();
    Ok(match spec.parameter {
        SweepParam::OmegaT => {
            let p = base.with_omega_t(v);
            match spec.coupled_b_bar_slope {
                Some(k) => p.with_b_bar((base.b_bar + k * (v - base.omega_t)).max(0.0)),
                None => p,
            }
        }
        SweepParam::BBar => base.with_b_bar(v),
        SweepParam::Tau => {
            if !legislated {
                return Err(CliError::Validation("sweep: tau needs a [legislature] section".into()));
            }
            base.with_b_bar(resolved.cap_for(base.threshold, Some(v), None)?)
        }
        SweepParam::WB => {
            if !legislated {
                return Err(CliError::Validation("sweep: w_b needs a [legislature] section".into()));
            }
            base.with_b_bar(resolved.cap_for(base.threshold, None, Some(v))?)
        }
        SweepParam::Threshold => {
            let p = base.with_threshold(v);
            if legislated {
                p.with_b_bar(resolved.cap_for(v, None, None)?)
            } else {
                p
            }
        }
    })
}

pub fn run_sweep(resolved: &Resolved, spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    if let Some(k) = spec.coupled_b_bar_slope {
        if !k.is_finite() {
            return Err(CliError::Validation("sweep: coupled b_bar slope must be finite".into()));
        }
    }
    let mut rows = Vec::with_capacity(spec.steps);
    let mut prev: Option<Levers> = None;
    for v in spec.values() {
        let p = params_at(resolved, spec, v)?;
        let levers = Levers {
            omega_t: p.omega_t,
            b_bar: p.b_bar,
        };
        if spec.coupled_b_bar_slope.is_some() {
            if let Some(q) = prev {
                if !(bundle_check(q, levers) && bundle_check(levers, q)) {
                    return Err(CliError::Validation(format!(
                        "sweep refused: moving omega_t from {} to {} raises b_bar from {} to {}; \
                         a higher political cost must come with a weakly tighter cap",
                        q.omega_t, levers.omega_t, q.b_bar, levers.b_bar
                    )));
                }
            }
            prev = Some(levers);
        }
        let cut = cutoffs(&p)?;
        rows.push(SweepRow {
            value: v,
            theta_lo: cut.theta_lo,
            theta_hi: cut.theta_hi,
            b_bar: p.b_bar,
            knife_edge: knife_edge(&p)?,
        });
    }
    Ok(SweepResult { spec: *spec, rows })
}

impl SweepResult {
    /// Average finite-difference slope of `theta_hi` against the swept value
    /// over steps where the upper cutoff is finite and strictly above the
    /// lower one at both ends.
    pub fn theta_hi_slope(&self) -> Option<f64> {
        let mut acc = Vec::new();
        for w in self.rows.windows(2) {
            let ok = |r: &SweepRow| r.theta_hi.is_finite() && r.theta_hi > r.theta_lo;
            if ok(&w[0]) && ok(&w[1]) {
                acc.push((w[1].theta_hi - w[0].theta_hi) / (w[1].value - w[0].value));
            }
        }
        if acc.is_empty() {
            None
        } else {
            Some(acc.iter().sum::<f64>() / acc.len() as f64)
        }
    }

    /// Analytic slope of `theta_hi` where one exists in closed form.
    pub fn analytic_theta_hi_slope(&self, params: &MechanismParams) -> Option<f64> {
        match self.spec.parameter {
            SweepParam::OmegaT => Some((1.0 + params.c * self.spec.coupled_b_bar_slope.unwrap_or(0.0)) / params.omega_b),
            SweepParam::BBar => Some(params.c / params.omega_b),
            _ => None,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Validation(format!("csv: {e}"));
        w.write_record(["value", "theta_lo", "theta_hi", "b_bar", "knife_edge"]).map_err(fail)?;
        for r in &self.rows {
            w.write_record([
                fmt(r.value),
                fmt(r.theta_lo),
                fmt(r.theta_hi),
                fmt(r.b_bar),
                r.knife_edge.to_string(),
            ])
            .map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Validation(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self, params: &MechanismParams) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "swept {} over [{}, {}] in {} steps",
            self.spec.parameter.as_str(),
            self.spec.from,
            self.spec.to,
            self.spec.steps
        );
        match self.theta_hi_slope() {
            Some(fd) => {
                let _ = write!(s, "d theta_hi / d {}: {:.6}", self.spec.parameter.as_str(), fd);
                if let Some(a) = self.analytic_theta_hi_slope(params) {
                    let _ = write!(s, " (analytic {a:.6})");
                }
                s.push('\n');
            }
            None => {
                let _ = writeln!(s, "d theta_hi: no steps with a finite interior upper cutoff");
            }
        }
        let knife = self.rows.iter().filter(|r| r.knife_edge).count();
        let _ = writeln!(s, "knife-edge rows: {knife} of {}", self.rows.len());
        s
    }

    pub fn render_plot(&self) -> String {
        let name = self.spec.parameter.as_str();
        let mut chart = Chart::new(&format!("Cutoffs and cap against {name}"), name, "value");
        let series = |f: fn(&SweepRow) -> f64| -> Vec<(f64, f64)> {
            self.rows.iter().map(|r| (r.value, f(r))).filter(|(_, y)| y.is_finite()).collect()
        };
        chart
            .line(series(|r| r.theta_lo), "#2980b9", "theta_lo", false)
            .line(series(|r| r.theta_hi), "#c0392b", "theta_hi", false)
            .line(series(|r| r.b_bar), "#27ae60", "b_bar", true);
        let knife: Vec<(f64, f64)> = self.rows.iter().filter(|r| r.knife_edge).map(|r| (r.value, 0.0)).collect();
        if !knife.is_empty() {
            chart.points(knife, "#000000", "knife-edge");
        }
        chart.render()
    }
}

fn fmt(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    const CFG: &str = "\
[mechanism]
omega_b = 2.0
c = 4.0
omega_t = 1.0
threshold = 0.1
b_bar = 0.5
theta_bar = 2.0
";

    fn spec(parameter: SweepParam, from: f64, to: f64) -> SweepSpec {
        SweepSpec {
            parameter,
            from,
            to,
            steps: 11,
            coupled_b_bar_slope: None,
        }
    }

    #[test]
    fn omega_t_sweep_has_slope_one_over_omega_b() {
        let r = parse(CFG, "c.toml").unwrap();
        let out = run_sweep(&r, &spec(SweepParam::OmegaT, 0.5, 1.5)).unwrap();
        assert!((out.theta_hi_slope().unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(out.rows.first().unwrap().value, 0.5);
        assert_eq!(out.rows.last().unwrap().value, 1.5);
    }

    #[test]
    fn b_bar_sweep_has_slope_c_over_omega_b() {
        let r = parse(CFG, "c.toml").unwrap();
        let out = run_sweep(&r, &spec(SweepParam::BBar, 0.1, 0.5)).unwrap();
        assert!((out.theta_hi_slope().unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn coupled_sweep_against_the_bundle_is_refused() {
        let r = parse(CFG, "c.toml").unwrap();
        let mut s = spec(SweepParam::OmegaT, 0.5, 1.5);
        s.coupled_b_bar_slope = Some(0.1);
        let err = run_sweep(&r, &s).unwrap_err();
        assert!(err.to_string().contains("refused"), "{err}");
        s.coupled_b_bar_slope = Some(-0.1);
        let out = run_sweep(&r, &s).unwrap();
        assert!((out.theta_hi_slope().unwrap() - (1.0 - 0.4) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn tau_sweep_needs_a_legislature() {
        let r = parse(CFG, "c.toml").unwrap();
        assert!(run_sweep(&r, &spec(SweepParam::Tau, 0.1, 0.9)).is_err());
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let r = parse(CFG, "c.toml").unwrap();
        let csv = run_sweep(&r, &spec(SweepParam::BBar, 0.0, 1.0)).unwrap().to_csv().unwrap();
        assert!(csv.starts_with("value,theta_lo,theta_hi,b_bar,knife_edge\n"));
        assert_eq!(csv.lines().count(), 12);
        assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
    }
}
