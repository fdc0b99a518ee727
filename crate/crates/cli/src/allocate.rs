//! Treasury-constrained allocation across municipalities.
//!
//! ```toml
//! budget = 1.0
//!
//! [[municipality]]
//! omega_b = 1.0
//! c = 1.0
//! omega_t = 0.0
//! threshold = 0.0
//! b_bar = 10.0
//! theta_bar = 5.0
//! theta = 1.0
//! ```

use std::fmt::Write;
use std::path::Path;

use serde::Deserialize;
use tlc_core::allocation::{allocate, cap_ordering_report, grid_allocation, AllocationProblem, AllocationResult, BindingFlag, CapOrdering, Municipality};
use tlc_core::mechanism::MechanismParams;

use crate::config::locate;
use crate::error::{CliError, Result};

/// Points per axis of the verbose-mode grid check.
pub const ORACLE_POINTS: usize = 200;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    budget: f64,
    municipality: Vec<MunicipalityEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MunicipalityEntry {
    omega_b: f64,
    c: f64,
    omega_t: f64,
    threshold: f64,
    b_bar: f64,
    theta_bar: f64,
    theta: f64,
}

pub fn load_problem(path: &Path) -> Result<AllocationProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_problem(&text, &path.display().to_string())
}

pub fn parse_problem(text: &str, origin: &str) -> Result<AllocationProblem> {
    let file: ProblemFile =
        toml::from_str(text).map_err(|e| CliError::Validation(format!("{origin}: {}", e.to_string().trim_end())))?;
    if file.municipality.is_empty() {
        return Err(CliError::Validation(format!("{origin}: no [[municipality]] entries")));
    }
    let mut municipalities = Vec::with_capacity(file.municipality.len());
    for (i, m) in file.municipality.iter().enumerate() {
        let params = MechanismParams::new(m.omega_b, m.c, m.omega_t, m.threshold, m.b_bar, m.theta_bar)
            .map_err(|e| CliError::Validation(format!("{origin}: municipality {}: {e}", i + 1)))?;
        municipalities.push(Municipality { params, theta: m.theta });
    }
    let problem = AllocationProblem {
        municipalities,
        budget: file.budget,
    };
    problem.validate().map_err(|e| {
        let at = if e.to_string().contains("budget") {
            locate(text, "", "budget").map(|l| format!("{origin}:{l}")).unwrap_or_else(|| origin.to_string())
        } else {
            origin.to_string()
        };
        CliError::Validation(format!("{at}: {e}"))
    })?;
    Ok(problem)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub max_gap: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutput {
    pub result: AllocationResult,
    pub ordering: CapOrdering,
    pub oracle: Option<OracleCheck>,
}

/// Solves the problem; with `verbose`, also checks small instances against
/// exhaustive grid search.
pub fn run_allocate(problem: &AllocationProblem, verbose: bool) -> Result<AllocationOutput> {
    let result = allocate(problem)?;
    let ordering = cap_ordering_report(problem)?;
    let oracle = if verbose && problem.municipalities.len() <= 3 {
        let grid = grid_allocation(problem, ORACLE_POINTS)?;
        let step = problem
            .municipalities
            .iter()
            .map(|m| {
                let top = if m.params.is_cap_unbounded() {
                    m.params.interior(m.theta).max(0.0)
                } else {
                    m.params.b_bar
                };
                top / (ORACLE_POINTS - 1) as f64
            })
            .fold(0.0, f64::max);
        let tolerance = problem.municipalities.len() as f64 * step + 1e-9;
        let max_gap = grid
            .iter()
            .zip(&result.bailouts)
            .map(|(g, b)| (g - b).abs())
            .fold(0.0, f64::max);
        Some(OracleCheck {
            max_gap,
            tolerance,
            agrees: max_gap <= tolerance,
        })
    } else {
        None
    };
    Ok(AllocationOutput { result, ordering, oracle })
}

fn flag_str(f: BindingFlag) -> &'static str {
    match f {
        BindingFlag::Zero => "zero",
        BindingFlag::Interior => "interior",
        BindingFlag::Cap => "cap",
        BindingFlag::Budget => "budget",
    }
}

impl AllocationOutput {
    pub fn to_csv(&self, problem: &AllocationProblem) -> Result<String> {
        let mut theta_cap = vec![0.0; problem.municipalities.len()];
        for t in &self.ordering.order {
            theta_cap[t.index] = t.theta_cap;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Validation(format!("csv: {e}"));
        w.write_record(["index", "theta", "b", "flag", "theta_cap"]).map_err(fail)?;
        for (i, m) in problem.municipalities.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                m.theta.to_string(),
                self.result.bailouts[i].to_string(),
                flag_str(self.result.flags[i]).to_string(),
                theta_cap[i].to_string(),
            ])
            .map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Validation(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self, problem: &AllocationProblem) -> String {
        let r = &self.result;
        let mut s = String::new();
        let _ = writeln!(s, "municipalities: {}", problem.municipalities.len());
        let _ = writeln!(s, "budget: {}", problem.budget);
        let _ = writeln!(s, "allocated: {}", r.total());
        let _ = writeln!(s, "lambda_B: {}", r.lambda_b);
        let _ = writeln!(s, "bisection steps: {}", r.bisections);
        for (i, b) in r.bailouts.iter().enumerate() {
            let _ = writeln!(s, "  {}: b = {} [{}]", i + 1, b, flag_str(r.flags[i]));
        }
        let order: Vec<String> = self.ordering.order.iter().map(|t| (t.index + 1).to_string()).collect();
        let _ = writeln!(s, "cap order (earliest first): {}", order.join(", "));
        let _ = writeln!(s, "cap order monotone in (omega_t, b_bar): {}", self.ordering.monotone);
        if let Some(o) = &self.oracle {
            let _ = writeln!(
                s,
                "grid oracle: {} (max gap {:.3e}, tolerance {:.3e})",
                if o.agrees { "agrees" } else { "DISAGREES" },
                o.max_gap,
                o.tolerance
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "\
budget = 1.0

[[municipality]]
omega_b = 1.0
c = 1.0
omega_t = 0.0
threshold = 0.0
b_bar = 10.0
theta_bar = 5.0
theta = 1.0

[[municipality]]
omega_b = 1.0
c = 1.0
omega_t = 0.0
threshold = 0.0
b_bar = 10.0
theta_bar = 5.0
theta = 2.0
";

    #[test]
    fn worked_instance() {
        let p = parse_problem(TWO, "p.toml").unwrap();
        let out = run_allocate(&p, true).unwrap();
        assert!((out.result.lambda_b - 1.0).abs() < 1e-8);
        assert!(out.result.bailouts[0].abs() < 1e-8);
        assert!((out.result.bailouts[1] - 1.0).abs() < 1e-8);
        assert!(out.oracle.as_ref().unwrap().agrees);
        let csv = out.to_csv(&p).unwrap();
        assert!(csv.starts_with("index,theta,b,flag,theta_cap\n"));
        assert!(out.summary(&p).contains("lambda_B: "));
    }

    #[test]
    fn large_budget_is_slack() {
        let p = parse_problem(&TWO.replace("budget = 1.0", "budget = 10.0"), "p.toml").unwrap();
        let out = run_allocate(&p, false).unwrap();
        assert_eq!(out.result.lambda_b, 0.0);
        assert_eq!(out.result.bailouts, vec![1.0, 2.0]);
        assert!(out.oracle.is_none());
    }

    #[test]
    fn negative_budget_points_at_its_line() {
        let err = parse_problem(&TWO.replace("budget = 1.0", "budget = -1.0"), "p.toml").unwrap_err();
        assert!(err.to_string().starts_with("p.toml:1:"), "{err}");
    }
}
