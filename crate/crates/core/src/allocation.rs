//! Bailouts for several municipalities under a common treasury limit.
//!
//! With the budget `sum b_i <= B` priced by a multiplier `lambda_b`, each
//! municipality follows its own schedule evaluated at `omega_t + lambda_b`.
//! Aggregate demand is continuous, piecewise linear and non-increasing in
//! `lambda_b`, so the clearing price is found by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result};
use crate::mechanism::{project, MechanismParams};

pub const BUDGET_TOL: f64 = 1e-8;
pub const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Municipality {
    pub params: MechanismParams,
    /// Realized shock.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub municipalities: Vec<Municipality>,
    pub budget: f64,
}

impl AllocationProblem {
    pub fn validate(&self) -> Result<()> {
        check(
            self.budget >= 0.0 && !self.budget.is_nan(),
            "budget",
            self.budget,
            "treasury limit must be non-negative",
        )?;
        for m in &self.municipalities {
            m.params.validate()?;
            if !(0.0..=m.params.theta_bar).contains(&m.theta) {
                return Err(Error::OutOfDomain {
                    what: "theta",
                    value: m.theta,
                    lo: 0.0,
                    hi: m.params.theta_bar,
                });
            }
        }
        Ok(())
    }

    /// Aggregate demand at treasury price `lambda`.
    pub fn demand(&self, lambda: f64) -> f64 {
        self.municipalities.iter().map(|m| priced(m, lambda)).sum()
    }
}

fn priced(m: &Municipality, lambda: f64) -> f64 {
    project(&m.params.with_omega_t(m.params.omega_t + lambda), m.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingFlag {
    Zero,
    Interior,
    Cap,
    /// The treasury price lowered this municipality's allocation below its
    /// unconstrained schedule.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub bailouts: Vec<f64>,
    pub lambda_b: f64,
    pub flags: Vec<BindingFlag>,
    pub bisections: usize,
}

impl AllocationResult {
    pub fn total(&self) -> f64 {
        self.bailouts.iter().sum()
    }
}

/// Budget-constrained allocation with its treasury shadow price.
pub fn allocate(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let unconstrained: Vec<f64> = problem.municipalities.iter().map(|m| priced(m, 0.0)).collect();
    let budget = problem.budget;

    let (lambda_b, bisections) = if unconstrained.iter().sum::<f64>() <= budget {
        (0.0, 0)
    } else {
        // Demand vanishes once lambda exceeds every omega_b * theta_i.
        let mut lo = 0.0_f64;
        let mut hi = problem
            .municipalities
            .iter()
            .map(|m| m.params.omega_b * m.theta)
            .fold(0.0, f64::max);
        let mut steps = 0;
        while steps < MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            steps += 1;
            if problem.demand(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // The upper end is always feasible.
        (hi, steps)
    };

    let bailouts: Vec<f64> = problem.municipalities.iter().map(|m| priced(m, lambda_b)).collect();
    let residual = budget - bailouts.iter().sum::<f64>();
    if lambda_b > 0.0 && residual.abs() > BUDGET_TOL {
        return Err(Error::NumericalInconsistency(format!(
            "budget residual {residual} after {bisections} bisections"
        )));
    }
    let flags = problem
        .municipalities
        .iter()
        .zip(&bailouts)
        .zip(&unconstrained)
        .map(|((m, &b), &free)| {
            if lambda_b > 0.0 && b < free {
                BindingFlag::Budget
            } else if b == 0.0 {
                BindingFlag::Zero
            } else if b >= m.params.b_bar {
                BindingFlag::Cap
            } else {
                BindingFlag::Interior
            }
        })
        .collect();
    Ok(AllocationResult {
        bailouts,
        lambda_b,
        flags,
        bisections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapThreshold {
    pub index: usize,
    /// Shock at which this municipality reaches its cap, given the treasury price.
    pub theta_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapOrdering {
    pub lambda_b: f64,
    /// Sorted by `theta_cap`, ties by index.
    pub order: Vec<CapThreshold>,
    /// Among municipalities sharing `(omega_b, c)`, weakly higher
    /// `(omega_t, b_bar)` never reaches the cap earlier.
    pub monotone: bool,
}

/// Shocks at which each municipality hits its cap, `(omega_t + lambda_b + c b_bar) / omega_b`.
pub fn cap_ordering_report(problem: &AllocationProblem) -> Result<CapOrdering> {
    let lambda_b = allocate(problem)?.lambda_b;
    let mut order: Vec<CapThreshold> = problem
        .municipalities
        .iter()
        .enumerate()
        .map(|(index, m)| {
            let p = &m.params;
            CapThreshold {
                index,
                theta_cap: (p.omega_t + lambda_b + p.c * p.b_bar) / p.omega_b,
            }
        })
        .collect();
    let by_index: Vec<f64> = order.iter().map(|t| t.theta_cap).collect();
    order.sort_by(|a, b| a.theta_cap.total_cmp(&b.theta_cap).then(a.index.cmp(&b.index)));

    let ms = &problem.municipalities;
    let mut monotone = true;
    for i in 0..ms.len() {
        for j in 0..ms.len() {
            let (a, b) = (&ms[i].params, &ms[j].params);
            let comparable = a.omega_b == b.omega_b && a.c == b.c;
            if comparable && a.omega_t <= b.omega_t && a.b_bar <= b.b_bar && by_index[i] > by_index[j] {
                monotone = false;
            }
        }
    }
    Ok(CapOrdering {
        lambda_b,
        order,
        monotone,
    })
}

/// Exhaustive search over a `points`-per-axis grid of the summed objective
/// under box and budget constraints. Only practical for a handful of
/// municipalities; the CLI uses it as a cross-check.
pub fn grid_allocation(problem: &AllocationProblem, points: usize) -> Result<Vec<f64>> {
    problem.validate()?;
    let n = problem.municipalities.len();
    if n > 3 {
        return Err(Error::InvalidParameter {
            name: "municipalities",
            value: n as f64,
            reason: "grid search is limited to three municipalities",
        });
    }
    let points = points.max(2);
    let axes: Vec<Vec<f64>> = problem
        .municipalities
        .iter()
        .map(|m| {
            if m.theta < m.params.threshold || m.params.b_bar == 0.0 {
                return vec![0.0];
            }
            let top = if m.params.is_cap_unbounded() {
                m.params.interior(m.theta).max(0.0)
            } else {
                m.params.b_bar
            };
            (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect()
        })
        .collect();
    let payoff = |i: usize, b: f64| {
        let m = &problem.municipalities[i];
        let p = &m.params;
        p.omega_b * m.theta * b - p.omega_t * b - 0.5 * p.c * b * b
    };
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut idx = vec![0usize; n];
    loop {
        let b: Vec<f64> = (0..n).map(|i| axes[i][idx[i]]).collect();
        if b.iter().sum::<f64>() <= problem.budget + 1e-12 {
            let v: f64 = (0..n).map(|i| payoff(i, b[i])).sum();
            if v > best.0 {
                best = (v, b);
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best.1);
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
