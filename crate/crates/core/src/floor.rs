//! Equity floors layered on the interior segment of the schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{cutoffs, tlc_policy_linear, Cutoffs, MechanismParams};

/// Points in the dominance check, on top of the floor's own knots.
pub const FLOOR_GRID_POINTS: usize = 1024;

const DOMINANCE_TOL: f64 = 1e-12;

/// Minimum essential-services floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EquityFloor {
    /// Floor running parallel to the interior line, `offset` above it:
    /// `b_min(theta) = offset + (omega_b theta - omega_t) / c`. It acts as a
    /// lower political cost `omega_t - c * offset` with the same slope.
    Parallel { offset: f64 },
    /// Weakly increasing piecewise-linear floor through `knots`, held flat
    /// beyond the first and last knot.
    Custom { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FloorClass {
    /// Parallel floor: the schedule stays TLC with a shifted lower cutoff.
    ScParallel,
    /// The floor never exceeds the interior line; the schedule is unchanged.
    ScDominated,
    /// The floor crosses the interior line and adds a kink.
    ExtraKink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlooredPayout {
    pub b: f64,
    pub class: FloorClass,
}

impl EquityFloor {
    pub fn validate(&self) -> Result<()> {
        match self {
            EquityFloor::Parallel { offset } => {
                if !offset.is_finite() {
                    return Err(Error::InvalidFloor(format!("offset {offset} is not finite")));
                }
            }
            EquityFloor::Custom { knots } => {
                if knots.is_empty() {
                    return Err(Error::InvalidFloor("custom floor needs at least one knot".into()));
                }
                for w in knots.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t1 <= t0 {
                        return Err(Error::InvalidFloor(format!(
                            "knot positions must be strictly increasing ({t0} then {t1})"
                        )));
                    }
                    if v1 < v0 {
                        return Err(Error::InvalidFloor(format!(
                            "floor decreases from {v0} to {v1} between {t0} and {t1}"
                        )));
                    }
                }
                if knots.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite() || v < 0.0) {
                    return Err(Error::InvalidFloor("knots must be finite with non-negative values".into()));
                }
            }
        }
        Ok(())
    }

    fn check_against(&self, params: &MechanismParams) -> Result<()> {
        self.validate()?;
        if let EquityFloor::Custom { knots } = self {
            if let Some(&(t, v)) = knots.iter().find(|&&(_, v)| v > params.b_bar) {
                return Err(Error::InvalidFloor(format!(
                    "floor value {v} at theta = {t} exceeds the cap {}",
                    params.b_bar
                )));
            }
        }
        Ok(())
    }

    /// Floor level at `theta`.
    pub fn value(&self, theta: f64, params: &MechanismParams) -> f64 {
        match self {
            EquityFloor::Parallel { offset } => offset + params.interior(theta),
            EquityFloor::Custom { knots } => piecewise_linear(knots, theta),
        }
    }
}

fn piecewise_linear(knots: &[(f64, f64)], x: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let j = knots.partition_point(|&(t, _)| t <= x);
    let (t0, v0) = knots[j - 1];
    let (t1, v1) = knots[j];
    v0 + (v1 - v0) * (x - t0) / (t1 - t0)
}

/// Cutoffs of the schedule under a parallel floor with the given offset.
///
/// The effective political cost `omega_t - c * offset` may be negative, in
/// which case the threshold pins the lower cutoff.
pub fn parallel_cutoffs(params: &MechanismParams, offset: f64) -> Result<Cutoffs> {
    params.validate()?;
    let omega_eff = params.omega_t - params.c * offset.max(0.0);
    let theta_lo = params.threshold.max(omega_eff / params.omega_b);
    let theta_hi = if params.b_bar == 0.0 {
        theta_lo
    } else {
        ((omega_eff + params.c * params.b_bar) / params.omega_b).max(theta_lo)
    };
    Ok(Cutoffs { theta_lo, theta_hi })
}

/// Classifies a floor against the schedule on `[theta_lo, theta_hi]`.
pub fn classify_floor(floor: &EquityFloor, params: &MechanismParams) -> Result<FloorClass> {
    floor.check_against(params)?;
    let cut = cutoffs(params)?;
    match floor {
        EquityFloor::Parallel { offset } if *offset > 0.0 => Ok(FloorClass::ScParallel),
        EquityFloor::Parallel { .. } => Ok(FloorClass::ScDominated),
        EquityFloor::Custom { knots } => {
            let (lo, hi) = (cut.theta_lo, cut.theta_hi.min(params.theta_bar));
            if hi < lo {
                return Ok(FloorClass::ScDominated);
            }
            let grid = (0..FLOOR_GRID_POINTS)
                .map(|i| lo + (hi - lo) * i as f64 / (FLOOR_GRID_POINTS - 1) as f64);
            let knot_points = knots.iter().map(|&(t, _)| t).filter(|t| (lo..=hi).contains(t));
            let dominated = grid
                .chain(knot_points)
                .chain([lo, hi])
                .all(|theta| floor.value(theta, params) <= params.interior(theta) + DOMINANCE_TOL);
            Ok(if dominated {
                FloorClass::ScDominated
            } else {
                FloorClass::ExtraKink
            })
        }
    }
}

/// Optimal bailout with an equity floor,
/// `clip(max(b_min(theta), b_int(theta)), 0, b_bar)` on the interior region.
///
/// Dominated floors return the unfloored schedule unchanged. Custom floors act
/// only on `[theta_lo, theta_hi]`; a parallel floor moves the lower cutoff
/// itself and therefore acts from its shifted cutoff onward.
pub fn apply_equity_floor(theta: f64, floor: &EquityFloor, params: &MechanismParams) -> Result<FlooredPayout> {
    let base = tlc_policy_linear(theta, params)?;
    let class = classify_floor(floor, params)?;
    let b = match (class, floor) {
        (FloorClass::ScDominated, _) => base,
        (_, EquityFloor::Parallel { .. }) => {
            if theta < params.threshold || params.b_bar == 0.0 {
                0.0
            } else {
                floor.value(theta, params).max(0.0).min(params.b_bar)
            }
        }
        (_, EquityFloor::Custom { .. }) => {
            let cut = cutoffs(params)?;
            if theta < cut.theta_lo || theta > cut.theta_hi || params.b_bar == 0.0 {
                base
            } else {
                floor
                    .value(theta, params)
                    .max(params.interior(theta))
                    .max(0.0)
                    .min(params.b_bar)
            }
        }
    };
    Ok(FlooredPayout { b, class })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MechanismParams {
        MechanismParams::new(1.0, 1.0, 0.5, 0.0, 10.0, 12.0).unwrap()
    }

    #[test]
    fn parallel_floor_example() {
        let p = params();
        let floor = EquityFloor::Parallel { offset: 0.1 };
        let out = apply_equity_floor(0.45, &floor, &p).unwrap();
        assert_eq!(out.class, FloorClass::ScParallel);
        assert!((out.b - 0.05).abs() < 1e-12);
        let cut = parallel_cutoffs(&p, 0.1).unwrap();
        assert!((cut.theta_lo - 0.4).abs() < 1e-12);
        // Same as the plain schedule under omega_t - c * offset.
        let shifted = p.with_omega_t(0.4);
        for i in 0..=1200 {
            let theta = i as f64 * 0.01;
            let a = apply_equity_floor(theta, &floor, &p).unwrap().b;
            let b = tlc_policy_linear(theta, &shifted).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_floor_is_dominated_and_bitwise_neutral() {
        let p = params();
        let floor = EquityFloor::Custom {
            knots: vec![(0.0, 0.0), (12.0, 0.0)],
        };
        for i in 0..=1200 {
            let theta = i as f64 * 0.01;
            let out = apply_equity_floor(theta, &floor, &p).unwrap();
            assert_eq!(out.class, FloorClass::ScDominated);
            assert_eq!(out.b.to_bits(), tlc_policy_linear(theta, &p).unwrap().to_bits());
        }
    }

    #[test]
    fn negative_parallel_offset_never_binds() {
        let p = params();
        let floor = EquityFloor::Parallel { offset: -0.3 };
        assert_eq!(classify_floor(&floor, &p).unwrap(), FloorClass::ScDominated);
        assert_eq!(
            apply_equity_floor(2.0, &floor, &p).unwrap().b,
            tlc_policy_linear(2.0, &p).unwrap()
        );
    }

    #[test]
    fn crossing_floor_has_extra_kink() {
        let p = params();
        // Flat floor at 1.0 from theta_lo = 0.5 crosses b_int = theta - 0.5 at 1.5.
        let floor = EquityFloor::Custom {
            knots: vec![(0.5, 1.0), (5.0, 1.0)],
        };
        assert_eq!(classify_floor(&floor, &p).unwrap(), FloorClass::ExtraKink);
        assert!((apply_equity_floor(1.0, &floor, &p).unwrap().b - 1.0).abs() < 1e-15);
        assert!((apply_equity_floor(3.0, &floor, &p).unwrap().b - 2.5).abs() < 1e-15);
        assert_eq!(apply_equity_floor(0.4, &floor, &p).unwrap().b, 0.0);
    }

    #[test]
    fn floor_validation() {
        let p = params();
        let decreasing = EquityFloor::Custom {
            knots: vec![(0.0, 1.0), (1.0, 0.5)],
        };
        assert!(matches!(
            apply_equity_floor(1.0, &decreasing, &p),
            Err(Error::InvalidFloor(_))
        ));
        let above_cap = EquityFloor::Custom {
            knots: vec![(0.0, 11.0)],
        };
        assert!(classify_floor(&above_cap, &p).is_err());
        let unordered = EquityFloor::Custom {
            knots: vec![(1.0, 0.0), (0.5, 0.1)],
        };
        assert!(unordered.validate().is_err());
        assert!(EquityFloor::Custom { knots: vec![] }.validate().is_err());
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let knots = [(0.0, 0.0), (1.0, 1.0), (3.0, 2.0)];
        assert_eq!(piecewise_linear(&knots, -1.0), 0.0);
        assert_eq!(piecewise_linear(&knots, 0.5), 0.5);
        assert_eq!(piecewise_linear(&knots, 1.0), 1.0);
        assert_eq!(piecewise_linear(&knots, 2.0), 1.5);
        assert_eq!(piecewise_linear(&knots, 9.0), 2.0);
    }
}
