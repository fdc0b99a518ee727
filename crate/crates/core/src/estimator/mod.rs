//! Two-knot hinge estimation of the bailout schedule and compliance audits.

mod compliance;
mod fit;

pub use compliance::{
    attribute_shift, classify_episode, classify_episodes, default_tolerance, detect_override_shift,
    pinned_at_threshold, AnnouncedShift, OverrideReport, RegimeCounts, ShiftAttribution, OVERRIDE_F_CRIT,
    SLOPE_SHIFT_LIMIT, TOL_FLOOR,
};
pub use fit::{
    fit_tlc, BenefitFamily, Episode, FitMethod, FitOptions, Regime, TlcFit, DEFAULT_KNOT_GRID, MIN_EPISODES,
};
