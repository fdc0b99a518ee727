//! Threshold-linear-cap bailout policy.
//!
//! A bailout `b` at shock `theta` is zero below a lower cutoff, rises with slope
//! `omega_b / c` in between and is held at a consent cap `b_bar` above an upper
//! cutoff. The crate covers the closed-form and general concave solvers, caps
//! derived from weighted legislative votes, treasury-constrained allocation
//! across municipalities, and the two-knot hinge estimator used for audits.

pub mod allocation;
pub mod distribution;
pub mod error;
pub mod estimator;
pub mod floor;
pub mod general;
pub mod mechanism;
pub mod voting;

pub use allocation::{allocate, cap_ordering_report, AllocationProblem, AllocationResult, BindingFlag, Municipality};
pub use distribution::{hazard, Family, ShockDistribution};
pub use error::{Error, Result};
pub use estimator::{
    attribute_shift, classify_episodes, detect_override_shift, fit_tlc, Episode, FitOptions, OverrideReport, Regime,
    ShiftAttribution, TlcFit,
};
pub use floor::{apply_equity_floor, classify_floor, EquityFloor, FloorClass};
pub use general::{solve_kkt, tlc_policy_general, BenefitFn, KktBranch, LinearBenefit, MarginalBenefit};
pub use mechanism::{comparative_statics, cutoffs, knife_edge, tlc_policy_linear, ComparativeStatics, Cutoffs, MechanismParams};
pub use voting::{
    aggregate_support, bundle_check, consent_cap_analytic, empirical_cap, FiniteLegislature, Levers, ThresholdDist,
    WeightProfile,
};
