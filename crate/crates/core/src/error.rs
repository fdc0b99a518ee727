use thiserror::Error;

/// Errors raised by the policy solvers, the voting model and the estimator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A point of evaluation lies outside the support it is defined on.
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The survivor function vanished where a hazard was requested.
    #[error("hazard undefined at theta = {0}: survivor probability is zero")]
    ZeroSurvivor(f64),

    /// The marginal benefit broke its declared monotonicity, so the KKT
    /// branches did not bracket a root.
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    /// The closed-form design derivative does not apply in the current regime.
    #[error("piecewise regime: {0}; differentiate E[b*] numerically instead")]
    PiecewiseRegime(String),

    #[error("invalid marginal benefit: {0}")]
    InvalidBenefit(String),

    #[error("invalid equity floor: {0}")]
    InvalidFloor(String),

    #[error("invalid legislature: {0}")]
    InvalidLegislature(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The data cannot identify a two-knot schedule.
    #[error("estimation impossible: {0}")]
    EstimationImpossible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
