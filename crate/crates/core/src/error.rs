use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analytic pipeline.
///
/// Every variant is a domain violation of some kind: the inputs describe a
/// physically impossible configuration or a quantity that is undefined for
/// them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid photon-number distribution: {0}")]
    InvalidDistribution(String),

    #[error("brightness {brightness} and g2 {g2} give a complex two-photon probability (2*g2*B > 1)")]
    ComplexTwoPhotonRoot { brightness: f64, g2: f64 },

    #[error("g2 is undefined for a distribution with zero mean photon number")]
    ZeroMean,

    #[error("conditional error rate undefined: yield of the {k}-photon component is zero")]
    ZeroYield { k: usize },

    #[error("total gain is zero: no click can ever be registered")]
    ZeroGain,

    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),

    #[error("inconsistent click observables: {0}")]
    InconsistentObservables(String),
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "a probability in [0, 1]",
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "a finite value >= 0",
        })
    }
}
