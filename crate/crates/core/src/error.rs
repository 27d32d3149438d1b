use alloc::string::String;
use core::fmt;

/// Errors raised by the circuit model, planner, engine and validation code.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a formula.
    Domain {
        quantity: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// The requested time lies past the instant at which the law stops being valid.
    BeyondValidity { t: f64, t_valid: f64 },
    /// Numerical integration drove the capacitor voltage to or below zero.
    NonPositiveVoltage { step: usize, t: f64 },
    /// Event bisection failed to bracket or converge on the interval `[t0, t1]`.
    Nonconvergence { t0: f64, t1: f64 },
    /// Harvested power never exceeds sleep power, so no finite sleep time balances the cycle.
    NeverFeasible { p_harv: f64, p_sleep: f64 },
    /// A configuration value violates a documented invariant.
    InvalidConfig(String),
    /// The two traces handed to a comparison share no time range.
    NoOverlap,
    /// A measured trace is malformed.
    InvalidTrace { row: usize, reason: String },
}

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            quantity,
            value,
            expected,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain {
                quantity,
                value,
                expected,
            } => write!(f, "{quantity} = {value} is out of domain (expected {expected})"),
            Error::BeyondValidity { t, t_valid } => write!(
                f,
                "t = {t} s exceeds the validity bound {t_valid} s of the discharge law"
            ),
            Error::NonPositiveVoltage { step, t } => write!(
                f,
                "integration reached a non-positive voltage at step {step} (t = {t} s)"
            ),
            Error::Nonconvergence { t0, t1 } => {
                write!(f, "event bisection did not converge on [{t0}, {t1}] s")
            }
            Error::NeverFeasible { p_harv, p_sleep } => write!(
                f,
                "never feasible: harvested power {p_harv} W does not exceed sleep power {p_sleep} W"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NoOverlap => f.write_str("traces do not overlap in time"),
            Error::InvalidTrace { row, reason } => write!(f, "row {row}: {reason}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
