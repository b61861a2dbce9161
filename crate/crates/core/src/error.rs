use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates an operation's precondition.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// Points of differing dimension were mixed, or a dimension is unsupported.
    Dimension { expected: usize, found: usize },
    /// A point lies outside the domain it was evaluated on.
    OutsideDomain,
    /// A time lies outside the interval a trajectory covers.
    TimeOutOfRange { t: f64, horizon: f64 },
    /// Finite-size curves did not cross inside the intensity grid.
    NoCrossing,
    /// No discretized measure satisfies the requested constraint.
    Infeasible,
    /// An input collection was empty where at least one element is needed.
    Empty(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::OutsideDomain => f.write_str("point outside domain"),
            Error::TimeOutOfRange { t, horizon } => {
                write!(f, "time {t} outside [0, {horizon}]")
            }
            Error::NoCrossing => f.write_str("finite-size curves do not cross within the grid"),
            Error::Infeasible => f.write_str("no discretized measure meets the constraint"),
            Error::Empty(what) => write!(f, "empty input: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
