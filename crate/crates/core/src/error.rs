use std::fmt;

/// Crate-wide error type.
///
/// Construction errors (`InvalidParameter`, `ExactModeUnavailable`) are
/// reported eagerly; the remaining variants surface numerical or structural
/// failures detected while an algorithm is running.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor argument is outside its documented domain.
    InvalidParameter(String),
    /// A special function was evaluated at (or too close to) a pole.
    Pole { argument: f64 },
    /// Exact rational arithmetic was requested but the coupling exponent
    /// was declared irrational.
    ExactModeUnavailable(String),
    /// A coefficient needed by a computation lies outside the stored window.
    WindowOverflow(String),
    /// A resonant site produced a nonzero constraint defect, so no
    /// eigenfunction series with the chosen gauge exists.
    ResonanceObstruction {
        level: usize,
        mu: Vec<i64>,
        defect: String,
    },
    /// A plane-wave cutoff escalation hit its hard cap without the
    /// extracted coefficients stabilizing.
    CutoffInsufficient(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Pole { argument } => {
                write!(f, "evaluation at a pole (argument {argument} is congruent to a lattice point)")
            }
            Error::ExactModeUnavailable(msg) => write!(f, "exact mode unavailable: {msg}"),
            Error::WindowOverflow(msg) => write!(f, "window overflow: {msg}"),
            Error::ResonanceObstruction { level, mu, defect } => write!(
                f,
                "resonance obstruction at level {level}, mu {mu:?}: constraint defect {defect} is nonzero"
            ),
            Error::CutoffInsufficient(msg) => write!(f, "plane-wave cutoff insufficient: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
