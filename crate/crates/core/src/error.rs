use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors produced by the solvers.
#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// A cell holds a state with non-positive density or temperature where a
    /// physical state is required.
    InvalidState {
        cell: Option<usize>,
        rho: f64,
        temperature: f64,
    },
    /// An argument is outside the operation's domain.
    InvalidArgument(&'static str),
    /// Moment matching cannot be applied (degenerate sample or target variance).
    MatchingImpossible,
    /// Acceptance-rejection would not terminate in reasonable time.
    AcceptanceTooLow { expected: f64 },
    /// The requested time step violates the scheme's stability bound.
    CflViolation { dt: f64, max_dt: f64 },
    /// A deterministic solver produced an unphysical state.
    SolverFailure { cell: usize, rho: f64, internal_energy: f64 },
    /// A fluid solver id is not registered.
    UnknownSolver,
    /// A scenario name is not known.
    UnknownScenario,
    /// Two grids cannot be related by integer coarsening.
    GridMismatch { cells: usize, reference_cells: usize },
    /// A failure at a given step of a run.
    AtStep { step: u64, source: alloc::boxed::Box<Error> },
}

impl Error {
    /// Attaches a cell index to an [`Error::InvalidState`].
    pub fn at_cell(self, cell: usize) -> Self {
        match self {
            Error::InvalidState { rho, temperature, .. } => Error::InvalidState {
                cell: Some(cell),
                rho,
                temperature,
            },
            other => other,
        }
    }

    pub(crate) fn at_step(self, step: u64) -> Self {
        Error::AtStep {
            step,
            source: alloc::boxed::Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidState {
                cell: Some(cell),
                rho,
                temperature,
            } => write!(
                f,
                "invalid state in cell {cell}: rho = {rho}, T = {temperature}"
            ),
            Error::InvalidState {
                cell: None,
                rho,
                temperature,
            } => write!(f, "invalid state: rho = {rho}, T = {temperature}"),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::MatchingImpossible => f.write_str("moment matching impossible: degenerate variance"),
            Error::AcceptanceTooLow { expected } => {
                write!(f, "acceptance probability too low ({expected:e})")
            }
            Error::CflViolation { dt, max_dt } => {
                write!(f, "time step {dt:e} exceeds stability bound {max_dt:e}")
            }
            Error::SolverFailure {
                cell,
                rho,
                internal_energy,
            } => write!(
                f,
                "fluid solver failure in cell {cell}: rho = {rho}, internal energy = {internal_energy}"
            ),
            Error::UnknownSolver => f.write_str("unknown fluid solver id"),
            Error::UnknownScenario => f.write_str("unknown scenario"),
            Error::GridMismatch {
                cells,
                reference_cells,
            } => write!(
                f,
                "cannot coarsen {reference_cells} reference cells onto {cells} cells"
            ),
            Error::AtStep { step, source } => write!(f, "step {step}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
