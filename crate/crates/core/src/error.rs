use alloc::string::String;

/// Pipeline stage that raised an error, used to annotate solver failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Vorticity,
    StreamFunction,
    InitialStreamFunction,
    ReducedVorticity,
    ReducedStreamFunction,
}

impl core::fmt::Display for Stage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self {
            Stage::Vorticity => "vorticity transport",
            Stage::StreamFunction => "stream function poisson",
            Stage::InitialStreamFunction => "initial stream function poisson",
            Stage::ReducedVorticity => "reduced vorticity system",
            Stage::ReducedStreamFunction => "reduced stream function system",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{method} broke down at iteration {iteration}")]
    Breakdown { method: &'static str, iteration: usize },

    #[error("singular matrix (zero pivot in column {column})")]
    Singular { column: usize },

    #[error("POD basis is empty: {0}")]
    EmptyBasis(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{stage} failed at step {step}: {source}")]
    Step {
        stage: Stage,
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage, step: usize) -> Self {
        Error::Step {
            stage,
            step,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
