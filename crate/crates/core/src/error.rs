use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("point lies behind the camera (depth {depth})")]
    PointBehindCamera { depth: f64 },

    #[error("undistortion did not converge within {iterations} iterations")]
    UndistortionDiverged { iterations: usize },

    #[error("zero-length vector")]
    ZeroVector,

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("singular homography")]
    SingularHomography,

    #[error("rank-deficient system: numerical rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("negative radicand while recovering {0}")]
    NegativeRadicand(&'static str),

    #[error("no real root")]
    NoRealRoot,

    #[error("no positive-definite candidate")]
    NoPositiveDefiniteCandidate,

    #[error("conic is not positive definite")]
    NotPositiveDefinite,

    #[error("Jacobian column {0} is identically zero")]
    JacobianRankCollapse(usize),

    #[error("normal equations could not be solved at maximum damping")]
    NormalEquationsFailed,

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("target not visible after {attempts} pose samples")]
    ConeTooWide { attempts: usize },

    #[error("sweep point {sweep_value}: {failed} of {trials} trials failed for {solver}")]
    FailureBudgetExceeded {
        sweep_value: f64,
        solver: String,
        failed: usize,
        trials: usize,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Stable snake-case name of the variant, used in reports and CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Precondition(_) => "precondition",
            Error::PointBehindCamera { .. } => "point_behind_camera",
            Error::UndistortionDiverged { .. } => "undistortion_diverged",
            Error::ZeroVector => "zero_vector",
            Error::DegenerateConfiguration(_) => "degenerate_configuration",
            Error::SingularHomography => "singular_homography",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NegativeRadicand(_) => "negative_radicand",
            Error::NoRealRoot => "no_real_root",
            Error::NoPositiveDefiniteCandidate => "no_positive_definite_candidate",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::JacobianRankCollapse(_) => "jacobian_rank_collapse",
            Error::NormalEquationsFailed => "normal_equations_failed",
            Error::NonConvergence(_) => "non_convergence",
            Error::ConeTooWide { .. } => "cone_too_wide",
            Error::FailureBudgetExceeded { .. } => "failure_budget_exceeded",
            Error::Stage { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }

    /// Innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
