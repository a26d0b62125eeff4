use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined conditional: variable {var} given parent configuration {config:?} has zero probability")]
    UndefinedConditional { var: usize, config: Vec<(usize, usize)> },

    #[error("perturbation failed to bring the menu into the strict domain: {0}")]
    DomainRepairFailed(String),

    #[error("probability mass {mass} differs from 1 ({what})")]
    Mass { what: String, mass: f64 },

    #[error("graph contains a cycle through node {0}")]
    Acyclicity(usize),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("subset enumeration over {n} covariates exceeds the budget of {limit}")]
    EnumerationBudget { n: usize, limit: usize },

    #[error("no variable distinguishes candidate separator {0} from the other shortlisted candidates")]
    CandidateIndistinguishable(String),

    #[error("behavior violates consistent revealed causes: {0}")]
    InconsistentRevealedCauses(String),

    #[error("behavior has no subjective causality representation: {0}")]
    NoScr(String),

    #[error("no recorded choice data for menu: {0}")]
    MissingData(String),

    #[error("menus do not pin down the utility: {0}")]
    InsufficientMenus(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::UndefinedConditional { .. } => "undefined-conditional",
            Error::DomainRepairFailed(_) => "domain-repair-failed",
            Error::Mass { .. } => "mass",
            Error::Acyclicity(_) => "acyclicity",
            Error::Unsupported(_) => "unsupported",
            Error::EnumerationBudget { .. } => "enumeration-budget",
            Error::CandidateIndistinguishable(_) => "candidate-indistinguishable",
            Error::InconsistentRevealedCauses(_) => "inconsistent-revealed-causes",
            Error::NoScr(_) => "no-scr",
            Error::MissingData(_) => "missing-data",
            Error::InsufficientMenus(_) => "insufficient-menus",
            Error::Solver(_) => "solver",
            Error::Parse(_) => "parse",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
