use thiserror::Error;

use crate::charflow::PhasePoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("model `{0}` declares no Osgood envelope")]
    MissingEnvelope(String),

    #[error("characteristic blew up at time {time}: {state:?}")]
    BlowUp { time: f64, state: PhasePoint },

    #[error("integrator exceeded {0} steps")]
    StepLimit(usize),

    #[error("no converged characteristic joins the endpoints (p_max = {p_max}, k_max = {k_max})")]
    EmptyRootSet { p_max: f64, k_max: i64 },

    #[error("time {0} is below the smallest supported horizon 1e-3")]
    DegenerateTime(f64),

    #[error("flooding filled only {fill_fraction:.4} of the cells")]
    UnderResolved { fill_fraction: f64 },

    #[error("CFL violation: |H_p| reached {observed} but alpha is {alpha}")]
    CflViolation { observed: f64, alpha: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has unfilled cells")]
    UnfilledField,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}", format_config_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("non-finite value reached output `{0}`")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One rejected configuration entry, with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// `line 3` for file entries, `flag` for command-line overrides.
    pub origin: String,
    pub key: String,
    pub message: String,
}

fn format_config_issues(issues: &[ConfigIssue]) -> String {
    let mut out = format!("{} configuration error(s)", issues.len());
    for issue in issues {
        out.push_str(&format!("\n  {} `{}`: {}", issue.origin, issue.key, issue.message));
    }
    out
}
