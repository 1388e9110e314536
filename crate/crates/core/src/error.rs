use thiserror::Error;

use crate::model::Arm;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arm {inner} is contained in arm {outer}")]
    ContainedArm { inner: Arm, outer: Arm },
    #[error("arm family is empty")]
    EmptyFamily,
    #[error("m = {m} is outside [1, {d}]")]
    BadM { m: usize, d: usize },
    #[error("invalid arm family: {0}")]
    InvalidFamily(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("family has a single arm; pairwise constants are undefined")]
    DegenerateFamily,
    #[error("arm {arm} was never best in {samples} prior draws; pairwise non-degeneracy may fail")]
    DegeneratePrior { arm: Arm, samples: usize },
    #[error("bootstrap declared {required} samples per atom but atom {atom} has {observed} after {rounds} rounds")]
    BootstrapUnderfilled {
        atom: usize,
        observed: u64,
        required: u64,
        rounds: usize,
    },
    #[error("operation requires Beta priors (atom {atom} is not Beta)")]
    NotBeta { atom: usize },
    #[error("family is not the complete family of fixed-size subsets")]
    NotFixedSize,
    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("property (P) constants are degenerate: {0}")]
    DegenerateConstants(String),
    #[error("family not encodable within {bound} nodes (bound-exceeded, not a proof of non-encodability)")]
    NotEncodable { bound: usize },
    #[error("invalid transition graph: {0}")]
    InvalidGraph(String),
    #[error("punish probability {q_pun:e} underflows; instance too punishing to hallucinate")]
    ZeroQpun { q_pun: f64 },
    #[error("punish-event rejection sampling exceeded {attempts} attempts")]
    RejectionBudgetExceeded { attempts: u64 },
    #[error("exact oracle requires finite discrete priors (atom {atom} is not discrete)")]
    NonDiscretePrior { atom: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Budget-style failures map to the runtime-budget exit code in the CLI.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. } | Error::RejectionBudgetExceeded { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownAlgorithm(_)
                | Error::Json(_)
                | Error::InvalidPrior(_)
                | Error::InvalidFamily(_)
                | Error::InvalidGraph(_)
                | Error::ContainedArm { .. }
                | Error::EmptyFamily
                | Error::BadM { .. }
                | Error::InvalidArgument(_)
        )
    }
}
