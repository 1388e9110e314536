//! Atoms, arms, families, priors, instances and histories.

mod arm;
mod family;
mod history;
mod instance;
mod prior;
mod problem;

pub use arm::{Arm, AtomId, Atoms, Rewards};
pub use family::{
    binomial, build_family, m_subsets, ArmFamily, FamilyKind, FamilySpec,
    DEFAULT_ENUMERATION_BUDGET,
};
pub use history::{AtomCounts, History, RoundRecord};
pub use instance::Instance;
pub use prior::{
    AtomPrior, BetaParams, DiscretePrior, Prior, ProductPrior, TwoArmJointPrior, PROB_SUM_TOL,
};
pub(crate) use prior::sample_discrete;
pub use problem::{AtomOrder, Problem};
