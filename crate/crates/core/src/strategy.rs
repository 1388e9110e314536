//! The common interface every recommendation algorithm implements, plus the
//! simple algorithms (Thompson Sampling, uniform, prior-best, composite).

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Arm, ArmFamily, History, Instance, Prior, Problem, Rewards};
use crate::posterior::{best_arm, Belief, JointPosterior, PosteriorState};
use crate::rng::RngStream;
use crate::verify::exact::ExactPolicy;

/// What kind of round produced a recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PhaseLabel {
    Thompson,
    Uniform,
    PriorBest,
    /// Hidden exploration: exploration round in phase `i` (1-based).
    Explore(u32),
    /// Hidden exploration: exploitation round in phase `i`.
    Exploit(u32),
    /// Hidden hallucination: the hallucination round of phase `i`.
    Hallucinate(u32),
    /// Hidden hallucination: honest round of phase `i`.
    Honest(u32),
    /// Deterministic prior-best filler after a bootstrap.
    Filler,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseLabel::Thompson => f.write_str("ts"),
            PhaseLabel::Uniform => f.write_str("uniform"),
            PhaseLabel::PriorBest => f.write_str("prior_best"),
            PhaseLabel::Explore(i) => write!(f, "explore:{i}"),
            PhaseLabel::Exploit(i) => write!(f, "exploit:{i}"),
            PhaseLabel::Hallucinate(i) => write!(f, "hallucinate:{i}"),
            PhaseLabel::Honest(i) => write!(f, "honest:{i}"),
            PhaseLabel::Filler => f.write_str("filler"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recommendation {
    pub arm: Arm,
    pub label: PhaseLabel,
    pub is_exploration: bool,
}

impl Recommendation {
    pub fn new(arm: Arm, label: PhaseLabel) -> Self {
        let is_exploration = matches!(label, PhaseLabel::Explore(_) | PhaseLabel::Hallucinate(_));
        Self {
            arm,
            label,
            is_exploration,
        }
    }
}

/// A configured algorithm for a fixed problem. Atom indices are internal
/// (sorted by prior mean).
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// Rounds fixed before the run starts, for algorithms used as a bootstrap.
    fn declared_rounds(&self) -> Option<u64> {
        None
    }

    /// Rounds spent on a bootstrap before Thompson Sampling takes over.
    fn bootstrap_rounds(&self) -> u64 {
        0
    }

    /// Samples per atom the algorithm guarantees after its declared rounds.
    fn guaranteed_samples(&self) -> Option<u64> {
        None
    }

    /// Parameters after defaults and derived values are filled in.
    fn resolved_params(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    /// Begin one run against a hidden instance. The instance may only be
    /// used to draw exogenous data that the algorithm is given up front.
    fn start(&self, instance: &Instance, rng: &mut RngStream) -> Result<Box<dyn Episode>>;

    /// Exact branching description for the enumeration oracle, if supported.
    fn exact_policy(&self) -> Option<&dyn ExactPolicy> {
        None
    }
}

/// One run of a strategy.
pub trait Episode: Send {
    fn recommend(&mut self, round: u64, rng: &mut RngStream) -> Result<Recommendation>;
    fn observe(&mut self, round: u64, arm: Arm, rewards: Rewards);
}

pub fn initial_belief(prior: &Prior) -> Belief {
    match prior {
        Prior::Product(p) => Belief::Product(PosteriorState::new(p)),
        Prior::Joint(j) => Belief::Joint(JointPosterior::new(j)),
    }
}

/// One Thompson Sampling draw: sample means from the posterior and return
/// the best arm under them.
pub fn ts_step<R: Rng + ?Sized>(belief: &Belief, family: &ArmFamily, rng: &mut R) -> Arm {
    let theta = belief.sample_theta(rng);
    best_arm(&theta, family)
}

#[derive(Debug, Clone)]
pub struct ThompsonSampling {
    name: String,
    prior: Prior,
    family: ArmFamily,
    exogenous: u64,
}

impl ThompsonSampling {
    pub fn new(problem: &Problem) -> Self {
        Self::with_exogenous(problem, 0)
    }

    pub fn with_exogenous(problem: &Problem, exogenous: u64) -> Self {
        Self {
            name: if exogenous > 0 { "exogenous" } else { "ts" }.into(),
            prior: problem.prior().clone(),
            family: problem.family().clone(),
            exogenous,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn exogenous(&self) -> u64 {
        self.exogenous
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn family(&self) -> &ArmFamily {
        &self.family
    }
}

struct TsEpisode {
    belief: Belief,
    family: ArmFamily,
}

impl Episode for TsEpisode {
    fn recommend(&mut self, _round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        Ok(Recommendation::new(
            ts_step(&self.belief, &self.family, rng),
            PhaseLabel::Thompson,
        ))
    }

    fn observe(&mut self, _round: u64, arm: Arm, rewards: Rewards) {
        self.belief.observe_arm(arm, rewards);
    }
}

impl Strategy for ThompsonSampling {
    fn name(&self) -> &str {
        &self.name
    }

    fn resolved_params(&self) -> serde_json::Value {
        serde_json::json!({ "exogenous_per_atom": self.exogenous })
    }

    fn start(&self, instance: &Instance, rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        let mut belief = initial_belief(&self.prior);
        if self.exogenous > 0 {
            let mut data = rng.fork(1);
            for atom in 0..instance.d() {
                let s = instance.sample_successes(atom, self.exogenous, &mut data);
                belief.observe_counts(atom, s, self.exogenous - s);
            }
        }
        Ok(Box::new(TsEpisode {
            belief,
            family: self.family.clone(),
        }))
    }

    fn exact_policy(&self) -> Option<&dyn ExactPolicy> {
        Some(self)
    }
}

/// Recommends a uniformly random feasible arm every round.
#[derive(Debug, Clone)]
pub struct UniformBaseline {
    family: ArmFamily,
}

impl UniformBaseline {
    pub fn new(problem: &Problem) -> Self {
        Self {
            family: problem.family().clone(),
        }
    }

    pub fn family(&self) -> &ArmFamily {
        &self.family
    }
}

struct UniformEpisode {
    family: ArmFamily,
}

impl Episode for UniformEpisode {
    fn recommend(&mut self, _round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        Ok(Recommendation::new(
            self.family.sample_uniform(rng),
            PhaseLabel::Uniform,
        ))
    }

    fn observe(&mut self, _round: u64, _arm: Arm, _rewards: Rewards) {}
}

impl Strategy for UniformBaseline {
    fn name(&self) -> &str {
        "uniform-baseline"
    }

    fn start(&self, _instance: &Instance, _rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        Ok(Box::new(UniformEpisode {
            family: self.family.clone(),
        }))
    }

    fn exact_policy(&self) -> Option<&dyn ExactPolicy> {
        Some(self)
    }
}

/// Always recommends the arm with the largest prior mean.
#[derive(Debug, Clone)]
pub struct PriorBest {
    arm: Arm,
}

impl PriorBest {
    pub fn new(problem: &Problem) -> Self {
        Self {
            arm: best_arm(&problem.prior().means(), problem.family()),
        }
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }
}

struct ConstantEpisode {
    arm: Arm,
    label: PhaseLabel,
}

impl Episode for ConstantEpisode {
    fn recommend(&mut self, _round: u64, _rng: &mut RngStream) -> Result<Recommendation> {
        Ok(Recommendation::new(self.arm, self.label))
    }

    fn observe(&mut self, _round: u64, _arm: Arm, _rewards: Rewards) {}
}

impl Strategy for PriorBest {
    fn name(&self) -> &str {
        "prior-best"
    }

    fn start(&self, _instance: &Instance, _rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        Ok(Box::new(ConstantEpisode {
            arm: self.arm,
            label: PhaseLabel::PriorBest,
        }))
    }

    fn exact_policy(&self) -> Option<&dyn ExactPolicy> {
        Some(self)
    }
}

/// Runs a bootstrap for its declared number of rounds, then Thompson
/// Sampling on the pooled data.
pub struct Composite {
    bootstrap: Box<dyn Strategy>,
    t0: u64,
    required: Option<u64>,
    prior: Prior,
    family: ArmFamily,
}

impl Composite {
    /// The bootstrap must declare its length in advance. `required`
    /// overrides the bootstrap's own per-atom sample guarantee.
    pub fn new(problem: &Problem, bootstrap: Box<dyn Strategy>, required: Option<u64>) -> Result<Self> {
        let t0 = bootstrap.declared_rounds().ok_or_else(|| {
            Error::Config(format!(
                "bootstrap `{}` does not declare its number of rounds in advance",
                bootstrap.name()
            ))
        })?;
        let required = required.or(bootstrap.guaranteed_samples());
        Ok(Self {
            bootstrap,
            t0,
            required,
            prior: problem.prior().clone(),
            family: problem.family().clone(),
        })
    }

    pub fn t0(&self) -> u64 {
        self.t0
    }
}

struct CompositeEpisode {
    inner: Box<dyn Episode>,
    t0: u64,
    required: Option<u64>,
    counts: History,
    belief: Belief,
    family: ArmFamily,
    checked: bool,
}

impl Episode for CompositeEpisode {
    fn recommend(&mut self, round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        if round <= self.t0 {
            return self.inner.recommend(round, rng);
        }
        if !self.checked {
            self.checked = true;
            if let Some(req) = self.required {
                for atom in 0..self.counts.counts().len() {
                    let observed = self.counts.samples(atom);
                    if observed < req {
                        return Err(Error::BootstrapUnderfilled {
                            atom,
                            observed,
                            required: req,
                            rounds: self.t0 as usize,
                        });
                    }
                }
            }
        }
        Ok(Recommendation::new(
            ts_step(&self.belief, &self.family, rng),
            PhaseLabel::Thompson,
        ))
    }

    fn observe(&mut self, round: u64, arm: Arm, rewards: Rewards) {
        if round <= self.t0 {
            self.inner.observe(round, arm, rewards);
        }
        self.counts.record(round, arm, rewards);
        self.belief.observe_arm(arm, rewards);
    }
}

impl Strategy for Composite {
    fn name(&self) -> &str {
        "composite"
    }

    fn declared_rounds(&self) -> Option<u64> {
        None
    }

    fn bootstrap_rounds(&self) -> u64 {
        self.t0
    }

    fn resolved_params(&self) -> serde_json::Value {
        serde_json::json!({
            "bootstrap": self.bootstrap.name(),
            "bootstrap_params": self.bootstrap.resolved_params(),
            "t0": self.t0,
            "required_per_atom": self.required,
        })
    }

    fn start(&self, instance: &Instance, rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        let inner = self.bootstrap.start(instance, rng)?;
        Ok(Box::new(CompositeEpisode {
            inner,
            t0: self.t0,
            required: self.required,
            counts: History::counts_only(self.family.d()),
            belief: initial_belief(&self.prior),
            family: self.family.clone(),
            checked: false,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomPrior, ProductPrior, TwoArmJointPrior};

    fn two_singletons(a: AtomPrior, b: AtomPrior) -> Problem {
        Problem::product(
            ProductPrior::new(vec![a, b]).unwrap(),
            ArmFamily::singletons(2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_posterior_is_deterministic() {
        let p = two_singletons(
            AtomPrior::discrete(vec![(0.7, 1.0)]).unwrap(),
            AtomPrior::discrete(vec![(0.3, 1.0)]).unwrap(),
        );
        let ts = ThompsonSampling::new(&p);
        let inst = Instance::new(vec![0.7, 0.3]);
        let mut rng = RngStream::new(1, 0);
        let mut ep = ts.start(&inst, &mut rng).unwrap();
        for t in 1..50 {
            assert_eq!(ep.recommend(t, &mut rng).unwrap().arm, Arm::singleton(0));
        }
    }

    #[test]
    fn uniform_vs_point_mass_half() {
        // atom sorted first is the point mass 0.5 (means tie, index order kept)
        let p = two_singletons(
            AtomPrior::beta(1.0, 1.0).unwrap(),
            AtomPrior::discrete(vec![(0.5, 1.0)]).unwrap(),
        );
        let mut rng = RngStream::new(2, 0);
        let belief = initial_belief(p.prior());
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| ts_step(&belief, p.family(), &mut rng) == Arm::singleton(0))
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn joint_point_mass_always_first() {
        let joint = TwoArmJointPrior::new(vec![([0.9, 0.1], 1.0)]).unwrap();
        let p = Problem::new(Prior::Joint(joint), ArmFamily::singletons(2).unwrap()).unwrap();
        let belief = initial_belief(p.prior());
        let mut rng = RngStream::new(3, 0);
        for _ in 0..100 {
            assert_eq!(ts_step(&belief, p.family(), &mut rng), Arm::singleton(0));
        }
    }

    #[test]
    fn composite_requires_declared_rounds() {
        let p = two_singletons(AtomPrior::beta(1.0, 1.0).unwrap(), AtomPrior::beta(1.0, 2.0).unwrap());
        let r = Composite::new(&p, Box::new(ThompsonSampling::new(&p)), None);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn labels_render() {
        assert_eq!(PhaseLabel::Explore(2).to_string(), "explore:2");
        assert!(Recommendation::new(Arm::singleton(0), PhaseLabel::Hallucinate(1)).is_exploration);
        assert!(!Recommendation::new(Arm::singleton(0), PhaseLabel::Honest(1)).is_exploration);
    }
}
