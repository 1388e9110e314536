//! Name-to-constructor table for algorithms. A config names an algorithm
//! and supplies its parameters as a JSON object; the registered factory
//! validates the parameters and builds the strategy for a problem.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hallucination::{estimate_hh_constants, graph_for_family, HhBootstrap, HhSettings, HiddenHallucination, PunishSampler};
use crate::model::{Arm, Prior, Problem};
use crate::sequence::{constants_fixed_size, constants_general, HiddenExploration, Variant};
use crate::strategy::{Composite, PriorBest, Strategy, ThompsonSampling, UniformBaseline};
use crate::thompson::{estimate_ts_constants, DEFAULT_C_TS};

/// What a factory may consult besides its own parameters.
pub struct BuildContext<'a> {
    pub problem: &'a Problem,
    pub registry: &'a StrategyRegistry,
    pub horizon: u64,
    pub seed: u64,
    pub budget: u128,
}

pub type Factory = fn(&BuildContext<'_>, Value) -> Result<Box<dyn Strategy>>;

pub struct StrategyRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("ts", build_ts);
        r.register("exogenous", build_exogenous);
        r.register("composite", build_composite);
        r.register("uniform-baseline", build_uniform);
        r.register("prior-best", build_prior_best);
        r.register("hidden-exploration", build_hidden_exploration);
        r.register("hidden-hallucination", build_hidden_hallucination);
        r.register("hh-bootstrap", build_hh_bootstrap);
        r.register("two-arm-correlated", build_two_arm);
        r
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    /// Build from `{"name": ..., <params>}`.
    pub fn build(&self, ctx: &BuildContext<'_>, spec: &Value) -> Result<Box<dyn Strategy>> {
        let mut params = spec
            .as_object()
            .cloned()
            .ok_or_else(|| Error::Config("algorithm must be an object with a `name` field".into()))?;
        let name = match params.remove("name") {
            Some(Value::String(s)) => s,
            _ => return Err(Error::Config("algorithm is missing a string `name` field".into())),
        };
        let factory = self
            .factories
            .get(name.as_str())
            .ok_or_else(|| Error::UnknownAlgorithm(name.clone()))?;
        factory(ctx, Value::Object(params))
    }
}

fn params<T: DeserializeOwned>(name: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config(format!("algorithm `{name}`: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn build_ts(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let NoParams {} = params("ts", v)?;
    Ok(Box::new(ThompsonSampling::new(ctx.problem)))
}

fn build_two_arm(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let NoParams {} = params("two-arm-correlated", v)?;
    if !matches!(ctx.problem.prior(), Prior::Joint(_)) {
        return Err(Error::Config("two-arm-correlated needs a joint prior".into()));
    }
    Ok(Box::new(ThompsonSampling::new(ctx.problem).named("two-arm-correlated")))
}

fn build_uniform(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let NoParams {} = params("uniform-baseline", v)?;
    Ok(Box::new(UniformBaseline::new(ctx.problem)))
}

fn build_prior_best(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let NoParams {} = params("prior-best", v)?;
    Ok(Box::new(PriorBest::new(ctx.problem)))
}

fn default_c_ts() -> f64 {
    DEFAULT_C_TS
}

fn default_mc() -> u64 {
    100_000
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExogenousParams {
    /// Samples per atom; computed from the TS constants when absent.
    n: Option<u64>,
    #[serde(default = "default_c_ts")]
    c_ts: f64,
    #[serde(default = "default_mc")]
    mc_samples: u64,
}

fn build_exogenous(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let p: ExogenousParams = params("exogenous", v)?;
    let n = match p.n {
        Some(n) => n,
        None => {
            estimate_ts_constants(
                ctx.problem.prior(),
                ctx.problem.family(),
                p.mc_samples,
                p.c_ts,
                ctx.seed,
                ctx.budget,
            )?
            .n_ts
        }
    };
    Ok(Box::new(ThompsonSampling::with_exogenous(ctx.problem, n)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositeParams {
    bootstrap: Value,
    /// Per-atom samples the bootstrap must leave; defaults to its own
    /// guarantee.
    required: Option<u64>,
}

fn build_composite(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let p: CompositeParams = params("composite", v)?;
    let inner = ctx.registry.build(ctx, &p.bootstrap)?;
    if inner.name() == "exogenous" {
        // exogenous data needs no rounds: the composite is TS with that data
        return Ok(inner);
    }
    Ok(Box::new(Composite::new(ctx.problem, inner, p.required)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeParams {
    n: Option<u64>,
    l: Option<u64>,
    variant: Option<Variant>,
    /// Explicit arm sequence in user atom labels; required for non-Beta
    /// priors, in which case `n` and `l` are required too.
    sequence: Option<Vec<Arm>>,
}

fn build_hidden_exploration(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let p: HeParams = params("hidden-exploration", v)?;
    let problem = ctx.problem;
    if let Some(seq) = p.sequence {
        let (n, l) = match (p.n, p.l) {
            (Some(n), Some(l)) => (n, l),
            _ => {
                return Err(Error::Config(
                    "hidden-exploration with an explicit sequence needs `n` and `l`".into(),
                ))
            }
        };
        let internal = seq.iter().map(|&a| problem.order().arm_to_internal(a)).collect();
        return Ok(Box::new(HiddenExploration::new(problem, internal, n, l)?));
    }
    let prior = problem.prior().product()?;
    let variant = p.variant.unwrap_or(if problem.family().complete_fixed_size().is_some() {
        Variant::FixedSize
    } else {
        Variant::General
    });
    let report = match variant {
        Variant::FixedSize => constants_fixed_size(prior, problem.family())?,
        Variant::General => constants_general(prior, problem.family(), ctx.budget)?,
    };
    Ok(Box::new(HiddenExploration::from_report(problem, &report, p.n, p.l)?))
}

fn default_delta() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HhParams {
    /// Rounds to run; defaults to the horizon.
    rounds: Option<u64>,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "one")]
    c1: f64,
    #[serde(default = "one")]
    c2: f64,
    n_ph: Option<u64>,
    #[serde(default)]
    sampler: PunishSampler,
    /// hh-bootstrap only.
    n_repeats: Option<u64>,
    /// hh-bootstrap only: overrides the computed `N₀`.
    n0: Option<u64>,
}

impl HhParams {
    fn settings(&self) -> HhSettings {
        HhSettings {
            delta: self.delta,
            c1: self.c1,
            c2: self.c2,
            n_ph: self.n_ph,
            sampler: self.sampler,
        }
    }
}

fn hh_constants(ctx: &BuildContext<'_>, p: &HhParams) -> Result<crate::hallucination::HhConstants> {
    let graph = graph_for_family(ctx.problem.family())?;
    estimate_hh_constants(ctx.problem.prior().product()?, &graph, &p.settings())
}

fn build_hidden_hallucination(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let p: HhParams = params("hidden-hallucination", v)?;
    if p.n_repeats.is_some() || p.n0.is_some() {
        return Err(Error::Config(
            "`n_repeats` and `n0` belong to hh-bootstrap, not hidden-hallucination".into(),
        ));
    }
    let c = hh_constants(ctx, &p)?;
    Ok(Box::new(HiddenHallucination::new(ctx.problem, c, p.rounds.unwrap_or(ctx.horizon))?))
}

fn build_hh_bootstrap(ctx: &BuildContext<'_>, v: Value) -> Result<Box<dyn Strategy>> {
    let p: HhParams = params("hh-bootstrap", v)?;
    if p.rounds.is_some() {
        return Err(Error::Config("hh-bootstrap takes `n0`, not `rounds`".into()));
    }
    let c = hh_constants(ctx, &p)?;
    Ok(Box::new(HhBootstrap::new(ctx.problem, c, p.n_repeats.unwrap_or(1), p.n0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmFamily, ProductPrior};
    use serde_json::json;

    fn problem() -> Problem {
        Problem::product(
            ProductPrior::beta(&[(1.0, 8.0), (1.0, 9.0), (1.0, 10.0)]).unwrap(),
            ArmFamily::singletons(3).unwrap(),
        )
        .unwrap()
    }

    fn build(spec: Value) -> Result<Box<dyn Strategy>> {
        let p = problem();
        let reg = StrategyRegistry::with_builtins();
        let ctx = BuildContext {
            problem: &p,
            registry: &reg,
            horizon: 100,
            seed: 1,
            budget: 1_000_000,
        };
        reg.build(&ctx, &spec)
    }

    #[test]
    fn builds_every_builtin() {
        for spec in [
            json!({"name": "ts"}),
            json!({"name": "uniform-baseline"}),
            json!({"name": "prior-best"}),
            json!({"name": "exogenous", "n": 5}),
            json!({"name": "hidden-exploration"}),
            json!({"name": "composite", "bootstrap": {"name": "hidden-exploration"}}),
            json!({"name": "hidden-hallucination", "n_ph": 10}),
            json!({"name": "hh-bootstrap", "n0": 20, "n_repeats": 2}),
        ] {
            let s = build(spec.clone()).unwrap_or_else(|e| panic!("{spec}: {e}"));
            assert_eq!(s.name(), spec["name"].as_str().unwrap());
        }
    }

    #[test]
    fn hidden_exploration_constants() {
        let s = build(json!({"name": "hidden-exploration"})).unwrap();
        // n_P = 10, τ_P = ν_1(10) − ν_2(10) = 1/20 − 1/21, ρ_P = (8/9)^30
        let tau = 1.0 / 420.0;
        let rho = (8.0f64 / 9.0).powi(30);
        let l = (1.0 + (1.0 / 9.0 - 1.0 / 11.0) / (tau * rho)).ceil() as u64;
        assert_eq!(l, 292);
        assert_eq!(s.declared_rounds(), Some(10 + 2 * l * 10));
    }

    #[test]
    fn exogenous_composite_collapses() {
        let s = build(json!({"name": "composite", "bootstrap": {"name": "exogenous", "n": 3}})).unwrap();
        assert_eq!(s.name(), "exogenous");
    }

    #[test]
    fn rejects_unknown() {
        assert!(matches!(build(json!({"name": "ucb"})), Err(Error::UnknownAlgorithm(_))));
        let e = build(json!({"name": "ts", "alpha_typo": 1})).err().unwrap();
        assert!(e.is_config());
        assert!(e.to_string().contains("alpha_typo"));
        assert!(build(json!({"name": "composite", "bootstrap": {"name": "ts"}})).is_err());
        assert!(build(json!({"name": "two-arm-correlated"})).is_err());
    }
}
