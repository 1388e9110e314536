//! Experiment configuration. Every struct rejects unknown fields, and the
//! resolved form (all defaults filled in) is what gets echoed to disk.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hallucination::HhSettings;
use crate::model::{build_family, FamilySpec, Prior, Problem, ProductPrior, TwoArmJointPrior};
use crate::sequence::{CorollaryInputs, Variant};

/// Largest number of grid points a sweep may expand to.
pub const MAX_GRID_POINTS: usize = 10_000;

/// Round-log rows written by default before falling back to fewer replicates.
pub const DEFAULT_LOG_ROWS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    Product(ProductPrior),
    Joint(TwoArmJointPrior),
}

impl PriorSpec {
    pub fn to_prior(&self) -> Prior {
        match self {
            PriorSpec::Product(p) => Prior::Product(p.clone()),
            PriorSpec::Joint(j) => Prior::Joint(j.clone()),
        }
    }
}

fn default_algorithm() -> Value {
    json!({ "name": "ts" })
}

fn default_horizon() -> u64 {
    1000
}

fn default_replicates() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub family: FamilySpec,
    #[serde(default = "default_algorithm")]
    pub algorithm: Value,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    /// Replicates whose round-by-round log goes into `rounds.csv`.
    #[serde(default)]
    pub round_log_replicates: Option<u64>,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub verify: Vec<CheckSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Cap on enumerated arms and pattern work.
    pub enumeration: u64,
    /// Cap on exact-oracle work.
    pub exact: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            enumeration: 1_000_000,
            exact: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsKind {
    #[default]
    Ts,
    FixedSize,
    General,
    Hh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSpec {
    pub kind: ConstantsKind,
    pub mc_samples: u64,
    pub c_ts: f64,
    /// Threshold for the upper-tail prior diagnostic.
    pub tau: f64,
    /// Exponent for the lower-tail prior diagnostic.
    pub alpha_exponent: f64,
    pub corollary: Option<CorollaryInputs>,
    pub hh: HhSettings,
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        Self {
            kind: ConstantsKind::Ts,
            mc_samples: 100_000,
            c_ts: 1.0,
            tau: 0.5,
            alpha_exponent: 1.0,
            corollary: None,
            hh: HhSettings::default(),
        }
    }
}

/// A set of 1-based rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoundSpec {
    List(Vec<u64>),
    Range { from: u64, to: u64 },
    /// The first `after_bootstrap` rounds after the bootstrap phase.
    AfterBootstrap { after_bootstrap: u64 },
}

impl RoundSpec {
    pub fn resolve(&self, bootstrap_rounds: u64) -> Result<Vec<u64>> {
        let rounds: Vec<u64> = match self {
            RoundSpec::List(v) => v.clone(),
            RoundSpec::Range { from, to } => (*from..=*to).collect(),
            RoundSpec::AfterBootstrap { after_bootstrap } => {
                (bootstrap_rounds + 1..=bootstrap_rounds + after_bootstrap).collect()
            }
        };
        if rounds.is_empty() {
            return Err(Error::Config("round set is empty".into()));
        }
        if rounds.contains(&0) {
            return Err(Error::Config("rounds are 1-based".into()));
        }
        Ok(rounds)
    }
}

fn default_check_replicates() -> u64 {
    10_000
}

fn default_min_frequency() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Monte Carlo margins of the configured algorithm.
    BicMc {
        rounds: RoundSpec,
        #[serde(default = "default_check_replicates")]
        replicates: u64,
    },
    /// Exact margins; Beta atoms are replaced by Gauss rules with
    /// `quadrature_points` nodes when given.
    BicExact {
        rounds: RoundSpec,
        #[serde(default)]
        quadrature_points: Option<usize>,
    },
    /// Exact against Monte Carlo margins on the same (discrete) prior.
    ExactVsMc {
        rounds: RoundSpec,
        #[serde(default = "default_check_replicates")]
        replicates: u64,
        #[serde(default)]
        quadrature_points: Option<usize>,
    },
    PropertyP {
        #[serde(default)]
        n: Option<u64>,
        #[serde(default = "default_check_replicates")]
        replicates: u64,
        #[serde(default)]
        forced: bool,
        #[serde(default)]
        variant: Option<Variant>,
    },
    Esseen {
        intervals: Vec<(f64, f64)>,
        delta: f64,
        #[serde(default = "default_check_replicates")]
        replicates: u64,
    },
    Harris {
        n: u64,
        /// User atom labels; all atoms when absent.
        #[serde(default)]
        atoms: Option<Vec<usize>>,
        #[serde(default)]
        replicates: u64,
    },
    HhCoverage {
        #[serde(default = "default_check_replicates")]
        replicates: u64,
        /// Defaults to the computed `N₀`.
        #[serde(default)]
        max_rounds: Option<u64>,
        #[serde(default = "default_min_frequency")]
        min_frequency: f64,
    },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::BicMc { .. } => "bic_mc",
            CheckSpec::BicExact { .. } => "bic_exact",
            CheckSpec::ExactVsMc { .. } => "exact_vs_mc",
            CheckSpec::PropertyP { .. } => "property_p",
            CheckSpec::Esseen { .. } => "esseen",
            CheckSpec::Harris { .. } => "harris",
            CheckSpec::HhCoverage { .. } => "hh_coverage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCommand {
    Constants,
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub command: SweepCommand,
    /// JSON pointer into the config (e.g. `/constants/c_ts`) to values;
    /// the sweep covers the cartesian product of these axes.
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
    /// Pointers varied together: the i-th point uses the i-th value of
    /// every list. Acts as one more grid axis.
    #[serde(default)]
    pub zip: BTreeMap<String, Vec<Value>>,
}

impl SweepSpec {
    /// Knob pointers in the order grid points list them.
    pub fn knobs(&self) -> Vec<String> {
        self.zip.keys().chain(self.grid.keys()).cloned().collect()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn problem(&self) -> Result<Problem> {
        let family = build_family(&self.family)?;
        Problem::new(self.prior.to_prior(), family)
    }

    pub fn enumeration_budget(&self) -> u128 {
        self.budgets.enumeration as u128
    }

    pub fn exact_budget(&self) -> u128 {
        self.budgets.exact as u128
    }

    /// Replicates to log, defaulting to as many as fit in about a million
    /// rows (at least one).
    pub fn resolved_log_replicates(&self, rounds: u64) -> u64 {
        self.round_log_replicates.unwrap_or_else(|| {
            let fit = DEFAULT_LOG_ROWS / rounds.max(1);
            fit.clamp(1, self.replicates.max(1))
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Grid points of the sweep, each as a list of (pointer, value).
    pub fn grid_points(&self) -> Result<Vec<Vec<(String, Value)>>> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("config has no `sweep` section".into()))?;
        let mut axes: Vec<Vec<Vec<(String, Value)>>> = Vec::new();
        if !sweep.zip.is_empty() {
            let len = sweep.zip.values().next().unwrap().len();
            if len == 0 || sweep.zip.values().any(|v| v.len() != len) {
                return Err(Error::Config("`zip` lists must be non-empty and of equal length".into()));
            }
            axes.push(
                (0..len)
                    .map(|i| sweep.zip.iter().map(|(k, v)| (k.clone(), v[i].clone())).collect())
                    .collect(),
            );
        }
        for (k, v) in &sweep.grid {
            if v.is_empty() {
                return Err(Error::Config(format!("grid axis `{k}` has no values")));
            }
            axes.push(v.iter().map(|x| vec![(k.clone(), x.clone())]).collect());
        }
        let size = axes.iter().fold(1usize, |n, a| n.saturating_mul(a.len()));
        if size > MAX_GRID_POINTS {
            return Err(Error::Config(format!(
                "grid has {size} points; the limit is {MAX_GRID_POINTS}"
            )));
        }
        let mut points: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for axis in &axes {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for v in axis {
                    let mut q = p.clone();
                    q.extend(v.iter().cloned());
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }

    /// Copy of this config with grid values substituted and no sweep.
    pub fn with_point(&self, point: &[(String, Value)]) -> Result<Self> {
        let mut v = self.to_value();
        v.as_object_mut().unwrap().remove("sweep");
        for (ptr, val) in point {
            set_pointer(&mut v, ptr, val.clone())?;
        }
        serde_json::from_value(v).map_err(|e| Error::Config(format!("grid point {point:?}: {e}")))
    }
}

/// Set the value at a JSON pointer, creating the last key if its parent
/// object exists.
fn set_pointer(root: &mut Value, ptr: &str, val: Value) -> Result<()> {
    if let Some(slot) = root.pointer_mut(ptr) {
        *slot = val;
        return Ok(());
    }
    let (parent, key) = ptr
        .rsplit_once('/')
        .ok_or_else(|| Error::Config(format!("bad grid pointer `{ptr}`")))?;
    match root.pointer_mut(parent) {
        Some(Value::Object(m)) => {
            m.insert(key.replace("~1", "/").replace("~0", "~"), val);
            Ok(())
        }
        _ => Err(Error::Config(format!("grid pointer `{ptr}` does not name a config field"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "prior": {"product": [{"beta": {"alpha": 1, "beta": 1}}, {"beta": {"alpha": 1, "beta": 3}}]},
        "family": {"kind": "singletons", "d": 2}
    }"#;

    #[test]
    fn defaults_are_filled() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.horizon, 1000);
        assert_eq!(c.algorithm, json!({"name": "ts"}));
        assert_eq!(c.constants.c_ts, 1.0);
        let again: ExperimentConfig = serde_json::from_value(c.to_value()).unwrap();
        assert_eq!(again, c);
        assert_eq!(c.problem().unwrap().d(), 2);
    }

    #[test]
    fn unknown_field_is_named() {
        let text = BASE.replace("\"family\"", "\"alpha_typo\": 1, \"family\"");
        let e = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("alpha_typo"), "{e}");
        assert!(e.to_string().contains("line"), "{e}");
    }

    #[test]
    fn round_specs() {
        let r: RoundSpec = serde_json::from_value(json!([1, 2])).unwrap();
        assert_eq!(r.resolve(0).unwrap(), vec![1, 2]);
        let r: RoundSpec = serde_json::from_value(json!({"from": 2, "to": 4})).unwrap();
        assert_eq!(r.resolve(0).unwrap(), vec![2, 3, 4]);
        let r: RoundSpec = serde_json::from_value(json!({"after_bootstrap": 2})).unwrap();
        assert_eq!(r.resolve(10).unwrap(), vec![11, 12]);
        let r: RoundSpec = serde_json::from_value(json!([])).unwrap();
        assert!(r.resolve(0).is_err());
    }

    #[test]
    fn grid_expansion_and_cap() {
        let mut c = ExperimentConfig::from_json(BASE).unwrap();
        c.sweep = Some(SweepSpec {
            command: SweepCommand::Constants,
            grid: BTreeMap::from([
                ("/constants/c_ts".to_string(), vec![json!(0.5), json!(1.0)]),
                ("/seed".to_string(), vec![json!(1), json!(2), json!(3)]),
            ]),
            zip: BTreeMap::new(),
        });
        let pts = c.grid_points().unwrap();
        assert_eq!(pts.len(), 6);
        let c2 = c.with_point(&pts[5]).unwrap();
        assert_eq!(c2.constants.c_ts, 1.0);
        assert_eq!(c2.seed, 3);
        assert!(c2.sweep.is_none());
        c.sweep.as_mut().unwrap().grid.insert(
            "/horizon".into(),
            (0..2000).map(|i| json!(i)).collect(),
        );
        assert!(c.grid_points().is_err());
        let bad = vec![("/nope/x".to_string(), json!(1))];
        assert!(c.with_point(&bad).is_err());
    }

    #[test]
    fn zipped_axes_move_together() {
        let mut c = ExperimentConfig::from_json(BASE).unwrap();
        c.sweep = Some(SweepSpec {
            command: SweepCommand::Run,
            grid: BTreeMap::from([("/seed".to_string(), vec![json!(1), json!(2)])]),
            zip: BTreeMap::from([
                ("/horizon".to_string(), vec![json!(5), json!(6), json!(7)]),
                ("/replicates".to_string(), vec![json!(50), json!(60), json!(70)]),
            ]),
        });
        let pts = c.grid_points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(c.sweep.as_ref().unwrap().knobs(), ["/horizon", "/replicates", "/seed"]);
        for p in &pts {
            let k: Vec<&str> = p.iter().map(|x| x.0.as_str()).collect();
            assert_eq!(k, ["/horizon", "/replicates", "/seed"]);
            assert_eq!(p[1].1.as_u64().unwrap(), p[0].1.as_u64().unwrap() * 10);
        }
        c.sweep.as_mut().unwrap().zip.get_mut("/horizon").unwrap().pop();
        assert!(c.grid_points().is_err());
    }
}
