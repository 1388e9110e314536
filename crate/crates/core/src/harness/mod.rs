//! Experiment orchestration behind the command-line tool: constants
//! reports, simulation runs, verification suites and parameter sweeps.
//! Every command echoes its resolved config and finishes with a manifest.

pub mod artifacts;
pub mod config;

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::hallucination::{estimate_hh_constants, graph_for_family, hidden_hallucination};
use crate::model::{build_family, Arm, Instance, Prior, Problem};
use crate::registry::{BuildContext, StrategyRegistry};
use crate::rng::RngStream;
use crate::sequence::{constants_fixed_size, constants_general, corollary_n0, Variant};
use crate::sim::{par_fold, run_replicate, RoundRow};
use crate::stats::{binomial_stderr, Moments};
use crate::strategy::Strategy;
use crate::thompson::{check_prior_assumptions, estimate_ts_constants};
use crate::verify::anticoncentration::{esseen_experiment, harris_spotcheck};
use crate::verify::exact::bic_margin_exact;
use crate::verify::mc::{bic_margin_mc, cell_stderr};
use crate::verify::property::property_p_empirical;
use crate::verify::quadrature::discretize_prior;
use crate::verify::{BicMarginTable, Support, MARGIN_CSV_HEADER};

use artifacts::{csv_bytes, OutputDir, RunManifest, StreamRange};
use config::{CheckSpec, ConstantsKind, ExperimentConfig, SweepCommand};

pub const ROUNDS_CSV_HEADER: [&str; 6] = [
    "replicate",
    "round",
    "arm",
    "reward",
    "phase_label",
    "is_exploration",
];

pub const REGRET_CSV_HEADER: [&str; 3] = ["round", "mean_regret", "stderr"];

/// Fraction of compared cells that must agree in `exact_vs_mc`.
pub const AGREEMENT_FRACTION: f64 = 0.99;

/// Agreement radius in `exact_vs_mc`, in Monte Carlo standard errors.
pub const AGREEMENT_SE: f64 = 4.0;

/// Families up to this size are listed in `atoms.json`.
const LEGEND_MAX_ARMS: u128 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Constants,
    Run,
    Verify,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Run => "run",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// False only when a verification check failed.
    pub passed: bool,
    pub manifest: RunManifest,
}

/// Run `command` on `cfg`, writing artifacts into `out`.
pub fn execute(command: Command, mut cfg: ExperimentConfig, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    validate(&cfg)?;
    cfg.round_log_replicates = Some(cfg.resolved_log_replicates(cfg.horizon));
    let problem = cfg.problem()?;
    if command == Command::Verify && cfg.verify.is_empty() {
        return Err(Error::Config("`verify` lists no checks".into()));
    }
    if command == Command::Sweep {
        cfg.grid_points()?;
    }
    let resolved = cfg.to_value();
    let mut dir = OutputDir::create(out)?;
    dir.write_json("resolved_config.json", &resolved)?;
    let (passed, streams) = match command {
        Command::Constants => {
            let report = constants_report(&cfg, &problem)?;
            dir.write_json("constants.json", &report)?;
            (true, cfg.constants.mc_samples)
        }
        Command::Run => {
            cmd_run(&cfg, &problem, &mut dir)?;
            (true, cfg.replicates)
        }
        Command::Verify => cmd_verify(&cfg, &problem, &mut dir)?,
        Command::Sweep => cmd_sweep(&cfg, &mut dir)?,
    };
    let streams = StreamRange {
        seed: cfg.seed,
        first: 0,
        count: streams,
    };
    let manifest = dir.finish(
        command.as_str(),
        &resolved,
        streams,
        start.elapsed().as_secs_f64(),
    )?;
    Ok(Outcome { passed, manifest })
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if cfg.replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    if cfg.round_log_replicates.is_some_and(|r| r > cfg.replicates) {
        return Err(Error::Config("round_log_replicates exceeds replicates".into()));
    }
    Ok(())
}

fn build_strategy(cfg: &ExperimentConfig, problem: &Problem) -> Result<Box<dyn Strategy>> {
    let registry = StrategyRegistry::with_builtins();
    let ctx = BuildContext {
        problem,
        registry: &registry,
        horizon: cfg.horizon,
        seed: cfg.seed,
        budget: cfg.enumeration_budget(),
    };
    registry.build(&ctx, &cfg.algorithm)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateFamily
            | Error::DegeneratePrior { .. }
            | Error::DegenerateConstants(_)
            | Error::ZeroQpun { .. }
    )
}

fn user_arms(problem: &Problem, arms: &[Arm]) -> Vec<Arm> {
    arms.iter().map(|&a| problem.order().arm_to_user(a)).collect()
}

/// Constants for the configured kind. Arms inside `report` use internal
/// atom indices (atoms sorted by prior mean); `atom_order[i]` is the user
/// label of internal atom `i`. Degenerate inputs yield
/// `"degenerate": true` with a reason instead of an error.
pub fn constants_report(cfg: &ExperimentConfig, problem: &Problem) -> Result<Value> {
    let c = &cfg.constants;
    let budget = cfg.enumeration_budget();
    let mut obj = Map::new();
    obj.insert("kind".into(), to_json(&c.kind));
    obj.insert("atom_order".into(), to_json(&problem.order().to_user()));
    let body: Result<Map<String, Value>> = (|| {
        let mut m = Map::new();
        match c.kind {
            ConstantsKind::Ts => {
                let r = estimate_ts_constants(
                    problem.prior(),
                    problem.family(),
                    c.mc_samples,
                    c.c_ts,
                    cfg.seed,
                    budget,
                )?;
                m.insert("degenerate".into(), json!(false));
                m.insert(
                    "epsilon_pair_user".into(),
                    to_json(&user_arms(problem, &[r.epsilon_pair.0, r.epsilon_pair.1])),
                );
                m.insert("delta_arm_user".into(), to_json(&user_arms(problem, &[r.delta_arm])[0]));
                m.insert("report".into(), to_json(&r));
                let assumptions = match problem.prior() {
                    Prior::Product(p) => to_json(&check_prior_assumptions(
                        p,
                        problem.family(),
                        c.tau,
                        c.alpha_exponent,
                        c.mc_samples,
                        cfg.seed,
                        budget,
                    )?),
                    Prior::Joint(_) => Value::Null,
                };
                m.insert("prior_assumptions".into(), assumptions);
            }
            ConstantsKind::FixedSize | ConstantsKind::General => {
                let prior = problem.prior().product()?;
                let (r, variant) = if c.kind == ConstantsKind::FixedSize {
                    (constants_fixed_size(prior, problem.family())?, Variant::FixedSize)
                } else {
                    (constants_general(prior, problem.family(), budget)?, Variant::General)
                };
                m.insert("degenerate".into(), json!(r.degenerate));
                m.insert("sequence_user".into(), to_json(&user_arms(problem, &r.sequence)));
                m.insert("report".into(), to_json(&r));
                if let Some(inputs) = &c.corollary {
                    let cr = corollary_n0(prior, problem.family(), variant, inputs.clone(), budget)?;
                    m.insert("corollary".into(), to_json(&cr));
                }
            }
            ConstantsKind::Hh => {
                let graph = graph_for_family(problem.family())?;
                let r = estimate_hh_constants(problem.prior().product()?, &graph, &c.hh)?;
                m.insert("degenerate".into(), json!(false));
                m.insert("report".into(), to_json(&r));
            }
        }
        Ok(m)
    })();
    match body {
        Ok(m) => obj.extend(m),
        Err(e) if is_degenerate(&e) => {
            obj.insert("degenerate".into(), json!(true));
            obj.insert("reason".into(), json!(e.to_string()));
        }
        Err(e) => return Err(e),
    }
    Ok(Value::Object(obj))
}

struct RunAcc {
    regret: Vec<Moments>,
    exploration: Moments,
    logs: Vec<(u64, Vec<RoundRow>)>,
}

struct Simulation {
    regret: Vec<Moments>,
    exploration: Moments,
    logs: Vec<(u64, Vec<RoundRow>)>,
}

fn simulate(cfg: &ExperimentConfig, problem: &Problem, strategy: &dyn Strategy, log: u64) -> Result<Simulation> {
    let t = cfg.horizon;
    let acc = par_fold(
        cfg.replicates,
        || RunAcc {
            regret: vec![Moments::default(); t as usize],
            exploration: Moments::default(),
            logs: Vec::new(),
        },
        |acc, k| {
            let out = run_replicate(problem, strategy, t, cfg.seed, k)?;
            for (m, c) in acc.regret.iter_mut().zip(out.cumulative_regret()) {
                m.push(c);
            }
            let explored = out.rows.iter().filter(|r| r.is_exploration).count();
            acc.exploration.push(explored as f64 / t as f64);
            if k < log {
                acc.logs.push((k, out.rows));
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.regret.iter_mut().zip(&b.regret) {
                x.merge(y);
            }
            a.exploration.merge(&b.exploration);
            a.logs.extend(b.logs);
        },
    )?;
    Ok(Simulation {
        regret: acc.regret,
        exploration: acc.exploration,
        logs: acc.logs,
    })
}

fn atoms_legend(cfg: &ExperimentConfig) -> Result<Value> {
    let family = build_family(&cfg.family)?;
    let d = family.d();
    let priors: Vec<Value> = match &cfg.prior {
        config::PriorSpec::Product(p) => p.atoms().iter().map(to_json).collect(),
        config::PriorSpec::Joint(_) => vec![Value::Null; d],
    };
    let atoms: Vec<Value> = (0..d)
        .map(|i| json!({ "atom": i, "bit": Arm::singleton(i).to_hex(), "prior": priors[i] }))
        .collect();
    let arms = if family.size() <= LEGEND_MAX_ARMS {
        let list = family.arms(LEGEND_MAX_ARMS)?;
        Value::Array(
            list.iter()
                .map(|a| json!({ "hex": a.to_hex(), "atoms": a }))
                .collect(),
        )
    } else {
        Value::Null
    };
    Ok(json!({
        "d": d,
        "encoding": "arm hex is a bitset; bit i set means atom i is in the arm",
        "atoms": atoms,
        "arms": arms,
    }))
}

fn cmd_run(cfg: &ExperimentConfig, problem: &Problem, dir: &mut OutputDir) -> Result<()> {
    let strategy = build_strategy(cfg, problem)?;
    let log = cfg.round_log_replicates.unwrap_or(0);
    let sim = simulate(cfg, problem, strategy.as_ref(), log)?;
    let order = problem.order();
    let rows = sim.logs.iter().flat_map(|(k, rows)| {
        rows.iter().map(move |r| {
            [
                k.to_string(),
                r.round.to_string(),
                order.arm_to_user(r.arm).to_hex(),
                r.rewards.total().to_string(),
                r.label.to_string(),
                r.is_exploration.to_string(),
            ]
        })
    });
    dir.write("rounds.csv", &csv_bytes(&ROUNDS_CSV_HEADER, rows)?)?;
    let regret_rows = sim
        .regret
        .iter()
        .enumerate()
        .map(|(i, m)| [(i + 1).to_string(), num(m.mean()), num(m.stderr())]);
    dir.write("regret.csv", &csv_bytes(&REGRET_CSV_HEADER, regret_rows)?)?;
    dir.write_json("atoms.json", &atoms_legend(cfg)?)?;
    let last = sim.regret.last().expect("horizon >= 1");
    dir.write_json(
        "summary.json",
        &json!({
            "algorithm": strategy.name(),
            "params": strategy.resolved_params(),
            "horizon": cfg.horizon,
            "replicates": cfg.replicates,
            "logged_replicates": log,
            "declared_rounds": strategy.declared_rounds(),
            "bootstrap_rounds": strategy.bootstrap_rounds(),
            "final_mean_regret": last.mean(),
            "final_stderr": last.stderr(),
            "exploration_fraction": sim.exploration.mean(),
        }),
    )
}

struct CheckResult {
    passed: bool,
    details: Value,
    margins: Vec<BicMarginTable>,
}

fn table_details(tables: &[BicMarginTable]) -> Value {
    Value::Array(
        tables
            .iter()
            .map(|t| {
                let low = t.rows.iter().filter(|r| r.support == Support::LowSupport).count();
                json!({
                    "round": t.round,
                    "mode": t.mode,
                    "min_margin": t.min_margin(),
                    "violations": t.violations().len(),
                    "low_support_arms": low,
                    "passed": t.passes(),
                })
            })
            .collect(),
    )
}

/// The configured problem with Beta atoms replaced by Gauss rules.
fn discrete_problem(cfg: &ExperimentConfig, points: Option<usize>) -> Result<Problem> {
    let Some(k) = points else {
        return cfg.problem();
    };
    let config::PriorSpec::Product(p) = &cfg.prior else {
        return Err(Error::Config("quadrature_points needs a product prior".into()));
    };
    Problem::product(discretize_prior(p, k)?, build_family(&cfg.family)?)
}

fn run_check(cfg: &ExperimentConfig, problem: &Problem, check: &CheckSpec) -> Result<CheckResult> {
    let budget = cfg.enumeration_budget();
    let seed = cfg.seed;
    match check {
        CheckSpec::BicMc { rounds, replicates } => {
            let strategy = build_strategy(cfg, problem)?;
            let rounds = rounds.resolve(strategy.bootstrap_rounds())?;
            let tables = bic_margin_mc(problem, strategy.as_ref(), &rounds, *replicates, seed, budget)?;
            let tables: Vec<_> = tables.iter().map(|t| t.to_user(problem.order())).collect();
            Ok(CheckResult {
                passed: tables.iter().all(|t| t.passes()),
                details: json!({ "rounds": table_details(&tables) }),
                margins: tables,
            })
        }
        CheckSpec::BicExact {
            rounds,
            quadrature_points,
        } => {
            let problem = discrete_problem(cfg, *quadrature_points)?;
            let strategy = build_strategy(cfg, &problem)?;
            let rounds = rounds.resolve(strategy.bootstrap_rounds())?;
            let out = bic_margin_exact(&problem, strategy.as_ref(), &rounds, cfg.exact_budget())?;
            let mass_ok = out.mass_by_round.iter().all(|m| (m - 1.0).abs() < 1e-9);
            let tables: Vec<_> = out.tables.iter().map(|t| t.to_user(problem.order())).collect();
            Ok(CheckResult {
                passed: mass_ok && tables.iter().all(|t| t.passes()),
                details: json!({
                    "rounds": table_details(&tables),
                    "mass_conserved": mass_ok,
                    "work": out.work as u64,
                }),
                margins: tables,
            })
        }
        CheckSpec::ExactVsMc {
            rounds,
            replicates,
            quadrature_points,
        } => {
            let problem = discrete_problem(cfg, *quadrature_points)?;
            let strategy = build_strategy(cfg, &problem)?;
            let rounds = rounds.resolve(strategy.bootstrap_rounds())?;
            let exact = bic_margin_exact(&problem, strategy.as_ref(), &rounds, cfg.exact_budget())?;
            let mc = bic_margin_mc(&problem, strategy.as_ref(), &rounds, *replicates, seed, budget)?;
            let (agree, total) = agreement(&exact.tables, &mc);
            let fraction = if total == 0 { 1.0 } else { agree as f64 / total as f64 };
            let mut tables: Vec<_> = exact.tables.iter().map(|t| t.to_user(problem.order())).collect();
            tables.extend(mc.iter().map(|t| t.to_user(problem.order())));
            Ok(CheckResult {
                passed: fraction >= AGREEMENT_FRACTION,
                details: json!({
                    "cells_compared": total,
                    "cells_agreeing": agree,
                    "fraction": fraction,
                    "required_fraction": AGREEMENT_FRACTION,
                    "radius_se": AGREEMENT_SE,
                }),
                margins: tables,
            })
        }
        CheckSpec::PropertyP {
            n,
            replicates,
            forced,
            variant,
        } => {
            let prior = problem.prior().product()?;
            let variant = variant.unwrap_or(if problem.family().complete_fixed_size().is_some() {
                Variant::FixedSize
            } else {
                Variant::General
            });
            let report = match variant {
                Variant::FixedSize => constants_fixed_size(prior, problem.family())?,
                Variant::General => constants_general(prior, problem.family(), budget)?,
            };
            if report.degenerate {
                return Err(Error::DegenerateConstants("τ_P or ρ_P is zero".into()));
            }
            let arms = problem.family().arms(budget)?;
            let n = n.unwrap_or(report.n_p);
            let phases = property_p_empirical(prior, &arms, &report, n, *replicates, seed, *forced)?;
            Ok(CheckResult {
                passed: phases.iter().all(|p| p.pass),
                details: json!({ "n": n, "variant": variant, "phases": phases }),
                margins: Vec::new(),
            })
        }
        CheckSpec::Esseen {
            intervals,
            delta,
            replicates,
        } => {
            let arms = build_family(&cfg.family)?.arms(budget)?;
            let r = esseen_experiment(intervals, &arms, *delta, *replicates, seed)?;
            Ok(CheckResult {
                passed: r.pass,
                details: to_json(&r),
                margins: Vec::new(),
            })
        }
        CheckSpec::Harris { n, atoms, replicates } => {
            let config::PriorSpec::Product(p) = &cfg.prior else {
                return Err(Error::Config("harris needs a product prior".into()));
            };
            let atoms = match atoms {
                Some(list) => {
                    if let Some(&bad) = list.iter().find(|&&a| a >= p.d()) {
                        return Err(Error::Config(format!("harris atom {bad} is out of range")));
                    }
                    Arm::from_atoms(list.iter().copied())
                }
                None => Arm::full(p.d()),
            };
            let r = harris_spotcheck(p, *n, atoms, *replicates, seed)?;
            Ok(CheckResult {
                passed: r.pass,
                details: to_json(&r),
                margins: Vec::new(),
            })
        }
        CheckSpec::HhCoverage {
            replicates,
            max_rounds,
            min_frequency,
        } => {
            let graph = graph_for_family(problem.family())?;
            let constants = estimate_hh_constants(problem.prior().product()?, &graph, &cfg.constants.hh)?;
            let max_rounds = max_rounds.unwrap_or(constants.n0);
            let hits = par_fold(
                *replicates,
                || 0u64,
                |acc, k| {
                    let mut rng = RngStream::new(seed, k);
                    let instance = Instance::new(problem.prior().sample_theta(&mut rng));
                    let r = hidden_hallucination(problem, &constants, &instance, max_rounds, &mut rng)?;
                    *acc += r.success as u64;
                    Ok(())
                },
                |a, b| *a += b,
            )?;
            let freq = hits as f64 / *replicates as f64;
            let se = binomial_stderr(hits, *replicates);
            Ok(CheckResult {
                passed: freq >= min_frequency - 3.0 * se,
                details: json!({
                    "frequency": freq,
                    "stderr": se,
                    "min_frequency": min_frequency,
                    "max_rounds": max_rounds,
                    "constants": constants,
                }),
                margins: Vec::new(),
            })
        }
    }
}

/// Cells where a well-supported Monte Carlo margin lies within
/// `AGREEMENT_SE` standard errors of the exact one, and cells compared.
pub fn agreement(exact: &[BicMarginTable], mc: &[BicMarginTable]) -> (u64, u64) {
    let mut agree = 0;
    let mut total = 0;
    for (e, m) in exact.iter().zip(mc) {
        for row in m.rows.iter().filter(|r| r.support == Support::Sufficient) {
            let Some(erow) = e.row(row.arm) else { continue };
            for cell in &row.cells {
                let Some(ecell) = erow.cells.iter().find(|c| c.competitor == cell.competitor) else {
                    continue;
                };
                total += 1;
                let radius = (AGREEMENT_SE * cell_stderr(cell)).max(1e-9);
                if (cell.margin - ecell.margin).abs() <= radius {
                    agree += 1;
                }
            }
        }
    }
    (agree, total)
}

fn cmd_verify(cfg: &ExperimentConfig, problem: &Problem, dir: &mut OutputDir) -> Result<(bool, u64)> {
    let mut all = true;
    let mut checks = Vec::new();
    let mut max_reps = 0;
    for (i, check) in cfg.verify.iter().enumerate() {
        let r = run_check(cfg, problem, check)?;
        max_reps = max_reps.max(check_replicates(check));
        let mut entry = json!({ "index": i, "check": check.name(), "passed": r.passed, "details": r.details });
        if !r.margins.is_empty() {
            let name = format!("margins_{i}.csv");
            let rows = r.margins.iter().flat_map(|t| t.csv_records());
            dir.write(&name, &csv_bytes(&MARGIN_CSV_HEADER, rows)?)?;
            entry["margins_file"] = json!(name);
        }
        all &= r.passed;
        checks.push(entry);
    }
    dir.write_json("summary.json", &json!({ "passed": all, "checks": checks }))?;
    Ok((all, max_reps))
}

fn check_replicates(check: &CheckSpec) -> u64 {
    match check {
        CheckSpec::BicMc { replicates, .. }
        | CheckSpec::ExactVsMc { replicates, .. }
        | CheckSpec::PropertyP { replicates, .. }
        | CheckSpec::Esseen { replicates, .. }
        | CheckSpec::Harris { replicates, .. }
        | CheckSpec::HhCoverage { replicates, .. } => *replicates,
        CheckSpec::BicExact { .. } => 0,
    }
}

/// Top-level scalar fields of a constants report as (metric, value).
fn constants_metrics(report: &Value) -> Vec<(String, String)> {
    let mut out = vec![(
        "degenerate".to_string(),
        report["degenerate"].as_bool().unwrap_or(false).to_string(),
    )];
    if let Some(Value::Object(m)) = report.get("report") {
        for (k, v) in m {
            match v {
                Value::Number(n) => out.push((k.clone(), n.to_string())),
                Value::Bool(b) => out.push((k.clone(), b.to_string())),
                _ => {}
            }
        }
    }
    out
}

fn cmd_sweep(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<(bool, u64)> {
    let sweep = cfg.sweep.as_ref().expect("validated");
    let knobs = sweep.knobs();
    let mut header: Vec<&str> = vec!["point"];
    header.extend(knobs.iter().map(String::as_str));
    header.extend(["round", "metric", "value"]);
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut max_reps = 0;
    for (p, point) in cfg.grid_points()?.iter().enumerate() {
        let sub = cfg.with_point(point)?;
        validate(&sub)?;
        let problem = sub.problem()?;
        let mut prefix = vec![p.to_string()];
        prefix.extend(point.iter().map(|(_, v)| v.to_string()));
        let mut push = |round: String, metric: &str, value: String| {
            let mut r = prefix.clone();
            r.extend([round, metric.to_string(), value]);
            rows.push(r);
        };
        match sweep.command {
            SweepCommand::Constants => {
                max_reps = max_reps.max(sub.constants.mc_samples);
                let report = constants_report(&sub, &problem)?;
                for (k, v) in constants_metrics(&report) {
                    push(String::new(), &k, v);
                }
            }
            SweepCommand::Run => {
                max_reps = max_reps.max(sub.replicates);
                let strategy = build_strategy(&sub, &problem)?;
                let sim = simulate(&sub, &problem, strategy.as_ref(), 0)?;
                for (i, m) in sim.regret.iter().enumerate() {
                    push((i + 1).to_string(), "mean_regret", num(m.mean()));
                    push((i + 1).to_string(), "stderr", num(m.stderr()));
                }
            }
        }
    }
    dir.write("sweep.csv", &csv_bytes(&header, rows)?)?;
    Ok((true, max_reps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "prior": {{"product": [{{"beta": {{"alpha": 1, "beta": 3}}}}, {{"beta": {{"alpha": 1, "beta": 1}}}}]}},
                "family": {{"kind": "singletons", "d": 2}},
                "horizon": 20, "replicates": 30, "seed": 4 {extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn run_writes_user_labelled_logs() {
        let dir = tempfile::tempdir().unwrap();
        let out = execute(Command::Run, cfg(r#", "algorithm": {"name": "prior-best"}"#), dir.path()).unwrap();
        assert!(out.passed);
        let text = std::fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ROUNDS_CSV_HEADER.join(","));
        // user atom 1 has the larger prior mean, so prior-best plays bit 1
        assert!(lines.all(|l| l.split(',').nth(2) == Some("2")));
        assert_eq!(text.lines().count(), 1 + 20 * 30);
        let names: Vec<_> = out.manifest.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            ["resolved_config.json", "rounds.csv", "regret.csv", "atoms.json", "summary.json"]
        );
    }

    #[test]
    fn degenerate_constants_are_flagged() {
        let mut c = cfg("");
        c.prior = config::PriorSpec::Product(
            crate::model::ProductPrior::beta(&[(1.0, 1.0), (1.0, 1.0)]).unwrap(),
        );
        c.constants.kind = ConstantsKind::FixedSize;
        let r = constants_report(&c, &c.problem().unwrap()).unwrap();
        assert_eq!(r["degenerate"], json!(true));
    }

    #[test]
    fn verify_flags_round_one_ts() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(r#", "verify": [{"check": "harris", "n": 3},
            {"check": "bic_mc", "rounds": [1, 2], "replicates": 2000}]"#);
        let out = execute(Command::Verify, c, dir.path()).unwrap();
        // unbootstrapped TS recommends the worse-prior arm at round 1
        assert!(!out.passed);
        let summary: Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["checks"][0]["passed"], json!(true));
        assert_eq!(summary["checks"][1]["passed"], json!(false));
        assert!(dir.path().join("margins_1.csv").exists());
        assert!(!dir.path().join("margins_0.csv").exists());
    }
}
