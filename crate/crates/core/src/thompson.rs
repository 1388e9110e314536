//! Constants for bootstrapping Thompson Sampling, prior diagnostics, and
//! the composite and two-arm runners.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Arm, ArmFamily, Prior, Problem, ProductPrior, TwoArmJointPrior};
use crate::posterior::arm_sum;
use crate::rng::RngStream;
use crate::sim::{par_fold, regret_curve, run_replicate, RegretCurve, ReplicateOutput};
use crate::stats::{binomial_stderr, Moments, Z99};
use crate::strategy::{Composite, Strategy, ThompsonSampling};

pub const DEFAULT_C_TS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsConstants {
    pub d: usize,
    pub epsilon_ts: f64,
    pub epsilon_ci: f64,
    /// Ordered pair `(A, A′)` attaining the minimum positive-part gap.
    pub epsilon_pair: (Arm, Arm),
    pub delta_ts: f64,
    pub delta_ci: f64,
    pub delta_arm: Arm,
    pub c_ts: f64,
    pub n_ts: u64,
    /// `n_ts` evaluated at `ε̂ + r` and `ε̂ − r`; the upper end is `None`
    /// when `ε̂ − r ≤ 0`.
    pub n_ts_interval: (u64, Option<u64>),
    pub mc_samples: u64,
    pub seed: u64,
}

/// `⌈c_ts · d² · ε⁻² · ln(1/δ)⌉`.
pub fn n_ts_formula(c_ts: f64, d: usize, epsilon: f64, delta: f64) -> Option<u64> {
    if epsilon <= 0.0 || !(delta > 0.0 && delta <= 1.0) {
        return None;
    }
    let v = c_ts * (d * d) as f64 / (epsilon * epsilon) * (1.0 / delta).ln();
    v.is_finite().then(|| v.max(0.0).ceil() as u64)
}

#[derive(Clone)]
struct TsAcc {
    pos_gap: Vec<Moments>,
    best: Vec<u64>,
}

/// Monte Carlo estimates of `ε_TS = min_{A≠A′} E[(μ(A) − μ(A′))₊]` and
/// `δ_TS = min_A Pr[A* = A]`, and the resulting `n_ts`.
pub fn estimate_ts_constants(
    prior: &Prior,
    family: &ArmFamily,
    mc_samples: u64,
    c_ts: f64,
    seed: u64,
    budget: u128,
) -> Result<TsConstants> {
    let arms = family.arms(budget)?;
    let k = arms.len();
    if k < 2 {
        return Err(Error::DegenerateFamily);
    }
    if (k as u128) * (k as u128) > budget {
        return Err(Error::BudgetExceeded {
            needed: (k as u128) * (k as u128),
            budget,
        });
    }
    let acc = par_fold(
        mc_samples,
        || TsAcc {
            pos_gap: vec![Moments::default(); k * k],
            best: vec![0; k],
        },
        |acc, rep| {
            let mut rng = RngStream::new(seed, rep);
            let theta = prior.sample_theta(&mut rng);
            let mu: Vec<f64> = arms.iter().map(|&a| arm_sum(&theta, a)).collect();
            let mut top = 0;
            for i in 0..k {
                if mu[i] > mu[top] {
                    top = i;
                }
                for j in 0..k {
                    if i != j {
                        acc.pos_gap[i * k + j].push((mu[i] - mu[j]).max(0.0));
                    }
                }
            }
            acc.best[top] += 1;
            Ok(())
        },
        |a, b| {
            for (x, y) in a.pos_gap.iter_mut().zip(&b.pos_gap) {
                x.merge(y);
            }
            for (x, y) in a.best.iter_mut().zip(&b.best) {
                *x += y;
            }
        },
    )?;
    let (mut di, mut dmin) = (0, u64::MAX);
    for (i, &c) in acc.best.iter().enumerate() {
        if c < dmin {
            dmin = c;
            di = i;
        }
    }
    if dmin == 0 {
        return Err(Error::DegeneratePrior {
            arm: arms[di],
            samples: mc_samples as usize,
        });
    }
    let (mut ep, mut emin) = ((0, 1), f64::INFINITY);
    for i in 0..k {
        for j in 0..k {
            if i != j && acc.pos_gap[i * k + j].mean() < emin {
                emin = acc.pos_gap[i * k + j].mean();
                ep = (i, j);
            }
        }
    }
    let epsilon_ci = acc.pos_gap[ep.0 * k + ep.1].ci99();
    let delta_ts = dmin as f64 / mc_samples as f64;
    let d = family.d();
    let n_ts = n_ts_formula(c_ts, d, emin, delta_ts).ok_or(Error::DegeneratePrior {
        arm: arms[ep.0],
        samples: mc_samples as usize,
    })?;
    Ok(TsConstants {
        d,
        epsilon_ts: emin,
        epsilon_ci,
        epsilon_pair: (arms[ep.0], arms[ep.1]),
        delta_ts,
        delta_ci: Z99 * binomial_stderr(dmin, mc_samples),
        delta_arm: arms[di],
        c_ts,
        n_ts,
        n_ts_interval: (
            n_ts_formula(c_ts, d, emin + epsilon_ci, delta_ts).unwrap_or(0),
            n_ts_formula(c_ts, d, emin - epsilon_ci, delta_ts),
        ),
        mc_samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub arm: Arm,
    pub competitor: Arm,
    /// Estimate of `Pr[μ(competitor) < E[μ(arm)]]`.
    pub probability: f64,
    pub ci_radius: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperTailCheck {
    pub atom: usize,
    /// `Pr[θ_ℓ > τ]`.
    pub probability: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerTailCheck {
    pub atom: usize,
    pub x: f64,
    /// `Pr[θ_ℓ < x]`.
    pub probability: f64,
    /// `exp(−x^{−α})`.
    pub reference: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorAssumptionReport {
    pub pairwise: Vec<PairCheck>,
    pub upper_tail: Vec<UpperTailCheck>,
    pub lower_tail: Vec<LowerTailCheck>,
    pub all_satisfied: bool,
}

pub const LOWER_TAIL_GRID: [f64; 3] = [0.25, 0.125, 0.0625];

/// Diagnostics for the prior conditions TS constants rely on: every arm can
/// fall below every other arm's prior mean (Monte Carlo), every atom puts
/// mass above `tau`, and every atom's lower tail dominates `exp(−x^{−α})`
/// on a grid (both exact from the per-atom CDF).
pub fn check_prior_assumptions(
    prior: &ProductPrior,
    family: &ArmFamily,
    tau: f64,
    alpha_exponent: f64,
    mc_samples: u64,
    seed: u64,
    budget: u128,
) -> Result<PriorAssumptionReport> {
    let arms = family.arms(budget)?;
    let k = arms.len();
    let means = prior.means();
    let targets: Vec<f64> = arms.iter().map(|&a| arm_sum(&means, a)).collect();
    let below = par_fold(
        mc_samples,
        || vec![0u64; k * k],
        |acc, rep| {
            let mut rng = RngStream::new(seed, rep);
            let theta = prior.sample_theta(&mut rng);
            for (j, &b) in arms.iter().enumerate() {
                let mu = arm_sum(&theta, b);
                for i in 0..k {
                    if mu < targets[i] {
                        acc[i * k + j] += 1;
                    }
                }
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
        },
    )?;
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let h = below[i * k + j];
            pairwise.push(PairCheck {
                arm: arms[i],
                competitor: arms[j],
                probability: h as f64 / mc_samples as f64,
                ci_radius: Z99 * binomial_stderr(h, mc_samples),
                satisfied: h > 0,
            });
        }
    }
    let upper_tail: Vec<UpperTailCheck> = prior
        .atoms()
        .iter()
        .enumerate()
        .map(|(atom, p)| {
            let probability = p.prob_above(tau);
            UpperTailCheck {
                atom,
                probability,
                satisfied: probability > 0.0,
            }
        })
        .collect();
    let mut lower_tail = Vec::new();
    for (atom, p) in prior.atoms().iter().enumerate() {
        for x in LOWER_TAIL_GRID {
            let probability = p.prob_below(x);
            let reference = (-x.powf(-alpha_exponent)).exp();
            lower_tail.push(LowerTailCheck {
                atom,
                x,
                probability,
                reference,
                satisfied: probability > reference,
            });
        }
    }
    let all_satisfied = pairwise.iter().all(|c| c.satisfied)
        && upper_tail.iter().all(|c| c.satisfied)
        && lower_tail.iter().all(|c| c.satisfied);
    Ok(PriorAssumptionReport {
        pairwise,
        upper_tail,
        lower_tail,
        all_satisfied,
    })
}

#[derive(Debug, Clone)]
pub struct CompositeRun {
    /// Round log of replicate 0.
    pub log: ReplicateOutput,
    pub regret: RegretCurve,
    pub t0: u64,
}

/// Run `bootstrap` for its declared rounds and then Thompson Sampling.
pub fn run_composite(
    problem: &Problem,
    bootstrap: Box<dyn Strategy>,
    horizon: u64,
    replicates: u64,
    seed: u64,
) -> Result<CompositeRun> {
    let composite = Composite::new(problem, bootstrap, None)?;
    let total = composite.t0() + horizon;
    Ok(CompositeRun {
        log: run_replicate(problem, &composite, total, seed, 0)?,
        regret: regret_curve(problem, &composite, total, replicates.max(1), seed)?,
        t0: composite.t0(),
    })
}

/// Thompson Sampling on two arms whose means have the given joint prior.
pub fn run_two_arm_correlated(
    joint: &TwoArmJointPrior,
    horizon: u64,
    seed: u64,
    replicate: u64,
) -> Result<ReplicateOutput> {
    let problem = two_arm_problem(joint)?;
    let ts = ThompsonSampling::new(&problem);
    run_replicate(&problem, &ts, horizon, seed, replicate)
}

pub fn two_arm_problem(joint: &TwoArmJointPrior) -> Result<Problem> {
    Problem::new(Prior::Joint(joint.clone()), ArmFamily::singletons(2)?)
}
