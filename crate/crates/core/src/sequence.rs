//! The posterior-best arm sequence explored under all-zero data, its
//! constants, and the hidden-exploration algorithm built on it.
//!
//! All quantities are generic over [`Scalar`] so that they can be evaluated
//! exactly with rationals; `n_P` is always computed exactly.

use rand::seq::index::sample as sample_indices;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Arm, ArmFamily, BetaParams, History, Instance, Problem, ProductPrior, Rewards};
use crate::posterior::{arm_sum, best_arm, PosteriorState};
use crate::rng::RngStream;
use crate::scalar::{min_of, Exact, Scalar};
use crate::strategy::{Episode, PhaseLabel, Recommendation, Strategy};
use crate::verify::exact::{bump_counts, Branch, ExactPolicy, PolicyKey, World};

/// Full enumeration of `{0, n_P}^d` patterns is used up to this many atoms.
pub const EXACT_PATTERN_MAX_D: usize = 12;

/// Default cap on the sequence length before declaring it unbounded.
pub const DEFAULT_SEQUENCE_CAP: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    FixedSize,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sequence {
    pub arms: Vec<Arm>,
    /// Sample-count pattern `Z_i` in force when `V_i` was chosen.
    pub patterns: Vec<Vec<u64>>,
    /// `None` when the sequence never covers all atoms.
    pub kappa: Option<usize>,
}

/// Sample-count vector: `n` for atoms in `covered`, 0 elsewhere.
pub fn pattern(d: usize, covered: Arm, n: u64) -> Vec<u64> {
    (0..d).map(|a| if covered.contains(a) { n } else { 0 }).collect()
}

pub fn nu_vector<T: Scalar>(betas: &[BetaParams], counts: &[u64]) -> Vec<T> {
    betas
        .iter()
        .zip(counts)
        .map(|(b, &n)| b.nu_in::<T>(n))
        .collect()
}

/// Build `V_1, V_2, ...`: each is the best arm when atoms covered so far
/// have `n` zero-reward samples and the others none. Stops once every atom
/// of the family is covered; an arm adding no new atom would repeat forever,
/// so the sequence is then unbounded.
pub fn build_sequence<T: Scalar>(
    betas: &[BetaParams],
    family: &ArmFamily,
    n: u64,
    cap: usize,
) -> Sequence {
    let d = betas.len();
    let target = family.coverage();
    let mut covered = Arm::empty();
    let mut arms = Vec::new();
    let mut patterns = Vec::new();
    while !target.is_subset_of(covered) {
        if arms.len() >= cap {
            return Sequence {
                arms,
                patterns,
                kappa: None,
            };
        }
        let z = pattern(d, covered, n);
        let means = nu_vector::<T>(betas, &z);
        let v = best_arm(&means, family);
        arms.push(v);
        patterns.push(z);
        if v.is_subset_of(covered) {
            return Sequence {
                arms,
                patterns,
                kappa: None,
            };
        }
        covered = covered.union(v);
    }
    let kappa = Some(arms.len());
    Sequence {
        arms,
        patterns,
        kappa,
    }
}

fn exact_ceil(x: Exact) -> u64 {
    x.ceil_u64().expect("non-negative finite ratio")
}

fn ex(x: f64) -> Exact {
    <Exact as Scalar>::from_f64(x)
}

/// `⌈β_d/α_d⌉ · max_ℓ ⌈α_ℓ⌉`, with `d` the atom of smallest prior mean.
pub fn n_p_fixed(betas: &[BetaParams]) -> u64 {
    let last = betas.last().expect("d >= 1");
    exact_ceil(ex(last.beta) / ex(last.alpha)) * max_ceil_alpha(betas)
}

/// `⌈(α_d+β_d)/α_d⌉ · max_ℓ ⌈α_ℓ⌉ · d`.
pub fn n_p_general(betas: &[BetaParams]) -> u64 {
    let last = betas.last().expect("d >= 1");
    exact_ceil((ex(last.alpha) + ex(last.beta)) / ex(last.alpha))
        * max_ceil_alpha(betas)
        * betas.len() as u64
}

fn max_ceil_alpha(betas: &[BetaParams]) -> u64 {
    betas.iter().map(|b| exact_ceil(ex(b.alpha))).max().unwrap()
}

/// `min over ℓ ≠ ℓ′, n, n′ ∈ {0, n_P} of |ν_ℓ(n) − ν_ℓ′(n′)|`.
pub fn tau_fixed<T: Scalar>(betas: &[BetaParams], n_p: u64) -> Option<T> {
    let mut vals = Vec::new();
    for (l, b) in betas.iter().enumerate() {
        for lp in 0..betas.len() {
            if lp == l {
                continue;
            }
            for n in [0, n_p] {
                for np in [0, n_p] {
                    vals.push((b.nu_in::<T>(n) - betas[lp].nu_in::<T>(np)).abs());
                }
            }
        }
    }
    min_of(vals)
}

/// Smallest gap between the sums of two distinct arms under one pattern.
pub fn min_pair_gap<T: Scalar>(means: &[T], arms: &[Arm]) -> Option<T> {
    let mut sums: Vec<T> = arms.iter().map(|&a| arm_sum(means, a)).collect();
    sums.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    min_of(sums.windows(2).map(|w| w[1].clone() - w[0].clone()))
}

/// `min over A ≠ A′ and one shared n ∈ {0, n_P}^d` of the arm-sum gap.
/// Returns the value and whether every pattern was enumerated.
pub fn tau_general<T: Scalar>(
    betas: &[BetaParams],
    arms: &[Arm],
    n_p: u64,
    realized: &[Vec<u64>],
) -> (Option<T>, bool) {
    let d = betas.len();
    let exhaustive = d <= EXACT_PATTERN_MAX_D;
    let patterns: Vec<Vec<u64>> = if exhaustive {
        (0u64..(1 << d))
            .map(|mask| pattern(d, Arm::from_bits(mask), n_p))
            .collect()
    } else {
        let mut p = realized.to_vec();
        p.push(vec![0; d]);
        p.push(vec![n_p; d]);
        p
    };
    let gaps = patterns
        .iter()
        .filter_map(|z| min_pair_gap(&nu_vector::<T>(betas, z), arms));
    (min_of(gaps), exhaustive)
}

/// `(1 − θ_1^0)^{d · n_P}` with `θ_1^0` the largest prior mean.
pub fn rho<T: Scalar>(betas: &[BetaParams], n_p: u64) -> T {
    let first = betas[0].mean_in::<T>();
    (T::one() - first).powu(betas.len() as u64 * n_p)
}

/// Exact probability that the first `n` samples of every atom in `atoms`
/// are 0: `Π_ℓ Π_{k<n} (β_ℓ+k)/(α_ℓ+β_ℓ+k)`.
pub fn event_probability_exact<T: Scalar>(betas: &[BetaParams], atoms: Arm, n: u64) -> T {
    atoms
        .atoms()
        .fold(T::one(), |acc, a| acc * betas[a].prob_all_zero::<T>(n))
}

/// `Π_ℓ (1 − θ_ℓ^0)^n`, the Harris lower bound on the event probability.
pub fn event_probability_bound<T: Scalar>(betas: &[BetaParams], atoms: Arm, n: u64) -> T {
    atoms
        .atoms()
        .fold(T::one(), |acc, a| acc * (T::one() - betas[a].mean_in::<T>()).powu(n))
}

/// Gap `X_i` when the first `i − 1` sequence arms each returned `n` zeros
/// on every atom: the posterior means are exactly `ν_ℓ(Z_ℓ)`, and the gap is
/// `Σ_{V_i} ν − max_{A ≠ V_i} Σ_A ν`. `i` is 1-based.
pub fn conditional_gap<T: Scalar>(
    betas: &[BetaParams],
    arms: &[Arm],
    sequence: &[Arm],
    i: usize,
    n: u64,
) -> Option<T> {
    let covered = sequence[..i - 1]
        .iter()
        .fold(Arm::empty(), |u, &a| u.union(a));
    let means = nu_vector::<T>(betas, &pattern(betas.len(), covered, n));
    let vi = sequence[i - 1];
    let own = arm_sum(&means, vi);
    let best_other = arms
        .iter()
        .filter(|&&a| a != vi)
        .map(|&a| arm_sum(&means, a))
        .reduce(|x, y| if y > x { y } else { x })?;
    Some(own - best_other)
}

/// Prior mean of the best and worst arm.
pub fn prior_arm_range(means: &[f64], family: &ArmFamily) -> (f64, f64) {
    let max = arm_sum(means, best_arm(means, family));
    let neg: Vec<f64> = means.iter().map(|m| -m).collect();
    let min = arm_sum(means, best_arm(&neg, family));
    (max, min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuRow {
    pub atom: usize,
    pub alpha: f64,
    pub beta: f64,
    pub nu_0: f64,
    pub nu_n_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyPReport {
    pub variant: Variant,
    pub d: usize,
    pub n_p: u64,
    pub tau_p: f64,
    pub rho_p: f64,
    pub kappa: Option<usize>,
    /// Arms in internal atom order.
    pub sequence: Vec<Arm>,
    pub patterns: Vec<Vec<u64>>,
    pub mu0_max: f64,
    pub mu0_min: f64,
    /// `⌈1 + (μ⁰max − μ⁰min)/(τ_P ρ_P)⌉`, when defined.
    pub l: Option<u64>,
    /// `⌈κ n_P (1+d)/(τ_P ρ_P)⌉`, when defined.
    pub t0: Option<u64>,
    /// Rounds of hidden exploration with `N = n_P`: `N + (κ−1)·L·N`.
    pub phase_rounds: Option<u64>,
    /// The alternative accounting `κ·L·N`.
    pub phase_rounds_alt: Option<u64>,
    pub degenerate: bool,
    pub lower_confidence: bool,
    pub kappa_bound: usize,
    pub nu_table: Vec<NuRow>,
}

fn nu_table(betas: &[BetaParams], n_p: u64) -> Vec<NuRow> {
    betas
        .iter()
        .enumerate()
        .map(|(i, b)| NuRow {
            atom: i,
            alpha: b.alpha,
            beta: b.beta,
            nu_0: b.nu(0),
            nu_n_p: b.nu(n_p),
        })
        .collect()
}

fn finish_report(
    variant: Variant,
    betas: &[BetaParams],
    family: &ArmFamily,
    n_p: u64,
    tau: Option<Exact>,
    lower_confidence: bool,
    kappa_bound: usize,
) -> PropertyPReport {
    let d = betas.len();
    let seq = build_sequence::<Exact>(betas, family, n_p, DEFAULT_SEQUENCE_CAP);
    let rho_e: Exact = rho(betas, n_p);
    let tau_e = tau.unwrap_or_else(<Exact as Scalar>::zero);
    let degenerate = tau_e <= <Exact as Scalar>::zero() || seq.kappa.is_none();
    let means: Vec<f64> = betas.iter().map(BetaParams::mean).collect();
    let (mu0_max, mu0_min) = prior_arm_range(&means, family);
    let (l, t0) = if degenerate || rho_e <= <Exact as Scalar>::zero() {
        (None, None)
    } else {
        let tr = tau_e.clone() * rho_e.clone();
        let l = (<Exact as Scalar>::one() + (ex(mu0_max) - ex(mu0_min)) / tr.clone()).ceil_u64();
        let kappa = seq.kappa.unwrap() as u64;
        let t0 = (<Exact as Scalar>::from_u64(kappa * n_p * (1 + d as u64)) / tr).ceil_u64();
        (l, t0)
    };
    // `None` when the count does not fit in a u64
    let (phase_rounds, phase_rounds_alt) = match (l, seq.kappa) {
        (Some(l), Some(k)) => {
            let ln = l.checked_mul(n_p);
            (
                ln.and_then(|x| x.checked_mul(k as u64 - 1))
                    .and_then(|x| x.checked_add(n_p)),
                ln.and_then(|x| x.checked_mul(k as u64)),
            )
        }
        _ => (None, None),
    };
    PropertyPReport {
        variant,
        d,
        n_p,
        tau_p: Scalar::to_f64(&tau_e),
        rho_p: Scalar::to_f64(&rho_e),
        kappa: seq.kappa,
        sequence: seq.arms,
        patterns: seq.patterns,
        mu0_max,
        mu0_min,
        l,
        t0,
        phase_rounds,
        phase_rounds_alt,
        degenerate,
        lower_confidence,
        kappa_bound,
        nu_table: nu_table(betas, n_p),
    }
}

/// Constants for the complete family of `m`-subsets.
pub fn constants_fixed_size(prior: &ProductPrior, family: &ArmFamily) -> Result<PropertyPReport> {
    let betas = prior.betas()?;
    let m = family.complete_fixed_size().ok_or(Error::NotFixedSize)?;
    let n_p = n_p_fixed(&betas);
    let tau = tau_fixed::<Exact>(&betas, n_p);
    let d = betas.len();
    Ok(finish_report(
        Variant::FixedSize,
        &betas,
        family,
        n_p,
        tau,
        false,
        d.div_ceil(m),
    ))
}

/// Constants for an arbitrary (enumerable) family.
pub fn constants_general(
    prior: &ProductPrior,
    family: &ArmFamily,
    budget: u128,
) -> Result<PropertyPReport> {
    let betas = prior.betas()?;
    let arms = family.arms(budget)?;
    let n_p = n_p_general(&betas);
    let d = betas.len();
    let seq = build_sequence::<Exact>(&betas, family, n_p, DEFAULT_SEQUENCE_CAP);
    if d > EXACT_PATTERN_MAX_D {
        // 2^d patterns times the family size must fit the budget
        let work = (arms.len() as u128).saturating_mul(seq.patterns.len() as u128 + 2);
        if work > budget {
            return Err(Error::BudgetExceeded {
                needed: work,
                budget,
            });
        }
    } else {
        let work = (arms.len() as u128) << d;
        if work > budget {
            return Err(Error::BudgetExceeded {
                needed: work,
                budget,
            });
        }
    }
    let (tau, exhaustive) = tau_general::<Exact>(&betas, &arms, n_p, &seq.patterns);
    let tau = if arms.len() < 2 { None } else { tau };
    Ok(finish_report(
        Variant::General,
        &betas,
        family,
        n_p,
        tau,
        !exhaustive,
        d,
    ))
}

/// Inputs for the corollary bound on the total number of rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorollaryInputs {
    /// Integer constant bounding the ceiling products (`c_0`, resp. `c_1`).
    pub c_int: u64,
    /// Base of the gap condition (`c`, resp. `c_2`), in (0, 1).
    pub c_gap: f64,
    /// Bound on prior means (`c′`, resp. `c_3`), in (0, 1).
    pub c_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub variant: Variant,
    pub inputs: CorollaryInputs,
    pub mean_bound_holds: bool,
    pub ceiling_product: u64,
    pub ceiling_bound_holds: bool,
    /// Gap minimum appearing in the non-degeneracy condition.
    pub gap: f64,
    /// Literal condition `gap ≥ c^{-e}` (with `e = d`, resp. `d²`).
    pub gap_condition_literal: bool,
    /// Reading `gap ≥ c^{e}`, which is satisfiable for `c ∈ (0,1)`.
    pub gap_condition_decay: bool,
    pub phi: f64,
    /// Formula value with the hidden constant set to 1.
    pub n0_bound: f64,
}

/// Evaluate the corollary formula `c·d·Φ^d` (fixed size) or
/// `c·d³·Φ^{d²}` (general), with `Φ = c_gap (1 − c_mean)^{−c_int}`, and
/// check its assumptions against the prior.
pub fn corollary_n0(
    prior: &ProductPrior,
    family: &ArmFamily,
    variant: Variant,
    inputs: CorollaryInputs,
    budget: u128,
) -> Result<CorollaryReport> {
    let betas = prior.betas()?;
    let d = betas.len();
    let mean_bound_holds = betas.iter().all(|b| b.mean() <= inputs.c_mean);
    let max_alpha = max_ceil_alpha(&betas);
    let ceiling_product = betas
        .iter()
        .map(|b| match variant {
            Variant::FixedSize => exact_ceil(ex(b.beta) / ex(b.alpha)),
            Variant::General => exact_ceil((ex(b.alpha) + ex(b.beta)) / ex(b.alpha)),
        })
        .max()
        .unwrap()
        * max_alpha;
    let (gap, exponent) = match variant {
        Variant::FixedSize => (
            tau_fixed::<f64>(&betas, inputs.c_int).unwrap_or(0.0),
            d as i32,
        ),
        Variant::General => {
            let arms = family.arms(budget)?;
            let n_p = n_p_general(&betas);
            let seq = build_sequence::<f64>(&betas, family, n_p, DEFAULT_SEQUENCE_CAP);
            (
                tau_general::<f64>(&betas, &arms, n_p, &seq.patterns)
                    .0
                    .unwrap_or(0.0),
                (d * d) as i32,
            )
        }
    };
    let phi = inputs.c_gap * (1.0 - inputs.c_mean).powf(-(inputs.c_int as f64));
    let n0_bound = match variant {
        Variant::FixedSize => inputs.c_int as f64 * d as f64 * phi.powi(d as i32),
        Variant::General => inputs.c_int as f64 * (d as f64).powi(3) * phi.powi((d * d) as i32),
    };
    Ok(CorollaryReport {
        variant,
        inputs,
        mean_bound_holds,
        ceiling_product,
        ceiling_bound_holds: ceiling_product <= inputs.c_int,
        gap,
        gap_condition_literal: gap >= inputs.c_gap.powi(-exponent),
        gap_condition_decay: gap >= inputs.c_gap.powi(exponent),
        phi,
        n0_bound,
    })
}

/// Hidden exploration: `N` rounds of `V_1`, then for each later `V_i` a
/// phase of `L·N` rounds in which a uniformly random subset `Q` of `N`
/// rounds plays `V_i` and the rest play the posterior-best arm given the
/// samples revealed by earlier phases.
#[derive(Debug, Clone)]
pub struct HiddenExploration {
    prior: ProductPrior,
    family: ArmFamily,
    sequence: Vec<Arm>,
    n: u64,
    l: u64,
}

impl HiddenExploration {
    pub fn new(problem: &Problem, sequence: Vec<Arm>, n: u64, l: u64) -> Result<Self> {
        if sequence.is_empty() || n == 0 || l == 0 {
            return Err(Error::InvalidArgument(
                "hidden exploration needs a non-empty sequence and N, L >= 1".into(),
            ));
        }
        for &v in &sequence {
            if !problem.family().contains(v) {
                return Err(Error::InvalidArgument(format!("sequence arm {v} is not feasible")));
            }
        }
        let rounds = n as u128 + (sequence.len() as u128 - 1) * l as u128 * n as u128;
        if rounds > u64::MAX as u128 {
            return Err(Error::BudgetExceeded {
                needed: rounds,
                budget: u64::MAX as u128,
            });
        }
        Ok(Self {
            prior: problem.prior().product()?.clone(),
            family: problem.family().clone(),
            sequence,
            n,
            l,
        })
    }

    /// Build from a report; `n` and `l` default to `n_P` and the report's L.
    pub fn from_report(
        problem: &Problem,
        report: &PropertyPReport,
        n: Option<u64>,
        l: Option<u64>,
    ) -> Result<Self> {
        if report.degenerate {
            return Err(Error::DegenerateConstants(format!(
                "tau_P = {}, kappa = {:?}",
                report.tau_p, report.kappa
            )));
        }
        let n = n.unwrap_or(report.n_p);
        if n < report.n_p {
            return Err(Error::InvalidArgument(format!(
                "N = {n} is below n_P = {}",
                report.n_p
            )));
        }
        let l = match l.or(report.l) {
            Some(l) => l,
            None => return Err(Error::DegenerateConstants("L undefined".into())),
        };
        Self::new(problem, report.sequence.clone(), n, l)
    }

    pub fn kappa(&self) -> usize {
        self.sequence.len()
    }

    pub fn sequence(&self) -> &[Arm] {
        &self.sequence
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    pub fn total_rounds(&self) -> u64 {
        self.n + (self.kappa() as u64 - 1) * self.l * self.n
    }

    /// Phase (1-based) and position within it of round `t` (1-based);
    /// phase `κ + 1` means the algorithm has finished.
    pub fn locate(&self, t: u64) -> (usize, u64) {
        if t <= self.n {
            return (1, t - 1);
        }
        let len = self.l * self.n;
        let k = (t - self.n - 1) / len;
        let phase = 2 + k as usize;
        if phase > self.kappa() {
            (self.kappa() + 1, t - self.total_rounds() - 1)
        } else {
            (phase, (t - self.n - 1) % len)
        }
    }

    fn phase_len(&self, phase: usize) -> u64 {
        if phase == 1 {
            self.n
        } else {
            self.l * self.n
        }
    }

    /// Posterior-best arm given `means`; ties go to the earliest sequence
    /// arm, then to the lexicographically smallest arm.
    pub fn exploit_arm(&self, means: &[f64]) -> Arm {
        let top = best_arm(means, &self.family);
        let v = arm_sum(means, top);
        self.sequence
            .iter()
            .copied()
            .find(|&s| arm_sum(means, s) == v)
            .unwrap_or(top)
    }
}

struct HeEpisode {
    he: HiddenExploration,
    revealed: History,
    pending: History,
    q: Vec<bool>,
    exploit: Arm,
    phase: usize,
}

impl HeEpisode {
    fn enter_phase(&mut self, phase: usize, rng: &mut RngStream) {
        for (a, c) in self.pending.counts().iter().enumerate() {
            self.revealed.add_samples(a, c.successes, c.failures);
        }
        self.pending = History::counts_only(self.revealed.counts().len());
        self.phase = phase;
        let state = PosteriorState::from_counts(&self.he.prior, self.revealed.counts());
        self.exploit = self.he.exploit_arm(&state.means());
        if phase >= 2 && phase <= self.he.kappa() {
            let len = self.he.phase_len(phase) as usize;
            self.q = vec![false; len];
            for i in sample_indices(rng, len, self.he.n as usize) {
                self.q[i] = true;
            }
        } else {
            self.q.clear();
        }
    }
}

impl Episode for HeEpisode {
    fn recommend(&mut self, round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        let (phase, pos) = self.he.locate(round);
        if phase != self.phase {
            self.enter_phase(phase, rng);
        }
        let label = phase as u32;
        Ok(if phase == 1 {
            Recommendation::new(self.he.sequence[0], PhaseLabel::Explore(1))
        } else if phase > self.he.kappa() {
            Recommendation::new(self.exploit, PhaseLabel::Filler)
        } else if self.q[pos as usize] {
            Recommendation::new(self.he.sequence[phase - 1], PhaseLabel::Explore(label))
        } else {
            Recommendation::new(self.exploit, PhaseLabel::Exploit(label))
        })
    }

    fn observe(&mut self, round: u64, arm: Arm, rewards: Rewards) {
        let (phase, pos) = self.he.locate(round);
        let explored = phase == 1 || (phase <= self.he.kappa() && self.q[pos as usize]);
        if explored {
            self.pending.record(round, arm, rewards);
        }
    }
}

impl Strategy for HiddenExploration {
    fn name(&self) -> &str {
        "hidden-exploration"
    }

    fn declared_rounds(&self) -> Option<u64> {
        Some(self.total_rounds())
    }

    fn guaranteed_samples(&self) -> Option<u64> {
        let covered = self.sequence.iter().fold(Arm::empty(), |u, &a| u.union(a));
        (covered == self.family.coverage()).then_some(self.n)
    }

    fn resolved_params(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "l": self.l,
            "kappa": self.kappa(),
            "total_rounds": self.total_rounds(),
        })
    }

    fn start(&self, _instance: &Instance, _rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        let d = self.family.d();
        Ok(Box::new(HeEpisode {
            he: self.clone(),
            revealed: History::counts_only(d),
            pending: History::counts_only(d),
            q: Vec::new(),
            exploit: self.sequence[0],
            phase: 0,
        }))
    }

    fn exact_policy(&self) -> Option<&dyn ExactPolicy> {
        Some(self)
    }
}

// Exact key layout: [phase, pos, q_left, explore_flag, revealed (2d), pending (2d)]
const K_PHASE: usize = 0;
const K_POS: usize = 1;
const K_QLEFT: usize = 2;
const K_FLAG: usize = 3;
const K_DATA: usize = 4;

impl ExactPolicy for HiddenExploration {
    fn initial(&self, world: &World) -> Result<Vec<(PolicyKey, Vec<f64>)>> {
        let d = self.family.d();
        let mut key = vec![0u32; K_DATA + 4 * d];
        key[K_PHASE] = 1;
        Ok(vec![(key, vec![1.0; world.len()])])
    }

    fn branches(&self, key: &PolicyKey, _round: u64, world: &World) -> Result<Vec<Branch>> {
        let d = self.family.d();
        let phase = key[K_PHASE] as usize;
        let exploit = || -> Arm {
            let post = world.posterior(&key[K_DATA..K_DATA + 2 * d]);
            let mut means = vec![0.0; d];
            for (w, p) in post.iter().enumerate() {
                for (a, m) in means.iter_mut().enumerate() {
                    *m += p * world.thetas[w][a];
                }
            }
            self.exploit_arm(&means)
        };
        let mut explore_key = key.clone();
        explore_key[K_FLAG] = 1;
        if phase == 1 {
            return Ok(vec![Branch {
                prob: 1.0,
                arm: self.sequence[0],
                next: explore_key,
            }]);
        }
        if phase > self.kappa() {
            return Ok(vec![Branch {
                prob: 1.0,
                arm: exploit(),
                next: key.clone(),
            }]);
        }
        let q_left = key[K_QLEFT] as f64;
        let r_left = (self.phase_len(phase) - key[K_POS] as u64) as f64;
        let p = q_left / r_left;
        explore_key[K_QLEFT] -= u32::from(p > 0.0);
        let mut out = Vec::new();
        if p > 0.0 {
            out.push(Branch {
                prob: p,
                arm: self.sequence[phase - 1],
                next: explore_key,
            });
        }
        if p < 1.0 {
            out.push(Branch {
                prob: 1.0 - p,
                arm: exploit(),
                next: key.clone(),
            });
        }
        Ok(out)
    }

    fn observe(&self, key: &PolicyKey, arm: Arm, rewards: Rewards) -> PolicyKey {
        let d = self.family.d();
        let mut k = key.clone();
        if k[K_FLAG] == 1 {
            bump_counts(&mut k, K_DATA + 2 * d, arm, rewards);
            k[K_FLAG] = 0;
        }
        let phase = k[K_PHASE] as usize;
        if phase > self.kappa() {
            return k;
        }
        k[K_POS] += 1;
        if k[K_POS] as u64 == self.phase_len(phase) {
            k[K_PHASE] += 1;
            k[K_POS] = 0;
            k[K_QLEFT] = self.n as u32;
            for i in 0..2 * d {
                k[K_DATA + i] += k[K_DATA + 2 * d + i];
                k[K_DATA + 2 * d + i] = 0;
            }
        }
        k
    }
}
