//! Hidden hallucination: exploration through agents that best-respond to a
//! ledger of past rewards, where one uniformly placed round per phase sees
//! a ledger whose well-explored atoms have been made to look bad.
//!
//! Rewards are Bernoulli, so hallucinated rewards are regenerated as
//! Bernoulli draws from the hallucinated means.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{encode_explicit, encode_m_subsets, TransitionGraph};
use crate::model::{Arm, ArmFamily, AtomCounts, AtomPrior, FamilyKind, Instance, Problem, ProductPrior, Rewards};
use crate::posterior::{best_arm, PosteriorState};
use crate::rng::RngStream;
use crate::strategy::{Episode, PhaseLabel, Recommendation, Strategy};

/// Attempts allowed when rejection-sampling the punish event.
pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Cap on the default phase length.
pub const MAX_DEFAULT_PHASE: u64 = 1_000_000;

/// Below this the punish probability is treated as zero.
pub const MIN_Q_PUN: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PunishSampler {
    /// Draw from the prior and reject until the punish event holds.
    Rejection,
    /// Sample each truncated marginal directly.
    #[default]
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HhSettings {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Phase length; defaults to `min(⌈2/q_pun⌉, 10⁶)`.
    pub n_ph: Option<u64>,
    pub sampler: PunishSampler,
}

impl Default for HhSettings {
    fn default() -> Self {
        Self {
            delta: 0.1,
            c1: 1.0,
            c2: 1.0,
            n_ph: None,
            sampler: PunishSampler::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HhConstants {
    /// Stages `H`.
    pub h: usize,
    /// States `S`.
    pub s: usize,
    /// Actions `A` (atoms).
    pub a: usize,
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Smallest prior mean; exact, so its CI radius is 0.
    pub r_alt: f64,
    pub r_alt_ci: f64,
    /// `r_alt / (18 H)`.
    pub eps_pun: f64,
    /// `Π_ℓ Pr[θ_ℓ ≤ eps_pun]`, exact from the marginal CDFs.
    pub q_pun: f64,
    pub q_pun_ci: f64,
    pub n_lrn: u64,
    /// `c2 · n_lrn · q_pun · r_alt⁻³ · S A H⁴`, as printed.
    pub n0_as_stated: f64,
    /// Same with `q_pun⁻¹`, which grows as punishing gets harder; used for
    /// scheduling.
    pub n0_scheduled: f64,
    pub n0: u64,
    pub n_ph: u64,
    pub n_ph_is_default: bool,
    pub sampler: PunishSampler,
}

/// Transition graph for a family: the family's own graph, the m-subset
/// encoding, or the explicit-family encoding.
pub fn graph_for_family(family: &ArmFamily) -> Result<TransitionGraph> {
    match family.kind() {
        FamilyKind::DagPaths(g) => Ok(g.clone()),
        FamilyKind::AllMSubsets { m } => encode_m_subsets(family.d(), *m),
        FamilyKind::Explicit(arms) => encode_explicit(family.d(), arms),
    }
}

pub fn estimate_hh_constants(
    prior: &ProductPrior,
    graph: &TransitionGraph,
    settings: &HhSettings,
) -> Result<HhConstants> {
    if !(settings.delta > 0.0 && settings.delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {}", settings.delta)));
    }
    let d = prior.d();
    graph.validate(d)?;
    let h = graph.horizon().max(1);
    let s = graph.num_states();
    let a = d;
    let r_alt = prior.means().into_iter().fold(f64::INFINITY, f64::min);
    if r_alt <= 0.0 {
        return Err(Error::InvalidPrior(format!("smallest prior mean is {r_alt}; it must be positive")));
    }
    let eps_pun = r_alt / (18.0 * h as f64);
    let q_pun: f64 = prior.atoms().iter().map(|p| p.cdf(eps_pun)).product();
    if !(q_pun >= MIN_Q_PUN) {
        return Err(Error::ZeroQpun { q_pun });
    }
    let (hf, sf, af) = (h as f64, s as f64, a as f64);
    let h4 = hf.powi(4);
    let log_term = (sf * af * hf / (settings.delta * r_alt * q_pun)).ln();
    let n_lrn = (settings.c1 / (r_alt * r_alt) * h4 * (sf + log_term)).ceil().max(1.0) as u64;
    let base = settings.c2 * n_lrn as f64 * r_alt.powi(-3) * sf * af * h4;
    let n0_as_stated = base * q_pun;
    let n0_scheduled = base / q_pun;
    let n0 = if n0_scheduled >= u64::MAX as f64 {
        u64::MAX
    } else {
        n0_scheduled.ceil() as u64
    };
    let (n_ph, n_ph_is_default) = match settings.n_ph {
        Some(n) if n >= 1 => (n, false),
        Some(_) => return Err(Error::InvalidArgument("n_ph must be at least 1".into())),
        None => ((2.0 / q_pun).ceil().min(MAX_DEFAULT_PHASE as f64) as u64, true),
    };
    Ok(HhConstants {
        h,
        s,
        a,
        delta: settings.delta,
        c1: settings.c1,
        c2: settings.c2,
        r_alt,
        r_alt_ci: 0.0,
        eps_pun,
        q_pun,
        q_pun_ci: 0.0,
        n_lrn,
        n0_as_stated,
        n0_scheduled,
        n0,
        n_ph,
        n_ph_is_default,
        sampler: settings.sampler,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    Raw,
    Censored,
    Honest,
    Hallucinated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub arm: Arm,
    /// Per-atom rewards that are visible, in atom order.
    pub rewards: Vec<(usize, bool)>,
}

/// Actions of past hallucination rounds with whatever rewards the ledger
/// kind reveals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ledger {
    pub kind: LedgerKind,
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn raw(rounds: &[(Arm, Rewards)]) -> Self {
        Self {
            kind: LedgerKind::Raw,
            entries: rounds
                .iter()
                .map(|&(arm, r)| LedgerEntry {
                    arm,
                    rewards: arm.atoms().map(|a| (a, r.get(a))).collect(),
                })
                .collect(),
        }
    }

    fn filtered(&self, kind: LedgerKind, keep: Arm) -> Self {
        Self {
            kind,
            entries: self
                .entries
                .iter()
                .map(|e| LedgerEntry {
                    arm: e.arm,
                    rewards: e.rewards.iter().copied().filter(|(a, _)| keep.contains(*a)).collect(),
                })
                .collect(),
        }
    }

    pub fn censored(&self) -> Self {
        self.filtered(LedgerKind::Censored, Arm::empty())
    }

    /// Rewards kept only for `explored` atoms.
    pub fn honest(&self, explored: Arm) -> Self {
        self.filtered(LedgerKind::Honest, explored)
    }

    /// Rewards of `explored` atoms redrawn as Bernoulli(`theta_hal`); all
    /// other rewards removed.
    pub fn hallucinated<R: Rng + ?Sized>(&self, explored: Arm, theta_hal: &[f64], rng: &mut R) -> Self {
        Self {
            kind: LedgerKind::Hallucinated,
            entries: self
                .entries
                .iter()
                .map(|e| LedgerEntry {
                    arm: e.arm,
                    rewards: e
                        .arm
                        .atoms()
                        .filter(|&a| explored.contains(a))
                        .map(|a| (a, rng.random::<f64>() < theta_hal[a]))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn counts(&self, d: usize) -> Vec<AtomCounts> {
        let mut c = vec![AtomCounts::default(); d];
        for e in &self.entries {
            for &(a, r) in &e.rewards {
                if r {
                    c[a].successes += 1;
                } else {
                    c[a].failures += 1;
                }
            }
        }
        c
    }
}

/// Exact probability that every atom in `atoms` is at most `eps`.
pub fn punish_probability(prior: &ProductPrior, atoms: Arm, eps: f64) -> f64 {
    atoms.atoms().map(|a| prior.atom(a).cdf(eps)).product()
}

/// Draw `θ` from the prior conditioned on `θ_ℓ ≤ eps` for `ℓ ∈ atoms`.
/// Coordinates outside `atoms` are drawn from the prior. Returns the draw
/// and the number of attempts used.
pub fn sample_punished<R: Rng + ?Sized>(
    prior: &ProductPrior,
    atoms: Arm,
    eps: f64,
    sampler: PunishSampler,
    rng: &mut R,
) -> Result<(Vec<f64>, u64)> {
    match sampler {
        PunishSampler::Rejection => {
            for attempt in 1..=REJECTION_BUDGET {
                let theta = prior.sample_theta(rng);
                if atoms.atoms().all(|a| theta[a] <= eps) {
                    return Ok((theta, attempt));
                }
            }
            Err(Error::RejectionBudgetExceeded {
                attempts: REJECTION_BUDGET,
            })
        }
        PunishSampler::Exact => {
            let mut theta = prior.sample_theta(rng);
            for a in atoms.atoms() {
                theta[a] = sample_truncated(prior.atom(a), eps, rng)?;
            }
            Ok((theta, 1))
        }
    }
}

/// One draw from `p` conditioned on `θ ≤ eps`, by CDF inversion.
fn sample_truncated<R: Rng + ?Sized>(p: &AtomPrior, eps: f64, rng: &mut R) -> Result<f64> {
    let mass = p.cdf(eps);
    if !(mass > 0.0) {
        return Err(Error::ZeroQpun { q_pun: mass });
    }
    match p {
        AtomPrior::Discrete(dp) => {
            let kept: Vec<(f64, f64)> = dp.support().iter().copied().filter(|s| s.0 <= eps).collect();
            let u = rng.random::<f64>() * mass;
            let mut acc = 0.0;
            for &(t, w) in &kept {
                acc += w;
                if u < acc {
                    return Ok(t);
                }
            }
            Ok(kept.last().unwrap().0)
        }
        AtomPrior::Beta(b) => {
            let u = rng.random::<f64>() * mass;
            let (mut lo, mut hi) = (0.0, eps.min(1.0));
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if b.cdf(mid) < u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

/// Ledger state of one hidden-hallucination run, kept as per-atom counts of
/// the hallucination rounds.
#[derive(Debug, Clone)]
struct HhState {
    prior: ProductPrior,
    family: ArmFamily,
    n_lrn: u64,
    eps_pun: f64,
    sampler: PunishSampler,
    appearances: Vec<u64>,
    successes: Vec<u64>,
}

impl HhState {
    fn new(prior: &ProductPrior, family: &ArmFamily, c: &HhConstants) -> Self {
        let d = prior.d();
        Self {
            prior: prior.clone(),
            family: family.clone(),
            n_lrn: c.n_lrn,
            eps_pun: c.eps_pun,
            sampler: c.sampler,
            appearances: vec![0; d],
            successes: vec![0; d],
        }
    }

    fn explored(&self) -> Arm {
        Arm::from_atoms(
            self.appearances
                .iter()
                .enumerate()
                .filter(|(_, &n)| n >= self.n_lrn)
                .map(|(a, _)| a),
        )
    }

    fn best_response(&self, successes: &[u64], explored: Arm) -> Arm {
        let mut post = PosteriorState::new(&self.prior);
        for a in explored.atoms() {
            post.observe_counts(a, successes[a], self.appearances[a] - successes[a]);
        }
        best_arm(&post.means(), &self.family)
    }

    fn honest_arm(&self) -> Arm {
        self.best_response(&self.successes, self.explored())
    }

    fn hallucinated_arm<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Arm> {
        let explored = self.explored();
        if explored.is_empty() {
            return Ok(self.honest_arm());
        }
        let (theta, _) = sample_punished(&self.prior, explored, self.eps_pun, self.sampler, rng)?;
        let mut fake = vec![0u64; theta.len()];
        for a in explored.atoms() {
            let n = self.appearances[a];
            fake[a] = Binomial::new(n, theta[a].clamp(0.0, 1.0))
                .map(|b| b.sample(rng))
                .unwrap_or(0);
        }
        Ok(self.best_response(&fake, explored))
    }

    fn record(&mut self, arm: Arm, rewards: Rewards) {
        for a in arm.atoms() {
            self.appearances[a] += 1;
            self.successes[a] += u64::from(rewards.get(a));
        }
    }
}

/// Arms and hallucination position for one phase.
#[derive(Debug, Clone, Copy)]
struct PhasePlan {
    honest: Arm,
    hallucinated: Arm,
    position: u64,
}

fn plan_phase<R: Rng + ?Sized>(state: &HhState, n_ph: u64, rng: &mut R) -> Result<PhasePlan> {
    let honest = state.honest_arm();
    let hallucinated = state.hallucinated_arm(rng)?;
    Ok(PhasePlan {
        honest,
        hallucinated,
        position: rng.random_range(0..n_ph),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Round at which every atom of the family had been sampled at least once.
    pub coverage_round: Option<u64>,
    pub success: bool,
    pub phases: u64,
    pub rounds_simulated: u64,
    pub explored_atoms: Arm,
    /// Arm played in each completed hallucination round.
    pub hallucination_arms: Vec<Arm>,
}

/// Run hidden hallucination against `instance` until every atom has been
/// sampled or `max_rounds` have passed. Honest rounds within a phase all
/// play the same arm, so the run is simulated phase by phase; only the
/// hallucination rounds' rewards enter the ledger.
pub fn hidden_hallucination(
    problem: &Problem,
    constants: &HhConstants,
    instance: &Instance,
    max_rounds: u64,
    rng: &mut RngStream,
) -> Result<CoverageReport> {
    let prior = problem.prior().product()?;
    let target = problem.family().coverage();
    let mut state = HhState::new(prior, problem.family(), constants);
    let n_ph = constants.n_ph;
    let mut covered = Arm::empty();
    let mut hallucination_arms = Vec::new();
    let mut phase = 0u64;
    let mut start = 1u64;
    while start <= max_rounds {
        let plan = plan_phase(&state, n_ph, rng)?;
        let len = n_ph.min(max_rounds - start + 1);
        // events in round order: (offset, arm)
        let first_honest = u64::from(plan.position == 0);
        let mut events = Vec::with_capacity(2);
        if first_honest < len {
            events.push((first_honest, plan.honest));
        }
        if plan.position < len {
            events.push((plan.position, plan.hallucinated));
        }
        events.sort_by_key(|e| e.0);
        for (offset, arm) in events {
            covered = covered.union(arm);
            if target.is_subset_of(covered) {
                return Ok(CoverageReport {
                    coverage_round: Some(start + offset),
                    success: true,
                    phases: phase + 1,
                    rounds_simulated: start + offset,
                    explored_atoms: state.explored(),
                    hallucination_arms,
                });
            }
        }
        if plan.position < len {
            let r = instance.pull(plan.hallucinated, rng);
            state.record(plan.hallucinated, r);
            hallucination_arms.push(plan.hallucinated);
        }
        phase += 1;
        start += len;
    }
    Ok(CoverageReport {
        coverage_round: None,
        success: false,
        phases: phase,
        rounds_simulated: max_rounds,
        explored_atoms: state.explored(),
        hallucination_arms,
    })
}

/// Hidden hallucination as a round-by-round strategy for `rounds` rounds.
#[derive(Debug, Clone)]
pub struct HiddenHallucination {
    prior: ProductPrior,
    family: ArmFamily,
    constants: HhConstants,
    rounds: u64,
}

impl HiddenHallucination {
    pub fn new(problem: &Problem, constants: HhConstants, rounds: u64) -> Result<Self> {
        Ok(Self {
            prior: problem.prior().product()?.clone(),
            family: problem.family().clone(),
            constants,
            rounds,
        })
    }

    pub fn constants(&self) -> &HhConstants {
        &self.constants
    }
}

struct HhEpisode {
    state: HhState,
    n_ph: u64,
    plan: Option<(u64, PhasePlan)>,
}

impl HhEpisode {
    fn new(prior: &ProductPrior, family: &ArmFamily, c: &HhConstants) -> Self {
        Self {
            state: HhState::new(prior, family, c),
            n_ph: c.n_ph,
            plan: None,
        }
    }

    /// `round` is 1-based within this run.
    fn recommend(&mut self, round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        let phase = (round - 1) / self.n_ph;
        let pos = (round - 1) % self.n_ph;
        if self.plan.is_none_or(|(p, _)| p != phase) {
            self.plan = Some((phase, plan_phase(&self.state, self.n_ph, rng)?));
        }
        let (_, plan) = self.plan.unwrap();
        let label = phase as u32 + 1;
        Ok(if pos == plan.position {
            Recommendation::new(plan.hallucinated, PhaseLabel::Hallucinate(label))
        } else {
            Recommendation::new(plan.honest, PhaseLabel::Honest(label))
        })
    }

    fn observe(&mut self, round: u64, arm: Arm, rewards: Rewards) {
        let phase = (round - 1) / self.n_ph;
        let pos = (round - 1) % self.n_ph;
        if let Some((p, plan)) = self.plan {
            if p == phase && pos == plan.position {
                self.state.record(arm, rewards);
            }
        }
    }
}

impl Episode for HhEpisode {
    fn recommend(&mut self, round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        HhEpisode::recommend(self, round, rng)
    }

    fn observe(&mut self, round: u64, arm: Arm, rewards: Rewards) {
        HhEpisode::observe(self, round, arm, rewards)
    }
}

impl Strategy for HiddenHallucination {
    fn name(&self) -> &str {
        "hidden-hallucination"
    }

    fn declared_rounds(&self) -> Option<u64> {
        Some(self.rounds)
    }

    fn resolved_params(&self) -> serde_json::Value {
        serde_json::json!({
            "rounds": self.rounds,
            "constants": self.constants,
        })
    }

    fn start(&self, _instance: &Instance, _rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        Ok(Box::new(HhEpisode::new(&self.prior, &self.family, &self.constants)))
    }
}

/// Runs hidden hallucination `n_repeats` times for `N₀` rounds each, from
/// an empty ledger every time, then plays the prior-best arm; the total
/// length `N₀·n + d·n` is fixed in advance.
#[derive(Debug, Clone)]
pub struct HhBootstrap {
    inner: HiddenHallucination,
    n0: u64,
    n_repeats: u64,
    prior_best: Arm,
}

impl HhBootstrap {
    /// `n0` overrides the computed `N₀`.
    pub fn new(problem: &Problem, constants: HhConstants, n_repeats: u64, n0: Option<u64>) -> Result<Self> {
        if n_repeats == 0 {
            return Err(Error::InvalidArgument("n_repeats must be at least 1".into()));
        }
        let n0 = n0.unwrap_or(constants.n0);
        if n0 == 0 {
            return Err(Error::InvalidArgument("N0 must be at least 1".into()));
        }
        Ok(Self {
            inner: HiddenHallucination::new(problem, constants, n0)?,
            n0,
            n_repeats,
            prior_best: best_arm(&problem.prior().means(), problem.family()),
        })
    }

    pub fn total_rounds(&self) -> u64 {
        let d = self.inner.family.d() as u64;
        self.n0
            .saturating_mul(self.n_repeats)
            .saturating_add(d.saturating_mul(self.n_repeats))
    }
}

struct HhBootstrapEpisode {
    cfg: HhBootstrap,
    current: Option<(u64, HhEpisode)>,
}

impl Episode for HhBootstrapEpisode {
    fn recommend(&mut self, round: u64, rng: &mut RngStream) -> Result<Recommendation> {
        let rep = (round - 1) / self.cfg.n0;
        if rep >= self.cfg.n_repeats {
            return Ok(Recommendation::new(self.cfg.prior_best, PhaseLabel::Filler));
        }
        if self.current.as_ref().is_none_or(|(r, _)| *r != rep) {
            let c = &self.cfg.inner;
            self.current = Some((rep, HhEpisode::new(&c.prior, &c.family, &c.constants)));
        }
        let local = round - rep * self.cfg.n0;
        self.current.as_mut().unwrap().1.recommend(local, rng)
    }

    fn observe(&mut self, round: u64, arm: Arm, rewards: Rewards) {
        let rep = (round - 1) / self.cfg.n0;
        if let Some((r, ep)) = self.current.as_mut() {
            if *r == rep {
                ep.observe(round - rep * self.cfg.n0, arm, rewards);
            }
        }
    }
}

impl Strategy for HhBootstrap {
    fn name(&self) -> &str {
        "hh-bootstrap"
    }

    fn declared_rounds(&self) -> Option<u64> {
        Some(self.total_rounds())
    }

    fn guaranteed_samples(&self) -> Option<u64> {
        Some(self.n_repeats)
    }

    fn resolved_params(&self) -> serde_json::Value {
        serde_json::json!({
            "n_repeats": self.n_repeats,
            "n0": self.n0,
            "t0": self.total_rounds(),
            "constants": self.inner.constants,
        })
    }

    fn start(&self, _instance: &Instance, _rng: &mut RngStream) -> Result<Box<dyn Episode>> {
        Ok(Box::new(HhBootstrapEpisode {
            cfg: self.clone(),
            current: None,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_replicate;

    fn uniform_problem(d: usize) -> Problem {
        Problem::product(
            ProductPrior::beta(&vec![(1.0, 1.0); d]).unwrap(),
            ArmFamily::singletons(d).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constants_uniform_two_stage() {
        let prior = ProductPrior::beta(&[(1.0, 1.0), (1.0, 1.0)]).unwrap();
        let g = encode_m_subsets(2, 2).unwrap();
        let c = estimate_hh_constants(&prior, &g, &HhSettings::default()).unwrap();
        assert_eq!(c.h, 2);
        assert_eq!(c.r_alt, 0.5);
        assert!((c.eps_pun - 1.0 / 72.0).abs() < 1e-15);
        assert!((c.q_pun - (1.0f64 / 72.0).powi(2)).abs() < 1e-15);
        let log = (c.s as f64 * 2.0 * 2.0 / (0.1 * 0.5 * c.q_pun)).ln();
        let expect = (4.0 * 16.0 * (c.s as f64 + log)).ceil() as u64;
        assert_eq!(c.n_lrn, expect);
        assert!((c.n0_scheduled * c.q_pun * c.q_pun - c.n0_as_stated).abs() <= 1e-9 * c.n0_as_stated);
    }

    #[test]
    fn constants_three_singletons() {
        let prior = ProductPrior::beta(&[(1.0, 1.0); 3]).unwrap();
        let g = encode_m_subsets(3, 1).unwrap();
        let c = estimate_hh_constants(&prior, &g, &HhSettings::default()).unwrap();
        assert_eq!((c.h, c.s, c.a), (1, 4, 3));
        assert_eq!(c.n_ph, 93_312);
        assert_eq!(c.n_lrn, 81);
    }

    #[test]
    fn point_mass_gives_zero_q() {
        let prior = ProductPrior::new(vec![AtomPrior::discrete(vec![(0.3, 1.0)]).unwrap()]).unwrap();
        let g = encode_m_subsets(1, 1).unwrap();
        assert!(matches!(
            estimate_hh_constants(&prior, &g, &HhSettings::default()),
            Err(Error::ZeroQpun { .. })
        ));
    }

    #[test]
    fn n_lrn_scales_with_h4() {
        let prior = ProductPrior::beta(&[(1.0, 1.0); 4]).unwrap();
        let s2 = HhSettings::default();
        let c2 = estimate_hh_constants(&prior, &encode_m_subsets(4, 2).unwrap(), &s2).unwrap();
        let c4 = estimate_hh_constants(&prior, &encode_m_subsets(4, 4).unwrap(), &s2).unwrap();
        let recompute = |c: &HhConstants| {
            let (h, s, a) = (c.h as f64, c.s as f64, c.a as f64);
            (h.powi(4) / (c.r_alt * c.r_alt) * (s + (s * a * h / (0.1 * c.r_alt * c.q_pun)).ln())).ceil() as u64
        };
        assert_eq!(c2.n_lrn, recompute(&c2));
        assert_eq!(c4.n_lrn, recompute(&c4));
        assert!(c4.n_lrn > 16 * c2.n_lrn / 2);
    }

    #[test]
    fn ledger_typing() {
        let raw = Ledger::raw(&[
            (Arm::from_atoms([0, 1]), Rewards::from_bits(0b01)),
            (Arm::from_atoms([1, 2]), Rewards::from_bits(0b110)),
        ]);
        let explored = Arm::singleton(1);
        let honest = raw.honest(explored);
        assert!(honest.entries.iter().all(|e| e.rewards.iter().all(|(a, _)| *a == 1)));
        assert!(raw.censored().entries.iter().all(|e| e.rewards.is_empty()));
        let mut rng = RngStream::new(1, 0);
        let hal = raw.hallucinated(explored, &[0.5, 0.0, 0.5], &mut rng);
        assert_eq!(hal.kind, LedgerKind::Hallucinated);
        for e in &hal.entries {
            assert_eq!(e.rewards, vec![(1, false)]);
        }
        let c = honest.counts(3);
        assert_eq!((c[1].successes, c[1].failures), (1, 1));
        assert_eq!(c[0].total() + c[2].total(), 0);
    }

    #[test]
    fn punish_samplers_agree() {
        let prior = ProductPrior::beta(&[(1.0, 1.0), (2.0, 3.0)]).unwrap();
        let atoms = Arm::from_atoms([0, 1]);
        let eps = 0.3;
        let q = punish_probability(&prior, atoms, eps);
        let mut rng = RngStream::new(3, 0);
        let mut attempts = 0u64;
        let calls = 20_000;
        let mut rej = Vec::new();
        let mut ex = Vec::new();
        for _ in 0..calls {
            let (t, a) = sample_punished(&prior, atoms, eps, PunishSampler::Rejection, &mut rng).unwrap();
            assert!(t[0] <= eps && t[1] <= eps);
            attempts += a;
            rej.push(t[1]);
            let (t, _) = sample_punished(&prior, atoms, eps, PunishSampler::Exact, &mut rng).unwrap();
            assert!(t[0] <= eps && t[1] <= eps);
            ex.push(t[1]);
        }
        // acceptance rate vs exact punish probability
        let rate = calls as f64 / attempts as f64;
        let se = (q * (1.0 - q) / attempts as f64).sqrt();
        assert!((rate - q).abs() < 3.0 * se + 1e-3, "{rate} vs {q}");
        // two-sample Kolmogorov-Smirnov at the 0.1% level
        rej.sort_by(f64::total_cmp);
        ex.sort_by(f64::total_cmp);
        let (mut i, mut j, mut dmax) = (0, 0, 0.0f64);
        while i < rej.len() && j < ex.len() {
            if rej[i] <= ex[j] {
                i += 1;
            } else {
                j += 1;
            }
            dmax = dmax.max((i as f64 - j as f64).abs() / calls as f64);
        }
        assert!(dmax < 1.95 * (2.0 / calls as f64).sqrt());
    }

    #[test]
    fn first_phase_plays_prior_best() {
        let p = Problem::product(
            ProductPrior::beta(&[(2.0, 1.0), (1.0, 1.0), (1.0, 2.0)]).unwrap(),
            ArmFamily::singletons(3).unwrap(),
        )
        .unwrap();
        let g = graph_for_family(p.family()).unwrap();
        let mut c = estimate_hh_constants(p.prior().product().unwrap(), &g, &HhSettings::default()).unwrap();
        c.n_ph = 50;
        let hh = HiddenHallucination::new(&p, c, 50).unwrap();
        let out = run_replicate(&p, &hh, 50, 1, 0).unwrap();
        assert!(out.rows.iter().all(|r| r.arm == Arm::singleton(0)));
        assert_eq!(out.rows.iter().filter(|r| r.is_exploration).count(), 1);
    }

    #[test]
    fn single_arm_covers_at_round_one() {
        let p = Problem::product(
            ProductPrior::beta(&[(1.0, 1.0), (1.0, 2.0)]).unwrap(),
            ArmFamily::explicit(2, vec![Arm::from_atoms([0, 1])]).unwrap(),
        )
        .unwrap();
        let g = graph_for_family(p.family()).unwrap();
        let c = estimate_hh_constants(p.prior().product().unwrap(), &g, &HhSettings::default()).unwrap();
        let mut rng = RngStream::new(0, 0);
        let inst = Instance::new(vec![0.5, 0.5]);
        let r = hidden_hallucination(&p, &c, &inst, 10, &mut rng).unwrap();
        assert_eq!(r.coverage_round, Some(1));
    }

    #[test]
    fn uniform_singletons_get_covered() {
        let p = uniform_problem(3);
        let g = graph_for_family(p.family()).unwrap();
        let c = estimate_hh_constants(p.prior().product().unwrap(), &g, &HhSettings::default()).unwrap();
        for rep in 0..20 {
            let mut rng = RngStream::new(8, rep);
            let theta = p.prior().sample_theta(&mut rng);
            let r = hidden_hallucination(&p, &c, &Instance::new(theta), c.n0, &mut rng).unwrap();
            assert!(r.success);
        }
    }

    #[test]
    fn round_strategy_has_one_hallucination_per_phase() {
        let p = uniform_problem(3);
        let g = graph_for_family(p.family()).unwrap();
        let mut c = estimate_hh_constants(p.prior().product().unwrap(), &g, &HhSettings::default()).unwrap();
        c.n_ph = 7;
        c.n_lrn = 3;
        let hh = HiddenHallucination::new(&p, c.clone(), 400).unwrap();
        let out = run_replicate(&p, &hh, 400, 2, 0).unwrap();
        let mut covered = Arm::empty();
        let first = out.rows.iter().find_map(|r| {
            covered = covered.union(r.arm);
            (covered == p.family().coverage()).then_some(r.round)
        });
        assert!(first.is_some());
        // 57 full phases plus one round of a 58th
        let hal = out.rows.iter().filter(|r| r.is_exploration).count();
        assert!(hal == 57 || hal == 58, "{hal}");
    }

    #[test]
    fn bootstrap_declares_total() {
        let p = Problem::product(
            ProductPrior::beta(&[(1.0, 1.0), (1.0, 2.0)]).unwrap(),
            ArmFamily::explicit(2, vec![Arm::from_atoms([0, 1])]).unwrap(),
        )
        .unwrap();
        let g = graph_for_family(p.family()).unwrap();
        let c = estimate_hh_constants(p.prior().product().unwrap(), &g, &HhSettings::default()).unwrap();
        let b = HhBootstrap::new(&p, c, 1, Some(30)).unwrap();
        assert_eq!(b.declared_rounds(), Some(30 + 2));
        let out = run_replicate(&p, &b, 32, 1, 0).unwrap();
        assert!(out.rows.iter().all(|r| r.arm == Arm::from_atoms([0, 1])));
    }
}
