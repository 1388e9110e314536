//! Exact enumeration of all histories for finite-support priors.
//!
//! The state of the recursion is the algorithm's sufficient state (a
//! [`PolicyKey`]) together with, for every support point `θ_w` of the prior,
//! the probability of having reached that state given `θ_w`. Histories that
//! lead to the same key are merged, so the cost is governed by the number of
//! distinct keys rather than the number of reward strings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{binomial, Arm, Prior, Problem, Rewards};
use crate::posterior::best_arm;
use crate::strategy::{PriorBest, Strategy, ThompsonSampling, UniformBaseline};

use super::{BicMarginTable, MarginCell, MarginRow, Mode, Support};

/// Default cap on enumeration work (state × branch × outcome expansions).
pub const DEFAULT_EXACT_BUDGET: u128 = 10_000_000;

/// Compact algorithm state.
pub type PolicyKey = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub arm: Arm,
    pub next: PolicyKey,
}

/// Finite list of possible mean vectors with their prior probabilities.
#[derive(Debug, Clone)]
pub struct World {
    pub thetas: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    /// Best arm under each support point.
    pub best: Vec<Arm>,
    /// All arms, lexicographic.
    pub arms: Vec<Arm>,
}

impl World {
    pub fn new(problem: &Problem, budget: u128) -> Result<Self> {
        let (thetas, probs): (Vec<Vec<f64>>, Vec<f64>) = match problem.prior() {
            Prior::Joint(j) => j.support().iter().map(|(m, p)| (m.to_vec(), *p)).unzip(),
            Prior::Product(p) => {
                let atoms = p.discretes()?;
                let size: u128 = atoms.iter().map(|a| a.support().len() as u128).product();
                if size > budget {
                    return Err(Error::BudgetExceeded {
                        needed: size,
                        budget,
                    });
                }
                let mut out = vec![(Vec::new(), 1.0)];
                for a in atoms {
                    let mut next = Vec::with_capacity(out.len() * a.support().len());
                    for (theta, p) in &out {
                        for &(t, q) in a.support() {
                            let mut th: Vec<f64> = theta.clone();
                            th.push(t);
                            next.push((th, p * q));
                        }
                    }
                    out = next;
                }
                out.into_iter().unzip()
            }
        };
        let family = problem.family();
        let best = thetas.iter().map(|t| best_arm(t, family)).collect();
        Ok(Self {
            thetas,
            probs,
            best,
            arms: family.arms(budget)?,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn d(&self) -> usize {
        self.thetas.first().map_or(0, Vec::len)
    }

    pub fn mu(&self, w: usize, arm: Arm) -> f64 {
        arm.atoms().map(|a| self.thetas[w][a]).sum()
    }

    /// Posterior over support points given per-atom counts laid out as
    /// `[s_0, f_0, s_1, f_1, ...]`.
    pub fn posterior(&self, counts: &[u32]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.len())
            .map(|w| {
                let mut l = self.probs[w].ln();
                for (a, c) in counts.chunks(2).enumerate() {
                    let t = self.thetas[w][a];
                    if c[0] > 0 {
                        l += c[0] as f64 * t.ln();
                    }
                    if c[1] > 0 {
                        l += c[1] as f64 * (-t).ln_1p();
                    }
                }
                l
            })
            .collect();
        crate::posterior::normalize_log_weights(&logs)
    }

    /// `Pr[A* = A]` under the posterior given counts, for every arm that
    /// has positive probability, in lexicographic arm order.
    pub fn best_arm_distribution(&self, counts: &[u32]) -> Vec<(Arm, f64)> {
        let post = self.posterior(counts);
        let mut acc: BTreeMap<Arm, f64> = BTreeMap::new();
        for (w, p) in post.iter().enumerate() {
            if *p > 0.0 {
                *acc.entry(self.best[w]).or_default() += p;
            }
        }
        acc.into_iter().collect()
    }
}

/// Exact description of an algorithm as a branching process over keys.
pub trait ExactPolicy: Send + Sync {
    /// Starting keys with, per support point, the probability of starting
    /// there. The default is a single empty key.
    fn initial(&self, world: &World) -> Result<Vec<(PolicyKey, Vec<f64>)>> {
        Ok(vec![(Vec::new(), vec![1.0; world.len()])])
    }

    /// Recommendation distribution at `round` from state `key`.
    fn branches(&self, key: &PolicyKey, round: u64, world: &World) -> Result<Vec<Branch>>;

    /// State after observing `rewards` for `arm`.
    fn observe(&self, key: &PolicyKey, arm: Arm, rewards: Rewards) -> PolicyKey;
}

/// Count-keyed observation shared by posterior-driven policies: the key is
/// `[s_0, f_0, ..., s_{d-1}, f_{d-1}]` starting at `offset`.
pub fn bump_counts(key: &mut [u32], offset: usize, arm: Arm, rewards: Rewards) {
    for a in arm.atoms() {
        let i = offset + 2 * a + usize::from(!rewards.get(a));
        key[i] += 1;
    }
}

/// Distribution of per-atom (successes, failures) after `n` free samples of
/// every atom, with per-support-point probabilities.
pub fn exogenous_initial(world: &World, n: u64, budget: u128) -> Result<Vec<(PolicyKey, Vec<f64>)>> {
    let d = world.d();
    let keys = (n as u128 + 1).checked_pow(d as u32).unwrap_or(u128::MAX);
    if keys.saturating_mul(world.len() as u128) > budget {
        return Err(Error::BudgetExceeded {
            needed: keys.saturating_mul(world.len() as u128),
            budget,
        });
    }
    let mut out = vec![(vec![0u32; 2 * d], vec![1.0; world.len()])];
    for a in 0..d {
        let mut next = Vec::new();
        for (key, w) in &out {
            for s in 0..=n {
                let mut k = key.clone();
                k[2 * a] = s as u32;
                k[2 * a + 1] = (n - s) as u32;
                let c = binomial(n as usize, s as usize) as f64;
                let wn: Vec<f64> = w
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let t = world.thetas[i][a];
                        x * c * t.powi(s as i32) * (1.0 - t).powi((n - s) as i32)
                    })
                    .collect();
                next.push((k, wn));
            }
        }
        out = next;
    }
    Ok(out)
}

impl ExactPolicy for ThompsonSampling {
    fn initial(&self, world: &World) -> Result<Vec<(PolicyKey, Vec<f64>)>> {
        exogenous_initial(world, self.exogenous(), DEFAULT_EXACT_BUDGET)
    }

    fn branches(&self, key: &PolicyKey, _round: u64, world: &World) -> Result<Vec<Branch>> {
        Ok(world
            .best_arm_distribution(key)
            .into_iter()
            .map(|(arm, prob)| Branch {
                prob,
                arm,
                next: key.clone(),
            })
            .collect())
    }

    fn observe(&self, key: &PolicyKey, arm: Arm, rewards: Rewards) -> PolicyKey {
        let mut k = key.clone();
        bump_counts(&mut k, 0, arm, rewards);
        k
    }
}

impl ExactPolicy for UniformBaseline {
    fn branches(&self, key: &PolicyKey, _round: u64, world: &World) -> Result<Vec<Branch>> {
        let p = 1.0 / world.arms.len() as f64;
        Ok(world
            .arms
            .iter()
            .map(|&arm| Branch {
                prob: p,
                arm,
                next: key.clone(),
            })
            .collect())
    }

    fn observe(&self, key: &PolicyKey, _arm: Arm, _rewards: Rewards) -> PolicyKey {
        key.clone()
    }
}

impl ExactPolicy for PriorBest {
    fn branches(&self, key: &PolicyKey, _round: u64, _world: &World) -> Result<Vec<Branch>> {
        Ok(vec![Branch {
            prob: 1.0,
            arm: self.arm(),
            next: key.clone(),
        }])
    }

    fn observe(&self, key: &PolicyKey, _arm: Arm, _rewards: Rewards) -> PolicyKey {
        key.clone()
    }
}

/// Result of an exact run: one table per requested round plus the total
/// probability mass at every depth (which must be 1).
#[derive(Debug, Clone)]
pub struct ExactOutcome {
    pub tables: Vec<BicMarginTable>,
    pub mass_by_round: Vec<f64>,
    pub work: u128,
}

fn outcomes(arm: Arm) -> impl Iterator<Item = Rewards> {
    let atoms: Vec<usize> = arm.atoms().collect();
    (0u64..(1u64 << atoms.len())).map(move |mask| {
        let mut bits = 0u64;
        for (i, &a) in atoms.iter().enumerate() {
            if mask & (1 << i) != 0 {
                bits |= 1 << a;
            }
        }
        Rewards::from_bits(bits)
    })
}

/// Exact conditional margins at each round in `rounds` (1-based).
pub fn bic_margin_exact(
    problem: &Problem,
    strategy: &dyn Strategy,
    rounds: &[u64],
    budget: u128,
) -> Result<ExactOutcome> {
    let policy = strategy.exact_policy().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "algorithm `{}` has no exact description",
            strategy.name()
        ))
    })?;
    if rounds.is_empty() {
        return Err(Error::InvalidArgument("empty round set".into()));
    }
    let world = World::new(problem, budget)?;
    let max_round = *rounds.iter().max().unwrap();
    let n_w = world.len();
    let k_arms = world.arms.len();
    let arm_index: BTreeMap<Arm, usize> =
        world.arms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut work: u128 = 0;
    let mut states: BTreeMap<PolicyKey, Vec<f64>> = BTreeMap::new();
    for (k, w) in policy.initial(&world)? {
        let e = states.entry(k).or_insert_with(|| vec![0.0; n_w]);
        for (x, y) in e.iter_mut().zip(w) {
            *x += y;
        }
    }
    let mass = |states: &BTreeMap<PolicyKey, Vec<f64>>| -> f64 {
        states
            .values()
            .map(|w| w.iter().zip(&world.probs).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let mut mass_by_round = vec![mass(&states)];
    let mut tables = Vec::new();
    for t in 1..=max_round {
        let mut next: BTreeMap<PolicyKey, Vec<f64>> = BTreeMap::new();
        let want_table = rounds.contains(&t);
        // pr[A] and s[A][B] = E[μ(B) 1{rec = A}]
        let mut pr = vec![0.0; k_arms];
        let mut s = vec![vec![0.0; k_arms]; k_arms];
        let mut hits = vec![0u64; k_arms];
        for (key, w) in &states {
            for br in policy.branches(key, t, &world)? {
                if br.prob == 0.0 {
                    continue;
                }
                let ai = *arm_index.get(&br.arm).ok_or_else(|| {
                    Error::InvalidArgument(format!("policy recommended non-family arm {}", br.arm))
                })?;
                if want_table {
                    hits[ai] += 1;
                    for wi in 0..n_w {
                        let m = br.prob * w[wi] * world.probs[wi];
                        if m == 0.0 {
                            continue;
                        }
                        pr[ai] += m;
                        for (bj, &b) in world.arms.iter().enumerate() {
                            s[ai][bj] += m * world.mu(wi, b);
                        }
                    }
                }
                if t == max_round {
                    continue;
                }
                for r in outcomes(br.arm) {
                    work += n_w as u128;
                    if work > budget {
                        return Err(Error::BudgetExceeded {
                            needed: work,
                            budget,
                        });
                    }
                    let nk = policy.observe(&br.next, br.arm, r);
                    let lik: Vec<f64> = (0..n_w)
                        .map(|wi| {
                            br.arm.atoms().fold(br.prob * w[wi], |acc, a| {
                                let th = world.thetas[wi][a];
                                acc * if r.get(a) { th } else { 1.0 - th }
                            })
                        })
                        .collect();
                    let e = next.entry(nk).or_insert_with(|| vec![0.0; n_w]);
                    for (x, y) in e.iter_mut().zip(lik) {
                        *x += y;
                    }
                }
            }
        }
        if want_table {
            let mut rows = Vec::new();
            for (ai, &a) in world.arms.iter().enumerate() {
                if pr[ai] <= 0.0 {
                    continue;
                }
                let cells = world
                    .arms
                    .iter()
                    .enumerate()
                    .filter(|&(bj, _)| bj != ai)
                    .map(|(bj, &b)| MarginCell {
                        competitor: b,
                        margin: (s[ai][ai] - s[ai][bj]) / pr[ai],
                        ci_radius: 0.0,
                    })
                    .collect();
                rows.push(MarginRow {
                    arm: a,
                    pr_recommend: pr[ai],
                    support_count: hits[ai],
                    support: Support::Sufficient,
                    cells,
                });
            }
            tables.push(BicMarginTable {
                round: t,
                mode: Mode::Exact,
                rows,
            });
        }
        if t < max_round {
            states = next;
            mass_by_round.push(mass(&states));
        }
    }
    Ok(ExactOutcome {
        tables,
        mass_by_round,
        work,
    })
}
