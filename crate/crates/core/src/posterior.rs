//! Conjugate Beta-Bernoulli and finite-support posteriors, and the
//! best-arm argmax for each family kind.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};

use crate::model::{
    sample_discrete, Arm, ArmFamily, AtomCounts, AtomPrior, FamilyKind, ProductPrior, Rewards,
    TwoArmJointPrior,
};
use crate::scalar::Scalar;

/// Posterior of one atom. Discrete weights are kept as unnormalized logs.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomPosterior {
    Beta { alpha: f64, beta: f64 },
    Discrete { thetas: Arc<[f64]>, log_w: Vec<f64> },
}

fn log_likelihood(theta: f64, successes: u64, failures: u64) -> f64 {
    let mut l = 0.0;
    if successes > 0 {
        l += successes as f64 * theta.ln();
    }
    if failures > 0 {
        l += failures as f64 * (-theta).ln_1p();
    }
    l
}

/// Normalize log-weights into probabilities.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; log_w.len()];
    }
    let w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

impl AtomPosterior {
    pub fn from_prior(prior: &AtomPrior) -> Self {
        match prior {
            AtomPrior::Beta(b) => AtomPosterior::Beta {
                alpha: b.alpha,
                beta: b.beta,
            },
            AtomPrior::Discrete(p) => AtomPosterior::Discrete {
                thetas: p.support().iter().map(|s| s.0).collect(),
                log_w: p.support().iter().map(|s| s.1.ln()).collect(),
            },
        }
    }

    pub fn observe(&mut self, successes: u64, failures: u64) {
        match self {
            AtomPosterior::Beta { alpha, beta } => {
                *alpha += successes as f64;
                *beta += failures as f64;
            }
            AtomPosterior::Discrete { thetas, log_w } => {
                for (lw, &t) in log_w.iter_mut().zip(thetas.iter()) {
                    *lw += log_likelihood(t, successes, failures);
                }
            }
        }
    }

    pub fn update(&mut self, reward: bool) {
        if reward {
            self.observe(1, 0)
        } else {
            self.observe(0, 1)
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            AtomPosterior::Beta { alpha, beta } => alpha / (alpha + beta),
            AtomPosterior::Discrete { thetas, log_w } => normalize_log_weights(log_w)
                .iter()
                .zip(thetas.iter())
                .map(|(w, t)| w * t)
                .sum(),
        }
    }

    /// Normalized `(theta, weight)` pairs of a discrete posterior.
    pub fn weights(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            AtomPosterior::Beta { .. } => None,
            AtomPosterior::Discrete { thetas, log_w } => Some(
                thetas
                    .iter()
                    .copied()
                    .zip(normalize_log_weights(log_w))
                    .collect(),
            ),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AtomPosterior::Beta { alpha, beta } => BetaDist::new(*alpha, *beta)
                .expect("positive parameters")
                .sample(rng),
            AtomPosterior::Discrete { .. } => sample_discrete(&self.weights().unwrap(), rng),
        }
    }
}

/// Independent per-atom posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    atoms: Vec<AtomPosterior>,
}

impl PosteriorState {
    pub fn new(prior: &ProductPrior) -> Self {
        Self {
            atoms: prior.atoms().iter().map(AtomPosterior::from_prior).collect(),
        }
    }

    pub fn from_counts(prior: &ProductPrior, counts: &[AtomCounts]) -> Self {
        let mut s = Self::new(prior);
        for (i, c) in counts.iter().enumerate() {
            s.atoms[i].observe(c.successes, c.failures);
        }
        s
    }

    pub fn d(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, i: usize) -> &AtomPosterior {
        &self.atoms[i]
    }

    pub fn update(&mut self, atom: usize, reward: bool) {
        self.atoms[atom].update(reward);
    }

    pub fn observe_counts(&mut self, atom: usize, successes: u64, failures: u64) {
        self.atoms[atom].observe(successes, failures);
    }

    pub fn observe_arm(&mut self, arm: Arm, rewards: Rewards) {
        for a in arm.atoms() {
            self.atoms[a].update(rewards.get(a));
        }
    }

    pub fn means(&self) -> Vec<f64> {
        self.atoms.iter().map(AtomPosterior::mean).collect()
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.atoms.iter().map(|a| a.sample(rng)).collect()
    }
}

/// Sum of per-atom posterior means over `arm`.
pub fn posterior_mean_arm(state: &PosteriorState, arm: Arm) -> f64 {
    arm.atoms().map(|a| state.atom(a).mean()).sum()
}

/// Posterior over the finite support of a two-arm joint prior, updated with
/// arm-level Bernoulli rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    points: Arc<[[f64; 2]]>,
    log_w: Vec<f64>,
}

impl JointPosterior {
    pub fn new(prior: &TwoArmJointPrior) -> Self {
        Self {
            points: prior.support().iter().map(|s| s.0).collect(),
            log_w: prior.support().iter().map(|s| s.1.ln()).collect(),
        }
    }

    pub fn observe(&mut self, arm: usize, successes: u64, failures: u64) {
        for (lw, p) in self.log_w.iter_mut().zip(self.points.iter()) {
            *lw += log_likelihood(p[arm], successes, failures);
        }
    }

    pub fn weights(&self) -> Vec<([f64; 2], f64)> {
        self.points
            .iter()
            .copied()
            .zip(normalize_log_weights(&self.log_w))
            .collect()
    }

    pub fn means(&self) -> Vec<f64> {
        let mut m = vec![0.0; 2];
        for (p, w) in self.weights() {
            m[0] += w * p[0];
            m[1] += w * p[1];
        }
        m
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        sample_discrete(&self.weights(), rng).to_vec()
    }
}

/// Either kind of posterior, behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Belief {
    Product(PosteriorState),
    Joint(JointPosterior),
}

impl Belief {
    pub fn observe_arm(&mut self, arm: Arm, rewards: Rewards) {
        match self {
            Belief::Product(s) => s.observe_arm(arm, rewards),
            Belief::Joint(j) => {
                for a in arm.atoms() {
                    if rewards.get(a) {
                        j.observe(a, 1, 0)
                    } else {
                        j.observe(a, 0, 1)
                    }
                }
            }
        }
    }

    pub fn observe_counts(&mut self, atom: usize, successes: u64, failures: u64) {
        match self {
            Belief::Product(s) => s.observe_counts(atom, successes, failures),
            Belief::Joint(j) => j.observe(atom, successes, failures),
        }
    }

    pub fn means(&self) -> Vec<f64> {
        match self {
            Belief::Product(s) => s.means(),
            Belief::Joint(j) => j.means(),
        }
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Belief::Product(s) => s.sample_theta(rng),
            Belief::Joint(j) => j.sample_theta(rng),
        }
    }
}

fn cmp_desc<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    b.partial_cmp(a).unwrap_or(Ordering::Equal)
}

/// `argmax_A Σ_{ℓ∈A} means[ℓ]`, ties to the lexicographically smallest arm.
pub fn best_arm<T: Scalar>(means: &[T], family: &ArmFamily) -> Arm {
    match family.kind() {
        FamilyKind::Explicit(arms) => {
            // arms are stored in lexicographic order, so strict improvement
            // keeps the first of any tied group
            let mut best = arms[0];
            let mut best_v = arm_sum(means, best);
            for &arm in &arms[1..] {
                let v = arm_sum(means, arm);
                if v > best_v {
                    best = arm;
                    best_v = v;
                }
            }
            best
        }
        FamilyKind::AllMSubsets { m } => top_m(means, *m),
        FamilyKind::DagPaths(g) => g.best_path(means),
    }
}

/// The `m` atoms with the largest means, ties to smaller indices.
pub fn top_m<T: Scalar>(means: &[T], m: usize) -> Arm {
    let mut idx: Vec<usize> = (0..means.len()).collect();
    idx.sort_by(|&a, &b| cmp_desc(&means[a], &means[b]).then(a.cmp(&b)));
    Arm::from_atoms(idx[..m].iter().copied())
}

pub fn arm_sum<T: Scalar>(means: &[T], arm: Arm) -> T {
    arm.atoms().fold(T::zero(), |acc, a| acc + means[a].clone())
}

/// Exhaustive argmax over an enumerated arm list (used as a reference).
pub fn best_arm_brute<T: Scalar>(means: &[T], arms: &[Arm]) -> Arm {
    let mut sorted = arms.to_vec();
    sorted.sort();
    let mut best = sorted[0];
    let mut best_v = arm_sum(means, best);
    for &arm in &sorted[1..] {
        let v = arm_sum(means, arm);
        if v > best_v {
            best = arm;
            best_v = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::encode_m_subsets;
    use crate::model::{m_subsets, BetaParams};
    use crate::scalar::Exact;
    use proptest::prelude::*;

    #[test]
    fn beta_conjugacy() {
        let prior = ProductPrior::beta(&[(1.0, 1.0)]).unwrap();
        let mut s = PosteriorState::new(&prior);
        s.update(0, true);
        assert_eq!(s.atom(0), &AtomPosterior::Beta { alpha: 2.0, beta: 1.0 });
        assert!((s.means()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rewards_give_nu() {
        let b = BetaParams::new(1.0, 1.0).unwrap();
        let prior = ProductPrior::beta(&[(1.0, 1.0)]).unwrap();
        let mut s = PosteriorState::new(&prior);
        for n in 1..=10 {
            s.update(0, false);
            assert_eq!(s.means()[0], b.nu(n));
        }
    }

    #[test]
    fn discrete_update_matches_enumeration() {
        let prior = ProductPrior::new(vec![
            AtomPrior::discrete(vec![(0.2, 0.5), (0.8, 0.5)]).unwrap()
        ])
        .unwrap();
        let mut s = PosteriorState::new(&prior);
        s.update(0, true);
        let w = s.atom(0).weights().unwrap();
        // brute force: joint mass of (theta, reward = 1), then normalize
        let joint: Vec<f64> = [(0.2, 0.5), (0.8, 0.5)].iter().map(|&(t, p)| t * p).collect();
        let z: f64 = joint.iter().sum();
        assert!((w[0].1 - joint[0] / z).abs() < 1e-12);
        assert!((w[1].1 - joint[1] / z).abs() < 1e-12);
        assert!((w[0].1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn posterior_mean_arm_additive() {
        let prior = ProductPrior::beta(&[(1.0, 1.0); 4]).unwrap();
        let mut s = PosteriorState::new(&prior);
        assert_eq!(posterior_mean_arm(&s, Arm::from_atoms([0, 1, 2])), 1.5);
        s.update(3, true);
        assert!((posterior_mean_arm(&s, Arm::singleton(3)) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn best_arm_examples() {
        let f = ArmFamily::m_subsets(4, 2).unwrap();
        assert_eq!(best_arm(&[0.9, 0.1, 0.5, 0.4], &f), Arm::from_atoms([0, 2]));
        let e = ArmFamily::explicit(3, vec![Arm::from_atoms([1, 2]), Arm::from_atoms([0, 2])])
            .unwrap();
        assert_eq!(best_arm(&[0.3, 0.3, 0.3], &e), Arm::from_atoms([0, 2]));
    }

    #[test]
    fn conjugacy_matches_grid() {
        let grid = 10_000;
        let (a, b) = (2.0, 3.0);
        let rewards = [true, false, false, true, false, true, true, false, false, false, true, false];
        let prior = ProductPrior::beta(&[(a, b)]).unwrap();
        let mut s = PosteriorState::new(&prior);
        let mut logw: Vec<f64> = (0..grid)
            .map(|i| {
                let t = (i as f64 + 0.5) / grid as f64;
                (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln()
            })
            .collect();
        for &r in &rewards {
            s.update(0, r);
            for (i, lw) in logw.iter_mut().enumerate() {
                let t = (i as f64 + 0.5) / grid as f64;
                *lw += if r { t.ln() } else { (1.0 - t).ln() };
            }
            let w = normalize_log_weights(&logw);
            let grid_mean: f64 = w
                .iter()
                .enumerate()
                .map(|(i, w)| w * (i as f64 + 0.5) / grid as f64)
                .sum();
            assert!((grid_mean - s.means()[0]).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn top_m_equals_exhaustive(
            d in 1usize..=6,
            m_raw in 0usize..6,
            raw in proptest::collection::vec(0u8..8, 6),
        ) {
            let m = m_raw % d + 1;
            // coarse grid values make ties common and exactly representable
            let means: Vec<Exact> = raw[..d]
                .iter()
                .map(|&x| <Exact as Scalar>::from_f64(x as f64 / 8.0))
                .collect();
            let f = ArmFamily::m_subsets(d, m).unwrap();
            let arms = m_subsets(d, m);
            prop_assert_eq!(best_arm(&means, &f), best_arm_brute(&means, &arms));
            let fm: Vec<f64> = raw[..d].iter().map(|&x| x as f64 / 8.0).collect();
            prop_assert_eq!(best_arm(&fm, &f), best_arm_brute(&fm, &arms));
        }

        #[test]
        fn dag_argmax_matches_top_m(
            d in 1usize..=6,
            m_raw in 0usize..6,
            raw in proptest::collection::vec(0u8..8, 6),
        ) {
            let m = m_raw % d + 1;
            let means: Vec<f64> = raw[..d].iter().map(|&x| x as f64 / 8.0).collect();
            let g = encode_m_subsets(d, m).unwrap();
            prop_assert_eq!(g.best_path(&means), top_m(&means, m));
        }

        #[test]
        fn nu_strictly_decreasing(a in 0.01f64..50.0, b in 0.01f64..50.0, n in 0u64..1000) {
            let p = BetaParams::new(a, b).unwrap();
            prop_assert!(p.nu(n + 1) < p.nu(n));
        }
    }
}
