//! Replicate runner. Replicate `k` always draws from stream `(seed, k)` and
//! results are merged in a fixed chunk order, so output does not depend on
//! the number of threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::{Arm, Instance, Problem, Rewards};
use crate::posterior::best_arm;
use crate::rng::RngStream;
use crate::stats::Moments;
use crate::strategy::{PhaseLabel, Strategy};

/// Replicates handled sequentially inside one parallel task.
pub const CHUNK: u64 = 64;

/// Chunks folded in parallel per worker thread before their results are
/// merged, bounding the number of live accumulators. Merging is a left fold
/// in chunk order, so the batch size never changes the result.
const BATCH_PER_THREAD: u64 = 4;

/// Fold `0..n` in parallel: each fixed chunk is folded sequentially from
/// `init()`, then chunk results are merged left to right.
pub fn par_fold<A, I, S, M>(n: u64, init: I, step: S, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let batch_len = rayon::current_num_threads() as u64 * BATCH_PER_THREAD;
    let mut total = init();
    for batch in (0..chunks).step_by(batch_len as usize) {
        let parts: Vec<Result<A>> = (batch..(batch + batch_len).min(chunks))
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    step(&mut acc, k)?;
                }
                Ok(acc)
            })
            .collect();
        for p in parts {
            merge(&mut total, p?);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRow {
    pub round: u64,
    pub arm: Arm,
    pub rewards: Rewards,
    pub label: PhaseLabel,
    pub is_exploration: bool,
    /// `μ(A*) − μ(A^(t))` under the true means.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutput {
    pub theta: Vec<f64>,
    pub rows: Vec<RoundRow>,
}

impl ReplicateOutput {
    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.rows
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.gap;
                Some(*acc)
            })
            .collect()
    }
}

/// Run one replicate: draw the means from the prior, then `horizon` rounds.
pub fn run_replicate(
    problem: &Problem,
    strategy: &dyn Strategy,
    horizon: u64,
    seed: u64,
    replicate: u64,
) -> Result<ReplicateOutput> {
    let mut rng = RngStream::new(seed, replicate);
    let theta = problem.prior().sample_theta(&mut rng);
    run_on_instance(problem, strategy, &Instance::new(theta), horizon, &mut rng)
}

pub fn run_on_instance(
    problem: &Problem,
    strategy: &dyn Strategy,
    instance: &Instance,
    horizon: u64,
    rng: &mut RngStream,
) -> Result<ReplicateOutput> {
    let best = instance.mu(best_arm(&instance.theta, problem.family()));
    let mut episode = strategy.start(instance, rng)?;
    let mut rows = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let rec = episode.recommend(t, rng)?;
        let rewards = instance.pull(rec.arm, rng);
        episode.observe(t, rec.arm, rewards);
        rows.push(RoundRow {
            round: t,
            arm: rec.arm,
            rewards,
            label: rec.label,
            is_exploration: rec.is_exploration,
            gap: best - instance.mu(rec.arm),
        });
    }
    Ok(ReplicateOutput {
        theta: instance.theta.clone(),
        rows,
    })
}

/// Mean cumulative regret per round with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretCurve {
    pub replicates: u64,
    pub cumulative: Vec<Moments>,
}

impl RegretCurve {
    pub fn mean_at(&self, round: u64) -> f64 {
        self.cumulative[round as usize - 1].mean()
    }

    pub fn stderr_at(&self, round: u64) -> f64 {
        self.cumulative[round as usize - 1].stderr()
    }
}

/// Regret curve over `replicates` runs without keeping round logs.
pub fn regret_curve(
    problem: &Problem,
    strategy: &dyn Strategy,
    horizon: u64,
    replicates: u64,
    seed: u64,
) -> Result<RegretCurve> {
    let cumulative = par_fold(
        replicates,
        || vec![Moments::default(); horizon as usize],
        |acc, k| {
            let out = run_replicate(problem, strategy, horizon, seed, k)?;
            for (m, c) in acc.iter_mut().zip(out.cumulative_regret()) {
                m.push(c);
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
        },
    )?;
    Ok(RegretCurve {
        replicates,
        cumulative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmFamily, ProductPrior};
    use crate::strategy::{ThompsonSampling, UniformBaseline};

    fn problem() -> Problem {
        Problem::product(
            ProductPrior::beta(&[(1.0, 1.0), (1.0, 3.0)]).unwrap(),
            ArmFamily::singletons(2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn replicate_is_reproducible() {
        let p = problem();
        let ts = ThompsonSampling::new(&p);
        let a = run_replicate(&p, &ts, 50, 9, 3).unwrap();
        let b = run_replicate(&p, &ts, 50, 9, 3).unwrap();
        assert_eq!(a, b);
        let c = run_replicate(&p, &ts, 50, 9, 4).unwrap();
        assert_ne!(a.theta, c.theta);
    }

    #[test]
    fn regret_is_sum_of_gaps() {
        let p = problem();
        let u = UniformBaseline::new(&p);
        let out = run_replicate(&p, &u, 100, 1, 0).unwrap();
        let cum = out.cumulative_regret();
        let direct: f64 = out.rows.iter().map(|r| r.gap).sum();
        assert!((cum[99] - direct).abs() < 1e-9);
        assert!(out.rows.iter().all(|r| r.gap >= 0.0));
    }

    #[test]
    fn fold_is_thread_independent() {
        let p = problem();
        let ts = ThompsonSampling::new(&p);
        let a = regret_curve(&p, &ts, 20, 200, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| regret_curve(&p, &ts, 20, 200, 5).unwrap());
        assert_eq!(a, b);
    }
}
