//! Monte Carlo estimate of the conditional margins
//! `E[μ(A) − μ(A′) | A^(t) = A]`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Arm, Instance, Problem};
use crate::rng::RngStream;
use crate::sim::par_fold;
use crate::stats::Moments;
use crate::strategy::Strategy;

use super::{BicMarginTable, MarginCell, MarginRow, Mode, Support, MIN_SUPPORT};

#[derive(Clone)]
struct Acc {
    /// `[round slot][arm][competitor]`
    diffs: Vec<Vec<Vec<Moments>>>,
    hits: Vec<Vec<u64>>,
}

/// Margins at every round in `rounds`, from `replicates` independent runs.
/// Replicate `k` uses stream `(seed, k)`.
pub fn bic_margin_mc(
    problem: &Problem,
    strategy: &dyn Strategy,
    rounds: &[u64],
    replicates: u64,
    seed: u64,
    arm_budget: u128,
) -> Result<Vec<BicMarginTable>> {
    if rounds.is_empty() {
        return Err(Error::InvalidArgument("empty round set".into()));
    }
    let mut rounds: Vec<u64> = rounds.to_vec();
    rounds.sort_unstable();
    rounds.dedup();
    if rounds[0] == 0 {
        return Err(Error::InvalidArgument("rounds are 1-based".into()));
    }
    let max_round = *rounds.last().unwrap();
    let arms = problem.family().arms(arm_budget)?;
    let k = arms.len();
    let index: BTreeMap<Arm, usize> = arms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut slot = vec![usize::MAX; max_round as usize + 1];
    for (i, &t) in rounds.iter().enumerate() {
        slot[t as usize] = i;
    }
    let init = || Acc {
        diffs: vec![vec![vec![Moments::default(); k]; k]; rounds.len()],
        hits: vec![vec![0; k]; rounds.len()],
    };
    let acc = par_fold(
        replicates,
        init,
        |acc, rep| {
            let mut rng = RngStream::new(seed, rep);
            let theta = problem.prior().sample_theta(&mut rng);
            let instance = Instance::new(theta);
            let mu: Vec<f64> = arms.iter().map(|&a| instance.mu(a)).collect();
            let mut ep = strategy.start(&instance, &mut rng)?;
            for t in 1..=max_round {
                let rec = ep.recommend(t, &mut rng)?;
                let s = slot[t as usize];
                if s != usize::MAX {
                    let ai = *index.get(&rec.arm).ok_or_else(|| {
                        Error::InvalidArgument(format!("recommended non-family arm {}", rec.arm))
                    })?;
                    acc.hits[s][ai] += 1;
                    for (bj, m) in acc.diffs[s][ai].iter_mut().enumerate() {
                        m.push(mu[ai] - mu[bj]);
                    }
                }
                if t < max_round {
                    let r = instance.pull(rec.arm, &mut rng);
                    ep.observe(t, rec.arm, r);
                }
            }
            Ok(())
        },
        |a, b| {
            for (sa, sb) in a.diffs.iter_mut().zip(&b.diffs) {
                for (ra, rb) in sa.iter_mut().zip(sb) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        x.merge(y);
                    }
                }
            }
            for (ha, hb) in a.hits.iter_mut().zip(&b.hits) {
                for (x, y) in ha.iter_mut().zip(hb) {
                    *x += y;
                }
            }
        },
    )?;
    Ok(rounds
        .iter()
        .enumerate()
        .map(|(s, &t)| {
            let rows = (0..k)
                .map(|ai| {
                    let hits = acc.hits[s][ai];
                    let support = match hits {
                        0 => Support::NoSupport,
                        h if h < MIN_SUPPORT => Support::LowSupport,
                        _ => Support::Sufficient,
                    };
                    let cells = if hits == 0 {
                        Vec::new()
                    } else {
                        (0..k)
                            .filter(|&bj| bj != ai)
                            .map(|bj| {
                                let m = &acc.diffs[s][ai][bj];
                                MarginCell {
                                    competitor: arms[bj],
                                    margin: m.mean(),
                                    ci_radius: m.ci99(),
                                }
                            })
                            .collect()
                    };
                    MarginRow {
                        arm: arms[ai],
                        pr_recommend: hits as f64 / replicates as f64,
                        support_count: hits,
                        support,
                        cells,
                    }
                })
                .collect();
            BicMarginTable {
                round: t,
                mode: Mode::MonteCarlo,
                rows,
            }
        })
        .collect())
}

/// Standard error of one Monte Carlo margin cell (for oracle comparisons).
pub fn cell_stderr(cell: &MarginCell) -> f64 {
    cell.ci_radius / crate::stats::Z99
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmFamily, AtomPrior, ProductPrior};
    use crate::strategy::ThompsonSampling;

    #[test]
    fn point_mass_has_zero_variance() {
        let p = Problem::product(
            ProductPrior::new(vec![
                AtomPrior::discrete(vec![(0.7, 1.0)]).unwrap(),
                AtomPrior::discrete(vec![(0.3, 1.0)]).unwrap(),
            ])
            .unwrap(),
            ArmFamily::singletons(2).unwrap(),
        )
        .unwrap();
        let ts = ThompsonSampling::new(&p);
        let tables = bic_margin_mc(&p, &ts, &[1, 2], 1000, 1, 100).unwrap();
        for t in &tables {
            let r = t.row(Arm::singleton(0)).unwrap();
            assert_eq!(r.support_count, 1000);
            assert!((r.cells[0].margin - 0.4).abs() < 1e-12);
            assert!(r.cells[0].ci_radius < 1e-6);
            assert_eq!(t.row(Arm::singleton(1)).unwrap().support, Support::NoSupport);
        }
    }

    #[test]
    fn frequencies_sum_to_one() {
        let p = Problem::product(
            ProductPrior::beta(&[(1.0, 1.0), (1.0, 3.0)]).unwrap(),
            ArmFamily::singletons(2).unwrap(),
        )
        .unwrap();
        let ts = ThompsonSampling::new(&p);
        let t = &bic_margin_mc(&p, &ts, &[2], 2000, 3, 100).unwrap()[0];
        let total: f64 = t.rows.iter().map(|r| r.pr_recommend).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
