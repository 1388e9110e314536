//! Monte Carlo check of `Pr[X_i ≥ τ_P] ≥ ρ_P` along the arm sequence.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::model::{Arm, BetaParams, ProductPrior};
use crate::posterior::arm_sum;
use crate::rng::RngStream;
use crate::sequence::{event_probability_exact, PropertyPReport};
use crate::sim::par_fold;
use crate::stats::binomial_stderr;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCheck {
    /// 1-based phase index.
    pub phase: usize,
    pub pr_hat: f64,
    pub stderr: f64,
    /// Exact probability that every atom covered before this phase has only
    /// zero rewards among its first `N` samples.
    pub event_probability: f64,
    pub rho_p: f64,
    pub pass: bool,
}

/// For each phase `i`, draw `θ` from the prior, give every atom covered by
/// `V_1..V_{i−1}` exactly `N` samples, and record whether the posterior gap
/// of `V_i` over every other arm is at least `τ_P`. With `forced`, all
/// samples are zero.
#[allow(clippy::too_many_arguments)]
pub fn property_p_empirical(
    prior: &ProductPrior,
    arms: &[Arm],
    report: &PropertyPReport,
    n: u64,
    replicates: u64,
    seed: u64,
    forced: bool,
) -> Result<Vec<PhaseCheck>> {
    let betas = prior.betas()?;
    let d = betas.len();
    let seq = &report.sequence;
    let covered: Vec<Arm> = (0..seq.len())
        .map(|i| seq[..i].iter().fold(Arm::empty(), |u, &a| u.union(a)))
        .collect();
    // The gap is compared against τ_P with a relative slack so that exact
    // ties at the boundary are not lost to rounding.
    let slack = 1e-12 * report.tau_p.max(1e-300);
    let hits = par_fold(
        replicates,
        || vec![0u64; seq.len()],
        |acc, rep| {
            let mut rng = RngStream::new(seed, rep);
            let theta = prior.sample_theta(&mut rng);
            let successes: Vec<u64> = (0..d)
                .map(|a| {
                    if forced {
                        0
                    } else {
                        (0..n).filter(|_| rng.random::<f64>() < theta[a]).count() as u64
                    }
                })
                .collect();
            for (i, v) in seq.iter().enumerate() {
                let means = posterior_means(&betas, covered[i], &successes, n);
                if gap(&means, arms, *v) >= report.tau_p - slack {
                    acc[i] += 1;
                }
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        },
    )?;
    Ok(hits
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let pr_hat = h as f64 / replicates as f64;
            let stderr = binomial_stderr(h, replicates);
            PhaseCheck {
                phase: i + 1,
                pr_hat,
                stderr,
                event_probability: event_probability_exact::<f64>(&betas, covered[i], n),
                rho_p: report.rho_p,
                pass: pr_hat + 3.0 * stderr >= report.rho_p,
            }
        })
        .collect())
}

fn posterior_means(betas: &[BetaParams], covered: Arm, successes: &[u64], n: u64) -> Vec<f64> {
    betas
        .iter()
        .enumerate()
        .map(|(a, b)| {
            if covered.contains(a) {
                (b.alpha + successes[a] as f64) / (b.alpha + b.beta + n as f64)
            } else {
                b.mean()
            }
        })
        .collect()
}

fn gap(means: &[f64], arms: &[Arm], v: Arm) -> f64 {
    let own = arm_sum(means, v);
    arms.iter()
        .filter(|&&a| a != v)
        .map(|&a| own - arm_sum(means, a))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArmFamily;
    use crate::sequence::constants_fixed_size;

    #[test]
    fn first_phase_always_passes_and_forced_runs_all_hit() {
        let prior = ProductPrior::beta(&[(1.0, 2.0), (1.0, 3.0), (1.0, 5.0)]).unwrap();
        let f = ArmFamily::singletons(3).unwrap();
        let r = constants_fixed_size(&prior, &f).unwrap();
        let arms = f.arms(100).unwrap();
        let forced = property_p_empirical(&prior, &arms, &r, r.n_p, 500, 1, true).unwrap();
        assert!(forced.iter().all(|c| c.pr_hat == 1.0));
        let free = property_p_empirical(&prior, &arms, &r, r.n_p, 4000, 1, false).unwrap();
        assert_eq!(free[0].pr_hat, 1.0);
        for c in &free {
            assert!(c.pass);
            assert!(c.pr_hat + 3.0 * c.stderr >= c.event_probability);
            assert!(c.event_probability >= c.rho_p);
        }
    }
}
