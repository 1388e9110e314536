//! Anti-concentration of the minimum arm gap under random posterior means,
//! and the product-moment inequality behind the event-probability bound.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Arm, AtomPrior, ProductPrior};
use crate::rng::RngStream;
use crate::sequence::min_pair_gap;
use crate::sim::par_fold;
use crate::stats::binomial_stderr;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EsseenReport {
    pub d: usize,
    pub delta: f64,
    /// `δ / (2·8^d)`.
    pub threshold: f64,
    pub freq_below: f64,
    pub stderr: f64,
    /// `δ / 2^d`.
    pub bound: f64,
    pub pass: bool,
    /// Some interval has zero width, so the continuity premise fails.
    pub premise_violated: bool,
}

/// Draw `ν_ℓ ~ U[a_ℓ, b_ℓ]` independently and estimate
/// `Pr[min_{A≠A′} |Σ_A ν − Σ_A′ ν| < δ/(2·8^d)]`.
pub fn esseen_experiment(
    intervals: &[(f64, f64)],
    arms: &[Arm],
    delta: f64,
    replicates: u64,
    seed: u64,
) -> Result<EsseenReport> {
    for &(a, b) in intervals {
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
        }
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1], got {delta}")));
    }
    let d = intervals.len();
    let threshold = delta / (2.0 * 8f64.powi(d as i32));
    let below = par_fold(
        replicates,
        || 0u64,
        |acc, rep| {
            let mut rng = RngStream::new(seed, rep);
            let nu: Vec<f64> = intervals
                .iter()
                .map(|&(a, b)| a + (b - a) * rng.random::<f64>())
                .collect();
            if min_pair_gap(&nu, arms).is_some_and(|g| g < threshold) {
                *acc += 1;
            }
            Ok(())
        },
        |a, b| *a += b,
    )?;
    let freq_below = below as f64 / replicates as f64;
    let stderr = binomial_stderr(below, replicates);
    let bound = delta / 2f64.powi(d as i32);
    Ok(EsseenReport {
        d,
        delta,
        threshold,
        freq_below,
        stderr,
        bound,
        pass: freq_below <= bound + 3.0 * stderr,
        premise_violated: intervals.iter().any(|&(a, b)| a == b),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarrisReport {
    /// `Π_ℓ E[(1−θ_ℓ)^n]`, exact.
    pub lhs: f64,
    /// `Π_ℓ (1−E[θ_ℓ])^n`.
    pub rhs: f64,
    /// Monte Carlo estimate of the left side, when replicates were requested.
    pub lhs_mc: Option<f64>,
    pub pass: bool,
}

/// Compare `Π E[(1−θ_ℓ)^n]` with `Π (1−θ_ℓ⁰)^n` over `atoms`.
pub fn harris_spotcheck(
    prior: &ProductPrior,
    n: u64,
    atoms: Arm,
    replicates: u64,
    seed: u64,
) -> Result<HarrisReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut lhs = 1.0;
    let mut rhs = 1.0;
    for a in atoms.atoms() {
        let p = prior.atom(a);
        lhs *= match p {
            AtomPrior::Beta(b) => b.prob_all_zero::<f64>(n),
            AtomPrior::Discrete(dp) => dp
                .support()
                .iter()
                .map(|&(t, w)| w * (1.0 - t).powi(n as i32))
                .sum(),
        };
        rhs *= (1.0 - p.mean()).powi(n as i32);
    }
    let lhs_mc = if replicates > 0 {
        let sum = par_fold(
            replicates,
            || 0.0f64,
            |acc, rep| {
                let mut rng = RngStream::new(seed, rep);
                let theta = prior.sample_theta(&mut rng);
                *acc += atoms
                    .atoms()
                    .map(|a| (1.0 - theta[a]).powi(n as i32))
                    .product::<f64>();
                Ok(())
            },
            |a, b| *a += b,
        )?;
        Some(sum / replicates as f64)
    } else {
        None
    };
    Ok(HarrisReport {
        lhs,
        rhs,
        lhs_mc,
        pass: lhs >= rhs - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::m_subsets;

    #[test]
    fn separated_intervals_never_below() {
        let r = esseen_experiment(&[(0.0, 0.1), (0.8, 0.9)], &m_subsets(2, 1), 0.5, 10_000, 1)
            .unwrap();
        assert_eq!(r.freq_below, 0.0);
        assert!(r.pass && !r.premise_violated);
    }

    #[test]
    fn point_intervals_flag_premise() {
        let r = esseen_experiment(&[(0.5, 0.5), (0.5, 0.5)], &m_subsets(2, 1), 0.5, 1000, 1)
            .unwrap();
        assert_eq!(r.freq_below, 1.0);
        assert!(!r.pass && r.premise_violated);
    }

    #[test]
    fn harris_examples() {
        let p = ProductPrior::beta(&[(1.0, 1.0)]).unwrap();
        let r = harris_spotcheck(&p, 2, Arm::singleton(0), 0, 0).unwrap();
        assert!((r.lhs - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.rhs, 0.25);
        let r1 = harris_spotcheck(&p, 1, Arm::singleton(0), 0, 0).unwrap();
        assert!((r1.lhs - r1.rhs).abs() < 1e-15);
        let point = ProductPrior::new(vec![AtomPrior::discrete(vec![(0.3, 1.0)]).unwrap()]).unwrap();
        for n in 1..6 {
            let r = harris_spotcheck(&point, n, Arm::singleton(0), 0, 0).unwrap();
            assert!((r.lhs - r.rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn harris_mc_agrees() {
        let p = ProductPrior::beta(&[(2.0, 3.0), (1.0, 4.0)]).unwrap();
        let r = harris_spotcheck(&p, 3, Arm::from_atoms([0, 1]), 50_000, 4).unwrap();
        assert!((r.lhs_mc.unwrap() - r.lhs).abs() < 0.01);
        assert!(r.pass);
    }
}
