//! Gauss quadrature for Beta distributions, used to turn Beta priors into
//! finite-support priors that the exact oracle can handle.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{AtomPrior, BetaParams, DiscretePrior, ProductPrior};
use crate::scalar::{Exact, Scalar};

/// Raw moments `E[θ^j]`, `j < count`, of a Beta distribution, exactly.
fn beta_moments(b: &BetaParams, count: usize) -> Vec<Exact> {
    let a = <Exact as Scalar>::from_f64(b.alpha);
    let s = <Exact as Scalar>::from_f64(b.alpha + b.beta);
    let mut out = Vec::with_capacity(count);
    let mut m = <Exact as Scalar>::one();
    for j in 0..count {
        out.push(m.clone());
        let j = Exact::from_integer(j.into());
        m = m * (a.clone() + j.clone()) / (s.clone() + j);
    }
    out
}

/// Recurrence coefficients of the orthogonal polynomials for the given
/// moments (Chebyshev's algorithm, in exact arithmetic).
fn recurrence(moments: &[Exact], k: usize) -> (Vec<Exact>, Vec<Exact>) {
    let len = 2 * k;
    let mut alpha = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    let mut prev: Vec<Exact> = vec![<Exact as Scalar>::zero(); len];
    let mut cur: Vec<Exact> = moments[..len].to_vec();
    alpha.push(cur[1].clone() / cur[0].clone());
    beta.push(cur[0].clone());
    for j in 1..k {
        let mut next = vec![<Exact as Scalar>::zero(); len];
        for l in j..len - j {
            next[l] = cur[l + 1].clone()
                - alpha[j - 1].clone() * cur[l].clone()
                - beta[j - 1].clone() * prev[l].clone();
        }
        alpha.push(next[j + 1].clone() / next[j].clone() - cur[j].clone() / cur[j - 1].clone());
        beta.push(next[j].clone() / cur[j - 1].clone());
        prev = cur;
        cur = next;
    }
    (alpha, beta)
}

/// `k`-point Gauss rule for `Beta(α, β)` as a finite-support prior. It
/// reproduces the moments up to order `2k − 1`.
pub fn gauss_beta(b: &BetaParams, k: usize) -> Result<DiscretePrior> {
    if !(1..=16).contains(&k) {
        return Err(Error::InvalidArgument(format!("quadrature points must be in 1..=16, got {k}")));
    }
    let (alpha, beta) = recurrence(&beta_moments(b, 2 * k), k);
    let to_f = |x: &Exact| Scalar::to_f64(x);
    let mut j = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        j[(i, i)] = to_f(&alpha[i]);
        if i + 1 < k {
            let off = to_f(&beta[i + 1]).max(0.0).sqrt();
            j[(i, i + 1)] = off;
            j[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut points: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i].clamp(1e-12, 1.0 - 1e-12), v0 * v0)
        })
        .collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = points.iter().map(|p| p.1).sum();
    for p in &mut points {
        p.1 /= total;
    }
    DiscretePrior::new(points)
}

/// Replace every Beta atom by its `k`-point Gauss rule.
pub fn discretize_prior(prior: &ProductPrior, k: usize) -> Result<ProductPrior> {
    let atoms = prior
        .atoms()
        .iter()
        .map(|a| match a {
            AtomPrior::Beta(b) => Ok(AtomPrior::Discrete(gauss_beta(b, k)?)),
            other => Ok(other.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    ProductPrior::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_three_points_is_gauss_legendre() {
        let q = gauss_beta(&BetaParams::new(1.0, 1.0).unwrap(), 3).unwrap();
        let h = (0.6f64).sqrt() / 2.0;
        let expect = [(0.5 - h, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + h, 5.0 / 18.0)];
        for (got, want) in q.support().iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-12);
            assert!((got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_match_up_to_order_five() {
        for &(a, b) in &[(1.0, 3.0), (2.0, 1.0), (0.5, 0.5), (7.0, 2.5)] {
            let bp = BetaParams::new(a, b).unwrap();
            let q = gauss_beta(&bp, 3).unwrap();
            let mut m = 1.0;
            for j in 0..6 {
                let got: f64 = q.support().iter().map(|&(t, w)| w * t.powi(j)).sum();
                assert!((got - m).abs() < 1e-10, "Beta({a},{b}) moment {j}: {got} vs {m}");
                m *= (a + j as f64) / (a + b + j as f64);
            }
        }
    }

    #[test]
    fn one_point_is_the_mean() {
        let q = gauss_beta(&BetaParams::new(2.0, 6.0).unwrap(), 1).unwrap();
        assert_eq!(q.support().len(), 1);
        assert!((q.support()[0].0 - 0.25).abs() < 1e-15);
    }
}
