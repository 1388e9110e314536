use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance for discrete probabilities summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeta")]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeta {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawBeta> for BetaParams {
    type Error = Error;
    fn try_from(r: RawBeta) -> Result<Self> {
        BetaParams::new(r.alpha, r.beta)
    }
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "Beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Posterior mean after `n` samples that all returned reward 0.
    pub fn nu(&self, n: u64) -> f64 {
        self.alpha / (self.alpha + self.beta + n as f64)
    }

    pub fn nu_in<T: Scalar>(&self, n: u64) -> T {
        let a = T::from_f64(self.alpha);
        a.clone() / (a + T::from_f64(self.beta) + T::from_u64(n))
    }

    pub fn mean_in<T: Scalar>(&self) -> T {
        self.nu_in(0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.alpha, self.beta, x)
        }
    }

    /// Marginal probability that the first `n` samples all return 0:
    /// `E[(1-θ)^n] = Π_{k<n} (β+k)/(α+β+k)`.
    pub fn prob_all_zero<T: Scalar>(&self, n: u64) -> T {
        let a = T::from_f64(self.alpha);
        let b = T::from_f64(self.beta);
        let mut acc = T::one();
        for k in 0..n {
            let kk = T::from_u64(k);
            acc = acc * (b.clone() + kk.clone()) / (a.clone() + b.clone() + kk);
        }
        acc
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        BetaDist::new(self.alpha, self.beta)
            .expect("validated parameters")
            .sample(rng)
    }
}

/// Finite-support prior on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscretePrior {
    support: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for DiscretePrior {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        DiscretePrior::new(v)
    }
}

impl From<DiscretePrior> for Vec<(f64, f64)> {
    fn from(p: DiscretePrior) -> Self {
        p.support
    }
}

pub(crate) fn check_probs(probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidPrior(format!("probability {p} is not in [0, 1]")));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidPrior(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl DiscretePrior {
    pub fn new(support: Vec<(f64, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidPrior("empty discrete support".into()));
        }
        for &(theta, _) in &support {
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::InvalidPrior(format!("support point {theta} outside [0, 1]")));
            }
        }
        check_probs(support.iter().map(|s| s.1))?;
        if !support.iter().any(|&(t, p)| t > 0.0 && p > 0.0) {
            return Err(Error::InvalidPrior(
                "discrete prior puts no mass on theta > 0".into(),
            ));
        }
        Ok(Self { support })
    }

    pub fn point(theta: f64) -> Result<Self> {
        Self::new(vec![(theta, 1.0)])
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(t, p)| t * p).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.support
            .iter()
            .filter(|s| s.0 <= x)
            .map(|s| s.1)
            .sum::<f64>()
            .min(1.0)
    }

    pub fn prob_below(&self, x: f64) -> f64 {
        self.support.iter().filter(|s| s.0 < x).map(|s| s.1).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_discrete(&self.support, rng)
    }
}

pub(crate) fn sample_discrete<T: Copy, R: Rng + ?Sized>(support: &[(T, f64)], rng: &mut R) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(x, p) in support {
        acc += p;
        if u < acc {
            return x;
        }
    }
    // rounding slack: fall back to the last point with positive mass
    support
        .iter()
        .rev()
        .find(|s| s.1 > 0.0)
        .map(|s| s.0)
        .expect("non-empty support")
}

/// Prior on a single atom's mean reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomPrior {
    Beta(BetaParams),
    Discrete(DiscretePrior),
}

impl AtomPrior {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        Ok(AtomPrior::Beta(BetaParams::new(alpha, beta)?))
    }

    pub fn discrete(support: Vec<(f64, f64)>) -> Result<Self> {
        Ok(AtomPrior::Discrete(DiscretePrior::new(support)?))
    }

    pub fn mean(&self) -> f64 {
        match self {
            AtomPrior::Beta(b) => b.mean(),
            AtomPrior::Discrete(p) => p.mean(),
        }
    }

    /// `Pr[θ <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            AtomPrior::Beta(b) => b.cdf(x),
            AtomPrior::Discrete(p) => p.cdf(x),
        }
    }

    /// `Pr[θ < x]`.
    pub fn prob_below(&self, x: f64) -> f64 {
        match self {
            AtomPrior::Beta(b) => b.cdf(x),
            AtomPrior::Discrete(p) => p.prob_below(x),
        }
    }

    /// `Pr[θ > x]`.
    pub fn prob_above(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AtomPrior::Beta(b) => b.sample(rng),
            AtomPrior::Discrete(p) => p.sample(rng),
        }
    }

    pub fn as_beta(&self) -> Option<&BetaParams> {
        match self {
            AtomPrior::Beta(b) => Some(b),
            AtomPrior::Discrete(_) => None,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscretePrior> {
        match self {
            AtomPrior::Discrete(p) => Some(p),
            AtomPrior::Beta(_) => None,
        }
    }
}

/// Independent per-atom priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AtomPrior>", into = "Vec<AtomPrior>")]
pub struct ProductPrior {
    atoms: Vec<AtomPrior>,
}

impl TryFrom<Vec<AtomPrior>> for ProductPrior {
    type Error = Error;
    fn try_from(v: Vec<AtomPrior>) -> Result<Self> {
        ProductPrior::new(v)
    }
}

impl From<ProductPrior> for Vec<AtomPrior> {
    fn from(p: ProductPrior) -> Self {
        p.atoms
    }
}

impl ProductPrior {
    pub fn new(atoms: Vec<AtomPrior>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidPrior("prior has no atoms".into()));
        }
        Ok(Self { atoms })
    }

    pub fn beta(params: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            params
                .iter()
                .map(|&(a, b)| AtomPrior::beta(a, b))
                .collect::<Result<_>>()?,
        )
    }

    pub fn d(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, i: usize) -> &AtomPrior {
        &self.atoms[i]
    }

    pub fn atoms(&self) -> &[AtomPrior] {
        &self.atoms
    }

    pub fn means(&self) -> Vec<f64> {
        self.atoms.iter().map(AtomPrior::mean).collect()
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.atoms.iter().map(|a| a.sample(rng)).collect()
    }

    /// Beta parameters of every atom, or `NotBeta` naming the first offender.
    pub fn betas(&self) -> Result<Vec<BetaParams>> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| a.as_beta().copied().ok_or(Error::NotBeta { atom: i }))
            .collect()
    }

    pub fn discretes(&self) -> Result<Vec<&DiscretePrior>> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| a.as_discrete().ok_or(Error::NonDiscretePrior { atom: i }))
            .collect()
    }

    /// Reorder atoms: new atom `j` is old atom `order[j]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            atoms: order.iter().map(|&i| self.atoms[i].clone()).collect(),
        }
    }
}

/// Finite joint prior over the means of two singleton arms, whose rewards
/// are Bernoulli at the arm level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<((f64, f64), f64)>", into = "Vec<((f64, f64), f64)>")]
pub struct TwoArmJointPrior {
    support: Vec<([f64; 2], f64)>,
}

impl TryFrom<Vec<((f64, f64), f64)>> for TwoArmJointPrior {
    type Error = Error;
    fn try_from(v: Vec<((f64, f64), f64)>) -> Result<Self> {
        TwoArmJointPrior::new(v.into_iter().map(|((a, b), p)| ([a, b], p)).collect())
    }
}

impl From<TwoArmJointPrior> for Vec<((f64, f64), f64)> {
    fn from(p: TwoArmJointPrior) -> Self {
        p.support.into_iter().map(|(m, p)| ((m[0], m[1]), p)).collect()
    }
}

impl TwoArmJointPrior {
    pub fn new(support: Vec<([f64; 2], f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidPrior("empty joint support".into()));
        }
        for (mu, _) in &support {
            if mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::InvalidPrior(format!(
                    "joint support point {mu:?} outside [0, 1]^2"
                )));
            }
        }
        check_probs(support.iter().map(|s| s.1))?;
        Ok(Self { support })
    }

    /// Product of two discrete marginals.
    pub fn independent(a: &DiscretePrior, b: &DiscretePrior) -> Result<Self> {
        let mut support = Vec::new();
        for &(x, p) in a.support() {
            for &(y, q) in b.support() {
                support.push(([x, y], p * q));
            }
        }
        Self::new(support)
    }

    pub fn support(&self) -> &[([f64; 2], f64)] {
        &self.support
    }

    pub fn means(&self) -> Vec<f64> {
        let mut m = [0.0; 2];
        for (mu, p) in &self.support {
            m[0] += p * mu[0];
            m[1] += p * mu[1];
        }
        m.to_vec()
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        sample_discrete(&self.support, rng).to_vec()
    }

    /// Swap the two arms.
    pub fn swapped(&self) -> Self {
        Self {
            support: self.support.iter().map(|(m, p)| ([m[1], m[0]], *p)).collect(),
        }
    }
}

/// Any prior the engine accepts.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Product(ProductPrior),
    Joint(TwoArmJointPrior),
}

impl Prior {
    pub fn d(&self) -> usize {
        match self {
            Prior::Product(p) => p.d(),
            Prior::Joint(_) => 2,
        }
    }

    pub fn means(&self) -> Vec<f64> {
        match self {
            Prior::Product(p) => p.means(),
            Prior::Joint(j) => j.means(),
        }
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Prior::Product(p) => p.sample_theta(rng),
            Prior::Joint(j) => j.sample_theta(rng),
        }
    }

    pub fn product(&self) -> Result<&ProductPrior> {
        match self {
            Prior::Product(p) => Ok(p),
            Prior::Joint(_) => Err(Error::InvalidArgument(
                "operation requires an independent product prior".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn beta_validation() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -1.0).is_err());
        assert!(BetaParams::new(f64::NAN, 1.0).is_err());
        assert!(serde_json::from_str::<BetaParams>(r#"{"alpha":1,"beta":0}"#).is_err());
    }

    #[test]
    fn nu_examples() {
        let b11 = BetaParams::new(1.0, 1.0).unwrap();
        assert_eq!(b11.nu(0), 0.5);
        assert_eq!(b11.nu(2), 0.25);
        assert_eq!(BetaParams::new(2.0, 3.0).unwrap().nu(5), 0.2);
    }

    #[test]
    fn discrete_validation() {
        assert!(DiscretePrior::new(vec![(0.2, 0.5), (0.8, 0.4)]).is_err());
        assert!(DiscretePrior::new(vec![(0.0, 1.0)]).is_err());
        assert!(DiscretePrior::new(vec![(1.2, 1.0)]).is_err());
        assert!(DiscretePrior::new(vec![(0.2, 0.5), (0.8, 0.5)]).is_ok());
    }

    #[test]
    fn point_mass_sample_is_constant() {
        let p = AtomPrior::discrete(vec![(0.3, 1.0)]).unwrap();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..100 {
            assert_eq!(p.sample(&mut rng), 0.3);
        }
    }

    #[test]
    fn beta_sample_means() {
        let mut rng = RngStream::new(11, 0);
        for (a, b, m) in [(1.0, 1.0, 0.5), (2.0, 6.0, 0.25)] {
            let p = AtomPrior::beta(a, b).unwrap();
            let n = 100_000;
            let mean = (0..n).map(|_| p.sample(&mut rng)).sum::<f64>() / n as f64;
            assert!((mean - m).abs() < 0.01, "{mean} vs {m}");
        }
    }

    #[test]
    fn serde_shapes() {
        let p: ProductPrior = serde_json::from_str(
            r#"[{"beta":{"alpha":1,"beta":2}},{"discrete":[[0.2,0.5],[0.8,0.5]]}]"#,
        )
        .unwrap();
        assert_eq!(p.d(), 2);
        assert!(matches!(p.betas(), Err(Error::NotBeta { atom: 1 })));
        let back = serde_json::to_string(&p).unwrap();
        let again: ProductPrior = serde_json::from_str(&back).unwrap();
        assert_eq!(p, again);
        let j: TwoArmJointPrior = serde_json::from_str("[[[0.2,0.8],0.5],[[0.8,0.2],0.5]]").unwrap();
        assert_eq!(j.means(), vec![0.5, 0.5]);
    }

    #[test]
    fn beta_cdf_uniform() {
        let b = BetaParams::new(1.0, 1.0).unwrap();
        assert!((b.cdf(1.0 / 72.0) - 1.0 / 72.0).abs() < 1e-14);
    }

    #[test]
    fn polya_product() {
        let b = BetaParams::new(1.0, 1.0).unwrap();
        assert!((b.prob_all_zero::<f64>(2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.prob_all_zero::<f64>(1), 0.5);
    }
}
