use rand::Rng;

use super::{Arm, Rewards};

/// True mean rewards of every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub theta: Vec<f64>,
}

impl Instance {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    /// Mean reward of an arm: the sum of its atoms' means.
    pub fn mu(&self, arm: Arm) -> f64 {
        arm.atoms().map(|a| self.theta[a]).sum()
    }

    /// One Bernoulli draw per atom in `arm`.
    pub fn pull<R: Rng + ?Sized>(&self, arm: Arm, rng: &mut R) -> Rewards {
        let mut bits = 0u64;
        for a in arm.atoms() {
            if rng.random::<f64>() < self.theta[a] {
                bits |= 1 << a;
            }
        }
        Rewards::from_bits(bits)
    }

    /// Number of successes in `n` independent pulls of atom `atom`.
    pub fn sample_successes<R: Rng + ?Sized>(&self, atom: usize, n: u64, rng: &mut R) -> u64 {
        use rand_distr::{Binomial, Distribution};
        let p = self.theta[atom].clamp(0.0, 1.0);
        Binomial::new(n, p).expect("p in [0,1]").sample(rng)
    }
}
