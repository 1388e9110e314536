use std::cmp::Ordering;

use serde::Serialize;

use super::{Arm, ArmFamily, Prior, ProductPrior};
use crate::error::{Error, Result};

/// Mapping between user atom indices and the internal order, in which prior
/// means are non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomOrder {
    /// `to_user[internal] = user index`
    to_user: Vec<usize>,
    /// `to_internal[user] = internal index`
    to_internal: Vec<usize>,
}

impl AtomOrder {
    pub fn identity(d: usize) -> Self {
        Self {
            to_user: (0..d).collect(),
            to_internal: (0..d).collect(),
        }
    }

    /// Sort by descending mean; equal means keep their original order.
    pub fn by_descending_mean(means: &[f64]) -> Self {
        let mut to_user: Vec<usize> = (0..means.len()).collect();
        to_user.sort_by(|&a, &b| {
            means[b]
                .partial_cmp(&means[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut to_internal = vec![0; means.len()];
        for (i, &u) in to_user.iter().enumerate() {
            to_internal[u] = i;
        }
        Self {
            to_user,
            to_internal,
        }
    }

    pub fn to_user(&self) -> &[usize] {
        &self.to_user
    }

    pub fn to_internal(&self) -> &[usize] {
        &self.to_internal
    }

    pub fn arm_to_user(&self, arm: Arm) -> Arm {
        arm.map_atoms(|a| self.to_user[a])
    }

    pub fn arm_to_internal(&self, arm: Arm) -> Arm {
        arm.map_atoms(|a| self.to_internal[a])
    }

    pub fn is_identity(&self) -> bool {
        self.to_user.iter().enumerate().all(|(i, &u)| i == u)
    }
}

/// A prior together with a family, with atoms re-indexed so that prior
/// means are non-increasing.
#[derive(Debug, Clone)]
pub struct Problem {
    prior: Prior,
    family: ArmFamily,
    order: AtomOrder,
}

impl Problem {
    pub fn new(prior: Prior, family: ArmFamily) -> Result<Self> {
        if prior.d() != family.d() {
            return Err(Error::InvalidArgument(format!(
                "prior has {} atoms but family has d = {}",
                prior.d(),
                family.d()
            )));
        }
        let order = AtomOrder::by_descending_mean(&prior.means());
        let prior = match &prior {
            Prior::Product(p) => Prior::Product(p.reordered(order.to_user())),
            Prior::Joint(j) if !order.is_identity() => Prior::Joint(j.swapped()),
            Prior::Joint(_) => prior,
        };
        let family = family.relabeled(order.to_internal())?;
        Ok(Self {
            prior,
            family,
            order,
        })
    }

    pub fn product(prior: ProductPrior, family: ArmFamily) -> Result<Self> {
        Self::new(Prior::Product(prior), family)
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn family(&self) -> &ArmFamily {
        &self.family
    }

    pub fn order(&self) -> &AtomOrder {
        &self.order
    }

    pub fn d(&self) -> usize {
        self.family.d()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_sorted_by_mean_with_stable_ties() {
        let prior = ProductPrior::beta(&[(1.0, 3.0), (3.0, 1.0), (1.0, 1.0), (3.0, 1.0)]).unwrap();
        let family = ArmFamily::explicit(4, vec![Arm::from_atoms([0, 1]), Arm::from_atoms([2, 3])])
            .unwrap();
        let p = Problem::product(prior, family).unwrap();
        assert_eq!(p.order().to_user(), &[1, 3, 2, 0]);
        let means = p.prior().means();
        assert!(means.windows(2).all(|w| w[0] >= w[1]));
        // user arm {0,1} is internal {3,0}
        assert!(p.family().contains(Arm::from_atoms([0, 3])));
        assert_eq!(
            p.order().arm_to_user(Arm::from_atoms([0, 3])),
            Arm::from_atoms([0, 1])
        );
    }
}
