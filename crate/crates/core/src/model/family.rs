use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Arm;
use crate::error::{Error, Result};
use crate::mdp::TransitionGraph;

/// Default cap on the number of arms materialized by [`ArmFamily::arms`].
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    Explicit(Vec<Arm>),
    AllMSubsets { m: usize },
    DagPaths(TransitionGraph),
}

/// The fixed, known set of feasible arms over `d` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmFamily {
    d: usize,
    kind: FamilyKind,
}

/// Serializable description of a family, as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Explicit { d: usize, arms: Vec<Arm> },
    MSubsets { d: usize, m: usize },
    Singletons { d: usize },
    Dag { d: usize, graph: TransitionGraph },
}

impl FamilySpec {
    pub fn d(&self) -> usize {
        match self {
            FamilySpec::Explicit { d, .. }
            | FamilySpec::MSubsets { d, .. }
            | FamilySpec::Singletons { d }
            | FamilySpec::Dag { d, .. } => *d,
        }
    }
}

pub fn build_family(spec: &FamilySpec) -> Result<ArmFamily> {
    match spec {
        FamilySpec::Explicit { d, arms } => ArmFamily::explicit(*d, arms.clone()),
        FamilySpec::MSubsets { d, m } => ArmFamily::m_subsets(*d, *m),
        FamilySpec::Singletons { d } => ArmFamily::m_subsets(*d, 1),
        FamilySpec::Dag { d, graph } => ArmFamily::dag(*d, graph.clone()),
    }
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 || d > Arm::MAX_ATOMS {
        return Err(Error::InvalidFamily(format!(
            "d = {d} must be in [1, {}]",
            Arm::MAX_ATOMS
        )));
    }
    Ok(())
}

fn check_antichain(arms: &[Arm]) -> Result<()> {
    for (i, &a) in arms.iter().enumerate() {
        for (j, &b) in arms.iter().enumerate() {
            if i != j && a.is_subset_of(b) {
                if a == b {
                    return Err(Error::InvalidFamily(format!("duplicate arm {a}")));
                }
                return Err(Error::ContainedArm { inner: a, outer: b });
            }
        }
    }
    Ok(())
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl ArmFamily {
    pub fn explicit(d: usize, mut arms: Vec<Arm>) -> Result<Self> {
        check_d(d)?;
        if arms.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let full = Arm::full(d);
        for &a in &arms {
            if a.is_empty() {
                return Err(Error::InvalidFamily("empty arm".into()));
            }
            if !a.is_subset_of(full) {
                return Err(Error::InvalidFamily(format!("arm {a} uses atoms >= d = {d}")));
            }
        }
        check_antichain(&arms)?;
        arms.sort();
        Ok(Self {
            d,
            kind: FamilyKind::Explicit(arms),
        })
    }

    pub fn m_subsets(d: usize, m: usize) -> Result<Self> {
        check_d(d)?;
        if m == 0 || m > d {
            return Err(Error::BadM { m, d });
        }
        Ok(Self {
            d,
            kind: FamilyKind::AllMSubsets { m },
        })
    }

    pub fn singletons(d: usize) -> Result<Self> {
        Self::m_subsets(d, 1)
    }

    pub fn dag(d: usize, graph: TransitionGraph) -> Result<Self> {
        check_d(d)?;
        graph.validate(d)?;
        let paths = graph.paths(DEFAULT_ENUMERATION_BUDGET)?;
        if paths.is_empty() {
            return Err(Error::EmptyFamily);
        }
        check_antichain(&paths)?;
        Ok(Self {
            d,
            kind: FamilyKind::DagPaths(graph),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn size(&self) -> u128 {
        match &self.kind {
            FamilyKind::Explicit(arms) => arms.len() as u128,
            FamilyKind::AllMSubsets { m } => binomial(self.d, *m),
            FamilyKind::DagPaths(g) => g.path_count(),
        }
    }

    /// Arm size if every arm has the same size and the family is the
    /// complete family of such subsets.
    pub fn complete_fixed_size(&self) -> Option<usize> {
        match &self.kind {
            FamilyKind::AllMSubsets { m } => Some(*m),
            FamilyKind::Explicit(arms) => {
                let m = arms[0].len();
                (arms.iter().all(|a| a.len() == m) && arms.len() as u128 == binomial(self.d, m))
                    .then_some(m)
            }
            FamilyKind::DagPaths(_) => None,
        }
    }

    /// All arms in lexicographic order.
    pub fn arms(&self, budget: u128) -> Result<Vec<Arm>> {
        let size = self.size();
        if size > budget {
            return Err(Error::BudgetExceeded {
                needed: size,
                budget,
            });
        }
        let mut arms = match &self.kind {
            FamilyKind::Explicit(arms) => arms.clone(),
            FamilyKind::AllMSubsets { m } => m_subsets(self.d, *m),
            FamilyKind::DagPaths(g) => g.paths(budget)?,
        };
        arms.sort();
        Ok(arms)
    }

    pub fn contains(&self, arm: Arm) -> bool {
        match &self.kind {
            FamilyKind::Explicit(arms) => arms.binary_search(&arm).is_ok(),
            FamilyKind::AllMSubsets { m } => {
                arm.len() == *m && arm.is_subset_of(Arm::full(self.d))
            }
            FamilyKind::DagPaths(g) => g.has_path_with_atoms(arm),
        }
    }

    /// Union of all arms.
    pub fn coverage(&self) -> Arm {
        match &self.kind {
            FamilyKind::Explicit(arms) => arms.iter().fold(Arm::empty(), |u, &a| u.union(a)),
            FamilyKind::AllMSubsets { .. } => Arm::full(self.d),
            FamilyKind::DagPaths(g) => g.atoms_on_paths(),
        }
    }

    /// Uniformly random feasible arm.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Arm {
        match &self.kind {
            FamilyKind::Explicit(arms) => arms[rng.random_range(0..arms.len())],
            FamilyKind::AllMSubsets { m } => {
                Arm::from_atoms(rand::seq::index::sample(rng, self.d, *m).into_iter())
            }
            FamilyKind::DagPaths(g) => g.sample_path(rng),
        }
    }

    /// Relabel atoms: internal atom `i` becomes `perm[i]`... i.e. an arm
    /// containing old atom `a` will contain `new_index[a]`.
    pub fn relabeled(&self, new_index: &[usize]) -> Result<Self> {
        match &self.kind {
            FamilyKind::Explicit(arms) => Self::explicit(
                self.d,
                arms.iter().map(|a| a.map_atoms(|x| new_index[x])).collect(),
            ),
            FamilyKind::AllMSubsets { m } => Self::m_subsets(self.d, *m),
            FamilyKind::DagPaths(g) => Self::dag(self.d, g.relabeled(new_index)),
        }
    }

    /// Prior-free description for serialization.
    pub fn to_spec(&self) -> FamilySpec {
        match &self.kind {
            FamilyKind::Explicit(arms) => FamilySpec::Explicit {
                d: self.d,
                arms: arms.clone(),
            },
            FamilyKind::AllMSubsets { m } => FamilySpec::MSubsets { d: self.d, m: *m },
            FamilyKind::DagPaths(g) => FamilySpec::Dag {
                d: self.d,
                graph: g.clone(),
            },
        }
    }
}

/// All `m`-subsets of `0..d` in lexicographic order.
pub fn m_subsets(d: usize, m: usize) -> Vec<Arm> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    if m == 0 || m > d {
        return out;
    }
    loop {
        out.push(Arm::from_atoms(idx.iter().copied()));
        let mut i = m;
        while i > 0 && idx[i - 1] == d - m + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}
