use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Index of an atom, dense in `0..d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomId(pub usize);

/// A subset of atoms stored as a bitset. Supports up to 64 atoms.
///
/// Arms order lexicographically by their ascending atom lists, so
/// `{0,1} < {0,2} < {1,2}` and `{0} < {0,1}`. This is the tie-breaking rule
/// used by every argmax in the crate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Arm(u64);

impl Arm {
    pub const MAX_ATOMS: usize = 64;

    pub const fn empty() -> Self {
        Arm(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        Arm(bits)
    }

    pub fn singleton(atom: usize) -> Self {
        debug_assert!(atom < Self::MAX_ATOMS);
        Arm(1u64 << atom)
    }

    pub fn from_atoms<I: IntoIterator<Item = usize>>(atoms: I) -> Self {
        let mut bits = 0u64;
        for a in atoms {
            assert!(a < Self::MAX_ATOMS, "atom index {a} exceeds 64-atom limit");
            bits |= 1u64 << a;
        }
        Arm(bits)
    }

    /// All atoms `0..d`.
    pub fn full(d: usize) -> Self {
        if d >= 64 {
            Arm(u64::MAX)
        } else {
            Arm((1u64 << d) - 1)
        }
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, atom: usize) -> bool {
        atom < 64 && self.0 & (1u64 << atom) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Arm) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: Arm) -> Arm {
        Arm(self.0 | other.0)
    }

    pub fn intersection(self, other: Arm) -> Arm {
        Arm(self.0 & other.0)
    }

    pub fn with(self, atom: usize) -> Arm {
        Arm(self.0 | (1u64 << atom))
    }

    pub fn max_atom(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    /// Atoms in ascending order.
    pub fn atoms(self) -> Atoms {
        Atoms(self.0)
    }

    pub fn to_hex(self) -> String {
        format!("{:x}", self.0)
    }

    /// Map every atom through `f`.
    pub fn map_atoms(self, f: impl Fn(usize) -> usize) -> Arm {
        Arm::from_atoms(self.atoms().map(f))
    }
}

#[derive(Debug, Clone)]
pub struct Atoms(u64);

impl Iterator for Atoms {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let a = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(a)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Atoms {}

impl Ord for Arm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.atoms().cmp(other.atoms())
    }
}

impl PartialOrd for Arm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Arm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.atoms())
    }
}

impl<'de> Deserialize<'de> for Arm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let atoms = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = atoms.iter().find(|&&a| a >= Arm::MAX_ATOMS) {
            return Err(serde::de::Error::custom(format!(
                "atom index {bad} exceeds the 64-atom limit"
            )));
        }
        Ok(Arm::from_atoms(atoms))
    }
}

/// Per-atom Bernoulli outcomes of one pull, as a bitset of atoms that
/// returned reward 1. Always a subset of the pulled arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Rewards(u64);

impl Rewards {
    pub const fn from_bits(bits: u64) -> Self {
        Rewards(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn get(self, atom: usize) -> bool {
        self.0 & (1u64 << atom) != 0
    }

    /// Total arm reward: the number of atoms that paid 1.
    pub fn total(self) -> u32 {
        self.0.count_ones()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let a = Arm::from_atoms([0, 1]);
        let b = Arm::from_atoms([0, 2]);
        let c = Arm::from_atoms([1, 2]);
        assert!(a < b && b < c);
        assert!(Arm::from_atoms([0]) < a);
        assert!(Arm::from_atoms([0, 5]) < Arm::from_atoms([1]));
    }

    #[test]
    fn atoms_iterate_ascending() {
        let arm = Arm::from_atoms([5, 1, 3]);
        assert_eq!(arm.atoms().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(arm.len(), 3);
        assert_eq!(arm.max_atom(), Some(5));
        assert_eq!(arm.to_string(), "{1,3,5}");
    }

    #[test]
    fn serde_as_atom_list() {
        let arm = Arm::from_atoms([2, 0]);
        assert_eq!(serde_json::to_string(&arm).unwrap(), "[0,2]");
        let back: Arm = serde_json::from_str("[2,0]").unwrap();
        assert_eq!(back, arm);
        assert!(serde_json::from_str::<Arm>("[64]").is_err());
    }
}
