//! The discrete design space: 8 radial slots, each empty or wired to one of 3
//! pressure regulators.
//!
//! A design is the unit of search. Regulator labels are interchangeable (wiring
//! leg A to regulator 1 and leg B to regulator 2 behaves identically to the
//! swapped wiring under a relabeled controller), so the search space is
//! quotiented by regulator permutations via [`canonicalize`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of candidate leg positions around the disk.
pub const NUM_SLOTS: usize = 8;
/// Number of pressure regulators.
pub const NUM_REGULATORS: usize = 3;
/// Length of the one-hot design encoding consumed by the policy.
pub const ENCODING_LEN: usize = NUM_SLOTS * (NUM_REGULATORS + 1);

/// State of one slot: empty, or a leg wired to regulator `1..=3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Empty,
    Reg(u8),
}

impl Slot {
    fn code(self) -> u8 {
        match self {
            Slot::Empty => 0,
            Slot::Reg(r) => r,
        }
    }

    fn from_code(c: u8) -> Option<Slot> {
        match c {
            0 => Some(Slot::Empty),
            r if r as usize <= NUM_REGULATORS => Some(Slot::Reg(r)),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesignError {
    #[error("design string must have exactly {NUM_SLOTS} characters, got {0}")]
    BadLength(usize),
    #[error("invalid slot character {0:?} (expected '-', '1', '2' or '3')")]
    BadChar(char),
    #[error("design has {0} legs; valid designs have {min}..={max}", min = .1, max = .2)]
    LegCount(usize, usize, usize),
}

/// An assignment of each of the 8 slots to empty or a regulator.
///
/// The stable string form is one character per slot: `-` for empty, `1`/`2`/`3`
/// for the regulator index, e.g. `11--22--` for the four-legged baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Design {
    pub slots: [Slot; NUM_SLOTS],
}

impl Design {
    pub fn new(slots: [Slot; NUM_SLOTS]) -> Self {
        Design { slots }
    }

    pub const fn empty() -> Self {
        Design { slots: [Slot::Empty; NUM_SLOTS] }
    }

    /// Number of occupied slots.
    pub fn leg_count(&self) -> usize {
        self.slots.iter().filter(|s| **s != Slot::Empty).count()
    }

    /// Slot indices that carry a leg, in slot order.
    pub fn occupied_slots(&self) -> Vec<usize> {
        (0..NUM_SLOTS).filter(|&i| self.slots[i] != Slot::Empty).collect()
    }

    /// Regulator index (0-based) for each occupied slot, in slot order.
    pub fn leg_regulators(&self) -> Vec<usize> {
        self.slots
            .iter()
            .filter_map(|s| match s {
                Slot::Empty => None,
                Slot::Reg(r) => Some(*r as usize - 1),
            })
            .collect()
    }

    /// Bitmask of occupied slots; designs sharing a mask share a robot mesh.
    pub fn occupancy_mask(&self) -> u8 {
        let mut m = 0u8;
        for (i, s) in self.slots.iter().enumerate() {
            if *s != Slot::Empty {
                m |= 1 << i;
            }
        }
        m
    }

    /// Applies a permutation of regulator labels (`perm[r-1]` is the new label
    /// of regulator `r`). Empty slots are fixed.
    pub fn permute_regulators(&self, perm: &[u8; NUM_REGULATORS]) -> Design {
        let mut out = *self;
        for s in out.slots.iter_mut() {
            if let Slot::Reg(r) = s {
                *r = perm[*r as usize - 1];
            }
        }
        out
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.slots {
            match s {
                Slot::Empty => write!(f, "-")?,
                Slot::Reg(r) => write!(f, "{r}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for Design {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != NUM_SLOTS {
            return Err(DesignError::BadLength(chars.len()));
        }
        let mut slots = [Slot::Empty; NUM_SLOTS];
        for (i, c) in chars.into_iter().enumerate() {
            slots[i] = match c {
                '-' => Slot::Empty,
                '1' => Slot::Reg(1),
                '2' => Slot::Reg(2),
                '3' => Slot::Reg(3),
                other => return Err(DesignError::BadChar(other)),
            };
        }
        Ok(Design { slots })
    }
}

/// A design space restricted to a prefix of the slots and regulators, with a
/// leg-count range. The full space is `DesignSpace::default()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignSpace {
    /// Slots `0..n_slots` are usable; the rest stay empty.
    pub n_slots: usize,
    /// Regulators `1..=n_regulators` are usable.
    pub n_regulators: usize,
    pub min_legs: usize,
    pub max_legs: usize,
}

impl Default for DesignSpace {
    fn default() -> Self {
        DesignSpace { n_slots: NUM_SLOTS, n_regulators: NUM_REGULATORS, min_legs: 3, max_legs: 6 }
    }
}

impl DesignSpace {
    pub fn new(n_slots: usize, n_regulators: usize, min_legs: usize, max_legs: usize) -> Self {
        assert!(n_slots >= 1 && n_slots <= NUM_SLOTS);
        assert!(n_regulators >= 1 && n_regulators <= NUM_REGULATORS);
        assert!(min_legs <= max_legs && max_legs <= n_slots);
        DesignSpace { n_slots, n_regulators, min_legs, max_legs }
    }

    /// True iff the design uses only this space's slots/regulators and its leg
    /// count is in range.
    pub fn contains(&self, d: &Design) -> bool {
        for (i, s) in d.slots.iter().enumerate() {
            match s {
                Slot::Empty => {}
                Slot::Reg(r) => {
                    if i >= self.n_slots || *r as usize > self.n_regulators {
                        return false;
                    }
                }
            }
        }
        let legs = d.leg_count();
        legs >= self.min_legs && legs <= self.max_legs
    }

    /// All permutations of the active regulator labels (inactive labels fixed).
    fn regulator_permutations(&self) -> Vec<[u8; NUM_REGULATORS]> {
        let mut perms = Vec::new();
        let labels: Vec<u8> = (1..=self.n_regulators as u8).collect();
        permute(&labels, &mut Vec::new(), &mut perms);
        perms
            .into_iter()
            .map(|p| {
                let mut arr = [1u8, 2, 3];
                for (i, v) in p.iter().enumerate() {
                    arr[i] = *v;
                }
                arr
            })
            .collect()
    }

    /// Canonical representative of `d`'s regulator-permutation orbit: the
    /// lexicographically smallest slot list over all relabelings.
    pub fn canonicalize(&self, d: &Design) -> CanonicalDesign {
        let mut best = *d;
        for perm in self.regulator_permutations() {
            let cand = d.permute_regulators(&perm);
            if cand.slots < best.slots {
                best = cand;
            }
        }
        CanonicalDesign(best)
    }

    /// Enumerates designs with leg count in `[min_legs, max_legs]`, in
    /// lexicographic slot order. With `canonical`, one representative per
    /// regulator-permutation orbit.
    pub fn enumerate(&self, canonical: bool) -> Vec<Design> {
        let mut out = Vec::new();
        let n_codes = (self.n_regulators + 1) as u64;
        let total = n_codes.pow(self.n_slots as u32);
        for mut key in 0..total {
            let mut slots = [Slot::Empty; NUM_SLOTS];
            // Digit order chosen so enumeration is lexicographic in slot order.
            for i in (0..self.n_slots).rev() {
                let code = (key % n_codes) as u8;
                key /= n_codes;
                slots[i] = Slot::from_code(code).unwrap();
            }
            let d = Design { slots };
            let legs = d.leg_count();
            if legs < self.min_legs || legs > self.max_legs {
                continue;
            }
            if canonical && self.canonicalize(&d).0 != d {
                continue;
            }
            out.push(d);
        }
        out
    }

    pub fn validate(&self, d: &Design) -> bool {
        self.contains(d)
    }
}

fn permute(rest: &[u8], prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if rest.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for (i, v) in rest.iter().enumerate() {
        let mut next: Vec<u8> = rest.to_vec();
        next.remove(i);
        prefix.push(*v);
        permute(&next, prefix, out);
        prefix.pop();
    }
}

/// A design that is minimal in its regulator-permutation orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalDesign(pub Design);

impl CanonicalDesign {
    pub fn design(&self) -> &Design {
        &self.0
    }
}

impl fmt::Display for CanonicalDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Enumerates the paper-scale design space (8 slots, 3 regulators).
pub fn enumerate_designs(min_legs: usize, max_legs: usize, canonical: bool) -> Vec<Design> {
    DesignSpace::new(NUM_SLOTS, NUM_REGULATORS, min_legs, max_legs).enumerate(canonical)
}

/// Canonicalizes under the full 6-element regulator permutation group.
pub fn canonicalize(d: &Design) -> CanonicalDesign {
    DesignSpace::default().canonicalize(d)
}

/// True iff the leg count is in the valid range `[3, 6]`.
pub fn validate_design(d: &Design) -> bool {
    let legs = d.leg_count();
    (3..=6).contains(&legs)
}

/// One-hot encoding of a design: slot `i` occupies positions `4i..4i+4` as a
/// one-hot over (empty, regulator 1, 2, 3).
pub fn encode_design(d: &Design) -> [f64; ENCODING_LEN] {
    let mut v = [0.0; ENCODING_LEN];
    for (i, s) in d.slots.iter().enumerate() {
        v[i * (NUM_REGULATORS + 1) + s.code() as usize] = 1.0;
    }
    v
}

/// Inverse of [`encode_design`]; returns `None` if any 4-block is not one-hot.
pub fn decode_design(v: &[f64]) -> Option<Design> {
    if v.len() != ENCODING_LEN {
        return None;
    }
    let mut slots = [Slot::Empty; NUM_SLOTS];
    for i in 0..NUM_SLOTS {
        let block = &v[i * 4..i * 4 + 4];
        let mut hot = None;
        for (j, x) in block.iter().enumerate() {
            if *x == 1.0 {
                if hot.is_some() {
                    return None;
                }
                hot = Some(j);
            } else if *x != 0.0 {
                return None;
            }
        }
        slots[i] = Slot::from_code(hot? as u8)?;
    }
    Some(Design { slots })
}

/// The expert baseline of the crawling task: fore legs on slots 0 and 1 wired
/// to regulator 1, hind legs on slots 4 and 5 wired to regulator 2.
pub fn baseline_design() -> Design {
    "11--22--".parse().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn string_roundtrip() {
        let d = baseline_design();
        assert_eq!(d.to_string(), "11--22--");
        assert_eq!(d.leg_count(), 4);
        assert_eq!("1--2--1-".parse::<Design>().unwrap().leg_count(), 3);
        assert!(matches!("1--2--1".parse::<Design>(), Err(DesignError::BadLength(7))));
        assert!(matches!("1--2--1x".parse::<Design>(), Err(DesignError::BadChar('x'))));
    }

    #[test]
    fn raw_count_matches_closed_form() {
        // sum over k of C(8,k) * 3^k
        let binom = |n: u64, k: u64| -> u64 {
            (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
        };
        let expected: u64 = (3..=6).map(|k| binom(8, k) * 3u64.pow(k as u32)).sum();
        assert_eq!(expected, 41202);
        assert_eq!(enumerate_designs(3, 6, false).len(), 41202);
    }

    #[test]
    fn canonical_count_matches_burnside() {
        // Burnside over the 6 regulator permutations: identity fixes all 41202;
        // each of the 3 transpositions fixes designs using only the untouched
        // regulator (210 each); the 2 three-cycles fix nothing.
        let raw = enumerate_designs(3, 6, false);
        let transposition_fixed = raw
            .iter()
            .filter(|d| *d == &d.permute_regulators(&[2, 1, 3]))
            .count();
        assert_eq!(transposition_fixed, 210);
        let cycle_fixed = raw
            .iter()
            .filter(|d| *d == &d.permute_regulators(&[2, 3, 1]))
            .count();
        assert_eq!(cycle_fixed, 0);
        let burnside = (41202 + 3 * 210 + 2 * 0) / 6;
        assert_eq!(burnside, 6972);
        assert_eq!(enumerate_designs(3, 6, true).len(), 6972);
    }

    #[test]
    fn single_leg_canonical_count() {
        // Raw: 8 slots x 3 regulators = 24. Each transposition fixes the 8
        // designs on the remaining regulator; cycles fix none: (24+3*8)/6 = 8.
        assert_eq!(enumerate_designs(1, 1, false).len(), 24);
        assert_eq!(enumerate_designs(1, 1, true).len(), 8);
    }

    #[test]
    fn canonicalize_examples() {
        let d: Design = "33------".parse().unwrap();
        assert_eq!(canonicalize(&d).to_string(), "11------");
        let only_reg1: Design = "1-1-1---".parse().unwrap();
        assert_eq!(canonicalize(&only_reg1).0, only_reg1);
    }

    #[test]
    fn orbit_sizes_divide_group_order_and_sum_to_raw() {
        let space = DesignSpace::default();
        let canon = space.enumerate(true);
        let mut total = 0usize;
        for d in &canon {
            let mut orbit = std::collections::BTreeSet::new();
            for perm in space.regulator_permutations() {
                orbit.insert(d.permute_regulators(&perm));
            }
            assert_eq!(6 % orbit.len(), 0);
            total += orbit.len();
        }
        assert_eq!(total, 41202);
    }

    #[test]
    fn encode_shape_and_bijection() {
        let empty = Design::empty();
        let v = encode_design(&empty);
        for i in 0..NUM_SLOTS {
            assert_eq!(v[4 * i], 1.0);
        }
        assert_eq!(v.iter().sum::<f64>(), 8.0);

        for d in enumerate_designs(3, 3, false).iter().take(500) {
            let enc = encode_design(d);
            for i in 0..NUM_SLOTS {
                assert_eq!(enc[4 * i..4 * i + 4].iter().sum::<f64>(), 1.0);
            }
            assert_eq!(decode_design(&enc), Some(*d));
        }
    }

    #[test]
    fn validity_rule() {
        let two: Design = "12------".parse().unwrap();
        let seven: Design = "1111222-".parse().unwrap();
        assert!(!validate_design(&two));
        assert!(validate_design(&baseline_design()));
        assert!(!validate_design(&seven));
    }

    #[test]
    fn restricted_space_counts() {
        // 4 slots, 2 regulators, 2-3 legs: C(4,2)*4 + C(4,3)*8 = 56 raw,
        // 28 canonical (no design is fixed by the regulator swap).
        let space = DesignSpace::new(4, 2, 2, 3);
        assert_eq!(space.enumerate(false).len(), 56);
        assert_eq!(space.enumerate(true).len(), 28);
    }

    proptest! {
        #[test]
        fn canonicalize_is_orbit_invariant(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut slots = [Slot::Empty; NUM_SLOTS];
            for s in slots.iter_mut() {
                *s = Slot::from_code(rng.random_range(0..4u8)).unwrap();
            }
            let d = Design::new(slots);
            let space = DesignSpace::default();
            let canon = space.canonicalize(&d);
            for perm in space.regulator_permutations() {
                prop_assert_eq!(space.canonicalize(&d.permute_regulators(&perm)), canon);
            }
            // Canonical designs are fixed points.
            prop_assert_eq!(space.canonicalize(canon.design()), canon);
            // Validity is permutation-invariant.
            for perm in space.regulator_permutations() {
                prop_assert_eq!(validate_design(&d.permute_regulators(&perm)), validate_design(&d));
            }
        }
    }
}
