//! Weighted set systems and the neighborhood primitives the solver is built on.
//!
//! Elements are dense ids `0..n`, set handles dense ids `0..m`. Every set is
//! kept both as a sorted member list and as a bitset, and the element → set
//! incidence index is rebuilt from the family on construction.

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SncError};

/// Relative slack used for every weight comparison: `1e-9 * max(1, w)`.
pub fn weight_tolerance(w: f64) -> f64 {
    1e-9 * w.abs().max(1.0)
}

/// A subset of the ground set `{0..n}` with bitset semantics.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ElementSet {
    bits: FixedBitSet,
}

impl ElementSet {
    pub fn new(n: usize) -> Self {
        ElementSet {
            bits: FixedBitSet::with_capacity(n),
        }
    }

    pub fn full(n: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(n);
        bits.insert_range(..);
        ElementSet { bits }
    }

    pub fn from_elements<I: IntoIterator<Item = usize>>(n: usize, elements: I) -> Self {
        let mut set = ElementSet::new(n);
        for e in elements {
            set.insert(e);
        }
        set
    }

    /// Size of the ground set this set lives in.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn insert(&mut self, e: usize) {
        self.bits.insert(e);
    }

    pub fn remove(&mut self, e: usize) {
        self.bits.set(e, false);
    }

    pub fn contains(&self, e: usize) -> bool {
        self.bits.contains(e)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union_with(&mut self, other: &ElementSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &ElementSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &ElementSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn intersection(&self, other: &ElementSet) -> ElementSet {
        let mut out = self.clone();
        out.intersect_with(other);
        out
    }

    pub fn difference(&self, other: &ElementSet) -> ElementSet {
        let mut out = self.clone();
        out.difference_with(other);
        out
    }

    pub fn is_subset(&self, other: &ElementSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &ElementSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn intersection_count(&self, other: &ElementSet) -> usize {
        self.bits.intersection_count(&other.bits)
    }
}

impl fmt::Debug for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for ElementSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

/// A set of set handles, kept sorted ascending without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubCollection(Vec<usize>);

impl SubCollection {
    pub fn new() -> Self {
        SubCollection(Vec::new())
    }

    /// Every handle `0..m`.
    pub fn all(m: usize) -> Self {
        SubCollection((0..m).collect())
    }

    pub fn handles(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, h: usize) -> bool {
        self.0.binary_search(&h).is_ok()
    }

    pub fn insert(&mut self, h: usize) -> bool {
        match self.0.binary_search(&h) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, h);
                true
            }
        }
    }

    pub fn remove(&mut self, h: usize) -> bool {
        match self.0.binary_search(&h) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &SubCollection) -> SubCollection {
        self.iter().chain(other.iter()).collect()
    }

    pub fn intersection(&self, other: &SubCollection) -> SubCollection {
        self.iter().filter(|&h| other.contains(h)).collect()
    }

    pub fn difference(&self, other: &SubCollection) -> SubCollection {
        self.iter().filter(|&h| !other.contains(h)).collect()
    }

    pub fn is_subset(&self, other: &SubCollection) -> bool {
        self.iter().all(|h| other.contains(h))
    }
}

impl FromIterator<usize> for SubCollection {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SubCollection(v)
    }
}

impl From<Vec<usize>> for SubCollection {
    fn from(v: Vec<usize>) -> Self {
        v.into_iter().collect()
    }
}

/// Findings from [`WeightedSetSystem::validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Handles whose weight is negative or not finite.
    pub bad_weights: Vec<usize>,
    /// Elements contained in no set.
    pub uncoverable: Vec<usize>,
    /// Pairs `(first, duplicate)` of handles with identical member lists.
    pub duplicate_sets: Vec<(usize, usize)>,
    pub empty_sets: Vec<usize>,
    /// Maximum element frequency `f`.
    pub max_frequency: usize,
    /// Maximum set size.
    pub max_set_size: usize,
}

impl Diagnostics {
    pub fn feasible(&self) -> bool {
        self.uncoverable.is_empty()
    }

    /// True when the instance can be handed to the solver.
    pub fn is_ok(&self) -> bool {
        self.feasible() && self.bad_weights.is_empty()
    }
}

/// A ground set `{0..n}`, a family of subsets, and a weight per subset.
#[derive(Clone, Debug)]
pub struct WeightedSetSystem {
    n: usize,
    sets: Vec<Vec<usize>>,
    members: Vec<FixedBitSet>,
    weights: Vec<f64>,
    incidence: Vec<Vec<usize>>,
}

impl PartialEq for WeightedSetSystem {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.sets == other.sets
            && self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl WeightedSetSystem {
    /// Builds a system; member lists are sorted and deduplicated.
    pub fn new(n: usize, sets: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if sets.len() != weights.len() {
            return Err(SncError::Precondition(format!(
                "{} sets but {} weights",
                sets.len(),
                weights.len()
            )));
        }
        let mut members = Vec::with_capacity(sets.len());
        let mut normalized = Vec::with_capacity(sets.len());
        for mut set in sets {
            set.sort_unstable();
            set.dedup();
            if let Some(&e) = set.last() {
                if e >= n {
                    return Err(SncError::ElementOutOfRange { element: e, n });
                }
            }
            let mut bits = FixedBitSet::with_capacity(n);
            bits.extend(set.iter().copied());
            members.push(bits);
            normalized.push(set);
        }
        let incidence = build_incidence(n, &normalized);
        Ok(WeightedSetSystem {
            n,
            sets: normalized,
            members,
            weights,
            incidence,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, h: usize) -> &[usize] {
        &self.sets[h]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn weight(&self, h: usize) -> f64 {
        self.weights[h]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sorted handles of the sets containing `e`.
    pub fn incidence(&self, e: usize) -> &[usize] {
        &self.incidence[e]
    }

    pub fn contains(&self, h: usize, e: usize) -> bool {
        self.members[h].contains(e)
    }

    /// Members of set `h` as an [`ElementSet`].
    pub fn set_elements(&self, h: usize) -> ElementSet {
        ElementSet {
            bits: self.members[h].clone(),
        }
    }

    /// `|S_h ∩ x|`.
    pub fn count_in(&self, h: usize, x: &ElementSet) -> usize {
        self.members[h].intersection_count(&x.bits)
    }

    pub fn max_frequency(&self) -> usize {
        self.incidence.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_set_size(&self) -> usize {
        self.sets.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn all_elements(&self) -> ElementSet {
        ElementSet::full(self.n)
    }

    /// Elements contained in at least one set.
    pub fn coverable_elements(&self) -> ElementSet {
        ElementSet::from_elements(self.n, (0..self.n).filter(|&e| !self.incidence[e].is_empty()))
    }

    pub fn total_weight(&self, c: &SubCollection) -> f64 {
        c.iter().map(|h| self.weights[h]).sum()
    }

    pub fn check_element(&self, e: usize) -> Result<()> {
        if e < self.n {
            Ok(())
        } else {
            Err(SncError::ElementOutOfRange { element: e, n: self.n })
        }
    }

    pub fn check_collection(&self, c: &SubCollection) -> Result<()> {
        match c.handles().last() {
            Some(&h) if h >= self.m() => Err(SncError::InvalidHandle { handle: h, m: self.m() }),
            _ => Ok(()),
        }
    }

    /// `U(c)`: the union of the sets in `c`.
    pub fn covered_elements(&self, c: &SubCollection) -> Result<ElementSet> {
        self.check_collection(c)?;
        let mut out = FixedBitSet::with_capacity(self.n);
        for h in c.iter() {
            out.union_with(&self.members[h]);
        }
        Ok(ElementSet { bits: out })
    }

    /// `N_c(e)`: the sets of `c` containing `e`.
    pub fn covering_sets(&self, c: &SubCollection, e: usize) -> Result<SubCollection> {
        self.check_element(e)?;
        self.check_collection(c)?;
        Ok(self.covering_sets_unchecked(c, e))
    }

    pub(crate) fn covering_sets_unchecked(&self, c: &SubCollection, e: usize) -> SubCollection {
        // Both lists are sorted; walk the shorter one.
        let inc = &self.incidence[e];
        if inc.len() <= c.len() {
            SubCollection(inc.iter().copied().filter(|&h| c.contains(h)).collect())
        } else {
            SubCollection(c.iter().filter(|&h| self.members[h].contains(e)).collect())
        }
    }

    /// `R_c(e, e')`: the sets of `c` containing both elements.
    pub fn common_sets(&self, c: &SubCollection, e: usize, e2: usize) -> Result<SubCollection> {
        self.check_element(e2)?;
        let n1 = self.covering_sets(c, e)?;
        Ok(SubCollection(
            n1.iter().filter(|&h| self.members[h].contains(e2)).collect(),
        ))
    }

    /// True iff some set of `c` contains both elements. An element is its own
    /// neighbor whenever `c` covers it.
    pub fn are_neighbors(&self, c: &SubCollection, e: usize, e2: usize) -> Result<bool> {
        self.check_element(e)?;
        self.check_element(e2)?;
        self.check_collection(c)?;
        Ok(self.are_neighbors_unchecked(c, e, e2))
    }

    pub(crate) fn are_neighbors_unchecked(&self, c: &SubCollection, e: usize, e2: usize) -> bool {
        self.incidence[e]
            .iter()
            .any(|&h| self.members[h].contains(e2) && c.contains(h))
    }

    pub fn validate(&self) -> Diagnostics {
        let bad_weights = (0..self.m())
            .filter(|&h| !(self.weights[h].is_finite() && self.weights[h] >= 0.0))
            .collect();
        let uncoverable = (0..self.n).filter(|&e| self.incidence[e].is_empty()).collect();
        let empty_sets = (0..self.m()).filter(|&h| self.sets[h].is_empty()).collect();
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by(|&a, &b| self.sets[a].cmp(&self.sets[b]).then(a.cmp(&b)));
        let mut duplicate_sets = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let mut j = i + 1;
            while j < order.len() && self.sets[order[j]] == self.sets[order[i]] {
                duplicate_sets.push((order[i], order[j]));
                j += 1;
            }
            i = j;
        }
        duplicate_sets.sort_unstable();
        Diagnostics {
            bad_weights,
            uncoverable,
            duplicate_sets,
            empty_sets,
            max_frequency: self.max_frequency(),
            max_set_size: self.max_set_size(),
        }
    }

    /// Sub-instance on `elements` (renumbered densely in ascending order) with
    /// the sets `handles`, each intersected with `elements`. Sets left empty by
    /// the restriction are dropped. Returns the system together with the maps
    /// new element id → old id and new handle → old handle.
    pub fn restrict(
        &self,
        elements: &ElementSet,
        handles: &SubCollection,
    ) -> Result<(WeightedSetSystem, Vec<usize>, Vec<usize>)> {
        self.check_collection(handles)?;
        let element_map: Vec<usize> = elements.iter().filter(|&e| e < self.n).collect();
        let mut new_id = vec![usize::MAX; self.n];
        for (i, &e) in element_map.iter().enumerate() {
            new_id[e] = i;
        }
        let mut sets = Vec::new();
        let mut weights = Vec::new();
        let mut handle_map = Vec::new();
        for h in handles.iter() {
            let restricted: Vec<usize> = self.sets[h]
                .iter()
                .filter(|&&e| new_id[e] != usize::MAX)
                .map(|&e| new_id[e])
                .collect();
            if restricted.is_empty() {
                continue;
            }
            sets.push(restricted);
            weights.push(self.weights[h]);
            handle_map.push(h);
        }
        let sys = WeightedSetSystem::new(element_map.len(), sets, weights)?;
        Ok((sys, element_map, handle_map))
    }
}

fn build_incidence(n: usize, sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut incidence = vec![Vec::new(); n];
    for (h, set) in sets.iter().enumerate() {
        for &e in set {
            incidence[e].push(h);
        }
    }
    incidence
}
