//! Small-neighborhood-cover machinery: restricted neighborhoods, base group
//! sets, tau-SNC membership tests and layer decompositions.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SncError};
use crate::instance::IntervalGeometry;
use crate::system::{ElementSet, SubCollection, WeightedSetSystem};

/// Default cap on element frequency for the exhaustive membership test.
pub const DEFAULT_FREQUENCY_CAP: usize = 20;

/// Caller-supplied membership test `(sys, e, x', tau) -> is tau-SNC`.
pub type ExternalTest = Arc<dyn Fn(&WeightedSetSystem, usize, &ElementSet, usize) -> Result<bool> + Send + Sync>;

/// Strategy used to decide tau-SNC membership.
#[derive(Clone)]
pub enum SncOracle {
    /// Enumerates every subcollection of `N_S(e)`.
    Exact { frequency_cap: usize },
    /// Uses point/interval coordinates; only valid for interval families.
    Interval(IntervalGeometry),
    External(ExternalTest),
}

impl fmt::Debug for SncOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SncOracle::Exact { frequency_cap } => write!(f, "Exact {{ frequency_cap: {frequency_cap} }}"),
            SncOracle::Interval(_) => write!(f, "Interval"),
            SncOracle::External(_) => write!(f, "External"),
        }
    }
}

impl Default for SncOracle {
    fn default() -> Self {
        SncOracle::exact()
    }
}

impl SncOracle {
    pub fn exact() -> Self {
        SncOracle::Exact {
            frequency_cap: DEFAULT_FREQUENCY_CAP,
        }
    }

    /// Interval oracle, after checking the geometry reproduces `sys`.
    pub fn interval(sys: &WeightedSetSystem, geometry: IntervalGeometry) -> Result<Self> {
        if !geometry.consistent_with(sys) {
            return Err(SncError::Config(
                "interval oracle requires geometry consistent with the set memberships".into(),
            ));
        }
        Ok(SncOracle::Interval(geometry))
    }

    /// Interval oracle when consistent geometry is available, else exact.
    pub fn auto(sys: &WeightedSetSystem, geometry: Option<&IntervalGeometry>) -> Self {
        match geometry {
            Some(g) if g.consistent_with(sys) => SncOracle::Interval(g.clone()),
            _ => SncOracle::exact(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SncOracle::Exact { .. } => "exact",
            SncOracle::Interval(_) => "interval",
            SncOracle::External(_) => "external",
        }
    }

    /// The same strategy on the sub-instance built by [`WeightedSetSystem::restrict`].
    pub fn restrict(&self, element_map: &[usize], handle_map: &[usize]) -> SncOracle {
        match self {
            SncOracle::Interval(g) => SncOracle::Interval(g.restrict(element_map, handle_map)),
            other => other.clone(),
        }
    }
}

/// A witness of at most tau sets containing `owner` that covers a restricted
/// neighborhood.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BaseGroup {
    pub owner: usize,
    pub sets: SubCollection,
}

/// `RN(e, x', c) = U(N_c(e)) ∩ x'`.
pub fn restricted_neighborhood(
    sys: &WeightedSetSystem,
    e: usize,
    x: &ElementSet,
    c: &SubCollection,
) -> Result<ElementSet> {
    sys.check_element(e)?;
    sys.check_collection(c)?;
    if !x.contains(e) {
        return Err(SncError::Precondition(format!("element {e} is not in the restricting set")));
    }
    let mut rn = sys.covered_elements(&sys.covering_sets_unchecked(c, e))?;
    rn.intersect_with(x);
    Ok(rn)
}

/// Bit masks of a few sets over a small local universe.
struct LocalMasks {
    words: usize,
    masks: Vec<Vec<u64>>,
}

impl LocalMasks {
    fn new(sys: &WeightedSetSystem, handles: &[usize], universe: &[usize]) -> Self {
        let words = universe.len().div_ceil(64).max(1);
        let masks = handles
            .iter()
            .map(|&h| {
                let mut m = vec![0u64; words];
                for (i, &el) in universe.iter().enumerate() {
                    if sys.contains(h, el) {
                        m[i / 64] |= 1 << (i % 64);
                    }
                }
                m
            })
            .collect();
        LocalMasks { words, masks }
    }

    fn union_of(&self, members: impl Iterator<Item = usize>, out: &mut [u64]) {
        out.iter_mut().for_each(|w| *w = 0);
        for i in members {
            for (o, m) in out.iter_mut().zip(&self.masks[i]) {
                *o |= m;
            }
        }
    }

    /// True when some `k`-subset of `members` covers `target`.
    fn k_cover_exists(&self, members: &[usize], k: usize, target: &[u64], scratch: &mut [u64]) -> bool {
        if members.len() <= k {
            return true;
        }
        members.iter().copied().combinations(k).any(|combo| {
            self.union_of(combo.into_iter(), scratch);
            scratch.iter().zip(target).all(|(s, t)| s & t == *t)
        })
    }
}

/// Smallest base group of `e` restricted to `(x', N_c(e))`, ties broken by
/// lexicographic handle order. `None` means `RN` is not tau-collapsible.
pub fn find_base_group(
    sys: &WeightedSetSystem,
    e: usize,
    x: &ElementSet,
    c: &SubCollection,
    tau: usize,
) -> Result<Option<BaseGroup>> {
    let rn = restricted_neighborhood(sys, e, x, c)?;
    if rn.is_empty() {
        return Ok(Some(BaseGroup {
            owner: e,
            sets: SubCollection::new(),
        }));
    }
    let candidates = sys.covering_sets_unchecked(c, e);
    let universe = rn.to_vec();
    let local = LocalMasks::new(sys, candidates.handles(), &universe);
    let mut target = vec![0u64; local.words];
    for i in 0..universe.len() {
        target[i / 64] |= 1 << (i % 64);
    }
    let mut scratch = vec![0u64; local.words];
    for size in 1..=tau.min(candidates.len()) {
        for combo in (0..candidates.len()).combinations(size) {
            local.union_of(combo.iter().copied(), &mut scratch);
            if scratch.iter().zip(&target).all(|(s, t)| s & t == *t) {
                return Ok(Some(BaseGroup {
                    owner: e,
                    sets: combo.into_iter().map(|i| candidates.handles()[i]).collect(),
                }));
            }
        }
    }
    Ok(None)
}

/// Decides whether `e` is a tau-SNC element of `x'` with respect to the full family.
pub fn is_tau_snc_element(
    sys: &WeightedSetSystem,
    e: usize,
    x: &ElementSet,
    tau: usize,
    oracle: &SncOracle,
) -> Result<bool> {
    sys.check_element(e)?;
    if !x.contains(e) {
        return Err(SncError::Precondition(format!("element {e} is not in the residual set")));
    }
    if tau == 0 {
        return Err(SncError::Config("tau must be at least 1".into()));
    }
    match oracle {
        SncOracle::Exact { frequency_cap } => exact_snc(sys, e, x, tau, *frequency_cap),
        SncOracle::Interval(geometry) => Ok(interval_snc(sys, geometry, e, x, tau)),
        SncOracle::External(test) => test(sys, e, x, tau),
    }
}

fn exact_snc(sys: &WeightedSetSystem, e: usize, x: &ElementSet, tau: usize, cap: usize) -> Result<bool> {
    let family = sys.incidence(e);
    let f = family.len();
    if f > cap {
        return Err(SncError::FrequencyCap {
            element: e,
            frequency: f,
            cap,
        });
    }
    if f <= tau {
        return Ok(true);
    }
    let mut universe = ElementSet::new(sys.n());
    for &h in family {
        universe.union_with(&sys.set_elements(h));
    }
    universe.intersect_with(x);
    let universe = universe.to_vec();
    let local = LocalMasks::new(sys, family, &universe);
    let mut target = vec![0u64; local.words];
    let mut scratch = vec![0u64; local.words];
    let mut members = Vec::with_capacity(f);
    for mask in 1u64..(1u64 << f) {
        if (mask.count_ones() as usize) <= tau {
            continue;
        }
        members.clear();
        members.extend((0..f).filter(|i| mask >> i & 1 == 1));
        local.union_of(members.iter().copied(), &mut target);
        if !local.k_cover_exists(&members, tau, &target, &mut scratch) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// For intervals that all contain `e`, `RN` is the run of `x'` points between
/// the leftmost and rightmost extents. With tau >= 2 the intervals reaching
/// furthest left and furthest right always cover it. With tau = 1 every
/// subcollection has a single covering member iff the `x'`-extents of the
/// intervals containing `e` are totally ordered by inclusion: two incomparable
/// extents form a failing pair, and a chain's largest member covers the union.
fn interval_snc(sys: &WeightedSetSystem, geometry: &IntervalGeometry, e: usize, x: &ElementSet, tau: usize) -> bool {
    if tau >= 2 {
        return true;
    }
    let mut coords: Vec<f64> = x.iter().map(|p| geometry.points[p]).collect();
    coords.sort_by(f64::total_cmp);
    // Extent of interval h within x' as a half-open index range into `coords`.
    let mut extents: Vec<(usize, usize)> = sys
        .incidence(e)
        .iter()
        .map(|&h| {
            let (l, r) = geometry.intervals[h];
            let lo = coords.partition_point(|&c| c < l);
            let hi = coords.partition_point(|&c| c <= r);
            (lo, hi)
        })
        .collect();
    extents.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    extents.windows(2).all(|w| w[1].1 <= w[0].1)
}

/// Partition of the coverable elements into layers `Z_1..Z_L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerDecomposition {
    pub tau: usize,
    pub layers: Vec<ElementSet>,
    level: Vec<Option<usize>>,
    /// One synchronous round per stripping iteration.
    pub rounds: usize,
}

#[derive(Serialize)]
struct DecompositionExport<'a> {
    tau: usize,
    layers: Vec<Vec<usize>>,
    rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    names: Option<Vec<Vec<&'a str>>>,
}

impl LayerDecomposition {
    pub fn from_layers(n: usize, tau: usize, layers: Vec<ElementSet>) -> Self {
        let mut level = vec![None; n];
        for (k, z) in layers.iter().enumerate() {
            for e in z.iter() {
                level[e] = Some(k + 1);
            }
        }
        let rounds = layers.len();
        LayerDecomposition { tau, layers, level, rounds }
    }

    /// Layer depth `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// 1-based layer of `e`, `None` for elements outside the decomposition.
    pub fn level(&self, e: usize) -> Option<usize> {
        self.level.get(e).copied().flatten()
    }

    /// `Z_k`, 1-based.
    pub fn layer(&self, k: usize) -> &ElementSet {
        &self.layers[k - 1]
    }

    /// `Z_k ∪ ... ∪ Z_L`.
    pub fn from_layer(&self, k: usize) -> ElementSet {
        let mut out = ElementSet::new(self.level.len());
        for z in self.layers.iter().skip(k.saturating_sub(1)) {
            out.union_with(z);
        }
        out
    }

    pub fn to_json(&self, names: Option<&[String]>) -> String {
        let export = DecompositionExport {
            tau: self.tau,
            layers: self.layers.iter().map(ElementSet::to_vec).collect(),
            rounds: self.rounds,
            names: names.map(|names| {
                self.layers
                    .iter()
                    .map(|z| z.iter().map(|e| names[e].as_str()).collect())
                    .collect()
            }),
        };
        serde_json::to_string_pretty(&export).expect("decomposition serializes")
    }
}

/// Iteratively strips every tau-SNC element of the residual set. Membership
/// tests of one round all read the same residual set and run in parallel.
pub fn layer_decomposition(sys: &WeightedSetSystem, tau: usize, oracle: &SncOracle) -> Result<LayerDecomposition> {
    layer_decomposition_within(sys, &sys.coverable_elements(), tau, oracle)
}

/// Layer decomposition of the elements of `ground` (uncoverable ones are skipped).
pub fn layer_decomposition_within(
    sys: &WeightedSetSystem,
    ground: &ElementSet,
    tau: usize,
    oracle: &SncOracle,
) -> Result<LayerDecomposition> {
    if tau == 0 {
        return Err(SncError::Config("tau must be at least 1".into()));
    }
    let mut residual = ground.intersection(&sys.coverable_elements());
    let mut layers = Vec::new();
    while !residual.is_empty() {
        let members = residual.to_vec();
        let verdicts: Vec<bool> = members
            .par_iter()
            .map(|&e| is_tau_snc_element(sys, e, &residual, tau, oracle))
            .collect::<Result<_>>()?;
        let layer = ElementSet::from_elements(
            sys.n(),
            members.iter().zip(&verdicts).filter(|(_, &ok)| ok).map(|(&e, _)| e),
        );
        if layer.is_empty() {
            return Err(SncError::NotSnc { tau, residual: members });
        }
        residual.difference_with(&layer);
        layers.push(layer);
    }
    Ok(LayerDecomposition::from_layers(sys.n(), tau, layers))
}

/// Smallest tau in `1..=max_tau` for which the decomposition exists.
pub fn min_tau(sys: &WeightedSetSystem, max_tau: usize, oracle: &SncOracle) -> Result<Option<(usize, LayerDecomposition)>> {
    for tau in 1..=max_tau {
        match layer_decomposition(sys, tau, oracle) {
            Ok(d) => return Ok(Some((tau, d))),
            Err(SncError::NotSnc { .. }) => continue,
            Err(other) => return Err(other),
        }
    }
    Ok(None)
}

/// Hereditary property of SNC membership: membership in `x1` implies
/// membership in every `x2 ⊆ x1` containing `e`.
pub fn hereditary_check(
    sys: &WeightedSetSystem,
    e: usize,
    x1: &ElementSet,
    x2: &ElementSet,
    tau: usize,
    oracle: &SncOracle,
) -> Result<bool> {
    if !x2.is_subset(x1) || !x2.contains(e) {
        return Err(SncError::Precondition("need e ∈ x2 ⊆ x1".into()));
    }
    Ok(!is_tau_snc_element(sys, e, x1, tau, oracle)? || is_tau_snc_element(sys, e, x2, tau, oracle)?)
}
