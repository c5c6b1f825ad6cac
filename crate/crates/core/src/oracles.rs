//! Ground-truth and baseline solvers: exact branch-and-bound, brute-force
//! enumeration, greedy H(Δ), and the sequential f-approximate primal-dual.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Result, SncError};
use crate::system::{weight_tolerance, ElementSet, SubCollection, WeightedSetSystem};

/// True when `c` covers every element.
pub fn verify_cover(sys: &WeightedSetSystem, c: &SubCollection) -> bool {
    sys.covered_elements(c).map(|u| u.len() == sys.n()).unwrap_or(false)
}

/// `max_{e ∈ elems} |N_c(e)|`, 0 for an empty `elems`.
pub fn max_multiplicity(sys: &WeightedSetSystem, c: &SubCollection, elems: &ElementSet) -> usize {
    elems
        .iter()
        .map(|e| sys.incidence(e).iter().filter(|&&h| c.contains(h)).count())
        .max()
        .unwrap_or(0)
}

pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

fn require_feasible(sys: &WeightedSetSystem) -> Result<()> {
    match (0..sys.n()).find(|&e| sys.incidence(e).is_empty()) {
        Some(e) => Err(SncError::Infeasible(format!("element {e} lies in no set"))),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_nodes: 10_000_000,
            max_time: Duration::from_secs(60),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactResult {
    pub opt_weight: f64,
    pub witness: SubCollection,
    pub nodes_explored: u64,
}

struct Search<'a> {
    sys: &'a WeightedSetSystem,
    limits: SearchLimits,
    started: Instant,
    nodes: u64,
    uncovered: Vec<usize>,
    cover_count: Vec<usize>,
    excluded: Vec<bool>,
    chosen: Vec<usize>,
    cost: f64,
    best: f64,
    best_set: Vec<usize>,
}

impl Search<'_> {
    /// Each uncovered element pays its cheapest per-element price
    /// `w(S) / |S ∩ uncovered|` over the sets still allowed.
    fn lower_bound(&self) -> Option<f64> {
        let fresh: Vec<usize> = (0..self.sys.m())
            .map(|h| {
                if self.excluded[h] {
                    0
                } else {
                    self.sys.set(h).iter().filter(|&&e| self.cover_count[e] == 0).count()
                }
            })
            .collect();
        let mut total = 0.0;
        for &e in &self.uncovered {
            let price = self.sys.incidence(e)
                .iter()
                .filter(|&&h| !self.excluded[h])
                .map(|&h| self.sys.weight(h) / fresh[h] as f64)
                .min_by(f64::total_cmp)?;
            total += price;
        }
        Some(total)
    }

    fn add(&mut self, h: usize) {
        for &e in self.sys.set(h) {
            self.cover_count[e] += 1;
        }
        self.uncovered.retain(|&e| self.cover_count[e] == 0);
        self.chosen.push(h);
        self.cost += self.sys.weight(h);
    }

    fn remove(&mut self, h: usize) {
        for &e in self.sys.set(h) {
            self.cover_count[e] -= 1;
            if self.cover_count[e] == 0 {
                self.uncovered.push(e);
            }
        }
        self.uncovered.sort_unstable();
        self.chosen.pop();
        self.cost -= self.sys.weight(h);
    }

    fn explore(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            return Err(SncError::CapacityExceeded(format!("more than {} nodes", self.limits.max_nodes)));
        }
        if self.nodes.is_multiple_of(4096) && self.started.elapsed() > self.limits.max_time {
            return Err(SncError::CapacityExceeded(format!("exceeded {:?}", self.limits.max_time)));
        }
        if self.uncovered.is_empty() {
            if self.cost < self.best {
                self.best = self.cost;
                self.best_set = self.chosen.clone();
            }
            return Ok(());
        }
        let Some(lb) = self.lower_bound() else { return Ok(()) };
        if self.cost + lb >= self.best - weight_tolerance(self.best) {
            return Ok(());
        }
        // Branch on the uncovered element with the fewest allowed sets.
        let branch_on = *self
            .uncovered
            .iter()
            .min_by_key(|&&e| (self.sys.incidence(e).iter().filter(|&&h| !self.excluded[h]).count(), e))
            .expect("uncovered is non-empty");
        let mut candidates: Vec<usize> = self.sys.incidence(branch_on)
            .iter()
            .copied()
            .filter(|&h| !self.excluded[h])
            .collect();
        candidates.sort_by(|&a, &b| self.sys.weight(a).total_cmp(&self.sys.weight(b)).then(a.cmp(&b)));
        let mut newly_excluded = Vec::new();
        let mut outcome = Ok(());
        for h in candidates {
            self.add(h);
            outcome = self.explore();
            self.remove(h);
            if outcome.is_err() {
                break;
            }
            self.excluded[h] = true;
            newly_excluded.push(h);
        }
        for h in newly_excluded {
            self.excluded[h] = false;
        }
        outcome
    }
}

/// Minimum-weight cover by branch and bound, seeded with the greedy cover.
pub fn exact_opt(sys: &WeightedSetSystem, limits: SearchLimits) -> Result<ExactResult> {
    require_feasible(sys)?;
    let greedy = greedy_hdelta(sys)?;
    let mut search = Search {
        sys,
        limits,
        started: Instant::now(),
        nodes: 0,
        uncovered: (0..sys.n()).collect(),
        cover_count: vec![0; sys.n()],
        excluded: vec![false; sys.m()],
        chosen: Vec::new(),
        cost: 0.0,
        best: sys.total_weight(&greedy),
        best_set: greedy.into_vec(),
    };
    search.explore()?;
    let witness = SubCollection::from(search.best_set);
    Ok(ExactResult {
        opt_weight: sys.total_weight(&witness),
        witness,
        nodes_explored: search.nodes,
    })
}

/// Enumerates all `2^m` subcollections. Limited to `m <= 24`.
pub fn exhaustive_opt(sys: &WeightedSetSystem) -> Result<ExactResult> {
    require_feasible(sys)?;
    let m = sys.m();
    if m > 24 {
        return Err(SncError::CapacityExceeded(format!("exhaustive search over {m} sets")));
    }
    let words = sys.n().div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = (0..m)
        .map(|h| {
            let mut w = vec![0u64; words];
            for &e in sys.set(h) {
                w[e / 64] |= 1 << (e % 64);
            }
            w
        })
        .collect();
    let mut full = vec![0u64; words];
    for e in 0..sys.n() {
        full[e / 64] |= 1 << (e % 64);
    }
    let mut best: Option<(f64, u32)> = None;
    let mut acc = vec![0u64; words];
    for subset in 0u32..(1u32 << m) {
        acc.iter_mut().for_each(|w| *w = 0);
        let mut weight = 0.0;
        for h in (0..m).filter(|h| subset >> h & 1 == 1) {
            weight += sys.weight(h);
            for (a, b) in acc.iter_mut().zip(&masks[h]) {
                *a |= b;
            }
        }
        if acc == full && best.is_none_or(|(w, _)| weight < w) {
            best = Some((weight, subset));
        }
    }
    let (opt_weight, subset) = best.expect("feasible instance has a cover");
    Ok(ExactResult {
        opt_weight,
        witness: (0..m).filter(|h| subset >> h & 1 == 1).collect(),
        nodes_explored: 1u64 << m,
    })
}

/// Repeatedly takes the set with the lowest weight per newly covered element.
pub fn greedy_hdelta(sys: &WeightedSetSystem) -> Result<SubCollection> {
    require_feasible(sys)?;
    let mut covered = vec![false; sys.n()];
    let mut left = sys.n();
    let mut chosen = SubCollection::new();
    while left > 0 {
        let (h, _) = (0..sys.m())
            .filter(|&h| !chosen.contains(h))
            .filter_map(|h| {
                let fresh = sys.set(h).iter().filter(|&&e| !covered[e]).count();
                (fresh > 0).then(|| (h, sys.weight(h) / fresh as f64))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("feasible instance always has a useful set");
        chosen.insert(h);
        for &e in sys.set(h) {
            if !covered[e] {
                covered[e] = true;
                left -= 1;
            }
        }
    }
    Ok(chosen)
}

/// Sequential primal-dual: for each uncovered element in id order raise its
/// dual until a containing set goes tight, then take every tight set
/// containing it. Returns the cover and the duals.
pub fn sequential_primal_dual_with_duals(sys: &WeightedSetSystem) -> Result<(SubCollection, Vec<f64>)> {
    require_feasible(sys)?;
    let mut residual = sys.weights().to_vec();
    let mut y = vec![0.0; sys.n()];
    let mut covered = vec![false; sys.n()];
    let mut chosen = SubCollection::new();
    for e in 0..sys.n() {
        if covered[e] {
            continue;
        }
        let delta = sys.incidence(e)
            .iter()
            .map(|&h| residual[h])
            .min_by(f64::total_cmp)
            .expect("feasible")
            .max(0.0);
        y[e] += delta;
        for &h in sys.incidence(e) {
            residual[h] -= delta;
        }
        for &h in sys.incidence(e) {
            if residual[h] <= weight_tolerance(sys.weight(h)) && chosen.insert(h) {
                for &x in sys.set(h) {
                    covered[x] = true;
                }
            }
        }
    }
    Ok((chosen, y))
}

pub fn sequential_primal_dual(sys: &WeightedSetSystem) -> Result<SubCollection> {
    sequential_primal_dual_with_duals(sys).map(|(c, _)| c)
}
