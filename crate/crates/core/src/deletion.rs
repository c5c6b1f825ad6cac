//! Reverse pass over the layers: independent elements, base-group assembly,
//! and randomized shrinking until each forward-phase element is covered by at
//! most `tau` sets.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SncError};
use crate::forward::EpochResult;
use crate::mis::{luby_mis, AuxGraph};
use crate::oracles::max_multiplicity;
use crate::rng::{Domain, KeyedRng};
use crate::snc::{find_base_group, BaseGroup, LayerDecomposition};
use crate::system::{ElementSet, SubCollection, WeightedSetSystem};
use crate::trace::{shrink_budget, Phase, RoundKind, RoundTrace, TraceRow};

/// State of the shrink loop for one layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeletionRoundState {
    pub b: SubCollection,
    pub independent: ElementSet,
    /// `Q(e)` from the latest round, sorted by element.
    pub kept: Vec<(usize, SubCollection)>,
    pub budget: usize,
}

/// Elements of layers `>= k` covered by some `C_j` with `j >= k` and lying in
/// layer `j` or later.
pub fn q_set(sys: &WeightedSetSystem, covers: &[SubCollection], layers: &LayerDecomposition, k: usize) -> Result<ElementSet> {
    let mut q = ElementSet::new(sys.n());
    for j in k..=layers.depth() {
        let mut part = sys.covered_elements(&covers[j - 1])?;
        part.intersect_with(&layers.from_layer(j));
        q.union_with(&part);
    }
    Ok(q)
}

/// Layer-by-layer maximal independent sets in the neighbor graph of `b`.
/// Layer `j` contributes its covered elements that have no `b`-neighbor among
/// the elements chosen from layers `k..j`. Returns `I` and the Luby rounds of
/// each layer.
pub fn select_independent(
    sys: &WeightedSetSystem,
    b: &SubCollection,
    layers: &LayerDecomposition,
    k: usize,
    rng: &KeyedRng,
) -> Result<(ElementSet, Vec<usize>)> {
    let covered = sys.covered_elements(b)?;
    let mut independent = ElementSet::new(sys.n());
    // Elements that share a set of `b` with something already in `I`.
    let mut blocked = ElementSet::new(sys.n());
    let mut rounds = Vec::new();
    for j in k..=layers.depth() {
        let mut vertices = layers.layer(j).intersection(&covered);
        vertices.difference_with(&blocked);
        let graph = AuxGraph::neighbor_graph(sys, b, &vertices);
        let (chosen, r) = luby_mis(&graph, rng, (k as u64, j as u64));
        rounds.push(r);
        for e in chosen {
            independent.insert(e);
            for h in sys.covering_sets_unchecked(b, e).iter() {
                for &x in sys.set(h) {
                    blocked.insert(x);
                }
            }
        }
    }
    Ok((independent, rounds))
}

/// Base groups of the independent elements and their union.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assembly {
    pub collection: SubCollection,
    pub groups: Vec<BaseGroup>,
    /// Elements whose base group had to be restricted to their own layer and later.
    pub fallbacks: usize,
}

/// For each `e` in `independent` finds a base group restricted to
/// `(layers >= k, N_b(e))`. An element from a later layer `j` need not be
/// collapsible there, so the search retries with `(layers >= j, N_b(e))`,
/// which still reaches every element the coverage argument relies on.
pub fn assemble_base_groups(
    sys: &WeightedSetSystem,
    b: &SubCollection,
    independent: &ElementSet,
    layers: &LayerDecomposition,
    k: usize,
    tau: usize,
) -> Result<Assembly> {
    let ground = layers.from_layer(k);
    let members = independent.to_vec();
    let found: Vec<Result<(BaseGroup, bool)>> = members
        .par_iter()
        .map(|&e| {
            if let Some(g) = find_base_group(sys, e, &ground, b, tau)? {
                return Ok((g, false));
            }
            let own = layers.level(e).ok_or_else(|| {
                SncError::Internal(format!("independent element {e} has no layer"))
            })?;
            match find_base_group(sys, e, &layers.from_layer(own), b, tau)? {
                Some(g) => Ok((g, true)),
                None => Err(SncError::NotSnc { tau, residual: vec![e] }),
            }
        })
        .collect();
    let mut collection = SubCollection::new();
    let mut groups = Vec::with_capacity(members.len());
    let mut fallbacks = 0;
    for item in found {
        let (g, fell_back) = item?;
        fallbacks += usize::from(fell_back);
        collection = collection.union(&g.sets);
        groups.push(g);
    }
    Ok(Assembly { collection, groups, fallbacks })
}

/// Draws `Q(e)` for every independent element: on heads one uniformly chosen
/// set of `N_b(e)` is left out. Draws are keyed by `(k, round, e)`.
pub fn draw_kept(
    sys: &WeightedSetSystem,
    b: &SubCollection,
    independent: &ElementSet,
    k: usize,
    round: usize,
    rng: &KeyedRng,
) -> Vec<(usize, SubCollection)> {
    independent
        .to_vec()
        .into_par_iter()
        .map(|e| {
            let mut near = sys.covering_sets_unchecked(b, e);
            let mut stream = rng.stream(Domain::ShrinkCoin, k as u64, round as u64, e as u64);
            if stream.gen_bool(0.5) && !near.is_empty() {
                let drop = near.handles()[stream.gen_range(0..near.len())];
                near.remove(drop);
            }
            (e, near)
        })
        .collect()
}

/// Sets outside `∪Q(e)` whose elements in `ground` are all covered by `∪Q(e)`.
pub fn removable_sets(
    sys: &WeightedSetSystem,
    b: &SubCollection,
    kept: &[(usize, SubCollection)],
    ground: &ElementSet,
) -> Result<SubCollection> {
    let kept_union: SubCollection = kept.iter().flat_map(|(_, q)| q.iter()).collect();
    let reach = sys.covered_elements(&kept_union)?;
    let removable: Vec<usize> = b
        .handles()
        .par_iter()
        .copied()
        .filter(|&h| !kept_union.contains(h))
        .filter(|&h| sys.set(h).iter().all(|&x| !ground.contains(x) || reach.contains(x)))
        .collect();
    Ok(SubCollection::from(removable))
}

/// One synchronous shrink round. Returns the next state and the deleted sets.
pub fn shrink_round(
    sys: &WeightedSetSystem,
    state: &DeletionRoundState,
    layers: &LayerDecomposition,
    k: usize,
    round: usize,
    rng: &KeyedRng,
) -> Result<(DeletionRoundState, SubCollection)> {
    let kept = draw_kept(sys, &state.b, &state.independent, k, round, rng);
    let deleted = removable_sets(sys, &state.b, &kept, &layers.from_layer(k))?;
    let next = DeletionRoundState {
        b: state.b.difference(&deleted),
        independent: state.independent.clone(),
        kept,
        budget: state.budget.saturating_sub(1),
    };
    Ok((next, deleted))
}

/// What happened while processing one layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerReport {
    pub k: usize,
    /// `F^k`.
    pub targets: ElementSet,
    /// `B_k` before assembly: the previous output plus `C_k`.
    pub initial: SubCollection,
    pub independent: ElementSet,
    pub assembled: SubCollection,
    pub fallbacks: usize,
    /// Max multiplicity over `F^k` right after assembly.
    pub assembled_multiplicity: usize,
    pub mis_rounds: usize,
    pub shrink_rounds: usize,
    pub output: SubCollection,
    /// Max multiplicity over `F^k` at the end of the layer.
    pub final_multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeletionOutcome {
    pub cover: SubCollection,
    /// Indexed by `k - 1`.
    pub layers: Vec<LayerReport>,
}

impl DeletionOutcome {
    /// Max multiplicity of the final cover over every `F^k`.
    pub fn max_target_multiplicity(&self, sys: &WeightedSetSystem) -> usize {
        self.layers
            .iter()
            .map(|r| max_multiplicity(sys, &self.cover, &r.targets))
            .max()
            .unwrap_or(0)
    }

    pub fn fallbacks(&self) -> usize {
        self.layers.iter().map(|r| r.fallbacks).sum()
    }
}

/// Processes layers `L..1`. With `full_budget` false a layer stops shrinking
/// as soon as every element of `F^k` has multiplicity at most `tau`.
pub fn delete_phase(
    sys: &WeightedSetSystem,
    epochs: &[EpochResult],
    layers: &LayerDecomposition,
    tau: usize,
    rng: &KeyedRng,
    full_budget: bool,
    trace: &mut RoundTrace,
) -> Result<DeletionOutcome> {
    let depth = layers.depth();
    if epochs.len() != depth {
        return Err(SncError::Precondition(format!("{} epochs for {depth} layers", epochs.len())));
    }
    let covers: Vec<SubCollection> = epochs.iter().map(|ep| ep.picked.clone()).collect();
    let budget = shrink_budget(tau, sys.n());
    trace.shrink_budget = budget;
    trace.mis_rounds = vec![0; depth];
    trace.shrink_rounds = vec![0; depth];
    let mut reports = Vec::with_capacity(depth);
    let mut output = SubCollection::new();
    for k in (1..=depth).rev() {
        let targets = &epochs[k - 1].uncovered_at_start;
        let initial = output.union(&covers[k - 1]);
        let (independent, per_layer) = select_independent(sys, &initial, layers, k, rng)?;
        let mis_rounds: usize = per_layer.iter().sum();
        for r in 1..=mis_rounds {
            trace.rows.push(row(k, RoundKind::Mis, r, None, None));
        }
        let assembly = assemble_base_groups(sys, &initial, &independent, layers, k, tau)?;
        let must_cover = q_set(sys, &covers, layers, k)?;
        if !must_cover.is_subset(&sys.covered_elements(&assembly.collection)?) {
            return Err(SncError::Internal(format!("base groups of layer {k} lost coverage")));
        }
        let assembled_multiplicity = max_multiplicity(sys, &assembly.collection, targets);
        let mut state = DeletionRoundState {
            b: assembly.collection.clone(),
            independent: independent.clone(),
            kept: Vec::new(),
            budget,
        };
        let mut multiplicity = assembled_multiplicity;
        let mut rounds = 0;
        while state.budget > 0 && (full_budget || multiplicity > tau) {
            rounds += 1;
            let (next, deleted) = shrink_round(sys, &state, layers, k, rounds, rng)?;
            state = next;
            multiplicity = max_multiplicity(sys, &state.b, targets);
            trace.rows.push(row(k, RoundKind::Shrink, rounds, Some(deleted.len()), Some(multiplicity)));
        }
        if cfg!(debug_assertions) && !must_cover.is_subset(&sys.covered_elements(&state.b)?) {
            return Err(SncError::Internal(format!("shrinking layer {k} lost coverage")));
        }
        trace.mis_rounds[k - 1] = mis_rounds;
        trace.shrink_rounds[k - 1] = rounds;
        output = state.b;
        reports.push(LayerReport {
            k,
            targets: targets.clone(),
            initial,
            independent,
            assembled: assembly.collection,
            fallbacks: assembly.fallbacks,
            assembled_multiplicity,
            mis_rounds,
            shrink_rounds: rounds,
            output: output.clone(),
            final_multiplicity: multiplicity,
        });
    }
    reports.reverse();
    Ok(DeletionOutcome { cover: output, layers: reports })
}

fn row(k: usize, kind: RoundKind, round: usize, deleted: Option<usize>, mult: Option<usize>) -> TraceRow {
    TraceRow {
        phase: Phase::Delete,
        layer: k,
        round_type: kind,
        round,
        alpha: None,
        picked_count: None,
        covered_count: None,
        active_count: None,
        deleted_count: deleted,
        max_multiplicity_fk: mult,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_phase;
    use crate::instance::{fig1_fixture, gen_interval, WeightLaw};
    use crate::oracles::verify_cover;
    use crate::snc::{layer_decomposition, SncOracle};

    fn pipeline(
        sys: &WeightedSetSystem,
        tau: usize,
        oracle: &SncOracle,
        seed: u64,
    ) -> (LayerDecomposition, Vec<EpochResult>, DeletionOutcome) {
        let layers = layer_decomposition(sys, tau, oracle).unwrap();
        let mut trace = RoundTrace::default();
        let fwd = forward_phase(sys, &layers, 0.1, &mut trace).unwrap();
        let out = delete_phase(sys, &fwd.epochs, &layers, tau, &KeyedRng::new(seed), false, &mut trace).unwrap();
        (layers, fwd.epochs, out)
    }

    /// A small instance where the middle element `e` lies in three sets and
    /// `I = {a, b}` sits on either side.
    fn crafted() -> (WeightedSetSystem, LayerDecomposition, DeletionRoundState) {
        let sys = WeightedSetSystem::new(3, vec![vec![0, 1], vec![0, 1], vec![1, 2]], vec![1.0; 3]).unwrap();
        let layers = LayerDecomposition::from_layers(3, 2, vec![ElementSet::full(3)]);
        let state = DeletionRoundState {
            b: SubCollection::all(3),
            independent: ElementSet::from_elements(3, [0, 2]),
            kept: Vec::new(),
            budget: 10,
        };
        (sys, layers, state)
    }

    #[test]
    fn all_tails_deletes_nothing() {
        let (sys, _, state) = crafted();
        let kept = vec![(0, SubCollection::from(vec![0, 1])), (2, SubCollection::from(vec![2]))];
        assert!(removable_sets(&sys, &state.b, &kept, &ElementSet::full(3)).unwrap().is_empty());
    }

    #[test]
    fn dropped_set_survives_unless_covered_elsewhere() {
        let (sys, _, state) = crafted();
        // b loses its only set: element 2 is then uncovered by the kept union.
        let kept = vec![(0, SubCollection::from(vec![0, 1])), (2, SubCollection::new())];
        assert!(removable_sets(&sys, &state.b, &kept, &ElementSet::full(3)).unwrap().is_empty());
        // a drops set 1, whose elements set 0 still covers.
        let kept = vec![(0, SubCollection::from(vec![0])), (2, SubCollection::from(vec![2]))];
        assert_eq!(
            removable_sets(&sys, &state.b, &kept, &ElementSet::full(3)).unwrap(),
            SubCollection::from(vec![1])
        );
    }

    #[test]
    fn shrink_round_is_keyed() {
        let (sys, layers, state) = crafted();
        let rng = KeyedRng::new(5);
        let a = shrink_round(&sys, &state, &layers, 1, 1, &rng).unwrap();
        let b = shrink_round(&sys, &state, &layers, 1, 1, &rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.budget, 9);
        assert!(verify_cover(&sys, &a.0.b));
    }

    #[test]
    fn deletion_incident_frequency() {
        let (sys, layers, state) = crafted();
        let rng = KeyedRng::new(11);
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|&r| {
                let (_, deleted) = shrink_round(&sys, &state, &layers, 1, r, &rng).unwrap();
                let hit = deleted.iter().any(|h| sys.contains(h, 1));
                hit
            })
            .count();
        let p = hits as f64 / trials as f64;
        // Only a heads for `a` can delete a set through `e`: exactly 1/2.
        assert!((p - 0.5).abs() < 4.0 * (0.25f64 / trials as f64).sqrt(), "{p}");
    }

    #[test]
    fn last_layer_independent_set_is_mis() {
        let sys = fig1_fixture().system;
        let layers = layer_decomposition(&sys, 1, &SncOracle::exact()).unwrap();
        let l = layers.depth();
        let b = SubCollection::all(sys.m());
        let (i, rounds) = select_independent(&sys, &b, &layers, l, &KeyedRng::new(3)).unwrap();
        assert_eq!(rounds.len(), 1);
        let covered = sys.covered_elements(&b).unwrap();
        let g = AuxGraph::neighbor_graph(&sys, &b, &layers.layer(l).intersection(&covered));
        assert!(g.is_maximal_independent(&i.to_vec()));
    }

    #[test]
    fn own_layer_base_group_when_wider_one_is_missing() {
        // Hand-made layering {0, 1} / {2, 3}. If I = {0, 2}, element 2 sees
        // {1, 2, 3} through sets 1 and 2, which no single set covers, while
        // its own-layer view {2, 3} is covered by set 2.
        let sys = WeightedSetSystem::new(4, vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![1.0; 3]).unwrap();
        let layers = LayerDecomposition::from_layers(
            4,
            1,
            vec![ElementSet::from_elements(4, [0, 1]), ElementSet::from_elements(4, [2, 3])],
        );
        let b = SubCollection::all(3);
        let target = ElementSet::from_elements(4, [0, 2]);
        let seed = (0..200)
            .find(|&s| select_independent(&sys, &b, &layers, 1, &KeyedRng::new(s)).unwrap().0 == target)
            .expect("some seed picks 0 and 2");
        let (i, _) = select_independent(&sys, &b, &layers, 1, &KeyedRng::new(seed)).unwrap();
        let a = assemble_base_groups(&sys, &b, &i, &layers, 1, 1).unwrap();
        assert_eq!(a.fallbacks, 1);
        assert_eq!(a.collection, SubCollection::from(vec![0, 2]));
        assert!(verify_cover(&sys, &a.collection));
    }

    #[test]
    fn q_set_of_last_layer() {
        let sys = WeightedSetSystem::new(3, vec![vec![0, 1], vec![2]], vec![1.0; 2]).unwrap();
        let layers = LayerDecomposition::from_layers(
            3,
            1,
            vec![ElementSet::from_elements(3, [0]), ElementSet::from_elements(3, [1, 2])],
        );
        let covers = vec![SubCollection::from(vec![0]), SubCollection::from(vec![1])];
        assert_eq!(q_set(&sys, &covers, &layers, 2).unwrap().to_vec(), vec![2]);
        assert_eq!(q_set(&sys, &covers, &layers, 1).unwrap().to_vec(), vec![0, 1, 2]);
    }

    fn check_layer_invariants(sys: &WeightedSetSystem, layers: &LayerDecomposition, covers: &[SubCollection], r: &LayerReport, tau: usize) {
        let b = &r.initial;
        let members = r.independent.to_vec();
        // Independence in the pre-assembly collection and disjoint neighborhoods after.
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                assert!(!sys.are_neighbors(b, u, v).unwrap());
                let nu = sys.covering_sets(&r.assembled, u).unwrap();
                let nv = sys.covering_sets(&r.assembled, v).unwrap();
                assert!(nu.intersection(&nv).is_empty());
            }
        }
        for &e in &members {
            assert!(sys.covering_sets(&r.assembled, e).unwrap().len() <= tau);
        }
        let q = q_set(sys, covers, layers, r.k).unwrap();
        for e in q.iter() {
            assert!(r.independent.contains(e) || members.iter().any(|&u| sys.are_neighbors(b, u, e).unwrap()));
        }
        assert!(q.is_subset(&sys.covered_elements(&r.assembled).unwrap()));
        assert!(q.is_subset(&sys.covered_elements(&r.output).unwrap()));
        for e in r.targets.iter().filter(|&e| !r.independent.contains(e)) {
            let near = members.iter().filter(|&&u| sys.are_neighbors(&r.assembled, u, e).unwrap()).count();
            assert!(near <= tau);
        }
        assert!(r.assembled_multiplicity <= tau * tau);
        assert!(r.output.is_subset(&r.assembled));
    }

    #[test]
    fn invariants_on_random_intervals() {
        for seed in 0..40 {
            let normalized = seed % 2 == 0;
            let inst = gen_interval(20, 24, WeightLaw::Uniform, normalized, seed).unwrap();
            let sys = &inst.system;
            let geometry = inst.geometry.clone().unwrap();
            let oracle = SncOracle::interval(sys, geometry).unwrap();
            let tau = if normalized { 1 } else { 2 };
            let Ok(layers) = layer_decomposition(sys, tau, &oracle) else { continue };
            let mut trace = RoundTrace::default();
            let fwd = forward_phase(sys, &layers, 0.1, &mut trace).unwrap();
            let out = delete_phase(sys, &fwd.epochs, &layers, tau, &KeyedRng::new(seed), false, &mut trace).unwrap();
            let covers: Vec<SubCollection> = fwd.epochs.iter().map(|e| e.picked.clone()).collect();
            assert!(verify_cover(sys, &out.cover));
            assert!(out.cover.is_subset(&fwd.cover));
            assert!(sys.total_weight(&out.cover) <= sys.total_weight(&fwd.cover));
            for r in &out.layers {
                check_layer_invariants(sys, &layers, &covers, r, tau);
                assert!(r.shrink_rounds <= trace.shrink_budget);
            }
            assert_eq!(trace.mis_rounds.len(), layers.depth());
        }
    }

    #[test]
    fn fig1_tau1_multiplicity_one() {
        let sys = fig1_fixture().system;
        for seed in 0..50 {
            let (_, _, out) = pipeline(&sys, 1, &SncOracle::exact(), seed);
            assert!(verify_cover(&sys, &out.cover));
            assert!(out.max_target_multiplicity(&sys) <= 1, "seed {seed}");
        }
    }

    #[test]
    fn already_slack_cover_only_loses_sets() {
        // Disjoint sets: every element is in one set, nothing to shrink.
        let sys = WeightedSetSystem::new(4, vec![vec![0, 1], vec![2], vec![3]], vec![1.0, 2.0, 3.0]).unwrap();
        let (_, epochs, out) = pipeline(&sys, 1, &SncOracle::exact(), 0);
        let union = epochs.iter().fold(SubCollection::new(), |acc, e| acc.union(&e.picked));
        assert!(out.cover.is_subset(&union));
        assert_eq!(out.cover, SubCollection::all(3));
        assert!(out.layers.iter().all(|r| r.shrink_rounds == 0));
    }

    #[test]
    fn same_output_for_any_thread_count() {
        let inst = gen_interval(40, 50, WeightLaw::PowerLaw, false, 77).unwrap();
        let sys = &inst.system;
        let oracle = SncOracle::interval(sys, inst.geometry.clone().unwrap()).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| pipeline(sys, 2, &oracle, 9).2)
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(3));
    }
}
