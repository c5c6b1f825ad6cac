//! Weight bucketing around `β`, the cheap cover, and the full pipeline.

use serde::Serialize;

use crate::deletion::{delete_phase, DeletionOutcome};
use crate::error::{Result, SncError};
use crate::forward::{check_epsilon, forward_phase};
use crate::rng::KeyedRng;
use crate::snc::{layer_decomposition, LayerDecomposition, SncOracle};
use crate::system::{ElementSet, SubCollection, WeightedSetSystem};
use crate::trace::{forward_epoch_bound, Phase, RoundKind, RoundTrace, TraceRow};

/// `max_e min_{S ∋ e} w(S)`.
pub fn compute_beta(sys: &WeightedSetSystem) -> Result<f64> {
    let mut beta = 0.0f64;
    for e in 0..sys.n() {
        let cheapest = sys
            .incidence(e)
            .iter()
            .map(|&h| sys.weight(h))
            .min_by(f64::total_cmp)
            .ok_or_else(|| SncError::Infeasible(format!("element {e} lies in no set")))?;
        beta = beta.max(cheapest);
    }
    Ok(beta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    pub beta: f64,
    /// Weights below `β ε / n`.
    pub cheap: SubCollection,
    /// Weights in `[β ε / n, n β]`.
    pub core: SubCollection,
    /// Weights above `n β`; no optimal cover uses them.
    pub dropped: SubCollection,
}

pub fn partition_sets(sys: &WeightedSetSystem, epsilon: f64) -> Result<Partition> {
    let beta = compute_beta(sys)?;
    let n = sys.n().max(1) as f64;
    let low = beta * epsilon / n;
    let high = n * beta;
    let mut part = Partition {
        beta,
        cheap: SubCollection::new(),
        core: SubCollection::new(),
        dropped: SubCollection::new(),
    };
    for h in 0..sys.m() {
        let w = sys.weight(h);
        if w < low {
            part.cheap.insert(h);
        } else if w <= high {
            part.core.insert(h);
        } else {
            part.dropped.insert(h);
        }
    }
    Ok(part)
}

/// One set per element of `U(cheap)`, the lowest handle among those covering it.
pub fn cheap_cover(sys: &WeightedSetSystem, cheap: &SubCollection) -> Result<SubCollection> {
    let reach = sys.covered_elements(cheap)?;
    Ok(reach
        .iter()
        .map(|e| {
            sys.incidence(e)
                .iter()
                .copied()
                .find(|&h| cheap.contains(h))
                .expect("element of U(cheap) lies in a cheap set")
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveConfig {
    pub tau: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Run every shrink round of the budget instead of stopping early.
    pub full_budget: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tau: 1,
            epsilon: 0.1,
            seed: 0,
            full_budget: false,
        }
    }
}

/// The instance the core pipeline actually ran on.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduced {
    pub system: WeightedSetSystem,
    /// Reduced element id to original id.
    pub element_map: Vec<usize>,
    /// Reduced handle to original handle.
    pub handle_map: Vec<usize>,
    pub layers: LayerDecomposition,
    pub deletion: DeletionOutcome,
    /// Forward-phase cover, reduced handles.
    pub forward_cover: SubCollection,
    /// Duals on reduced elements.
    pub duals: Vec<f64>,
}

impl Reduced {
    /// Per-epoch round bound for this instance.
    pub fn epoch_bound(&self, epsilon: f64) -> f64 {
        let w = self.system.weights();
        let w_max = w.iter().copied().fold(0.0, f64::max);
        let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
        forward_epoch_bound(self.system.n(), w_max, w_min, epsilon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub cover: SubCollection,
    pub weight: f64,
    pub b1: SubCollection,
    pub b2: SubCollection,
    pub partition: Partition,
    /// Duals indexed by original element; zero outside the reduced instance.
    pub duals: Vec<f64>,
    /// Elements of every `F^k`, original ids.
    pub targets: ElementSet,
    /// Max multiplicity of `cover` over `targets`.
    pub target_multiplicity: usize,
    pub trace: RoundTrace,
    pub config: SolveConfig,
    pub reduced: Reduced,
}

#[derive(Serialize)]
struct SolutionExport<'a> {
    cover: &'a SubCollection,
    weight: f64,
    trace: &'a RoundTrace,
    params: Params,
}

#[derive(Serialize)]
struct Params {
    tau: usize,
    epsilon: f64,
    seed: u64,
    full_budget: bool,
}

impl Solution {
    pub fn to_json(&self) -> String {
        let export = SolutionExport {
            cover: &self.cover,
            weight: self.weight,
            trace: &self.trace,
            params: Params {
                tau: self.config.tau,
                epsilon: self.config.epsilon,
                seed: self.config.seed,
                full_budget: self.config.full_budget,
            },
        };
        serde_json::to_string_pretty(&export).expect("solution serializes")
    }

    pub fn dual_objective(&self) -> f64 {
        self.duals.iter().sum()
    }
}

/// Buckets the sets, covers the cheap part directly, and runs decomposition,
/// forward phase and deletion phase on the rest.
pub fn solve(sys: &WeightedSetSystem, oracle: &SncOracle, config: SolveConfig) -> Result<Solution> {
    check_epsilon(config.epsilon)?;
    if config.tau == 0 {
        return Err(SncError::Config("tau must be at least 1".into()));
    }
    let partition = partition_sets(sys, config.epsilon)?;
    let b1 = cheap_cover(sys, &partition.cheap)?;
    let mut rest = sys.all_elements();
    rest.difference_with(&sys.covered_elements(&partition.cheap)?);
    let (reduced, element_map, handle_map) = sys.restrict(&rest, &partition.core)?;
    if let Some(e) = (0..reduced.n()).find(|&e| reduced.incidence(e).is_empty()) {
        return Err(SncError::Internal(format!(
            "element {} is covered only by dropped sets",
            element_map[e]
        )));
    }
    let local_oracle = oracle.restrict(&element_map, &handle_map);

    let mut trace = RoundTrace::default();
    let layers = layer_decomposition(&reduced, config.tau, &local_oracle).map_err(|err| match err {
        SncError::NotSnc { tau, residual } => SncError::NotSnc {
            tau,
            residual: residual.into_iter().map(|e| element_map[e]).collect(),
        },
        other => other,
    })?;
    trace.decomposition_rounds = layers.rounds;
    for (k, z) in layers.layers.iter().enumerate() {
        trace.rows.push(TraceRow {
            phase: Phase::Decompose,
            layer: k + 1,
            round_type: RoundKind::Strip,
            round: 1,
            alpha: None,
            picked_count: Some(z.len()),
            covered_count: None,
            active_count: None,
            deleted_count: None,
            max_multiplicity_fk: None,
        });
    }
    trace.machine_estimate = reduced.n() as f64 * (reduced.m() as f64).powi(config.tau as i32);

    let forward = forward_phase(&reduced, &layers, config.epsilon, &mut trace)?;
    let rng = KeyedRng::new(config.seed);
    let deletion = delete_phase(&reduced, &forward.epochs, &layers, config.tau, &rng, config.full_budget, &mut trace)?;

    let b2: SubCollection = deletion.cover.iter().map(|h| handle_map[h]).collect();
    let cover = b1.union(&b2);
    let weight = sys.total_weight(&cover);
    if sys.covered_elements(&cover)?.len() != sys.n() {
        return Err(SncError::Internal("assembled solution misses elements".into()));
    }
    let mut duals = vec![0.0; sys.n()];
    for (i, &e) in element_map.iter().enumerate() {
        duals[e] = forward.state.y[i];
    }
    let targets = ElementSet::from_elements(
        sys.n(),
        forward.epochs.iter().flat_map(|ep| ep.uncovered_at_start.iter()).map(|e| element_map[e]),
    );
    let target_multiplicity = deletion.max_target_multiplicity(&reduced);
    Ok(Solution {
        cover,
        weight,
        b1,
        b2,
        partition,
        duals,
        targets,
        target_multiplicity,
        trace,
        config,
        reduced: Reduced {
            system: reduced,
            element_map,
            handle_map,
            layers,
            deletion,
            forward_cover: forward.cover,
            duals: forward.state.y,
        },
    })
}
