//! Layered primal-dual growth of the dual variables.
//!
//! Epoch `k` raises `y(e)` for every uncovered element of layer `k` by a
//! geometric schedule (`q_k`, then `q_k eps (1+eps)^{t-1}`), picks every set
//! whose residual weight has dropped to at most `eps w(S)`, and repeats until
//! the layer is covered. Picks, freezes and removals of a round are computed
//! from the round-start state and applied together.

use serde::Serialize;

use crate::error::{Result, SncError};
use crate::snc::LayerDecomposition;
use crate::system::{weight_tolerance, ElementSet, SubCollection, WeightedSetSystem};
use crate::trace::{forward_epoch_bound, Phase, RoundKind, RoundTrace, TraceRow};

/// Dual variables and residual weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualState {
    /// `y(e)`.
    pub y: Vec<f64>,
    /// `w'(S) = w(S) - Σ_{e∈S} y(e)`.
    pub w_res: Vec<f64>,
    /// Covered elements; their duals no longer change.
    pub frozen: Vec<bool>,
    /// Sets not yet picked.
    pub alive: Vec<bool>,
}

impl DualState {
    pub fn new(sys: &WeightedSetSystem) -> Self {
        DualState {
            y: vec![0.0; sys.n()],
            w_res: sys.weights().to_vec(),
            frozen: vec![false; sys.n()],
            alive: vec![true; sys.m()],
        }
    }

    pub fn uncovered(&self) -> ElementSet {
        ElementSet::from_elements(self.y.len(), (0..self.y.len()).filter(|&e| !self.frozen[e]))
    }

    pub fn dual_objective(&self) -> f64 {
        self.y.iter().sum()
    }

    /// `Σ_{e∈S} y(e)`.
    pub fn load(&self, sys: &WeightedSetSystem, h: usize) -> f64 {
        sys.set(h).iter().map(|&e| self.y[e]).sum()
    }

    /// Largest gap between the maintained residuals and a recomputation from `y`.
    pub fn residual_drift(&self, sys: &WeightedSetSystem) -> f64 {
        (0..sys.m())
            .map(|h| (sys.weight(h) - self.load(sys, h) - self.w_res[h]).abs() / sys.weight(h).max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Output of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochResult {
    pub k: usize,
    /// `C_k`.
    pub picked: SubCollection,
    /// `F^k`: layer-k elements still uncovered when the epoch started.
    pub uncovered_at_start: ElementSet,
    /// `T_k`.
    pub rounds: usize,
    pub q: f64,
    /// Raise applied in each round.
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardOutcome {
    /// `A = ∪ C_k`.
    pub cover: SubCollection,
    pub epochs: Vec<EpochResult>,
    pub state: DualState,
    /// `(epoch, round)` in which each set was picked.
    pub picked_at: Vec<Option<(usize, usize)>>,
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(SncError::Config(format!("epsilon must lie in (0, 1/2), got {epsilon}")))
    }
}

/// `q = min w'(S) / |S ∩ targets|` over surviving sets meeting `targets`.
pub fn compute_q(sys: &WeightedSetSystem, state: &DualState, targets: &ElementSet) -> Result<f64> {
    (0..sys.m())
        .filter(|&h| state.alive[h])
        .filter_map(|h| {
            let count = sys.count_in(h, targets);
            (count > 0).then(|| state.w_res[h] / count as f64)
        })
        .min_by(f64::total_cmp)
        .ok_or_else(|| SncError::Infeasible("no surviving set meets the active elements".into()))
}

/// Positive weights only, or all weights zero.
fn weight_range(sys: &WeightedSetSystem) -> Result<(f64, f64)> {
    let w_max = sys.weights().iter().copied().fold(0.0, f64::max);
    let w_min = sys.weights().iter().copied().fold(f64::INFINITY, f64::min);
    if sys.weights().iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(SncError::Config("weights must be finite and non-negative".into()));
    }
    if w_min == 0.0 && w_max > 0.0 {
        return Err(SncError::Config(
            "forward phase needs all weights positive or all zero; bucket zero-weight sets first".into(),
        ));
    }
    Ok((w_max, if w_min.is_finite() { w_min } else { 0.0 }))
}

pub fn run_epoch(
    sys: &WeightedSetSystem,
    layers: &LayerDecomposition,
    k: usize,
    epsilon: f64,
    state: &mut DualState,
    picked_at: &mut [Option<(usize, usize)>],
    trace: &mut RoundTrace,
) -> Result<EpochResult> {
    check_epsilon(epsilon)?;
    let (w_max, w_min) = weight_range(sys)?;
    let layer = layers.layer(k);
    let mut active = state.uncovered();
    active.intersect_with(layer);
    let uncovered_at_start = active.clone();
    let mut result = EpochResult {
        k,
        picked: SubCollection::new(),
        uncovered_at_start,
        rounds: 0,
        q: 0.0,
        alphas: Vec::new(),
    };
    if active.is_empty() {
        return Ok(result);
    }
    let q = compute_q(sys, state, &active)?;
    result.q = q;
    let bound = if w_max == 0.0 { 1.0 } else { forward_epoch_bound(sys.n(), w_max, w_min, epsilon) };
    let valve = (10.0 * bound).ceil() as usize + 10;

    let mut alpha = q;
    let mut t = 1;
    while !active.is_empty() {
        if t > valve {
            return Err(SncError::Internal(format!(
                "epoch {k} exceeded {valve} rounds (per-epoch bound {bound:.1})"
            )));
        }
        let active_count = active.len();
        for e in active.iter() {
            state.y[e] += alpha;
        }
        for h in 0..sys.m() {
            if state.alive[h] {
                let c = sys.count_in(h, &active);
                if c > 0 {
                    state.w_res[h] -= alpha * c as f64;
                }
            }
        }
        if cfg!(debug_assertions) {
            let drift = state.residual_drift(sys);
            if drift > 1e-9 {
                return Err(SncError::Internal(format!("residual drift {drift:e} in epoch {k} round {t}")));
            }
        }
        let picks: Vec<usize> = (0..sys.m())
            .filter(|&h| state.alive[h])
            .filter(|&h| state.w_res[h] <= epsilon * sys.weight(h) + weight_tolerance(sys.weight(h)))
            .collect();
        let mut newly_covered = ElementSet::new(sys.n());
        for &h in &picks {
            if state.w_res[h] < -weight_tolerance(sys.weight(h)) {
                return Err(SncError::Internal(format!(
                    "set {h} overshot to residual {} at pick time (epoch {k} round {t})",
                    state.w_res[h]
                )));
            }
            state.alive[h] = false;
            picked_at[h] = Some((k, t));
            result.picked.insert(h);
            for &e in sys.set(h) {
                if !state.frozen[e] {
                    newly_covered.insert(e);
                }
            }
        }
        for e in newly_covered.iter() {
            state.frozen[e] = true;
        }
        active.difference_with(&newly_covered);
        result.alphas.push(alpha);
        trace.rows.push(TraceRow {
            phase: Phase::Forward,
            layer: k,
            round_type: RoundKind::Grow,
            round: t,
            alpha: Some(alpha),
            picked_count: Some(picks.len()),
            covered_count: Some(newly_covered.len()),
            active_count: Some(active_count),
            deleted_count: None,
            max_multiplicity_fk: None,
        });
        alpha = q * epsilon * (1.0 + epsilon).powi(t as i32 - 1);
        t += 1;
    }
    result.rounds = t - 1;
    Ok(result)
}

/// Runs the epochs `k = 1..L`; the returned cover contains every layered element.
pub fn forward_phase(
    sys: &WeightedSetSystem,
    layers: &LayerDecomposition,
    epsilon: f64,
    trace: &mut RoundTrace,
) -> Result<ForwardOutcome> {
    check_epsilon(epsilon)?;
    weight_range(sys)?;
    let mut state = DualState::new(sys);
    let mut picked_at = vec![None; sys.m()];
    // Elements outside the decomposition are never targeted; they count as covered.
    let layered = layers.from_layer(1);
    for e in 0..sys.n() {
        if !layered.contains(e) {
            state.frozen[e] = true;
        }
    }
    let mut epochs = Vec::with_capacity(layers.depth());
    let mut cover = SubCollection::new();
    for k in 1..=layers.depth() {
        let epoch = run_epoch(sys, layers, k, epsilon, &mut state, &mut picked_at, trace)?;
        trace.forward_rounds.push(epoch.rounds);
        cover = cover.union(&epoch.picked);
        epochs.push(epoch);
    }
    if !layered.is_subset(&sys.covered_elements(&cover)?) {
        return Err(SncError::Internal("forward phase ended with uncovered elements".into()));
    }
    Ok(ForwardOutcome {
        cover,
        epochs,
        state,
        picked_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{fig1_fixture, gen_interval, WeightLaw};
    use crate::snc::{layer_decomposition, SncOracle};

    fn one_layer(n: usize) -> LayerDecomposition {
        LayerDecomposition::from_layers(n, 1, vec![ElementSet::full(n)])
    }

    #[test]
    fn q_examples() {
        let sys = WeightedSetSystem::new(2, vec![vec![0, 1]], vec![1.0]).unwrap();
        let st = DualState::new(&sys);
        assert_eq!(compute_q(&sys, &st, &ElementSet::full(2)).unwrap(), 0.5);

        let sys = WeightedSetSystem::new(3, vec![vec![0], vec![0, 1], vec![2]], vec![3.0, 4.0, 0.1]).unwrap();
        let st = DualState::new(&sys);
        let targets = ElementSet::from_elements(3, [0, 1]);
        // {c} with weight 0.1 does not meet the targets.
        assert_eq!(compute_q(&sys, &st, &targets).unwrap(), 2.0);
        assert!(compute_q(&sys, &st, &ElementSet::new(3)).is_err());
    }

    #[test]
    fn single_set_single_round() {
        let sys = WeightedSetSystem::new(2, vec![vec![0, 1]], vec![1.0]).unwrap();
        let mut trace = RoundTrace::default();
        let out = forward_phase(&sys, &one_layer(2), 0.1, &mut trace).unwrap();
        assert_eq!(out.epochs[0].rounds, 1);
        assert_eq!(out.epochs[0].alphas, vec![0.5]);
        assert_eq!(out.state.y, vec![0.5, 0.5]);
        assert_eq!(out.state.w_res[0], 0.0);
        assert_eq!(out.cover, SubCollection::from(vec![0]));
        assert_eq!(trace.forward_rounds, vec![1]);
    }

    #[test]
    fn covered_layer_has_empty_epoch() {
        // Layer 2 is covered by the set picked in epoch 1.
        let sys = WeightedSetSystem::new(2, vec![vec![0, 1]], vec![1.0]).unwrap();
        let layers = LayerDecomposition::from_layers(
            2,
            1,
            vec![ElementSet::from_elements(2, [0]), ElementSet::from_elements(2, [1])],
        );
        let mut trace = RoundTrace::default();
        let out = forward_phase(&sys, &layers, 0.1, &mut trace).unwrap();
        assert_eq!(out.epochs[1].rounds, 0);
        assert!(out.epochs[1].picked.is_empty());
        assert!(out.epochs[1].uncovered_at_start.is_empty());
        assert_eq!(out.state.y, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let sys = WeightedSetSystem::new(1, vec![vec![0]], vec![1.0]).unwrap();
        let mut trace = RoundTrace::default();
        for eps in [0.0, 0.5, 0.7, -0.1] {
            assert!(matches!(forward_phase(&sys, &one_layer(1), eps, &mut trace), Err(SncError::Config(_))));
        }
    }

    #[test]
    fn mixed_zero_weights_rejected() {
        let sys = WeightedSetSystem::new(2, vec![vec![0], vec![1]], vec![0.0, 1.0]).unwrap();
        let mut trace = RoundTrace::default();
        assert!(forward_phase(&sys, &one_layer(2), 0.1, &mut trace).is_err());
        let zero = WeightedSetSystem::new(2, vec![vec![0], vec![1]], vec![0.0, 0.0]).unwrap();
        let out = forward_phase(&zero, &one_layer(2), 0.1, &mut trace).unwrap();
        assert_eq!(out.cover.len(), 2);
    }

    fn check_run(sys: &WeightedSetSystem, layers: &LayerDecomposition, eps: f64) {
        let mut trace = RoundTrace::default();
        let out = forward_phase(sys, layers, eps, &mut trace).unwrap();
        assert!(layers.from_layer(1).is_subset(&sys.covered_elements(&out.cover).unwrap()));
        for h in 0..sys.m() {
            let w = sys.weight(h);
            let tol = weight_tolerance(w);
            let load = out.state.load(sys, h);
            assert!(load <= w + tol, "dual infeasible on set {h}");
            if out.cover.contains(h) {
                assert!(load >= (1.0 - eps) * w - tol, "set {h} not nearly tight");
            }
        }
        assert!(out.state.residual_drift(sys) < 1e-9);
        let w_max = sys.weights().iter().copied().fold(0.0, f64::max);
        let w_min = sys.weights().iter().copied().fold(f64::INFINITY, f64::min);
        let bound = forward_epoch_bound(sys.n(), w_max, w_min, eps);
        for epoch in &out.epochs {
            assert!(epoch.rounds as f64 <= bound, "T_k = {} > {bound}", epoch.rounds);
            let cumulative: f64 = epoch.alphas.iter().sum();
            if epoch.rounds > 0 {
                let expect = epoch.q * (1.0 + eps).powi(epoch.rounds as i32 - 1);
                assert!((cumulative - expect).abs() <= 1e-9 * expect.max(1e-300));
            }
        }
    }

    #[test]
    fn fig1_invariants() {
        let inst = fig1_fixture();
        let layers = layer_decomposition(&inst.system, 1, &SncOracle::exact()).unwrap();
        check_run(&inst.system, &layers, 0.1);
        let mut trace = RoundTrace::default();
        let out = forward_phase(&inst.system, &layers, 0.1, &mut trace).unwrap();
        for h in out.cover.iter() {
            assert!(out.state.load(&inst.system, h) >= 0.9 * inst.system.weight(h) - 1e-9);
        }
        // Unit weights, n = 10: T_k <= log_{1.1}(100) + 1.
        let bound = 100f64.ln() / 1.1f64.ln() + 1.0;
        assert!(trace.forward_rounds.iter().all(|&t| t as f64 <= bound));
    }

    #[test]
    fn random_interval_invariants() {
        for seed in 0..40 {
            let law = [WeightLaw::Unit, WeightLaw::Uniform, WeightLaw::PowerLaw][seed as usize % 3];
            let inst = gen_interval(14, 12, law, seed % 2 == 0, seed).unwrap();
            let oracle = SncOracle::auto(&inst.system, inst.geometry.as_ref());
            let layers = layer_decomposition(&inst.system, 1, &oracle).unwrap();
            for eps in [0.05, 0.1, 0.3, 0.49] {
                check_run(&inst.system, &layers, eps);
            }
        }
    }

    #[test]
    fn freezing_holds_per_round() {
        let inst = gen_interval(14, 12, WeightLaw::Uniform, true, 3).unwrap();
        let sys = &inst.system;
        let layers = layer_decomposition(sys, 1, &SncOracle::auto(sys, inst.geometry.as_ref())).unwrap();
        let mut state = DualState::new(sys);
        let mut picked_at = vec![None; sys.m()];
        let mut trace = RoundTrace::default();
        for k in 1..=layers.depth() {
            let before = state.clone();
            run_epoch(sys, &layers, k, 0.1, &mut state, &mut picked_at, &mut trace).unwrap();
            for e in 0..sys.n() {
                if before.frozen[e] || layers.level(e) != Some(k) {
                    assert_eq!(before.y[e], state.y[e], "y({e}) moved outside its epoch");
                }
            }
        }
    }
}
