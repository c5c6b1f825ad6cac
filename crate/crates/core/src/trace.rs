//! Round accounting under the synchronous round model.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Decompose,
    Forward,
    Delete,
}

impl Phase {
    fn as_str(self) -> &'static str {
        match self {
            Phase::Decompose => "decompose",
            Phase::Forward => "forward",
            Phase::Delete => "delete",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundKind {
    Strip,
    Grow,
    Mis,
    Shrink,
}

impl RoundKind {
    fn as_str(self) -> &'static str {
        match self {
            RoundKind::Strip => "strip",
            RoundKind::Grow => "grow",
            RoundKind::Mis => "mis",
            RoundKind::Shrink => "shrink",
        }
    }
}

/// One synchronous round. Fields that do not apply to a phase are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub phase: Phase,
    /// Epoch (forward) or layer (decompose, delete), 1-based.
    pub layer: usize,
    pub round_type: RoundKind,
    /// 1-based within the epoch / layer step.
    pub round: usize,
    pub alpha: Option<f64>,
    pub picked_count: Option<usize>,
    pub covered_count: Option<usize>,
    pub active_count: Option<usize>,
    pub deleted_count: Option<usize>,
    pub max_multiplicity_fk: Option<usize>,
}

pub const TRACE_CSV_HEADER: &str = "phase,layer,round_type,round,alpha,picked_count,covered_count,active_count,deleted_count,max_multiplicity_Fk";

/// Round counts per phase plus the per-round rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RoundTrace {
    pub decomposition_rounds: usize,
    /// `T_k` per epoch.
    pub forward_rounds: Vec<usize>,
    /// Luby rounds spent per layer of the deletion phase (index k-1).
    pub mis_rounds: Vec<usize>,
    /// Shrink rounds executed per layer (index k-1).
    pub shrink_rounds: Vec<usize>,
    /// Shrink budget per layer.
    pub shrink_budget: usize,
    /// `n * m^tau`, the machine count of the parallel model. Not enforced.
    pub machine_estimate: f64,
    #[serde(skip)]
    pub rows: Vec<TraceRow>,
}

impl RoundTrace {
    pub fn forward_total(&self) -> usize {
        self.forward_rounds.iter().sum()
    }

    pub fn deletion_total(&self) -> usize {
        self.mis_rounds.iter().sum::<usize>() + self.shrink_rounds.iter().sum::<usize>()
    }

    pub fn total_rounds(&self) -> usize {
        self.decomposition_rounds + self.forward_total() + self.deletion_total()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.phase.as_str(),
                r.layer,
                r.round_type.as_str(),
                r.round,
                opt(r.alpha),
                opt(r.picked_count),
                opt(r.covered_count),
                opt(r.active_count),
                opt(r.deleted_count),
                opt(r.max_multiplicity_fk),
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-epoch round bound `log_{1+eps}(n w_max / (eps w_min)) + 1`.
pub fn forward_epoch_bound(n: usize, w_max: f64, w_min: f64, epsilon: f64) -> f64 {
    if n == 0 || w_max <= 0.0 {
        return 1.0;
    }
    let ratio = n as f64 * w_max / (epsilon * w_min);
    (ratio.ln() / (1.0 + epsilon).ln()).max(0.0) + 1.0
}

/// `4 tau^3 2^tau log2 n`, rounded up.
pub fn shrink_budget(tau: usize, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let raw = 4.0 * (tau as f64).powi(3) * 2f64.powi(tau as i32) * (n as f64).log2();
    raw.ceil() as usize
}

/// `L log_{1+eps}(n^3/eps^2) + 4 tau^3 2^tau L^2 log2 n`.
pub fn total_round_envelope(n: usize, depth: usize, tau: usize, epsilon: f64) -> f64 {
    let n = n.max(1) as f64;
    let l = depth as f64;
    let forward = l * ((n.powi(3) / (epsilon * epsilon)).ln() / (1.0 + epsilon).ln());
    let deletion = 4.0 * (tau as f64).powi(3) * 2f64.powi(tau as i32) * l * l * n.log2();
    forward + deletion
}
