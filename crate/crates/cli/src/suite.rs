//! `compare`: suite configuration, per-instance runs, CSV summary.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snc_cover::driver::{solve, SolveConfig};
use snc_cover::instance::{gen_interval, gen_random, gen_vertex_cover, load, Instance, WeightLaw};
use snc_cover::oracles::{exact_opt, greedy_hdelta, sequential_primal_dual, SearchLimits};
use snc_cover::snc::SncOracle;
use snc_cover::system::weight_tolerance;
use snc_cover::SncError;

pub const COLUMNS: [&str; 16] = [
    "instance", "seed", "tau", "epsilon", "n", "m", "L", "weight_snc", "weight_greedy", "weight_pd", "weight_opt",
    "ratio_snc", "fwd_rounds", "del_rounds", "max_mult_F", "bound_ok",
];

#[derive(Clone, Copy, Debug, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    Interval,
    VertexCover,
    Random,
}

fn default_count() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_edge_prob() -> f64 {
    0.3
}
fn default_frequency() -> usize {
    3
}
fn default_law() -> WeightLaw {
    WeightLaw::Unit
}

/// A family of generated instances; instance `i` uses seed `seed + i`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub kind: GenKind,
    #[serde(default = "default_count")]
    pub count: usize,
    pub n: usize,
    pub m: Option<usize>,
    #[serde(default = "default_law")]
    pub weight_law: WeightLaw,
    #[serde(default = "default_true")]
    pub normalized: bool,
    #[serde(default = "default_edge_prob")]
    pub edge_prob: f64,
    #[serde(default = "default_frequency")]
    pub max_frequency: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GenSpec {
    pub fn build(&self, seed: u64) -> Result<Instance, SncError> {
        let m = self.m.unwrap_or(self.n);
        match self.kind {
            GenKind::Interval => gen_interval(self.n, m, self.weight_law, self.normalized, seed),
            GenKind::VertexCover => gen_vertex_cover(self.n, self.edge_prob, self.weight_law, seed),
            GenKind::Random => gen_random(self.n, m, self.max_frequency, self.weight_law, seed),
        }
    }

    fn label(&self, seed: u64) -> String {
        let kind = match self.kind {
            GenKind::Interval => "interval",
            GenKind::VertexCover => "vc",
            GenKind::Random => "random",
        };
        format!("{kind}-n{}-s{seed}", self.n)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Relative paths resolve against the suite file's directory.
    pub path: PathBuf,
    pub name: Option<String>,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_tau() -> usize {
    1
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_oracle() -> String {
    "auto".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// `exact`, `interval`, or `auto`.
    #[serde(default = "default_oracle")]
    pub oracle: String,
    #[serde(default)]
    pub full_budget: bool,
    #[serde(default)]
    pub instances: Vec<FileEntry>,
    #[serde(default)]
    pub generate: Vec<GenSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub instance: String,
    pub seed: u64,
    pub tau: usize,
    pub epsilon: f64,
    pub n: usize,
    pub m: usize,
    pub layers: usize,
    pub weight_snc: f64,
    pub weight_greedy: f64,
    pub weight_pd: f64,
    pub weight_opt: f64,
    pub ratio_snc: f64,
    pub fwd_rounds: usize,
    pub del_rounds: usize,
    pub max_mult_f: usize,
    pub bound_ok: bool,
}

fn oracle_for(name: &str, inst: &Instance) -> Result<SncOracle, SncError> {
    match name {
        "exact" => Ok(SncOracle::exact()),
        "auto" => Ok(SncOracle::auto(&inst.system, inst.geometry.as_ref())),
        "interval" => match &inst.geometry {
            Some(g) => SncOracle::interval(&inst.system, g.clone()),
            None => Err(SncError::Config("interval oracle needs interval geometry".into())),
        },
        other => Err(SncError::Config(format!("unknown oracle `{other}`"))),
    }
}

/// Rows for one instance over every seed, or a notice explaining the skip.
fn run_instance(label: &str, inst: &Instance, cfg: &SuiteConfig) -> Result<Vec<Row>, String> {
    let sys = &inst.system;
    let oracle = oracle_for(&cfg.oracle, inst).map_err(|e| format!("{label}: {e}"))?;
    let opt = exact_opt(sys, SearchLimits::default()).map_err(|e| format!("{label}: skipped, {e}"))?;
    let greedy = greedy_hdelta(sys).map_err(|e| format!("{label}: {e}"))?;
    let pd = sequential_primal_dual(sys).map_err(|e| format!("{label}: {e}"))?;
    let bound = cfg.tau as f64 * (1.0 + 3.0 * cfg.epsilon);
    cfg.seeds
        .iter()
        .map(|&seed| {
            let config = SolveConfig {
                tau: cfg.tau,
                epsilon: cfg.epsilon,
                seed,
                full_budget: cfg.full_budget,
            };
            let sol = solve(sys, &oracle, config).map_err(|e| format!("{label}: skipped, {e}"))?;
            let ratio = if opt.opt_weight > 0.0 {
                sol.weight / opt.opt_weight
            } else if sol.weight == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            Ok(Row {
                instance: label.to_string(),
                seed,
                tau: cfg.tau,
                epsilon: cfg.epsilon,
                n: sys.n(),
                m: sys.m(),
                layers: sol.reduced.layers.depth(),
                weight_snc: sol.weight,
                weight_greedy: sys.total_weight(&greedy),
                weight_pd: sys.total_weight(&pd),
                weight_opt: opt.opt_weight,
                ratio_snc: ratio,
                fwd_rounds: sol.trace.forward_total(),
                del_rounds: sol.trace.deletion_total(),
                max_mult_f: sol.target_multiplicity,
                bound_ok: sol.weight <= bound * opt.opt_weight + weight_tolerance(opt.opt_weight),
            })
        })
        .collect()
}

pub fn load_suite(path: &Path) -> Result<SuiteConfig, SncError> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| SncError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Runs every entry of the suite. Returns the rows in suite order and the notices.
pub fn run_suite(cfg: &SuiteConfig, base: &Path) -> Result<(Vec<Row>, Vec<String>), SncError> {
    let mut entries: Vec<(String, Instance)> = Vec::new();
    for f in &cfg.instances {
        let path = if f.path.is_absolute() { f.path.clone() } else { base.join(&f.path) };
        let label = f.name.clone().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        });
        entries.push((label, load(&path)?));
    }
    for spec in &cfg.generate {
        for i in 0..spec.count as u64 {
            let seed = spec.seed + i;
            entries.push((spec.label(seed), spec.build(seed)?));
        }
    }
    let results: Vec<Result<Vec<Row>, String>> = entries
        .par_iter()
        .map(|(label, inst)| run_instance(label, inst, cfg))
        .collect();
    let mut rows = Vec::new();
    let mut notices = Vec::new();
    for r in results {
        match r {
            Ok(mut part) => rows.append(&mut part),
            Err(notice) => notices.push(notice),
        }
    }
    Ok((rows, notices))
}

pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> Result<(), SncError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| SncError::Io(io::Error::other(e));
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn compare(suite: &Path, out: Option<&Path>, threads: Option<usize>) -> Result<(), SncError> {
    let cfg = load_suite(suite)?;
    let base = suite.parent().unwrap_or(Path::new("."));
    let (rows, notices) = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| SncError::Config(e.to_string()))?
            .install(|| run_suite(&cfg, base))?,
        None => run_suite(&cfg, base)?,
    };
    match out {
        Some(path) => write_rows(fs::File::create(path)?, &rows)?,
        None => write_rows(io::stdout().lock(), &rows)?,
    }
    for n in &notices {
        eprintln!("notice: {n}");
    }
    let ok = rows.iter().filter(|r| r.bound_ok).count();
    let max_ratio = rows.iter().map(|r| r.ratio_snc).fold(0.0, f64::max);
    if !rows.is_empty() {
        eprintln!(
            "rows {} bound_ok {}/{} ({:.1}%) max ratio {:.4} skipped {}",
            rows.len(),
            ok,
            rows.len(),
            100.0 * ok as f64 / rows.len() as f64,
            max_ratio,
            notices.len()
        );
    }
    Ok(())
}
