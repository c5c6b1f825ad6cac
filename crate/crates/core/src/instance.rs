//! Instance files, the reference interval fixture, and seeded generators.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SncError};
use crate::system::WeightedSetSystem;

/// On-disk instance schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub sets: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Names>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Names {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Line coordinate per element (interval instances).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    /// `[left, right]` per set (interval instances).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<[f64; 2]>>,
}

/// Points on a line and closed intervals over them.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalGeometry {
    pub points: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalGeometry {
    /// Set `i` holds the points inside interval `i`.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        self.intervals
            .iter()
            .map(|&(l, r)| {
                self.points
                    .iter()
                    .enumerate()
                    .filter(|&(_, &x)| l <= x && x <= r)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect()
    }

    pub fn consistent_with(&self, sys: &WeightedSetSystem) -> bool {
        self.points.len() == sys.n()
            && self.intervals.len() == sys.m()
            && self
                .memberships()
                .iter()
                .enumerate()
                .all(|(h, members)| members.as_slice() == sys.set(h))
    }

    /// Geometry of the sub-instance produced by [`WeightedSetSystem::restrict`].
    pub fn restrict(&self, element_map: &[usize], handle_map: &[usize]) -> IntervalGeometry {
        IntervalGeometry {
            points: element_map.iter().map(|&e| self.points[e]).collect(),
            intervals: handle_map.iter().map(|&h| self.intervals[h]).collect(),
        }
    }

    /// True when no interval strictly contains another.
    pub fn is_containment_free(&self) -> bool {
        self.intervals.iter().enumerate().all(|(i, &(l1, r1))| {
            self.intervals.iter().enumerate().all(|(j, &(l2, r2))| {
                i == j || !(l1 <= l2 && r2 <= r1 && (l1, r1) != (l2, r2))
            })
        })
    }
}

/// A set system with optional labels and interval geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub system: WeightedSetSystem,
    pub names: Option<Names>,
    pub kind: Option<String>,
    pub geometry: Option<IntervalGeometry>,
}

impl Instance {
    pub fn plain(system: WeightedSetSystem) -> Self {
        Instance {
            system,
            names: None,
            kind: None,
            geometry: None,
        }
    }

    pub fn element_name(&self, e: usize) -> String {
        self.names
            .as_ref()
            .and_then(|n| n.elements.as_ref())
            .and_then(|v| v.get(e).cloned())
            .unwrap_or_else(|| e.to_string())
    }

    pub fn set_name(&self, h: usize) -> String {
        self.names
            .as_ref()
            .and_then(|n| n.sets.as_ref())
            .and_then(|v| v.get(h).cloned())
            .unwrap_or_else(|| h.to_string())
    }

    pub fn to_file(&self) -> InstanceFile {
        let meta = if self.kind.is_some() || self.geometry.is_some() {
            Some(Meta {
                kind: self.kind.clone(),
                points: self.geometry.as_ref().map(|g| g.points.clone()),
                intervals: self
                    .geometry
                    .as_ref()
                    .map(|g| g.intervals.iter().map(|&(l, r)| [l, r]).collect()),
            })
        } else {
            None
        };
        InstanceFile {
            n: self.system.n(),
            sets: self.system.sets().to_vec(),
            weights: self.system.weights().to_vec(),
            names: self.names.clone(),
            meta,
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let system = WeightedSetSystem::new(file.n, file.sets, file.weights)?;
        let mut kind = None;
        let mut geometry = None;
        if let Some(meta) = file.meta {
            kind = meta.kind;
            match (meta.points, meta.intervals) {
                (Some(points), Some(intervals)) => {
                    let g = IntervalGeometry {
                        points,
                        intervals: intervals.into_iter().map(|[l, r]| (l, r)).collect(),
                    };
                    if !g.consistent_with(&system) {
                        return Err(SncError::Precondition(
                            "meta.points/meta.intervals disagree with the set memberships".into(),
                        ));
                    }
                    geometry = Some(g);
                }
                (None, None) => {}
                _ => {
                    return Err(SncError::Precondition(
                        "meta.points and meta.intervals must be given together".into(),
                    ))
                }
            }
        }
        if let Some(names) = &file.names {
            if names.elements.as_ref().is_some_and(|v| v.len() != system.n()) {
                return Err(SncError::Precondition("names.elements length differs from n".into()));
            }
            if names.sets.as_ref().is_some_and(|v| v.len() != system.m()) {
                return Err(SncError::Precondition("names.sets length differs from sets".into()));
            }
        }
        Ok(Instance {
            system,
            names: file.names,
            kind,
            geometry,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    /// Parses an instance; `origin` labels error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            let message = if path.is_empty() || path == "." {
                inner.to_string()
            } else {
                format!("at `{path}`: {inner}")
            };
            SncError::Parse {
                path: origin.to_string(),
                message,
            }
        })?;
        Instance::from_file(file).map_err(|err| match err {
            SncError::Parse { .. } => err,
            other => SncError::Parse {
                path: origin.to_string(),
                message: other.to_string(),
            },
        })
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    Instance::from_json(&text, &path.display().to_string())
}

pub fn save(path: impl AsRef<Path>, instance: &Instance) -> Result<()> {
    let mut text = instance.to_json();
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Endpoints of the sixteen fixture intervals, `I_1..I_16`.
const FIG1_INTERVALS: [(f64, f64); 16] = [
    (5.0, 90.0),
    (100.0, 150.0),
    (160.0, 210.0),
    (220.0, 240.0),
    (250.0, 305.0),
    (0.0, 30.0),
    (40.0, 120.0),
    (130.0, 150.0),
    (160.0, 180.0),
    (190.0, 300.0),
    (10.0, 60.0),
    (70.0, 210.0),
    (220.0, 270.0),
    (280.0, 310.0),
    (65.0, 150.0),
    (185.0, 245.0),
];

/// The ten-point, sixteen-interval example with unit weights. Element `i`
/// is point `p_{i+1}`, handle `h` is `S_{h+1}`.
pub fn fig1_fixture() -> Instance {
    fig1_with_weights(vec![1.0; 16])
}

pub fn fig1_with_weights(weights: Vec<f64>) -> Instance {
    let geometry = IntervalGeometry {
        points: (0..10).map(|i| 20.0 + 30.0 * i as f64).collect(),
        intervals: FIG1_INTERVALS.to_vec(),
    };
    let system = WeightedSetSystem::new(10, geometry.memberships(), weights)
        .expect("fixture is well formed");
    Instance {
        system,
        names: Some(Names {
            elements: Some((1..=10).map(|i| format!("p{i}")).collect()),
            sets: Some((1..=16).map(|i| format!("S{i}")).collect()),
        }),
        kind: Some("interval".into()),
        geometry: Some(geometry),
    }
}

/// How set weights are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightLaw {
    Unit,
    /// Uniform on `[1, 10)`.
    Uniform,
    /// Pareto with scale 1 and shape 1.5.
    PowerLaw,
}

impl WeightLaw {
    pub fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            WeightLaw::Unit => 1.0,
            WeightLaw::Uniform => rng.gen_range(1.0..10.0),
            WeightLaw::PowerLaw => Pareto::new(1.0, 1.5).expect("valid pareto").sample(rng),
        }
    }
}

impl FromStr for WeightLaw {
    type Err = SncError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(WeightLaw::Unit),
            "uniform" => Ok(WeightLaw::Uniform),
            "powerlaw" | "power-law" => Ok(WeightLaw::PowerLaw),
            other => Err(SncError::Config(format!("unknown weight law `{other}`"))),
        }
    }
}

const RETRY_BUDGET: usize = 1000;

/// Random interval-cover instance. Points have random gaps; interval lengths
/// scale with the span per interval so that sparse families still cover. With `normalized`, left and right
/// endpoints are re-paired in sorted order, which keeps the coverage count of
/// every point and removes strict containment.
pub fn gen_interval(
    n_points: usize,
    n_intervals: usize,
    law: WeightLaw,
    normalized: bool,
    seed: u64,
) -> Result<Instance> {
    if n_points == 0 || n_intervals == 0 {
        return Err(SncError::Config("interval generator needs points and intervals".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    let mut x = 0.0;
    for _ in 0..n_points {
        x += rng.gen_range(1.0..10.0);
        points.push(x);
    }
    let (lo, hi) = (points[0], points[n_points - 1]);
    let scale = ((hi - lo) / n_intervals as f64 / 3.0).max(1.0);
    for _ in 0..RETRY_BUDGET {
        let mut intervals: Vec<(f64, f64)> = (0..n_intervals)
            .map(|_| {
                let center = rng.gen_range(lo - 2.0..=hi + 2.0);
                let half = rng.gen_range(1.0..12.0) * scale;
                (center - half, center + half)
            })
            .collect();
        if normalized {
            let mut lefts: Vec<f64> = intervals.iter().map(|iv| iv.0).collect();
            let mut rights: Vec<f64> = intervals.iter().map(|iv| iv.1).collect();
            lefts.sort_by(f64::total_cmp);
            rights.sort_by(f64::total_cmp);
            intervals = lefts.into_iter().zip(rights).collect();
        }
        let geometry = IntervalGeometry { points: points.clone(), intervals };
        let memberships = geometry.memberships();
        let covered = (0..n_points).all(|e| memberships.iter().any(|s| s.contains(&e)));
        if !covered {
            continue;
        }
        let weights = (0..n_intervals).map(|_| law.sample(&mut rng)).collect();
        let system = WeightedSetSystem::new(n_points, memberships, weights)?;
        return Ok(Instance {
            system,
            names: None,
            kind: Some("interval".into()),
            geometry: Some(geometry),
        });
    }
    Err(SncError::Generation(format!(
        "no covering interval family after {RETRY_BUDGET} attempts (n={n_points}, m={n_intervals})"
    )))
}

/// Vertex cover as set cover: elements are the edges of a G(n, p) graph,
/// set `v` holds the edges incident to vertex `v`.
pub fn gen_vertex_cover(n_vertices: usize, edge_prob: f64, law: WeightLaw, seed: u64) -> Result<Instance> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(SncError::Config(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n_vertices {
        for v in u + 1..n_vertices {
            if rng.gen_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    Ok(vertex_cover_instance(n_vertices, &edges, law, &mut rng))
}

pub fn vertex_cover_instance<R: Rng>(
    n_vertices: usize,
    edges: &[(usize, usize)],
    law: WeightLaw,
    rng: &mut R,
) -> Instance {
    let mut sets = vec![Vec::new(); n_vertices];
    for (i, &(u, v)) in edges.iter().enumerate() {
        sets[u].push(i);
        sets[v].push(i);
    }
    let weights = (0..n_vertices).map(|_| law.sample(rng)).collect();
    let system = WeightedSetSystem::new(edges.len(), sets, weights).expect("edges index vertices");
    Instance {
        system,
        names: Some(Names {
            elements: Some(edges.iter().map(|(u, v)| format!("{u}-{v}")).collect()),
            sets: Some((0..n_vertices).map(|v| format!("v{v}")).collect()),
        }),
        kind: Some("vertex-cover".into()),
        geometry: None,
    }
}

/// Random set system in which every element lies in between 1 and
/// `max_frequency` sets.
pub fn gen_random(n: usize, m: usize, max_frequency: usize, law: WeightLaw, seed: u64) -> Result<Instance> {
    if m == 0 || max_frequency == 0 {
        return Err(SncError::Config("random generator needs m >= 1 and max_frequency >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = vec![Vec::new(); m];
    let handles: Vec<usize> = (0..m).collect();
    for e in 0..n {
        let f = rng.gen_range(1..=max_frequency.min(m));
        for &h in handles.choose_multiple(&mut rng, f) {
            sets[h].push(e);
        }
    }
    let weights = (0..m).map(|_| law.sample(&mut rng)).collect();
    Ok(Instance {
        system: WeightedSetSystem::new(n, sets, weights)?,
        names: None,
        kind: Some("random".into()),
        geometry: None,
    })
}
