//! FastMap projection to three dimensions.
//!
//! Each axis picks two far-apart pivot elements `a` and `b` and places every
//! element `o` on the line through them using only distances:
//!
//! ```text
//! x_o = (d(a,o)^2 + d(a,b)^2 - d(b,o)^2) / (2 d(a,b))
//! ```
//!
//! The next axis works on the residual distance that remains after removing
//! the component along the previous axis,
//! `d'(x,y) = sqrt(max(0, d(x,y)^2 - (x_x - x_y)^2))`. Clamping the squared
//! residual at zero absorbs distances that are not exactly Euclidean.
//!
//! How well the projection preserves distances is reported as the stress
//! `Σ|δ - d| / Σδ` over element pairs, where `δ` is the original distance
//! and `d` the Euclidean distance between projected points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Cod, FeatureVector};
use crate::metrics::{Metric, MetricDescriptor};

pub const AXES: usize = 3;
const PIVOT_SWEEPS: usize = 5;
const EXACT_STRESS_LIMIT: usize = 2_000;
const STRESS_SAMPLE_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub cod: Cod,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ProjectedPoint {
    pub fn axis(&self, k: usize) -> f64 {
        [self.x, self.y, self.z][k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotPair {
    pub a: Cod,
    pub b: Cod,
    /// Residual distance between the pivots on this axis.
    pub separation: f64,
}

/// Per-element 3-D coordinates plus the pivots that define each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection3D {
    pub coords: Vec<ProjectedPoint>,
    /// `None` for an axis on which every residual distance was zero.
    pub pivots: [Option<PivotPair>; AXES],
    pub metric: MetricDescriptor,
    pub stress: f64,
    pub seed: u64,
}

impl Projection3D {
    pub fn get(&self, cod: Cod) -> Option<&ProjectedPoint> {
        self.coords.iter().find(|p| p.cod == cod)
    }

    pub fn cods(&self) -> Vec<Cod> {
        self.coords.iter().map(|p| p.cod).collect()
    }

    /// One `cod,x,y,z` line per element, no header, `\n` terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.coords {
            out.push_str(&format!("{},{},{},{}\n", p.cod, p.x, p.y, p.z));
        }
        out
    }

    /// Pivots, stress, seed and metric as a JSON object.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "pivots": self.pivots,
            "stress": self.stress,
            "seed": self.seed,
            "metric": self.metric,
        })
    }
}

/// Projection state after some axes have been assigned.
pub struct AxisState<'a> {
    metric: &'a Metric,
    points: &'a [FeatureVector],
    coords: Vec<[f64; AXES]>,
    axis: usize,
}

impl<'a> AxisState<'a> {
    pub fn new(metric: &'a Metric, points: &'a [FeatureVector]) -> Self {
        Self {
            metric,
            points,
            coords: vec![[0.0; AXES]; points.len()],
            axis: 0,
        }
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn coords(&self) -> &[[f64; AXES]] {
        &self.coords
    }

    pub fn base_distance(&self, i: usize, j: usize) -> f64 {
        self.metric.eval(&self.points[i].values, &self.points[j].values)
    }

    /// Distance between elements `i` and `j` left over after the axes
    /// assigned so far. On axis 0 this is the base metric.
    pub fn residual(&self, i: usize, j: usize) -> f64 {
        let mut r = self.base_distance(i, j);
        for k in 0..self.axis {
            let dx = self.coords[i][k] - self.coords[j][k];
            r = (r * r - dx * dx).max(0.0).sqrt();
        }
        r
    }

    fn farthest_from(&self, from: usize) -> (usize, f64) {
        let mut best = (from, 0.0);
        for j in 0..self.points.len() {
            let d = self.residual(from, j);
            if d > best.1 {
                best = (j, d);
            }
        }
        best
    }

    /// Alternating farthest-point sweeps from a random start. Returns the
    /// pivot pair as element indices (lower index first) with their
    /// residual separation, or `None` when every residual is zero.
    pub fn choose_pivots<R: Rng>(&self, rng: &mut R) -> Option<(usize, usize, f64)> {
        let n = self.points.len();
        if n < 2 {
            return None;
        }
        let mut from = rng.random_range(0..n);
        let mut pair = None;
        for _ in 0..PIVOT_SWEEPS {
            let (to, d) = self.farthest_from(from);
            if d <= 0.0 {
                break;
            }
            pair = Some((from, to));
            from = to;
        }
        let (a, b) = pair?;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Some((a, b, self.residual(a, b)))
    }

    /// Assigns the current axis and advances. Returns the pivots used.
    fn assign<R: Rng>(&mut self, rng: &mut R) -> Option<PivotPair> {
        let k = self.axis;
        let chosen = self.choose_pivots(rng);
        let mut column = vec![0.0; self.points.len()];
        if let Some((a, b, dab)) = chosen {
            let dab2 = dab * dab;
            for (o, slot) in column.iter_mut().enumerate() {
                *slot = if o == a {
                    0.0
                } else if o == b {
                    dab
                } else {
                    let dao = self.residual(a, o);
                    let dbo = self.residual(b, o);
                    (dao * dao + dab2 - dbo * dbo) / (2.0 * dab)
                };
            }
        }
        for (c, v) in self.coords.iter_mut().zip(column) {
            c[k] = v;
        }
        self.axis += 1;
        chosen.map(|(a, b, separation)| PivotPair {
            a: self.points[a].cod,
            b: self.points[b].cod,
            separation,
        })
    }
}

/// Projects `points` to three dimensions. Deterministic for a given seed.
pub fn project(points: &[FeatureVector], metric: &Metric, seed: u64) -> Projection3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = AxisState::new(metric, points);
    let mut pivots = [None; AXES];
    for slot in pivots.iter_mut() {
        *slot = state.assign(&mut rng);
    }
    let coords = state.coords;
    let stress = stress(points, &coords, metric, &mut rng);
    Projection3D {
        coords: points
            .iter()
            .zip(&coords)
            .map(|(p, c)| ProjectedPoint {
                cod: p.cod,
                x: c[0],
                y: c[1],
                z: c[2],
            })
            .collect(),
        pivots,
        metric: metric.descriptor().clone(),
        stress,
        seed,
    }
}

fn euclid3(a: &[f64; AXES], b: &[f64; AXES]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `Σ|δ - d| / Σδ` over all pairs, or over a seeded sample of pairs for
/// large inputs. Zero when all original distances are zero.
fn stress<R: Rng>(points: &[FeatureVector], coords: &[[f64; AXES]], metric: &Metric, rng: &mut R) -> f64 {
    let n = points.len();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut add = |i: usize, j: usize| {
        let delta = metric.eval(&points[i].values, &points[j].values);
        num += (delta - euclid3(&coords[i], &coords[j])).abs();
        den += delta;
    };
    if n <= EXACT_STRESS_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                add(i, j);
            }
        }
    } else {
        for _ in 0..STRESS_SAMPLE_PAIRS {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            add(i, j);
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}
