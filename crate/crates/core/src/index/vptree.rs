use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sorted_entries, Execution, Neighbor, QueryKind, QuerySpec, QueryStats, ResolvedCenter, ResultSet};
use crate::dataset::{Cod, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricDescriptor};

const CANDIDATES: usize = 5;
const SPREAD_SAMPLE: usize = 24;

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    radius: f64,
    inside: Option<usize>,
    outside: Option<usize>,
}

/// Vantage-point tree over one dataset under one metric.
///
/// Each node holds one row as vantage point and the median distance from it
/// to the rows below. Rows at distance `<= radius` go inside, the rest
/// outside (rows at exactly `radius` may land on either side; the search
/// bounds allow for that).
#[derive(Debug, Clone)]
pub struct VpTree {
    metric: Metric,
    dimension: usize,
    cods: Vec<Cod>,
    points: Vec<f64>,
    positions: HashMap<Cod, usize>,
    nodes: Vec<Node>,
    root: Option<usize>,
    build_evaluations: u64,
}

struct Builder<'a> {
    metric: &'a Metric,
    points: &'a [f64],
    dimension: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    evaluations: u64,
}

impl Builder<'_> {
    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    fn dist(&mut self, i: usize, j: usize) -> f64 {
        self.evaluations += 1;
        self.metric.eval(self.point(i), self.point(j))
    }

    /// Random candidates, keep the one whose distances to a random sample
    /// have the largest spread.
    fn choose_vantage(&mut self, items: &[usize]) -> usize {
        if items.len() <= 3 {
            return self.rng.random_range(0..items.len());
        }
        let candidates = sample(&mut self.rng, items.len(), CANDIDATES.min(items.len())).into_vec();
        let probes = sample(&mut self.rng, items.len(), SPREAD_SAMPLE.min(items.len())).into_vec();
        let mut best = (candidates[0], f64::NEG_INFINITY);
        for c in candidates {
            let ds: Vec<f64> = probes
                .iter()
                .map(|&p| self.dist(items[c], items[p]))
                .collect();
            let mean = ds.iter().sum::<f64>() / ds.len() as f64;
            let spread = ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>();
            if spread > best.1 {
                best = (c, spread);
            }
        }
        best.0
    }

    fn build(&mut self, items: &mut [usize]) -> Option<usize> {
        if items.is_empty() {
            return None;
        }
        let v = self.choose_vantage(items);
        items.swap(0, v);
        let vp = items[0];
        let rest = &mut items[1..];

        let id = self.nodes.len();
        self.nodes.push(Node {
            point: vp,
            radius: 0.0,
            inside: None,
            outside: None,
        });
        if rest.is_empty() {
            return Some(id);
        }

        let mut keyed: Vec<(f64, usize)> = rest.iter().map(|&i| (self.dist(vp, i), i)).collect();
        let mid = keyed.len() / 2;
        keyed.select_nth_unstable_by(mid, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let radius = keyed[mid].0;
        for (slot, (_, i)) in rest.iter_mut().zip(&keyed) {
            *slot = *i;
        }
        let (inside, outside) = rest.split_at_mut(mid);
        let inside = self.build(inside);
        let outside = self.build(outside);
        let node = &mut self.nodes[id];
        node.radius = radius;
        node.inside = inside;
        node.outside = outside;
        Some(id)
    }
}

/// Max-heap of the best `k` so far under `(distance, cod)` order.
struct Best {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

struct Ranked(Neighbor);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.order(&other.0)
    }
}

impl Best {
    fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |r| r.0.distance)
        }
    }

    fn offer(&mut self, n: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(Ranked(n));
        } else if let Some(top) = self.heap.peek() {
            if n.order(&top.0).is_lt() {
                self.heap.pop();
                self.heap.push(Ranked(n));
            }
        }
    }
}

// Rounding in the distance evaluation can make the computed triangle
// inequality fail by a few ulps; widen every pruning bound by this much.
fn slack(a: f64, b: f64) -> f64 {
    1e-9 * (a.abs() + b.abs())
}

impl VpTree {
    /// Builds a tree over every row of `ds`. Fails for descriptors that do
    /// not claim the triangle inequality; callers fall back to a scan.
    pub fn build(ds: &Dataset, descriptor: &MetricDescriptor, seed: u64) -> Result<Self> {
        if !descriptor.claims_triangle_inequality() {
            return Err(Error::Unsupported(format!(
                "{} does not satisfy the triangle inequality; use a sequential scan",
                descriptor.family
            )));
        }
        let metric = Metric::bind(descriptor, ds)?;
        let dimension = ds.dimension();
        let cods: Vec<Cod> = ds.rows().iter().map(|r| r.cod).collect();
        let points: Vec<f64> = ds.rows().iter().flat_map(|r| r.values.iter().copied()).collect();
        let positions = cods.iter().enumerate().map(|(i, &c)| (c, i)).collect();

        let mut items: Vec<usize> = (0..cods.len()).collect();
        let mut builder = Builder {
            metric: &metric,
            points: &points,
            dimension,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::with_capacity(cods.len()),
            evaluations: 0,
        };
        let root = builder.build(&mut items);
        let nodes = builder.nodes;
        let build_evaluations = builder.evaluations;
        Ok(Self {
            metric,
            dimension,
            cods,
            points,
            positions,
            nodes,
            root,
            build_evaluations,
        })
    }

    pub fn descriptor(&self) -> &MetricDescriptor {
        self.metric.descriptor()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn build_evaluations(&self) -> u64 {
        self.build_evaluations
    }

    /// CODs of all vantage points, in node order.
    pub fn node_cods(&self) -> Vec<Cod> {
        self.nodes.iter().map(|n| self.cods[n.point]).collect()
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|n| n.radius)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: Option<usize>) -> usize {
            match at {
                None => 0,
                Some(i) => 1 + walk(nodes, nodes[i].inside).max(walk(nodes, nodes[i].outside)),
            }
        }
        walk(&self.nodes, self.root)
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    fn resolve(&self, q: &QuerySpec) -> Result<ResolvedCenter> {
        if q.metric.canonical_key() != self.descriptor().canonical_key() {
            return Err(Error::contract(
                "query metric differs from the metric the tree was built with",
            ));
        }
        q.validate_kind()?;
        match &q.center {
            super::Center::Cod(cod) => {
                let i = *self
                    .positions
                    .get(cod)
                    .ok_or_else(|| Error::not_found("COD", cod))?;
                Ok(ResolvedCenter {
                    cod: Some(*cod),
                    values: self.point(i).to_vec(),
                })
            }
            super::Center::Vector(v) => {
                if v.len() != self.dimension {
                    return Err(Error::contract(format!(
                        "center has {} values, dataset has {} attributes",
                        v.len(),
                        self.dimension
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::contract("center values must be finite"));
                }
                Ok(ResolvedCenter {
                    cod: None,
                    values: v.clone(),
                })
            }
        }
    }

    /// Runs a knn or range query, producing the same entries as a scan.
    pub fn query(&self, q: &QuerySpec) -> Result<Execution> {
        let started = Instant::now();
        let center = self.resolve(q)?;
        let mut evaluations = 0u64;
        let entries = match q.kind {
            QueryKind::Knn { k } => {
                let mut best = Best {
                    k,
                    heap: BinaryHeap::with_capacity(k.min(self.len()) + 1),
                };
                self.knn_visit(self.root, &center.values, &mut best, &mut evaluations);
                let mut out: Vec<Neighbor> = best.heap.into_iter().map(|r| r.0).collect();
                out.sort_by(Neighbor::order);
                out
            }
            QueryKind::Range { radius } => {
                let mut out = Vec::new();
                self.range_visit(self.root, &center.values, radius, &mut out, &mut evaluations);
                sorted_entries(out)
            }
        };
        Ok(Execution {
            result: ResultSet::new(entries, center, q.metric.clone()),
            stats: QueryStats {
                distance_evaluations: evaluations,
                elapsed: started.elapsed(),
                used_tree: true,
            },
        })
    }

    pub fn knn(&self, q: &QuerySpec) -> Result<Execution> {
        match q.kind {
            QueryKind::Knn { .. } => self.query(q),
            QueryKind::Range { .. } => Err(Error::contract("knn needs a knn query")),
        }
    }

    pub fn range(&self, q: &QuerySpec) -> Result<Execution> {
        match q.kind {
            QueryKind::Range { .. } => self.query(q),
            QueryKind::Knn { .. } => Err(Error::contract("range needs a range query")),
        }
    }

    fn knn_visit(&self, at: Option<usize>, q: &[f64], best: &mut Best, evals: &mut u64) {
        let Some(id) = at else { return };
        let node = &self.nodes[id];
        let d = self.metric.eval(q, self.point(node.point));
        *evals += 1;
        best.offer(Neighbor {
            cod: self.cods[node.point],
            distance: d,
        });
        let mu = node.radius;
        let inside_first = d < mu;
        for pass in 0..2 {
            let go_inside = (pass == 0) == inside_first;
            let tau = best.bound();
            if go_inside {
                if d - mu <= tau + slack(d, mu) {
                    self.knn_visit(node.inside, q, best, evals);
                }
            } else if mu - d <= tau + slack(d, mu) {
                self.knn_visit(node.outside, q, best, evals);
            }
        }
    }

    fn range_visit(&self, at: Option<usize>, q: &[f64], r: f64, out: &mut Vec<Neighbor>, evals: &mut u64) {
        let Some(id) = at else { return };
        let node = &self.nodes[id];
        let d = self.metric.eval(q, self.point(node.point));
        *evals += 1;
        if d <= r {
            out.push(Neighbor {
                cod: self.cods[node.point],
                distance: d,
            });
        }
        let mu = node.radius;
        if d - mu <= r + slack(d, mu) {
            self.range_visit(node.inside, q, r, out, evals);
        }
        if mu - d <= r + slack(d, mu) {
            self.range_visit(node.outside, q, r, out, evals);
        }
    }
}
