//! Similarity queries.
//!
//! Two execution paths answer the same [`QuerySpec`]: a sequential scan
//! that evaluates every row, and a [`VpTree`] that prunes with the triangle
//! inequality. Both return entries ordered by `(distance, cod)`, so equal
//! distances are broken by ascending COD and the two paths agree entry for
//! entry.
//!
//! ```
//! use metricscope_core::dataset::Dataset;
//! use metricscope_core::index::{knn_scan, Center, QuerySpec};
//! use metricscope_core::metrics::MetricDescriptor;
//!
//! let ds = Dataset::from_csv_str("0,1\n1,2\n3,3\n7,4").unwrap();
//! let q = QuerySpec::knn("ds", MetricDescriptor::euclidean(), Center::Vector(vec![0.0]), 2);
//! let out = knn_scan(&ds, &q).unwrap();
//! let got: Vec<(i64, f64)> = out.result.entries().iter().map(|e| (e.cod, e.distance)).collect();
//! assert_eq!(got, [(1, 0.0), (2, 1.0)]);
//! ```

mod vptree;

use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use vptree::VpTree;

use crate::dataset::{Cod, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricDescriptor};

/// Where a query is anchored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Cod(Cod),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Knn { k: usize },
    Range { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub dataset: String,
    pub metric: MetricDescriptor,
    pub center: Center,
    #[serde(flatten)]
    pub kind: QueryKind,
}

impl QuerySpec {
    pub fn knn(dataset: impl Into<String>, metric: MetricDescriptor, center: Center, k: usize) -> Self {
        Self {
            dataset: dataset.into(),
            metric,
            center,
            kind: QueryKind::Knn { k },
        }
    }

    pub fn range(
        dataset: impl Into<String>,
        metric: MetricDescriptor,
        center: Center,
        radius: f64,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            metric,
            center,
            kind: QueryKind::Range { radius },
        }
    }

    /// Checks the spec-local invariants (k, radius).
    pub fn validate_kind(&self) -> Result<()> {
        match self.kind {
            QueryKind::Knn { k } if k < 1 => Err(Error::contract("k must be >= 1")),
            QueryKind::Range { radius } if !(radius >= 0.0 && radius.is_finite()) => Err(
                Error::contract(format!("radius must be finite and >= 0, got {radius}")),
            ),
            _ => Ok(()),
        }
    }

    /// Resolves the center to a feature vector of `ds`.
    pub fn resolve_center(&self, ds: &Dataset) -> Result<ResolvedCenter> {
        match &self.center {
            Center::Cod(cod) => Ok(ResolvedCenter {
                cod: Some(*cod),
                values: ds.get_row(*cod)?.values.clone(),
            }),
            Center::Vector(v) => {
                if v.len() != ds.dimension() {
                    return Err(Error::contract(format!(
                        "center has {} values, dataset has {} attributes",
                        v.len(),
                        ds.dimension()
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedCenter {
    pub cod: Option<Cod>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub cod: Cod,
    pub distance: f64,
}

impl Neighbor {
    fn order(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.cod.cmp(&other.cod))
    }
}

static RESULT_SETS_CHECKED: AtomicUsize = AtomicUsize::new(0);

/// Number of result sets whose ordering was verified in this process.
pub fn result_sets_checked() -> usize {
    RESULT_SETS_CHECKED.load(AtomicOrdering::Relaxed)
}

/// An ordered list of `(cod, distance)` entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    entries: Vec<Neighbor>,
    center: ResolvedCenter,
    metric: MetricDescriptor,
}

impl ResultSet {
    /// Every result set goes through here. Distances must be non-decreasing,
    /// ties ordered by COD, and CODs unique; anything else is a bug in the
    /// producing path, so it panics.
    pub(crate) fn new(entries: Vec<Neighbor>, center: ResolvedCenter, metric: MetricDescriptor) -> Self {
        for pair in entries.windows(2) {
            assert!(
                pair[0].order(&pair[1]) == Ordering::Less,
                "result set out of order: {:?} then {:?}",
                pair[0],
                pair[1]
            );
        }
        assert!(entries.iter().all(|e| e.distance >= 0.0));
        RESULT_SETS_CHECKED.fetch_add(1, AtomicOrdering::Relaxed);
        Self {
            entries,
            center,
            metric,
        }
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn cods(&self) -> Vec<Cod> {
        self.entries.iter().map(|e| e.cod).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, cod: Cod) -> bool {
        self.entries.iter().any(|e| e.cod == cod)
    }

    pub fn center(&self) -> &ResolvedCenter {
        &self.center
    }

    pub fn metric(&self) -> &MetricDescriptor {
        &self.metric
    }

    /// One `cod,distance` line per entry, no header, `\n` terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.cod, e.distance));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QueryStats {
    pub distance_evaluations: u64,
    #[serde(with = "duration_micros")]
    pub elapsed: Duration,
    pub used_tree: bool,
}

mod duration_micros {
    use std::time::Duration;

    pub fn serialize<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_micros() as u64)
    }
}

/// A result set together with the counters of the run that produced it.
#[derive(Debug, Clone)]
pub struct Execution {
    pub result: ResultSet,
    pub stats: QueryStats,
}

fn sorted_entries(mut all: Vec<Neighbor>) -> Vec<Neighbor> {
    all.sort_by(Neighbor::order);
    all
}

/// Evaluates every row and keeps the best `k` or those within the radius.
pub fn scan(ds: &Dataset, q: &QuerySpec) -> Result<Execution> {
    q.validate_kind()?;
    let started = Instant::now();
    let metric = Metric::bind(&q.metric, ds)?;
    let center = q.resolve_center(ds)?;

    let mut all: Vec<Neighbor> = ds
        .rows()
        .iter()
        .map(|row| Neighbor {
            cod: row.cod,
            distance: metric.eval(&center.values, &row.values),
        })
        .collect();
    let evaluations = all.len() as u64;

    match q.kind {
        QueryKind::Knn { k } => {
            all = sorted_entries(all);
            all.truncate(k);
        }
        QueryKind::Range { radius } => {
            all.retain(|e| e.distance <= radius);
            all = sorted_entries(all);
        }
    }
    Ok(Execution {
        result: ResultSet::new(all, center, q.metric.clone()),
        stats: QueryStats {
            distance_evaluations: evaluations,
            elapsed: started.elapsed(),
            used_tree: false,
        },
    })
}

pub fn knn_scan(ds: &Dataset, q: &QuerySpec) -> Result<Execution> {
    match q.kind {
        QueryKind::Knn { .. } => scan(ds, q),
        QueryKind::Range { .. } => Err(Error::contract("knn_scan needs a knn query")),
    }
}

pub fn range_scan(ds: &Dataset, q: &QuerySpec) -> Result<Execution> {
    match q.kind {
        QueryKind::Range { .. } => scan(ds, q),
        QueryKind::Knn { .. } => Err(Error::contract("range_scan needs a range query")),
    }
}
