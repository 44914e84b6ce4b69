//! Distance functions over feature vectors.
//!
//! A [`MetricDescriptor`] names a distance family together with its
//! parameters. Binding it to a dimensionality (and, for `exp_weighted`, the
//! per-attribute ranges of a dataset) yields a [`Metric`] that can be
//! evaluated.
//!
//! The weighted Minkowski family applies each weight to the powered
//! difference, `(Σ w_i |x_i - y_i|^p)^(1/p)`. Zero weights are allowed and
//! turn the metric into a pseudo-metric: distinct vectors that only differ
//! on silenced attributes end up at distance zero.
//!
//! ```
//! use metricscope_core::metrics::{Metric, MetricDescriptor};
//!
//! let m = Metric::unscaled(&MetricDescriptor::weighted_minkowski(4.0, vec![1.0, 1.0]), 2).unwrap();
//! let d = m.distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
//! assert!((d - 2f64.powf(0.25)).abs() < 1e-12);
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Euclidean,
    CityBlock,
    Minkowski,
    WeightedMinkowski,
    ExpWeighted,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Euclidean,
        Family::CityBlock,
        Family::Minkowski,
        Family::WeightedMinkowski,
        Family::ExpWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Euclidean => "euclidean",
            Family::CityBlock => "city_block",
            Family::Minkowski => "minkowski",
            Family::WeightedMinkowski => "weighted_minkowski",
            Family::ExpWeighted => "exp_weighted",
        }
    }

    fn uses_exponent(self) -> bool {
        !matches!(self, Family::Euclidean | Family::CityBlock)
    }

    fn uses_weights(self) -> bool {
        matches!(self, Family::WeightedMinkowski | Family::ExpWeighted)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A distance function selection: family plus optional exponent and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MetricDescriptor {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            p: None,
            weights: None,
        }
    }

    pub fn euclidean() -> Self {
        Self::new(Family::Euclidean)
    }

    pub fn city_block() -> Self {
        Self::new(Family::CityBlock)
    }

    pub fn minkowski(p: f64) -> Self {
        Self::new(Family::Minkowski).with_p(p)
    }

    pub fn weighted_minkowski(p: f64, weights: Vec<f64>) -> Self {
        Self::new(Family::WeightedMinkowski)
            .with_p(p)
            .with_weights(weights)
    }

    pub fn exp_weighted(p: f64, weights: Vec<f64>) -> Self {
        Self::new(Family::ExpWeighted).with_p(p).with_weights(weights)
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    /// Whether indexes may prune with the triangle inequality.
    pub fn claims_triangle_inequality(&self) -> bool {
        self.family != Family::ExpWeighted
    }

    /// Exponent actually used when evaluating.
    pub fn exponent(&self) -> f64 {
        match self.family {
            Family::Euclidean => 2.0,
            Family::CityBlock => 1.0,
            _ => self.p.unwrap_or(2.0),
        }
    }

    /// Checks the descriptor's own invariants against a dimensionality.
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(p) = self.p {
            if !p.is_finite() || p < 1.0 {
                return Err(Error::contract(format!("exponent p must be >= 1, got {p}")));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(Error::contract(format!(
                    "expected {n} weights, got {}",
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::contract(format!(
                    "weights must be finite and non-negative, got {bad}"
                )));
            }
        }
        Ok(())
    }

    /// A stable textual key; equal descriptors produce equal keys.
    pub fn canonical_key(&self) -> String {
        let mut key = self.family.name().to_string();
        if self.family.uses_exponent() {
            key.push_str(&format!(";p={}", self.exponent()));
        }
        if self.family.uses_weights() {
            if let Some(w) = &self.weights {
                let w: Vec<String> = w.iter().map(f64::to_string).collect();
                key.push_str(&format!(";w={}", w.join(",")));
            }
        }
        key
    }
}

/// A descriptor bound to a dimensionality, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    descriptor: MetricDescriptor,
    p: f64,
    weights: Vec<f64>,
    scales: Vec<f64>,
}

impl Metric {
    /// Binds against a dataset; `exp_weighted` takes its per-attribute
    /// ranges from the dataset statistics.
    pub fn bind(descriptor: &MetricDescriptor, ds: &Dataset) -> Result<Self> {
        let ranges: Vec<f64> = ds.stats().iter().map(|s| s.range()).collect();
        Self::with_scales(descriptor, &ranges)
    }

    /// Binds with unit scales.
    pub fn unscaled(descriptor: &MetricDescriptor, n: usize) -> Result<Self> {
        Self::with_scales(descriptor, &vec![1.0; n])
    }

    /// Binds with explicit attribute ranges (zero ranges are replaced by 1).
    pub fn with_scales(descriptor: &MetricDescriptor, ranges: &[f64]) -> Result<Self> {
        let n = ranges.len();
        descriptor.validate(n)?;
        let weights = match (&descriptor.weights, descriptor.family.uses_weights()) {
            (Some(w), true) => w.clone(),
            _ => vec![1.0; n],
        };
        let scales = ranges
            .iter()
            .map(|&r| if r > 0.0 && r.is_finite() { r } else { 1.0 })
            .collect();
        Ok(Self {
            descriptor: descriptor.clone(),
            p: descriptor.exponent(),
            weights,
            scales,
        })
    }

    pub fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    pub fn family(&self) -> Family {
        self.descriptor.family
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn claims_triangle_inequality(&self) -> bool {
        self.descriptor.claims_triangle_inequality()
    }

    /// Checked evaluation.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() || y.len() != self.dimension() {
            return Err(Error::contract(format!(
                "dimensionality mismatch: metric expects {}, got {} and {}",
                self.dimension(),
                x.len(),
                y.len()
            )));
        }
        Ok(self.eval(x, y))
    }

    pub fn between(&self, x: &FeatureVector, y: &FeatureVector) -> Result<f64> {
        self.distance(&x.values, &y.values)
    }

    /// Unchecked evaluation; both slices must have the bound dimensionality.
    ///
    /// Every term depends on `|x_i - y_i|` only, so swapping the operands
    /// gives a bit-identical result.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension());
        debug_assert_eq!(y.len(), self.dimension());
        let p = self.p;
        let diffs = x.iter().zip(y).map(|(a, b)| (a - b).abs());
        match self.descriptor.family {
            Family::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Family::CityBlock => diffs.sum(),
            Family::Minkowski => root(diffs.map(|d| power(d, p)).sum(), p),
            Family::WeightedMinkowski => root(
                diffs
                    .zip(&self.weights)
                    .map(|(d, w)| w * power(d, p))
                    .sum(),
                p,
            ),
            Family::ExpWeighted => root(
                diffs
                    .zip(self.weights.iter().zip(&self.scales))
                    .map(|(d, (w, r))| power((w * d / r).exp_m1(), p))
                    .sum(),
                p,
            ),
        }
    }
}

fn power(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else if p.fract() == 0.0 && p <= 32.0 {
        d.powi(p as i32)
    } else {
        d.powf(p)
    }
}

fn root(s: f64, p: f64) -> f64 {
    if p == 1.0 {
        s
    } else if p == 2.0 {
        s.sqrt()
    } else {
        s.powf(p.recip())
    }
}

/// Wire form of a metric selection: a registered name plus overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRequest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MetricRequest {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            p: None,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistryEntry {
    pub name: String,
    pub family: Family,
    pub p: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub claims_triangle_inequality: bool,
}

/// Named metric templates, enumerated in registration order.
#[derive(Debug, Clone)]
pub struct MetricRegistry {
    entries: Vec<(String, MetricDescriptor)>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl MetricRegistry {
    /// A registry holding the five built-in families under their own names.
    pub fn new() -> Self {
        let entries = Family::ALL
            .iter()
            .map(|&f| (f.name().to_string(), MetricDescriptor::new(f)))
            .collect();
        Self { entries }
    }

    pub fn register(&mut self, name: impl Into<String>, template: MetricDescriptor) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::contract("metric name must not be empty"));
        }
        if self.get(&name).is_some() {
            return Err(Error::Conflict(format!("metric {name:?} already registered")));
        }
        if let Some(p) = template.p {
            if !p.is_finite() || p < 1.0 {
                return Err(Error::contract(format!("exponent p must be >= 1, got {p}")));
            }
        }
        self.entries.push((name, template));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&MetricDescriptor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn list(&self) -> Vec<RegistryEntry> {
        self.entries
            .iter()
            .map(|(name, d)| RegistryEntry {
                name: name.clone(),
                family: d.family,
                p: d.p,
                weights: d.weights.clone(),
                claims_triangle_inequality: d.claims_triangle_inequality(),
            })
            .collect()
    }

    /// Instantiates a registered template, applying per-query overrides.
    pub fn instantiate(&self, request: &MetricRequest) -> Result<MetricDescriptor> {
        let mut d = self
            .get(&request.name)
            .cloned()
            .ok_or_else(|| Error::not_found("metric", &request.name))?;
        if let Some(p) = request.p {
            d.p = Some(p);
        }
        if let Some(w) = &request.weights {
            d.weights = Some(w.clone());
        }
        Ok(d)
    }
}

/// One failed axiom check. Elements are reported by COD.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    Symmetry { a: i64, b: i64, ab: f64, ba: f64 },
    Identity { a: i64, aa: f64 },
    Negativity { a: i64, b: i64, ab: f64 },
    /// Distinct vectors at distance zero.
    Indiscernible { a: i64, b: i64 },
    Triangle {
        a: i64,
        b: i64,
        via: i64,
        direct: f64,
        detour: f64,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ViolationCounts {
    pub symmetry: usize,
    pub identity: usize,
    pub negativity: usize,
    pub indiscernible: usize,
    pub triangle: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub sample_size: usize,
    pub tolerance: f64,
    pub counts: ViolationCounts,
    /// The first few violations of each kind.
    pub examples: Vec<Violation>,
}

impl AxiomReport {
    const EXAMPLES_PER_KIND: usize = 8;

    pub fn is_metric(&self) -> bool {
        let c = &self.counts;
        c.symmetry + c.identity + c.negativity + c.indiscernible + c.triangle == 0
    }

    /// Metric apart from distinct elements at distance zero.
    pub fn is_pseudo_metric(&self) -> bool {
        let c = &self.counts;
        c.symmetry + c.identity + c.negativity + c.triangle == 0
    }

    fn record(&mut self, v: Violation) {
        let (count, same_kind) = match &v {
            Violation::Symmetry { .. } => (&mut self.counts.symmetry, 0),
            Violation::Identity { .. } => (&mut self.counts.identity, 1),
            Violation::Negativity { .. } => (&mut self.counts.negativity, 2),
            Violation::Indiscernible { .. } => (&mut self.counts.indiscernible, 3),
            Violation::Triangle { .. } => (&mut self.counts.triangle, 4),
        };
        *count += 1;
        let kept = self
            .examples
            .iter()
            .filter(|e| kind(e) == same_kind)
            .count();
        if kept < Self::EXAMPLES_PER_KIND {
            self.examples.push(v);
        }
    }
}

fn kind(v: &Violation) -> u8 {
    match v {
        Violation::Symmetry { .. } => 0,
        Violation::Identity { .. } => 1,
        Violation::Negativity { .. } => 2,
        Violation::Indiscernible { .. } => 3,
        Violation::Triangle { .. } => 4,
    }
}

/// Brute-force check of the metric axioms over every pair and triple of
/// `sample`. Each comparison allows `tol`, relative to the magnitudes
/// involved for symmetry and the triangle inequality, absolute for the
/// zero checks.
pub fn validate_axioms(metric: &Metric, sample: &[FeatureVector], tol: f64) -> Result<AxiomReport> {
    if sample.len() < 3 {
        return Err(Error::contract("axiom validation needs at least 3 elements"));
    }
    let n = sample.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = metric.between(&sample[i], &sample[j])?;
        }
    }
    let d = |i: usize, j: usize| dist[i * n + j];
    let cod = |i: usize| sample[i].cod;

    let mut report = AxiomReport {
        sample_size: n,
        tolerance: tol,
        counts: ViolationCounts::default(),
        examples: Vec::new(),
    };

    for i in 0..n {
        if d(i, i).abs() > tol {
            report.record(Violation::Identity { a: cod(i), aa: d(i, i) });
        }
        for j in (i + 1)..n {
            let (ab, ba) = (d(i, j), d(j, i));
            if (ab - ba).abs() > tol * ab.abs().max(ba.abs()) {
                report.record(Violation::Symmetry {
                    a: cod(i),
                    b: cod(j),
                    ab,
                    ba,
                });
            }
            if ab < 0.0 || ba < 0.0 {
                report.record(Violation::Negativity {
                    a: cod(i),
                    b: cod(j),
                    ab: ab.min(ba),
                });
            } else if ab <= tol && sample[i].values != sample[j].values {
                report.record(Violation::Indiscernible { a: cod(i), b: cod(j) });
            }
        }
    }

    for i in 0..n {
        for j in (i + 1)..n {
            let direct = d(i, j);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let detour = d(i, k) + d(k, j);
                if direct - detour > tol * direct.max(detour) {
                    report.record(Violation::Triangle {
                        a: cod(i),
                        b: cod(j),
                        via: cod(k),
                        direct,
                        detour,
                    });
                }
            }
        }
    }
    Ok(report)
}
