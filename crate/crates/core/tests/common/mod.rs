#![allow(dead_code)]

// Reference implementations used as oracles. They are written straight from
// the formulas, without the fast paths of the library.

use metricscope_core::dataset::{Cod, Dataset};
use metricscope_core::metrics::{Family, MetricDescriptor};

pub fn reference_distance(d: &MetricDescriptor, ranges: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let p = match d.family {
        Family::Euclidean => 2.0,
        Family::CityBlock => 1.0,
        _ => d.p.unwrap_or(2.0),
    };
    let w = match (&d.weights, d.family) {
        (Some(w), Family::WeightedMinkowski | Family::ExpWeighted) => w.clone(),
        _ => vec![1.0; n],
    };
    let mut sum = 0.0;
    for i in 0..n {
        let diff = (x[i] - y[i]).abs();
        let term = match d.family {
            Family::ExpWeighted => {
                let r = if ranges[i] > 0.0 { ranges[i] } else { 1.0 };
                ((w[i] * diff / r).exp() - 1.0).powf(p)
            }
            _ => w[i] * diff.powf(p),
        };
        sum += term;
    }
    sum.powf(1.0 / p)
}

pub fn ranges(ds: &Dataset) -> Vec<f64> {
    ds.stats().iter().map(|s| s.max - s.min).collect()
}

/// Every row with its reference distance, fully sorted by (distance, cod).
pub fn brute_force_sorted(ds: &Dataset, d: &MetricDescriptor, center: &[f64]) -> Vec<(Cod, f64)> {
    let r = ranges(ds);
    let mut all: Vec<(Cod, f64)> = ds
        .rows()
        .iter()
        .map(|row| (row.cod, reference_distance(d, &r, center, &row.values)))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

pub fn assert_close_entries(got: &[(Cod, f64)], want: &[(Cod, f64)]) {
    assert_eq!(got.len(), want.len(), "length differs");
    for (g, w) in got.iter().zip(want) {
        assert_eq!(g.0, w.0, "cod order differs: got {got:?}\nwant {want:?}");
        assert!(
            (g.1 - w.1).abs() <= 1e-9 * w.1.abs().max(1.0),
            "distance for {} differs: {} vs {}",
            g.0,
            g.1,
            w.1
        );
    }
}
