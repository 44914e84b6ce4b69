//! Render-ready view models for a set of rows.
//!
//! Views carry geometry and metadata only. Values are normalized to
//! `[0, 1]` per attribute with `(v - min) / (max - min)`; by default the
//! bounds come from the whole dataset so that workspace views stay
//! comparable with the overview. Attributes whose range is zero map to 0.5.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dataset::{Cod, Dataset, FeatureVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    ParallelCoordinates,
    Scatter,
    TableLens,
    Star,
}

impl Technique {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "parallel_coordinates" => Some(Self::ParallelCoordinates),
            "scatter" => Some(Self::Scatter),
            "table_lens" => Some(Self::TableLens),
            "star" => Some(Self::Star),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ParallelCoordinates => "parallel_coordinates",
            Self::Scatter => "scatter",
            Self::TableLens => "table_lens",
            Self::Star => "star",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// Where normalization bounds come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSource {
    #[default]
    Dataset,
    ResultSet,
    Explicit(Vec<Bounds>),
}

impl NormSource {
    fn bounds(&self, ds: &Dataset, rows: &[FeatureVector]) -> Result<Vec<Bounds>> {
        match self {
            NormSource::Dataset => Ok(ds
                .stats()
                .iter()
                .map(|s| Bounds {
                    min: s.min,
                    max: s.max,
                })
                .collect()),
            NormSource::ResultSet => Ok(row_bounds(ds.dimension(), rows)),
            NormSource::Explicit(b) if b.len() == ds.dimension() => Ok(b.clone()),
            NormSource::Explicit(b) => Err(Error::contract(format!(
                "expected {} bounds, got {}",
                ds.dimension(),
                b.len()
            ))),
        }
    }
}

fn row_bounds(n: usize, rows: &[FeatureVector]) -> Vec<Bounds> {
    (0..n)
        .map(|j| {
            let (min, max) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.values[j]), hi.max(r.values[j]))
            });
            if min <= max {
                Bounds { min, max }
            } else {
                Bounds { min: 0.0, max: 0.0 }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

/// Request parameters for one view, tagged by technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technique", rename_all = "snake_case")]
pub enum ViewParams {
    ParallelCoordinates {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis_order: Option<Vec<usize>>,
        #[serde(default)]
        norm: NormSource,
    },
    Scatter {
        x: usize,
        y: usize,
    },
    TableLens {
        sort: usize,
        #[serde(default)]
        direction: Direction,
        #[serde(default)]
        norm: NormSource,
    },
    Star {
        #[serde(default)]
        norm: NormSource,
    },
}

impl ViewParams {
    pub fn technique(&self) -> Technique {
        match self {
            ViewParams::ParallelCoordinates { .. } => Technique::ParallelCoordinates,
            ViewParams::Scatter { .. } => Technique::Scatter,
            ViewParams::TableLens { .. } => Technique::TableLens,
            ViewParams::Star { .. } => Technique::Star,
        }
    }

    /// Fills defaults so that equivalent requests compare equal.
    pub fn canonical(&self, n: usize) -> Self {
        match self {
            ViewParams::ParallelCoordinates { axis_order, norm } => ViewParams::ParallelCoordinates {
                axis_order: Some(axis_order.clone().unwrap_or_else(|| (0..n).collect())),
                norm: norm.clone(),
            },
            other => other.clone(),
        }
    }

    pub fn cache_key(&self, n: usize) -> String {
        serde_json::to_string(&self.canonical(n)).expect("view params serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMeta {
    pub label: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub cod: Cod,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub cod: Cod,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensRow {
    pub cod: Cod,
    /// Normalized magnitude per attribute, for bar lengths.
    pub cells: Vec<f64>,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Items {
    Polylines(Vec<Polyline>),
    Points(Vec<Point2>),
    Rows(Vec<LensRow>),
}

impl Items {
    pub fn len(&self) -> usize {
        match self {
            Items::Polylines(v) => v.len(),
            Items::Points(v) => v.len(),
            Items::Rows(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cods(&self) -> Vec<Cod> {
        match self {
            Items::Polylines(v) => v.iter().map(|i| i.cod).collect(),
            Items::Points(v) => v.iter().map(|i| i.cod).collect(),
            Items::Rows(v) => v.iter().map(|i| i.cod).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewModel {
    pub technique: Technique,
    pub items: Items,
    pub axes: Vec<AxisMeta>,
    /// Star coordinates only: the unit vector of each attribute axis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axis_vectors: Vec<[f64; 2]>,
    pub params: ViewParams,
}

fn check_attr(ds: &Dataset, a: usize) -> Result<()> {
    if a < ds.dimension() {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "attribute index {a} out of range (dataset has {})",
            ds.dimension()
        )))
    }
}

fn axes_for(ds: &Dataset, order: &[usize], bounds: &[Bounds]) -> Vec<AxisMeta> {
    order
        .iter()
        .map(|&j| AxisMeta {
            label: ds.attributes()[j].clone(),
            min: bounds[j].min,
            max: bounds[j].max,
        })
        .collect()
}

pub fn parallel_coordinates(
    ds: &Dataset,
    rows: &[FeatureVector],
    axis_order: &[usize],
    norm: &NormSource,
) -> Result<ViewModel> {
    let n = ds.dimension();
    let mut seen = vec![false; n];
    if axis_order.len() != n
        || axis_order
            .iter()
            .any(|&j| j >= n || std::mem::replace(&mut seen[j], true))
    {
        return Err(Error::contract(format!(
            "axis order {axis_order:?} is not a permutation of 0..{n}"
        )));
    }
    let bounds = norm.bounds(ds, rows)?;
    let lines = rows
        .iter()
        .map(|r| Polyline {
            cod: r.cod,
            values: axis_order
                .iter()
                .map(|&j| bounds[j].normalize(r.values[j]))
                .collect(),
        })
        .collect();
    Ok(ViewModel {
        technique: Technique::ParallelCoordinates,
        items: Items::Polylines(lines),
        axes: axes_for(ds, axis_order, &bounds),
        axis_vectors: Vec::new(),
        params: ViewParams::ParallelCoordinates {
            axis_order: Some(axis_order.to_vec()),
            norm: norm.clone(),
        },
    })
}

/// Points in raw attribute units; axis bounds span the given rows.
pub fn scatter(ds: &Dataset, rows: &[FeatureVector], x: usize, y: usize) -> Result<ViewModel> {
    check_attr(ds, x)?;
    check_attr(ds, y)?;
    if x == y {
        return Err(Error::contract("scatter needs two different attributes"));
    }
    let bounds = row_bounds(ds.dimension(), rows);
    let points = rows
        .iter()
        .map(|r| Point2 {
            cod: r.cod,
            x: r.values[x],
            y: r.values[y],
        })
        .collect();
    Ok(ViewModel {
        technique: Technique::Scatter,
        items: Items::Points(points),
        axes: axes_for(ds, &[x, y], &bounds),
        axis_vectors: Vec::new(),
        params: ViewParams::Scatter { x, y },
    })
}

/// Rows sorted by one attribute (ties by ascending COD in both directions).
pub fn table_lens(
    ds: &Dataset,
    rows: &[FeatureVector],
    sort: usize,
    direction: Direction,
    norm: &NormSource,
) -> Result<ViewModel> {
    check_attr(ds, sort)?;
    let bounds = norm.bounds(ds, rows)?;
    let mut sorted: Vec<&FeatureVector> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        let by_value = a.values[sort].total_cmp(&b.values[sort]);
        let by_value = match direction {
            Direction::Asc => by_value,
            Direction::Desc => by_value.reverse(),
        };
        by_value.then(a.cod.cmp(&b.cod))
    });
    let lens = sorted
        .into_iter()
        .map(|r| LensRow {
            cod: r.cod,
            cells: r
                .values
                .iter()
                .zip(&bounds)
                .map(|(&v, b)| b.normalize(v))
                .collect(),
            raw: r.values.clone(),
        })
        .collect();
    let order: Vec<usize> = (0..ds.dimension()).collect();
    Ok(ViewModel {
        technique: Technique::TableLens,
        items: Items::Rows(lens),
        axes: axes_for(ds, &order, &bounds),
        axis_vectors: Vec::new(),
        params: ViewParams::TableLens {
            sort,
            direction,
            norm: norm.clone(),
        },
    })
}

/// Unit vectors at angles `2πi/n`. Quarter turns are exact, and for even
/// `n` the second half is the exact negation of the first.
pub fn star_axes(n: usize) -> Vec<[f64; 2]> {
    let unit = |i: usize| -> [f64; 2] {
        if (4 * i) % n == 0 {
            match (4 * i / n) % 4 {
                0 => [1.0, 0.0],
                1 => [0.0, 1.0],
                2 => [-1.0, 0.0],
                _ => [0.0, -1.0],
            }
        } else {
            let (s, c) = (TAU * i as f64 / n as f64).sin_cos();
            [c, s]
        }
    };
    let mut axes: Vec<[f64; 2]> = Vec::with_capacity(n);
    for i in 0..n {
        if n % 2 == 0 && i >= n / 2 {
            let [x, y] = axes[i - n / 2];
            axes.push([-x, -y]);
        } else {
            axes.push(unit(i));
        }
    }
    axes
}

/// `Σ u_i v_i` for normalized values `v`. For even `n` opposite axes are
/// combined first, `(v_i - v_{i+n/2}) u_i`, so balanced rows land exactly
/// on the origin.
pub fn star_position(axes: &[[f64; 2]], normalized: &[f64]) -> [f64; 2] {
    let n = axes.len();
    let mut pos = [0.0, 0.0];
    if n % 2 == 0 {
        for i in 0..n / 2 {
            let w = normalized[i] - normalized[i + n / 2];
            pos[0] += w * axes[i][0];
            pos[1] += w * axes[i][1];
        }
    } else {
        for (u, v) in axes.iter().zip(normalized) {
            pos[0] += v * u[0];
            pos[1] += v * u[1];
        }
    }
    pos
}

pub fn star(ds: &Dataset, rows: &[FeatureVector], norm: &NormSource) -> Result<ViewModel> {
    let n = ds.dimension();
    if n < 2 {
        return Err(Error::contract("star coordinates need at least 2 attributes"));
    }
    let bounds = norm.bounds(ds, rows)?;
    let axes = star_axes(n);
    let points = rows
        .iter()
        .map(|r| {
            let v: Vec<f64> = r
                .values
                .iter()
                .zip(&bounds)
                .map(|(&x, b)| b.normalize(x))
                .collect();
            let [x, y] = star_position(&axes, &v);
            Point2 { cod: r.cod, x, y }
        })
        .collect();
    let order: Vec<usize> = (0..n).collect();
    Ok(ViewModel {
        technique: Technique::Star,
        items: Items::Points(points),
        axes: axes_for(ds, &order, &bounds),
        axis_vectors: axes,
        params: ViewParams::Star { norm: norm.clone() },
    })
}

/// Dispatches on the technique named by `params`.
pub fn derive(ds: &Dataset, rows: &[FeatureVector], params: &ViewParams) -> Result<ViewModel> {
    match params.canonical(ds.dimension()) {
        ViewParams::ParallelCoordinates { axis_order, norm } => {
            parallel_coordinates(ds, rows, &axis_order.unwrap_or_default(), &norm)
        }
        ViewParams::Scatter { x, y } => scatter(ds, rows, x, y),
        ViewParams::TableLens {
            sort,
            direction,
            norm,
        } => table_lens(ds, rows, sort, direction, &norm),
        ViewParams::Star { norm } => star(ds, rows, &norm),
    }
}
