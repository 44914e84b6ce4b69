//! Request shapes shared by the HTTP routes and the CLI.

use std::collections::HashMap;

use metricscope_core::dataset::Dataset;
use metricscope_core::index::{Center, QuerySpec};
use metricscope_core::metrics::{Family, MetricDescriptor, MetricRegistry, MetricRequest};
use metricscope_core::views::{Bounds, Direction, NormSource, Technique, ViewParams};
use metricscope_core::workspace::neighbours_to_k;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Neighbours besides the centre; a COD centre adds one to `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeRequest {
    pub radius: f64,
}

/// Body of `POST /queries`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub dataset: String,
    pub metric: MetricRequest,
    pub center: Center,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn: Option<KnnRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<RangeRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl QueryRequest {
    pub fn to_spec(&self, registry: &MetricRegistry) -> ApiResult<QuerySpec> {
        let metric = registry.instantiate(&self.metric)?;
        match (&self.knn, &self.range) {
            (Some(knn), None) => {
                let k = match (knn.k, knn.neighbors) {
                    (Some(k), None) => k,
                    (None, Some(n)) => neighbours_to_k(&self.center, n),
                    _ => return Err(ApiError::bad_request("knn takes exactly one of k or neighbors")),
                };
                Ok(QuerySpec::knn(&self.dataset, metric, self.center.clone(), k))
            }
            (None, Some(range)) => Ok(QuerySpec::range(&self.dataset, metric, self.center.clone(), range.radius)),
            _ => Err(ApiError::bad_request("a query needs exactly one of knn or range")),
        }
    }
}

/// Body of `POST /metrics`: a named template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricTemplate {
    pub name: String,
    pub family: Family,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl MetricTemplate {
    pub fn descriptor(&self) -> MetricDescriptor {
        MetricDescriptor {
            family: self.family,
            p: self.p,
            weights: self.weights.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickRequest {
    pub cod: i64,
}

pub fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        ApiError::bad_request(format!("invalid request body: {e}"))
            .with_detail(serde_json::json!({ "line": e.line(), "column": e.column() }))
    })
}

pub fn parse_list<T: std::str::FromStr>(what: &str, text: &str) -> ApiResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ApiError::bad_request(format!("{what}: cannot parse {s:?}")))
        })
        .collect()
}

pub fn parse_one<T: std::str::FromStr>(what: &str, text: &str) -> ApiResult<T> {
    text.trim()
        .parse()
        .map_err(|_| ApiError::bad_request(format!("{what}: cannot parse {text:?}")))
}

/// Metric selection from `metric`, `p` and `weights` query parameters.
pub fn metric_from_params(params: &HashMap<String, String>) -> ApiResult<MetricRequest> {
    Ok(MetricRequest {
        name: params.get("metric").cloned().unwrap_or_else(|| "euclidean".into()),
        p: params.get("p").map(|p| parse_one("p", p)).transpose()?,
        weights: params.get("weights").map(|w| parse_list("weights", w)).transpose()?,
    })
}

fn attribute(ds: &Dataset, params: &HashMap<String, String>, key: &str) -> ApiResult<usize> {
    let raw = params
        .get(key)
        .ok_or_else(|| ApiError::bad_request(format!("missing parameter {key}")))?;
    ds.attribute_index(raw)
        .ok_or_else(|| ApiError::bad_request(format!("{key}: no attribute {raw:?}")))
}

fn norm(params: &HashMap<String, String>) -> ApiResult<NormSource> {
    match params.get("norm").map(String::as_str) {
        None | Some("dataset") => Ok(NormSource::Dataset),
        Some("result_set") => Ok(NormSource::ResultSet),
        Some("explicit") => {
            let raw = params
                .get("bounds")
                .ok_or_else(|| ApiError::bad_request("norm=explicit needs bounds=min:max,..."))?;
            raw.split(',')
                .map(|pair| {
                    let (lo, hi) = pair
                        .split_once(':')
                        .ok_or_else(|| ApiError::bad_request(format!("bounds: expected min:max, got {pair:?}")))?;
                    Ok(Bounds {
                        min: parse_one("bounds", lo)?,
                        max: parse_one("bounds", hi)?,
                    })
                })
                .collect::<ApiResult<Vec<_>>>()
                .map(NormSource::Explicit)
        }
        Some(other) => Err(ApiError::bad_request(format!("unknown norm {other:?}"))),
    }
}

pub fn technique(name: &str) -> ApiResult<Technique> {
    Technique::parse(name).ok_or_else(|| ApiError::unsupported(format!("unknown view technique {name:?}")))
}

/// Parameters accepted per technique, besides `format`.
fn allowed(t: Technique) -> &'static [&'static str] {
    match t {
        Technique::ParallelCoordinates => &["axis_order", "norm", "bounds"],
        Technique::Scatter => &["x", "y"],
        Technique::TableLens => &["sort", "direction", "norm", "bounds"],
        Technique::Star => &["norm", "bounds"],
    }
}

/// View parameters from query-string style key/value pairs. Attributes may
/// be given by index or by name.
pub fn view_params(ds: &Dataset, t: Technique, params: &HashMap<String, String>) -> ApiResult<ViewParams> {
    let mut keys: Vec<&String> = params.keys().collect();
    keys.sort();
    if let Some(k) = keys.into_iter().find(|k| *k != "format" && !allowed(t).contains(&k.as_str())) {
        return Err(ApiError::bad_request(format!("unknown parameter {k:?} for {}", t.name())));
    }
    Ok(match t {
        Technique::ParallelCoordinates => ViewParams::ParallelCoordinates {
            axis_order: params
                .get("axis_order")
                .map(|raw| {
                    raw.split(',')
                        .map(|a| {
                            ds.attribute_index(a.trim())
                                .ok_or_else(|| ApiError::bad_request(format!("axis_order: no attribute {a:?}")))
                        })
                        .collect::<ApiResult<Vec<_>>>()
                })
                .transpose()?,
            norm: norm(params)?,
        },
        Technique::Scatter => ViewParams::Scatter {
            x: attribute(ds, params, "x")?,
            y: attribute(ds, params, "y")?,
        },
        Technique::TableLens => ViewParams::TableLens {
            sort: attribute(ds, params, "sort")?,
            direction: match params.get("direction").map(String::as_str) {
                None | Some("asc") => Direction::Asc,
                Some("desc") => Direction::Desc,
                Some(other) => return Err(ApiError::bad_request(format!("unknown direction {other:?}"))),
            },
            norm: norm(params)?,
        },
        Technique::Star => ViewParams::Star { norm: norm(params)? },
    })
}
