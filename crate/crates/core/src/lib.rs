//! Content-based retrieval over tabular feature data.
//!
//! Load a feature table ([`dataset`]), pick a distance function
//! ([`metrics`]), run k-nearest-neighbour or range queries ([`index`]),
//! project result sets to three dimensions with FastMap ([`fastmap`]) and
//! turn them into view models for parallel coordinates, scatter plots,
//! table lens and star coordinates ([`views`]). A [`workspace::Session`]
//! ties these together: every query spawns a workspace, and any element of a
//! workspace can seed the next query.

pub mod dataset;
pub mod error;
pub mod fastmap;
pub mod index;
pub mod metrics;
pub mod svg;
pub mod synthetic;
pub mod views;
pub mod workspace;

#[cfg(doctest)]
mod book;

pub use dataset::{Cod, Dataset, FeatureVector};
pub use error::{Error, Result};
pub use metrics::{Family, Metric, MetricDescriptor, MetricRegistry};
