//! Sessions and workspaces.
//!
//! Every similarity query run through a [`Session`] produces a
//! [`Workspace`]: the result set, a FastMap projection of just those rows,
//! and a cache of view models derived from them. Picking an element of a
//! workspace yields a query template centred on it, and running that
//! template creates a child workspace, so the analysis forms a tree of
//! workspaces linked by provenance.
//!
//! Workspace payloads are immutable once published. A session can be
//! written to a directory (dataset copies plus a JSON manifest of the
//! queries and seeds) and replayed; results are recomputed, not stored.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Cod, Dataset, FeatureVector};
use crate::error::{Error, Result};
use crate::fastmap::{self, Projection3D};
use crate::index::{self, Center, QuerySpec, QueryStats, ResultSet, VpTree};
use crate::metrics::{Metric, MetricDescriptor, MetricRegistry};
use crate::views::{self, ViewModel, ViewParams};

pub const DEFAULT_SEED: u64 = 42;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub query: QuerySpec,
    pub parent: Option<String>,
    pub created_unix_ms: u64,
    pub seed: u64,
}

/// One query's result set, its projection and the views derived from it.
#[derive(Debug)]
pub struct Workspace {
    id: String,
    provenance: Provenance,
    result: ResultSet,
    stats: QueryStats,
    projection: Projection3D,
    rows: Vec<FeatureVector>,
    dataset: Arc<Dataset>,
    views: Mutex<HashMap<String, Arc<ViewModel>>>,
}

/// A query pre-filled from a workspace element, to be adjusted and run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplate {
    pub query: QuerySpec,
    pub parent: String,
}

impl Workspace {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn result(&self) -> &ResultSet {
        &self.result
    }

    pub fn stats(&self) -> &QueryStats {
        &self.stats
    }

    pub fn projection(&self) -> &Projection3D {
        &self.projection
    }

    /// Result rows, in result order.
    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    /// Derives a view, or returns the cached one for equivalent params.
    pub fn derive_view(&self, params: &ViewParams) -> Result<Arc<ViewModel>> {
        let key = params.cache_key(self.dataset.dimension());
        if let Some(v) = self.views.lock().get(&key) {
            return Ok(Arc::clone(v));
        }
        let view = Arc::new(views::derive(&self.dataset, &self.rows, params)?);
        Ok(Arc::clone(self.views.lock().entry(key).or_insert(view)))
    }

    pub fn cached_views(&self) -> usize {
        self.views.lock().len()
    }

    /// A template centred on `cod` with this workspace's metric and kind.
    pub fn pick_center(&self, cod: Cod) -> Result<QueryTemplate> {
        if !self.result.contains(cod) {
            return Err(Error::not_found("COD in workspace", cod));
        }
        let mut query = self.provenance.query.clone();
        query.center = Center::Cod(cod);
        Ok(QueryTemplate {
            query,
            parent: self.id.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentState {
    None,
    Live,
    Closed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestDataset {
    pub id: String,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestWorkspace {
    pub id: String,
    pub parent: Option<String>,
    pub query: QuerySpec,
    pub seed: u64,
    #[serde(default)]
    pub closed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub datasets: Vec<ManifestDataset>,
    pub workspaces: Vec<ManifestWorkspace>,
}

/// Loaded datasets, cached overview projections and live workspaces.
pub struct Session {
    seed: u64,
    registry: RwLock<MetricRegistry>,
    datasets: RwLock<Vec<(String, Arc<Dataset>)>>,
    overviews: Mutex<HashMap<(String, String), Arc<Projection3D>>>,
    trees: Mutex<HashMap<(String, String), Arc<VpTree>>>,
    workspaces: RwLock<Vec<Arc<Workspace>>>,
    closed: RwLock<HashSet<String>>,
    history: Mutex<Vec<ManifestWorkspace>>,
    next_dataset: AtomicU64,
    next_workspace: AtomicU64,
}

impl Default for Session {
    fn default() -> Self {
        Self::new(DEFAULT_SEED)
    }
}

impl Session {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            registry: RwLock::new(MetricRegistry::new()),
            datasets: RwLock::new(Vec::new()),
            overviews: Mutex::new(HashMap::new()),
            trees: Mutex::new(HashMap::new()),
            workspaces: RwLock::new(Vec::new()),
            closed: RwLock::new(HashSet::new()),
            history: Mutex::new(Vec::new()),
            next_dataset: AtomicU64::new(1),
            next_workspace: AtomicU64::new(1),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn registry(&self) -> parking_lot::RwLockReadGuard<'_, MetricRegistry> {
        self.registry.read()
    }

    pub fn register_metric(&self, name: &str, template: MetricDescriptor) -> Result<()> {
        self.registry.write().register(name, template)
    }

    /// Publishes a dataset and returns its handle.
    pub fn add_dataset(&self, ds: Dataset) -> String {
        let mut datasets = self.datasets.write();
        let id = format!("ds-{}", self.next_dataset.fetch_add(1, Ordering::SeqCst));
        datasets.push((id.clone(), Arc::new(ds)));
        id
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<Dataset>> {
        self.datasets
            .read()
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, d)| Arc::clone(d))
            .ok_or_else(|| Error::not_found("dataset", id))
    }

    pub fn dataset_ids(&self) -> Vec<String> {
        self.datasets.read().iter().map(|(i, _)| i.clone()).collect()
    }

    /// Seed for a projection, derived from the session seed and a label.
    pub fn derive_seed(&self, label: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(label.as_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    fn query_seed(&self, q: &QuerySpec) -> u64 {
        let label = serde_json::to_string(q).expect("query serializes");
        self.derive_seed(&format!("workspace:{label}"))
    }

    /// Full-dataset projection, cached per (dataset, metric).
    pub fn overview(&self, dataset_id: &str, descriptor: &MetricDescriptor) -> Result<Arc<Projection3D>> {
        let ds = self.dataset(dataset_id)?;
        let metric = Metric::bind(descriptor, &ds)?;
        let key = (dataset_id.to_string(), descriptor.canonical_key());
        if let Some(p) = self.overviews.lock().get(&key) {
            return Ok(Arc::clone(p));
        }
        let seed = self.derive_seed(&format!("overview:{}:{}", key.0, key.1));
        let projection = Arc::new(fastmap::project(ds.rows(), &metric, seed));
        Ok(Arc::clone(self.overviews.lock().entry(key).or_insert(projection)))
    }

    fn tree(&self, dataset_id: &str, ds: &Dataset, descriptor: &MetricDescriptor) -> Result<Arc<VpTree>> {
        let key = (dataset_id.to_string(), descriptor.canonical_key());
        if let Some(t) = self.trees.lock().get(&key) {
            return Ok(Arc::clone(t));
        }
        let seed = self.derive_seed(&format!("tree:{}:{}", key.0, key.1));
        let tree = Arc::new(VpTree::build(ds, descriptor, seed)?);
        Ok(Arc::clone(self.trees.lock().entry(key).or_insert(tree)))
    }

    /// Runs `q` and registers the resulting workspace.
    pub fn run_query(&self, q: &QuerySpec, parent: Option<&str>) -> Result<Arc<Workspace>> {
        let seed = self.query_seed(q);
        self.run_query_seeded(q, parent, seed)
    }

    pub fn run_template(&self, t: &QueryTemplate) -> Result<Arc<Workspace>> {
        self.run_query(&t.query, Some(&t.parent))
    }

    fn run_query_seeded(&self, q: &QuerySpec, parent: Option<&str>, seed: u64) -> Result<Arc<Workspace>> {
        let ds = self.dataset(&q.dataset)?;
        if let Some(p) = parent {
            if !self.knows_workspace(p) {
                return Err(Error::not_found("workspace", p));
            }
        }
        q.validate_kind()?;
        let metric = Metric::bind(&q.metric, &ds)?;

        let execution = if q.metric.claims_triangle_inequality() {
            self.tree(&q.dataset, &ds, &q.metric)?.query(q)?
        } else {
            index::scan(&ds, q)?
        };
        let rows = ds.select(&execution.result.cods())?;
        let projection = fastmap::project(&rows, &metric, seed);

        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or_default();

        let mut live = self.workspaces.write();
        let id = format!("ws-{}", self.next_workspace.fetch_add(1, Ordering::SeqCst));
        let ws = Arc::new(Workspace {
            id: id.clone(),
            provenance: Provenance {
                query: q.clone(),
                parent: parent.map(str::to_owned),
                created_unix_ms,
                seed,
            },
            result: execution.result,
            stats: execution.stats,
            projection,
            rows,
            dataset: ds,
            views: Mutex::new(HashMap::new()),
        });
        live.push(Arc::clone(&ws));
        self.history.lock().push(ManifestWorkspace {
            id,
            parent: parent.map(str::to_owned),
            query: q.clone(),
            seed,
            closed: false,
        });
        Ok(ws)
    }

    fn knows_workspace(&self, id: &str) -> bool {
        self.closed.read().contains(id) || self.workspaces.read().iter().any(|w| w.id == id)
    }

    pub fn workspace(&self, id: &str) -> Result<Arc<Workspace>> {
        self.workspaces
            .read()
            .iter()
            .find(|w| w.id == id)
            .cloned()
            .ok_or_else(|| Error::not_found("workspace", id))
    }

    pub fn workspaces(&self) -> Vec<Arc<Workspace>> {
        self.workspaces.read().clone()
    }

    pub fn parent_state(&self, ws: &Workspace) -> ParentState {
        match &ws.provenance.parent {
            None => ParentState::None,
            Some(p) if self.closed.read().contains(p) => ParentState::Closed,
            Some(_) => ParentState::Live,
        }
    }

    /// Ancestor ids, nearest first. Follows links through closed workspaces
    /// using the session history.
    pub fn ancestry(&self, id: &str) -> Vec<String> {
        let history = self.history.lock();
        let parent_of = |i: &str| {
            history
                .iter()
                .find(|w| w.id == i)
                .and_then(|w| w.parent.clone())
        };
        let mut chain = Vec::new();
        let mut at = parent_of(id);
        while let Some(p) = at {
            if chain.contains(&p) {
                break;
            }
            at = parent_of(&p);
            chain.push(p);
        }
        chain
    }

    pub fn is_closed(&self, id: &str) -> bool {
        self.closed.read().contains(id)
    }

    /// Closes a live workspace. Closing one twice is a conflict.
    pub fn close_workspace(&self, id: &str) -> Result<()> {
        if self.is_closed(id) {
            return Err(Error::Conflict(format!("workspace {id} is already closed")));
        }
        let mut live = self.workspaces.write();
        let pos = live
            .iter()
            .position(|w| w.id == id)
            .ok_or_else(|| Error::not_found("workspace", id))?;
        live.remove(pos);
        self.closed.write().insert(id.to_string());
        if let Some(h) = self.history.lock().iter_mut().find(|w| w.id == id) {
            h.closed = true;
        }
        Ok(())
    }

    pub fn manifest(&self, dataset_files: impl Fn(&str) -> String) -> Manifest {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            seed: self.seed,
            datasets: self
                .dataset_ids()
                .into_iter()
                .map(|id| ManifestDataset {
                    file: dataset_files(&id),
                    id,
                })
                .collect(),
            workspaces: self.history.lock().clone(),
        }
    }

    /// Writes dataset copies and the manifest into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (id, ds) in self.datasets.read().iter() {
            let file = std::fs::File::create(dir.join(format!("{id}.csv")))?;
            ds.write_csv(std::io::BufWriter::new(file))?;
        }
        let manifest = self.manifest(|id| format!("{id}.csv"));
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Rebuilds a session from a directory written by [`Session::save`].
    pub fn replay(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Unsupported(format!(
                "manifest schema version {}",
                manifest.schema_version
            )));
        }
        let session = Session::new(manifest.seed);
        for d in &manifest.datasets {
            let id = session.add_dataset(Dataset::from_path(dir.join(&d.file))?);
            if id != d.id {
                return Err(Error::Integrity(format!(
                    "manifest dataset {} replayed as {id}",
                    d.id
                )));
            }
        }
        for w in &manifest.workspaces {
            let ws = session.run_query_seeded(&w.query, w.parent.as_deref(), w.seed)?;
            if ws.id != w.id {
                return Err(Error::Integrity(format!(
                    "manifest workspace {} replayed as {}",
                    w.id, ws.id
                )));
            }
            if w.closed {
                session.close_workspace(&w.id)?;
            }
        }
        Ok(session)
    }
}

/// Resolves the paper-style "k neighbours of record c" request into the
/// engine's k, which counts the centre itself when it is a dataset element.
pub fn neighbours_to_k(center: &Center, neighbours: usize) -> usize {
    match center {
        Center::Cod(_) => neighbours + 1,
        Center::Vector(_) => neighbours,
    }
}
