//! Python module `locorm`.
//!
//! Values cross the boundary as JSON, through the interpreter's own `json`
//! module, so records, filters and sort keys have the same shape as in
//! workload scripts. Dates are ISO strings.

use std::collections::BTreeMap;
use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value as Json};

use locorm::json::{self, FilterSpec};
use locorm::placement::{self, PolicyWeights, StoreMetrics};
use locorm::query::{self, QueryOptions, SortSpec};
use locorm::runtime::{Orm as CoreOrm, OrmConfig};
use locorm::schema::{LocationId, SchemaRegistry};
use locorm::storage::Timing;
use locorm::Value;

create_exception!(locorm, LocormError, PyException, "Raised when the runtime rejects an operation.");
create_exception!(locorm, SchemaError, LocormError, "Raised for an unreadable or inconsistent schema.");

fn to_json(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Json> {
    let Some(obj) = obj else { return Ok(Json::Null) };
    if obj.is_none() {
        return Ok(Json::Null);
    }
    let py = obj.py();
    let text: String = PyModule::import(py, "json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: Option<&Bound<'_, PyAny>>, what: &str) -> PyResult<T> {
    serde_json::from_value(to_json(obj)?).map_err(|e| PyValueError::new_err(format!("bad {what}: {e}")))
}

fn from_py_or_default<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>, what: &str) -> PyResult<T> {
    match obj {
        Some(o) if !o.is_none() => from_py(Some(o), what),
        _ => Ok(T::default()),
    }
}

fn values_map(obj: &Bound<'_, PyAny>) -> PyResult<Map<String, Json>> {
    match to_json(Some(obj))? {
        Json::Object(m) => Ok(m),
        other => Err(PyValueError::new_err(format!("values must be a dict, got {other}"))),
    }
}

fn value_err(msg: String) -> PyErr {
    PyValueError::new_err(msg)
}

fn orm_err(e: impl std::fmt::Display) -> PyErr {
    LocormError::new_err(e.to_string())
}

fn statement(py: Python<'_>, stmt: query::Statement) -> PyResult<(String, Py<PyAny>)> {
    Ok((stmt.text, to_py(py, &stmt.params)?))
}

fn query_options(
    registry: &SchemaRegistry,
    entity: &str,
    filter: Option<&Bound<'_, PyAny>>,
    sort: Option<&Bound<'_, PyAny>>,
    limit: Option<u64>,
    offset: Option<u64>,
) -> PyResult<QueryOptions> {
    let entity = json::entity(registry, entity).map_err(value_err)?;
    let spec: FilterSpec = from_py_or_default(filter, "filter")?;
    let sort: Vec<SortSpec> = from_py_or_default(sort, "sort")?;
    json::options(entity, &spec, &sort, limit, offset).map_err(value_err)
}

/// A registry of entities and stores, read from a JSON schema document.
#[pyclass(frozen, module = "locorm")]
struct Schema {
    registry: SchemaRegistry,
}

#[pymethods]
impl Schema {
    #[staticmethod]
    fn from_json(text: String) -> PyResult<Self> {
        let registry = SchemaRegistry::from_json_str(&text).map_err(|e| SchemaError::new_err(e.to_string()))?;
        Ok(Schema { registry })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| SchemaError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(text)
    }

    /// Problems found by cross-checking relations, as strings. Empty when
    /// the schema is consistent.
    fn validate(&self) -> Vec<String> {
        self.registry.validate().iter().map(|d| d.to_string()).collect()
    }

    fn entities(&self) -> Vec<String> {
        self.registry.entities().map(|e| e.name.clone()).collect()
    }

    fn locations(&self) -> Vec<String> {
        self.registry.stores().iter().map(|s| s.location.to_string()).collect()
    }

    #[pyo3(signature = (entity, filter=None, sort=None, limit=None, offset=None))]
    fn build_select(
        &self,
        py: Python<'_>,
        entity: &str,
        filter: Option<&Bound<'_, PyAny>>,
        sort: Option<&Bound<'_, PyAny>>,
        limit: Option<u64>,
        offset: Option<u64>,
    ) -> PyResult<(String, Py<PyAny>)> {
        let opts = query_options(&self.registry, entity, filter, sort, limit, offset)?;
        statement(py, query::build_select(&self.registry, entity, &opts).map_err(orm_err)?)
    }

    fn build_insert(&self, py: Python<'_>, entity: &str, values: &Bound<'_, PyAny>) -> PyResult<(String, Py<PyAny>)> {
        let desc = json::entity(&self.registry, entity).map_err(value_err)?;
        let rec = json::record(desc, &values_map(values)?, None).map_err(value_err)?;
        statement(py, query::build_insert(&self.registry, entity, &rec).map_err(orm_err)?)
    }

    #[pyo3(signature = (entity, values, filter=None))]
    fn build_update(
        &self,
        py: Python<'_>,
        entity: &str,
        values: &Bound<'_, PyAny>,
        filter: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<(String, Py<PyAny>)> {
        let desc = json::entity(&self.registry, entity).map_err(value_err)?;
        let rec = json::record(desc, &values_map(values)?, None).map_err(value_err)?;
        let spec: FilterSpec = from_py_or_default(filter, "filter")?;
        let expr = json::filter(desc, &spec).map_err(value_err)?;
        statement(py, query::build_update(&self.registry, entity, &rec.values, &expr).map_err(orm_err)?)
    }

    #[pyo3(signature = (entity, filter=None))]
    fn build_delete(&self, py: Python<'_>, entity: &str, filter: Option<&Bound<'_, PyAny>>) -> PyResult<(String, Py<PyAny>)> {
        let desc = json::entity(&self.registry, entity).map_err(value_err)?;
        let spec: FilterSpec = from_py_or_default(filter, "filter")?;
        let expr = json::filter(desc, &spec).map_err(value_err)?;
        statement(py, query::build_delete(&self.registry, entity, &expr).map_err(orm_err)?)
    }

    fn __repr__(&self) -> String {
        format!(
            "Schema(entities={}, stores={})",
            self.registry.entities().count(),
            self.registry.stores().len()
        )
    }
}

/// Runtime over every embedded store of a schema.
///
/// `delays` maps locations to seconds. With `simulated=True` (the default)
/// those delays are reported as latencies without sleeping; otherwise the
/// store sleeps for them and real elapsed time is measured.
#[pyclass(frozen, module = "locorm")]
struct Orm {
    inner: CoreOrm,
}

impl Orm {
    fn loc(&self, location: &str) -> LocationId {
        LocationId::new(location)
    }

    fn record(
        &self,
        entity: &str,
        values: &Bound<'_, PyAny>,
        location: Option<String>,
    ) -> PyResult<locorm::Record> {
        let desc = json::entity(self.inner.registry(), entity).map_err(value_err)?;
        json::record(desc, &values_map(values)?, location.map(LocationId::new)).map_err(value_err)
    }

    fn key(&self, entity: &str, key: &Bound<'_, PyAny>) -> PyResult<Value> {
        let desc = json::entity(self.inner.registry(), entity).map_err(value_err)?;
        json::key_for(desc, &to_json(Some(key))?).map_err(value_err)
    }

    fn relation_keys(&self, relation: &str, source: &Bound<'_, PyAny>, target: &Bound<'_, PyAny>) -> PyResult<(Value, Value)> {
        let rel = self
            .inner
            .registry()
            .resolve_relation(relation)
            .ok_or_else(|| orm_err(format!("unknown relation {relation}")))?;
        Ok((self.key(&rel.source, source)?, self.key(&rel.target, target)?))
    }
}

#[pymethods]
impl Orm {
    #[new]
    #[pyo3(signature = (schema, weights=None, metrics=None, delays=None, simulated=true))]
    fn new(
        schema: &Schema,
        weights: Option<&Bound<'_, PyAny>>,
        metrics: Option<&Bound<'_, PyAny>>,
        delays: Option<BTreeMap<String, f64>>,
        simulated: bool,
    ) -> PyResult<Self> {
        let weights: PolicyWeights = from_py_or_default(weights, "weights")?;
        let metrics: BTreeMap<LocationId, StoreMetrics> = from_py_or_default(metrics, "metrics")?;
        let mut timings = BTreeMap::new();
        for loc in schema.registry.stores().iter().map(|s| &s.location) {
            let secs = delays.as_ref().and_then(|d| d.get(loc.as_str())).copied().unwrap_or(0.0);
            let d = Duration::try_from_secs_f64(secs).map_err(|e| value_err(format!("delay for {loc}: {e}")))?;
            let timing = if simulated {
                Timing::Simulated { delay: d }
            } else {
                Timing::WallClock { extra_delay: d }
            };
            timings.insert(loc.clone(), timing);
        }
        let config = OrmConfig { weights, metrics, timings };
        let inner = CoreOrm::with_config(schema.registry.clone(), config).map_err(|e| SchemaError::new_err(e.to_string()))?;
        Ok(Orm { inner })
    }

    fn locations(&self) -> Vec<String> {
        self.inner.locations().iter().map(|l| l.to_string()).collect()
    }

    /// Inserts a record and returns `(key, location, decision)`. The
    /// decision is `None` when `location` was given.
    #[pyo3(signature = (entity, values, location=None))]
    fn insert(
        &self,
        py: Python<'_>,
        entity: &str,
        values: &Bound<'_, PyAny>,
        location: Option<String>,
    ) -> PyResult<(Py<PyAny>, String, Py<PyAny>)> {
        let rec = self.record(entity, values, location)?;
        let out = py.detach(|| self.inner.insert_explained(&rec)).map_err(orm_err)?;
        Ok((to_py(py, &out.key)?, out.location.to_string(), to_py(py, &out.decision)?))
    }

    #[pyo3(signature = (entity, filter=None, sort=None, limit=None, offset=None))]
    fn select(
        &self,
        py: Python<'_>,
        entity: &str,
        filter: Option<&Bound<'_, PyAny>>,
        sort: Option<&Bound<'_, PyAny>>,
        limit: Option<u64>,
        offset: Option<u64>,
    ) -> PyResult<Py<PyAny>> {
        let opts = query_options(self.inner.registry(), entity, filter, sort, limit, offset)?;
        let rows = py.detach(|| self.inner.select(entity, &opts)).map_err(orm_err)?;
        to_py(py, &rows)
    }

    /// Updates the row with the record's primary key at `location`.
    fn update(&self, py: Python<'_>, entity: &str, values: &Bound<'_, PyAny>, location: String) -> PyResult<u64> {
        let rec = self.record(entity, values, Some(location))?;
        py.detach(|| self.inner.update(&rec)).map_err(orm_err)
    }

    /// Deletes by primary key and returns the number of rows removed,
    /// cascades included.
    fn delete(&self, py: Python<'_>, entity: &str, key: &Bound<'_, PyAny>, location: &str) -> PyResult<u64> {
        let key = self.key(entity, key)?;
        let loc = self.loc(location);
        py.detach(|| self.inner.delete(entity, &key, &loc)).map_err(orm_err)
    }

    fn link(
        &self,
        py: Python<'_>,
        relation: &str,
        source: &Bound<'_, PyAny>,
        target: &Bound<'_, PyAny>,
        location: &str,
    ) -> PyResult<Py<PyAny>> {
        let (s, t) = self.relation_keys(relation, source, target)?;
        let loc = self.loc(location);
        let key = py.detach(|| self.inner.link(relation, &s, &t, &loc)).map_err(orm_err)?;
        to_py(py, &key)
    }

    fn unlink(&self, py: Python<'_>, relation: &str, source: &Bound<'_, PyAny>, target: &Bound<'_, PyAny>) -> PyResult<u64> {
        let (s, t) = self.relation_keys(relation, source, target)?;
        py.detach(|| self.inner.unlink(relation, &s, &t)).map_err(orm_err)
    }

    /// Parents of `relation` matching the filter, each with its children.
    #[pyo3(signature = (relation, filter=None, sort=None, limit=None, offset=None))]
    fn view(
        &self,
        py: Python<'_>,
        relation: &str,
        filter: Option<&Bound<'_, PyAny>>,
        sort: Option<&Bound<'_, PyAny>>,
        limit: Option<u64>,
        offset: Option<u64>,
    ) -> PyResult<Py<PyAny>> {
        let (parent, _) = self
            .inner
            .registry()
            .relation(relation)
            .ok_or_else(|| orm_err(format!("unknown relation {relation}")))?;
        let opts = query_options(self.inner.registry(), &parent.name, filter, sort, limit, offset)?;
        let rows = py.detach(|| self.inner.select_view(relation, &opts)).map_err(orm_err)?;
        to_py(py, &rows)
    }

    fn check_integrity(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let found = py.detach(|| self.inner.check_integrity()).map_err(orm_err)?;
        to_py(py, &found)
    }

    fn metrics(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.metrics())
    }

    /// Per-store statement count and mean latency.
    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let stats: BTreeMap<_, _> = self
            .inner
            .store_stats()
            .into_iter()
            .map(|(loc, s)| (loc, serde_json::json!({"ops": s.ops, "mean_latency": s.mean_latency()})))
            .collect();
        to_py(py, &stats)
    }

    fn dump(&self, py: Python<'_>, location: &str) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.dump(&self.loc(location)).map_err(orm_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Orm(locations={:?})", self.locations())
    }
}

/// Cost in seconds of placing `payload` bytes at a store with `metrics`.
#[pyfunction]
#[pyo3(signature = (metrics, payload, weights=None))]
fn score(metrics: &Bound<'_, PyAny>, payload: u64, weights: Option<&Bound<'_, PyAny>>) -> PyResult<f64> {
    let m: StoreMetrics = from_py(Some(metrics), "metrics")?;
    let w: PolicyWeights = from_py_or_default(weights, "weights")?;
    placement::score(&m, &w, payload).map_err(|e| value_err(e.to_string()))
}

/// Placement decision for a record of `entity` with the given payload size,
/// over the embedded stores of `schema`.
#[pyfunction]
#[pyo3(signature = (schema, entity, payload, metrics, weights=None))]
fn choose_location(
    py: Python<'_>,
    schema: &Schema,
    entity: &str,
    payload: u64,
    metrics: &Bound<'_, PyAny>,
    weights: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let desc = json::entity(&schema.registry, entity).map_err(value_err)?;
    let m: BTreeMap<LocationId, StoreMetrics> = from_py(Some(metrics), "metrics")?;
    let w: PolicyWeights = from_py_or_default(weights, "weights")?;
    let mut candidates = SchemaRegistry::new();
    for store in schema.registry.stores() {
        if store.kind == locorm::schema::StoreKind::Embedded {
            candidates.register_store(store.clone()).map_err(orm_err)?;
        }
    }
    let decision = placement::choose_location(&candidates, desc, payload, &m, &w).map_err(orm_err)?;
    to_py(py, &decision)
}

#[pymodule]
#[pyo3(name = "locorm")]
pub fn locorm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LocormError", m.py().get_type::<LocormError>())?;
    m.add("SchemaError", m.py().get_type::<SchemaError>())?;
    m.add_class::<Schema>()?;
    m.add_class::<Orm>()?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(choose_location, m)?)?;
    Ok(())
}
