//! Location-aware CRUD, relation views and integrity monitoring over every
//! open store.
//!
//! Reads fan out to all stores and merge globally, so a multi-store
//! deployment answers exactly like one store holding the union of rows.
//! Every record read back carries the location it came from. Writes either
//! go where the caller says or where the placement policy decides.
//!
//! Mutations are serialized by a single writer gate; reads only lock the
//! individual stores they touch.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::placement::{self, MetricsBoard, MetricsUpdate, PlacementDecision, PolicyError, PolicyWeights, StoreMetrics};
use crate::query::{self, Direction, FilterExpr, QueryError, QueryOptions, SortSpec, Statement};
use crate::record::Record;
use crate::schema::{
    Diagnostic, EntityDescriptor, LocationId, OnDelete, RelationShape, ResolvedRelation, SchemaRegistry, StoreKind,
};
use crate::storage::{payload_size, ExecOutcome, StorageError, StoreHandle, Timing};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("schema is inconsistent: {} diagnostic(s)", .0.len())]
    InvalidSchema(Vec<Diagnostic>),
    #[error("no store is registered")]
    NoStores,
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown or unopened location {0}")]
    UnknownLocation(LocationId),
    #[error("{entity} is private_only and cannot be stored at public store {location}")]
    ConfidentialityViolation { entity: String, location: LocationId },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("record has no location")]
    MissingLocation,
    #[error("record has no value for primary key {0}")]
    MissingPrimaryKey(String),
    #[error("{entity}.{field} = {value} references no existing row")]
    DanglingForeignKey { entity: String, field: String, value: Value },
    #[error("relation {relation} restricts deleting key {key}")]
    RestrictViolation { relation: String, key: Value },
    #[error("cascade stopped after {} deletion(s): {cause}", completed.len())]
    PartialCascade {
        completed: Vec<(String, Value, LocationId)>,
        cause: Box<RuntimeError>,
    },
    #[error("relation {0} is not many_to_many")]
    NotManyToMany(String),
    #[error("{entity} has no row with key {key}")]
    DanglingEndpoint { entity: String, key: Value },
    #[error("link ({source_key}, {target_key}) already exists in {relation}")]
    DuplicateLink {
        relation: String,
        source_key: Value,
        target_key: Value,
    },
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

pub type Result<T, E = RuntimeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DanglingFk,
    DanglingLink,
    DuplicateLink,
}

/// A row that breaks a relation, found by [`Orm::check_integrity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrityViolation {
    pub kind: ViolationKind,
    pub relation: String,
    /// Entity of the offending row.
    pub entity: String,
    /// Primary key of the offending row.
    pub offending_key: Value,
    pub store: LocationId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewChildren {
    OneToMany(Vec<Record>),
    /// `(link, target)` pairs.
    ManyToMany(Vec<(Record, Record)>),
}

impl ViewChildren {
    pub fn len(&self) -> usize {
        match self {
            ViewChildren::OneToMany(v) => v.len(),
            ViewChildren::ManyToMany(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewRow {
    pub parent: Record,
    pub children: ViewChildren,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsertOutcome {
    pub key: Value,
    pub location: LocationId,
    /// Present when the policy chose the location.
    pub decision: Option<PlacementDecision>,
}

/// Executed statements and accumulated latency per store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StoreStats {
    pub ops: u64,
    pub total_latency: f64,
}

impl StoreStats {
    pub fn mean_latency(&self) -> f64 {
        if self.ops == 0 {
            0.0
        } else {
            self.total_latency / self.ops as f64
        }
    }
}

/// Construction-time settings.
#[derive(Debug, Clone, Default)]
pub struct OrmConfig {
    pub weights: PolicyWeights,
    /// Initial metrics per store; missing stores get defaults.
    pub metrics: BTreeMap<LocationId, StoreMetrics>,
    /// Per-store latency source; missing stores measure wall-clock time.
    pub timings: BTreeMap<LocationId, Timing>,
}

struct OpenStore {
    location: LocationId,
    handle: Mutex<StoreHandle>,
    stats: Mutex<StoreStats>,
}

/// The runtime over a frozen registry and its open stores.
pub struct Orm {
    registry: Arc<SchemaRegistry>,
    /// Registry restricted to stores that can actually be opened.
    placement_registry: SchemaRegistry,
    relations: Vec<ResolvedRelation>,
    stores: Vec<OpenStore>,
    metrics: MetricsBoard,
    weights: PolicyWeights,
    write_gate: Mutex<()>,
}

impl std::fmt::Debug for Orm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orm")
            .field("stores", &self.stores.iter().map(|s| &s.location).collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

fn key_of(v: &Value) -> String {
    format!("{v:?}")
}

impl Orm {
    pub fn new(registry: SchemaRegistry) -> Result<Self> {
        Self::with_config(registry, OrmConfig::default())
    }

    /// Validates the registry, opens every embedded store and seeds metrics.
    pub fn with_config(registry: SchemaRegistry, config: OrmConfig) -> Result<Self> {
        let diagnostics = registry.validate();
        if !diagnostics.is_empty() {
            return Err(RuntimeError::InvalidSchema(diagnostics));
        }
        if registry.stores().is_empty() {
            return Err(RuntimeError::NoStores);
        }
        config.weights.validate()?;
        let mut placement_registry = SchemaRegistry::new();
        let mut stores = Vec::new();
        let mut metrics = BTreeMap::new();
        for desc in registry.stores() {
            if desc.kind == StoreKind::External {
                continue;
            }
            let timing = config.timings.get(&desc.location).copied().unwrap_or_default();
            let handle = StoreHandle::open(&registry, &desc.location)?.with_timing(timing);
            placement_registry
                .register_store(desc.clone())
                .expect("registry locations are unique");
            metrics.insert(
                desc.location.clone(),
                config.metrics.get(&desc.location).copied().unwrap_or_default(),
            );
            stores.push(OpenStore {
                location: desc.location.clone(),
                handle: Mutex::new(handle),
                stats: Mutex::new(StoreStats::default()),
            });
        }
        if stores.is_empty() {
            return Err(RuntimeError::NoStores);
        }
        Ok(Orm {
            relations: registry.resolved_relations(),
            registry: Arc::new(registry),
            placement_registry,
            stores,
            metrics: MetricsBoard::new(metrics)?,
            weights: config.weights,
            write_gate: Mutex::new(()),
        })
    }

    pub fn registry(&self) -> &SchemaRegistry {
        &self.registry
    }

    pub fn weights(&self) -> &PolicyWeights {
        &self.weights
    }

    /// Open stores in registration order.
    pub fn locations(&self) -> Vec<LocationId> {
        self.stores.iter().map(|s| s.location.clone()).collect()
    }

    pub fn metrics(&self) -> BTreeMap<LocationId, StoreMetrics> {
        self.metrics.snapshot()
    }

    pub fn update_metrics(&self, location: &LocationId, update: &MetricsUpdate) -> Result<StoreMetrics> {
        self.store_index(location)?;
        Ok(self.metrics.update(location, update)?)
    }

    pub fn store_stats(&self) -> BTreeMap<LocationId, StoreStats> {
        self.stores
            .iter()
            .map(|s| (s.location.clone(), *s.stats.lock().expect("stats lock poisoned")))
            .collect()
    }

    /// JSON snapshot of one store's tables.
    pub fn dump(&self, location: &LocationId) -> Result<serde_json::Value> {
        let idx = self.store_index(location)?;
        Ok(self.stores[idx].handle.lock().expect("store lock poisoned").dump())
    }

    /// Runs hand-written statement text against one store, bypassing every
    /// runtime check.
    pub fn execute_raw(&self, location: &LocationId, text: &str, params: &[Value]) -> Result<ExecOutcome> {
        let _gate = self.write_gate.lock().expect("writer gate poisoned");
        let idx = self.store_index(location)?;
        let mut handle = self.stores[idx].handle.lock().expect("store lock poisoned");
        Ok(handle.execute_raw(text, params)?)
    }

    fn store_index(&self, location: &LocationId) -> Result<usize> {
        self.stores
            .iter()
            .position(|s| &s.location == location)
            .ok_or_else(|| RuntimeError::UnknownLocation(location.clone()))
    }

    fn entity(&self, name: &str) -> Result<&EntityDescriptor> {
        self.registry
            .entity(name)
            .ok_or_else(|| RuntimeError::UnknownEntity(name.to_owned()))
    }

    fn relation(&self, name: &str) -> Result<&ResolvedRelation> {
        self.relations
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| RuntimeError::UnknownRelation(name.to_owned()))
    }

    /// Executes on one store, recording latency in stats and metrics.
    fn run(&self, idx: usize, statement: &Statement) -> Result<ExecOutcome> {
        let store = &self.stores[idx];
        let measured = store
            .handle
            .lock()
            .expect("store lock poisoned")
            .measure(statement)?;
        {
            let mut stats = store.stats.lock().expect("stats lock poisoned");
            stats.ops += 1;
            stats.total_latency += measured.latency;
        }
        self.metrics.observe(&store.location, measured.latency, &self.weights)?;
        Ok(measured.outcome)
    }

    fn fetch(&self, idx: usize, entity: &str, options: &QueryOptions) -> Result<Vec<Record>> {
        let statement = query::build_select(&self.registry, entity, options)?;
        let rs = self
            .run(idx, &statement)?
            .into_rows()
            .expect("SELECT yields rows");
        let location = &self.stores[idx].location;
        Ok(rs
            .rows
            .into_iter()
            .map(|row| Record {
                entity: entity.to_owned(),
                values: rs.columns.iter().cloned().zip(row).collect(),
                location: Some(location.clone()),
            })
            .collect())
    }

    /// Selects from every open store, then re-applies ordering and
    /// pagination over the merged result.
    pub fn select(&self, entity: &str, options: &QueryOptions) -> Result<Vec<Record>> {
        self.entity(entity)?;
        let per_store = QueryOptions {
            filter: options.filter.clone(),
            sorts: options.sorts.clone(),
            limit: options.limit.map(|l| l.saturating_add(options.offset.unwrap_or(0))),
            offset: None,
        };
        let mut merged = Vec::new();
        for idx in 0..self.stores.len() {
            merged.extend(self.fetch(idx, entity, &per_store)?);
        }
        if !options.sorts.is_empty() {
            merged.sort_by(|a, b| compare_records(a, b, &options.sorts));
        }
        let offset = usize::try_from(options.offset.unwrap_or(0)).unwrap_or(usize::MAX);
        let limit = options
            .limit
            .map_or(usize::MAX, |l| usize::try_from(l).unwrap_or(usize::MAX));
        Ok(merged.into_iter().skip(offset).take(limit).collect())
    }

    /// First row (in store order) whose `field` equals `value`.
    fn find(&self, entity: &str, field: &str, value: &Value) -> Result<Option<Record>> {
        let options = QueryOptions::new().filter(FilterExpr::eq(field, value.clone())).limit(1);
        for idx in 0..self.stores.len() {
            if let Some(r) = self.fetch(idx, entity, &options)?.into_iter().next() {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    fn find_all(&self, entity: &str, filter: FilterExpr) -> Result<Vec<Record>> {
        let pk = self.entity(entity)?.primary_key().name.clone();
        self.select(entity, &QueryOptions::new().filter(filter).sort(SortSpec::asc(pk)))
    }

    fn find_link(&self, shape: (&str, &str, &str), source_key: &Value, target_key: &Value) -> Result<Vec<Record>> {
        let (link, source_field, target_field) = shape;
        self.find_all(
            link,
            FilterExpr::And(vec![
                FilterExpr::eq(source_field, source_key.clone()),
                FilterExpr::eq(target_field, target_key.clone()),
            ]),
        )
    }

    /// Checks every foreign key `record` holds. `self_key` excludes the
    /// record itself from the duplicate-link check on update.
    fn check_references(&self, entity: &EntityDescriptor, values: &BTreeMap<String, Value>, self_key: Option<&Value>) -> Result<()> {
        for rel in &self.relations {
            match &rel.shape {
                RelationShape::OneToMany { foreign_key } if rel.target == entity.name => {
                    self.require_parent(entity, foreign_key, values.get(foreign_key), &rel.source)?;
                }
                RelationShape::ManyToMany {
                    link,
                    source_field,
                    target_field,
                } if *link == entity.name => {
                    self.require_parent(entity, source_field, values.get(source_field), &rel.source)?;
                    self.require_parent(entity, target_field, values.get(target_field), &rel.target)?;
                    if let (Some(s), Some(t)) = (values.get(source_field), values.get(target_field)) {
                        if s.is_null() || t.is_null() {
                            continue;
                        }
                        let pk = &entity.primary_key().name;
                        let clash = self
                            .find_link((link, source_field, target_field), s, t)?
                            .into_iter()
                            .any(|r| self_key.is_none_or(|k| r.get(pk).is_some_and(|v| !v.sql_eq(k))));
                        if clash {
                            return Err(RuntimeError::DuplicateLink {
                                relation: rel.name.clone(),
                                source_key: s.clone(),
                                target_key: t.clone(),
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn require_parent(&self, entity: &EntityDescriptor, field: &str, value: Option<&Value>, parent: &str) -> Result<()> {
        let Some(value) = value.filter(|v| !v.is_null()) else {
            return Ok(());
        };
        let pk = self.entity(parent)?.primary_key().name.clone();
        if self.find(parent, &pk, value)?.is_none() {
            return Err(RuntimeError::DanglingForeignKey {
                entity: entity.name.clone(),
                field: field.to_owned(),
                value: value.clone(),
            });
        }
        Ok(())
    }

    fn check_confidentiality(&self, entity: &EntityDescriptor, location: &LocationId) -> Result<()> {
        let store = self
            .placement_registry
            .store(location)
            .ok_or_else(|| RuntimeError::UnknownLocation(location.clone()))?;
        if !placement::is_eligible(entity, store.privacy) {
            return Err(RuntimeError::ConfidentialityViolation {
                entity: entity.name.clone(),
                location: location.clone(),
            });
        }
        Ok(())
    }

    /// Inserts a record and returns its primary key.
    pub fn insert(&self, record: &Record) -> Result<Value> {
        self.insert_explained(record).map(|o| o.key)
    }

    /// Inserts a record, reporting where it went and, when the policy chose
    /// the store, the full decision.
    pub fn insert_explained(&self, record: &Record) -> Result<InsertOutcome> {
        let _gate = self.write_gate.lock().expect("writer gate poisoned");
        let entity = self.entity(&record.entity)?;
        let statement = query::build_insert(&self.registry, &entity.name, record)?;
        if let Some(location) = &record.location {
            self.store_index(location)?;
            self.check_confidentiality(entity, location)?;
        }
        let pk_field = &entity.primary_key().name;
        let key = record.values[pk_field].clone();
        if let Some(existing) = self.find(&entity.name, pk_field, &key)? {
            return Err(RuntimeError::ConstraintViolation(format!(
                "{}.{pk_field} = {key} already exists at {}",
                entity.name,
                existing.location.expect("fetched records carry a location")
            )));
        }
        self.check_references(entity, &record.values, None)?;
        let (location, decision) = match &record.location {
            Some(l) => (l.clone(), None),
            None => {
                let decision = placement::choose_location(
                    &self.placement_registry,
                    entity,
                    payload_size(&statement.params),
                    &self.metrics.snapshot(),
                    &self.weights,
                )?;
                (decision.chosen.clone(), Some(decision))
            }
        };
        let idx = self.store_index(&location)?;
        self.run(idx, &statement)?;
        Ok(InsertOutcome {
            key,
            location,
            decision,
        })
    }

    /// Writes the record's non-key fields back to the store it came from.
    pub fn update(&self, record: &Record) -> Result<u64> {
        let _gate = self.write_gate.lock().expect("writer gate poisoned");
        let location = record.location.as_ref().ok_or(RuntimeError::MissingLocation)?;
        let idx = self.store_index(location)?;
        let entity = self.entity(&record.entity)?;
        let pk_field = &entity.primary_key().name;
        let key = record
            .values
            .get(pk_field)
            .cloned()
            .ok_or_else(|| RuntimeError::MissingPrimaryKey(pk_field.clone()))?;
        let mut changes = record.values.clone();
        changes.remove(pk_field);
        let statement = query::build_update(
            &self.registry,
            &entity.name,
            &changes,
            &FilterExpr::eq(pk_field.clone(), key.clone()),
        )?;
        // links are checked as a whole: merge with the stored row
        let mut merged = match self.fetch(idx, &entity.name, &QueryOptions::new().filter(FilterExpr::eq(pk_field.clone(), key.clone())))?.pop() {
            Some(current) => current.values,
            None => return Ok(0),
        };
        merged.extend(changes);
        self.check_references(entity, &merged, Some(&key))?;
        Ok(self.run(idx, &statement)?.affected().unwrap_or(0))
    }

    /// Deletes one row, honouring each relation's on-delete rule across all
    /// stores. Returns the number of rows removed, cascaded rows included.
    pub fn delete(&self, entity: &str, key: &Value, location: &LocationId) -> Result<u64> {
        let _gate = self.write_gate.lock().expect("writer gate poisoned");
        let idx = self.store_index(location)?;
        let entity = self.entity(entity)?;
        let pk_field = entity.primary_key().name.clone();
        let present = self
            .fetch(idx, &entity.name, &QueryOptions::new().filter(FilterExpr::eq(pk_field, key.clone())))?;
        if present.is_empty() {
            return Ok(0);
        }
        let mut plan = Vec::new();
        let mut visited = HashSet::new();
        self.plan_delete(&entity.name, key, location, &mut visited, &mut plan)?;

        let mut completed = Vec::new();
        let mut total = 0;
        for (name, key, location) in plan {
            let pk = self.entity(&name)?.primary_key().name.clone();
            let result = query::build_delete(&self.registry, &name, &FilterExpr::eq(pk, key.clone()))
                .map_err(RuntimeError::from)
                .and_then(|st| self.store_index(&location).and_then(|i| self.run(i, &st)));
            match result {
                Ok(outcome) => {
                    total += outcome.affected().unwrap_or(0);
                    completed.push((name, key, location));
                }
                Err(cause) if completed.is_empty() => return Err(cause),
                Err(cause) => {
                    return Err(RuntimeError::PartialCascade {
                        completed,
                        cause: Box::new(cause),
                    })
                }
            }
        }
        Ok(total)
    }

    /// Post-order walk of everything deleting `(entity, key)` would remove.
    /// Fails on the first restricting relation without touching any store.
    fn plan_delete(
        &self,
        entity: &str,
        key: &Value,
        location: &LocationId,
        visited: &mut HashSet<(String, String)>,
        plan: &mut Vec<(String, Value, LocationId)>,
    ) -> Result<()> {
        if !visited.insert((entity.to_owned(), key_of(key))) {
            return Ok(());
        }
        for rel in &self.relations {
            let dependents = match &rel.shape {
                RelationShape::OneToMany { foreign_key } if rel.source == entity => {
                    Some((rel.target.as_str(), foreign_key.as_str()))
                }
                _ => None,
            }
            .into_iter()
            .chain(match &rel.shape {
                RelationShape::ManyToMany { link, source_field, .. } if rel.source == entity => {
                    Some((link.as_str(), source_field.as_str()))
                }
                _ => None,
            })
            .chain(match &rel.shape {
                RelationShape::ManyToMany { link, target_field, .. } if rel.target == entity => {
                    Some((link.as_str(), target_field.as_str()))
                }
                _ => None,
            });
            for (child_entity, field) in dependents {
                let children = self.find_all(child_entity, FilterExpr::eq(field, key.clone()))?;
                if children.is_empty() {
                    continue;
                }
                if rel.on_delete == OnDelete::Restrict {
                    return Err(RuntimeError::RestrictViolation {
                        relation: rel.name.clone(),
                        key: key.clone(),
                    });
                }
                let child_pk = self.entity(child_entity)?.primary_key().name.clone();
                for child in children {
                    let child_key = child.values[&child_pk].clone();
                    let child_loc = child.location.expect("fetched records carry a location");
                    self.plan_delete(child_entity, &child_key, &child_loc, visited, plan)?;
                }
            }
        }
        plan.push((entity.to_owned(), key.clone(), location.clone()));
        Ok(())
    }

    /// Parents selected by `parent_options`, each with its related rows from
    /// every store in primary-key order.
    pub fn select_view(&self, relation: &str, parent_options: &QueryOptions) -> Result<Vec<ViewRow>> {
        let rel = self.relation(relation)?.clone();
        let parents = self.select(&rel.source, parent_options)?;
        let parent_pk = self.entity(&rel.source)?.primary_key().name.clone();
        let mut rows = Vec::with_capacity(parents.len());
        for parent in parents {
            let key = parent.values[&parent_pk].clone();
            let children = match &rel.shape {
                RelationShape::OneToMany { foreign_key } => {
                    ViewChildren::OneToMany(self.find_all(&rel.target, FilterExpr::eq(foreign_key.clone(), key))?)
                }
                RelationShape::ManyToMany {
                    link,
                    source_field,
                    target_field,
                } => {
                    let target_pk = self.entity(&rel.target)?.primary_key().name.clone();
                    let mut pairs = Vec::new();
                    for link_row in self.find_all(link, FilterExpr::eq(source_field.clone(), key))? {
                        let target_key = &link_row.values[target_field];
                        if let Some(target) = self.find(&rel.target, &target_pk, target_key)? {
                            pairs.push((link_row, target));
                        }
                    }
                    // stable: equal targets stay in link-key order
                    pairs.sort_by(|a, b| a.1.values[&target_pk].sort_cmp(&b.1.values[&target_pk]));
                    ViewChildren::ManyToMany(pairs)
                }
            };
            rows.push(ViewRow { parent, children });
        }
        Ok(rows)
    }

    /// Writes one link row for a many-to-many relation. Returns the new link
    /// row's key.
    pub fn link(&self, relation: &str, source_key: &Value, target_key: &Value, location: &LocationId) -> Result<Value> {
        let _gate = self.write_gate.lock().expect("writer gate poisoned");
        let rel = self.relation(relation)?;
        let RelationShape::ManyToMany {
            link,
            source_field,
            target_field,
        } = &rel.shape
        else {
            return Err(RuntimeError::NotManyToMany(relation.to_owned()));
        };
        let idx = self.store_index(location)?;
        let link_entity = self.entity(link)?;
        self.check_confidentiality(link_entity, location)?;
        for (entity, key) in [(&rel.source, source_key), (&rel.target, target_key)] {
            let pk = self.entity(entity)?.primary_key().name.clone();
            if self.find(entity, &pk, key)?.is_none() {
                return Err(RuntimeError::DanglingEndpoint {
                    entity: entity.clone(),
                    key: key.clone(),
                });
            }
        }
        if !self.find_link((link, source_field, target_field), source_key, target_key)?.is_empty() {
            return Err(RuntimeError::DuplicateLink {
                relation: relation.to_owned(),
                source_key: source_key.clone(),
                target_key: target_key.clone(),
            });
        }
        let link_pk = link_entity.primary_key().name.clone();
        let newest = self.select(link, &QueryOptions::new().sort(SortSpec::desc(link_pk.clone())).limit(1))?;
        let next_key = match newest.first().and_then(|r| r.values.get(&link_pk)) {
            Some(Value::Integer(n)) => Value::Integer(n + 1),
            _ => Value::Integer(1),
        };
        let mut row = Record::new(link.clone())
            .with(link_pk, next_key.clone())
            .with(source_field.clone(), source_key.clone())
            .with(target_field.clone(), target_key.clone());
        row.location = Some(location.clone());
        // remaining link fields must be nullable; build_insert reports otherwise
        let statement = query::build_insert(&self.registry, link, &row)?;
        self.run(idx, &statement)?;
        Ok(next_key)
    }

    /// Removes every link row for the pair, wherever it is stored.
    pub fn unlink(&self, relation: &str, source_key: &Value, target_key: &Value) -> Result<u64> {
        let _gate = self.write_gate.lock().expect("writer gate poisoned");
        let rel = self.relation(relation)?;
        let RelationShape::ManyToMany {
            link,
            source_field,
            target_field,
        } = &rel.shape
        else {
            return Err(RuntimeError::NotManyToMany(relation.to_owned()));
        };
        let statement = query::build_delete(
            &self.registry,
            link,
            &FilterExpr::And(vec![
                FilterExpr::eq(source_field.clone(), source_key.clone()),
                FilterExpr::eq(target_field.clone(), target_key.clone()),
            ]),
        )?;
        let mut removed = 0;
        for idx in 0..self.stores.len() {
            removed += self.run(idx, &statement)?.affected().unwrap_or(0);
        }
        Ok(removed)
    }

    /// Scans every store for dangling foreign keys, dangling links and
    /// duplicate links. Empty iff the data is globally consistent.
    pub fn check_integrity(&self) -> Result<Vec<IntegrityViolation>> {
        let mut keys_cache: BTreeMap<String, HashSet<String>> = BTreeMap::new();
        let mut keys = |orm: &Orm, entity: &str| -> Result<HashSet<String>> {
            if let Some(k) = keys_cache.get(entity) {
                return Ok(k.clone());
            }
            let pk = orm.entity(entity)?.primary_key().name.clone();
            let set: HashSet<String> = orm
                .select(entity, &QueryOptions::new())?
                .iter()
                .map(|r| key_of(&r.values[&pk]))
                .collect();
            keys_cache.insert(entity.to_owned(), set.clone());
            Ok(set)
        };
        let mut out = Vec::new();
        for rel in &self.relations {
            match &rel.shape {
                RelationShape::OneToMany { foreign_key } => {
                    let parents = keys(self, &rel.source)?;
                    let child_pk = self.entity(&rel.target)?.primary_key().name.clone();
                    for child in self.select(&rel.target, &QueryOptions::new())? {
                        let fk = &child.values[foreign_key];
                        if !fk.is_null() && !parents.contains(&key_of(fk)) {
                            out.push(IntegrityViolation {
                                kind: ViolationKind::DanglingFk,
                                relation: rel.name.clone(),
                                entity: rel.target.clone(),
                                offending_key: child.values[&child_pk].clone(),
                                store: child.location.clone().expect("fetched records carry a location"),
                            });
                        }
                    }
                }
                RelationShape::ManyToMany {
                    link,
                    source_field,
                    target_field,
                } => {
                    let sources = keys(self, &rel.source)?;
                    let targets = keys(self, &rel.target)?;
                    let link_pk = self.entity(link)?.primary_key().name.clone();
                    let mut seen = HashSet::new();
                    for row in self.select(link, &QueryOptions::new())? {
                        let s = &row.values[source_field];
                        let t = &row.values[target_field];
                        let kind = if !sources.contains(&key_of(s)) || !targets.contains(&key_of(t)) {
                            Some(ViolationKind::DanglingLink)
                        } else if !seen.insert((key_of(s), key_of(t))) {
                            Some(ViolationKind::DuplicateLink)
                        } else {
                            None
                        };
                        if let Some(kind) = kind {
                            out.push(IntegrityViolation {
                                kind,
                                relation: rel.name.clone(),
                                entity: link.clone(),
                                offending_key: row.values[&link_pk].clone(),
                                store: row.location.clone().expect("fetched records carry a location"),
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn compare_records(a: &Record, b: &Record, sorts: &[SortSpec]) -> std::cmp::Ordering {
    for sort in sorts {
        let null = Value::Null;
        let x = a.values.get(&sort.field).unwrap_or(&null);
        let y = b.values.get(&sort.field).unwrap_or(&null);
        let ord = match sort.direction {
            Direction::Asc => x.sort_cmp(y),
            Direction::Desc => y.sort_cmp(x),
        };
        if ord.is_ne() {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}
