//! Workload scripts and run reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::placement::{PlacementDecision, PolicyWeights, StoreMetrics};
use crate::json::{entity, key_for, options, record, untyped, FilterSpec};
use crate::query::{QueryOptions, SortSpec};
use crate::record::Record;
use crate::runtime::{IntegrityViolation, Orm, OrmConfig, RuntimeError};
use crate::schema::{LocationId, SchemaFile, SchemaRegistry};
use crate::storage::{ExecOutcome, Timing};
use crate::value::Value;

pub const REPORT_VERSION: u32 = 1;

/// Problems with the inputs themselves (exit status 2).
#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("op {index}: {message}")]
    Op { index: usize, message: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreConfig {
    /// Seconds added to (or, in simulated mode, reported for) every statement.
    #[serde(default)]
    pub injected_delay: f64,
    #[serde(default)]
    pub metrics: Option<StoreMetrics>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpSpec {
    Insert {
        entity: String,
        values: Map<String, Json>,
        #[serde(default)]
        location: Option<LocationId>,
        #[serde(default)]
        expect_error: bool,
    },
    Select {
        entity: String,
        #[serde(default)]
        filter: FilterSpec,
        #[serde(default)]
        sort: Vec<SortSpec>,
        #[serde(default)]
        limit: Option<u64>,
        #[serde(default)]
        offset: Option<u64>,
        #[serde(default)]
        expect_error: bool,
    },
    Update {
        entity: String,
        values: Map<String, Json>,
        #[serde(default)]
        location: Option<LocationId>,
        #[serde(default)]
        expect_error: bool,
    },
    Delete {
        entity: String,
        key: Json,
        location: LocationId,
        #[serde(default)]
        expect_error: bool,
    },
    Link {
        relation: String,
        source: Json,
        target: Json,
        location: LocationId,
        #[serde(default)]
        expect_error: bool,
    },
    Unlink {
        relation: String,
        source: Json,
        target: Json,
        #[serde(default)]
        expect_error: bool,
    },
    View {
        relation: String,
        #[serde(default)]
        filter: FilterSpec,
        #[serde(default)]
        sort: Vec<SortSpec>,
        #[serde(default)]
        limit: Option<u64>,
        #[serde(default)]
        offset: Option<u64>,
        #[serde(default)]
        expect_error: bool,
    },
    Check {
        #[serde(default)]
        expect_error: bool,
    },
    /// Hand-written statement; params are untyped JSON scalars.
    Raw {
        location: LocationId,
        text: String,
        #[serde(default)]
        params: Vec<Json>,
        #[serde(default)]
        expect_error: bool,
    },
}

impl OpSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OpSpec::Insert { .. } => "insert",
            OpSpec::Select { .. } => "select",
            OpSpec::Update { .. } => "update",
            OpSpec::Delete { .. } => "delete",
            OpSpec::Link { .. } => "link",
            OpSpec::Unlink { .. } => "unlink",
            OpSpec::View { .. } => "view",
            OpSpec::Check { .. } => "check",
            OpSpec::Raw { .. } => "raw",
        }
    }

    pub fn expect_error(&self) -> bool {
        match self {
            OpSpec::Insert { expect_error, .. }
            | OpSpec::Select { expect_error, .. }
            | OpSpec::Update { expect_error, .. }
            | OpSpec::Delete { expect_error, .. }
            | OpSpec::Link { expect_error, .. }
            | OpSpec::Unlink { expect_error, .. }
            | OpSpec::View { expect_error, .. }
            | OpSpec::Check { expect_error }
            | OpSpec::Raw { expect_error, .. } => *expect_error,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadScript {
    /// Resolved relative to the script's directory.
    pub schema_path: PathBuf,
    #[serde(default)]
    pub stores: BTreeMap<LocationId, StoreConfig>,
    #[serde(default)]
    pub policy: PolicyWeights,
    #[serde(default)]
    pub ops: Vec<OpSpec>,
}

/// A script with its schema loaded.
#[derive(Debug, Clone)]
pub struct LoadedScript {
    pub script: WorkloadScript,
    pub registry: SchemaRegistry,
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_owned(),
        source,
    })
}

impl LoadedScript {
    pub fn load(script_path: &Path) -> Result<Self, InputError> {
        let text = read(script_path)?;
        let script: WorkloadScript = serde_json::from_str(&text).map_err(|source| InputError::Parse {
            path: script_path.to_owned(),
            source,
        })?;
        let base = script_path.parent().unwrap_or(Path::new("."));
        let schema_path = base.join(&script.schema_path);
        let schema_text = read(&schema_path)?;
        let file = SchemaFile::parse(&schema_text).map_err(|source| InputError::Parse {
            path: schema_path.clone(),
            source,
        })?;
        let (registry, errors) = file.register_all();
        if let Some(e) = errors.first() {
            return Err(InputError::Schema(e.to_string()));
        }
        if let Some(d) = registry.validate().first() {
            return Err(InputError::Schema(d.to_string()));
        }
        for location in script.stores.keys() {
            if registry.store(location).is_none() {
                return Err(InputError::Config(format!("store {location} is not in the schema")));
            }
        }
        script
            .policy
            .validate()
            .map_err(|e| InputError::Config(e.to_string()))?;
        Ok(LoadedScript { script, registry })
    }

    pub fn initial_metrics(&self) -> BTreeMap<LocationId, StoreMetrics> {
        self.registry
            .stores()
            .iter()
            .map(|s| {
                let m = self
                    .script
                    .stores
                    .get(&s.location)
                    .and_then(|c| c.metrics)
                    .unwrap_or_default();
                (s.location.clone(), m)
            })
            .collect()
    }

    fn config(&self, wall_clock: bool) -> Result<OrmConfig, InputError> {
        let mut timings = BTreeMap::new();
        for (location, cfg) in &self.script.stores {
            let delay = Duration::try_from_secs_f64(cfg.injected_delay)
                .map_err(|_| InputError::Config(format!("store {location}: invalid injected_delay")))?;
            let timing = if wall_clock {
                Timing::WallClock { extra_delay: delay }
            } else {
                Timing::Simulated { delay }
            };
            timings.insert(location.clone(), timing);
        }
        for store in self.registry.stores() {
            timings.entry(store.location.clone()).or_insert(if wall_clock {
                Timing::default()
            } else {
                Timing::Simulated { delay: Duration::ZERO }
            });
        }
        Ok(OrmConfig {
            weights: self.script.policy,
            metrics: self.initial_metrics(),
            timings,
        })
    }
}

/// A script op with every JSON value converted through the schema.
#[derive(Debug, Clone)]
enum Op {
    Insert(Record),
    Select { entity: String, options: QueryOptions },
    Update(Record),
    Delete { entity: String, key: Value, location: LocationId },
    Link { relation: String, source: Value, target: Value, location: LocationId },
    Unlink { relation: String, source: Value, target: Value },
    View { relation: String, options: QueryOptions },
    Check,
    Raw { location: LocationId, text: String, params: Vec<Value> },
}

fn convert(registry: &SchemaRegistry, spec: &OpSpec) -> Result<Op, String> {
    Ok(match spec {
        OpSpec::Insert {
            entity: name,
            values,
            location,
            ..
        } => Op::Insert(record(entity(registry, name)?, values, location.clone())?),
        OpSpec::Update {
            entity: name,
            values,
            location,
            ..
        } => Op::Update(record(entity(registry, name)?, values, location.clone())?),
        OpSpec::Select {
            entity: name,
            filter,
            sort,
            limit,
            offset,
            ..
        } => {
            let e = entity(registry, name)?;
            Op::Select {
                entity: e.name.clone(),
                options: options(e, filter, sort, *limit, *offset)?,
            }
        }
        OpSpec::Delete {
            entity: name,
            key,
            location,
            ..
        } => {
            let e = entity(registry, name)?;
            Op::Delete {
                entity: e.name.clone(),
                key: key_for(e, key)?,
                location: location.clone(),
            }
        }
        OpSpec::Link {
            relation,
            source,
            target,
            location,
            ..
        } => {
            let (s, t) = endpoints(registry, relation, source, target)?;
            Op::Link {
                relation: relation.clone(),
                source: s,
                target: t,
                location: location.clone(),
            }
        }
        OpSpec::Unlink {
            relation,
            source,
            target,
            ..
        } => {
            let (s, t) = endpoints(registry, relation, source, target)?;
            Op::Unlink {
                relation: relation.clone(),
                source: s,
                target: t,
            }
        }
        OpSpec::View {
            relation,
            filter,
            sort,
            limit,
            offset,
            ..
        } => {
            let (source, _) = registry
                .relation(relation)
                .ok_or_else(|| format!("unknown relation {relation}"))?;
            Op::View {
                relation: relation.clone(),
                options: options(source, filter, sort, *limit, *offset)?,
            }
        }
        OpSpec::Check { .. } => Op::Check,
        OpSpec::Raw {
            location, text, params, ..
        } => Op::Raw {
            location: location.clone(),
            text: text.clone(),
            params: params.iter().map(untyped).collect::<Result<_, _>>()?,
        },
    })
}

fn endpoints(registry: &SchemaRegistry, relation: &str, source: &Json, target: &Json) -> Result<(Value, Value), String> {
    let (src, rel) = registry
        .relation(relation)
        .ok_or_else(|| format!("unknown relation {relation}"))?;
    let tgt = entity(registry, &rel.target_entity)?;
    Ok((
        key_for(src, source)?,
        key_for(tgt, target)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OpStatus {
    Ok,
    ExpectedError,
    /// Fatal: the op failed without `expect_error`, or succeeded with it.
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpReport {
    pub index: usize,
    pub op: &'static str,
    pub status: OpStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Json>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementReport {
    pub op_index: usize,
    pub entity: String,
    #[serde(flatten)]
    pub decision: PlacementDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreSummary {
    pub ops: u64,
    pub mean_latency: f64,
    pub latency_ewma: f64,
}

/// Outcome of a script run. Field order is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub ops: Vec<OpReport>,
    pub placements: Vec<PlacementReport>,
    pub integrity: Vec<IntegrityViolation>,
    pub stores: BTreeMap<LocationId, StoreSummary>,
}

impl RunReport {
    /// True when every op succeeded or failed as expected.
    pub fn succeeded(&self) -> bool {
        self.ops
            .iter()
            .all(|o| matches!(o.status, OpStatus::Ok | OpStatus::ExpectedError))
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn to_json<T: Serialize>(value: &T) -> Json {
    serde_json::to_value(value).expect("serializable")
}

fn execute(orm: &Orm, index: usize, op: &Op, placements: &mut Vec<PlacementReport>) -> Result<Json, RuntimeError> {
    Ok(match op {
        Op::Insert(record) => {
            let out = orm.insert_explained(record)?;
            if let Some(decision) = out.decision {
                placements.push(PlacementReport {
                    op_index: index,
                    entity: record.entity.clone(),
                    decision,
                });
            }
            serde_json::json!({ "key": out.key, "location": out.location })
        }
        Op::Select { entity, options } => {
            let rows = orm.select(entity, options)?;
            serde_json::json!({ "count": rows.len(), "rows": to_json(&rows) })
        }
        Op::Update(record) => serde_json::json!({ "affected": orm.update(record)? }),
        Op::Delete { entity, key, location } => serde_json::json!({ "affected": orm.delete(entity, key, location)? }),
        Op::Link {
            relation,
            source,
            target,
            location,
        } => serde_json::json!({ "key": orm.link(relation, source, target, location)? }),
        Op::Unlink {
            relation,
            source,
            target,
        } => serde_json::json!({ "affected": orm.unlink(relation, source, target)? }),
        Op::View { relation, options } => {
            let rows = orm.select_view(relation, options)?;
            serde_json::json!({ "count": rows.len(), "rows": to_json(&rows) })
        }
        Op::Check => serde_json::json!({ "violations": to_json(&orm.check_integrity()?) }),
        Op::Raw { location, text, params } => match orm.execute_raw(location, text, params)? {
            ExecOutcome::Affected(n) => serde_json::json!({ "affected": n }),
            ExecOutcome::Rows(rs) => to_json(&rs),
        },
    })
}

/// Runs every op in order against fresh embedded stores. Stops at the first
/// fatal op; the remaining ops are reported as skipped.
pub fn run(loaded: &LoadedScript, wall_clock: bool) -> Result<RunReport, InputError> {
    let ops = loaded
        .script
        .ops
        .iter()
        .enumerate()
        .map(|(index, spec)| convert(&loaded.registry, spec).map_err(|message| InputError::Op { index, message }))
        .collect::<Result<Vec<_>, _>>()?;
    let orm = Orm::with_config(loaded.registry.clone(), loaded.config(wall_clock)?)
        .map_err(|e| InputError::Config(e.to_string()))?;

    let mut reports = Vec::with_capacity(ops.len());
    let mut placements = Vec::new();
    let mut fatal = false;
    for (index, (op, spec)) in ops.iter().zip(&loaded.script.ops).enumerate() {
        let name = spec.name();
        if fatal {
            reports.push(OpReport {
                index,
                op: name,
                status: OpStatus::Skipped,
                result: None,
                error: None,
            });
            continue;
        }
        let outcome = execute(&orm, index, op, &mut placements);
        let report = match (outcome, spec.expect_error()) {
            (Ok(result), false) => OpReport {
                index,
                op: name,
                status: OpStatus::Ok,
                result: Some(result),
                error: None,
            },
            (Err(e), true) => OpReport {
                index,
                op: name,
                status: OpStatus::ExpectedError,
                result: None,
                error: Some(e.to_string()),
            },
            (Ok(result), true) => OpReport {
                index,
                op: name,
                status: OpStatus::Error,
                result: Some(result),
                error: Some("expected an error, but the op succeeded".into()),
            },
            (Err(e), false) => OpReport {
                index,
                op: name,
                status: OpStatus::Error,
                result: None,
                error: Some(e.to_string()),
            },
        };
        fatal = report.status == OpStatus::Error;
        reports.push(report);
    }

    let metrics = orm.metrics();
    let stores = orm
        .store_stats()
        .into_iter()
        .map(|(loc, stats)| {
            let ewma = metrics.get(&loc).map_or(0.0, |m| m.latency_ewma);
            (
                loc,
                StoreSummary {
                    ops: stats.ops,
                    mean_latency: stats.mean_latency(),
                    latency_ewma: ewma,
                },
            )
        })
        .collect();
    let integrity = orm
        .check_integrity()
        .map_err(|e| InputError::Config(format!("final integrity check failed: {e}")))?;
    Ok(RunReport {
        report_version: REPORT_VERSION,
        ops: reports,
        placements,
        integrity,
        stores,
    })
}
