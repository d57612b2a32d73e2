//! Location-aware object-relational mapping over several stores.
//!
//! Entity descriptors map to one table per store, every record carries the
//! identity of the store holding it, relations that span stores keep their
//! integrity, and a latency-adaptive policy picks the store for new data.
//!
//! Layers, bottom up:
//!
//! - [`schema`]: declarative registry of entities, relations and stores.
//! - [`query`]: structured requests and statement generation.
//! - [`storage`]: the embedded in-memory store that executes statements.
//! - [`placement`]: store scoring and adaptive placement.
//! - [`runtime`]: fan-out CRUD, relation views and integrity checks.
//! - [`cli`]: the batch command-line harness.
//! - [`json`]: JSON conversions for scripts and bindings.

pub mod cli;
pub mod json;
pub mod placement;
pub mod query;
pub mod record;
pub mod runtime;
pub mod schema;
pub mod storage;
pub mod value;

pub use placement::{PlacementDecision, PolicyWeights, StoreMetrics};
pub use query::{FilterExpr, QueryOptions, SortSpec, Statement};
pub use record::Record;
pub use runtime::{IntegrityViolation, Orm, OrmConfig, RuntimeError, ViewRow};
pub use schema::{EntityDescriptor, FieldDescriptor, LocationId, RelationDescriptor, SchemaRegistry, StoreDescriptor};
pub use storage::{StoreHandle, Timing};
pub use value::{Value, ValueKind};
