//! JSON-facing conversions shared by workload scripts and the bindings.
//!
//! Values are converted through the kind of the field they land in, so a
//! date is written as `"2001-03-14"` and an integer is accepted for a float
//! field.

use serde::Deserialize;
use serde_json::{Map, Value as Json};

use crate::query::{CompareOp, FilterExpr, QueryOptions, SortSpec};
use crate::record::Record;
use crate::schema::{EntityDescriptor, LocationId, SchemaRegistry};
use crate::value::{Value, ValueKind};

/// Filter tree as written in JSON: `"true"`, `{"and": [..]}`,
/// `{"or": [..]}`, `{"not": ..}`, or `{"<op>": ["field", value]}`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterSpec {
    #[default]
    True,
    And(Vec<FilterSpec>),
    Or(Vec<FilterSpec>),
    Not(Box<FilterSpec>),
    Eq(String, Json),
    Neq(String, Json),
    Lt(String, Json),
    Le(String, Json),
    Gt(String, Json),
    Ge(String, Json),
    Like(String, Json),
}

pub fn entity<'r>(registry: &'r SchemaRegistry, name: &str) -> Result<&'r EntityDescriptor, String> {
    registry.entity(name).ok_or_else(|| format!("unknown entity {name}"))
}

/// Converts `json` through the declared kind of `entity.field`.
pub fn value_for(entity: &EntityDescriptor, field: &str, json: &Json) -> Result<Value, String> {
    let desc = entity
        .field(field)
        .ok_or_else(|| format!("unknown field {}.{field}", entity.name))?;
    Value::from_json(json, desc.kind).map_err(|e| format!("{}.{field}: {e}", entity.name))
}

pub fn record(entity: &EntityDescriptor, values: &Map<String, Json>, location: Option<LocationId>) -> Result<Record, String> {
    let mut rec = Record::new(entity.name.clone());
    rec.location = location;
    for (field, json) in values {
        rec.values.insert(field.clone(), value_for(entity, field, json)?);
    }
    Ok(rec)
}

pub fn filter(entity: &EntityDescriptor, spec: &FilterSpec) -> Result<FilterExpr, String> {
    let cmp = |field: &String, op: CompareOp, json: &Json| -> Result<FilterExpr, String> {
        let kind = entity
            .field(field)
            .ok_or_else(|| format!("unknown field {}.{field}", entity.name))?
            .kind;
        // like patterns are text whatever the field kind; let the builder judge
        let kind = if op == CompareOp::Like { ValueKind::Text } else { kind };
        let value = Value::from_json(json, kind).map_err(|e| format!("{}.{field}: {e}", entity.name))?;
        Ok(FilterExpr::compare(field.clone(), op, value))
    };
    let all = |items: &[FilterSpec]| items.iter().map(|i| filter(entity, i)).collect::<Result<Vec<_>, _>>();
    Ok(match spec {
        FilterSpec::True => FilterExpr::True,
        FilterSpec::And(items) => FilterExpr::And(all(items)?),
        FilterSpec::Or(items) => FilterExpr::Or(all(items)?),
        FilterSpec::Not(child) => FilterExpr::not(filter(entity, child)?),
        FilterSpec::Eq(f, v) => cmp(f, CompareOp::Eq, v)?,
        FilterSpec::Neq(f, v) => cmp(f, CompareOp::Neq, v)?,
        FilterSpec::Lt(f, v) => cmp(f, CompareOp::Lt, v)?,
        FilterSpec::Le(f, v) => cmp(f, CompareOp::Le, v)?,
        FilterSpec::Gt(f, v) => cmp(f, CompareOp::Gt, v)?,
        FilterSpec::Ge(f, v) => cmp(f, CompareOp::Ge, v)?,
        FilterSpec::Like(f, v) => cmp(f, CompareOp::Like, v)?,
    })
}

pub fn options(
    entity: &EntityDescriptor,
    spec: &FilterSpec,
    sort: &[SortSpec],
    limit: Option<u64>,
    offset: Option<u64>,
) -> Result<QueryOptions, String> {
    Ok(QueryOptions {
        filter: filter(entity, spec)?,
        sorts: sort.to_vec(),
        limit,
        offset,
    })
}

/// Scalar conversion with no schema to guide it: integers stay integers,
/// strings stay text.
pub fn untyped(json: &Json) -> Result<Value, String> {
    Ok(match json {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Boolean(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) => Value::Integer(i),
            None => Value::Float(n.as_f64().ok_or("unrepresentable number")?),
        },
        Json::String(s) => Value::Text(s.clone()),
        other => return Err(format!("expected a scalar, got {other}")),
    })
}

/// The primary key value for `entity`, converted through its kind.
pub fn key_for(entity: &EntityDescriptor, json: &Json) -> Result<Value, String> {
    value_for(entity, &entity.primary_key().name, json)
}
