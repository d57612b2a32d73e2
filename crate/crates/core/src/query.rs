//! Structured requests and statement generation.
//!
//! Statements use a single dialect: uppercase keywords, bare identifiers and
//! positional `?` placeholders. Every user value (including LIMIT and
//! OFFSET) travels in `Statement::params`, never in the text.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::Record;
use crate::schema::{EntityDescriptor, SchemaRegistry};
use crate::value::{Value, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Like,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Neq => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Like => "LIKE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum FilterExpr {
    #[default]
    True,
    Compare {
        field: String,
        op: CompareOp,
        value: Value,
    },
    And(Vec<FilterExpr>),
    Or(Vec<FilterExpr>),
    Not(Box<FilterExpr>),
}

impl FilterExpr {
    pub fn compare(field: impl Into<String>, op: CompareOp, value: impl Into<Value>) -> Self {
        FilterExpr::Compare {
            field: field.into(),
            op,
            value: value.into(),
        }
    }

    pub fn eq(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::compare(field, CompareOp::Eq, value)
    }

    pub fn neq(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::compare(field, CompareOp::Neq, value)
    }

    pub fn lt(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::compare(field, CompareOp::Lt, value)
    }

    pub fn le(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::compare(field, CompareOp::Le, value)
    }

    pub fn gt(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::compare(field, CompareOp::Gt, value)
    }

    pub fn ge(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Self::compare(field, CompareOp::Ge, value)
    }

    pub fn like(field: impl Into<String>, pattern: impl Into<String>) -> Self {
        Self::compare(field, CompareOp::Like, Value::Text(pattern.into()))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: FilterExpr) -> Self {
        FilterExpr::Not(Box::new(child))
    }

    fn is_identity(&self) -> bool {
        match self {
            FilterExpr::True => true,
            FilterExpr::And(items) => items.is_empty(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortSpec {
    pub field: String,
    #[serde(default)]
    pub direction: Direction,
}

impl SortSpec {
    pub fn asc(field: impl Into<String>) -> Self {
        SortSpec {
            field: field.into(),
            direction: Direction::Asc,
        }
    }

    pub fn desc(field: impl Into<String>) -> Self {
        SortSpec {
            field: field.into(),
            direction: Direction::Desc,
        }
    }
}

/// A stored request: filter, ordering and pagination.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryOptions {
    pub filter: FilterExpr,
    pub sorts: Vec<SortSpec>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

impl QueryOptions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn filter(mut self, filter: FilterExpr) -> Self {
        self.filter = filter;
        self
    }

    pub fn sort(mut self, sort: SortSpec) -> Self {
        self.sorts.push(sort);
        self
    }

    pub fn limit(mut self, limit: u64) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn offset(mut self, offset: u64) -> Self {
        self.offset = Some(offset);
        self
    }
}

/// Statement text plus positional parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statement {
    pub text: String,
    pub params: Vec<Value>,
}

impl Statement {
    pub fn new(text: impl Into<String>, params: Vec<Value>) -> Self {
        Statement {
            text: text.into(),
            params,
        }
    }

    pub fn placeholder_count(&self) -> usize {
        self.text.matches('?').count()
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("type mismatch on field {0}")]
    TypeMismatch(String),
    #[error("missing value for field {0}")]
    MissingField(String),
    #[error("update has no changes")]
    EmptyChanges,
    #[error("primary key {0} cannot be updated")]
    PrimaryKeyUpdate(String),
}

fn entity<'r>(registry: &'r SchemaRegistry, name: &str) -> Result<&'r EntityDescriptor, QueryError> {
    registry
        .entity(name)
        .ok_or_else(|| QueryError::UnknownEntity(name.to_owned()))
}

fn field_kind(entity: &EntityDescriptor, field: &str) -> Result<ValueKind, QueryError> {
    entity
        .field(field)
        .map(|f| f.kind)
        .ok_or_else(|| QueryError::UnknownField(field.to_owned()))
}

/// Checks a value about to be stored in `field`.
fn check_stored(entity: &EntityDescriptor, field: &str, value: &Value) -> Result<(), QueryError> {
    let desc = entity
        .field(field)
        .ok_or_else(|| QueryError::UnknownField(field.to_owned()))?;
    match value.kind() {
        None if desc.nullable => Ok(()),
        Some(k) if k == desc.kind => Ok(()),
        _ => Err(QueryError::TypeMismatch(field.to_owned())),
    }
}

/// Renders a filter as a WHERE clause body. `None` when the filter accepts
/// every row.
pub fn render_filter(
    entity: &EntityDescriptor,
    filter: &FilterExpr,
) -> Result<Option<(String, Vec<Value>)>, QueryError> {
    if filter.is_identity() {
        return Ok(None);
    }
    let mut text = String::new();
    let mut params = Vec::new();
    render_node(entity, filter, &mut text, &mut params)?;
    Ok(Some((text, params)))
}

fn render_node(
    entity: &EntityDescriptor,
    node: &FilterExpr,
    out: &mut String,
    params: &mut Vec<Value>,
) -> Result<(), QueryError> {
    match node {
        FilterExpr::True => out.push_str("(1=1)"),
        FilterExpr::And(items) if items.is_empty() => out.push_str("(1=1)"),
        FilterExpr::Or(items) if items.is_empty() => out.push_str("(1=0)"),
        FilterExpr::And(items) | FilterExpr::Or(items) => {
            let joiner = if matches!(node, FilterExpr::And(_)) {
                " AND "
            } else {
                " OR "
            };
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(joiner);
                }
                render_node(entity, item, out, params)?;
            }
            out.push(')');
        }
        FilterExpr::Not(child) => {
            out.push_str("(NOT ");
            render_node(entity, child, out, params)?;
            out.push(')');
        }
        FilterExpr::Compare { field, op, value } => {
            let kind = field_kind(entity, field)?;
            let mismatch = || QueryError::TypeMismatch(field.clone());
            match (op, value.kind()) {
                (CompareOp::Eq, None) => {
                    out.push_str(field);
                    out.push_str(" IS NULL");
                    return Ok(());
                }
                (CompareOp::Neq, None) => {
                    out.push_str(field);
                    out.push_str(" IS NOT NULL");
                    return Ok(());
                }
                (_, None) => return Err(mismatch()),
                (CompareOp::Like, Some(k)) => {
                    if kind != ValueKind::Text || k != ValueKind::Text {
                        return Err(mismatch());
                    }
                }
                (_, Some(k)) => {
                    if k != kind && !(k.is_numeric() && kind.is_numeric()) {
                        return Err(mismatch());
                    }
                }
            }
            out.push_str(field);
            out.push(' ');
            out.push_str(op.symbol());
            out.push_str(" ?");
            params.push(value.clone());
        }
    }
    Ok(())
}

fn push_where(
    entity: &EntityDescriptor,
    filter: &FilterExpr,
    text: &mut String,
    params: &mut Vec<Value>,
) -> Result<(), QueryError> {
    if let Some((clause, mut clause_params)) = render_filter(entity, filter)? {
        text.push_str(" WHERE ");
        text.push_str(&clause);
        params.append(&mut clause_params);
    }
    Ok(())
}

fn count_param(n: u64) -> Value {
    Value::Integer(i64::try_from(n).unwrap_or(i64::MAX))
}

pub fn build_select(
    registry: &SchemaRegistry,
    entity_name: &str,
    options: &QueryOptions,
) -> Result<Statement, QueryError> {
    let entity = entity(registry, entity_name)?;
    let columns: Vec<&str> = entity.fields.iter().map(|f| f.name.as_str()).collect();
    let mut text = format!("SELECT {} FROM {}", columns.join(", "), entity.name);
    let mut params = Vec::new();
    push_where(entity, &options.filter, &mut text, &mut params)?;
    if !options.sorts.is_empty() {
        let mut keys = Vec::with_capacity(options.sorts.len());
        for sort in &options.sorts {
            field_kind(entity, &sort.field)?;
            let dir = match sort.direction {
                Direction::Asc => "ASC",
                Direction::Desc => "DESC",
            };
            keys.push(format!("{} {dir}", sort.field));
        }
        text.push_str(" ORDER BY ");
        text.push_str(&keys.join(", "));
    }
    if let Some(limit) = options.limit {
        text.push_str(" LIMIT ?");
        params.push(count_param(limit));
    }
    if let Some(offset) = options.offset {
        text.push_str(" OFFSET ?");
        params.push(count_param(offset));
    }
    Ok(Statement { text, params })
}

pub fn build_insert(
    registry: &SchemaRegistry,
    entity_name: &str,
    record: &Record,
) -> Result<Statement, QueryError> {
    let entity = entity(registry, entity_name)?;
    if let Some(unknown) = record.values.keys().find(|k| entity.field(k).is_none()) {
        return Err(QueryError::UnknownField(unknown.clone()));
    }
    let mut columns = Vec::new();
    let mut params = Vec::new();
    for field in &entity.fields {
        match record.values.get(&field.name) {
            Some(value) => {
                check_stored(entity, &field.name, value)?;
                columns.push(field.name.as_str());
                params.push(value.clone());
            }
            None if !field.nullable => return Err(QueryError::MissingField(field.name.clone())),
            None => {}
        }
    }
    let placeholders = vec!["?"; params.len()].join(", ");
    let text = format!(
        "INSERT INTO {} ({}) VALUES ({placeholders})",
        entity.name,
        columns.join(", ")
    );
    Ok(Statement { text, params })
}

pub fn build_update(
    registry: &SchemaRegistry,
    entity_name: &str,
    changes: &BTreeMap<String, Value>,
    filter: &FilterExpr,
) -> Result<Statement, QueryError> {
    let entity = entity(registry, entity_name)?;
    if changes.is_empty() {
        return Err(QueryError::EmptyChanges);
    }
    if let Some(unknown) = changes.keys().find(|k| entity.field(k).is_none()) {
        return Err(QueryError::UnknownField(unknown.clone()));
    }
    let pk = entity.primary_key();
    if changes.contains_key(&pk.name) {
        return Err(QueryError::PrimaryKeyUpdate(pk.name.clone()));
    }
    let mut sets = Vec::new();
    let mut params = Vec::new();
    for field in &entity.fields {
        if let Some(value) = changes.get(&field.name) {
            check_stored(entity, &field.name, value)?;
            sets.push(format!("{} = ?", field.name));
            params.push(value.clone());
        }
    }
    let mut text = format!("UPDATE {} SET {}", entity.name, sets.join(", "));
    push_where(entity, filter, &mut text, &mut params)?;
    Ok(Statement { text, params })
}

pub fn build_delete(
    registry: &SchemaRegistry,
    entity_name: &str,
    filter: &FilterExpr,
) -> Result<Statement, QueryError> {
    let entity = entity(registry, entity_name)?;
    let mut text = format!("DELETE FROM {}", entity.name);
    let mut params = Vec::new();
    push_where(entity, filter, &mut text, &mut params)?;
    Ok(Statement { text, params })
}
