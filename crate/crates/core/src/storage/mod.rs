//! Store connections and statement execution.
//!
//! The embedded store keeps one in-memory table per registered entity and
//! interprets the statement dialect directly. External stores are
//! descriptor-only and cannot be opened.

mod dialect;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::query::{CompareOp, Direction, Statement};
use crate::schema::{FieldDescriptor, LocationId, SchemaRegistry, StoreKind};
use crate::value::{Value, ValueKind};

use dialect::{Command, Cond, Projection};

/// Values aligned to an entity's declared field order.
pub type Row = Vec<Value>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StorageError {
    #[error("unknown location {0}")]
    UnknownLocation(LocationId),
    #[error("store {0} is external and cannot be opened by the embedded engine")]
    UnsupportedStoreKind(LocationId),
    #[error("store {0} is closed")]
    ClosedStore(LocationId),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("malformed statement: {0}")]
    MalformedStatement(String),
    #[error("unknown table or field {0}")]
    UnknownTableOrField(String),
    #[error("type mismatch on {0}")]
    TypeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecOutcome {
    Rows(ResultSet),
    Affected(u64),
}

impl ExecOutcome {
    pub fn rows(&self) -> Option<&ResultSet> {
        match self {
            ExecOutcome::Rows(rs) => Some(rs),
            ExecOutcome::Affected(_) => None,
        }
    }

    pub fn into_rows(self) -> Option<ResultSet> {
        match self {
            ExecOutcome::Rows(rs) => Some(rs),
            ExecOutcome::Affected(_) => None,
        }
    }

    pub fn affected(&self) -> Option<u64> {
        match self {
            ExecOutcome::Affected(n) => Some(*n),
            ExecOutcome::Rows(_) => None,
        }
    }
}

/// How `measure` obtains a latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    /// Sleep for the extra delay, then report real elapsed time.
    WallClock { extra_delay: Duration },
    /// Report exactly this delay without sleeping. Replays are deterministic.
    Simulated { delay: Duration },
}

impl Default for Timing {
    fn default() -> Self {
        Timing::WallClock {
            extra_delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub outcome: ExecOutcome,
    /// Seconds.
    pub latency: f64,
    /// Bytes: params plus returned rows.
    pub payload: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    columns: Vec<FieldDescriptor>,
    primary_key: usize,
    rows: Vec<Row>,
}

impl Table {
    fn column(&self, name: &str) -> Result<usize, StorageError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| StorageError::UnknownTableOrField(name.to_owned()))
    }
}

/// An open connection to one embedded store.
#[derive(Debug, Clone)]
pub struct StoreHandle {
    location: LocationId,
    tables: BTreeMap<String, Table>,
    open: bool,
    timing: Timing,
}

/// Total payload size of a set of values.
pub fn payload_size<'a>(values: impl IntoIterator<Item = &'a Value>) -> u64 {
    values.into_iter().map(Value::wire_size).sum()
}

impl StoreHandle {
    /// Opens the store registered at `location` with one empty table per entity.
    pub fn open(registry: &SchemaRegistry, location: &LocationId) -> Result<Self, StorageError> {
        let store = registry
            .store(location)
            .ok_or_else(|| StorageError::UnknownLocation(location.clone()))?;
        if store.kind == StoreKind::External {
            return Err(StorageError::UnsupportedStoreKind(location.clone()));
        }
        let tables = registry
            .entities()
            .map(|e| {
                (
                    e.name.clone(),
                    Table {
                        columns: e.fields.clone(),
                        primary_key: e.primary_key_index(),
                        rows: Vec::new(),
                    },
                )
            })
            .collect();
        Ok(StoreHandle {
            location: location.clone(),
            tables,
            open: true,
            timing: Timing::default(),
        })
    }

    pub fn with_timing(mut self, timing: Timing) -> Self {
        self.timing = timing;
        self
    }

    pub fn set_timing(&mut self, timing: Timing) {
        self.timing = timing;
    }

    pub fn location(&self) -> &LocationId {
        &self.location
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn close(&mut self) {
        self.open = false;
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    /// Rows of a table in insertion order.
    pub fn rows(&self, table: &str) -> Option<&[Row]> {
        self.tables.get(table).map(|t| t.rows.as_slice())
    }

    /// JSON snapshot of every table, for debugging and state comparison.
    pub fn dump(&self) -> serde_json::Value {
        let tables: BTreeMap<&str, Vec<Vec<serde_json::Value>>> = self
            .tables
            .iter()
            .map(|(name, t)| {
                let rows = t
                    .rows
                    .iter()
                    .map(|r| r.iter().map(Value::to_json).collect())
                    .collect();
                (name.as_str(), rows)
            })
            .collect();
        serde_json::json!({ "location": self.location, "tables": tables })
    }

    pub fn execute(&mut self, statement: &Statement) -> Result<ExecOutcome, StorageError> {
        self.execute_raw(&statement.text, &statement.params)
    }

    /// Runs hand-written statement text. Table and field names are checked
    /// only when the statement executes.
    pub fn execute_raw(&mut self, text: &str, params: &[Value]) -> Result<ExecOutcome, StorageError> {
        if !self.open {
            return Err(StorageError::ClosedStore(self.location.clone()));
        }
        let (command, placeholders) = dialect::parse(text).map_err(StorageError::MalformedStatement)?;
        if placeholders != params.len() {
            return Err(StorageError::MalformedStatement(format!(
                "{placeholders} placeholders but {} params",
                params.len()
            )));
        }
        match command {
            Command::Select {
                table,
                projection,
                filter,
                order,
                limit,
                offset,
            } => {
                let t = self.table(&table)?;
                select(t, &projection, filter.as_ref(), &order, limit, offset, params).map(ExecOutcome::Rows)
            }
            Command::Insert {
                table,
                columns,
                params: slots,
            } => {
                let t = self.table_mut(&table)?;
                insert(t, &columns, &slots, params).map(ExecOutcome::Affected)
            }
            Command::Update { table, sets, filter } => {
                let t = self.table_mut(&table)?;
                update(t, &sets, filter.as_ref(), params).map(ExecOutcome::Affected)
            }
            Command::Delete { table, filter } => {
                let t = self.table_mut(&table)?;
                let hits = matching(t, filter.as_ref(), params)?;
                let before = t.rows.len();
                let mut hits = hits.into_iter();
                t.rows.retain(|_| !hits.next().unwrap_or(false));
                Ok(ExecOutcome::Affected((before - t.rows.len()) as u64))
            }
        }
    }

    /// Executes and reports latency and payload size.
    pub fn measure(&mut self, statement: &Statement) -> Result<Measured, StorageError> {
        let started = Instant::now();
        let outcome = self.execute(statement)?;
        let latency = match self.timing {
            Timing::WallClock { extra_delay } => {
                if !extra_delay.is_zero() {
                    std::thread::sleep(extra_delay);
                }
                started.elapsed().as_secs_f64()
            }
            Timing::Simulated { delay } => delay.as_secs_f64(),
        };
        let mut payload = payload_size(&statement.params);
        if let ExecOutcome::Rows(rs) = &outcome {
            payload += rs.rows.iter().map(payload_size).sum::<u64>();
        }
        Ok(Measured {
            outcome,
            latency,
            payload,
        })
    }

    fn table(&self, name: &str) -> Result<&Table, StorageError> {
        self.tables
            .get(name)
            .ok_or_else(|| StorageError::UnknownTableOrField(name.to_owned()))
    }

    fn table_mut(&mut self, name: &str) -> Result<&mut Table, StorageError> {
        self.tables
            .get_mut(name)
            .ok_or_else(|| StorageError::UnknownTableOrField(name.to_owned()))
    }
}

fn eval(table: &Table, cond: &Cond, row: &Row, params: &[Value]) -> Result<bool, StorageError> {
    Ok(match cond {
        Cond::Const(b) => *b,
        Cond::IsNull { field, negated } => row[table.column(field)?].is_null() != *negated,
        Cond::And(items) => {
            for item in items {
                if !eval(table, item, row, params)? {
                    return Ok(false);
                }
            }
            true
        }
        Cond::Or(items) => {
            for item in items {
                if eval(table, item, row, params)? {
                    return Ok(true);
                }
            }
            false
        }
        Cond::Not(child) => !eval(table, child, row, params)?,
        Cond::Compare { field, op, param } => {
            let cell = &row[table.column(field)?];
            let literal = &params[*param];
            if cell.is_null() {
                return Ok(false);
            }
            let mismatch = || StorageError::TypeMismatch(field.clone());
            if *op == CompareOp::Like {
                match (cell, literal) {
                    (Value::Text(s), Value::Text(p)) => like(s, p),
                    _ => return Err(mismatch()),
                }
            } else {
                let ord = cell.compare(literal).ok_or_else(mismatch)?;
                match op {
                    CompareOp::Eq => ord == Ordering::Equal,
                    CompareOp::Neq => ord != Ordering::Equal,
                    CompareOp::Lt => ord == Ordering::Less,
                    CompareOp::Le => ord != Ordering::Greater,
                    CompareOp::Gt => ord == Ordering::Greater,
                    CompareOp::Ge => ord != Ordering::Less,
                    CompareOp::Like => unreachable!(),
                }
            }
        }
    })
}

/// `%` matches any run of characters, `_` exactly one. Case-sensitive.
pub(crate) fn like(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    // reachable[j]: pattern prefix p[..i] matches text prefix t[..j]
    let mut reachable = vec![false; t.len() + 1];
    reachable[0] = true;
    for &pc in &p {
        let mut next = vec![false; t.len() + 1];
        match pc {
            '%' => {
                let mut any = false;
                for j in 0..=t.len() {
                    any |= reachable[j];
                    next[j] = any;
                }
            }
            _ => {
                for j in 0..t.len() {
                    if reachable[j] && (pc == '_' || pc == t[j]) {
                        next[j + 1] = true;
                    }
                }
            }
        }
        reachable = next;
    }
    reachable[t.len()]
}

fn matching(table: &Table, filter: Option<&Cond>, params: &[Value]) -> Result<Vec<bool>, StorageError> {
    table
        .rows
        .iter()
        .map(|row| match filter {
            Some(c) => eval(table, c, row, params),
            None => Ok(true),
        })
        .collect()
}

fn count_param(params: &[Value], slot: Option<usize>) -> Result<Option<usize>, StorageError> {
    match slot.map(|i| &params[i]) {
        None => Ok(None),
        Some(Value::Integer(n)) if *n >= 0 => Ok(Some(usize::try_from(*n).unwrap_or(usize::MAX))),
        Some(other) => Err(StorageError::MalformedStatement(format!(
            "LIMIT/OFFSET needs a non-negative integer, got {other}"
        ))),
    }
}

fn select(
    table: &Table,
    projection: &Projection,
    filter: Option<&Cond>,
    order: &[(String, Direction)],
    limit: Option<usize>,
    offset: Option<usize>,
    params: &[Value],
) -> Result<ResultSet, StorageError> {
    let columns: Vec<usize> = match projection {
        Projection::All => (0..table.columns.len()).collect(),
        Projection::Columns(names) => names.iter().map(|n| table.column(n)).collect::<Result<_, _>>()?,
    };
    let keys: Vec<(usize, Direction)> = order
        .iter()
        .map(|(f, d)| table.column(f).map(|i| (i, *d)))
        .collect::<Result<_, _>>()?;
    let limit = count_param(params, limit)?;
    let offset = count_param(params, offset)?.unwrap_or(0);

    let flags = matching(table, filter, params)?;
    let mut hits: Vec<&Row> = table
        .rows
        .iter()
        .zip(flags)
        .filter_map(|(r, keep)| keep.then_some(r))
        .collect();
    if !keys.is_empty() {
        // stable: ties keep insertion order
        hits.sort_by(|a, b| compare_rows(a, b, &keys));
    }
    let rows = hits
        .into_iter()
        .skip(offset)
        .take(limit.unwrap_or(usize::MAX))
        .map(|r| columns.iter().map(|&i| r[i].clone()).collect())
        .collect();
    Ok(ResultSet {
        columns: columns.iter().map(|&i| table.columns[i].name.clone()).collect(),
        rows,
    })
}

pub(crate) fn compare_rows(a: &Row, b: &Row, keys: &[(usize, Direction)]) -> Ordering {
    for &(i, dir) in keys {
        let ord = a[i].sort_cmp(&b[i]);
        let ord = match dir {
            Direction::Asc => ord,
            Direction::Desc => ord.reverse(),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

fn check_cell(column: &FieldDescriptor, value: &Value) -> Result<(), StorageError> {
    match value.kind() {
        None if column.nullable => Ok(()),
        None => Err(StorageError::ConstraintViolation(format!(
            "{} cannot be NULL",
            column.name
        ))),
        Some(k) if k == column.kind => Ok(()),
        Some(ValueKind::Integer) if column.kind == ValueKind::Float => Ok(()),
        Some(_) => Err(StorageError::TypeMismatch(column.name.clone())),
    }
}

/// Integers written to float columns are stored as floats.
fn normalize(column: &FieldDescriptor, value: &Value) -> Value {
    match (column.kind, value) {
        (ValueKind::Float, Value::Integer(i)) => Value::Float(*i as f64),
        _ => value.clone(),
    }
}

fn pk_taken(table: &Table, key: &Value, skip: Option<usize>) -> bool {
    table
        .rows
        .iter()
        .enumerate()
        .any(|(i, r)| Some(i) != skip && r[table.primary_key].sql_eq(key))
}

fn insert(table: &mut Table, columns: &[String], slots: &[usize], params: &[Value]) -> Result<u64, StorageError> {
    let mut row: Row = vec![Value::Null; table.columns.len()];
    let mut assigned = vec![false; table.columns.len()];
    for (name, &slot) in columns.iter().zip(slots) {
        let idx = table.column(name)?;
        if std::mem::replace(&mut assigned[idx], true) {
            return Err(StorageError::MalformedStatement(format!("column {name} listed twice")));
        }
        check_cell(&table.columns[idx], &params[slot])?;
        row[idx] = normalize(&table.columns[idx], &params[slot]);
    }
    for (idx, column) in table.columns.iter().enumerate() {
        if !assigned[idx] {
            check_cell(column, &Value::Null)?;
        }
    }
    if pk_taken(table, &row[table.primary_key], None) {
        return Err(StorageError::ConstraintViolation(format!(
            "duplicate primary key {}",
            row[table.primary_key]
        )));
    }
    table.rows.push(row);
    Ok(1)
}

fn update(
    table: &mut Table,
    sets: &[(String, usize)],
    filter: Option<&Cond>,
    params: &[Value],
) -> Result<u64, StorageError> {
    let mut assignments = Vec::with_capacity(sets.len());
    for (name, slot) in sets {
        let idx = table.column(name)?;
        check_cell(&table.columns[idx], &params[*slot])?;
        assignments.push((idx, normalize(&table.columns[idx], &params[*slot])));
    }
    let flags = matching(table, filter, params)?;
    let mut staged = table.rows.clone();
    let mut affected = 0;
    for (row, hit) in staged.iter_mut().zip(&flags) {
        if *hit {
            for (idx, value) in &assignments {
                row[*idx] = value.clone();
            }
            affected += 1;
        }
    }
    if assignments.iter().any(|(i, _)| *i == table.primary_key) {
        let pk = table.primary_key;
        for (i, row) in staged.iter().enumerate() {
            if staged[..i].iter().any(|other| other[pk].sql_eq(&row[pk])) {
                return Err(StorageError::ConstraintViolation(format!(
                    "duplicate primary key {}",
                    row[pk]
                )));
            }
        }
    }
    table.rows = staged;
    Ok(affected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{build_insert, build_select, FilterExpr, QueryOptions};
    use crate::record::Record;
    use crate::schema::{EntityDescriptor, Privacy, StoreDescriptor};
    use crate::value::parse_date;

    fn registry() -> SchemaRegistry {
        let mut reg = SchemaRegistry::new();
        reg.register_entity(EntityDescriptor::new(
            "Students",
            vec![
                FieldDescriptor::new("id_student", ValueKind::Integer).primary_key(),
                FieldDescriptor::new("surname", ValueKind::Text),
                FieldDescriptor::new("name", ValueKind::Text),
                FieldDescriptor::new("birthday", ValueKind::Date),
                FieldDescriptor::new("agv_sorce", ValueKind::Float),
            ],
        ))
        .unwrap();
        reg.register_entity(EntityDescriptor::new(
            "Groups",
            vec![FieldDescriptor::new("id_group", ValueKind::Integer).primary_key()],
        ))
        .unwrap();
        reg.register_store(StoreDescriptor::embedded("private1", Privacy::Private)).unwrap();
        reg.register_store(StoreDescriptor::external("cloud", Privacy::Public, "pg://x")).unwrap();
        reg
    }

    fn ivanov() -> Record {
        Record::new("Students")
            .with("id_student", 1i64)
            .with("surname", "Ivanov")
            .with("name", "Ivan")
            .with("birthday", parse_date("1995-01-01").unwrap())
            .with("agv_sorce", 4.5)
    }

    #[test]
    fn open_creates_empty_tables() {
        let h = StoreHandle::open(&registry(), &"private1".into()).unwrap();
        assert_eq!(h.table_count(), 2);
        assert_eq!(h.rows("Students").unwrap().len(), 0);
    }

    #[test]
    fn open_errors() {
        assert_eq!(
            StoreHandle::open(&registry(), &"nowhere".into()).unwrap_err(),
            StorageError::UnknownLocation("nowhere".into())
        );
        assert_eq!(
            StoreHandle::open(&registry(), &"cloud".into()).unwrap_err(),
            StorageError::UnsupportedStoreKind("cloud".into())
        );
    }

    #[test]
    fn insert_select_round_trip_and_duplicate_pk() {
        let reg = registry();
        let mut h = StoreHandle::open(&reg, &"private1".into()).unwrap();
        let ins = build_insert(&reg, "Students", &ivanov()).unwrap();
        assert_eq!(h.execute(&ins).unwrap(), ExecOutcome::Affected(1));
        let before = h.dump();
        let err = h.execute(&ins).unwrap_err();
        assert!(matches!(err, StorageError::ConstraintViolation(_)));
        assert_eq!(h.dump(), before);
        let sel = build_select(&reg, "Students", &QueryOptions::new()).unwrap();
        let rs = h.execute(&sel).unwrap().into_rows().unwrap();
        assert_eq!(rs.rows, vec![ins.params.clone()]);
    }

    #[test]
    fn measure_payload_follows_wire_rule() {
        let reg = registry();
        let mut h = StoreHandle::open(&reg, &"private1".into()).unwrap();
        let ins = build_insert(&reg, "Students", &ivanov()).unwrap();
        let m = h.measure(&ins).unwrap();
        // 8 + "Ivanov" + "Ivan" + 8 + 8
        assert_eq!(m.payload, 8 + 6 + 4 + 8 + 8);
        assert!(m.latency >= 0.0);
        let empty = build_select(&reg, "Groups", &QueryOptions::new()).unwrap();
        assert_eq!(h.measure(&empty).unwrap().payload, 0);
    }

    #[test]
    fn simulated_timing_reports_injected_delay() {
        let reg = registry();
        let mut h = StoreHandle::open(&reg, &"private1".into())
            .unwrap()
            .with_timing(Timing::Simulated {
                delay: Duration::from_millis(50),
            });
        let sel = build_select(&reg, "Groups", &QueryOptions::new()).unwrap();
        assert_eq!(h.measure(&sel).unwrap().latency, 0.05);
    }

    #[test]
    fn raw_projection_and_errors() {
        let reg = registry();
        let mut h = StoreHandle::open(&reg, &"private1".into()).unwrap();
        assert_eq!(h.execute_raw("DELETE FROM Students", &[]).unwrap(), ExecOutcome::Affected(0));
        h.execute(&build_insert(&reg, "Students", &ivanov()).unwrap()).unwrap();
        let rs = h
            .execute_raw("SELECT surname FROM Students WHERE agv_sorce > ?", &[Value::Float(4.0)])
            .unwrap()
            .into_rows()
            .unwrap();
        assert_eq!(rs.columns, vec!["surname"]);
        assert_eq!(rs.rows, vec![vec![Value::from("Ivanov")]]);
        assert!(matches!(
            h.execute_raw("SELECT * FROM Nope", &[]),
            Err(StorageError::UnknownTableOrField(_))
        ));
        assert!(matches!(
            h.execute_raw("SELECT * FROM Students WHERE id_student = ?", &[]),
            Err(StorageError::MalformedStatement(_))
        ));
        assert!(matches!(
            h.execute_raw("SELECT * FROM Students WHERE surname = ?", &[Value::Integer(1)]),
            Err(StorageError::TypeMismatch(_))
        ));
    }

    #[test]
    fn closed_store_rejects() {
        let reg = registry();
        let mut h = StoreHandle::open(&reg, &"private1".into()).unwrap();
        h.close();
        let sel = build_select(&reg, "Groups", &QueryOptions::new()).unwrap();
        assert_eq!(h.execute(&sel).unwrap_err(), StorageError::ClosedStore("private1".into()));
    }

    #[test]
    fn update_pk_collision_is_atomic() {
        let reg = registry();
        let mut h = StoreHandle::open(&reg, &"private1".into()).unwrap();
        for id in [1i64, 2] {
            h.execute_raw("INSERT INTO Groups (id_group) VALUES (?)", &[Value::Integer(id)])
                .unwrap();
        }
        let before = h.dump();
        let err = h
            .execute_raw("UPDATE Groups SET id_group = ?", &[Value::Integer(7)])
            .unwrap_err();
        assert!(matches!(err, StorageError::ConstraintViolation(_)));
        assert_eq!(h.dump(), before);
        let n = h
            .execute_raw(
                "UPDATE Groups SET id_group = ? WHERE id_group = ?",
                &[Value::Integer(7), Value::Integer(2)],
            )
            .unwrap();
        assert_eq!(n, ExecOutcome::Affected(1));
    }

    #[test]
    fn stable_sort_and_null_filters() {
        let mut reg = SchemaRegistry::new();
        reg.register_entity(EntityDescriptor::new(
            "T",
            vec![
                FieldDescriptor::new("id", ValueKind::Integer).primary_key(),
                FieldDescriptor::new("k", ValueKind::Integer).nullable(),
            ],
        ))
        .unwrap();
        reg.register_store(StoreDescriptor::embedded("s", Privacy::Public)).unwrap();
        let mut h = StoreHandle::open(&reg, &"s".into()).unwrap();
        for (id, k) in [(1, Value::Integer(2)), (2, Value::Null), (3, Value::Integer(2)), (4, Value::Integer(1))] {
            h.execute_raw("INSERT INTO T (id, k) VALUES (?, ?)", &[Value::Integer(id), k])
                .unwrap();
        }
        let rs = h.execute_raw("SELECT id FROM T ORDER BY k DESC", &[]).unwrap();
        let ids: Vec<_> = rs.rows().unwrap().rows.iter().map(|r| r[0].clone()).collect();
        assert_eq!(ids, vec![1i64.into(), 3i64.into(), 4i64.into(), 2i64.into()]);
        let opts = QueryOptions::new().filter(FilterExpr::not(FilterExpr::eq("k", 2i64)));
        let st = build_select(&reg, "T", &opts).unwrap();
        let n = h.execute(&st).unwrap().into_rows().unwrap().rows.len();
        // NULL cell: comparison false, so NOT makes it true
        assert_eq!(n, 2);
    }

    #[test]
    fn like_patterns() {
        assert!(like("Ivanov", "Iv%"));
        assert!(like("Ivanov", "%nov"));
        assert!(like("Ivanov", "I_a%v"));
        assert!(!like("Ivanov", "iv%"));
        assert!(like("", "%"));
        assert!(!like("", "_"));
        assert!(like("a%b", "a%b"));
    }
}
