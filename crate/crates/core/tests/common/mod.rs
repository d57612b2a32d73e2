//! Generators and reference models shared by the integration tests.
//!
//! The reference models here deliberately avoid the crate's own comparison,
//! LIKE and cost helpers so that agreement means something.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use locorm::placement::{PolicyWeights, StoreMetrics};
use locorm::query::{CompareOp, Direction, FilterExpr, QueryOptions, SortSpec};
use locorm::schema::{
    EntityDescriptor, FieldDescriptor, LocationId, OnDelete, Privacy, RelationDescriptor, SchemaRegistry,
    StoreDescriptor,
};
use locorm::{Orm, Record, Value, ValueKind};

pub type Row = BTreeMap<String, Value>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn student_schema() -> EntityDescriptor {
    EntityDescriptor::new(
        "Students",
        vec![
            FieldDescriptor::new("id_student", ValueKind::Integer).primary_key(),
            FieldDescriptor::new("surname", ValueKind::Text),
            FieldDescriptor::new("name", ValueKind::Text),
            FieldDescriptor::new("birthday", ValueKind::Date),
            FieldDescriptor::new("agv_sorce", ValueKind::Float),
        ],
    )
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

// ---- random single-store schemas --------------------------------------

const KINDS: [ValueKind; 5] = [
    ValueKind::Integer,
    ValueKind::Float,
    ValueKind::Text,
    ValueKind::Date,
    ValueKind::Boolean,
];

const TEXTS: [&str; 10] = ["", "a", "ab", "abc", "b", "ba", "b_c", "x%y", "Ivanov", "Iv"];
const FLOATS: [f64; 6] = [-1.5, 0.0, 0.5, 2.25, 3.0, 4.75];
const PATTERNS: [&str; 10] = ["%", "a%", "%b", "_b%", "a_", "", "%a%", "ab", "I%v", "%_%_"];

pub fn random_value(rng: &mut ChaCha8Rng, kind: ValueKind) -> Value {
    match kind {
        ValueKind::Integer => Value::Integer(rng.gen_range(-5..=5)),
        ValueKind::Float => Value::Float(*FLOATS.choose(rng).unwrap()),
        ValueKind::Text => Value::Text(TEXTS.choose(rng).unwrap().to_string()),
        ValueKind::Date => Value::Date(date(2000 + rng.gen_range(0..3), rng.gen_range(1..=2), 1)),
        ValueKind::Boolean => Value::Boolean(rng.gen()),
    }
}

/// Up to three entities, each with an integer `id` key and one to four
/// more columns of random kinds, plus one embedded store `s0`.
pub fn random_schema(rng: &mut ChaCha8Rng) -> SchemaRegistry {
    let mut reg = SchemaRegistry::new();
    for e in 0..rng.gen_range(1..=3) {
        let mut fields = vec![FieldDescriptor::new("id", ValueKind::Integer).primary_key()];
        for c in 0..rng.gen_range(1..=4) {
            let mut f = FieldDescriptor::new(format!("c{c}"), *KINDS.choose(rng).unwrap());
            if rng.gen_bool(0.5) {
                f = f.nullable();
            }
            fields.push(f);
        }
        reg.register_entity(EntityDescriptor::new(format!("t{e}"), fields)).unwrap();
    }
    reg.register_store(StoreDescriptor::embedded("s0", Privacy::Public)).unwrap();
    reg
}

pub fn random_row(rng: &mut ChaCha8Rng, entity: &EntityDescriptor, id: i64) -> Row {
    let mut row = Row::new();
    for f in &entity.fields {
        let v = if f.primary_key {
            Value::Integer(id)
        } else if f.nullable && rng.gen_bool(0.2) {
            Value::Null
        } else {
            random_value(rng, f.kind)
        };
        row.insert(f.name.clone(), v);
    }
    row
}

pub fn random_filter(rng: &mut ChaCha8Rng, entity: &EntityDescriptor, depth: u32) -> FilterExpr {
    if depth == 0 || rng.gen_bool(0.35) {
        return random_leaf(rng, entity);
    }
    match rng.gen_range(0..7) {
        0 | 1 => FilterExpr::And((0..rng.gen_range(0..=3)).map(|_| random_filter(rng, entity, depth - 1)).collect()),
        2 | 3 => FilterExpr::Or((0..rng.gen_range(0..=3)).map(|_| random_filter(rng, entity, depth - 1)).collect()),
        4 | 5 => FilterExpr::not(random_filter(rng, entity, depth - 1)),
        _ => FilterExpr::True,
    }
}

fn random_leaf(rng: &mut ChaCha8Rng, entity: &EntityDescriptor) -> FilterExpr {
    let field = entity.fields.choose(rng).unwrap();
    if field.kind == ValueKind::Text && rng.gen_bool(0.3) {
        return FilterExpr::like(field.name.clone(), *PATTERNS.choose(rng).unwrap());
    }
    let ops = [CompareOp::Eq, CompareOp::Neq, CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge];
    let op = *ops.choose(rng).unwrap();
    let value = if matches!(op, CompareOp::Eq | CompareOp::Neq) && rng.gen_bool(0.15) {
        Value::Null
    } else {
        random_value(rng, field.kind)
    };
    FilterExpr::compare(field.name.clone(), op, value)
}

pub fn random_options(rng: &mut ChaCha8Rng, entity: &EntityDescriptor, depth: u32) -> QueryOptions {
    let mut options = QueryOptions::new().filter(random_filter(rng, entity, depth));
    for _ in 0..rng.gen_range(0..=2) {
        let field = entity.fields.choose(rng).unwrap().name.clone();
        options = options.sort(if rng.gen() { SortSpec::asc(field) } else { SortSpec::desc(field) });
    }
    if rng.gen_bool(0.5) {
        options = options.limit(rng.gen_range(0..60));
    }
    if rng.gen_bool(0.5) {
        options = options.offset(rng.gen_range(0..60));
    }
    options
}

// ---- reference model --------------------------------------------------

/// Ordering of two non-null cells of the same kind.
fn cell_order(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Integer(x), Value::Integer(y)) => Some(x.cmp(y)),
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        (Value::Integer(x), Value::Float(y)) => (*x as f64).partial_cmp(y),
        (Value::Float(x), Value::Integer(y)) => x.partial_cmp(&(*y as f64)),
        (Value::Text(x), Value::Text(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Value::Date(x), Value::Date(y)) => Some(x.cmp(y)),
        (Value::Boolean(x), Value::Boolean(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Backtracking LIKE: `%` any run, `_` any one character.
pub fn oracle_like(text: &[char], pattern: &[char]) -> bool {
    match pattern.split_first() {
        None => text.is_empty(),
        Some(('%', rest)) => (0..=text.len()).any(|i| oracle_like(&text[i..], rest)),
        Some((p, rest)) => match text.split_first() {
            Some((t, text_rest)) => (*p == '_' || p == t) && oracle_like(text_rest, rest),
            None => false,
        },
    }
}

/// Two-valued semantics: any comparison against a NULL cell is false, and
/// `= NULL` / `<> NULL` test for (non-)nullness.
pub fn oracle_matches(filter: &FilterExpr, row: &Row) -> bool {
    match filter {
        FilterExpr::True => true,
        FilterExpr::And(items) => items.iter().all(|f| oracle_matches(f, row)),
        FilterExpr::Or(items) => items.iter().any(|f| oracle_matches(f, row)),
        FilterExpr::Not(inner) => !oracle_matches(inner, row),
        FilterExpr::Compare { field, op, value } => {
            let cell = &row[field];
            if value.is_null() {
                return match op {
                    CompareOp::Eq => cell.is_null(),
                    CompareOp::Neq => !cell.is_null(),
                    _ => false,
                };
            }
            if cell.is_null() {
                return false;
            }
            if *op == CompareOp::Like {
                let (Value::Text(t), Value::Text(p)) = (cell, value) else { return false };
                let t: Vec<char> = t.chars().collect();
                let p: Vec<char> = p.chars().collect();
                return oracle_like(&t, &p);
            }
            let Some(ord) = cell_order(cell, value) else { return false };
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
}

/// NULL first, then by value.
fn sort_order(a: &Value, b: &Value) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => cell_order(a, b).unwrap_or(Ordering::Equal),
    }
}

pub fn oracle_compare(a: &Row, b: &Row, sorts: &[SortSpec]) -> Ordering {
    for s in sorts {
        let mut ord = sort_order(&a[&s.field], &b[&s.field]);
        if s.direction == Direction::Desc {
            ord = ord.reverse();
        }
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

/// Filter, then stable sort, then offset, then limit.
pub fn oracle_select(rows: &[Row], options: &QueryOptions) -> Vec<Row> {
    let mut hits: Vec<Row> = rows.iter().filter(|r| oracle_matches(&options.filter, r)).cloned().collect();
    hits.sort_by(|a, b| oracle_compare(a, b, &options.sorts));
    let offset = options.offset.unwrap_or(0) as usize;
    let limit = options.limit.map_or(usize::MAX, |l| l as usize);
    hits.into_iter().skip(offset).take(limit).collect()
}

pub fn row_in_order(entity: &EntityDescriptor, row: &Row) -> Vec<Value> {
    entity.fields.iter().map(|f| row[&f.name].clone()).collect()
}

pub fn record_of(entity: &str, row: &Row) -> Record {
    Record {
        entity: entity.to_owned(),
        values: row.clone(),
        location: None,
    }
}

pub fn oracle_cost(m: &StoreMetrics, w: &PolicyWeights, payload: u64) -> f64 {
    payload as f64 / m.bandwidth + w.w_load * m.server_load + w.w_clients * m.active_clients as f64 + m.latency_ewma
}

// ---- multi-store university fixture -----------------------------------

/// Groups -< Students >-< Courses (through Enrollments), and
/// Students -< Grades where grades must stay private.
pub fn univ_registry(stores: &[(&str, Privacy)], on_delete: OnDelete) -> SchemaRegistry {
    let mut reg = SchemaRegistry::new();
    reg.register_entity(
        EntityDescriptor::new(
            "Groups",
            vec![
                FieldDescriptor::new("id_group", ValueKind::Integer).primary_key(),
                FieldDescriptor::new("title", ValueKind::Text),
            ],
        )
        .with_relation(RelationDescriptor::one_to_many("members", "Students", "group_id").on_delete(on_delete)),
    )
    .unwrap();
    reg.register_entity(
        EntityDescriptor::new(
            "Students",
            vec![
                FieldDescriptor::new("id_student", ValueKind::Integer).primary_key(),
                FieldDescriptor::new("surname", ValueKind::Text),
                FieldDescriptor::new("agv_sorce", ValueKind::Float),
                FieldDescriptor::new("group_id", ValueKind::Integer).nullable(),
            ],
        )
        .with_relation(RelationDescriptor::many_to_many("courses", "Courses", "Enrollments").on_delete(on_delete))
        .with_relation(RelationDescriptor::one_to_many("grades", "Grades", "student_id").on_delete(on_delete)),
    )
    .unwrap();
    reg.register_entity(EntityDescriptor::new(
        "Courses",
        vec![
            FieldDescriptor::new("id_course", ValueKind::Integer).primary_key(),
            FieldDescriptor::new("title", ValueKind::Text),
        ],
    ))
    .unwrap();
    reg.register_entity(EntityDescriptor::new(
        "Enrollments",
        vec![
            FieldDescriptor::new("id", ValueKind::Integer).primary_key(),
            FieldDescriptor::new("student", ValueKind::Integer).references("Students"),
            FieldDescriptor::new("course", ValueKind::Integer).references("Courses"),
        ],
    ))
    .unwrap();
    reg.register_entity(
        EntityDescriptor::new(
            "Grades",
            vec![
                FieldDescriptor::new("id_grade", ValueKind::Integer).primary_key(),
                FieldDescriptor::new("student_id", ValueKind::Integer),
                FieldDescriptor::new("mark", ValueKind::Integer),
            ],
        )
        .private_only(),
    )
    .unwrap();
    for (loc, privacy) in stores {
        reg.register_store(StoreDescriptor::embedded(*loc, *privacy)).unwrap();
    }
    reg
}

pub const UNIV_ENTITIES: [&str; 5] = ["Groups", "Students", "Courses", "Enrollments", "Grades"];

pub fn random_stores(rng: &mut ChaCha8Rng, n: usize) -> Vec<(&'static str, Privacy)> {
    const NAMES: [&str; 4] = ["east", "north", "south", "west"];
    let mut names = NAMES.to_vec();
    names.shuffle(rng);
    names
        .into_iter()
        .take(n)
        .map(|l| (l, if rng.gen() { Privacy::Private } else { Privacy::Public }))
        .collect()
}

pub fn group(id: i64) -> Record {
    Record::new("Groups").with("id_group", id).with("title", format!("G{id}"))
}

pub fn student(id: i64, group: Option<i64>, avg: f64) -> Record {
    Record::new("Students")
        .with("id_student", id)
        .with("surname", TEXTS[id.rem_euclid(TEXTS.len() as i64) as usize])
        .with("agv_sorce", avg)
        .with("group_id", group.map_or(Value::Null, Value::Integer))
}

pub fn course(id: i64) -> Record {
    Record::new("Courses").with("id_course", id).with("title", format!("C{id}"))
}

pub fn enrollment(id: i64, student: i64, course: i64) -> Record {
    Record::new("Enrollments")
        .with("id", id)
        .with("student", student)
        .with("course", course)
}

pub fn grade(id: i64, student: i64, mark: i64) -> Record {
    Record::new("Grades")
        .with("id_grade", id)
        .with("student_id", student)
        .with("mark", mark)
}

pub fn primary_key_of(orm: &Orm, entity: &str) -> String {
    orm.registry().entity(entity).unwrap().primary_key().name.clone()
}

/// Where a record with this key currently lives, if anywhere.
pub fn locate(orm: &Orm, entity: &str, key: &Value) -> Option<LocationId> {
    let pk = primary_key_of(orm, entity);
    orm.select(entity, &QueryOptions::new().filter(FilterExpr::eq(pk, key.clone())))
        .unwrap()
        .into_iter()
        .next()
        .and_then(|r| r.location)
}

/// What a random runtime op did, for the checks that need it.
#[derive(Debug, Clone)]
pub enum Applied {
    ExplicitInsert { entity: String, key: Value, location: LocationId },
    Other,
    Failed,
}

/// One random insert/update/delete/link/unlink through the runtime API.
pub fn apply_random_op(rng: &mut ChaCha8Rng, orm: &Orm) -> Applied {
    let locations = orm.locations();
    let some_location = |rng: &mut ChaCha8Rng| locations.choose(rng).unwrap().clone();
    let maybe_location = |rng: &mut ChaCha8Rng| if rng.gen() { Some(locations.choose(rng).unwrap().clone()) } else { None };
    let insert = |record: Record, location: Option<LocationId>| {
        let record = Record { location, ..record };
        match orm.insert_explained(&record) {
            Ok(out) if record.location.is_some() => Applied::ExplicitInsert {
                entity: record.entity.clone(),
                key: out.key,
                location: out.location,
            },
            Ok(_) => Applied::Other,
            Err(_) => Applied::Failed,
        }
    };
    let done = |ok: bool| if ok { Applied::Other } else { Applied::Failed };
    match rng.gen_range(0..11) {
        0 => insert(group(rng.gen_range(1..=6)), maybe_location(rng)),
        1 | 2 => {
            let g = if rng.gen_bool(0.3) { None } else { Some(rng.gen_range(1..=7)) };
            let r = student(rng.gen_range(1..=10), g, *FLOATS.choose(rng).unwrap());
            insert(r, maybe_location(rng))
        }
        3 => insert(course(rng.gen_range(1..=5)), maybe_location(rng)),
        4 => insert(grade(rng.gen_range(1..=10), rng.gen_range(1..=11), rng.gen_range(2..=5)), maybe_location(rng)),
        5 => {
            let (s, c) = (Value::Integer(rng.gen_range(1..=10)), Value::Integer(rng.gen_range(1..=5)));
            done(orm.link("courses", &s, &c, &some_location(rng)).is_ok())
        }
        6 => {
            let (s, c) = (Value::Integer(rng.gen_range(1..=10)), Value::Integer(rng.gen_range(1..=5)));
            done(orm.unlink("courses", &s, &c).is_ok())
        }
        7 => {
            let key = Value::Integer(rng.gen_range(1..=10));
            let location = match locate(orm, "Students", &key) {
                Some(l) if rng.gen_bool(0.8) => l,
                _ => some_location(rng),
            };
            let mut r = Record::new("Students").with("id_student", key).at(location);
            if rng.gen() {
                let g = if rng.gen_bool(0.3) { Value::Null } else { Value::Integer(rng.gen_range(1..=7)) };
                r.values.insert("group_id".into(), g);
            } else {
                r.values.insert("agv_sorce".into(), Value::Float(*FLOATS.choose(rng).unwrap()));
            }
            done(orm.update(&r).is_ok())
        }
        8 => {
            // repoint a link row, possibly onto an existing pair
            let links = orm.select("Enrollments", &QueryOptions::new()).unwrap();
            let Some(link) = links.choose(rng) else { return Applied::Failed };
            let field = if rng.gen() { "student" } else { "course" };
            let value = Value::Integer(rng.gen_range(1..=if field == "student" { 11 } else { 6 }));
            let r = Record::new("Enrollments")
                .with("id", link.values["id"].clone())
                .with(field, value)
                .at(link.location.clone().unwrap());
            done(orm.update(&r).is_ok())
        }
        _ => {
            let entity = *UNIV_ENTITIES.choose(rng).unwrap();
            let key = Value::Integer(rng.gen_range(1..=10));
            let location = match locate(orm, entity, &key) {
                Some(l) if rng.gen_bool(0.8) => l,
                _ => some_location(rng),
            };
            done(orm.delete(entity, &key, &location).is_ok())
        }
    }
}

// ---- hashing ----------------------------------------------------------

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of every store's canonical dump, in location order.
pub fn store_hashes(orm: &Orm) -> Vec<(LocationId, String)> {
    orm.locations()
        .into_iter()
        .map(|l| {
            let dump = orm.dump(&l).unwrap();
            let digest = Sha256::digest(serde_json::to_vec(&dump).unwrap());
            (l, hex(&digest))
        })
        .collect()
}
