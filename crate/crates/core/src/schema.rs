//! Declarative metadata registry: entities, fields, relations and stores.
//!
//! Registration checks each descriptor in isolation, so entities may be
//! registered in any order. Cross-entity consistency (relation targets, link
//! entities, foreign-key kinds) is reported by [`SchemaRegistry::validate`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::ValueKind;

/// System attribute holding the store a record lives in. Never a user field.
pub const LOCATION_ATTRIBUTE: &str = "__location";

/// Words of the statement dialect; rejected as identifiers.
pub(crate) const KEYWORDS: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "ORDER", "BY", "ASC", "DESC", "LIMIT",
    "OFFSET", "INSERT", "INTO", "VALUES", "UPDATE", "SET", "DELETE", "IS", "NULL", "LIKE",
];

/// `[A-Za-z_][A-Za-z0-9_]*`, not a dialect keyword.
pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(name))
}

/// Identity of a store; the value of a record's location attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(String);

impl LocationId {
    pub fn new(id: impl Into<String>) -> Self {
        LocationId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LocationId {
    fn from(s: &str) -> Self {
        LocationId(s.to_owned())
    }
}

impl From<String> for LocationId {
    fn from(s: String) -> Self {
        LocationId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDescriptor {
    pub name: String,
    pub kind: ValueKind,
    #[serde(default, skip_serializing_if = "is_false")]
    pub nullable: bool,
    #[serde(rename = "pk", default, skip_serializing_if = "is_false")]
    pub primary_key: bool,
    /// Entity whose primary key this field holds. Required on the two
    /// foreign-key fields of a link entity, optional elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl FieldDescriptor {
    pub fn new(name: impl Into<String>, kind: ValueKind) -> Self {
        FieldDescriptor {
            name: name.into(),
            kind,
            nullable: false,
            primary_key: false,
            references: None,
        }
    }

    pub fn primary_key(mut self) -> Self {
        self.primary_key = true;
        self
    }

    pub fn nullable(mut self) -> Self {
        self.nullable = true;
        self
    }

    pub fn references(mut self, entity: impl Into<String>) -> Self {
        self.references = Some(entity.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidentiality {
    #[default]
    PublicOk,
    PrivateOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    OneToMany,
    ManyToMany,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnDelete {
    #[default]
    Restrict,
    Cascade,
}

/// A relation owned by its source entity.
///
/// `one_to_many`: rows of `target_entity` point at the source's primary key
/// through `foreign_key_field`. `many_to_many`: rows of `link_entity` hold
/// one foreign key to each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDescriptor {
    pub name: String,
    pub kind: RelationKind,
    pub target_entity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foreign_key_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_entity: Option<String>,
    #[serde(default)]
    pub on_delete: OnDelete,
}

impl RelationDescriptor {
    pub fn one_to_many(
        name: impl Into<String>,
        target_entity: impl Into<String>,
        foreign_key_field: impl Into<String>,
    ) -> Self {
        RelationDescriptor {
            name: name.into(),
            kind: RelationKind::OneToMany,
            target_entity: target_entity.into(),
            foreign_key_field: Some(foreign_key_field.into()),
            link_entity: None,
            on_delete: OnDelete::Restrict,
        }
    }

    pub fn many_to_many(
        name: impl Into<String>,
        target_entity: impl Into<String>,
        link_entity: impl Into<String>,
    ) -> Self {
        RelationDescriptor {
            name: name.into(),
            kind: RelationKind::ManyToMany,
            target_entity: target_entity.into(),
            foreign_key_field: None,
            link_entity: Some(link_entity.into()),
            on_delete: OnDelete::Restrict,
        }
    }

    pub fn on_delete(mut self, on_delete: OnDelete) -> Self {
        self.on_delete = on_delete;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityDescriptor {
    pub name: String,
    #[serde(default)]
    pub confidentiality: Confidentiality,
    pub fields: Vec<FieldDescriptor>,
    #[serde(default)]
    pub relations: Vec<RelationDescriptor>,
}

impl EntityDescriptor {
    pub fn new(name: impl Into<String>, fields: Vec<FieldDescriptor>) -> Self {
        EntityDescriptor {
            name: name.into(),
            confidentiality: Confidentiality::PublicOk,
            fields,
            relations: Vec::new(),
        }
    }

    pub fn private_only(mut self) -> Self {
        self.confidentiality = Confidentiality::PrivateOnly;
        self
    }

    pub fn with_relation(mut self, relation: RelationDescriptor) -> Self {
        self.relations.push(relation);
        self
    }

    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Index of the primary-key field. Descriptors in a registry always have one.
    pub fn primary_key_index(&self) -> usize {
        self.fields
            .iter()
            .position(|f| f.primary_key)
            .expect("registered entity has a primary key")
    }

    pub fn primary_key(&self) -> &FieldDescriptor {
        &self.fields[self.primary_key_index()]
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDescriptor> {
        self.relations.iter().find(|r| r.name == name)
    }

    /// Checks the descriptor's own invariants.
    pub fn check(&self) -> Result<(), String> {
        if !is_valid_identifier(&self.name) {
            return Err(format!("invalid entity name {:?}", self.name));
        }
        let mut seen = BTreeSet::new();
        for field in &self.fields {
            if field.name == LOCATION_ATTRIBUTE {
                return Err(format!("field name {LOCATION_ATTRIBUTE} is reserved"));
            }
            if !is_valid_identifier(&field.name) {
                return Err(format!("invalid field name {:?}", field.name));
            }
            if !seen.insert(field.name.as_str()) {
                return Err(format!("duplicate field {}", field.name));
            }
            if field.primary_key && field.nullable {
                return Err(format!("primary key {} cannot be nullable", field.name));
            }
            if let Some(r) = &field.references {
                if !is_valid_identifier(r) {
                    return Err(format!("field {} references invalid name {r:?}", field.name));
                }
            }
        }
        match self.fields.iter().filter(|f| f.primary_key).count() {
            1 => {}
            0 => return Err("no primary-key field".into()),
            n => return Err(format!("{n} primary-key fields, expected exactly one")),
        }
        let mut rel_names = BTreeSet::new();
        for rel in &self.relations {
            if !is_valid_identifier(&rel.name) {
                return Err(format!("invalid relation name {:?}", rel.name));
            }
            if !rel_names.insert(rel.name.as_str()) {
                return Err(format!("duplicate relation {}", rel.name));
            }
            if !is_valid_identifier(&rel.target_entity) {
                return Err(format!("relation {} has invalid target", rel.name));
            }
            match rel.kind {
                RelationKind::OneToMany => {
                    if rel.link_entity.is_some() {
                        return Err(format!("one_to_many relation {} has a link entity", rel.name));
                    }
                    match &rel.foreign_key_field {
                        Some(fk) if is_valid_identifier(fk) => {}
                        _ => {
                            return Err(format!(
                                "one_to_many relation {} needs a valid foreign_key_field",
                                rel.name
                            ))
                        }
                    }
                }
                RelationKind::ManyToMany => {
                    if rel.foreign_key_field.is_some() {
                        return Err(format!(
                            "many_to_many relation {} has a foreign_key_field",
                            rel.name
                        ));
                    }
                    match &rel.link_entity {
                        Some(l) if is_valid_identifier(l) => {}
                        _ => {
                            return Err(format!(
                                "many_to_many relation {} needs a valid link_entity",
                                rel.name
                            ))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Privacy {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreKind {
    #[default]
    Embedded,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreDescriptor {
    pub location: LocationId,
    pub privacy: Privacy,
    #[serde(default)]
    pub kind: StoreKind,
    /// Opaque connection string for external stores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection_hint: Option<String>,
}

impl StoreDescriptor {
    pub fn embedded(location: impl Into<LocationId>, privacy: Privacy) -> Self {
        StoreDescriptor {
            location: location.into(),
            privacy,
            kind: StoreKind::Embedded,
            connection_hint: None,
        }
    }

    pub fn external(location: impl Into<LocationId>, privacy: Privacy, hint: impl Into<String>) -> Self {
        StoreDescriptor {
            location: location.into(),
            privacy,
            kind: StoreKind::External,
            connection_hint: Some(hint.into()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("entity {0} is already registered")]
    DuplicateEntity(String),
    #[error("invalid descriptor for {entity}: {detail}")]
    InvalidDescriptor { entity: String, detail: String },
    #[error("store {0} is already registered")]
    DuplicateLocation(LocationId),
}

#[derive(Debug, Error)]
pub enum SchemaLoadError {
    #[error("cannot read schema: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Register(#[from] SchemaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    UnresolvedTarget,
    UnresolvedLink,
    UnresolvedReference,
    MissingForeignKey,
    ForeignKeyKindMismatch,
    MalformedLink,
    DuplicateRelation,
}

/// One cross-entity consistency problem, attributed to an entity and
/// (where applicable) a relation or field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub entity: String,
    pub relation: Option<String>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.relation {
            Some(r) => write!(f, "ERROR {}.{}: {}", self.entity, r, self.message),
            None => write!(f, "ERROR {}: {}", self.entity, self.message),
        }
    }
}

/// Relation with both ends resolved against the registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedRelation {
    pub name: String,
    pub source: String,
    pub target: String,
    pub on_delete: OnDelete,
    pub shape: RelationShape,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelationShape {
    /// Target rows carry `foreign_key` = source pk.
    OneToMany { foreign_key: String },
    /// Rows of `link` carry `source_field` = source pk and `target_field` = target pk.
    ManyToMany {
        link: String,
        source_field: String,
        target_field: String,
    },
}

/// Contents of a schema JSON file, before registration. Unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    #[serde(default)]
    pub entities: Vec<EntityDescriptor>,
    #[serde(default)]
    pub stores: Vec<StoreDescriptor>,
}

impl SchemaFile {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Registers every descriptor, collecting each registration failure
    /// instead of stopping at the first.
    pub fn register_all(self) -> (SchemaRegistry, Vec<SchemaError>) {
        let mut registry = SchemaRegistry::new();
        let mut errors = Vec::new();
        for entity in self.entities {
            if let Err(e) = registry.register_entity(entity) {
                errors.push(e);
            }
        }
        for store in self.stores {
            if let Err(e) = registry.register_store(store) {
                errors.push(e);
            }
        }
        (registry, errors)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaRegistry {
    entities: BTreeMap<String, EntityDescriptor>,
    stores: Vec<StoreDescriptor>,
}

impl SchemaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_entity(&mut self, descriptor: EntityDescriptor) -> Result<(), SchemaError> {
        descriptor
            .check()
            .map_err(|detail| SchemaError::InvalidDescriptor {
                entity: descriptor.name.clone(),
                detail,
            })?;
        if self.entities.contains_key(&descriptor.name) {
            return Err(SchemaError::DuplicateEntity(descriptor.name));
        }
        self.entities.insert(descriptor.name.clone(), descriptor);
        Ok(())
    }

    pub fn register_store(&mut self, store: StoreDescriptor) -> Result<(), SchemaError> {
        if self.store(&store.location).is_some() {
            return Err(SchemaError::DuplicateLocation(store.location));
        }
        self.stores.push(store);
        Ok(())
    }

    pub fn entity(&self, name: &str) -> Option<&EntityDescriptor> {
        self.entities.get(name)
    }

    /// Entities in name order.
    pub fn entities(&self) -> impl Iterator<Item = &EntityDescriptor> {
        self.entities.values()
    }

    pub fn store(&self, location: &LocationId) -> Option<&StoreDescriptor> {
        self.stores.iter().find(|s| &s.location == location)
    }

    /// Stores in registration order.
    pub fn stores(&self) -> &[StoreDescriptor] {
        &self.stores
    }

    pub fn from_json_str(text: &str) -> Result<Self, SchemaLoadError> {
        let (registry, errors) = SchemaFile::parse(text)?.register_all();
        match errors.into_iter().next() {
            Some(e) => Err(e.into()),
            None => Ok(registry),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SchemaLoadError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Looks a relation up by name across all entities.
    pub fn relation(&self, name: &str) -> Option<(&EntityDescriptor, &RelationDescriptor)> {
        self.entities
            .values()
            .find_map(|e| e.relation(name).map(|r| (e, r)))
    }

    /// Resolves a relation by name. `None` if it is unknown or does not
    /// validate.
    pub fn resolve_relation(&self, name: &str) -> Option<ResolvedRelation> {
        let (source, rel) = self.relation(name)?;
        self.resolve(source, rel).ok()
    }

    /// Every relation that resolves, in (source entity, declaration) order.
    pub fn resolved_relations(&self) -> Vec<ResolvedRelation> {
        self.entities
            .values()
            .flat_map(|e| e.relations.iter().map(move |r| (e, r)))
            .filter_map(|(e, r)| self.resolve(e, r).ok())
            .collect()
    }

    fn resolve(
        &self,
        source: &EntityDescriptor,
        rel: &RelationDescriptor,
    ) -> Result<ResolvedRelation, (DiagnosticKind, String)> {
        let target = self.entities.get(&rel.target_entity).ok_or_else(|| {
            (
                DiagnosticKind::UnresolvedTarget,
                format!("target entity {} is not registered", rel.target_entity),
            )
        })?;
        let source_pk = source.primary_key();
        let shape = match rel.kind {
            RelationKind::OneToMany => {
                let fk_name = rel.foreign_key_field.as_deref().unwrap_or_default();
                let fk = target.field(fk_name).ok_or_else(|| {
                    (
                        DiagnosticKind::MissingForeignKey,
                        format!("foreign key {fk_name} does not exist on {}", target.name),
                    )
                })?;
                if fk.kind != source_pk.kind {
                    return Err((
                        DiagnosticKind::ForeignKeyKindMismatch,
                        format!(
                            "foreign key {}.{fk_name} is {} but {}.{} is {}",
                            target.name, fk.kind, source.name, source_pk.name, source_pk.kind
                        ),
                    ));
                }
                if fk.references.as_ref().is_some_and(|r| r != &source.name) {
                    return Err((
                        DiagnosticKind::ForeignKeyKindMismatch,
                        format!("foreign key {}.{fk_name} references another entity", target.name),
                    ));
                }
                RelationShape::OneToMany {
                    foreign_key: fk_name.to_owned(),
                }
            }
            RelationKind::ManyToMany => {
                let link_name = rel.link_entity.as_deref().unwrap_or_default();
                let link = self.entities.get(link_name).ok_or_else(|| {
                    (
                        DiagnosticKind::UnresolvedLink,
                        format!("link entity {link_name} is not registered"),
                    )
                })?;
                let (source_field, target_field) = link_columns(link, source, target)
                    .map_err(|m| (DiagnosticKind::MalformedLink, m))?;
                RelationShape::ManyToMany {
                    link: link.name.clone(),
                    source_field,
                    target_field,
                }
            }
        };
        Ok(ResolvedRelation {
            name: rel.name.clone(),
            source: source.name.clone(),
            target: target.name.clone(),
            on_delete: rel.on_delete,
            shape,
        })
    }

    /// Cross-entity consistency check. Empty iff every relation resolves,
    /// foreign-key kinds match, link entities are well formed and every
    /// `references` names a registered entity. Pure.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut relation_owner: BTreeMap<&str, &str> = BTreeMap::new();
        for entity in self.entities.values() {
            for field in &entity.fields {
                if let Some(r) = &field.references {
                    if !self.entities.contains_key(r) {
                        out.push(Diagnostic {
                            entity: entity.name.clone(),
                            relation: Some(field.name.clone()),
                            kind: DiagnosticKind::UnresolvedReference,
                            message: format!("field references unregistered entity {r}"),
                        });
                    }
                }
            }
            for rel in &entity.relations {
                if let Some(owner) = relation_owner.insert(&rel.name, &entity.name) {
                    out.push(Diagnostic {
                        entity: entity.name.clone(),
                        relation: Some(rel.name.clone()),
                        kind: DiagnosticKind::DuplicateRelation,
                        message: format!("relation name already used by {owner}"),
                    });
                }
                if let Err((kind, message)) = self.resolve(entity, rel) {
                    out.push(Diagnostic {
                        entity: entity.name.clone(),
                        relation: Some(rel.name.clone()),
                        kind,
                        message,
                    });
                }
            }
        }
        out.sort();
        out
    }
}

/// Picks the source and target foreign-key columns of a link entity.
fn link_columns(
    link: &EntityDescriptor,
    source: &EntityDescriptor,
    target: &EntityDescriptor,
) -> Result<(String, String), String> {
    let refs: Vec<&FieldDescriptor> = link.fields.iter().filter(|f| f.references.is_some()).collect();
    if refs.len() != 2 {
        return Err(format!(
            "link entity {} has {} foreign-key fields, expected 2",
            link.name,
            refs.len()
        ));
    }
    let points_to = |f: &FieldDescriptor, e: &EntityDescriptor| f.references.as_deref() == Some(e.name.as_str());
    let (src, tgt) = if points_to(refs[0], source) && points_to(refs[1], target) {
        (refs[0], refs[1])
    } else if points_to(refs[1], source) && points_to(refs[0], target) {
        (refs[1], refs[0])
    } else {
        return Err(format!(
            "link entity {} must reference {} and {}",
            link.name, source.name, target.name
        ));
    };
    for (f, e) in [(src, source), (tgt, target)] {
        if f.kind != e.primary_key().kind {
            return Err(format!(
                "link field {}.{} is {} but {}'s key is {}",
                link.name,
                f.name,
                f.kind,
                e.name,
                e.primary_key().kind
            ));
        }
    }
    if link.primary_key().kind != ValueKind::Integer {
        return Err(format!("link entity {} needs an integer primary key", link.name));
    }
    Ok((src.name.clone(), tgt.name.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn student() -> EntityDescriptor {
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

    #[test]
    fn registers_student() {
        let mut reg = SchemaRegistry::new();
        reg.register_entity(student()).unwrap();
        assert_eq!(reg.entity("Students").unwrap().fields.len(), 5);
        assert!(reg.validate().is_empty());
    }

    #[test]
    fn rejects_missing_primary_key() {
        let mut reg = SchemaRegistry::new();
        let e = EntityDescriptor::new("T", vec![FieldDescriptor::new("a", ValueKind::Text)]);
        assert!(matches!(reg.register_entity(e), Err(SchemaError::InvalidDescriptor { .. })));
    }

    #[test]
    fn rejects_duplicate_entity() {
        let mut reg = SchemaRegistry::new();
        reg.register_entity(student()).unwrap();
        assert_eq!(
            reg.register_entity(student()),
            Err(SchemaError::DuplicateEntity("Students".into()))
        );
    }

    #[test]
    fn rejects_reserved_and_keyword_names() {
        for bad in [LOCATION_ATTRIBUTE, "select", "1abc", "", "a-b"] {
            let mut e = student();
            e.fields.push(FieldDescriptor::new(bad, ValueKind::Text));
            assert!(e.check().is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn rejects_nullable_primary_key() {
        let e = EntityDescriptor::new(
            "T",
            vec![FieldDescriptor::new("id", ValueKind::Integer).primary_key().nullable()],
        );
        assert!(e.check().is_err());
    }

    #[test]
    fn stores_are_unique() {
        let mut reg = SchemaRegistry::new();
        reg.register_store(StoreDescriptor::embedded("private1", Privacy::Private)).unwrap();
        assert_eq!(reg.stores().len(), 1);
        assert_eq!(
            reg.register_store(StoreDescriptor::embedded("private1", Privacy::Public)),
            Err(SchemaError::DuplicateLocation("private1".into()))
        );
    }

    #[test]
    fn stores_lookup_is_order_independent() {
        let mut a = SchemaRegistry::new();
        a.register_store(StoreDescriptor::embedded("public1", Privacy::Public)).unwrap();
        a.register_store(StoreDescriptor::embedded("private1", Privacy::Private)).unwrap();
        for loc in ["public1", "private1"] {
            assert!(a.store(&loc.into()).is_some());
        }
        assert_eq!(a.store(&"private1".into()).unwrap().privacy, Privacy::Private);
    }

    #[test]
    fn one_to_many_resolves() {
        let mut reg = SchemaRegistry::new();
        let mut s = student();
        s.fields.push(FieldDescriptor::new("group_id", ValueKind::Integer).nullable());
        reg.register_entity(s).unwrap();
        reg.register_entity(
            EntityDescriptor::new(
                "Groups",
                vec![FieldDescriptor::new("id_group", ValueKind::Integer).primary_key()],
            )
            .with_relation(RelationDescriptor::one_to_many("members", "Students", "group_id")),
        )
        .unwrap();
        assert_eq!(reg.validate(), vec![]);
        let rel = reg.resolve_relation("members").unwrap();
        assert_eq!(rel.source, "Groups");
        assert_eq!(
            rel.shape,
            RelationShape::OneToMany {
                foreign_key: "group_id".into()
            }
        );
    }

    #[test]
    fn unresolved_target_is_diagnosed() {
        let mut reg = SchemaRegistry::new();
        reg.register_entity(
            student().with_relation(RelationDescriptor::one_to_many("r", "Nope", "x")),
        )
        .unwrap();
        let diags = reg.validate();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::UnresolvedTarget);
        assert_eq!(diags[0].to_string(), "ERROR Students.r: target entity Nope is not registered");
    }

    #[test]
    fn link_with_one_foreign_key_is_malformed() {
        let mut reg = SchemaRegistry::new();
        reg.register_entity(
            student().with_relation(RelationDescriptor::many_to_many("courses", "Courses", "Enroll")),
        )
        .unwrap();
        reg.register_entity(EntityDescriptor::new(
            "Courses",
            vec![FieldDescriptor::new("id_course", ValueKind::Integer).primary_key()],
        ))
        .unwrap();
        reg.register_entity(EntityDescriptor::new(
            "Enroll",
            vec![
                FieldDescriptor::new("id", ValueKind::Integer).primary_key(),
                FieldDescriptor::new("student", ValueKind::Integer).references("Students"),
                FieldDescriptor::new("course", ValueKind::Integer),
            ],
        ))
        .unwrap();
        let diags = reg.validate();
        assert_eq!(diags.iter().map(|d| d.kind).collect::<Vec<_>>(), vec![DiagnosticKind::MalformedLink]);
        assert_eq!(reg.validate(), diags);
    }

    #[test]
    fn schema_file_is_strict() {
        let ok = r#"{"entities":[{"name":"Students","confidentiality":"public_ok",
            "fields":[{"name":"id_student","kind":"integer","pk":true}],"relations":[]}],
            "stores":[{"location":"private1","privacy":"private","kind":"embedded"}]}"#;
        let reg = SchemaRegistry::from_json_str(ok).unwrap();
        assert_eq!(reg.stores().len(), 1);
        let bad = r#"{"entities":[],"stores":[],"extra":1}"#;
        assert!(matches!(SchemaRegistry::from_json_str(bad), Err(SchemaLoadError::Parse(_))));
        let bad_field = r#"{"entities":[{"name":"S","fields":[{"name":"id","kind":"integer","pk":true,"colour":1}]}]}"#;
        assert!(matches!(SchemaRegistry::from_json_str(bad_field), Err(SchemaLoadError::Parse(_))));
    }
}
