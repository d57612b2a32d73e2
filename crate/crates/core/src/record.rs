use std::collections::BTreeMap;

use serde::Serialize;

use crate::schema::LocationId;
use crate::value::Value;

/// An entity instance: field values plus the store it lives in.
///
/// Records read back from the runtime always carry their location. On
/// insert the location is either chosen by the caller or left empty for the
/// placement policy to decide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub entity: String,
    pub values: BTreeMap<String, Value>,
    pub location: Option<LocationId>,
}

impl Record {
    pub fn new(entity: impl Into<String>) -> Self {
        Record {
            entity: entity.into(),
            values: BTreeMap::new(),
            location: None,
        }
    }

    pub fn with(mut self, field: impl Into<String>, value: impl Into<Value>) -> Self {
        self.values.insert(field.into(), value.into());
        self
    }

    pub fn at(mut self, location: impl Into<LocationId>) -> Self {
        self.location = Some(location.into());
        self
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.values.get(field)
    }

    pub fn set(&mut self, field: impl Into<String>, value: impl Into<Value>) {
        self.values.insert(field.into(), value.into());
    }
}
