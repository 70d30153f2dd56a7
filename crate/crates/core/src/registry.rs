//! Name-keyed registries of strategy constructors.
//!
//! Every interchangeable component (feasible set, potential, loss, data
//! generator) lives behind a trait object. A [`Registry`] maps a stable name
//! such as `"hinge"` or `"l2ball"` to a factory that builds the component from
//! flat string [`Params`], so configs and CLI flags can select them at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Flat `key -> value` parameters handed to a factory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn insert(&mut self, key: &str, value: impl fmt::Display) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing parameter {key}")))
    }

    /// Comma-separated list of reals.
    pub fn vector(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.0.get(key).map(|v| parse_list(key, v)).transpose()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse list entry {s:?}")))
        })
        .collect()
}

pub type Factory<T> = fn(&Params) -> Result<Arc<T>>;

struct Entry<T: ?Sized> {
    summary: &'static str,
    factory: Factory<T>,
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Entry<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &'static str, summary: &'static str, factory: Factory<T>) {
        self.entries.insert(name, Entry { summary, factory });
    }

    pub fn build(&self, name: &str, params: &Params) -> Result<Arc<T>> {
        let entry = self.entries.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown {} {name:?} (available: {})",
                self.kind,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        (entry.factory)(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|(k, e)| (*k, e.summary)).collect()
    }
}
