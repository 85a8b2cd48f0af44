//! Parameter resolution: command-line flag, then config file, then default.
//!
//! A config file is a JSON object. Keys at the top level apply to every
//! command; an object under a command's name (`{"train": {"epochs": 50}}`)
//! overrides them for that command. Keys use the flag name with `_` for `-`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rgin_core::io::config_digest;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Usage;

/// Every resolved parameter of one invocation. Output paths and the thread
/// count are left out: they do not change results.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn digest(&self) -> String {
        config_digest(self).expect("JSON values always serialize")
    }
}

pub struct Resolver {
    command: String,
    file: Map<String, Value>,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn new(command: &str, path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => return Err(Usage(format!("config {} is not a JSON object", p.display())).into()),
                    Err(e) => return Err(Usage(format!("config {}: {e}", p.display())).into()),
                }
            }
        };
        Ok(Self::from_map(command, file))
    }

    pub fn from_map(command: &str, file: Map<String, Value>) -> Self {
        Self {
            command: command.to_string(),
            file,
            resolved: BTreeMap::new(),
        }
    }

    fn file_value(&self, key: &str) -> Option<&Value> {
        self.file
            .get(&self.command)
            .and_then(|section| section.get(key))
            .or_else(|| self.file.get(key).filter(|v| !v.is_object()))
    }

    fn lookup<T: DeserializeOwned>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file_value(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Usage(format!("config key {key:?}: {e}")).into()),
        }
    }

    pub fn get<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let value = self.lookup(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    pub fn optional<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let value = self.lookup(key, flag)?;
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    /// Resolved like [`Resolver::get`] but kept out of the digest.
    pub fn untracked<T: DeserializeOwned>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        self.lookup(key, flag)
    }

    /// Records a derived value so it takes part in the digest.
    pub fn record<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.resolved.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn finish(self) -> RunConfig {
        RunConfig {
            command: self.command,
            params: self.resolved,
        }
    }
}
