//! Dotted `key=value` overrides applied on top of a serializable config.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Applies each `path.to.key=value` in order. The value is parsed as JSON when
/// possible and taken as a plain string otherwise. Keys must already exist in
/// the serialized form of `config`.
pub fn apply_overrides<C: Serialize + DeserializeOwned>(config: &C, overrides: &[String]) -> Result<C> {
    let mut root = serde_json::to_value(config).map_err(|e| Error::config("config", e.to_string()))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::config(item.clone(), "override must have the form key=value"))?;
        let key = key.trim();
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|obj| obj.get_mut(part))
                .ok_or_else(|| Error::config(key, "unknown configuration key"))?;
        }
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        serde_json::from_value::<C>(root.clone()).map_err(|e| Error::config(key, e.to_string()))?;
    }
    serde_json::from_value(root).map_err(|e| Error::config("config", e.to_string()))
}

/// Parses a JSON config text; any schema or syntax problem is a config error.
pub fn parse_config<C: DeserializeOwned>(text: &str) -> Result<C> {
    serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
}
