//! Versioned output envelopes shared by the CLI and the Python bindings.

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEnvelope<T> {
    pub format: Format,
    pub schema_version: String,
    pub payload: T,
}

impl<T> OutputEnvelope<T> {
    pub fn json(payload: T) -> Self {
        Self {
            format: Format::Json,
            schema_version: SCHEMA_VERSION.into(),
            payload,
        }
    }
}

pub fn to_json<T: Serialize>(payload: &T) -> Result<String> {
    let env = OutputEnvelope {
        format: Format::Json,
        schema_version: SCHEMA_VERSION.into(),
        payload,
    };
    serde_json::to_string_pretty(&env).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<OutputEnvelope<T>> {
    let env: OutputEnvelope<T> =
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported schema_version {}",
            env.schema_version
        )));
    }
    Ok(env)
}

/// Prefixes a CSV body (header row first) with the schema comment line.
pub fn csv_document(body: &str) -> String {
    format!("# schema_version={SCHEMA_VERSION}\n{body}")
}

/// Strips the schema comment, returning the header-first CSV body.
pub fn csv_body(doc: &str) -> &str {
    match doc.strip_prefix('#') {
        Some(rest) => rest.split_once('\n').map_or("", |(_, b)| b),
        None => doc,
    }
}
