//! JSON spec documents. Node indices are one-based; weights are JSON numbers
//! or strings such as `"1/3"`.
//!
//! ```json
//! {"nodes": 2, "bins": [2, 2],
//!  "source": {"1": [0.5, 0.5]},
//!  "two_cliques": [{"s": 1, "t": 2, "p": [[1, 2], [2, 1]]}],
//!  "three_cliques": [{"s": 1, "t1": 2, "t2": 3, "p": [[[..]]]}],
//!  "clamped": {"2": [0, 1]}}
//! ```

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use super::MrfSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    nodes: usize,
    bins: Vec<usize>,
    #[serde(default)]
    source: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    two_cliques: Vec<TwoCliqueDocument>,
    #[serde(default)]
    three_cliques: Vec<ThreeCliqueDocument>,
    #[serde(default)]
    clamped: BTreeMap<String, Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoCliqueDocument {
    s: usize,
    t: usize,
    p: Vec<Vec<Value>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreeCliqueDocument {
    s: usize,
    t1: usize,
    t2: usize,
    p: Vec<Vec<Vec<Value>>>,
}

fn weight<T: Scalar>(path: &str, value: &Value) -> Result<T> {
    let parsed = match value {
        Value::Number(n) => T::parse_scalar(&n.to_string()),
        Value::String(s) => T::parse_scalar(s),
        _ => None,
    };
    parsed.ok_or_else(|| Error::validation(path, format!("expected a number or \"a/b\" string, got {value}")))
}

fn node_index(path: &str, one_based: usize) -> Result<usize> {
    one_based.checked_sub(1).ok_or_else(|| Error::validation(path, "node indices are one-based"))
}

fn node_key(path: &str, key: &str) -> Result<usize> {
    let k: usize = key.trim().parse().map_err(|_| Error::validation(path, format!("`{key}` is not a node number")))?;
    node_index(path, k)
}

/// Parses and validates a spec document.
pub fn load_spec<T: Scalar>(document: &str) -> Result<MrfSpec<T>> {
    let doc: SpecDocument = serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.nodes == 0 {
        return Err(Error::validation("nodes", "at least one node is required"));
    }
    if doc.bins.len() != doc.nodes {
        return Err(Error::validation(
            "bins",
            format!("bin mismatch: {} entries for {} nodes", doc.bins.len(), doc.nodes),
        ));
    }
    let mut builder = MrfSpec::<T>::builder(doc.bins);
    for (key, values) in &doc.source {
        let path = format!("source.{key}");
        let node = node_key(&path, key)?;
        let ws =
            values.iter().enumerate().map(|(i, v)| weight(&format!("{path}[{i}]"), v)).collect::<Result<Vec<T>>>()?;
        builder = builder.source(node, ws);
    }
    for (idx, c) in doc.two_cliques.iter().enumerate() {
        let path = format!("two_cliques[{idx}]");
        let s = node_index(&format!("{path}.s"), c.s)?;
        let t = node_index(&format!("{path}.t"), c.t)?;
        let p =
            c.p.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(k, v)| weight(&format!("{path}.p[{i}][{k}]"), v))
                        .collect::<Result<Vec<T>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        builder = builder.two_clique(s, t, p);
    }
    for (idx, c) in doc.three_cliques.iter().enumerate() {
        let path = format!("three_cliques[{idx}]");
        let s = node_index(&format!("{path}.s"), c.s)?;
        let t1 = node_index(&format!("{path}.t1"), c.t1)?;
        let t2 = node_index(&format!("{path}.t2"), c.t2)?;
        let p =
            c.p.iter()
                .enumerate()
                .map(|(i, plane)| {
                    plane
                        .iter()
                        .enumerate()
                        .map(|(k1, row)| {
                            row.iter()
                                .enumerate()
                                .map(|(k2, v)| weight(&format!("{path}.p[{i}][{k1}][{k2}]"), v))
                                .collect::<Result<Vec<T>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        builder = builder.three_clique(s, t1, t2, p);
    }
    for (key, counts) in doc.clamped {
        let path = format!("clamped.{key}");
        builder = builder.clamp(node_key(&path, &key)?, counts);
    }
    builder.build()
}

impl<T: Scalar> std::str::FromStr for MrfSpec<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        load_spec(s)
    }
}
