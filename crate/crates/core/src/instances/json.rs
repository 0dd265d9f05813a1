//! Instance JSON format.
//!
//! ```json
//! {"type": "path", "nodes": 3, "s": 0, "t": 2,
//!  "edges": [{"id": 0, "u": 0, "v": 1}, {"id": 1, "u": 1, "v": 2}, {"id": 2, "u": 0, "v": 2}]}
//! {"type": "assignment", "m": 3}
//! {"type": "explicit", "n": 3, "sets": [[0, 1], [2]]}
//! ```
//!
//! Edge ids must be exactly `0..n`. `n` is optional for explicit systems and
//! defaults to the largest element id plus one. An optional `labels` array
//! names the ground elements.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CombinatorialSystem, Edge, SystemKind};
use crate::error::{invalid, Result};

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    id: usize,
    u: usize,
    v: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sets: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

fn need<T>(field: Option<T>, name: &str, kind: &str) -> Result<T> {
    field.ok_or_else(|| invalid(format!("{kind} instance is missing \"{name}\"")))
}

fn dense_edges(records: Vec<EdgeRecord>) -> Result<Vec<Edge>> {
    let mut slots: Vec<Option<Edge>> = vec![None; records.len()];
    for r in records {
        let slot = slots
            .get_mut(r.id)
            .ok_or_else(|| invalid(format!("edge id {} is not dense", r.id)))?;
        if slot.is_some() {
            return Err(invalid(format!("duplicate edge id {}", r.id)));
        }
        *slot = Some(Edge::new(r.u, r.v));
    }
    Ok(slots.into_iter().map(|e| e.expect("dense")).collect())
}

impl CombinatorialSystem {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: InstanceFile =
            serde_json::from_str(text).map_err(|e| invalid(format!("instance JSON: {e}")))?;
        let kind = f.kind.as_str();
        let sys = match kind {
            "path" => CombinatorialSystem::path(
                need(f.nodes, "nodes", kind)?,
                dense_edges(need(f.edges, "edges", kind)?)?,
                need(f.s, "s", kind)?,
                need(f.t, "t", kind)?,
            )?,
            "tree" => CombinatorialSystem::tree(
                need(f.nodes, "nodes", kind)?,
                dense_edges(need(f.edges, "edges", kind)?)?,
            )?,
            "assignment" => CombinatorialSystem::assignment(need(f.m, "m", kind)?)?,
            "explicit" => {
                let sets = need(f.sets, "sets", kind)?;
                let n = match f.n {
                    Some(n) => n,
                    None => sets.iter().flatten().max().map_or(0, |&m| m + 1),
                };
                CombinatorialSystem::explicit(n, sets)?
            }
            other => return Err(invalid(format!("unknown instance type \"{other}\""))),
        };
        match f.labels {
            Some(labels) => sys.with_labels(labels),
            None => Ok(sys),
        }
    }

    pub fn to_json(&self) -> String {
        let records = |edges: &[Edge]| {
            Some(
                edges
                    .iter()
                    .enumerate()
                    .map(|(id, e)| EdgeRecord { id, u: e.u, v: e.v })
                    .collect(),
            )
        };
        let mut f = InstanceFile {
            kind: self.type_name().to_string(),
            labels: self.ground.labels().map(<[String]>::to_vec),
            ..InstanceFile::default()
        };
        match &self.kind {
            SystemKind::Path { nodes, edges, s, t } => {
                f.nodes = Some(*nodes);
                f.edges = records(edges);
                f.s = Some(*s);
                f.t = Some(*t);
            }
            SystemKind::Tree { nodes, edges } => {
                f.nodes = Some(*nodes);
                f.edges = records(edges);
            }
            SystemKind::Assignment { m } => f.m = Some(*m),
            SystemKind::Explicit { sets } => {
                f.n = Some(self.n());
                f.sets = Some(sets.clone());
            }
        }
        serde_json::to_string_pretty(&f).expect("instance serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
