//! Heterogeneous type schema.
//!
//! ```json
//! { "node_types": ["A", "P", "V"],
//!   "edge_types": [["A", "P"], ["P", "V"], ["P", "P"]] }
//! ```
//!
//! Edge type `i` is the `i`-th `(src_type, dst_type)` pair. In undirected
//! graphs a pair permits edges in either orientation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TypeId;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub node_types: Vec<String>,
    pub edge_types: Vec<(String, String)>,
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Schema> {
        let s: Schema = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.node_types.is_empty() {
            return Err(Error::Schema("no node types".into()));
        }
        if self.edge_types.is_empty() {
            return Err(Error::Schema("no edge types".into()));
        }
        let mut names = self.node_types.clone();
        names.sort();
        names.dedup();
        if names.len() != self.node_types.len() {
            return Err(Error::Schema("duplicate node type name".into()));
        }
        for (a, b) in &self.edge_types {
            for t in [a, b] {
                if self.type_id(t).is_none() {
                    return Err(Error::Schema(format!("edge references unknown type {t:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn n_node_types(&self) -> usize {
        self.node_types.len()
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.node_types
            .iter()
            .position(|n| n == name)
            .map(|i| i as TypeId)
    }

    /// Edge type permitted between a node of type `src` and one of type
    /// `dst`; orientation is ignored when `directed` is false.
    pub fn edge_type_between(&self, src: TypeId, dst: TypeId, directed: bool) -> Option<TypeId> {
        let name = |t: TypeId| self.node_types.get(t as usize).map(String::as_str);
        let (s, d) = (name(src)?, name(dst)?);
        self.edge_types
            .iter()
            .position(|(a, b)| (a == s && b == d) || (!directed && a == d && b == s))
            .map(|i| i as TypeId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dblp() -> Schema {
        Schema::from_json(
            r#"{"node_types":["A","P","V"],"edge_types":[["A","P"],["P","V"],["P","P"]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn edge_lookup_respects_direction() {
        let s = dblp();
        assert_eq!(s.edge_type_between(0, 1, true), Some(0));
        assert_eq!(s.edge_type_between(1, 0, true), None);
        assert_eq!(s.edge_type_between(1, 0, false), Some(0));
        assert_eq!(s.edge_type_between(0, 2, false), None);
    }

    #[test]
    fn unknown_type_and_empty_schema_rejected() {
        assert!(Schema::from_json(r#"{"node_types":["A"],"edge_types":[["A","B"]]}"#).is_err());
        assert!(Schema::from_json(r#"{"node_types":[],"edge_types":[]}"#).is_err());
        assert!(Schema::from_json(r#"{"node_types":["A"],"edge_types":[["A","A"]],"x":1}"#).is_err());
    }
}
