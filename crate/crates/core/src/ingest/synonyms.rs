use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Pins the meaning of a polysemous source name within one source dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticConstraint {
    pub name: String,
    pub source: String,
    pub canonical: String,
}

/// Category renaming table: canonical name to the source names it absorbs,
/// plus per-dataset disambiguation and an exclusion list.
///
/// On disk this is a JSON object mapping each canonical name to an array of
/// source names, with the reserved keys `constraints` and `exclude`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymMap {
    pub canonical: BTreeMap<String, BTreeSet<String>>,
    pub constraints: Vec<SemanticConstraint>,
    pub exclude: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Canonical(String),
    Excluded,
    Unmapped,
}

impl SynonymMap {
    pub fn parse(document: &[u8]) -> Result<Self> {
        let value: Value = serde_json::from_slice(document)
            .map_err(|e| Error::malformed(format!("synonyms line {}", e.line()), e))?;
        let Value::Object(obj) = value else {
            return Err(Error::malformed("synonyms", "expected a JSON object"));
        };
        let mut map = SynonymMap::default();
        for (key, v) in obj {
            match key.as_str() {
                "constraints" => map.constraints = serde_json::from_value(v)?,
                "exclude" => map.exclude = serde_json::from_value(v)?,
                _ => {
                    let sources: BTreeSet<String> = serde_json::from_value(v)
                        .map_err(|e| Error::malformed(format!("synonyms.{key}"), e))?;
                    map.canonical.insert(key, sources);
                }
            }
        }
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        for (k, v) in &self.canonical {
            obj.insert(k.clone(), serde_json::json!(v));
        }
        if !self.constraints.is_empty() {
            obj.insert("constraints".into(), serde_json::json!(self.constraints));
        }
        if !self.exclude.is_empty() {
            obj.insert("exclude".into(), serde_json::json!(self.exclude));
        }
        Value::Object(obj)
    }

    /// No renaming rules: every name maps to itself.
    pub fn is_identity(&self) -> bool {
        self.canonical.is_empty() && self.constraints.is_empty()
    }

    /// A source name claimed by two canonicals needs a constraint.
    pub fn validate(&self) -> Result<()> {
        let mut owners: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (canon, sources) in &self.canonical {
            for s in sources {
                owners.entry(s).or_default().push(canon);
            }
        }
        for (name, canons) in owners {
            let mut canons = canons;
            canons.dedup();
            if canons.len() > 1 && !self.constraints.iter().any(|c| c.name == name) {
                return Err(Error::AmbiguousSynonym {
                    name: name.to_string(),
                    candidates: canons.join(", "),
                });
            }
        }
        Ok(())
    }

    pub fn resolve(&self, name: &str, source: Option<&str>) -> Result<Resolved> {
        if self.exclude.contains(name) {
            return Ok(Resolved::Excluded);
        }
        if let Some(src) = source {
            if let Some(c) = self.constraints.iter().find(|c| c.name == name && c.source == src) {
                return Ok(self.finish(&c.canonical));
            }
        }
        let mut candidates: BTreeSet<&str> = self
            .canonical
            .iter()
            .filter(|(_, sources)| sources.contains(name))
            .map(|(c, _)| c.as_str())
            .collect();
        if self.canonical.contains_key(name) {
            candidates.insert(name);
        }
        match candidates.len() {
            0 if self.is_identity() => Ok(self.finish(name)),
            0 => Ok(Resolved::Unmapped),
            1 => Ok(self.finish(candidates.into_iter().next().unwrap())),
            _ => Err(Error::AmbiguousSynonym {
                name: name.to_string(),
                candidates: candidates.into_iter().collect::<Vec<_>>().join(", "),
            }),
        }
    }

    fn finish(&self, canonical: &str) -> Resolved {
        if self.exclude.contains(canonical) {
            Resolved::Excluded
        } else {
            Resolved::Canonical(canonical.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_resolve() {
        let map = SynonymMap::parse(
            br#"{"couch": ["sofa"], "bow_weapon": ["bow"], "bow_ornament": ["bow"],
                 "constraints": [{"name": "bow", "source": "lasot", "canonical": "bow_weapon"},
                                 {"name": "bow", "source": "vis", "canonical": "bow_ornament"}],
                 "exclude": ["thing"]}"#,
        )
        .unwrap();
        assert_eq!(map.resolve("sofa", None).unwrap(), Resolved::Canonical("couch".into()));
        assert_eq!(map.resolve("couch", None).unwrap(), Resolved::Canonical("couch".into()));
        assert_eq!(map.resolve("bow", Some("lasot")).unwrap(), Resolved::Canonical("bow_weapon".into()));
        assert_eq!(map.resolve("bow", Some("vis")).unwrap(), Resolved::Canonical("bow_ornament".into()));
        assert!(map.resolve("bow", None).is_err());
        assert_eq!(map.resolve("thing", None).unwrap(), Resolved::Excluded);
        assert_eq!(map.resolve("zebra", None).unwrap(), Resolved::Unmapped);
        assert_eq!(SynonymMap::parse(&serde_json::to_vec(&map.to_json()).unwrap()).unwrap(), map);
    }

    #[test]
    fn unconstrained_polysemy_rejected() {
        assert!(SynonymMap::parse(br#"{"a": ["x"], "b": ["x"]}"#).is_err());
    }

    #[test]
    fn empty_map_is_identity() {
        let map = SynonymMap::default();
        assert_eq!(map.resolve("zebra", None).unwrap(), Resolved::Canonical("zebra".into()));
    }
}
