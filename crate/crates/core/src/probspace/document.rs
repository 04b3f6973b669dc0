use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FiniteSpace, RandomVariable};
use crate::error::Result;

/// `{"probabilities": [...], "variables": {"name": [...]}}`.
///
/// Unknown top-level keys are kept in `extra` so that market and
/// preference documents can extend the format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub variables: BTreeMap<String, Vec<f64>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl SpaceDocument {
    /// Builds the space and every named variable.
    pub fn build(&self) -> Result<(Arc<FiniteSpace>, BTreeMap<String, RandomVariable>)> {
        let space = FiniteSpace::new(self.probabilities.clone())?;
        let mut vars = BTreeMap::new();
        for (name, values) in &self.variables {
            let rv = RandomVariable::new(&space, values.clone())
                .map_err(|e| crate::Error::Validation(format!("variable '{name}': {e}")))?;
            vars.insert(name.clone(), rv);
        }
        Ok((space, vars))
    }
}

pub fn parse_document(text: &str) -> Result<SpaceDocument> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_document(path: &Path) -> Result<SpaceDocument> {
    parse_document(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let doc = parse_document(
            r#"{"probabilities":[0.25,0.25,0.25,0.25],"variables":{"f":[1,2,3,4]},"r":0.02}"#,
        )
        .unwrap();
        let (space, vars) = doc.build().unwrap();
        assert_eq!(space.len(), 4);
        assert_eq!(vars["f"].expect(), 2.5);
        assert_eq!(doc.extra["r"].as_f64(), Some(0.02));
    }

    #[test]
    fn names_the_violated_constraint() {
        let doc = parse_document(r#"{"probabilities":[0.5,0.49],"variables":{}}"#).unwrap();
        let err = doc.build().unwrap_err().to_string();
        assert!(err.contains("sum"), "{err}");
        let doc = parse_document(r#"{"probabilities":[0.5,0.5],"variables":{"f":[1]}}"#).unwrap();
        let err = doc.build().unwrap_err().to_string();
        assert!(err.contains("'f'"), "{err}");
    }
}
