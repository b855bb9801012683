use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FederationError, FederationNode};
use crate::ontology::{MappingSet, Ontology};
use crate::store::NodeStore;

/// One entry of a federation config file. The file is a JSON array of
/// these; relative paths are taken relative to the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub node_id: String,
    pub data_dir: PathBuf,
    pub ontology_file: PathBuf,
    /// Without a mapping file every local concept maps onto itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping_file: Option<PathBuf>,
}

impl NodeConfig {
    pub fn load(&self) -> Result<FederationNode, FederationError> {
        let store_err = |source| FederationError::Store {
            node: self.node_id.clone(),
            source,
        };
        let mapping_err = |source| FederationError::Mapping {
            node: self.node_id.clone(),
            source,
        };
        let ontology = Arc::new(Ontology::load(&self.ontology_file).map_err(mapping_err)?);
        let mapping = match &self.mapping_file {
            Some(path) => MappingSet::load(path).map_err(mapping_err)?,
            None => MappingSet::identity(&ontology),
        };
        let store = NodeStore::load(&self.node_id, &self.data_dir)
            .map_err(store_err)?
            .with_vocabulary(ontology.clone());
        Ok(FederationNode::new(store, ontology, mapping))
    }
}

pub fn load_config(path: &Path) -> Result<Vec<NodeConfig>, FederationError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FederationError::Config(format!("{}: {e}", path.display())))?;
    let mut entries: Vec<NodeConfig> =
        serde_json::from_str(&text).map_err(|e| FederationError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        e.data_dir = base.join(&e.data_dir);
        e.ontology_file = base.join(&e.ontology_file);
        if let Some(m) = &mut e.mapping_file {
            *m = base.join(&*m);
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fed.json");
        std::fs::write(
            &path,
            r#"[{"node_id": "a", "data_dir": "a/data", "ontology_file": "/abs/o.txt"}]"#,
        )
        .unwrap();
        let entries = load_config(&path).unwrap();
        assert_eq!(entries[0].data_dir, dir.path().join("a/data"));
        assert_eq!(entries[0].ontology_file, PathBuf::from("/abs/o.txt"));
        assert_eq!(entries[0].mapping_file, None);
    }

    #[test]
    fn malformed_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fed.json");
        std::fs::write(&path, "{").unwrap();
        assert_eq!(load_config(&path).unwrap_err().code(), "FederationConfig");
        assert!(load_config(&dir.path().join("missing.json")).is_err());
    }
}
