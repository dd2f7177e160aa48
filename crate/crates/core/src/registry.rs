// SPDX-License-Identifier: Apache-2.0

//! Component/module manifests.
//!
//! A manifest declares the data-source catalog, the modules (tools) that read
//! from those sources, and the components (intent workflows) assembled from
//! modules. Sensitivity is declared once, on data sources, and derived upward:
//! a module is PII iff it reads a personal source, a component is PII iff any
//! of its modules is.
//!
//! A loaded [`Manifest`] is immutable. [`SharedManifest`] lets readers hold a
//! snapshot while a reload swaps in a new value.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use arc_swap::ArcSwap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Component count of a full production manifest.
pub const FULL_COMPONENT_COUNT: usize = 20;
/// Module count of a full production manifest.
pub const FULL_MODULE_COUNT: usize = 48;
/// Number of personal-asset components in a full manifest.
pub const FULL_PERSONAL_ASSET_COUNT: usize = 2;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("failed to read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("component `{component}` references unknown module `{module}`")]
    DanglingModule { component: String, module: String },
    #[error("module `{module}` references unknown data source `{source_name}`")]
    DanglingSource { module: String, source_name: String },
    #[error("component `{0}` has no modules")]
    EmptyComponent(String),
    #[error("data source name must be non-empty")]
    EmptySourceName,
    #[error("module `{module}` declares sensitivity {declared} but its sources derive {derived}")]
    SensitivityMismatch {
        module: String,
        declared: Sensitivity,
        derived: Sensitivity,
    },
    #[error("strict manifest requires {expected} {what}, found {found}")]
    CountViolation {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sensitivity {
    #[serde(rename = "PII")]
    Pii,
    #[serde(rename = "NON_PII")]
    NonPii,
}

impl Sensitivity {
    fn from_personal(personal: bool) -> Self {
        if personal {
            Sensitivity::Pii
        } else {
            Sensitivity::NonPii
        }
    }

    pub fn is_pii(self) -> bool {
        self == Sensitivity::Pii
    }
}

impl fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sensitivity::Pii => "PII",
            Sensitivity::NonPii => "NON_PII",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Retrieval,
    Analysis,
    Summarization,
    #[serde(alias = "evidence-packaging")]
    EvidencePackaging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentCategory {
    Informational,
    PersonalAsset,
}

/// A catalog entry for an enterprise data source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSourceRef {
    pub name: String,
    pub personal: bool,
}

/// An executable tool inside a component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub id: String,
    pub kind: ModuleKind,
    pub data_sources: Vec<String>,
    /// Derived from the sources on load; a declared value must agree.
    pub sensitivity: Sensitivity,
}

/// A workflow bound to one user intent; the unit of routing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: String,
    pub intent_label: String,
    pub category: ComponentCategory,
    pub module_ids: Vec<String>,
    pub sensitivity: Sensitivity,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<u32>,
    sources: Vec<DataSourceRef>,
    modules: Vec<RawModule>,
    components: Vec<RawComponent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModule {
    id: String,
    kind: ModuleKind,
    data_sources: Vec<String>,
    #[serde(default)]
    sensitivity: Option<Sensitivity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    id: String,
    intent_label: String,
    category: ComponentCategory,
    module_ids: Vec<String>,
}

/// A validated, immutable manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    sources: Vec<DataSourceRef>,
    modules: Vec<ModuleSpec>,
    components: Vec<ComponentSpec>,
    #[serde(skip)]
    module_index: HashMap<String, usize>,
    #[serde(skip)]
    component_index: HashMap<String, usize>,
}

/// Reads and validates a manifest file.
pub fn load_manifest(path: impl AsRef<Path>, strict: bool) -> Result<Manifest, RegistryError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Manifest::from_json_str(&text, strict)
}

impl Manifest {
    pub fn from_json_str(text: &str, strict: bool) -> Result<Self, RegistryError> {
        let raw: RawManifest = serde_json::from_str(text)?;
        Self::build(raw, strict)
    }

    fn build(raw: RawManifest, strict: bool) -> Result<Self, RegistryError> {
        let mut personal = BTreeMap::new();
        for s in &raw.sources {
            if s.name.trim().is_empty() {
                return Err(RegistryError::EmptySourceName);
            }
            if personal.insert(s.name.clone(), s.personal).is_some() {
                return Err(RegistryError::DuplicateId {
                    kind: "data source",
                    id: s.name.clone(),
                });
            }
        }

        let mut modules = Vec::with_capacity(raw.modules.len());
        let mut module_index = HashMap::new();
        for m in raw.modules {
            if module_index.contains_key(&m.id) {
                return Err(RegistryError::DuplicateId {
                    kind: "module",
                    id: m.id,
                });
            }
            let mut any_personal = false;
            for src in &m.data_sources {
                match personal.get(src) {
                    Some(p) => any_personal |= *p,
                    None => {
                        return Err(RegistryError::DanglingSource {
                            module: m.id.clone(),
                            source_name: src.clone(),
                        })
                    }
                }
            }
            let derived = Sensitivity::from_personal(any_personal);
            if let Some(declared) = m.sensitivity {
                if declared != derived {
                    return Err(RegistryError::SensitivityMismatch {
                        module: m.id,
                        declared,
                        derived,
                    });
                }
            }
            module_index.insert(m.id.clone(), modules.len());
            modules.push(ModuleSpec {
                id: m.id,
                kind: m.kind,
                data_sources: m.data_sources,
                sensitivity: derived,
            });
        }

        let mut components = Vec::with_capacity(raw.components.len());
        let mut component_index = HashMap::new();
        for c in raw.components {
            if component_index.contains_key(&c.id) {
                return Err(RegistryError::DuplicateId {
                    kind: "component",
                    id: c.id,
                });
            }
            if c.module_ids.is_empty() {
                return Err(RegistryError::EmptyComponent(c.id));
            }
            let mut any_pii = false;
            for mid in &c.module_ids {
                match module_index.get(mid) {
                    Some(&i) => any_pii |= modules[i].sensitivity.is_pii(),
                    None => {
                        return Err(RegistryError::DanglingModule {
                            component: c.id.clone(),
                            module: mid.clone(),
                        })
                    }
                }
            }
            component_index.insert(c.id.clone(), components.len());
            components.push(ComponentSpec {
                id: c.id,
                intent_label: c.intent_label,
                category: c.category,
                module_ids: c.module_ids,
                sensitivity: Sensitivity::from_personal(any_pii),
            });
        }

        if strict {
            let personal_assets = components
                .iter()
                .filter(|c| c.category == ComponentCategory::PersonalAsset)
                .count();
            for (what, expected, found) in [
                ("components", FULL_COMPONENT_COUNT, components.len()),
                ("modules", FULL_MODULE_COUNT, modules.len()),
                ("personal-asset components", FULL_PERSONAL_ASSET_COUNT, personal_assets),
            ] {
                if expected != found {
                    return Err(RegistryError::CountViolation {
                        what,
                        expected,
                        found,
                    });
                }
            }
        }

        Ok(Manifest {
            sources: raw.sources,
            modules,
            components,
            module_index,
            component_index,
        })
    }

    pub fn get_component(&self, component_id: &str) -> Result<&ComponentSpec, RegistryError> {
        self.component_index
            .get(component_id)
            .map(|&i| &self.components[i])
            .ok_or_else(|| RegistryError::UnknownComponent(component_id.to_string()))
    }

    pub fn get_module(&self, module_id: &str) -> Result<&ModuleSpec, RegistryError> {
        self.module_index
            .get(module_id)
            .map(|&i| &self.modules[i])
            .ok_or_else(|| RegistryError::UnknownModule(module_id.to_string()))
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn modules(&self) -> &[ModuleSpec] {
        &self.modules
    }

    pub fn sources(&self) -> &[DataSourceRef] {
        &self.sources
    }

    /// Ids of every PII module, for egress checks.
    pub fn pii_modules(&self) -> BTreeSet<&str> {
        self.modules
            .iter()
            .filter(|m| m.sensitivity.is_pii())
            .map(|m| m.id.as_str())
            .collect()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("manifest serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A manifest reference that readers snapshot and reloads replace atomically.
#[derive(Debug)]
pub struct SharedManifest {
    inner: ArcSwap<Manifest>,
}

impl SharedManifest {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            inner: ArcSwap::from_pointee(manifest),
        }
    }

    pub fn snapshot(&self) -> Arc<Manifest> {
        self.inner.load_full()
    }

    pub fn replace(&self, manifest: Manifest) {
        self.inner.store(Arc::new(manifest));
    }
}
