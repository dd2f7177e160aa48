// SPDX-License-Identifier: Apache-2.0

//! The bundled demo dataset: a full 20-component / 48-module manifest, a small
//! market corpus, four users and a query ontology.

use std::path::Path;

use crate::registry::Manifest;
use crate::retrieval::{parse_corpus, Document, Ontology};
use crate::service::{ServiceConfig, ServiceError};

pub const MANIFEST: &str = include_str!("../data/demo/manifest.json");
pub const CORPUS: &str = include_str!("../data/demo/corpus.jsonl");
pub const USERS: &str = include_str!("../data/demo/users.jsonl");
pub const ONTOLOGY: &str = include_str!("../data/demo/ontology.json");

pub fn manifest() -> Manifest {
    Manifest::from_json_str(MANIFEST, true).expect("demo manifest is valid")
}

pub fn corpus() -> Vec<Document> {
    parse_corpus(CORPUS, Some(&manifest())).expect("demo corpus is valid")
}

pub fn ontology() -> Ontology {
    Ontology::from_json_str(ONTOLOGY).expect("demo ontology is valid")
}

/// Writes the dataset into `dir` and returns a config pointing at it, with
/// state kept in `dir/state`.
pub fn write_config(dir: &Path) -> Result<ServiceConfig, ServiceError> {
    let io = |e: std::io::Error| ServiceError::Config(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in [
        ("manifest.json", MANIFEST),
        ("corpus.jsonl", CORPUS),
        ("users.jsonl", USERS),
        ("ontology.json", ONTOLOGY),
    ] {
        std::fs::write(dir.join(name), body).map_err(io)?;
    }
    let text = r#"{"manifest":"manifest.json","strict_manifest":true,"corpus":"corpus.jsonl",
        "users":"users.jsonl","ontology":"ontology.json","state_dir":"state"}"#;
    ServiceConfig::from_json_str(text, dir)
}
