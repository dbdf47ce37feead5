#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use brandcheck::clients::{Cassette, ReplayClient};
use brandcheck::eval::{load_corpus, LoadedCorpus};
use brandcheck::pipeline::ScenarioSource;
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> LoadedCorpus {
    load_corpus(&fixtures().join("corpus"), None).expect("fixture corpus loads")
}

pub fn cassette_path() -> PathBuf {
    fixtures().join("cassettes/fixtures.jsonl")
}

pub fn replay() -> ReplayClient {
    ReplayClient::new(Arc::new(Cassette::load(&cassette_path()).expect("fixture cassette loads")))
}

pub fn scenarios() -> ScenarioSource {
    ScenarioSource::Dir(fixtures().join("scenarios"))
}

pub fn expected() -> Value {
    let text = std::fs::read_to_string(fixtures().join("expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}
