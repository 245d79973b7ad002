//! Deterministic offline provider backed by a JSONL fixture file.
//!
//! A fixture key is `sha256(prompt + "|" + subject_sha + "|" + model_name)`
//! where `subject_sha` is the image sha256 for captioning requests and the
//! sha256 of the description text for quiz requests. `prompt` is the exact
//! prompt text the gateway would send, so a fixture pins both the template
//! version and (for quizzes) the requested question count.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompt::{describe_prompt, quiz_prompt};
use super::GatewayError;
use crate::ids::sha256_hex;
use crate::model::{PromptCondition, PromptTemplate};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFixture {
    pub key: String,
    pub response_text: String,
}

pub fn fixture_key(prompt: &str, subject_sha: &str, model_name: &str) -> String {
    sha256_hex(format!("{prompt}|{subject_sha}|{model_name}"))
}

pub fn describe_fixture_key(
    image_sha: &str,
    model_name: &str,
    condition: PromptCondition,
    template: &PromptTemplate,
) -> Result<String, GatewayError> {
    Ok(fixture_key(
        &describe_prompt(condition, template)?,
        image_sha,
        model_name,
    ))
}

pub fn quiz_fixture_key(
    description_text: &str,
    n_questions: u32,
    model_name: &str,
    template: &PromptTemplate,
) -> Result<String, GatewayError> {
    let prompt = quiz_prompt(description_text, n_questions, template)?;
    Ok(fixture_key(
        &prompt,
        &sha256_hex(description_text),
        model_name,
    ))
}

#[derive(Debug, Clone, Default)]
pub struct MockFixtures {
    entries: HashMap<String, String>,
}

impl MockFixtures {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse_jsonl(raw: &str) -> Result<Self, GatewayError> {
        let mut out = Self::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: MockFixture = serde_json::from_str(line)
                .map_err(|e| GatewayError::Fixture(format!("line {}: {e}", i + 1)))?;
            if out.entries.contains_key(&f.key) {
                return Err(GatewayError::Fixture(format!(
                    "line {}: duplicate key {}",
                    i + 1,
                    f.key
                )));
            }
            out.entries.insert(f.key, f.response_text);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&raw)
    }

    /// Inserts or replaces a fixture.
    pub fn insert(&mut self, key: String, response_text: String) {
        self.entries.insert(key, response_text);
    }

    /// Merges `other` in; keys present in both must agree.
    pub fn merge(&mut self, other: MockFixtures) -> Result<(), GatewayError> {
        for (k, v) in other.entries {
            match self.entries.get(&k) {
                Some(existing) if existing != &v => {
                    return Err(GatewayError::Fixture(format!(
                        "conflicting fixtures for key {k}"
                    )))
                }
                _ => {
                    self.entries.insert(k, v);
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes fixtures sorted by key, one JSON object per line.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        for k in keys {
            let f = MockFixture {
                key: k.clone(),
                response_text: self.entries[k].clone(),
            };
            serde_json::to_writer(&mut w, &f)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_keys_rejected() {
        let raw =
            "{\"key\":\"k\",\"response_text\":\"a\"}\n{\"key\":\"k\",\"response_text\":\"b\"}\n";
        assert!(MockFixtures::parse_jsonl(raw).is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut f = MockFixtures::new();
        f.insert("k2".into(), "two".into());
        f.insert("k1".into(), "ونص".into());
        let mut buf = Vec::new();
        f.write_jsonl(&mut buf).unwrap();
        let back = MockFixtures::parse_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.get("k1"), Some("ونص"));
        assert_eq!(back.len(), 2);
    }

    #[test]
    fn key_depends_on_every_part() {
        let a = fixture_key("p", "s", "m");
        assert_ne!(a, fixture_key("p2", "s", "m"));
        assert_ne!(a, fixture_key("p", "s2", "m"));
        assert_ne!(a, fixture_key("p", "s", "m2"));
        assert_eq!(a, sha256_hex("p|s|m"));
    }
}
