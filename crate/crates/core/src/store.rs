//! Append-only JSONL persistence.
//!
//! Layout under the store root:
//!
//! ```text
//! manifest.json          schema version and record counts
//! <kind>.jsonl           one JSON object per line, per entity kind
//! blobs/<sha256>         uploaded image bytes, content-addressed
//! ```
//!
//! Every record is written as a single line followed by `fsync`. On open, a
//! trailing line that does not parse (an interrupted write) is dropped, the
//! file is cut back to the last complete record, and the loss is reported in
//! [`OpenReport`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{PoisonError, RwLock};

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{AnnotationRecord, SubjectType};
use crate::gateway::ImageFetcher;
use crate::ids::{is_sha256_hex, is_ulid, new_ulid, sha256_hex};
use crate::lint::LintReport;
use crate::model::{
    ComplexityCategory, Description, ImageRecord, ImageSource, PromptCondition, Quiz,
};
use crate::pipeline::{AttemptRecord, QuizSet, Session};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind} {id} not found")]
    NotFound { kind: EntityKind, id: String },
    #[error("an image with sha256 {0} is already stored")]
    DuplicateSha(String),
    #[error("{kind} {id} already exists")]
    DuplicateId { kind: EntityKind, id: String },
    #[error("store schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("{file}:{line}: {message}")]
    Corrupt {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid {kind}: {message}")]
    Invalid { kind: EntityKind, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Image,
    Description,
    Quiz,
    LintReport,
    QuizSet,
    Attempt,
    Annotation,
    Session,
}

impl EntityKind {
    pub const ALL: [EntityKind; 8] = [
        Self::Image,
        Self::Description,
        Self::Quiz,
        Self::LintReport,
        Self::QuizSet,
        Self::Attempt,
        Self::Annotation,
        Self::Session,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Self::Image => "images",
            Self::Description => "descriptions",
            Self::Quiz => "quizzes",
            Self::LintReport => "lint_reports",
            Self::QuizSet => "quiz_sets",
            Self::Attempt => "attempts",
            Self::Annotation => "annotations",
            Self::Session => "sessions",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Image => "image",
            Self::Description => "description",
            Self::Quiz => "quiz",
            Self::LintReport => "lint report",
            Self::QuizSet => "quiz set",
            Self::Attempt => "attempt",
            Self::Annotation => "annotation",
            Self::Session => "session",
        })
    }
}

/// A record type persisted in its own JSONL file.
pub trait Entity: Serialize + DeserializeOwned + Clone + Send + Sync + 'static {
    const KIND: EntityKind;

    fn key(&self) -> String;

    fn validate(&self) -> Result<(), String> {
        Ok(())
    }

    fn image_id(&self) -> Option<&str> {
        None
    }

    fn model_id(&self) -> Option<&str> {
        None
    }

    fn condition(&self) -> Option<PromptCondition> {
        None
    }

    fn complexity(&self) -> Option<ComplexityCategory> {
        None
    }
}

impl Entity for ImageRecord {
    const KIND: EntityKind = EntityKind::Image;

    fn key(&self) -> String {
        self.id.clone()
    }

    fn validate(&self) -> Result<(), String> {
        if !is_ulid(&self.id) {
            return Err(format!("id {:?} is not a ULID", self.id));
        }
        if !is_sha256_hex(&self.sha256) {
            return Err(format!(
                "sha256 {:?} is not 64 lowercase hex digits",
                self.sha256
            ));
        }
        if self.locator.trim().is_empty() {
            return Err("locator is empty".into());
        }
        Ok(())
    }

    fn image_id(&self) -> Option<&str> {
        Some(&self.id)
    }

    fn complexity(&self) -> Option<ComplexityCategory> {
        Some(self.complexity)
    }
}

impl Entity for Description {
    const KIND: EntityKind = EntityKind::Description;

    fn key(&self) -> String {
        self.id.clone()
    }

    fn validate(&self) -> Result<(), String> {
        if self.text_is_valid() {
            Ok(())
        } else {
            Err("description text is empty or not a single paragraph".into())
        }
    }

    fn image_id(&self) -> Option<&str> {
        Some(&self.image_id)
    }

    fn model_id(&self) -> Option<&str> {
        Some(&self.model_id)
    }

    fn condition(&self) -> Option<PromptCondition> {
        Some(self.condition)
    }
}

impl Entity for Quiz {
    const KIND: EntityKind = EntityKind::Quiz;

    fn key(&self) -> String {
        self.id.clone()
    }

    fn image_id(&self) -> Option<&str> {
        Some(&self.image_id)
    }

    fn model_id(&self) -> Option<&str> {
        Some(&self.model_id)
    }
}

impl Entity for LintReport {
    const KIND: EntityKind = EntityKind::LintReport;

    fn key(&self) -> String {
        self.quiz_id.clone()
    }
}

impl Entity for QuizSet {
    const KIND: EntityKind = EntityKind::QuizSet;

    fn key(&self) -> String {
        self.id.clone()
    }

    fn image_id(&self) -> Option<&str> {
        Some(&self.image_id)
    }

    fn model_id(&self) -> Option<&str> {
        Some(&self.quiz_model_id)
    }
}

impl Entity for AttemptRecord {
    const KIND: EntityKind = EntityKind::Attempt;

    fn key(&self) -> String {
        self.id.clone()
    }

    fn validate(&self) -> Result<(), String> {
        if crate::model::is_option_label(self.chosen_label) {
            Ok(())
        } else {
            Err(format!("chosen label {:?} not in a-d", self.chosen_label))
        }
    }
}

impl Entity for AnnotationRecord {
    const KIND: EntityKind = EntityKind::Annotation;

    fn key(&self) -> String {
        let t = match self.subject_type {
            SubjectType::Description => "description",
            SubjectType::Quiz => "quiz",
        };
        format!("{t}:{}:{}", self.subject_id, self.annotator_id)
    }

    fn validate(&self) -> Result<(), String> {
        AnnotationRecord::validate(self)
    }
}

impl Entity for Session {
    const KIND: EntityKind = EntityKind::Session;

    fn key(&self) -> String {
        self.session_id.clone()
    }
}

/// Filter for [`Store::list`]. Unset fields match everything. A complexity
/// filter on entities without their own category is resolved through the
/// referenced image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub image_id: Option<String>,
    pub complexity: Option<ComplexityCategory>,
    pub model_id: Option<String>,
    pub condition: Option<PromptCondition>,
}

impl Filter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn image(id: &str) -> Self {
        Self {
            image_id: Some(id.to_string()),
            ..Self::default()
        }
    }

    pub fn model(id: &str) -> Self {
        Self {
            model_id: Some(id.to_string()),
            ..Self::default()
        }
    }

    pub fn complexity(c: ComplexityCategory) -> Self {
        Self {
            complexity: Some(c),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub root_path: PathBuf,
    pub counts: BTreeMap<EntityKind, usize>,
    pub schema_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub kind: EntityKind,
    pub file: PathBuf,
    /// Bytes of the incomplete trailing line that were discarded.
    pub dropped_bytes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenReport {
    pub truncated: Vec<Truncation>,
}

struct Table {
    path: PathBuf,
    file: File,
    order: Vec<String>,
    rows: HashMap<String, String>,
}

struct Inner {
    tables: HashMap<EntityKind, Table>,
    by_sha: HashMap<String, String>,
    image_category: HashMap<String, ComplexityCategory>,
}

pub struct Store {
    root: PathBuf,
    inner: RwLock<Inner>,
    open_report: OpenReport,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    schema_version: u32,
    #[serde(default)]
    counts: BTreeMap<EntityKind, usize>,
}

/// For images: (sha256, id, complexity).
type ImageKey = (String, String, ComplexityCategory);

fn read_key(kind: EntityKind, line: &str) -> Result<(String, Option<ImageKey>), String> {
    fn key_of<T: Entity>(line: &str) -> Result<T, String> {
        serde_json::from_str::<T>(line).map_err(|e| e.to_string())
    }
    Ok(match kind {
        EntityKind::Image => {
            let r: ImageRecord = key_of(line)?;
            (r.id.clone(), Some((r.sha256, r.id, r.complexity)))
        }
        EntityKind::Description => (key_of::<Description>(line)?.key(), None),
        EntityKind::Quiz => (key_of::<Quiz>(line)?.key(), None),
        EntityKind::LintReport => (key_of::<LintReport>(line)?.key(), None),
        EntityKind::QuizSet => (key_of::<QuizSet>(line)?.key(), None),
        EntityKind::Attempt => (key_of::<AttemptRecord>(line)?.key(), None),
        EntityKind::Annotation => (key_of::<AnnotationRecord>(line)?.key(), None),
        EntityKind::Session => (key_of::<Session>(line)?.key(), None),
    })
}

impl Store {
    /// Opens the store at `root`, creating it when absent.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("blobs")).map_err(io_err(&root))?;

        let manifest_path = root.join("manifest.json");
        if manifest_path.exists() {
            let raw = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
            let m: ManifestFile = serde_json::from_str(&raw).map_err(|e| StoreError::Corrupt {
                file: manifest_path.clone(),
                line: 1,
                message: e.to_string(),
            })?;
            if m.schema_version != SCHEMA_VERSION {
                return Err(StoreError::SchemaMismatch {
                    found: m.schema_version,
                    expected: SCHEMA_VERSION,
                });
            }
        }

        let mut inner = Inner {
            tables: HashMap::new(),
            by_sha: HashMap::new(),
            image_category: HashMap::new(),
        };
        let mut report = OpenReport::default();
        for kind in EntityKind::ALL {
            let path = root.join(format!("{}.jsonl", kind.file_stem()));
            let (table, trunc) = Self::load_table(kind, &path, &mut inner)?;
            if let Some(t) = trunc {
                tracing::warn!(file = %path.display(), bytes = t.dropped_bytes, "dropped incomplete trailing record");
                report.truncated.push(t);
            }
            inner.tables.insert(kind, table);
        }

        let store = Self {
            root,
            inner: RwLock::new(inner),
            open_report: report,
        };
        store.write_manifest()?;
        Ok(store)
    }

    fn load_table(
        kind: EntityKind,
        path: &Path,
        inner: &mut Inner,
    ) -> Result<(Table, Option<Truncation>), StoreError> {
        let mut order = Vec::new();
        let mut rows = HashMap::new();
        let mut truncation = None;

        if path.exists() {
            let f = File::open(path).map_err(io_err(path))?;
            let mut reader = BufReader::new(f);
            let mut good_len: u64 = 0;
            let mut line_no = 0usize;
            let mut buf = Vec::new();
            let mut needs_newline = false;
            loop {
                buf.clear();
                let n = reader.read_until(b'\n', &mut buf).map_err(io_err(path))?;
                if n == 0 {
                    break;
                }
                line_no += 1;
                if buf.iter().all(u8::is_ascii_whitespace) {
                    good_len += n as u64;
                    continue;
                }
                let complete = buf.last() == Some(&b'\n');
                let parsed = std::str::from_utf8(&buf)
                    .map_err(|e| e.to_string())
                    .and_then(|s| {
                        let s = s.trim_end_matches(['\n', '\r']);
                        read_key(kind, s).map(|k| (s.to_string(), k))
                    });
                match parsed {
                    Ok((line, (key, image))) => {
                        if let Some((sha, id, cat)) = image {
                            inner.by_sha.insert(sha, id.clone());
                            inner.image_category.insert(id, cat);
                        }
                        if !rows.contains_key(&key) {
                            order.push(key.clone());
                        }
                        rows.insert(key, line);
                        good_len += n as u64;
                        // a complete record missing only its newline
                        needs_newline = !complete;
                    }
                    Err(message) => {
                        // only the last line may be partial
                        let mut rest = Vec::new();
                        std::io::Read::read_to_end(&mut reader, &mut rest).map_err(io_err(path))?;
                        if complete && !rest.is_empty()
                            || rest.iter().any(|b| !b.is_ascii_whitespace())
                        {
                            return Err(StoreError::Corrupt {
                                file: path.to_path_buf(),
                                line: line_no,
                                message,
                            });
                        }
                        truncation = Some(Truncation {
                            kind,
                            file: path.to_path_buf(),
                            dropped_bytes: n + rest.len(),
                        });
                        let f = OpenOptions::new()
                            .write(true)
                            .open(path)
                            .map_err(io_err(path))?;
                        f.set_len(good_len).map_err(io_err(path))?;
                        f.sync_all().map_err(io_err(path))?;
                        break;
                    }
                }
            }
            if needs_newline && truncation.is_none() {
                let mut f = OpenOptions::new()
                    .append(true)
                    .open(path)
                    .map_err(io_err(path))?;
                f.write_all(b"\n").map_err(io_err(path))?;
            }
        }

        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        Ok((
            Table {
                path: path.to_path_buf(),
                file,
                order,
                rows,
            },
            truncation,
        ))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// What was repaired when the store was opened.
    pub fn open_report(&self) -> &OpenReport {
        &self.open_report
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(PoisonError::into_inner)
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(PoisonError::into_inner)
    }

    fn check_new<T: Entity>(inner: &Inner, e: &T, batch: &[String]) -> Result<String, StoreError> {
        e.validate().map_err(|message| StoreError::Invalid {
            kind: T::KIND,
            message,
        })?;
        let key = e.key();
        if inner.tables[&T::KIND].rows.contains_key(&key) || batch.contains(&key) {
            return Err(StoreError::DuplicateId {
                kind: T::KIND,
                id: key,
            });
        }
        Ok(key)
    }

    /// Appends one record and syncs it to disk.
    pub fn put<T: Entity>(&self, e: &T) -> Result<String, StoreError> {
        let mut keys = self.put_batch(std::slice::from_ref(e))?;
        Ok(keys.pop().expect("one key per record"))
    }

    /// Appends several records with a single sync at the end. The batch is
    /// validated up front; nothing is written if any record is rejected.
    pub fn put_batch<T: Entity>(&self, items: &[T]) -> Result<Vec<String>, StoreError> {
        let mut inner = self.write();
        let mut keys = Vec::with_capacity(items.len());
        let mut shas: Vec<String> = Vec::new();
        for e in items {
            keys.push(Self::check_new(&inner, e, &keys)?);
            if T::KIND == EntityKind::Image {
                let img: ImageRecord = serde_json::from_value(serde_json::to_value(e)?)?;
                if inner.by_sha.contains_key(&img.sha256) || shas.contains(&img.sha256) {
                    return Err(StoreError::DuplicateSha(img.sha256));
                }
                shas.push(img.sha256);
            }
        }
        let mut payload = String::new();
        let mut lines = Vec::with_capacity(items.len());
        for e in items {
            let line = serde_json::to_string(e)?;
            payload.push_str(&line);
            payload.push('\n');
            lines.push(line);
        }
        let table = inner.tables.get_mut(&T::KIND).expect("all kinds loaded");
        table
            .file
            .write_all(payload.as_bytes())
            .map_err(io_err(&table.path))?;
        table.file.sync_data().map_err(io_err(&table.path))?;
        for (key, line) in keys.iter().zip(lines) {
            table.order.push(key.clone());
            table.rows.insert(key.clone(), line);
        }
        if T::KIND == EntityKind::Image {
            for e in items {
                let img: ImageRecord = serde_json::from_value(serde_json::to_value(e)?)?;
                inner.image_category.insert(img.id.clone(), img.complexity);
                inner.by_sha.insert(img.sha256, img.id);
            }
        }
        Ok(keys)
    }

    pub fn get<T: Entity>(&self, id: &str) -> Result<T, StoreError> {
        let inner = self.read();
        let line = inner.tables[&T::KIND]
            .rows
            .get(id)
            .ok_or_else(|| StoreError::NotFound {
                kind: T::KIND,
                id: id.to_string(),
            })?;
        Ok(serde_json::from_str(line)?)
    }

    pub fn contains<T: Entity>(&self, id: &str) -> bool {
        self.read().tables[&T::KIND].rows.contains_key(id)
    }

    /// Records of type `T` matching `filter`, in insertion order.
    pub fn list<T: Entity>(&self, filter: &Filter) -> Result<Vec<T>, StoreError> {
        let inner = self.read();
        let table = &inner.tables[&T::KIND];
        let mut out = Vec::new();
        for key in &table.order {
            let e: T = serde_json::from_str(&table.rows[key])?;
            if Self::matches(&inner, &e, filter) {
                out.push(e);
            }
        }
        Ok(out)
    }

    fn matches<T: Entity>(inner: &Inner, e: &T, f: &Filter) -> bool {
        if let Some(want) = &f.image_id {
            if e.image_id() != Some(want.as_str()) {
                return false;
            }
        }
        if let Some(want) = &f.model_id {
            if e.model_id() != Some(want.as_str()) {
                return false;
            }
        }
        if let Some(want) = f.condition {
            if e.condition() != Some(want) {
                return false;
            }
        }
        if let Some(want) = f.complexity {
            let cat = e.complexity().or_else(|| {
                e.image_id()
                    .and_then(|id| inner.image_category.get(id).copied())
            });
            if cat != Some(want) {
                return false;
            }
        }
        true
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.read().tables[&kind].order.len()
    }

    pub fn image_category(&self, image_id: &str) -> Option<ComplexityCategory> {
        self.read().image_category.get(image_id).copied()
    }

    pub fn find_image_by_sha(&self, sha: &str) -> Option<ImageRecord> {
        let id = self.read().by_sha.get(sha).cloned()?;
        self.get(&id).ok()
    }

    pub fn manifest(&self) -> StoreManifest {
        let inner = self.read();
        StoreManifest {
            root_path: self.root.clone(),
            counts: EntityKind::ALL
                .iter()
                .map(|k| (*k, inner.tables[k].order.len()))
                .collect(),
            schema_version: SCHEMA_VERSION,
        }
    }

    /// Rewrites `manifest.json` with the current counts.
    pub fn write_manifest(&self) -> Result<(), StoreError> {
        let m = self.manifest();
        let body = serde_json::to_string_pretty(&ManifestFile {
            schema_version: m.schema_version,
            counts: m.counts,
        })?;
        let path = self.root.join("manifest.json");
        let tmp = self.root.join("manifest.json.tmp");
        fs::write(&tmp, body).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn blob_path(&self, sha: &str) -> PathBuf {
        self.root.join("blobs").join(sha)
    }

    /// Stores uploaded image bytes under `blobs/<sha256>` and records them.
    pub fn put_image_bytes(
        &self,
        bytes: &[u8],
        source: ImageSource,
        locator: &str,
        complexity: ComplexityCategory,
    ) -> Result<ImageRecord, StoreError> {
        let sha = sha256_hex(bytes);
        if self.read().by_sha.contains_key(&sha) {
            return Err(StoreError::DuplicateSha(sha));
        }
        let blob = self.blob_path(&sha);
        if !blob.exists() {
            let tmp = blob.with_extension("tmp");
            fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &blob).map_err(io_err(&blob))?;
        }
        let rec = ImageRecord {
            id: new_ulid(),
            source,
            locator: locator.to_string(),
            sha256: sha,
            complexity,
            created_at: Utc::now(),
        };
        self.put(&rec)?;
        Ok(rec)
    }

    /// Records a remote image without downloading it. Unless the caller
    /// knows the content hash, identity is the sha256 of the URL string.
    pub fn put_image_url(
        &self,
        url: &str,
        complexity: ComplexityCategory,
        sha256: Option<&str>,
    ) -> Result<ImageRecord, StoreError> {
        let sha = sha256
            .map(str::to_ascii_lowercase)
            .unwrap_or_else(|| sha256_hex(url));
        let rec = ImageRecord {
            id: new_ulid(),
            source: ImageSource::Url,
            locator: url.to_string(),
            sha256: sha,
            complexity,
            created_at: Utc::now(),
        };
        self.put(&rec)?;
        Ok(rec)
    }

    pub fn read_blob(&self, sha: &str) -> Result<Vec<u8>, StoreError> {
        let p = self.blob_path(sha);
        fs::read(&p).map_err(io_err(&p))
    }
}

impl ImageFetcher for Store {
    fn fetch(&self, img: &ImageRecord) -> Result<Option<Vec<u8>>, String> {
        match img.source {
            ImageSource::Url => Ok(None),
            ImageSource::Upload => self
                .read_blob(&img.sha256)
                .or_else(|_| {
                    fs::read(&img.locator).map_err(|e| StoreError::Io {
                        path: PathBuf::from(&img.locator),
                        source: e,
                    })
                })
                .map(Some)
                .map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub locator: String,
    pub complexity: ComplexityCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

/// Benchmark image list: CSV with header `locator,complexity[,sha256]`, or
/// JSONL with the same fields.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl BenchmarkManifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let raw = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if raw.trim_start().starts_with('{') {
            Self::parse_jsonl(&raw)
        } else {
            Self::parse_csv(&raw)
        }
    }

    pub fn parse_csv(raw: &str) -> Result<Self, ManifestError> {
        #[derive(Deserialize)]
        struct Row {
            locator: String,
            complexity: String,
            #[serde(default)]
            sha256: Option<String>,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(raw.as_bytes());
        let mut entries = Vec::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let parse_err = |message: String| ManifestError::Parse {
                line: i + 2,
                message,
            };
            let row = rec.map_err(|e| parse_err(e.to_string()))?;
            entries.push(ManifestEntry {
                locator: row.locator,
                complexity: row.complexity.parse().map_err(parse_err)?,
                sha256: row.sha256.filter(|s| !s.is_empty()),
            });
        }
        Ok(Self { entries })
    }

    pub fn parse_jsonl(raw: &str) -> Result<Self, ManifestError> {
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(line).map_err(|e| ManifestError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?,
            );
        }
        Ok(Self { entries })
    }

    pub fn counts(&self) -> BTreeMap<ComplexityCategory, usize> {
        let mut m: BTreeMap<_, _> = ComplexityCategory::ALL.iter().map(|c| (*c, 0)).collect();
        for e in &self.entries {
            *m.get_mut(&e.complexity).unwrap() += 1;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub locator: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Newly ingested images per category.
    pub counts: BTreeMap<ComplexityCategory, usize>,
    pub total: usize,
    /// Entries whose image was already stored.
    pub skipped_existing: usize,
    pub failures: Vec<IngestFailure>,
}

impl Default for IngestReport {
    fn default() -> Self {
        Self {
            counts: ComplexityCategory::ALL.iter().map(|c| (*c, 0)).collect(),
            total: 0,
            skipped_existing: 0,
            failures: Vec::new(),
        }
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in ComplexityCategory::ALL {
            write!(f, "{c} {} / ", self.counts.get(&c).copied().unwrap_or(0))?;
        }
        write!(f, "total {}", self.total)
    }
}

fn is_remote(locator: &str) -> bool {
    locator.starts_with("http://") || locator.starts_with("https://")
}

impl Store {
    /// Creates image records for every manifest entry. Relative paths resolve
    /// against `base_dir`. Entry failures are collected, not fatal.
    pub fn import_manifest(&self, m: &BenchmarkManifest, base_dir: &Path) -> IngestReport {
        let mut report = IngestReport::default();
        for entry in &m.entries {
            let result = if is_remote(&entry.locator) {
                match url::Url::parse(&entry.locator) {
                    Ok(u) if u.host_str().is_some() => {
                        if let Some(sha) = &entry.sha256 {
                            if !is_sha256_hex(&sha.to_ascii_lowercase()) {
                                report.failures.push(IngestFailure {
                                    locator: entry.locator.clone(),
                                    reason: format!("invalid sha256 {sha:?}"),
                                });
                                continue;
                            }
                        }
                        self.put_image_url(
                            &entry.locator,
                            entry.complexity,
                            entry.sha256.as_deref(),
                        )
                    }
                    Ok(_) => Err(StoreError::Invalid {
                        kind: EntityKind::Image,
                        message: "URL has no host".into(),
                    }),
                    Err(e) => Err(StoreError::Invalid {
                        kind: EntityKind::Image,
                        message: format!("bad URL: {e}"),
                    }),
                }
            } else {
                let path = base_dir.join(&entry.locator);
                match fs::read(&path) {
                    Ok(bytes) => {
                        if let Some(sha) = &entry.sha256 {
                            if !sha.eq_ignore_ascii_case(&sha256_hex(&bytes)) {
                                report.failures.push(IngestFailure {
                                    locator: entry.locator.clone(),
                                    reason: "content does not match listed sha256".into(),
                                });
                                continue;
                            }
                        }
                        self.put_image_bytes(
                            &bytes,
                            ImageSource::Upload,
                            &entry.locator,
                            entry.complexity,
                        )
                    }
                    Err(e) => Err(StoreError::Io { path, source: e }),
                }
            };
            match result {
                Ok(rec) => {
                    *report.counts.entry(rec.complexity).or_default() += 1;
                    report.total += 1;
                }
                Err(StoreError::DuplicateSha(_)) => report.skipped_existing += 1,
                Err(e) => report.failures.push(IngestFailure {
                    locator: entry.locator.clone(),
                    reason: e.to_string(),
                }),
            }
        }
        if let Err(e) = self.write_manifest() {
            tracing::warn!(error = %e, "could not refresh manifest.json");
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(store: &Store, n: u8, cat: ComplexityCategory) -> ImageRecord {
        store
            .put_image_bytes(
                &[n, 1, 2, 3],
                ImageSource::Upload,
                &format!("img{n}.png"),
                cat,
            )
            .unwrap()
    }

    #[test]
    fn put_get_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let img = image(&store, 1, ComplexityCategory::Simple);
        let back: ImageRecord = store.get(&img.id).unwrap();
        assert_eq!(back, img);
        assert_eq!(store.read_blob(&img.sha256).unwrap(), vec![1, 1, 2, 3]);
    }

    #[test]
    fn duplicate_bytes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        image(&store, 1, ComplexityCategory::Simple);
        let err = store
            .put_image_bytes(
                &[1, 1, 2, 3],
                ImageSource::Upload,
                "other.png",
                ComplexityCategory::Complex,
            )
            .unwrap_err();
        assert!(matches!(err, StoreError::DuplicateSha(_)));
    }

    #[test]
    fn not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(matches!(
            store.get::<ImageRecord>("nope"),
            Err(StoreError::NotFound { .. })
        ));
    }

    #[test]
    fn schema_mismatch_on_open() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("manifest.json"), r#"{"schema_version": 2}"#).unwrap();
        assert!(matches!(
            Store::open(dir.path()),
            Err(StoreError::SchemaMismatch {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn reopen_sees_records_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            image(&store, 1, ComplexityCategory::Simple);
            image(&store, 2, ComplexityCategory::Complex);
            store.write_manifest().unwrap();
        }
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.count(EntityKind::Image), 2);
        assert_eq!(store.manifest().counts[&EntityKind::Image], 2);
        assert!(store.open_report().truncated.is_empty());
        let simple = store
            .list::<ImageRecord>(&Filter::complexity(ComplexityCategory::Simple))
            .unwrap();
        assert_eq!(simple.len(), 1);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            image(&store, 1, ComplexityCategory::Simple);
            image(&store, 2, ComplexityCategory::Simple);
        }
        let path = dir.path().join("images.jsonl");
        let raw = fs::read_to_string(&path).unwrap();
        fs::write(&path, format!("garbage\n{raw}")).unwrap();
        assert!(matches!(
            Store::open(dir.path()),
            Err(StoreError::Corrupt { line: 1, .. })
        ));
    }

    #[test]
    fn manifest_csv_and_jsonl() {
        let m = BenchmarkManifest::parse_csv("locator,complexity\na.png,simple\nb.png, Complex\n")
            .unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].complexity, ComplexityCategory::Complex);
        let j =
            BenchmarkManifest::parse_jsonl("{\"locator\":\"a.png\",\"complexity\":\"moderate\"}\n")
                .unwrap();
        assert_eq!(j.entries[0].complexity, ComplexityCategory::Moderate);
        assert!(BenchmarkManifest::parse_csv("locator,complexity\na.png,hard\n").is_err());
    }

    #[test]
    fn empty_manifest_reports_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let r = store.import_manifest(&BenchmarkManifest::default(), dir.path());
        assert_eq!(r.total, 0);
        assert!(r.counts.values().all(|&c| c == 0));
        assert_eq!(r.to_string(), "simple 0 / moderate 0 / complex 0 / total 0");
    }

    #[test]
    fn unreadable_entry_collected() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("store")).unwrap();
        fs::write(dir.path().join("a.png"), b"a").unwrap();
        fs::write(dir.path().join("b.png"), b"b").unwrap();
        let m = BenchmarkManifest::parse_csv(
            "locator,complexity\na.png,simple\nmissing.png,simple\nb.png,moderate\n",
        )
        .unwrap();
        let r = store.import_manifest(&m, dir.path());
        assert_eq!(r.total, 2);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].locator, "missing.png");
        // rerun ingests nothing new
        let again = store.import_manifest(&m, dir.path());
        assert_eq!(again.total, 0);
        assert_eq!(again.skipped_existing, 2);
    }

    #[test]
    fn url_entries() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let m = BenchmarkManifest::parse_csv(
            "locator,complexity\nhttps://images.unsplash.com/photo-1,complex\nhttps://,simple\n",
        )
        .unwrap();
        let r = store.import_manifest(&m, dir.path());
        assert_eq!(r.total, 1);
        assert_eq!(r.failures.len(), 1);
        let img = &store.list::<ImageRecord>(&Filter::all()).unwrap()[0];
        assert_eq!(img.source, ImageSource::Url);
        assert_eq!(
            img.sha256,
            sha256_hex("https://images.unsplash.com/photo-1")
        );
    }
}
