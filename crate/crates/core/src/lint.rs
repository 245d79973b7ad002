//! Mechanical checks over parsed quizzes: diacritization coverage,
//! code-switching, duplicate options, answer integrity and an optional
//! lexicon lookup.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Quiz;
use crate::text;

#[derive(Debug, Error, PartialEq)]
pub enum LintError {
    #[error("text contains no Arabic letters")]
    NoArabicLetters,
    #[error("cannot read lexicon {path}: {message}")]
    Lexicon { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    LowDiacritics,
    CodeSwitch,
    NoArabic,
    DuplicateOption,
    NearDuplicateOption,
    CorrectTextMismatch,
    EmptyOption,
    LexiconMiss,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LowDiacritics => "LOW_DIACRITICS",
            Self::CodeSwitch => "CODE_SWITCH",
            Self::NoArabic => "NO_ARABIC",
            Self::DuplicateOption => "DUPLICATE_OPTION",
            Self::NearDuplicateOption => "NEAR_DUPLICATE_OPTION",
            Self::CorrectTextMismatch => "CORRECT_TEXT_MISMATCH",
            Self::EmptyOption => "EMPTY_OPTION",
            Self::LexiconMiss => "LEXICON_MISS",
        }
    }

    /// Errors block delivery to learners; warnings are advisory.
    pub fn severity(self) -> Severity {
        match self {
            Self::NoArabic
            | Self::CodeSwitch
            | Self::DuplicateOption
            | Self::CorrectTextMismatch
            | Self::EmptyOption => Severity::Error,
            Self::LowDiacritics | Self::NearDuplicateOption | Self::LexiconMiss => {
                Severity::Warning
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_label: Option<char>,
    pub detail: String,
}

impl Finding {
    fn new(code: FindingCode, option_label: Option<char>, detail: String) -> Self {
        Self {
            code,
            severity: code.severity(),
            option_label,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub quiz_id: String,
    pub findings: Vec<Finding>,
    pub diacritic_coverage: BTreeMap<char, f64>,
    pub pass: bool,
}

impl LintReport {
    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintConfig {
    pub diacritic_threshold: f64,
    pub near_duplicate_max_edit: usize,
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
}

impl Default for LintConfig {
    fn default() -> Self {
        Self {
            diacritic_threshold: 0.75,
            near_duplicate_max_edit: 1,
            lexicon_path: None,
        }
    }
}

/// Ratio of diacritic marks to Arabic base letters.
///
/// The input is NFC-normalized first so precomposed hamza letters are not
/// split into letter plus mark. Shadda with a vowel counts twice, so the
/// ratio can exceed 1.
pub fn diacritic_coverage(text_ar: &str) -> Result<f64, LintError> {
    let t = text::nfc(text_ar);
    let (mut marks, mut letters) = (0usize, 0usize);
    for c in t.chars() {
        if text::is_arabic_mark(c) {
            marks += 1;
        } else if text::is_arabic_letter(c) {
            letters += 1;
        }
    }
    if letters == 0 {
        return Err(LintError::NoArabicLetters);
    }
    Ok(marks as f64 / letters as f64)
}

/// `CODE_SWITCH` when Latin and Arabic letters mix, `NO_ARABIC` when only
/// Latin letters are present. Digits and punctuation alone never trigger.
pub fn detect_code_switch(text_ar: &str) -> Option<Finding> {
    let latin = text_ar.chars().any(text::is_latin_letter);
    if !latin {
        return None;
    }
    let arabic = text_ar.chars().any(text::is_arabic_letter);
    Some(if arabic {
        Finding::new(
            FindingCode::CodeSwitch,
            None,
            format!("mixes Latin and Arabic script: {text_ar:?}"),
        )
    } else {
        Finding::new(
            FindingCode::NoArabic,
            None,
            format!("no Arabic letters: {text_ar:?}"),
        )
    })
}

/// Exact duplicates (after canonicalization) and near duplicates (skeletons
/// within `max_edit` Levenshtein distance).
pub fn detect_duplicates(q: &Quiz, max_edit: usize) -> Vec<Finding> {
    let canon: Vec<(char, String, Vec<char>)> = q
        .options
        .iter()
        .map(|o| {
            (
                o.label,
                text::canonical(&o.text_ar),
                text::skeleton(&o.text_ar).chars().collect(),
            )
        })
        .collect();
    let mut findings = Vec::new();
    for i in 0..canon.len() {
        for j in i + 1..canon.len() {
            let (la, ca, sa) = &canon[i];
            let (lb, cb, sb) = &canon[j];
            if ca.is_empty() || cb.is_empty() {
                continue;
            }
            if ca == cb {
                findings.push(Finding::new(
                    FindingCode::DuplicateOption,
                    Some(*la),
                    format!("options {la}) and {lb}) are identical: {ca:?}"),
                ));
            } else {
                let d = strsim::generic_levenshtein(sa, sb);
                if d <= max_edit {
                    findings.push(Finding::new(
                        FindingCode::NearDuplicateOption,
                        Some(*la),
                        format!(
                            "options {la}) and {lb}) differ by {d} letter(s) without diacritics"
                        ),
                    ));
                }
            }
        }
    }
    findings
}

/// Word list of de-diacritized NFC skeletons.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashSet<String>,
}

impl Lexicon {
    pub fn load(path: &Path) -> Result<Self, LintError> {
        let raw = std::fs::read_to_string(path).map_err(|e| LintError::Lexicon {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self::parse(&raw))
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(raw: &str) -> Self {
        let words = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(text::skeleton)
            .collect();
        Self { words }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&text::skeleton(word))
    }

    /// Words of `option` (split on whitespace) whose skeleton is absent.
    pub fn missing_words(&self, option: &str) -> Vec<String> {
        text::skeleton(option)
            .split_whitespace()
            .filter(|w| w.chars().any(text::is_arabic_letter) && !self.words.contains(*w))
            .map(str::to_string)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Holds a config and its lexicon, loaded once.
#[derive(Debug, Clone, Default)]
pub struct Linter {
    pub config: LintConfig,
    lexicon: Option<Lexicon>,
}

impl Linter {
    pub fn new(config: LintConfig) -> Result<Self, LintError> {
        let lexicon = match &config.lexicon_path {
            Some(p) => Some(Lexicon::load(p)?),
            None => None,
        };
        Ok(Self { config, lexicon })
    }

    pub fn with_lexicon(config: LintConfig, lexicon: Lexicon) -> Self {
        Self {
            config,
            lexicon: Some(lexicon),
        }
    }

    pub fn lint_quiz(&self, q: &Quiz) -> LintReport {
        let mut findings = Vec::new();
        let mut coverage = BTreeMap::new();

        for opt in &q.options {
            let t = text::canonical(&opt.text_ar);
            if t.is_empty() {
                findings.push(Finding::new(
                    FindingCode::EmptyOption,
                    Some(opt.label),
                    format!("option {}) is empty", opt.label),
                ));
                continue;
            }
            if let Some(mut f) = detect_code_switch(&t) {
                f.option_label = Some(opt.label);
                findings.push(f);
            }
            if let Ok(ratio) = diacritic_coverage(&t) {
                coverage.insert(opt.label, ratio);
                if ratio < self.config.diacritic_threshold {
                    findings.push(Finding::new(
                        FindingCode::LowDiacritics,
                        Some(opt.label),
                        format!(
                            "coverage {ratio:.2} below {:.2}",
                            self.config.diacritic_threshold
                        ),
                    ));
                }
            }
            if let Some(lex) = &self.lexicon {
                let missing = lex.missing_words(&t);
                if !missing.is_empty() {
                    findings.push(Finding::new(
                        FindingCode::LexiconMiss,
                        Some(opt.label),
                        format!("not in lexicon: {}", missing.join(" ")),
                    ));
                }
            }
        }

        findings.extend(detect_duplicates(q, self.config.near_duplicate_max_edit));

        if let (Some(declared), Some(opt)) = (&q.declared_correct_text, q.correct_option()) {
            let a = text::canonical(declared);
            let b = text::canonical(&opt.text_ar);
            let strip = |s: &str| {
                s.trim_end_matches(['.', '،', ',', ';'])
                    .trim_end()
                    .to_string()
            };
            if !a.is_empty() && strip(&a) != strip(&b) {
                findings.push(Finding::new(
                    FindingCode::CorrectTextMismatch,
                    Some(q.declared_correct),
                    format!(
                        "declared answer {a:?} differs from option {}) {b:?}",
                        q.declared_correct
                    ),
                ));
            }
        }

        let pass = !findings.iter().any(|f| f.severity == Severity::Error);
        LintReport {
            quiz_id: q.id.clone(),
            findings,
            diacritic_coverage: coverage,
            pass,
        }
    }
}

/// Lints with a fresh linter built from `cfg`.
pub fn lint_quiz(q: &Quiz, cfg: &LintConfig) -> Result<LintReport, LintError> {
    Ok(Linter::new(cfg.clone())?.lint_quiz(q))
}
