//! Parser for the multiple-choice blocks emitted by the quiz model, and the
//! canonical serializer that inverts it.
//!
//! A block looks like
//!
//! ```text
//! - Question 1: What is the boy doing? a) يَكْتُبُ b) يَجْلِسُ c) يَأْكُلُ d) يَشْرَبُ Correct answer: a) يَكْتُبُ
//! ```
//!
//! `Q 1 (Actions):` headers, a bare `Q:` at the start of a line (numbered
//! after the previous question), options split over several lines, and an
//! English `Translation (...)` gloss after the options are all accepted.
//! An option's text runs from its label marker to the next expected label
//! marker or the "Correct answer" marker. Labels must appear in order `a b c d`; a marker
//! out of sequence is kept as text, so shuffled labels surface as
//! `MISSING_OPTION` and a repeated label as `DUPLICATE_LABEL`.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_quiz, Quiz, QuizOption, SkillTag, ValidationResult, OPTION_LABELS};
use crate::text;

pub use crate::text::strip_bidi_controls;

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)(?:^|\s)((?:-\s*)?(?:(?i:question)|Q)\s*([1-9][0-9]{0,8})?\s*(?:\(\s*([^()\n]{0,40}?)\s*\)\s*)?:)")
        .unwrap()
});
static CORRECT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)correct\s+answer\s*:").unwrap());
static OPTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)(\(?([a-dA-D])\))").unwrap());
static GLOSS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\btranslation\s*:?\s*\(([^()]*)\)").unwrap());
static CORRECT_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\(?\s*([^\s()])\s*\)").unwrap());
static CORRECT_BARE_LABEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*([a-dA-D])(?:[.:]|\s|$)").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    NoQuestions,
    MissingOption,
    DuplicateLabel,
    MissingCorrect,
    CorrectLabelUnknown,
    CorrectTextMismatch,
    EmptyStem,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoQuestions => "NO_QUESTIONS",
            Self::MissingOption => "MISSING_OPTION",
            Self::DuplicateLabel => "DUPLICATE_LABEL",
            Self::MissingCorrect => "MISSING_CORRECT",
            Self::CorrectLabelUnknown => "CORRECT_LABEL_UNKNOWN",
            Self::CorrectTextMismatch => "CORRECT_TEXT_MISMATCH",
            Self::EmptyStem => "EMPTY_STEM",
        }
    }

    /// Whether the question is dropped when this diagnostic is raised.
    pub fn is_blocking(self) -> bool {
        !matches!(self, Self::CorrectTextMismatch)
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// Option label for `MISSING_OPTION` / `DUPLICATE_LABEL`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<char>,
    /// Question number of the block the diagnostic belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<u32>,
    pub line_no: usize,
    pub message: String,
}

/// A parsed question that has not been assigned ids yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizDraft {
    pub ordinal: u32,
    pub stem: String,
    pub options: Vec<QuizOption>,
    pub declared_correct: char,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_correct_text: Option<String>,
    pub skill: SkillTag,
    /// English gloss such as `Translation (Table, Pen, String, Chair)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss: Option<String>,
    pub line_no: usize,
}

impl QuizDraft {
    pub fn into_quiz(
        self,
        id: String,
        image_id: String,
        description_id: String,
        model_id: String,
    ) -> Quiz {
        Quiz {
            id,
            image_id,
            description_id,
            model_id,
            ordinal: self.ordinal,
            stem: self.stem,
            options: self.options,
            declared_correct: self.declared_correct,
            skill: self.skill,
            declared_correct_text: self.declared_correct_text,
        }
    }

    pub fn correct_text_matches(&self) -> bool {
        match (
            &self.declared_correct_text,
            self.options
                .iter()
                .find(|o| o.label == self.declared_correct),
        ) {
            (Some(t), Some(o)) => answer_text_eq(t, &o.text_ar),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub quizzes: Vec<QuizDraft>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseOutcome {
    pub fn diagnostics_for(&self, ordinal: u32) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(move |d| d.ordinal == Some(ordinal))
    }

    pub fn has(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }
}

fn answer_text_eq(a: &str, b: &str) -> bool {
    let trim = |s: &str| {
        text::canonical(s)
            .trim_end_matches(['.', '،', ',', ';'])
            .trim_end()
            .to_string()
    };
    trim(a) == trim(b)
}

fn line_of(s: &str, byte_offset: usize) -> usize {
    1 + s.as_bytes()[..byte_offset.min(s.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

/// Parses every question block found in `raw`.
///
/// Never fails: malformed questions are skipped and reported as diagnostics.
pub fn parse_quiz_block(raw: &str) -> ParseOutcome {
    let cleaned = strip_bidi_controls(raw).replace("**", "");
    let mut out = ParseOutcome::default();

    // an unnumbered "Q:" only counts at the start of a line
    let headers: Vec<_> = HEADER
        .captures_iter(&cleaned)
        .filter(|c| {
            c.get(2).is_some() || {
                let start = c.get(1).unwrap().start();
                let line_start = cleaned[..start].rfind('\n').map_or(0, |i| i + 1);
                cleaned[line_start..start].trim().is_empty()
            }
        })
        .collect();
    if headers.is_empty() {
        out.diagnostics.push(Diagnostic {
            code: DiagnosticCode::NoQuestions,
            label: None,
            ordinal: None,
            line_no: 1,
            message: "no question header found".into(),
        });
        return out;
    }

    let mut ordinal = 0u32;
    for (i, caps) in headers.iter().enumerate() {
        let whole = caps.get(1).expect("group 1 always participates");
        ordinal = match caps.get(2) {
            Some(n) => n.as_str().parse().expect("regex limits digits"),
            None => ordinal.saturating_add(1),
        };
        let tag = caps.get(3).map(|m| m.as_str());
        let end = headers
            .get(i + 1)
            .map(|next| next.get(0).unwrap().start())
            .unwrap_or(cleaned.len());
        let line_no = line_of(&cleaned, whole.start());
        let block = &cleaned[whole.end()..end];
        parse_one(block, ordinal, tag, line_no, &mut out);
    }

    if out.quizzes.is_empty() && out.diagnostics.is_empty() {
        // unreachable in practice: every skipped block leaves a diagnostic
        out.diagnostics.push(Diagnostic {
            code: DiagnosticCode::NoQuestions,
            label: None,
            ordinal: None,
            line_no: 1,
            message: "no well-formed question".into(),
        });
    }
    out
}

fn parse_one(block: &str, ordinal: u32, tag: Option<&str>, line_no: usize, out: &mut ParseOutcome) {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut diag = |code: DiagnosticCode, label: Option<char>, message: String| {
        diags.push(Diagnostic {
            code,
            label,
            ordinal: Some(ordinal),
            line_no,
            message,
        })
    };

    let (body, clause) = match CORRECT.find(block) {
        Some(m) => (&block[..m.start()], Some(&block[m.end()..])),
        None => (block, None),
    };

    let gloss = GLOSS.captures(body).map(|c| text::collapse_ws(&c[1]));
    let body = GLOSS.replace_all(body, " ");

    // Walk label markers, accepting only the next expected label.
    let mut bounds: Vec<(char, usize, usize)> = Vec::with_capacity(4); // (label, marker start, text start)
    for caps in OPTION.captures_iter(&body) {
        let marker = caps.get(1).unwrap();
        let label = caps[2].chars().next().unwrap().to_ascii_lowercase();
        let expected = OPTION_LABELS.get(bounds.len()).copied();
        if Some(label) == expected {
            bounds.push((label, marker.start(), marker.end()));
        } else if bounds.iter().any(|(l, _, _)| *l == label) {
            diag(
                DiagnosticCode::DuplicateLabel,
                Some(label),
                format!("label {label}) appears again after it was already used"),
            );
        }
    }

    let stem_end = bounds.first().map(|b| b.1).unwrap_or(body.len());
    let stem = text::collapse_ws(&text::nfc(&body[..stem_end]));
    if stem.is_empty() {
        diag(
            DiagnosticCode::EmptyStem,
            None,
            "question text is empty".into(),
        );
    }

    let mut options = Vec::with_capacity(4);
    for (idx, &(label, _, text_start)) in bounds.iter().enumerate() {
        let text_end = bounds.get(idx + 1).map(|b| b.1).unwrap_or(body.len());
        let opt = QuizOption::new(label, &body[text_start..text_end]);
        if opt.text_ar.is_empty() {
            diag(
                DiagnosticCode::MissingOption,
                Some(label),
                format!("option {label}) has no text"),
            );
        } else {
            options.push(opt);
        }
    }
    for &label in &OPTION_LABELS[bounds.len()..] {
        diag(
            DiagnosticCode::MissingOption,
            Some(label),
            format!("option {label}) not found in sequence"),
        );
    }

    let mut declared: Option<(char, Option<String>)> = None;
    match clause {
        None => diag(
            DiagnosticCode::MissingCorrect,
            None,
            "no \"Correct answer:\" clause".into(),
        ),
        Some(clause) => {
            let hit = CORRECT_LABEL
                .captures(clause)
                .or_else(|| CORRECT_BARE_LABEL.captures(clause));
            match hit {
                None => diag(
                    DiagnosticCode::MissingCorrect,
                    None,
                    "correct-answer clause carries no label".into(),
                ),
                Some(caps) => {
                    let raw_label = caps[1].chars().next().unwrap();
                    let label = if raw_label.is_ascii_alphabetic() {
                        raw_label.to_ascii_lowercase()
                    } else {
                        raw_label
                    };
                    if OPTION_LABELS.contains(&label) {
                        let rest = &clause[caps.get(0).unwrap().end()..];
                        declared = Some((label, answer_line(rest)));
                    } else {
                        diag(
                            DiagnosticCode::CorrectLabelUnknown,
                            None,
                            format!("correct-answer label {raw_label:?} is not one of a-d"),
                        );
                    }
                }
            }
        }
    }

    let blocked = diags.iter().any(|d| d.code.is_blocking());
    if !blocked {
        if let Some((label, text)) = declared {
            let draft = QuizDraft {
                ordinal,
                stem,
                options,
                declared_correct: label,
                declared_correct_text: text,
                skill: tag.map(SkillTag::from_tag).unwrap_or(SkillTag::Untagged),
                gloss,
                line_no,
            };
            if !draft.correct_text_matches() {
                let opt = &draft
                    .options
                    .iter()
                    .find(|o| o.label == label)
                    .unwrap()
                    .text_ar;
                diags.push(Diagnostic {
                    code: DiagnosticCode::CorrectTextMismatch,
                    label: Some(label),
                    ordinal: Some(ordinal),
                    line_no,
                    message: format!(
                        "correct answer text {:?} differs from option {label}) {opt:?}",
                        draft.declared_correct_text.as_deref().unwrap_or_default()
                    ),
                });
            }
            out.quizzes.push(draft);
        }
    }
    out.diagnostics.extend(diags);
}

/// Answer text after the label: the rest of the line, or the next
/// non-empty line when the label ends its line.
fn answer_line(rest: &str) -> Option<String> {
    rest.lines().map(text::canonical).find(|l| !l.is_empty())
}

#[derive(Debug, Error, PartialEq)]
#[error("quiz cannot be serialized: {0:?}")]
pub struct InvalidQuiz(pub ValidationResult);

/// Emits the canonical one-line form of `q`.
pub fn serialize_quiz(q: &Quiz) -> Result<String, InvalidQuiz> {
    let check = validate_quiz(q);
    if !check.is_ok() {
        return Err(InvalidQuiz(check));
    }
    let mut s = format!("- Question {}", q.ordinal);
    if let Some(tag) = q.skill.header_name() {
        s.push_str(&format!(" ({tag})"));
    }
    s.push_str(": ");
    s.push_str(q.stem.trim());
    for label in OPTION_LABELS {
        let opt = q.option(label).expect("validated");
        s.push_str(&format!(" {label}) {}", opt.text_ar));
    }
    let correct = q.correct_option().expect("validated");
    s.push_str(&format!(
        " Correct answer: {}) {}",
        q.declared_correct, correct.text_ar
    ));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOY_AT_DESK: &str = "- Question 1: What is the boy doing? a) يَكْتُبُ b) يَجْلِسُ c) يَأْكُلُ d) يَشْرَبُ Correct answer: a) يَكْتُبُ\n- Question 2 : What color is the book? a) أَحْمَرٌ b) أَزْرَقُ c) أَخْضَرُ d) أَصْفَرُ Correct answer: b) أَزْرَقُ";

    #[test]
    fn boy_at_desk_sample() {
        let out = parse_quiz_block(BOY_AT_DESK);
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
        assert_eq!(out.quizzes.len(), 2);
        let q1 = &out.quizzes[0];
        assert_eq!(q1.ordinal, 1);
        assert_eq!(q1.stem, "What is the boy doing?");
        assert_eq!(q1.declared_correct, 'a');
        assert_eq!(q1.options[0].text_ar, "يَكْتُبُ");
        assert_eq!(out.quizzes[1].stem, "What color is the book?");
        assert_eq!(out.quizzes[1].declared_correct, 'b');
        assert_eq!(out.quizzes[1].line_no, 2);
    }

    #[test]
    fn empty_input() {
        let out = parse_quiz_block("");
        assert!(out.quizzes.is_empty());
        assert_eq!(out.diagnostics[0].code, DiagnosticCode::NoQuestions);
    }

    #[test]
    fn tagged_header() {
        let out = parse_quiz_block(
            "Q 1 (Actions): What activity can people do by the large pool? a) المشي b) السباحة c) الجري d) القراءة Correct answer: b) السباحة",
        );
        assert_eq!(out.quizzes.len(), 1);
        assert_eq!(out.quizzes[0].skill, SkillTag::Actions);
        assert_eq!(out.quizzes[0].declared_correct, 'b');
    }

    #[test]
    fn mismatching_correct_text_is_kept_with_diagnostic() {
        let raw = BOY_AT_DESK.replacen("Correct answer: a) يَكْتُبُ", "Correct answer: a) يَجْلِسُ", 1);
        let out = parse_quiz_block(&raw);
        assert_eq!(out.quizzes.len(), 2);
        let d: Vec<_> = out.diagnostics_for(1).collect();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::CorrectTextMismatch);
        assert_eq!(
            out.quizzes[0].declared_correct_text.as_deref(),
            Some("يَجْلِسُ")
        );
    }

    #[test]
    fn multiline_layout() {
        let raw = "Question 3: What is red?\na) أَحْمَرُ\nb) أَزْرَقُ\nc) أَخْضَرُ\nd) أَصْفَرُ\nCorrect answer: a)\nأَحْمَرُ\n";
        let out = parse_quiz_block(raw);
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
        assert_eq!(out.quizzes[0].ordinal, 3);
        assert_eq!(out.quizzes[0].options[3].text_ar, "أَصْفَرُ");
        assert_eq!(
            out.quizzes[0].declared_correct_text.as_deref(),
            Some("أَحْمَرُ")
        );
    }

    #[test]
    fn bidi_marks_and_bold_are_ignored() {
        let raw = "**Question 1:** What? a) \u{200F}كَلْبٌ\u{200F} b) قِطٌّ c) \u{202B}بَقَرَةٌ\u{202C} d) حِصَانٌ Correct answer: c) بَقَرَةٌ";
        let out = parse_quiz_block(raw);
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
        assert_eq!(out.quizzes[0].options[2].text_ar, "بَقَرَةٌ");
    }

    #[test]
    fn arabic_label_rejected() {
        let raw = "Question 1: What? a) كَلْبٌ b) قِطٌّ c) بَقَرَةٌ d) حِصَانٌ Correct answer: أ) كَلْبٌ";
        let out = parse_quiz_block(raw);
        assert!(out.quizzes.is_empty());
        assert!(out.has(DiagnosticCode::CorrectLabelUnknown));
    }

    #[test]
    fn repeated_label_is_duplicate() {
        let raw = "Question 1: What? a) كَلْبٌ b) قِطٌّ b) فَأْرٌ c) بَقَرَةٌ d) حِصَانٌ Correct answer: a) كَلْبٌ";
        let out = parse_quiz_block(raw);
        assert!(out.quizzes.is_empty());
        assert!(out.has(DiagnosticCode::DuplicateLabel));
    }

    #[test]
    fn missing_correct_and_empty_stem() {
        let out = parse_quiz_block("Question 1: a) كَلْبٌ b) قِطٌّ c) بَقَرَةٌ d) حِصَانٌ");
        assert!(out.quizzes.is_empty());
        assert!(out.has(DiagnosticCode::MissingCorrect));
        assert!(out.has(DiagnosticCode::EmptyStem));
    }

    #[test]
    fn serialize_boy_at_desk_quiz() {
        let out = parse_quiz_block(BOY_AT_DESK);
        let q = out.quizzes[0]
            .clone()
            .into_quiz("i".into(), "im".into(), "d".into(), "m".into());
        let s = serialize_quiz(&q).unwrap();
        assert!(s.starts_with("- Question 1: What is the boy doing?"));
        assert!(!s.contains('\n'));
    }

    #[test]
    fn serialize_tagged() {
        let out = parse_quiz_block(BOY_AT_DESK);
        let mut q =
            out.quizzes[1]
                .clone()
                .into_quiz("i".into(), "im".into(), "d".into(), "m".into());
        q.skill = SkillTag::Colors;
        q.ordinal = 7;
        let s = serialize_quiz(&q).unwrap();
        assert!(s.starts_with("- Question 7 (Colors): What color is the book?"));
        let back = parse_quiz_block(&s);
        assert_eq!(back.quizzes[0].skill, SkillTag::Colors);
        assert_eq!(back.quizzes[0].ordinal, 7);
    }

    #[test]
    fn serialize_rejects_invalid() {
        let out = parse_quiz_block(BOY_AT_DESK);
        let mut q =
            out.quizzes[0]
                .clone()
                .into_quiz("i".into(), "im".into(), "d".into(), "m".into());
        q.declared_correct = 'e';
        assert!(serialize_quiz(&q).is_err());
    }

    #[test]
    fn bare_q_headers_at_line_start() {
        let raw = "Q: Which word means pen? a) قَلَمٌ b) بَيْتٌ c) كِتَابٌ d) بَابٌ Correct answer: a) قَلَمٌ\n\
                   Q: Which word means house? Think of the Q: form. a) قَلَمٌ b) بَيْتٌ c) كِتَابٌ d) بَابٌ Correct answer: b) بَيْتٌ";
        let out = parse_quiz_block(raw);
        assert!(out.diagnostics.is_empty(), "{:?}", out.diagnostics);
        let ordinals: Vec<u32> = out.quizzes.iter().map(|q| q.ordinal).collect();
        assert_eq!(ordinals, vec![1, 2]);
        assert_eq!(
            out.quizzes[1].stem,
            "Which word means house? Think of the Q: form."
        );
    }
}
