use std::path::PathBuf;

use arabiq_core::lint::{FindingCode, Lexicon, Severity};
use arabiq_core::{parse_quiz_block, LintConfig, Linter, Quiz};

fn lexicon() -> Lexicon {
    Lexicon::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata/lexicon.txt")).unwrap()
}

fn linter() -> Linter {
    Linter::with_lexicon(LintConfig::default(), lexicon())
}

fn parse_one(raw: &str) -> Quiz {
    let out = parse_quiz_block(raw);
    assert_eq!(out.quizzes.len(), 1, "{:?}", out.diagnostics);
    out.quizzes.into_iter().next().unwrap().into_quiz(
        "q".into(),
        "i".into(),
        "d".into(),
        "m".into(),
    )
}

#[test]
fn unknown_word_is_a_lexicon_miss() {
    let q = parse_one("Q: What are scattered around the jars? a) أقلام b) دَوَاعٍ c) مَفَاتِيح d) مَخَطَّات Correct answer: b) دَوَاعٍ");
    let r = linter().lint_quiz(&q);
    let miss: Vec<_> = r
        .findings
        .iter()
        .filter(|f| f.code == FindingCode::LexiconMiss)
        .collect();
    assert_eq!(miss.len(), 1);
    assert_eq!(miss[0].option_label, Some('b'));
}

#[test]
fn duplicated_and_code_switched_options() {
    let q = parse_one(
        "Q: What is the adult doing to the boy? a) يَشْجِعُ b) يَصومُ c) يَصومُ d) يَجْرِي is not correct, instead: y جري \
         Correct answer: a) يَشْجِعُ is not correct, instead: y نَحْصُ",
    );
    let r = linter().lint_quiz(&q);
    assert!(!r.pass);
    let dup = r
        .findings
        .iter()
        .find(|f| f.code == FindingCode::DuplicateOption)
        .unwrap();
    assert_eq!(dup.option_label, Some('b'));
    assert!(dup.detail.contains("c)"));
    let cs = r
        .findings
        .iter()
        .find(|f| f.code == FindingCode::CodeSwitch)
        .unwrap();
    assert_eq!(cs.option_label, Some('d'));
    let mm = r
        .findings
        .iter()
        .find(|f| f.code == FindingCode::CorrectTextMismatch)
        .unwrap();
    assert_eq!(mm.option_label, Some('a'));
}

#[test]
fn english_gloss_inside_option_is_code_switching() {
    let q = parse_one(
        "Q: What does the image show in the middle? a) كُنْيُوسَةٌ طَرِيقٍ (streetlight) b) سَمَاءُ زُرْقَاءَ (sky) \
         c) عَمُودٌ طَوِيلٌ (pole) d) رَأْسُ مَسْتَطِيلٍ (lamp head) Correct answer: a) كُنْيُوسَةٌ طَرِيقٍ",
    );
    let r = linter().lint_quiz(&q);
    let labels: Vec<char> = r
        .findings
        .iter()
        .filter(|f| f.code == FindingCode::CodeSwitch)
        .filter_map(|f| f.option_label)
        .collect();
    assert_eq!(labels, vec!['a', 'b', 'c', 'd']);
}

#[test]
fn clean_boy_at_desk_quiz_has_no_errors() {
    let raw = "- Question 1: What is the boy doing? a) يَكْتُبُ b) يَجْلِسُ c) يَأْكُلُ d) يَشْرَبُ Correct answer: a) يَكْتُبُ\n\
               - Question 2 : What color is the book? a) أَحْمَرٌ b) أَزْرَقُ c) أَخْضَرُ d) أَصْفَرُ Correct answer: b) أَزْرَقُ";
    let out = parse_quiz_block(raw);
    assert_eq!(out.quizzes.len(), 2);
    for d in out.quizzes {
        let q = d.into_quiz("q".into(), "i".into(), "d".into(), "m".into());
        let r = linter().lint_quiz(&q);
        assert!(r.pass);
        assert_eq!(
            r.findings
                .iter()
                .filter(|f| f.severity == Severity::Error)
                .count(),
            0
        );
        assert!(r.findings.is_empty(), "{:?}", r.findings);
    }
}

#[derive(serde::Deserialize)]
struct Row {
    issue: String,
    block: String,
    expect: Vec<Expected>,
}

#[derive(serde::Deserialize)]
struct Expected {
    code: FindingCode,
    label: char,
}

#[test]
fn every_issue_table_row_is_caught() {
    let raw = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata/issue_table.json"),
    )
    .unwrap();
    let rows: Vec<Row> = serde_json::from_str(&raw).unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let r = linter().lint_quiz(&parse_one(&row.block));
        for e in &row.expect {
            assert!(
                r.findings
                    .iter()
                    .any(|f| f.code == e.code && f.option_label == Some(e.label)),
                "{}: no {:?} on {}: {:?}",
                row.issue,
                e.code,
                e.label,
                r.findings
            );
        }
    }
}
