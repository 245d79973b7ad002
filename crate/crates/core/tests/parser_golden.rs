#[path = "support/parser_gen.rs"]
mod parser_gen;

use std::fs;

use arabiq_core::parse_quiz_block;
use parser_gen::{corpus, project, testdata};

#[test]
fn corpus_matches_expected_json() {
    let corpus = corpus();
    for (txt, raw, expected) in &corpus {
        assert_eq!(&project(raw), expected, "{}", txt.display());
    }
    assert!(corpus.len() >= 7, "corpus has only {} blocks", corpus.len());
}

#[test]
fn corrupted_block_keeps_the_clean_question() {
    let raw =
        fs::read_to_string(testdata().join("quiz_blocks/complex_corrupted_labels.txt")).unwrap();
    let out = parse_quiz_block(&raw);
    assert_eq!(out.quizzes.len(), 1);
    assert_eq!(out.quizzes[0].ordinal, 1);
}
