//! Shared by the parser tests and the acceptance suite.
#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use arabiq_core::{parse_quiz_block, Quiz, QuizOption, SkillTag};
use proptest::prelude::*;
use serde_json::{json, Value};

pub fn testdata() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/testdata"))
}

/// Golden blocks paired with their expected projection, sorted by name.
pub fn corpus() -> Vec<(PathBuf, String, Value)> {
    let mut entries: Vec<_> = fs::read_dir(testdata().join("quiz_blocks"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|txt| {
            let expected = serde_json::from_str(
                &fs::read_to_string(txt.with_extension("expected.json")).unwrap(),
            )
            .unwrap();
            let raw = fs::read_to_string(&txt).unwrap();
            (txt, raw, expected)
        })
        .collect()
}

pub fn project(raw: &str) -> Value {
    let out = parse_quiz_block(raw);
    let quizzes: Vec<Value> = out
        .quizzes
        .iter()
        .map(|q| {
            json!({
                "ordinal": q.ordinal,
                "stem": q.stem,
                "skill": q.skill,
                "gloss": q.gloss,
                "options": q.options.iter().map(|o| json!([o.label.to_string(), o.text_ar])).collect::<Vec<_>>(),
                "declared_correct": q.declared_correct.to_string(),
                "declared_correct_text": q.declared_correct_text,
            })
        })
        .collect();
    let diagnostics: Vec<Value> = out
        .diagnostics
        .iter()
        .map(|d| json!({"code": d.code, "ordinal": d.ordinal, "label": d.label.map(|c| c.to_string())}))
        .collect();
    json!({ "quizzes": quizzes, "diagnostics": diagnostics })
}

pub fn arabic_word() -> impl Strategy<Value = String> {
    // base letters with optional harakat/shadda/sukun after each
    let letter = prop::sample::select(
        "ابتثجحخدذرزسشصضطظعغفقكلمنهويةءأإآؤئى"
            .chars()
            .collect::<Vec<_>>(),
    );
    let mark = prop::option::of(prop::sample::select(
        ('\u{064B}'..='\u{0652}').collect::<Vec<_>>(),
    ));
    prop::collection::vec((letter, mark), 1..7).prop_map(|v| {
        v.into_iter()
            .flat_map(|(l, m)| std::iter::once(l).chain(m))
            .collect()
    })
}

pub fn option_text() -> impl Strategy<Value = String> {
    prop::collection::vec(arabic_word(), 1..4).prop_map(|w| w.join(" "))
}

pub fn stem() -> impl Strategy<Value = String> {
    prop::collection::vec("[A-Za-z]{1,9}", 1..9).prop_map(|w| format!("{}?", w.join(" ")))
}

pub fn skill() -> impl Strategy<Value = SkillTag> {
    prop::sample::select(vec![
        SkillTag::Actions,
        SkillTag::Objects,
        SkillTag::Colors,
        SkillTag::Adjectives,
        SkillTag::Untagged,
    ])
}

prop_compose! {
    pub fn quiz()(
        ordinal in 1u32..1000,
        stem in stem(),
        texts in prop::array::uniform4(option_text()),
        correct in 0usize..4,
        skill in skill(),
    ) -> Quiz {
        let labels = ['a', 'b', 'c', 'd'];
        let options: Vec<QuizOption> = labels.iter().zip(&texts).map(|(l, t)| QuizOption::new(*l, t)).collect();
        Quiz {
            id: "01J00000000000000000000000".into(),
            image_id: "01J00000000000000000000001".into(),
            description_id: "01J00000000000000000000002".into(),
            model_id: "m".into(),
            ordinal,
            stem,
            declared_correct: labels[correct],
            declared_correct_text: Some(options[correct].text_ar.clone()),
            options,
            skill,
        }
    }
}
