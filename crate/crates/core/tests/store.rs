use std::fs::{self, OpenOptions};
use std::io::Write;

use arabiq_core::eval::{AnnotationRecord, SubjectType};
use arabiq_core::lint::LintReport;
use arabiq_core::pipeline::{AttemptRecord, QuizSet, Session};
use arabiq_core::store::{EntityKind, Filter, Store, StoreError};
use arabiq_core::{
    new_ulid, ComplexityCategory, Description, ImageRecord, ImageSource, PromptCondition, Quiz,
    QuizOption, SkillTag,
};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;

fn quiz(image_id: &str, model: &str, ordinal: u32) -> Quiz {
    Quiz {
        id: new_ulid(),
        image_id: image_id.into(),
        description_id: new_ulid(),
        model_id: model.into(),
        ordinal,
        stem: "What is the boy doing?".into(),
        options: vec![
            QuizOption::new('a', "يَكْتُبُ"),
            QuizOption::new('b', "يَجْلِسُ"),
            QuizOption::new('c', "يَأْكُلُ"),
            QuizOption::new('d', "يَشْرَبُ"),
        ],
        declared_correct: 'a',
        declared_correct_text: None,
        skill: SkillTag::Actions,
    }
}

fn description(image_id: &str, model: &str, condition: PromptCondition) -> Description {
    Description {
        id: new_ulid(),
        image_id: image_id.into(),
        model_id: model.into(),
        condition,
        text: "A boy writes in a notebook next to a blue book.".into(),
        created_at: Utc::now(),
    }
}

/// One record of every kind, so each entity file has content.
fn populate(store: &Store) {
    let img = store
        .put_image_bytes(
            new_ulid().as_bytes(),
            ImageSource::Upload,
            "one.png",
            ComplexityCategory::Simple,
        )
        .unwrap();
    let d = description(&img.id, "llama90-v", PromptCondition::Prompted);
    store.put(&d).unwrap();
    let q = quiz(&img.id, "llama70", 1);
    store.put(&q).unwrap();
    store
        .put(&LintReport {
            quiz_id: q.id.clone(),
            findings: vec![],
            diacritic_coverage: [('a', 1.0)].into_iter().collect(),
            pass: true,
        })
        .unwrap();
    store
        .put(&QuizSet {
            id: new_ulid(),
            image_id: img.id.clone(),
            description_id: d.id.clone(),
            quiz_model_id: "llama70".into(),
            quizzes: vec![q.id.clone()],
            rejected: vec![],
            diagnostics: vec![],
            created_at: Utc::now(),
        })
        .unwrap();
    let s = Session {
        session_id: new_ulid(),
        native_language: "en".into(),
        created_at: Utc::now(),
    };
    store.put(&s).unwrap();
    store
        .put(&AttemptRecord {
            id: new_ulid(),
            session_id: s.session_id.clone(),
            quiz_id: q.id.clone(),
            chosen_label: 'a',
            is_correct: true,
            created_at: Utc::now(),
        })
        .unwrap();
    store
        .put(&AnnotationRecord {
            subject_type: SubjectType::Quiz,
            subject_id: q.id.clone(),
            annotator_id: "r1".into(),
            score: 8,
            verdict_correct_answer: Some(true),
            rubric_note: None,
        })
        .unwrap();
}

#[test]
fn list_quizzes_by_model() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let img = store
        .put_image_bytes(
            b"x",
            ImageSource::Upload,
            "x.png",
            ComplexityCategory::Complex,
        )
        .unwrap();
    let mut fanar_ids = Vec::new();
    for i in 0..10 {
        let model = if i % 3 == 0 { "fanar" } else { "llama70" };
        let q = quiz(&img.id, model, i + 1);
        if model == "fanar" {
            fanar_ids.push(q.id.clone());
        }
        store.put(&q).unwrap();
    }
    let fanar: Vec<Quiz> = store.list(&Filter::model("fanar")).unwrap();
    assert_eq!(fanar.len(), 4);
    assert_eq!(
        fanar.iter().map(|q| q.id.clone()).collect::<Vec<_>>(),
        fanar_ids
    );
    let complex: Vec<Quiz> = store
        .list(&Filter::complexity(ComplexityCategory::Complex))
        .unwrap();
    assert_eq!(complex.len(), 10);
    let simple: Vec<Quiz> = store
        .list(&Filter::complexity(ComplexityCategory::Simple))
        .unwrap();
    assert!(simple.is_empty());
}

#[test]
fn list_descriptions_by_condition() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store
        .put(&description("i1", "gemma3", PromptCondition::Bare))
        .unwrap();
    store
        .put(&description("i1", "gemma3", PromptCondition::Prompted))
        .unwrap();
    store
        .put(&description("i2", "llama90-v", PromptCondition::Bare))
        .unwrap();
    let bare: Vec<Description> = store
        .list(&Filter {
            condition: Some(PromptCondition::Bare),
            ..Filter::default()
        })
        .unwrap();
    assert_eq!(bare.len(), 2);
    let i1: Vec<Description> = store.list(&Filter::image("i1")).unwrap();
    assert_eq!(i1.len(), 2);
}

#[test]
fn invalid_records_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let mut d = description("i1", "gemma3", PromptCondition::Prompted);
    d.text = "one\n\ntwo".into();
    assert!(matches!(store.put(&d), Err(StoreError::Invalid { .. })));
    let dup = description("i1", "gemma3", PromptCondition::Bare);
    store.put(&dup).unwrap();
    assert!(matches!(
        store.put(&dup),
        Err(StoreError::DuplicateId { .. })
    ));
    assert_eq!(store.count(EntityKind::Description), 1);
}

#[test]
fn truncated_last_line_of_every_file_is_dropped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        populate(&store);
        populate(&store);
    }
    for kind in EntityKind::ALL {
        let path = dir.path().join(format!("{}.jsonl", kind.file_stem()));
        let len = fs::metadata(&path).unwrap().len();
        // cut the final record in half, newline included
        let raw = fs::read(&path).unwrap();
        let last_start = raw[..raw.len() - 1]
            .iter()
            .rposition(|&b| b == b'\n')
            .unwrap()
            + 1;
        let cut = last_start as u64 + (len - last_start as u64) / 2;
        OpenOptions::new()
            .write(true)
            .open(&path)
            .unwrap()
            .set_len(cut)
            .unwrap();
    }

    let store = Store::open(dir.path()).unwrap();
    let report = store.open_report();
    assert_eq!(report.truncated.len(), EntityKind::ALL.len());
    for kind in EntityKind::ALL {
        assert_eq!(store.count(kind), 1, "{kind}");
        assert!(report
            .truncated
            .iter()
            .any(|t| t.kind == kind && t.dropped_bytes > 0));
    }

    // the repaired files accept appends and reopen cleanly
    populate(&store);
    drop(store);
    let store = Store::open(dir.path()).unwrap();
    assert!(store.open_report().truncated.is_empty());
    for kind in EntityKind::ALL {
        assert_eq!(store.count(kind), 2, "{kind}");
    }
    assert_eq!(store.manifest().counts[&EntityKind::Quiz], 2);
}

#[test]
fn record_missing_only_its_newline_is_kept() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        populate(&store);
    }
    let path = dir.path().join("quizzes.jsonl");
    let raw = fs::read(&path).unwrap();
    fs::write(&path, &raw[..raw.len() - 1]).unwrap();
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.count(EntityKind::Quiz), 1);
    assert!(
        store.open_report().truncated.is_empty(),
        "{:?}",
        store.open_report()
    );
    let img = store.list::<ImageRecord>(&Filter::all()).unwrap().remove(0);
    store.put(&quiz(&img.id, "fanar", 2)).unwrap();
    drop(store);
    assert_eq!(Store::open(dir.path()).unwrap().count(EntityKind::Quiz), 2);
}

#[test]
fn appended_garbage_tail_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        populate(&store);
    }
    let mut f = OpenOptions::new()
        .append(true)
        .open(dir.path().join("images.jsonl"))
        .unwrap();
    f.write_all(b"{\"id\":\"01J").unwrap();
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.count(EntityKind::Image), 1);
    assert_eq!(store.open_report().truncated[0].dropped_bytes, 10);
}

fn arb_time() -> impl Strategy<Value = chrono::DateTime<Utc>> {
    (0i64..4_000_000_000).prop_map(|s| Utc.timestamp_opt(s, 0).unwrap())
}

fn arb_category() -> impl Strategy<Value = ComplexityCategory> {
    prop::sample::select(ComplexityCategory::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn get_returns_what_was_put(
        bytes in prop::collection::vec(any::<u8>(), 1..64),
        cat in arb_category(),
        at in arb_time(),
        text in "[A-Za-z ,.]{1,80}",
        score in 0u8..=10,
        verdict in any::<Option<bool>>(),
        note in prop::option::of("[a-z ]{0,20}"),
        label in prop::sample::select(vec!['a', 'b', 'c', 'd']),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let img = store.put_image_bytes(&bytes, ImageSource::Upload, "p.png", cat).unwrap();
        prop_assert_eq!(store.get::<ImageRecord>(&img.id).unwrap(), img.clone());

        let d = Description { created_at: at, text: format!("x{text}"), ..description(&img.id, "m", PromptCondition::Bare) };
        store.put(&d).unwrap();
        prop_assert_eq!(store.get::<Description>(&d.id).unwrap(), d);

        let q = quiz(&img.id, "m", 1);
        store.put(&q).unwrap();
        prop_assert_eq!(store.get::<Quiz>(&q.id).unwrap(), q.clone());

        let a = AnnotationRecord {
            subject_type: SubjectType::Quiz,
            subject_id: q.id.clone(),
            annotator_id: "r".into(),
            score,
            verdict_correct_answer: verdict,
            rubric_note: note,
        };
        let key = store.put(&a).unwrap();
        prop_assert_eq!(store.get::<AnnotationRecord>(&key).unwrap(), a);

        let att = AttemptRecord {
            id: new_ulid(),
            session_id: new_ulid(),
            quiz_id: q.id.clone(),
            chosen_label: label,
            is_correct: label == 'a',
            created_at: at,
        };
        store.put(&att).unwrap();
        prop_assert_eq!(store.get::<AttemptRecord>(&att.id).unwrap(), att.clone());

        drop(store);
        let reopened = Store::open(dir.path()).unwrap();
        prop_assert_eq!(reopened.get::<AttemptRecord>(&att.id).unwrap(), att);
        prop_assert_eq!(reopened.get::<ImageRecord>(&img.id).unwrap(), img);
    }
}
