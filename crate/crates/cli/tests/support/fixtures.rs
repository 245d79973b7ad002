//! Stores and annotation files built for the CLI tests and the acceptance suite.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arabiq_core::{
    new_ulid, ComplexityCategory, Description, ImageRecord, PromptCondition, Quiz, QuizOption,
    SkillTag, Store,
};
use chrono::Utc;

pub fn arabiq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arabiq"))
        .args(args)
        .output()
        .unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct EvalFixture {
    pub store: PathBuf,
    pub annotations: PathBuf,
}

fn images(store: &Store, tag: &str) -> Vec<ImageRecord> {
    ComplexityCategory::ALL
        .iter()
        .map(|&c| {
            store
                .put_image_url(&format!("https://images.unsplash.com/{tag}-{c}"), c, None)
                .unwrap()
        })
        .collect()
}

fn description(img: &ImageRecord, model: &str, condition: PromptCondition) -> Description {
    Description {
        id: new_ulid(),
        image_id: img.id.clone(),
        model_id: model.into(),
        condition,
        text: format!("A desk scene described by {model}."),
        created_at: Utc::now(),
    }
}

fn quiz(d: &Description, model: &str, ordinal: u32) -> Quiz {
    let options: Vec<QuizOption> = [('a', "يَكْتُبُ"), ('b', "يَجْلِسُ"), ('c', "يَأْكُلُ"), ('d', "يَشْرَبُ")]
        .iter()
        .map(|(l, t)| QuizOption::new(*l, t))
        .collect();
    Quiz {
        id: new_ulid(),
        image_id: d.image_id.clone(),
        description_id: d.id.clone(),
        model_id: model.into(),
        ordinal,
        stem: "What is the boy doing?".into(),
        declared_correct: 'a',
        declared_correct_text: Some("يَكْتُبُ".into()),
        options,
        skill: SkillTag::Untagged,
    }
}

/// Correct-answer verdicts: `(category, correct, total)` per tier, one
/// annotator per quiz.
pub fn rates_fixture(dir: &Path, rows: &[(ComplexityCategory, usize, usize)]) -> EvalFixture {
    let store_dir = dir.join("rates-store");
    let store = Store::open(&store_dir).unwrap();
    let imgs = images(&store, "rates");
    let mut csv =
        String::from("subject_type,subject_id,annotator_id,score,verdict_correct_answer\n");
    for &(cat, correct, total) in rows {
        let img = imgs.iter().find(|i| i.complexity == cat).unwrap();
        let d = description(img, "llama90-v", PromptCondition::Prompted);
        store.put(&d).unwrap();
        let quizzes: Vec<Quiz> = (0..total)
            .map(|i| quiz(&d, "llama70", i as u32 + 1))
            .collect();
        store.put_batch(&quizzes).unwrap();
        for (i, q) in quizzes.iter().enumerate() {
            writeln!(csv, "quiz,{},r1,7,{}", q.id, i < correct).unwrap();
        }
    }
    let annotations = dir.join("rates.csv");
    std::fs::write(&annotations, csv).unwrap();
    EvalFixture {
        store: store_dir,
        annotations,
    }
}

/// Three annotators per subject; low subjects score (2, 3, 3), the rest (7, 8, 8).
/// `groups` holds `(subject, model, low, total)`.
pub fn distribution_fixture(dir: &Path, groups: &[(&str, &str, usize, usize)]) -> EvalFixture {
    let store_dir = dir.join("dist-store");
    let store = Store::open(&store_dir).unwrap();
    let imgs = images(&store, "dist");
    let mut csv =
        String::from("subject_type,subject_id,annotator_id,score,verdict_correct_answer\n");
    let base = description(&imgs[0], "llama90-v", PromptCondition::Prompted);
    store.put(&base).unwrap();
    for &(subject, model, low, total) in groups {
        for i in 0..total {
            let img = &imgs[i % 3];
            let id = if subject == "description" {
                let cond = if i % 2 == 0 {
                    PromptCondition::Prompted
                } else {
                    PromptCondition::Bare
                };
                let d = description(img, model, cond);
                store.put(&d).unwrap();
                d.id
            } else {
                let mut d = base.clone();
                d.image_id = img.id.clone();
                let q = quiz(&d, model, 1);
                store.put(&q).unwrap();
                q.id
            };
            let scores = if i < low { [2, 3, 3] } else { [7, 8, 8] };
            for (r, s) in scores.iter().enumerate() {
                let verdict = if subject == "quiz" { "true" } else { "" };
                writeln!(csv, "{subject},{id},r{r},{s},{verdict}").unwrap();
            }
        }
    }
    let annotations = dir.join("dist.csv");
    std::fs::write(&annotations, csv).unwrap();
    EvalFixture {
        store: store_dir,
        annotations,
    }
}

/// Markdown row of a distribution report's per-model summary.
pub fn low_share_row<'a>(md: &'a str, subject: &str, model: &str) -> Option<&'a str> {
    let prefix = format!("| {subject} | {model} | all | all |");
    md.lines().find(|l| l.starts_with(&prefix))
}
