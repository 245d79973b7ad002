//! Float reference for the score aggregation rule.
#![allow(dead_code)]

use arabiq_core::eval::{AnnotationRecord, SubjectType};

/// Direct float implementation of the rule: median of all scores, keep
/// scores within 2 of it, average, round to two decimals.
pub fn oracle(scores: &[u8]) -> Option<i64> {
    let mut v: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    let kept: Vec<f64> = v
        .into_iter()
        .filter(|s| (s - median).abs() <= 2.0)
        .collect();
    if kept.is_empty() {
        return None;
    }
    let sum: f64 = kept.iter().sum();
    Some((100.0 * sum / kept.len() as f64).round() as i64)
}

pub fn records(scores: &[u8]) -> Vec<AnnotationRecord> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &s)| AnnotationRecord {
            subject_type: SubjectType::Description,
            subject_id: "d".into(),
            annotator_id: format!("r{i}"),
            score: s,
            verdict_correct_answer: None,
            rubric_note: None,
        })
        .collect()
}
