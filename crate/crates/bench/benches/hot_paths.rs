//! Parser, linter and aggregation throughput.

use std::hint::black_box;

use arabiq_core::eval::aggregate_scores;
use arabiq_core::{parse_quiz_block, LintConfig, Linter, Quiz};
use criterion::{criterion_group, criterion_main, Criterion, Throughput};

const BLOCK: &str = "- Question 1: What is the boy doing? a) يَكْتُبُ b) يَجْلِسُ c) يَأْكُلُ d) يَشْرَبُ Correct answer: a) يَكْتُبُ\n\
- Question 2 : What color is the book? a) أَحْمَرٌ b) أَزْرَقُ c) أَخْضَرُ d) أَصْفَرُ Correct answer: b) أَزْرَقُ\n\
**Question 3:** Which word means \"pen\"? [vocabulary]\n\
a) قَلَمٌ\nb) كِتَابٌ\nc) بَابٌ\nd) بَيْتٌ\nCorrect answer: a) قَلَمٌ\n";

fn quizzes() -> Vec<Quiz> {
    parse_quiz_block(BLOCK)
        .quizzes
        .into_iter()
        .map(|d| d.into_quiz("q".into(), "i".into(), "d".into(), "m".into()))
        .collect()
}

fn parse(c: &mut Criterion) {
    let mut g = c.benchmark_group("parse");
    g.throughput(Throughput::Bytes(BLOCK.len() as u64));
    g.bench_function("three_questions", |b| {
        b.iter(|| parse_quiz_block(black_box(BLOCK)))
    });
    g.finish();
}

fn lint(c: &mut Criterion) {
    let linter = Linter::new(LintConfig::default()).unwrap();
    let qs = quizzes();
    c.bench_function("lint/three_questions", |b| {
        b.iter(|| {
            qs.iter()
                .map(|q| linter.lint_quiz(black_box(q)).findings.len())
                .sum::<usize>()
        })
    });
}

fn aggregate(c: &mut Criterion) {
    let sets: Vec<Vec<u8>> = (0..1000u32)
        .map(|i| {
            (0..(i % 8 + 1))
                .map(|j| ((i * 7 + j * 3) % 11) as u8)
                .collect()
        })
        .collect();
    let mut g = c.benchmark_group("aggregate");
    g.throughput(Throughput::Elements(sets.len() as u64));
    g.bench_function("1000_subjects", |b| {
        b.iter(|| {
            sets.iter()
                .filter_map(|s| aggregate_scores(black_box(s)).mean_hundredths())
                .sum::<u64>()
        })
    });
    g.finish();
}

criterion_group!(benches, parse, lint, aggregate);
criterion_main!(benches);
