//! Human-annotation aggregation and evaluation reports.
//!
//! All scores and rates are carried as integer hundredths internally and
//! rounded half-up, so printed values never depend on float formatting.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComplexityCategory, Description, ImageRecord, PromptCondition, Quiz};
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no annotation records given")]
    EmptyInput,
    #[error("annotation records refer to more than one subject")]
    MixedSubjects,
    #[error("quiz {0} has no correct-answer verdict")]
    MissingVerdict(String),
    #[error("model {model} has no aggregated subjects for category {category}")]
    MissingGroup {
        model: String,
        category: ComplexityCategory,
    },
    #[error("bad bins: {0}")]
    BadBins(String),
    #[error("annotation refers to unknown {subject_type} {subject_id}")]
    UnknownSubject {
        subject_type: SubjectType,
        subject_id: String,
    },
    #[error("invalid annotation: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectType {
    Description,
    Quiz,
}

impl std::fmt::Display for SubjectType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Description => "description",
            Self::Quiz => "quiz",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub subject_type: SubjectType,
    pub subject_id: String,
    pub annotator_id: String,
    pub score: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_correct_answer: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric_note: Option<String>,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.score > 10 {
            return Err(format!("score {} outside 0-10", self.score));
        }
        if self.subject_id.trim().is_empty() {
            return Err("subject_id is empty".into());
        }
        if self.annotator_id.trim().is_empty() {
            return Err("annotator_id is empty".into());
        }
        if self.subject_type == SubjectType::Description && self.verdict_correct_answer.is_some() {
            return Err("verdict_correct_answer is only allowed on quiz annotations".into());
        }
        Ok(())
    }
}

/// `num / den` rounded half-up. `den` must be non-zero.
fn div_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Signed division rounded half away from zero.
fn div_half_away(num: i64, den: i64) -> i64 {
    let q = div_half_up(num.unsigned_abs(), den.unsigned_abs()) as i64;
    if (num < 0) != (den < 0) {
        -q
    } else {
        q
    }
}

/// Formats integer hundredths as a fixed two-decimal number.
pub fn format_hundredths(h: i64) -> String {
    let sign = if h < 0 { "-" } else { "" };
    let a = h.unsigned_abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}

fn signed_hundredths(h: i64) -> String {
    if h > 0 {
        format!("+{}", format_hundredths(h))
    } else {
        format_hundredths(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub subject_id: String,
    pub included_scores: Vec<u8>,
    pub excluded_scores: Vec<u8>,
    /// Mean of the included scores, two decimals. `None` when every score
    /// was excluded.
    pub mean: Option<f64>,
    pub needs_adjudication: bool,
}

impl AggregateScore {
    /// The mean in integer hundredths.
    pub fn mean_hundredths(&self) -> Option<u64> {
        if self.included_scores.is_empty() {
            return None;
        }
        let sum: u64 = self.included_scores.iter().map(|&s| s as u64).sum();
        Some(div_half_up(100 * sum, self.included_scores.len() as u64))
    }
}

/// Applies the deviation filter: scores more than 2 points from the median
/// of all scores are excluded, the rest are averaged.
pub fn aggregate_score(records: &[AnnotationRecord]) -> Result<AggregateScore, EvalError> {
    let first = records.first().ok_or(EvalError::EmptyInput)?;
    if records
        .iter()
        .any(|r| r.subject_id != first.subject_id || r.subject_type != first.subject_type)
    {
        return Err(EvalError::MixedSubjects);
    }
    for r in records {
        r.validate().map_err(EvalError::Invalid)?;
    }
    let scores: Vec<u8> = records.iter().map(|r| r.score).collect();
    let mut agg = aggregate_scores(&scores);
    agg.subject_id = first.subject_id.clone();
    Ok(agg)
}

/// [`aggregate_score`] over bare scores; `subject_id` is left empty.
pub fn aggregate_scores(scores: &[u8]) -> AggregateScore {
    let mut sorted = scores.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // twice the median, so even-length medians stay integral
    let median2 = if n == 0 {
        0
    } else if n % 2 == 1 {
        2 * sorted[n / 2] as i32
    } else {
        sorted[n / 2 - 1] as i32 + sorted[n / 2] as i32
    };
    let (included, excluded): (Vec<u8>, Vec<u8>) = scores
        .iter()
        .partition(|&&s| (2 * s as i32 - median2).abs() <= 4);
    let mut agg = AggregateScore {
        subject_id: String::new(),
        needs_adjudication: included.is_empty(),
        included_scores: included,
        excluded_scores: excluded,
        mean: None,
    };
    agg.mean = agg.mean_hundredths().map(|h| h as f64 / 100.0);
    agg
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateRow {
    pub correct_count: u64,
    pub total: u64,
}

impl RateRow {
    pub fn rate_hundredths(&self) -> u64 {
        if self.total == 0 {
            0
        } else {
            div_half_up(100 * 100 * self.correct_count, self.total)
        }
    }

    pub fn rate_percent(&self) -> f64 {
        self.rate_hundredths() as f64 / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateReport {
    pub categories: BTreeMap<ComplexityCategory, RateRow>,
    pub global: RateRow,
}

/// Majority verdict per quiz; ties count as incorrect.
pub fn majority_verdict(verdicts: &[bool]) -> bool {
    let yes = verdicts.iter().filter(|&&v| v).count();
    yes * 2 > verdicts.len()
}

/// Correct-answer rates per category and overall. `quizzes` lists every quiz
/// in scope with its image category; each needs at least one verdict.
pub fn correct_answer_rates(
    quizzes: &[(String, ComplexityCategory)],
    annotations: &[AnnotationRecord],
) -> Result<RateReport, EvalError> {
    let mut verdicts: HashMap<&str, Vec<bool>> = HashMap::new();
    for a in annotations {
        if a.subject_type == SubjectType::Quiz {
            if let Some(v) = a.verdict_correct_answer {
                verdicts.entry(a.subject_id.as_str()).or_default().push(v);
            }
        }
    }
    let mut categories: BTreeMap<ComplexityCategory, RateRow> = ComplexityCategory::ALL
        .iter()
        .map(|c| {
            (
                *c,
                RateRow {
                    correct_count: 0,
                    total: 0,
                },
            )
        })
        .collect();
    for (id, cat) in quizzes {
        let v = verdicts
            .get(id.as_str())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| EvalError::MissingVerdict(id.clone()))?;
        let row = categories.get_mut(cat).expect("all categories present");
        row.total += 1;
        if majority_verdict(v) {
            row.correct_count += 1;
        }
    }
    let global = RateRow {
        correct_count: categories.values().map(|r| r.correct_count).sum(),
        total: categories.values().map(|r| r.total).sum(),
    };
    Ok(RateReport { categories, global })
}

/// One annotated subject with the attributes reports group by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedSubject {
    pub subject_type: SubjectType,
    pub model_id: String,
    pub category: ComplexityCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<PromptCondition>,
    pub score: AggregateScore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub category: ComplexityCategory,
    pub n_a: usize,
    pub n_b: usize,
    /// Category means in hundredths.
    pub mean_a: u64,
    pub mean_b: u64,
}

impl ComparisonRow {
    pub fn absolute_delta_hundredths(&self) -> i64 {
        self.mean_a as i64 - self.mean_b as i64
    }

    /// `100·(a−b)/b` in hundredths of a percent; `None` when `b` is zero.
    pub fn relative_delta_hundredths(&self) -> Option<i64> {
        (self.mean_b != 0).then(|| {
            div_half_away(
                10_000 * self.absolute_delta_hundredths(),
                self.mean_b as i64,
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub subject_type: SubjectType,
    pub model_a: String,
    pub model_b: String,
    pub rows: Vec<ComparisonRow>,
}

fn group_mean(scores: impl Iterator<Item = u64>) -> Option<(usize, u64)> {
    let v: Vec<u64> = scores.collect();
    if v.is_empty() {
        return None;
    }
    Some((v.len(), div_half_up(v.iter().sum(), v.len() as u64)))
}

/// Per-category mean of subject means for two models, with absolute and
/// relative deltas. Subjects needing adjudication are left out.
pub fn compare_models(
    subjects: &[AggregatedSubject],
    subject_type: SubjectType,
    model_a: &str,
    model_b: &str,
) -> Result<ComparisonReport, EvalError> {
    let mean_of = |model: &str, cat: ComplexityCategory| {
        group_mean(
            subjects
                .iter()
                .filter(|s| {
                    s.subject_type == subject_type && s.model_id == model && s.category == cat
                })
                .filter_map(|s| s.score.mean_hundredths()),
        )
    };
    let mut rows = Vec::new();
    for cat in ComplexityCategory::ALL {
        match (mean_of(model_a, cat), mean_of(model_b, cat)) {
            (None, None) => continue,
            (Some((n_a, mean_a)), Some((n_b, mean_b))) => rows.push(ComparisonRow {
                category: cat,
                n_a,
                n_b,
                mean_a,
                mean_b,
            }),
            (None, _) => {
                return Err(EvalError::MissingGroup {
                    model: model_a.to_string(),
                    category: cat,
                })
            }
            (_, None) => {
                return Err(EvalError::MissingGroup {
                    model: model_b.to_string(),
                    category: cat,
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(EvalError::MissingGroup {
            model: model_a.to_string(),
            category: ComplexityCategory::Simple,
        });
    }
    Ok(ComparisonReport {
        subject_type,
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        rows,
    })
}

pub const DEFAULT_BINS: [u32; 6] = [0, 2, 4, 6, 8, 10];

/// Parses `0,2,4,6,8,10` style bin edges into hundredths.
pub fn parse_bins(s: &str) -> Result<Vec<u64>, EvalError> {
    let mut edges = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let v: f64 = part
            .parse()
            .map_err(|_| EvalError::BadBins(format!("{part:?} is not a number")))?;
        let h = (v * 100.0).round();
        if !(0.0..=1000.0).contains(&h) || ((h / 100.0) - v).abs() > 1e-9 {
            return Err(EvalError::BadBins(format!(
                "{part} must be in 0-10 with at most two decimals"
            )));
        }
        edges.push(h as u64);
    }
    check_bins(&edges)?;
    Ok(edges)
}

fn check_bins(edges: &[u64]) -> Result<(), EvalError> {
    if edges.len() < 2 {
        return Err(EvalError::BadBins("need at least two edges".into()));
    }
    if edges[0] != 0 || *edges.last().unwrap() != 1000 {
        return Err(EvalError::BadBins(
            "edges must start at 0 and end at 10".into(),
        ));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadBins(
            "edges must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionGroup {
    pub subject_type: SubjectType,
    pub model_id: String,
    /// `None` on the per-model summary row.
    pub category: Option<ComplexityCategory>,
    pub condition: Option<PromptCondition>,
    pub total: usize,
    pub counts: Vec<usize>,
    /// Per-bin shares in hundredths of a percent, summing to exactly 10000.
    pub percentages: Vec<u64>,
    /// Subjects with a mean below 4, in hundredths of a percent.
    pub low_share: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionReport {
    /// Bin edges in hundredths; the last bin is closed on the right.
    pub edges: Vec<u64>,
    pub groups: Vec<DistributionGroup>,
}

pub const LOW_SCORE_LIMIT: u64 = 400;

fn bin_index(edges: &[u64], v: u64) -> usize {
    let last = edges.len() - 2;
    (0..=last)
        .find(|&i| v >= edges[i] && (v < edges[i + 1] || i == last))
        .unwrap_or(last)
}

/// Shares that add up to exactly 100.00%: floor every share, then hand the
/// leftover hundredths to the largest remainders (earlier bins win ties).
fn shares(counts: &[usize], total: usize) -> Vec<u64> {
    if total == 0 {
        return vec![0; counts.len()];
    }
    let t = total as u64;
    let mut out: Vec<u64> = counts.iter().map(|&c| 10_000 * c as u64 / t).collect();
    let mut rema: Vec<(u64, usize)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (10_000 * c as u64 % t, i))
        .collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = 10_000 - out.iter().sum::<u64>();
    for (_, i) in rema.into_iter().take(missing as usize) {
        out[i] += 1;
    }
    out
}

/// Score histograms per (model, category, condition), plus one summary row
/// per model. Subjects needing adjudication are left out.
pub fn distribution(
    subjects: &[AggregatedSubject],
    edges: &[u64],
) -> Result<DistributionReport, EvalError> {
    check_bins(edges)?;
    type Key = (
        SubjectType,
        String,
        Option<ComplexityCategory>,
        Option<PromptCondition>,
    );
    let mut groups: BTreeMap<Key, Vec<u64>> = BTreeMap::new();
    for s in subjects {
        let Some(m) = s.score.mean_hundredths() else {
            continue;
        };
        groups
            .entry((
                s.subject_type,
                s.model_id.clone(),
                Some(s.category),
                s.condition,
            ))
            .or_default()
            .push(m);
        groups
            .entry((s.subject_type, s.model_id.clone(), None, None))
            .or_default()
            .push(m);
    }
    let groups = groups
        .into_iter()
        .map(|((subject_type, model_id, category, condition), means)| {
            let mut counts = vec![0usize; edges.len() - 1];
            for &m in &means {
                counts[bin_index(edges, m)] += 1;
            }
            let low = means.iter().filter(|&&m| m < LOW_SCORE_LIMIT).count() as u64;
            DistributionGroup {
                subject_type,
                model_id,
                category,
                condition,
                total: means.len(),
                percentages: shares(&counts, means.len()),
                counts,
                low_share: div_half_up(10_000 * low, means.len() as u64),
            }
        })
        .collect();
    Ok(DistributionReport {
        edges: edges.to_vec(),
        groups,
    })
}

/// Markdown and CSV renderings. Output depends only on report contents.
pub trait Render {
    fn markdown(&self) -> String;
    fn csv(&self) -> String;
}

fn category_label(c: ComplexityCategory) -> &'static str {
    match c {
        ComplexityCategory::Simple => "Simple",
        ComplexityCategory::Moderate => "Moderate",
        ComplexityCategory::Complex => "Complex",
    }
}

impl Render for RateReport {
    fn markdown(&self) -> String {
        let mut s =
            String::from("| Category | Correct | Total | Rate (%) |\n|---|---:|---:|---:|\n");
        for (c, r) in &self.categories {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                category_label(*c),
                r.correct_count,
                r.total,
                format_hundredths(r.rate_hundredths() as i64)
            );
        }
        let _ = writeln!(
            s,
            "| Global | {} | {} | {} |",
            self.global.correct_count,
            self.global.total,
            format_hundredths(self.global.rate_hundredths() as i64)
        );
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("category,correct_count,total,rate_percent\n");
        for (c, r) in &self.categories {
            let _ = writeln!(
                s,
                "{c},{},{},{}",
                r.correct_count,
                r.total,
                format_hundredths(r.rate_hundredths() as i64)
            );
        }
        let _ = writeln!(
            s,
            "global,{},{},{}",
            self.global.correct_count,
            self.global.total,
            format_hundredths(self.global.rate_hundredths() as i64)
        );
        s
    }
}

fn rel_cell(r: &ComparisonRow) -> String {
    r.relative_delta_hundredths()
        .map(|h| format!("{}%", signed_hundredths(h)))
        .unwrap_or_else(|| "n/a".into())
}

impl Render for ComparisonReport {
    fn markdown(&self) -> String {
        let mut s = format!(
            "| Category | {a} (n) | {a} mean | {b} (n) | {b} mean | Absolute delta | Relative delta |\n|---|---:|---:|---:|---:|---:|---:|\n",
            a = self.model_a,
            b = self.model_b
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                category_label(r.category),
                r.n_a,
                format_hundredths(r.mean_a as i64),
                r.n_b,
                format_hundredths(r.mean_b as i64),
                signed_hundredths(r.absolute_delta_hundredths()),
                rel_cell(r)
            );
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from(
            "subject_type,category,model_a,n_a,mean_a,model_b,n_b,mean_b,absolute_delta,relative_delta_percent\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.subject_type,
                r.category,
                self.model_a,
                r.n_a,
                format_hundredths(r.mean_a as i64),
                self.model_b,
                r.n_b,
                format_hundredths(r.mean_b as i64),
                format_hundredths(r.absolute_delta_hundredths()),
                r.relative_delta_hundredths()
                    .map(format_hundredths)
                    .unwrap_or_default()
            );
        }
        s
    }
}

fn bin_label(edges: &[u64], i: usize) -> String {
    let close = if i == edges.len() - 2 { ']' } else { ')' };
    let e = |h: u64| {
        if h.is_multiple_of(100) {
            (h / 100).to_string()
        } else {
            format_hundredths(h as i64)
        }
    };
    format!("[{}-{}{close}", e(edges[i]), e(edges[i + 1]))
}

fn opt_str<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref()
        .map(|x| x.to_string())
        .unwrap_or_else(|| "all".into())
}

impl Render for DistributionReport {
    fn markdown(&self) -> String {
        let mut s = String::from("| Subject | Model | Category | Condition | N |");
        for i in 0..self.edges.len() - 1 {
            let _ = write!(s, " {} |", bin_label(&self.edges, i));
        }
        s.push_str(" Below 4 |\n|---|---|---|---|---:|");
        s.push_str(&"---:|".repeat(self.edges.len()));
        s.push('\n');
        for g in &self.groups {
            let _ = write!(
                s,
                "| {} | {} | {} | {} | {} |",
                g.subject_type,
                g.model_id,
                opt_str(&g.category),
                opt_str(&g.condition),
                g.total
            );
            for (c, p) in g.counts.iter().zip(&g.percentages) {
                let _ = write!(s, " {c} ({}%) |", format_hundredths(*p as i64));
            }
            let _ = writeln!(s, " {}% |", format_hundredths(g.low_share as i64));
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from(
            "subject_type,model_id,category,condition,total,bin,count,percent,below_4_percent\n",
        );
        for g in &self.groups {
            for (i, (c, p)) in g.counts.iter().zip(&g.percentages).enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{c},{},{}",
                    g.subject_type,
                    g.model_id,
                    opt_str(&g.category),
                    opt_str(&g.condition),
                    g.total,
                    bin_label(&self.edges, i),
                    format_hundredths(*p as i64),
                    format_hundredths(g.low_share as i64)
                );
            }
        }
        s
    }
}

impl Render for [AggregatedSubject] {
    fn markdown(&self) -> String {
        let mut s = String::from(
            "| Subject | Id | Model | Category | Condition | Included | Excluded | Mean | Adjudicate |\n|---|---|---|---|---|---|---|---:|---|\n",
        );
        for a in self {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                a.subject_type,
                a.score.subject_id,
                a.model_id,
                a.category,
                opt_str(&a.condition),
                join_scores(&a.score.included_scores, " "),
                join_scores(&a.score.excluded_scores, " "),
                a.score
                    .mean_hundredths()
                    .map(|h| format_hundredths(h as i64))
                    .unwrap_or_else(|| "-".into()),
                if a.score.needs_adjudication {
                    "yes"
                } else {
                    "no"
                }
            );
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from(
            "subject_type,subject_id,model_id,category,condition,included_scores,excluded_scores,mean,needs_adjudication\n",
        );
        for a in self {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                a.subject_type,
                a.score.subject_id,
                a.model_id,
                a.category,
                opt_str(&a.condition),
                join_scores(&a.score.included_scores, " "),
                join_scores(&a.score.excluded_scores, " "),
                a.score
                    .mean_hundredths()
                    .map(|h| format_hundredths(h as i64))
                    .unwrap_or_default(),
                a.score.needs_adjudication
            );
        }
        s
    }
}

fn join_scores(v: &[u8], sep: &str) -> String {
    v.iter().map(u8::to_string).collect::<Vec<_>>().join(sep)
}

#[derive(Debug, Deserialize)]
struct CsvAnnotation {
    subject_type: SubjectType,
    subject_id: String,
    annotator_id: String,
    score: u8,
    #[serde(default)]
    verdict_correct_answer: String,
    #[serde(default)]
    rubric_note: String,
}

fn parse_verdict(s: &str) -> Result<Option<bool>, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "true" | "1" | "yes" | "y" => Ok(Some(true)),
        "false" | "0" | "no" | "n" => Ok(Some(false)),
        other => Err(format!("verdict {other:?} is not true/false")),
    }
}

/// Reads annotations from CSV (header `subject_type,subject_id,annotator_id,
/// score,verdict_correct_answer[,rubric_note]`) or JSONL.
pub fn parse_annotations(raw: &str) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut out = Vec::new();
    if raw.trim_start().starts_with('{') {
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord =
                serde_json::from_str(line).map_err(|e| EvalError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            rec.validate().map_err(|message| EvalError::Parse {
                line: i + 1,
                message,
            })?;
            out.push(rec);
        }
        return Ok(out);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(raw.as_bytes());
    for (i, row) in rdr.deserialize::<CsvAnnotation>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| EvalError::Parse {
            line,
            message: e.to_string(),
        })?;
        let rec = AnnotationRecord {
            subject_type: row.subject_type,
            subject_id: row.subject_id,
            annotator_id: row.annotator_id,
            score: row.score,
            verdict_correct_answer: parse_verdict(&row.verdict_correct_answer)
                .map_err(|message| EvalError::Parse { line, message })?,
            rubric_note: Some(row.rubric_note).filter(|s| !s.is_empty()),
        };
        rec.validate()
            .map_err(|message| EvalError::Parse { line, message })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, EvalError> {
    let raw = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotations(&raw)
}

/// Aggregates every annotated subject in the store, joined with its model,
/// image category and (for descriptions) prompt condition. Output is
/// ordered by subject type, model, then subject id.
pub fn aggregate_store(
    store: &Store,
    annotations: &[AnnotationRecord],
) -> Result<Vec<AggregatedSubject>, EvalError> {
    let mut by_subject: BTreeMap<(SubjectType, &str), Vec<AnnotationRecord>> = BTreeMap::new();
    for a in annotations {
        by_subject
            .entry((a.subject_type, a.subject_id.as_str()))
            .or_default()
            .push(a.clone());
    }
    let mut out = Vec::with_capacity(by_subject.len());
    for ((subject_type, id), records) in by_subject {
        let unknown = || EvalError::UnknownSubject {
            subject_type,
            subject_id: id.to_string(),
        };
        let (model_id, image_id, condition) = match subject_type {
            SubjectType::Description => {
                let d: Description = store.get(id).map_err(|_| unknown())?;
                (d.model_id, d.image_id, Some(d.condition))
            }
            SubjectType::Quiz => {
                let q: Quiz = store.get(id).map_err(|_| unknown())?;
                (q.model_id, q.image_id, None)
            }
        };
        let category = store.image_category(&image_id).ok_or_else(unknown)?;
        out.push(AggregatedSubject {
            subject_type,
            model_id,
            category,
            condition,
            score: aggregate_score(&records)?,
        });
    }
    out.sort_by(|a, b| {
        (a.subject_type, &a.model_id, &a.score.subject_id).cmp(&(
            b.subject_type,
            &b.model_id,
            &b.score.subject_id,
        ))
    });
    Ok(out)
}

/// Quizzes carrying at least one annotation, with their image category.
pub fn annotated_quizzes(
    store: &Store,
    annotations: &[AnnotationRecord],
) -> Result<Vec<(String, ComplexityCategory)>, EvalError> {
    let mut ids: Vec<&str> = annotations
        .iter()
        .filter(|a| a.subject_type == SubjectType::Quiz)
        .map(|a| a.subject_id.as_str())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let unknown = || EvalError::UnknownSubject {
                subject_type: SubjectType::Quiz,
                subject_id: id.to_string(),
            };
            let q: Quiz = store.get(id).map_err(|_| unknown())?;
            let cat = store.image_category(&q.image_id).ok_or_else(unknown)?;
            Ok((id.to_string(), cat))
        })
        .collect()
}

/// Automatic image/text scorer (for example CLIP similarity). No
/// implementation ships; human annotations are the only score source.
#[async_trait]
pub trait ExternalScorer: Send + Sync {
    async fn score(&self, image: &ImageRecord, text: &str) -> Result<f64, EvalError>;
}
