use std::collections::HashSet;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use arabiq_core::eval::{
    aggregate_store, annotated_quizzes, compare_models, correct_answer_rates, distribution,
    load_annotations, parse_bins, Render,
};
use arabiq_core::lint::Severity;
use arabiq_core::pipeline::{BatchRequest, BatchStats};
use arabiq_core::store::EntityKind;
use arabiq_core::{
    new_ulid, parse_quiz_block, validate_quiz, AnnotationRecord, BenchmarkManifest,
    ComplexityCategory, Description, Filter, LintConfig, Linter, Modality, Pipeline,
    PromptCondition, ProviderConfig, ProviderProfile, Quiz, Store, SubjectType,
};
use arabiq_server::ServerConfig;

use crate::{
    Cli, Command, ConditionArg, EvalCommand, GenArgs, LintArgs, ServeArgs, SubjectArg, EXIT_LINT,
    EXIT_PROVIDER,
};

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Demo { out } => {
            let summary = crate::demo::write(&out)?;
            println!("{summary}");
            Ok(0)
        }
        Command::Ingest { manifest } => ingest(&*open_store(&cli.store)?, &manifest),
        Command::Gen(args) => gen(open_store(&cli.store)?, &args),
        Command::Lint(args) => lint(&cli.store, &cli.reports, &args),
        Command::Eval { command } => eval(&*open_store(&cli.store)?, &cli.reports, command),
        Command::Serve(args) => serve(open_store(&cli.store)?, &cli.reports, args),
    }
}

fn open_store(dir: &Path) -> Result<Arc<Store>> {
    let store = Store::open(dir).with_context(|| format!("opening store {}", dir.display()))?;
    for t in &store.open_report().truncated {
        eprintln!(
            "warning: dropped a truncated trailing record ({} bytes) from {}",
            t.dropped_bytes,
            t.file.display()
        );
    }
    Ok(Arc::new(store))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn ingest(store: &Store, manifest: &Path) -> Result<u8> {
    let m = BenchmarkManifest::load(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let report = store.import_manifest(&m, base);
    println!("{report}");
    if report.skipped_existing > 0 {
        println!("already stored: {}", report.skipped_existing);
    }
    store.write_manifest()?;
    if report.failures.is_empty() {
        return Ok(0);
    }
    for f in &report.failures {
        eprintln!("failed: {}: {}", f.locator, f.reason);
    }
    bail!(
        "{} manifest entries could not be imported",
        report.failures.len()
    )
}

fn parse_filter(items: &[String]) -> Result<Filter> {
    let mut f = Filter::all();
    let mut seen = HashSet::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("filter {item:?} is not key=value"))?;
        let k = k.trim();
        if !seen.insert(k) {
            bail!("filter key {k:?} given more than once");
        }
        match k {
            "complexity" => {
                f.complexity = Some(
                    v.parse::<ComplexityCategory>()
                        .map_err(anyhow::Error::msg)?,
                )
            }
            "image" => f.image_id = Some(v.trim().to_string()),
            other => bail!("unknown filter key {other:?} (use complexity or image)"),
        }
    }
    Ok(f)
}

fn profiles(
    config: &ProviderConfig,
    ids: &[String],
    allowed: &[Modality],
    role: &str,
) -> Result<Vec<ProviderProfile>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for id in ids {
        if !seen.insert(id) {
            bail!("profile {id} is listed twice");
        }
        let p = config.get(id)?;
        if !allowed.contains(&p.modality) {
            bail!(
                "profile {id} has modality {:?} and cannot be used for {role}",
                p.modality
            );
        }
        out.push(p.clone());
    }
    Ok(out)
}

fn print_stats(s: &BatchStats) {
    println!("images: {}", s.images);
    println!("descriptions: {}", s.descriptions_created);
    println!("descriptions skipped: {}", s.descriptions_skipped);
    println!("description failures: {}", s.description_failures);
    println!("quiz sets: {}", s.quiz_sets_created);
    println!("quiz sets skipped: {}", s.quiz_sets_skipped);
    println!("quiz set failures: {}", s.quiz_set_failures);
    println!("quizzes: {}", s.quizzes_created);
    println!("rejected: {}", s.rejected_count);
    for (cat, c) in &s.per_category {
        println!(
            "{cat}: descriptions {} / quizzes {} / rejected {}",
            c.descriptions, c.quizzes, c.rejected
        );
    }
}

fn gen(store: Arc<Store>, args: &GenArgs) -> Result<u8> {
    let filter = parse_filter(&args.filter)?;
    let config = ProviderConfig::load(&args.provider_config)?;
    let vision = profiles(
        &config,
        &args.vision,
        &[Modality::Vision, Modality::Mock],
        "captioning",
    )?;
    let quiz = profiles(
        &config,
        &args.quiz,
        &[Modality::Text, Modality::Mock],
        "quiz generation",
    )?;
    if args.n == 0 {
        bail!("--n must be at least 1");
    }
    let conditions = match args.condition {
        ConditionArg::Prompted => vec![PromptCondition::Prompted],
        ConditionArg::Bare => vec![PromptCondition::Bare],
        ConditionArg::Both => vec![PromptCondition::Prompted, PromptCondition::Bare],
    };
    let gateway = config.gateway()?.with_fetcher(store.clone());
    let pipeline = Pipeline::new(store, Arc::new(gateway));
    let req = BatchRequest {
        filter,
        vision_profiles: vision,
        quiz_profiles: quiz,
        conditions,
        n_questions: args.n,
    };
    let stats = runtime()?.block_on(pipeline.batch_generate(&req))?;
    print_stats(&stats);
    if stats.failures.is_empty() {
        return Ok(0);
    }
    for f in stats.failures.iter().take(20) {
        eprintln!(
            "failed: {} {} {}: {}",
            f.stage, f.image_id, f.profile_id, f.message
        );
    }
    if stats.failures.len() > 20 {
        eprintln!("... and {} more failures", stats.failures.len() - 20);
    }
    Ok(EXIT_PROVIDER)
}

/// Quizzes from a JSONL file of quiz records or from a raw model reply.
fn quizzes_from_file(path: &Path) -> Result<Vec<Quiz>> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        return raw
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
            })
            .collect();
    }
    let out = parse_quiz_block(&raw);
    for d in &out.diagnostics {
        eprintln!(
            "{}:{}: {} {}",
            path.display(),
            d.line_no,
            d.code.as_str(),
            d.message
        );
    }
    let file_id = path.display().to_string();
    Ok(out
        .quizzes
        .into_iter()
        .map(|d| d.into_quiz(new_ulid(), file_id.clone(), file_id.clone(), "file".into()))
        .collect())
}

fn lint(store_dir: &Path, reports: &Path, args: &LintArgs) -> Result<u8> {
    let quizzes = if args.input == "store" {
        open_store(store_dir)?.list::<Quiz>(&Filter::all())?
    } else {
        quizzes_from_file(Path::new(&args.input))?
    };
    let mut config = LintConfig {
        lexicon_path: args.lexicon.clone(),
        ..LintConfig::default()
    };
    if let Some(t) = args.diacritic_threshold {
        config.diacritic_threshold = t;
    }
    let linter = Linter::new(config)?;

    let (mut errors, mut warnings, mut violations) = (0, 0, 0);
    let mut lines = String::new();
    for q in &quizzes {
        for v in validate_quiz(q).violations {
            violations += 1;
            println!(
                "{} Q{}: {} (error) {}",
                q.id,
                q.ordinal,
                v.code.as_str(),
                v.message
            );
        }
        let report = linter.lint_quiz(q);
        for f in &report.findings {
            match f.severity {
                Severity::Error => errors += 1,
                Severity::Warning => warnings += 1,
            }
            let label = f.option_label.map(|l| format!(" {l})")).unwrap_or_default();
            let sev = if f.severity == Severity::Error {
                "error"
            } else {
                "warning"
            };
            println!(
                "{} Q{}: {} ({sev}){label} {}",
                q.id,
                q.ordinal,
                f.code.as_str(),
                f.detail
            );
        }
        lines.push_str(&serde_json::to_string(&report)?);
        lines.push('\n');
    }
    fs::create_dir_all(reports)?;
    fs::write(reports.join("lint.jsonl"), lines)?;
    println!(
        "linted {} quizzes: {errors} errors, {warnings} warnings, {violations} structural violations",
        quizzes.len()
    );
    Ok(if errors + violations > 0 {
        EXIT_LINT
    } else {
        0
    })
}

fn write_report<R: Render + ?Sized>(reports: &Path, stem: &str, r: &R) -> Result<()> {
    fs::create_dir_all(reports).with_context(|| format!("creating {}", reports.display()))?;
    let md = r.markdown();
    fs::write(reports.join(format!("{stem}.md")), &md)?;
    fs::write(reports.join(format!("{stem}.csv")), r.csv())?;
    print!("{md}");
    eprintln!("wrote {}/{stem}.md and .csv", reports.display());
    Ok(())
}

fn eval(store: &Store, reports: &Path, command: EvalCommand) -> Result<u8> {
    if let EvalCommand::Import { annotations } = &command {
        return import_annotations(store, annotations);
    }
    let annotations: Vec<AnnotationRecord> = store.list(&Filter::all())?;
    if annotations.is_empty() {
        bail!("the store has no annotations; run `arabiq eval import` first");
    }
    match command {
        EvalCommand::Import { .. } => unreachable!("handled above"),
        EvalCommand::Aggregate => write_report(
            reports,
            "aggregate",
            &aggregate_store(store, &annotations)?[..],
        )?,
        EvalCommand::Rates => {
            let quizzes = annotated_quizzes(store, &annotations)?;
            write_report(
                reports,
                "rates",
                &correct_answer_rates(&quizzes, &annotations)?,
            )?
        }
        EvalCommand::Compare { a, b, subject } => {
            let subject = match subject {
                SubjectArg::Description => SubjectType::Description,
                SubjectArg::Quiz => SubjectType::Quiz,
            };
            let subjects = aggregate_store(store, &annotations)?;
            let report = compare_models(&subjects, subject, &a, &b)?;
            write_report(reports, &format!("compare_{subject}_{a}_vs_{b}"), &report)?
        }
        EvalCommand::Dist { bins } => {
            let edges = parse_bins(&bins)?;
            let subjects = aggregate_store(store, &annotations)?;
            write_report(reports, "distribution", &distribution(&subjects, &edges)?)?
        }
    }
    Ok(0)
}

fn import_annotations(store: &Store, path: &Path) -> Result<u8> {
    let records = load_annotations(path)?;
    let mut fresh = Vec::new();
    let mut keys = HashSet::new();
    let mut skipped = 0;
    for (i, r) in records.into_iter().enumerate() {
        let known = match r.subject_type {
            SubjectType::Description => store.contains::<Description>(&r.subject_id),
            SubjectType::Quiz => store.contains::<Quiz>(&r.subject_id),
        };
        if !known {
            bail!(
                "record {}: unknown {} {}",
                i + 1,
                r.subject_type,
                r.subject_id
            );
        }
        let key = format!("{}:{}:{}", r.subject_type, r.subject_id, r.annotator_id);
        if store.contains::<AnnotationRecord>(&key) || !keys.insert(key) {
            skipped += 1;
        } else {
            fresh.push(r);
        }
    }
    if !fresh.is_empty() {
        store.put_batch(&fresh)?;
    }
    println!(
        "imported {} annotations, skipped {skipped} already stored",
        fresh.len()
    );
    println!(
        "annotations in store: {}",
        store.count(EntityKind::Annotation)
    );
    Ok(0)
}

fn serve(store: Arc<Store>, reports: &Path, args: ServeArgs) -> Result<u8> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    let providers = match &args.provider_config {
        Some(p) => ProviderConfig::load(p)?,
        None => ProviderConfig::default(),
    };
    let gateway = providers.gateway()?.with_fetcher(store.clone());
    let pipeline = Arc::new(Pipeline::new(store, Arc::new(gateway)));
    let mut config = ServerConfig::from_env(providers, PathBuf::from(reports));
    if !args.allow.is_empty() {
        config.allowlist = args.allow.clone();
    }
    let port = match args.port {
        Some(p) => p,
        None => arabiq_server::port_from_env().map_err(anyhow::Error::msg)?,
    };
    let addr: SocketAddr = format!("{}:{port}", args.host)
        .parse()
        .with_context(|| format!("bad listen address {}:{port}", args.host))?;
    let app = arabiq_server::router(pipeline, config);
    runtime()?.block_on(arabiq_server::serve(app, addr))?;
    Ok(0)
}
