//! The subcommands. Each reads the project configuration, does its work
//! through `reliascan_core`, writes files under `output_dir` and prints a
//! short human summary to `out`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use reliascan_core::corpus::{bucket_range, load_corpus, load_population, Corpus, PopulationSeries};
use reliascan_core::decomposition::{rotate_concepts, truncated_svd_with, SvdOptions};
use reliascan_core::surveillance::{
    detect_emerging, estimate_baseline, exposure_series, monitor, read_trend, topic_cooccurrence,
    windows, write_trend, AlertRecord, BaselineModel, ExposureMode, MonitoredTopic, TopicCounts,
};
use reliascan_core::text::{
    load_synonyms, load_term_list, normalize_token_lists, spell_cluster, vocabulary, Normalizer,
    PrepConfig,
};
use reliascan_core::topics::{
    assign_all, attach_probes, extract_topics, load_custom_topics, write_assignments, Topic,
    TopicAssignment, TopicKind, TopicRegistry,
};
use reliascan_core::vector_space::build_tdm;
use reliascan_core::{Error, Period, PeriodRange};

use crate::config::ProjectConfig;
use crate::error::CliError;
use crate::report;

const VARIMAX_TOL: f64 = 1e-10;

type Docs = Vec<(String, Vec<String>)>;

fn span(from: Period, to: Period) -> Result<PeriodRange, CliError> {
    if from > to {
        return Err(CliError::Validation(format!("--from {from} is after --to {to}")));
    }
    Ok(PeriodRange::new(from, to))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_corpus(cfg: &ProjectConfig) -> Result<Corpus, CliError> {
    let loaded = load_corpus(cfg.corpus_path()?, cfg.format()?)?;
    for r in &loaded.rejections {
        eprintln!("warning: skipped record on line {}: {}", r.line, r.reason);
    }
    Ok(loaded.corpus)
}

fn prep_config(cfg: &ProjectConfig) -> Result<PrepConfig, CliError> {
    Ok(PrepConfig {
        stop_list: match &cfg.stop_list {
            Some(p) => load_term_list(p)?,
            None => BTreeSet::new(),
        },
        start_list: cfg.start_list.as_deref().map(load_term_list).transpose()?,
        synonyms: match &cfg.synonyms {
            Some(p) => load_synonyms(p)?,
            None => BTreeMap::new(),
        },
        min_df: cfg.min_df,
        drop_numerals: cfg.drop_numerals,
        stemming: cfg.stemming,
    })
}

fn population(cfg: &ProjectConfig, range: PeriodRange) -> Result<Option<PopulationSeries>, CliError> {
    match cfg.exposure()? {
        ExposureMode::PerDocument => Ok(None),
        ExposureMode::PerProduct => {
            let path = cfg.population.as_deref().ok_or_else(|| {
                CliError::Config("exposure_mode per_product needs a `population` file".into())
            })?;
            let pop = load_population(path)?;
            pop.check_covers(range)?;
            Ok(Some(pop))
        }
    }
}

fn token_streams(corpus: Option<&Corpus>, normalizer: &Normalizer) -> Docs {
    corpus
        .map(|c| {
            c.documents()
                .iter()
                .map(|d| (d.id.clone(), normalizer.tokens(&d.text)))
                .collect()
        })
        .unwrap_or_default()
}

fn load_registry(cfg: &ProjectConfig) -> Result<TopicRegistry, CliError> {
    let path = cfg.registry_path();
    if !path.exists() {
        return Err(CliError::MissingBaseline(path));
    }
    Ok(TopicRegistry::load(&path)?)
}

fn load_baseline(cfg: &ProjectConfig) -> Result<BaselineModel, CliError> {
    let path = cfg.baseline_path();
    let text = fs::read_to_string(&path).map_err(|_| CliError::MissingBaseline(path.clone()))?;
    BaselineModel::from_json(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Discovered topics from the documents in `docs`, with probes attached.
/// Returns the topics and the singular values used.
fn discover(cfg: &ProjectConfig, docs: &Docs, created: Period) -> Result<(Vec<Topic>, Vec<f64>), CliError> {
    let nc = normalize_token_lists(docs.clone(), cfg.min_df)?;
    let tdm = build_tdm(&nc, cfg.weighting()?)?;
    let max_k = tdm.n_terms().min(tdm.n_docs());
    // keep one dimension in reserve so the decomposition is truly truncated
    let k = cfg.k.min(max_k.saturating_sub(1)).max(1);
    let opts = SvdOptions {
        tol: cfg.svd_tol,
        seed: cfg.seed,
        ..SvdOptions::default()
    };
    let svd = truncated_svd_with(&tdm, k, &opts)?;
    let rc = rotate_concepts(&svd, cfg.varimax_max_iter, VARIMAX_TOL);
    let mut topics = extract_topics(&rc, tdm.terms(), cfg.top_m, created)?;
    attach_probes(&mut topics, &tdm, &svd, &rc, &nc.tokens, cfg.cutoff_sigma);
    Ok((topics, svd.singular_values.clone()))
}

fn terms_text(t: &Topic) -> String {
    t.terms
        .iter()
        .map(|x| format!("{}:{:.3}", x.term, x.weight))
        .collect::<Vec<_>>()
        .join(";")
}

fn kind_str(k: TopicKind) -> &'static str {
    match k {
        TopicKind::Custom => "custom",
        TopicKind::Discovered => "discovered",
    }
}

/// Up to `n` document ids per topic, highest score first.
fn samples(assignments: &[TopicAssignment], n: usize) -> BTreeMap<&str, Vec<&str>> {
    let mut by: BTreeMap<&str, Vec<&TopicAssignment>> = BTreeMap::new();
    for a in assignments {
        by.entry(&a.topic_id).or_default().push(a);
    }
    by.into_iter()
        .map(|(t, mut v)| {
            v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
            (t, v.into_iter().take(n).map(|a| a.doc_id.as_str()).collect())
        })
        .collect()
}

fn csv_bytes<F>(header: &[&str], rows: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let wrap = |e: csv::Error| CliError::Validation(e.to_string());
        w.write_record(header).map_err(wrap)?;
        rows(&mut w).map_err(wrap)?;
        w.flush().map_err(|e| CliError::io(Path::new("<csv>"), e))?;
    }
    Ok(buf)
}

fn assignments_bytes(a: &[TopicAssignment]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_assignments(a, &mut buf)?;
    if a.is_empty() {
        buf = b"doc_id,topic_id,score\n".to_vec();
    }
    Ok(buf)
}

fn trend_bytes(records: &[AlertRecord]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_trend(records, &mut buf)?;
    Ok(buf)
}

fn say(out: &mut dyn Write, line: String) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn baseline(cfg: &ProjectConfig, from: Period, to: Period, out: &mut dyn Write) -> Result<(), CliError> {
    let range = span(from, to)?;
    let mode = cfg.exposure()?;
    let corpus = read_corpus(cfg)?;
    let base = corpus.restrict(range).ok_or(Error::EmptyBaseline)?;
    let pop = population(cfg, range)?;
    let normalizer = Normalizer::new(prep_config(cfg)?)?;
    let docs = token_streams(Some(&base), &normalizer);

    let (discovered, singular_values) = discover(cfg, &docs, range.first)?;

    let reg_path = cfg.registry_path();
    let mut registry = if reg_path.exists() {
        TopicRegistry::load(&reg_path)?
    } else {
        TopicRegistry::new()
    };
    if let Some(p) = &cfg.custom_topics {
        for t in load_custom_topics(p, &normalizer, range.first)? {
            // keep the creation period of a topic that already exists
            let created = registry.get(&t.id).map_or(t.created_period, |old| old.created_period);
            registry.upsert(Topic {
                created_period: created,
                ..t
            });
        }
    }
    registry.replace_discovered(discovered);

    let assignments = assign_all(&registry, &docs, cfg.tau)?;
    let periods = bucket_range(base.documents(), range);
    let ids: Vec<String> = registry.active().map(|t| t.id.clone()).collect();
    let model = estimate_baseline(&assignments, &periods, pop.as_ref(), mode, &ids, range, cfg.min_rate)?;

    ensure_dir(&cfg.output_dir)?;
    if let Some(dir) = reg_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    registry.save(&reg_path)?;
    write_file(&cfg.baseline_path(), model.to_json()?.as_bytes())?;
    write_file(
        &cfg.output_dir.join("baseline_assignments.csv"),
        &assignments_bytes(&assignments)?,
    )?;
    let sv = csv_bytes(&["component", "singular_value"], |w| {
        for (i, s) in singular_values.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{s:.12e}")])?;
        }
        Ok(())
    })?;
    write_file(&cfg.output_dir.join("singular_values.csv"), &sv)?;

    let counts = TopicCounts::from_assignments(&assignments, &periods);
    let sample = samples(&assignments, 3);
    let topics: Vec<&Topic> = registry.active().collect();
    let table = csv_bytes(
        &["topic_id", "kind", "label", "baseline_count", "rate", "terms", "sample_docs"],
        |w| {
            for t in &topics {
                w.write_record([
                    t.id.clone(),
                    kind_str(t.kind).to_string(),
                    t.label.clone(),
                    counts.total(&t.id, range).to_string(),
                    format!("{:.6e}", model.rates.get(&t.id).copied().unwrap_or(0.0)),
                    terms_text(t),
                    sample.get(t.id.as_str()).map(|v| v.join(" ")).unwrap_or_default(),
                ])?;
            }
            Ok(())
        },
    )?;
    write_file(&cfg.output_dir.join("baseline_topics.csv"), &table)?;

    say(out, format!("baseline {range}: {} documents, exposure mode {mode}", base.len()))?;
    for t in &topics {
        say(
            out,
            format!(
                "  {:<28} {:>5} docs  rate {:.3e}  {}",
                t.id,
                counts.total(&t.id, range),
                model.monitoring_rate(&t.id),
                t.label
            ),
        )?;
    }
    say(out, format!("floor rate {:.3e}", model.floor_rate))?;
    Ok(())
}

pub fn analyze(cfg: &ProjectConfig, from: Period, to: Period, out: &mut dyn Write) -> Result<(), CliError> {
    let range = span(from, to)?;
    let model = load_baseline(cfg)?;
    if range.first <= model.baseline_span.last {
        return Err(CliError::Validation(format!(
            "analysis window {range} must start after the baseline span {}",
            model.baseline_span
        )));
    }
    let mode = cfg.exposure()?;
    if mode != model.mode {
        return Err(CliError::Validation(format!(
            "baseline was estimated with exposure mode {}, configuration says {mode}; re-run baseline",
            model.mode
        )));
    }
    let wins = windows(range, cfg.n, cfg.step())?;
    if wins.is_empty() {
        return Err(CliError::Validation(format!(
            "{range} is shorter than the window length n = {}",
            cfg.n
        )));
    }
    let mut registry = load_registry(cfg)?;
    let corpus = read_corpus(cfg)?;
    let window_corpus = corpus.restrict(range);
    let pop = population(cfg, range)?;
    let normalizer = Normalizer::new(prep_config(cfg)?)?;
    let docs = token_streams(window_corpus.as_ref(), &normalizer);
    let documents = window_corpus.as_ref().map(|c| c.documents()).unwrap_or(&[]);
    let periods = bucket_range(documents, range);

    let assignments = assign_all(&registry, &docs, cfg.tau)?;
    let counts = TopicCounts::from_assignments(&assignments, &periods);
    let exposure = exposure_series(mode, range, &periods, pop.as_ref())?;
    let monitored: Vec<MonitoredTopic> = registry
        .active()
        .map(|t| MonitoredTopic {
            id: t.id.clone(),
            since: if model.baseline_span.contains(t.created_period) {
                model.baseline_span.first
            } else {
                t.created_period
            },
        })
        .collect();
    let records = monitor(&monitored, &counts, &model, &exposure, &wins, cfg.threshold)?;

    ensure_dir(&cfg.output_dir)?;
    let trend_path = cfg.trend_path();
    let mut merged: Vec<AlertRecord> = match fs::read_to_string(&trend_path) {
        Ok(s) => read_trend(&s)?,
        Err(_) => Vec::new(),
    };
    let fresh: BTreeSet<(String, PeriodRange)> =
        records.iter().map(|r| (r.topic_id.clone(), r.window)).collect();
    merged.retain(|r| !fresh.contains(&(r.topic_id.clone(), r.window)));
    merged.extend(records.iter().cloned());
    merged.sort_by(|a, b| {
        a.window
            .first
            .cmp(&b.window.first)
            .then_with(|| a.window.last.cmp(&b.window.last))
            .then_with(|| a.topic_id.cmp(&b.topic_id))
    });
    write_file(&trend_path, &trend_bytes(&merged)?)?;

    let alerts: Vec<AlertRecord> = detect_emerging(records.clone(), cfg.threshold)
        .into_iter()
        .filter(|r| r.emerging)
        .collect();
    write_file(&cfg.output_dir.join("alerts.csv"), &trend_bytes(&alerts)?)?;
    write_file(
        &cfg.output_dir.join(format!("assignments_{from}_{to}.csv")),
        &assignments_bytes(&assignments)?,
    )?;

    say(
        out,
        format!(
            "analyze {range}: {} documents, {} windows, {} topics, exposure mode {mode}",
            docs.len(),
            wins.len(),
            monitored.len()
        ),
    )?;
    for r in &alerts {
        say(
            out,
            format!(
                "  EMERGING {:<28} {}  C={} B={:.3} F={:.3}",
                r.topic_id, r.window, r.observed, r.expected, r.statistic
            ),
        )?;
    }
    if alerts.is_empty() {
        say(out, "  no emerging topics".into())?;
    }

    // New candidate topics from this window, monitored from the next period.
    let created = range.last.succ();
    match discover(cfg, &docs, created) {
        Ok((topics, _)) => {
            let mut listed = Vec::new();
            for t in topics {
                if registry.get(&t.id).is_some_and(|old| !old.is_active()) {
                    continue;
                }
                listed.push(t.clone());
                registry.upsert(t);
            }
            let table = csv_bytes(&["topic_id", "label", "terms"], |w| {
                for t in &listed {
                    w.write_record([t.id.as_str(), t.label.as_str(), terms_text(t).as_str()])?;
                }
                Ok(())
            })?;
            write_file(&cfg.output_dir.join(format!("discovered_{from}_{to}.csv")), &table)?;
            say(out, format!("{} candidate topics discovered for review", listed.len()))?;
        }
        Err(CliError::Core(e)) if e.is_validation() => {
            say(out, format!("no topics discovered in {range}: {e}"))?;
        }
        Err(e) => return Err(e),
    }
    registry.save(&cfg.registry_path())?;
    Ok(())
}

pub fn promote(
    cfg: &ProjectConfig,
    topic: &str,
    name: &str,
    period: Option<Period>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let registry = load_registry(cfg)?;
    let period = match period {
        Some(p) => p,
        None => default_promotion_period(cfg)?,
    };
    let next = registry.promote(topic, name, period)?;
    next.save(&cfg.registry_path())?;
    let new = next
        .promotions()
        .last()
        .map(|p| p.custom_id.clone())
        .unwrap_or_default();
    say(out, format!("promoted {topic} to {new} from {period}"))?;
    Ok(())
}

/// The month after the latest analysed window, or after the baseline.
fn default_promotion_period(cfg: &ProjectConfig) -> Result<Period, CliError> {
    if let Ok(s) = fs::read_to_string(cfg.trend_path()) {
        if let Some(last) = read_trend(&s)?.iter().map(|r| r.window.last).max() {
            return Ok(last.succ());
        }
    }
    Ok(load_baseline(cfg)?.baseline_span.last.succ())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

pub fn report(cfg: &ProjectConfig, format: ReportFormat, out: &mut dyn Write) -> Result<(), CliError> {
    let path = cfg.trend_path();
    let text = fs::read_to_string(&path).map_err(|_| CliError::NoTrendData(path.clone()))?;
    let records = read_trend(&text)?;
    if records.is_empty() {
        return Err(CliError::NoTrendData(path));
    }
    let dir = cfg.output_dir.join("report");
    ensure_dir(&dir)?;
    let labels: BTreeMap<String, String> = TopicRegistry::load(&cfg.registry_path())
        .map(|r| r.topics().map(|t| (t.id.clone(), t.label.clone())).collect())
        .unwrap_or_default();

    let mut written: Vec<PathBuf> = Vec::new();
    match format {
        ReportFormat::Csv => {
            let p = dir.join("trend.csv");
            write_file(&p, text.as_bytes())?;
            written.push(p);
            let p = dir.join("trend_table.csv");
            write_file(&p, &report::pivot_table(&records, &labels))?;
            written.push(p);
        }
        ReportFormat::Svg => {
            for (topic, svg) in report::charts(&records, &labels, cfg.threshold) {
                let p = dir.join(format!("{topic}.svg"));
                write_file(&p, svg.as_bytes())?;
                written.push(p);
            }
        }
    }
    for p in &written {
        say(out, format!("wrote {}", p.display()))?;
    }
    Ok(())
}

pub fn spell_suggest(cfg: &ProjectConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = read_corpus(cfg)?;
    let prep = PrepConfig {
        stemming: false,
        start_list: None,
        min_df: 1,
        ..prep_config(cfg)?
    };
    let normalizer = Normalizer::new(prep)?;
    let docs = token_streams(Some(&corpus), &normalizer);
    let vocab = vocabulary(docs.iter().map(|(_, t)| t.as_slice()));
    let suggestions = spell_cluster(&vocab, cfg.min_df);
    let bytes = csv_bytes(
        &["rare_term", "suggested_canonical", "soundex", "rare_df", "canonical_df"],
        |w| {
            for s in &suggestions {
                w.write_record([
                    s.rare_term.clone(),
                    s.suggested_canonical.clone(),
                    s.soundex_code.clone(),
                    s.rare_df.to_string(),
                    s.canonical_df.to_string(),
                ])?;
            }
            Ok(())
        },
    )?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("spell_suggestions.csv"), &bytes)?;
    out.write_all(&bytes)
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn cooccur(cfg: &ProjectConfig, from: Period, to: Period, out: &mut dyn Write) -> Result<(), CliError> {
    let range = span(from, to)?;
    let registry = load_registry(cfg)?;
    let corpus = read_corpus(cfg)?;
    let normalizer = Normalizer::new(prep_config(cfg)?)?;
    let docs = token_streams(corpus.restrict(range).as_ref(), &normalizer);
    let assignments = assign_all(&registry, &docs, cfg.tau)?;
    let co = topic_cooccurrence(&assignments);
    let mut buf = Vec::new();
    co.write_csv(&mut buf)?;
    ensure_dir(&cfg.output_dir)?;
    let p = cfg.output_dir.join("cooccurrence.csv");
    write_file(&p, &buf)?;
    say(
        out,
        format!("{} documents, {} topics; wrote {}", docs.len(), co.topics.len(), p.display()),
    )
}
