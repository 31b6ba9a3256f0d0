//! Complaint ingestion: loading, validation, monthly bucketing and the
//! product-population series used as the exposure denominator.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::period::{Period, PeriodRange};

/// One complaint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(with = "iso_date")]
    pub date: NaiveDate,
    pub product: String,
    pub text: String,
}

/// Raw record as it appears in JSONL/CSV input, before validation.
#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    date: String,
    #[serde(default)]
    product: String,
    text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown corpus format `{other}`"))),
        }
    }
}

impl CorpusFormat {
    /// Guess from file extension; anything but `.csv` is treated as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// A record that parsed structurally but failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

/// Documents sorted by `(date, id)` with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    span: (NaiveDate, NaiveDate),
}

impl Corpus {
    pub fn new(mut documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        documents.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        let span = (documents[0].date, documents[documents.len() - 1].date);
        Ok(Corpus { documents, span })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn span(&self) -> (NaiveDate, NaiveDate) {
        self.span
    }

    pub fn period_span(&self) -> PeriodRange {
        PeriodRange::new(Period::of_date(self.span.0), Period::of_date(self.span.1))
    }

    /// Documents dated within `range`, or `None` if there are none.
    pub fn restrict(&self, range: PeriodRange) -> Option<Corpus> {
        let docs: Vec<Document> = self
            .documents
            .iter()
            .filter(|d| range.contains(Period::of_date(d.date)))
            .cloned()
            .collect();
        Corpus::new(docs).ok()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Result of [`load_corpus`]: the valid documents plus per-line rejections.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub rejections: Vec<Rejection>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let raw = match format {
        CorpusFormat::Jsonl => read_jsonl(path, file)?,
        CorpusFormat::Csv => read_csv(path, file)?,
    };

    let mut documents = Vec::with_capacity(raw.len());
    let mut rejections = Vec::new();
    for (line, rec) in raw {
        match validate(rec) {
            Ok(doc) => documents.push(doc),
            Err(reason) => rejections.push(Rejection { line, reason }),
        }
    }
    let corpus = Corpus::new(documents)?;
    Ok(LoadedCorpus { corpus, rejections })
}

fn read_jsonl(path: &Path, file: File) -> Result<Vec<(usize, RawRecord)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn read_csv(path: &Path, file: File) -> Result<Vec<(usize, RawRecord)>> {
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let raw: RawRecord = rec
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push((line, raw));
    }
    Ok(out)
}

fn validate(rec: RawRecord) -> std::result::Result<Document, String> {
    let id = rec.id.trim().to_string();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let date = parse_date(&rec.date).ok_or_else(|| format!("unparseable date `{}`", rec.date))?;
    let lo = NaiveDate::from_ymd_opt(1900, 1, 1).unwrap();
    let hi = NaiveDate::from_ymd_opt(2100, 1, 1).unwrap();
    if date < lo || date > hi {
        return Err(format!("date {date} outside [1900-01-01, 2100-01-01]"));
    }
    if rec.text.trim().is_empty() {
        return Err("empty text".into());
    }
    Ok(Document {
        id,
        date,
        product: rec.product.trim().to_string(),
        text: rec.text,
    })
}

/// `YYYY-MM-DD`, or an RFC 3339 timestamp reduced to its UTC calendar date.
fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| {
            DateTime::parse_from_rfc3339(s)
                .ok()
                .map(|dt| dt.with_timezone(&Utc).date_naive())
        })
}

mod iso_date {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&d.format("%Y-%m-%d"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_date(&s).ok_or_else(|| serde::de::Error::custom(format!("bad date `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Month,
}

/// Documents partitioned into contiguous calendar months.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodSeries {
    pub granularity: Granularity,
    buckets: Vec<(Period, Vec<String>)>,
}

impl PeriodSeries {
    pub fn buckets(&self) -> &[(Period, Vec<String>)] {
        &self.buckets
    }

    pub fn range(&self) -> PeriodRange {
        PeriodRange::new(self.buckets[0].0, self.buckets[self.buckets.len() - 1].0)
    }

    /// Documents in `period`; empty for months outside the series.
    pub fn docs(&self, period: Period) -> &[String] {
        let first = self.buckets[0].0;
        let idx = period.index() - first.index();
        if idx < 0 {
            return &[];
        }
        self.buckets
            .get(idx as usize)
            .map(|(_, ids)| ids.as_slice())
            .unwrap_or(&[])
    }

    pub fn count(&self, period: Period) -> usize {
        self.docs(period).len()
    }
}

pub fn bucket_by_period(corpus: &Corpus, granularity: Granularity) -> Result<PeriodSeries> {
    match granularity {
        Granularity::Month => {}
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let span = corpus.period_span();
    let mut buckets: Vec<(Period, Vec<String>)> = span.iter().map(|p| (p, Vec::new())).collect();
    for d in corpus.documents() {
        let idx = (Period::of_date(d.date).index() - span.first.index()) as usize;
        buckets[idx].1.push(d.id.clone());
    }
    Ok(PeriodSeries {
        granularity,
        buckets,
    })
}

/// Bucket `documents` into every month of `range`, including months with no
/// documents. Documents dated outside `range` are skipped.
pub fn bucket_range(documents: &[Document], range: PeriodRange) -> PeriodSeries {
    let mut buckets: Vec<(Period, Vec<String>)> = range.iter().map(|p| (p, Vec::new())).collect();
    for d in documents {
        let p = Period::of_date(d.date);
        if range.contains(p) {
            buckets[(p.index() - range.first.index()) as usize]
                .1
                .push(d.id.clone());
        }
    }
    PeriodSeries {
        granularity: Granularity::Month,
        buckets,
    }
}

/// Products in field per month.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationSeries {
    entries: BTreeMap<Period, f64>,
}

impl PopulationSeries {
    pub fn from_entries(entries: impl IntoIterator<Item = (Period, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (period, value) in entries {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativePopulation { period, value });
            }
            map.insert(period, value);
        }
        Ok(PopulationSeries { entries: map })
    }

    /// Constant population over a range; handy for simulations and fixtures.
    pub fn constant(range: PeriodRange, value: f64) -> Result<Self> {
        Self::from_entries(range.iter().map(|p| (p, value)))
    }

    pub fn get(&self, period: Period) -> Result<f64> {
        self.entries
            .get(&period)
            .copied()
            .ok_or(Error::MissingPopulation(period))
    }

    pub fn entries(&self) -> &BTreeMap<Period, f64> {
        &self.entries
    }

    /// Error naming the first month of `range` with no entry.
    pub fn check_covers(&self, range: PeriodRange) -> Result<()> {
        range.iter().try_for_each(|p| self.get(p).map(|_| ()))
    }
}

#[derive(Debug, Deserialize)]
struct PopulationRow {
    period: String,
    population: f64,
}

pub fn load_population(path: &Path) -> Result<PopulationSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<PopulationRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let period: Period = row
            .period
            .parse()
            .map_err(|e: crate::period::ParsePeriodError| Error::parse(path, line, e.to_string()))?;
        entries.push((period, row.population));
    }
    PopulationSeries::from_entries(entries)
}
