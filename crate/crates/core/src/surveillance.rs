//! Expectation-based Poisson scan statistic over per-topic monthly counts.
//!
//! Under the null a topic's count in period `t` is Poisson with mean
//! `B_t = b * exposure_t`, where `b` is the topic's baseline rate. Over a
//! window of `n` periods the observed and expected counts are summed and
//! compared with the log-likelihood ratio
//! `F = C ln(C/B) + B - C` for `C > B` (else 0). `F > threshold` flags the
//! topic as emerging.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{PeriodSeries, PopulationSeries};
use crate::error::{Error, Result};
use crate::period::{Period, PeriodRange};
use crate::topics::TopicAssignment;

pub const DEFAULT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_WINDOW: usize = 3;
/// Floor rate used when no topic has a positive baseline rate.
pub const DEFAULT_MIN_RATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureMode {
    /// Rates are per product in field per month.
    #[default]
    PerProduct,
    /// Rates are per complaint document per month.
    PerDocument,
}

impl FromStr for ExposureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_product" => Ok(ExposureMode::PerProduct),
            "per_document" => Ok(ExposureMode::PerDocument),
            other => Err(Error::InvalidConfig(format!("unknown exposure mode `{other}`"))),
        }
    }
}

impl fmt::Display for ExposureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExposureMode::PerProduct => "per_product",
            ExposureMode::PerDocument => "per_document",
        })
    }
}

/// Exposure per period: products in field, or documents received.
pub fn exposure_series(
    mode: ExposureMode,
    range: PeriodRange,
    periods: &PeriodSeries,
    population: Option<&PopulationSeries>,
) -> Result<BTreeMap<Period, f64>> {
    range
        .iter()
        .map(|p| {
            let e = match mode {
                ExposureMode::PerProduct => population
                    .ok_or_else(|| {
                        Error::InvalidConfig("per_product mode needs a population series".into())
                    })?
                    .get(p)?,
                ExposureMode::PerDocument => periods.count(p) as f64,
            };
            Ok((p, e))
        })
        .collect()
}

/// Documents per topic per period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopicCounts {
    counts: BTreeMap<String, BTreeMap<Period, u64>>,
}

impl TopicCounts {
    /// Tally assignments using each document's period in `periods`;
    /// assignments for documents outside the series are ignored.
    pub fn from_assignments(assignments: &[TopicAssignment], periods: &PeriodSeries) -> Self {
        let doc_period: HashMap<&str, Period> = periods
            .buckets()
            .iter()
            .flat_map(|(p, ids)| ids.iter().map(move |id| (id.as_str(), *p)))
            .collect();
        let mut t = TopicCounts::default();
        for a in assignments {
            if let Some(&p) = doc_period.get(a.doc_id.as_str()) {
                t.add(&a.topic_id, p, 1);
            }
        }
        t
    }

    pub fn add(&mut self, topic: &str, period: Period, n: u64) {
        *self
            .counts
            .entry(topic.to_string())
            .or_default()
            .entry(period)
            .or_insert(0) += n;
    }

    pub fn get(&self, topic: &str, period: Period) -> u64 {
        self.counts
            .get(topic)
            .and_then(|m| m.get(&period))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, topic: &str, range: PeriodRange) -> u64 {
        range.iter().map(|p| self.get(topic, p)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    /// Topic id -> baseline rate (expected topic documents per unit of
    /// exposure per period). Zero for topics unseen during the baseline.
    pub rates: BTreeMap<String, f64>,
    /// Smallest positive rate; the rate for topics with none of their own.
    pub floor_rate: f64,
    pub baseline_span: PeriodRange,
    pub mode: ExposureMode,
}

impl BaselineModel {
    /// Rate a topic is monitored at: its own if positive, otherwise the floor.
    pub fn monitoring_rate(&self, topic: &str) -> f64 {
        match self.rates.get(topic) {
            Some(&r) if r > 0.0 => r,
            _ => self.floor_rate,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Rates from counts and an exposure series covering `span`.
pub fn estimate_rates(
    counts: &TopicCounts,
    topics: &[String],
    exposure: &BTreeMap<Period, f64>,
    span: PeriodRange,
    mode: ExposureMode,
    min_rate: f64,
) -> Result<BaselineModel> {
    if span.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    if !(min_rate > 0.0) {
        return Err(Error::InvalidConfig("min_rate must be positive".into()));
    }
    let mut total_exposure = 0.0;
    for p in span.iter() {
        let e = *exposure
            .get(&p)
            .ok_or(Error::MissingPopulation(p))?;
        if mode == ExposureMode::PerProduct && e <= 0.0 {
            return Err(Error::ZeroPopulation);
        }
        total_exposure += e;
    }
    if total_exposure <= 0.0 {
        return Err(match mode {
            ExposureMode::PerProduct => Error::ZeroPopulation,
            ExposureMode::PerDocument => Error::EmptyBaseline,
        });
    }
    let rates: BTreeMap<String, f64> = topics
        .iter()
        .map(|t| (t.clone(), counts.total(t, span) as f64 / total_exposure))
        .collect();
    let floor_rate = rates
        .values()
        .copied()
        .filter(|&r| r > 0.0)
        .min_by(f64::total_cmp)
        .unwrap_or(min_rate);
    Ok(BaselineModel {
        rates,
        floor_rate,
        baseline_span: span,
        mode,
    })
}

/// Baseline rates for `topics` over `span` from document assignments.
#[allow(clippy::too_many_arguments)]
pub fn estimate_baseline(
    assignments: &[TopicAssignment],
    periods: &PeriodSeries,
    population: Option<&PopulationSeries>,
    mode: ExposureMode,
    topics: &[String],
    span: PeriodRange,
    min_rate: f64,
) -> Result<BaselineModel> {
    if span.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    let exposure = exposure_series(mode, span, periods, population)?;
    let counts = TopicCounts::from_assignments(assignments, periods);
    estimate_rates(&counts, topics, &exposure, span, mode, min_rate)
}

pub fn expected_count(rate: f64, exposure: f64) -> f64 {
    rate * exposure
}

/// `C ln(C/B) + B - C` when `C > B`, else 0.
pub fn scan_statistic(observed: u64, expected: f64) -> Result<f64> {
    if !(expected > 0.0) {
        return Err(Error::NonpositiveExpected(expected));
    }
    let c = observed as f64;
    if c <= expected {
        return Ok(0.0);
    }
    Ok(c * (c / expected).ln() + expected - c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowCounts {
    pub topic_id: String,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
}

/// Sum observed and expected counts over the window, then score.
/// Returns `(C, B, F)`.
pub fn window_scan(counts: &WindowCounts) -> Result<(u64, f64, f64)> {
    if counts.observed.is_empty() || counts.observed.len() != counts.expected.len() {
        return Err(Error::DimensionMismatch(format!(
            "window has {} observed and {} expected periods",
            counts.observed.len(),
            counts.expected.len()
        )));
    }
    let c: u64 = counts.observed.iter().sum();
    let b: f64 = counts.expected.iter().sum();
    Ok((c, b, scan_statistic(c, b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub topic_id: String,
    pub window: PeriodRange,
    pub observed: u64,
    pub expected: f64,
    pub statistic: f64,
    pub emerging: bool,
}

/// Flag records with `statistic > threshold` (strict) and sort by
/// statistic descending, then topic and window.
pub fn detect_emerging(mut records: Vec<AlertRecord>, threshold: f64) -> Vec<AlertRecord> {
    for r in &mut records {
        r.emerging = r.statistic > threshold;
    }
    records.sort_by(|a, b| {
        b.statistic
            .total_cmp(&a.statistic)
            .then_with(|| a.topic_id.cmp(&b.topic_id))
            .then_with(|| a.window.first.cmp(&b.window.first))
    });
    records
}

/// Windows of `n` periods starting every `step` periods, fully inside
/// `range`.
pub fn windows(range: PeriodRange, n: usize, step: usize) -> Result<Vec<PeriodRange>> {
    if n == 0 || step == 0 {
        return Err(Error::InvalidConfig("window length and step must be positive".into()));
    }
    let mut out = Vec::new();
    let mut start = range.first;
    while start.offset(n as i32 - 1) <= range.last {
        out.push(PeriodRange::new(start, start.offset(n as i32 - 1)));
        start = start.offset(step as i32);
    }
    Ok(out)
}

/// A topic to monitor and the first period it exists in.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredTopic {
    pub id: String,
    pub since: Period,
}

/// Scan every topic over every window. A topic is scanned only in windows
/// starting at or after its `since` period. Output is in canonical
/// `(window, topic)` order with emerging flags set.
pub fn monitor(
    topics: &[MonitoredTopic],
    counts: &TopicCounts,
    baseline: &BaselineModel,
    exposure: &BTreeMap<Period, f64>,
    windows: &[PeriodRange],
    threshold: f64,
) -> Result<Vec<AlertRecord>> {
    let mut out = Vec::new();
    for w in windows {
        let exp: Vec<f64> = w
            .iter()
            .map(|p| exposure.get(&p).copied().ok_or(Error::MissingPopulation(p)))
            .collect::<Result<_>>()?;
        for t in topics.iter().filter(|t| t.since <= w.first) {
            let rate = baseline.monitoring_rate(&t.id);
            let wc = WindowCounts {
                topic_id: t.id.clone(),
                observed: w.iter().map(|p| counts.get(&t.id, p)).collect(),
                expected: exp.iter().map(|&e| expected_count(rate, e)).collect(),
            };
            let (c, b, f) = window_scan(&wc)?;
            out.push(AlertRecord {
                topic_id: t.id.clone(),
                window: *w,
                observed: c,
                expected: b,
                statistic: f,
                emerging: f > threshold,
            });
        }
    }
    out.sort_by(|a, b| {
        a.window
            .first
            .cmp(&b.window.first)
            .then_with(|| a.topic_id.cmp(&b.topic_id))
    });
    Ok(out)
}

pub const TREND_HEADER: [&str; 7] = ["topic_id", "window_start", "window_end", "C", "B", "F", "emerging"];

/// `topic_id,window_start,window_end,C,B,F,emerging`, in the given order.
pub fn write_trend(records: &[AlertRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::parse("<trend>", 0, e.to_string());
    w.write_record(TREND_HEADER).map_err(err)?;
    for r in records {
        w.write_record([
            r.topic_id.clone(),
            r.window.first.to_string(),
            r.window.last.to_string(),
            r.observed.to_string(),
            format!("{:.6}", r.expected),
            format!("{:.6}", r.statistic),
            r.emerging.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<trend>", e))?;
    Ok(())
}

pub fn read_trend(data: &str) -> Result<Vec<AlertRecord>> {
    let mut reader = csv::Reader::from_reader(data.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let perr = |m: String| Error::parse("trend.csv", line, m);
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        if rec.len() != 7 {
            return Err(perr(format!("expected 7 fields, got {}", rec.len())));
        }
        let period = |s: &str| s.parse::<Period>().map_err(|e| perr(e.to_string()));
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(e.to_string()));
        out.push(AlertRecord {
            topic_id: rec[0].to_string(),
            window: PeriodRange::new(period(&rec[1])?, period(&rec[2])?),
            observed: rec[3].parse().map_err(|e: std::num::ParseIntError| perr(e.to_string()))?,
            expected: num(&rec[4])?,
            statistic: num(&rec[5])?,
            emerging: rec[6].parse().map_err(|e: std::str::ParseBoolError| perr(e.to_string()))?,
        });
    }
    Ok(out)
}

/// Document counts for topic pairs. Diagonal entries are per-topic counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cooccurrence {
    pub topics: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Cooccurrence {
    pub fn get(&self, a: &str, b: &str) -> u64 {
        let i = self.topics.iter().position(|t| t == a);
        let j = self.topics.iter().position(|t| t == b);
        match (i, j) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    /// `topic_a,topic_b,count` for the upper triangle, diagonal included.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::parse("<cooccurrence>", 0, e.to_string());
        w.write_record(["topic_a", "topic_b", "count"]).map_err(err)?;
        for i in 0..self.topics.len() {
            for j in i..self.topics.len() {
                w.write_record([&self.topics[i], &self.topics[j], &self.counts[i][j].to_string()])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<cooccurrence>", e))?;
        Ok(())
    }
}

pub fn topic_cooccurrence(assignments: &[TopicAssignment]) -> Cooccurrence {
    let topics: Vec<String> = assignments
        .iter()
        .map(|a| a.topic_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = topics.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut by_doc: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for a in assignments {
        by_doc.entry(&a.doc_id).or_default().insert(index[a.topic_id.as_str()]);
    }
    let mut counts = vec![vec![0u64; topics.len()]; topics.len()];
    for set in by_doc.values() {
        for &i in set {
            for &j in set {
                counts[i][j] += 1;
            }
        }
    }
    Cooccurrence { topics, counts }
}

/// Single-topic outbreak simulation: a baseline of Poisson monthly counts
/// at `base_rate * population`, then one window of `window` months at
/// `relative_risk` times that mean, scored against the estimated baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutbreakScenario {
    pub base_rate: f64,
    pub population: f64,
    pub baseline_months: usize,
    pub window: usize,
    pub relative_risk: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationRun {
    pub baseline_rate: f64,
    pub observed: u64,
    pub expected: f64,
    pub statistic: f64,
    pub emerging: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub runs: Vec<SimulationRun>,
}

impl SimulationSummary {
    pub fn alarms(&self) -> usize {
        self.runs.iter().filter(|r| r.emerging).count()
    }

    pub fn alarm_fraction(&self) -> f64 {
        self.alarms() as f64 / self.runs.len().max(1) as f64
    }

    pub fn mean_observed(&self) -> f64 {
        self.runs.iter().map(|r| r.observed as f64).sum::<f64>() / self.runs.len().max(1) as f64
    }

    pub fn mean_statistic(&self) -> f64 {
        self.runs.iter().map(|r| r.statistic).sum::<f64>() / self.runs.len().max(1) as f64
    }
}

impl OutbreakScenario {
    /// One simulated baseline + window, fully determined by `seed`.
    pub fn run(&self, seed: u64) -> Result<SimulationRun> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = self.base_rate * self.population;
        let base = Poisson::new(mean)
            .map_err(|e| Error::InvalidConfig(format!("baseline mean {mean}: {e}")))?;
        let outbreak = Poisson::new(mean * self.relative_risk)
            .map_err(|e| Error::InvalidConfig(format!("outbreak mean: {e}")))?;

        let start = Period::new(2000, 1).expect("valid month");
        let span = PeriodRange::new(start, start.offset(self.baseline_months as i32 - 1));
        let watch = PeriodRange::new(span.last.succ(), span.last.offset(self.window as i32));
        let topic = "sim".to_string();

        let mut counts = TopicCounts::default();
        for p in span.iter() {
            counts.add(&topic, p, base.sample(&mut rng) as u64);
        }
        for p in watch.iter() {
            counts.add(&topic, p, outbreak.sample(&mut rng) as u64);
        }
        let exposure: BTreeMap<Period, f64> = PeriodRange::new(span.first, watch.last)
            .iter()
            .map(|p| (p, self.population))
            .collect();
        let model = estimate_rates(
            &counts,
            std::slice::from_ref(&topic),
            &exposure,
            span,
            ExposureMode::PerProduct,
            DEFAULT_MIN_RATE,
        )?;
        let records = monitor(
            &[MonitoredTopic {
                id: topic.clone(),
                since: span.first,
            }],
            &counts,
            &model,
            &exposure,
            &[watch],
            self.threshold,
        )?;
        let r = &records[0];
        Ok(SimulationRun {
            baseline_rate: model.rates[&topic],
            observed: r.observed,
            expected: r.expected,
            statistic: r.statistic,
            emerging: r.emerging,
        })
    }

    /// `runs` simulations with seeds `first_seed..first_seed + runs`.
    pub fn simulate(&self, runs: usize, first_seed: u64) -> Result<SimulationSummary> {
        let runs = (0..runs as u64)
            .map(|i| self.run(first_seed + i))
            .collect::<Result<_>>()?;
        Ok(SimulationSummary { runs })
    }
}
