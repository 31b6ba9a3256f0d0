//! Topic registry: discovered topics from rotated concepts, analyst-defined
//! custom topics, multi-label document assignment, and promotion of
//! discovered topics into monitored custom topics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomposition::{RotatedConcepts, SvdResult};
use crate::error::{Error, Result};
use crate::period::Period;
use crate::text::Normalizer;
use crate::vector_space::{TermDocMatrix, Weighting};

pub const DEFAULT_TAU: f64 = 0.25;
pub const DEFAULT_CUTOFF_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicKind {
    Custom,
    Discovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicStatus {
    Active,
    Retired,
}

/// A weighted term. Multi-word phrases are stored as space-separated
/// normalized tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTerm {
    pub term: String,
    pub weight: f64,
}

impl TopicTerm {
    fn tokens(&self) -> impl Iterator<Item = &str> {
        self.term.split(' ')
    }
}

/// Everything needed to score a new document against one rotated concept:
/// the fold-in coefficients `U_k Σ_k⁻¹ R` for that concept and the
/// assignment cutoff learned on the training documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptProbe {
    pub weighting: Weighting,
    /// term -> (coefficient, idf); idf is 1 unless weighting is TF-IDF.
    pub coefficients: BTreeMap<String, (f64, f64)>,
    pub cutoff: ConceptCutoff,
}

impl ConceptProbe {
    /// `|rotated projection|` of a normalized token stream.
    pub fn score(&self, tokens: &[String]) -> f64 {
        // ordered so the floating-point sum is reproducible
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            if self.coefficients.contains_key(t.as_str()) {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut acc = 0.0;
        for (term, &tf) in &counts {
            let (coef, idf) = self.coefficients[*term];
            let w = match self.weighting {
                Weighting::Boolean => 1.0,
                Weighting::Count => tf as f64,
                Weighting::Tfidf => tf as f64 * idf,
            };
            acc += w * coef;
        }
        acc.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub kind: TopicKind,
    pub label: String,
    pub terms: Vec<TopicTerm>,
    pub created_period: Period,
    pub status: TopicStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ConceptProbe>,
}

impl Topic {
    pub fn is_active(&self) -> bool {
        self.status == TopicStatus::Active
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub doc_id: String,
    pub topic_id: String,
    pub score: f64,
}

/// `disc-YYYY-MM-NN` for concept `index` (zero-based).
pub fn discovered_id(period: Period, index: usize) -> String {
    format!("disc-{period}-{:02}", index + 1)
}

/// One discovered topic per rotated concept, described by its `top_m`
/// heaviest terms (by absolute rotated loading, ties broken by term).
pub fn extract_topics(
    rc: &RotatedConcepts,
    vocabulary: &[String],
    top_m: usize,
    period: Period,
) -> Result<Vec<Topic>> {
    if top_m == 0 {
        return Err(Error::InvalidConfig("top_m must be at least 1".into()));
    }
    let l = &rc.rotated_term_loadings;
    if l.nrows() != vocabulary.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} loadings rows for {} vocabulary terms",
            l.nrows(),
            vocabulary.len()
        )));
    }
    let mut topics = Vec::with_capacity(l.ncols());
    for (c, col) in l.column_iter().enumerate() {
        let mut ranked: Vec<(usize, f64)> = col
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| vocabulary[a.0].cmp(&vocabulary[b.0])));
        ranked.truncate(top_m);
        let Some(&(_, max)) = ranked.first() else {
            continue;
        };
        let terms: Vec<TopicTerm> = ranked
            .iter()
            .map(|&(i, v)| TopicTerm {
                term: vocabulary[i].clone(),
                weight: v / max,
            })
            .collect();
        let label = terms
            .iter()
            .take(5)
            .map(|t| t.term.as_str())
            .collect::<Vec<_>>()
            .join("+");
        topics.push(Topic {
            id: discovered_id(period, c),
            kind: TopicKind::Discovered,
            label,
            terms,
            created_period: period,
            status: TopicStatus::Active,
            probe: None,
        });
    }
    Ok(topics)
}

/// Fold-in coefficients `U_k Σ_k⁻¹ R` (terms x k). A document vector `d`
/// projects to `dᵀ C`, which reproduces the rotated document factors
/// `V_k R` for the training columns.
pub fn fold_in_coefficients(svd: &SvdResult, rc: &RotatedConcepts) -> DMatrix<f64> {
    let mut u = svd.term_factors.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        u.column_mut(j).scale_mut(1.0 / s);
    }
    u * &rc.rotation
}

/// Mean and standard deviation of one concept's document scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptCutoff {
    pub mean: f64,
    pub std_dev: f64,
    pub cutoff_sigma: f64,
}

impl ConceptCutoff {
    /// Population statistics of `scores`.
    pub fn from_scores(scores: &[f64], cutoff_sigma: f64) -> Self {
        let n = scores.len().max(1) as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        ConceptCutoff {
            mean,
            std_dev: var.sqrt(),
            cutoff_sigma,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.mean + self.cutoff_sigma * self.std_dev
    }

    /// A degenerate concept (zero spread) admits nothing.
    pub fn admits(&self, score: f64) -> bool {
        self.std_dev > 1e-12 * self.mean.abs().max(1.0) && score > self.threshold()
    }
}

/// Assign a document by its rotated factor row.
pub fn assign_discovered(
    doc_id: &str,
    topic_id: &str,
    rotated_row: &[f64],
    concept: usize,
    cutoff: &ConceptCutoff,
) -> Option<TopicAssignment> {
    let score = rotated_row[concept].abs();
    cutoff.admits(score).then(|| TopicAssignment {
        doc_id: doc_id.to_string(),
        topic_id: topic_id.to_string(),
        score,
    })
}

/// Attach a [`ConceptProbe`] to each discovered topic, computing cutoffs
/// from the training documents' scores. `topics[c]` must describe concept
/// `c`; `tokens` are the training documents' normalized streams.
pub fn attach_probes(
    topics: &mut [Topic],
    tdm: &TermDocMatrix,
    svd: &SvdResult,
    rc: &RotatedConcepts,
    tokens: &[Vec<String>],
    cutoff_sigma: f64,
) {
    let coef = fold_in_coefficients(svd, rc);
    let idf = tdm.idf();
    for topic in topics.iter_mut() {
        let Some(c) = concept_index(&topic.id) else {
            continue;
        };
        let coefficients: BTreeMap<String, (f64, f64)> = tdm
            .terms()
            .iter()
            .enumerate()
            .filter(|&(i, _)| coef[(i, c)] != 0.0)
            .map(|(i, t)| (t.clone(), (coef[(i, c)], idf.map_or(1.0, |w| w[i]))))
            .collect();
        let mut probe = ConceptProbe {
            weighting: tdm.weighting(),
            coefficients,
            cutoff: ConceptCutoff::from_scores(&[], cutoff_sigma),
        };
        let scores: Vec<f64> = tokens.iter().map(|t| probe.score(t)).collect();
        probe.cutoff = ConceptCutoff::from_scores(&scores, cutoff_sigma);
        topic.probe = Some(probe);
    }
}

fn concept_index(id: &str) -> Option<usize> {
    id.rsplit('-').next()?.parse::<usize>().ok()?.checked_sub(1)
}

/// Score a document's normalized tokens against a custom topic: matched
/// weight over total weight. A phrase matches only as a consecutive run.
pub fn custom_score(tokens: &[String], topic: &Topic) -> f64 {
    let total = topic.total_weight();
    if total <= 0.0 {
        return 0.0;
    }
    let matched: f64 = topic
        .terms
        .iter()
        .filter(|t| contains_run(tokens, t))
        .map(|t| t.weight)
        .sum();
    matched / total
}

fn contains_run(tokens: &[String], term: &TopicTerm) -> bool {
    let needle: Vec<&str> = term.tokens().collect();
    if needle.is_empty() || needle.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(needle.len())
        .any(|w| w.iter().zip(&needle).all(|(a, b)| a == b))
}

pub fn assign_custom(
    doc_id: &str,
    tokens: &[String],
    topic: &Topic,
    tau: f64,
) -> Result<Option<TopicAssignment>> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidConfig(format!("tau {tau} outside (0, 1]")));
    }
    let score = custom_score(tokens, topic);
    Ok((score >= tau).then(|| TopicAssignment {
        doc_id: doc_id.to_string(),
        topic_id: topic.id.clone(),
        score,
    }))
}

/// Assign every document to every active topic it qualifies for. Custom
/// topics use weighted coverage against `tau`; discovered topics use their
/// probe. Output is sorted by `(doc_id, topic_id)`.
pub fn assign_all(
    registry: &TopicRegistry,
    docs: &[(String, Vec<String>)],
    tau: f64,
) -> Result<Vec<TopicAssignment>> {
    let mut out = Vec::new();
    for topic in registry.active() {
        match (topic.kind, &topic.probe) {
            (TopicKind::Discovered, Some(probe)) => {
                for (id, toks) in docs {
                    let score = probe.score(toks);
                    if probe.cutoff.admits(score) {
                        out.push(TopicAssignment {
                            doc_id: id.clone(),
                            topic_id: topic.id.clone(),
                            score,
                        });
                    }
                }
            }
            (TopicKind::Discovered, None) => {}
            (TopicKind::Custom, _) => {
                for (id, toks) in docs {
                    if let Some(a) = assign_custom(id, toks, topic, tau)? {
                        out.push(a);
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then_with(|| a.topic_id.cmp(&b.topic_id)));
    Ok(out)
}

pub fn write_assignments(assignments: &[TopicAssignment], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for a in assignments {
        w.serialize(a).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("assignments.csv", e))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse("<csv>", 0, e.to_string())
}

/// `custom-` plus a lowercase, dash-separated slug of `name`.
pub fn custom_id(name: &str) -> String {
    let slug: Vec<String> = crate::text::tokenize(name);
    format!("custom-{}", slug.join("-"))
}

#[derive(Debug, Deserialize)]
struct CustomRow {
    topic: String,
    term: String,
    weight: f64,
}

/// Read `topic,term,weight` rows. Terms are run through `normalizer` so
/// they match normalized document streams; terms that normalize away are
/// dropped and a term repeated after normalization keeps its largest
/// weight.
pub fn load_custom_topics(path: &Path, normalizer: &Normalizer, period: Period) -> Result<Vec<Topic>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<TopicTerm>> = HashMap::new();
    for (i, row) in reader.deserialize::<CustomRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let name = row.topic.trim().to_string();
        if !(row.weight > 0.0 && row.weight <= 1.0) {
            return Err(Error::WeightOutOfRange {
                topic: name,
                term: row.term,
                weight: row.weight,
                row: line,
            });
        }
        let term = normalizer.tokens(&row.term).join(" ");
        let terms = grouped.entry(name.clone()).or_insert_with(|| {
            order.push(name.clone());
            Vec::new()
        });
        if term.is_empty() {
            continue;
        }
        match terms.iter_mut().find(|t| t.term == term) {
            Some(t) => t.weight = t.weight.max(row.weight),
            None => terms.push(TopicTerm {
                term,
                weight: row.weight,
            }),
        }
    }
    order
        .into_iter()
        .map(|name| {
            let terms = grouped.remove(&name).unwrap_or_default();
            if terms.is_empty() {
                return Err(Error::EmptyTopic(name));
            }
            Ok(Topic {
                id: custom_id(&name),
                kind: TopicKind::Custom,
                label: name,
                terms,
                created_period: period,
                status: TopicStatus::Active,
                probe: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Promotion {
    pub period: Period,
    pub discovered_id: String,
    pub custom_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopicRegistry {
    topics: BTreeMap<String, Topic>,
    promotions: Vec<Promotion>,
}

impl TopicRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<&Topic> {
        self.topics.get(id)
    }

    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn active(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values().filter(|t| t.is_active())
    }

    pub fn promotions(&self) -> &[Promotion] {
        &self.promotions
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// Insert or replace a topic by id.
    pub fn upsert(&mut self, topic: Topic) {
        self.topics.insert(topic.id.clone(), topic);
    }

    /// Swap in a fresh set of discovered topics. Active discovered topics
    /// are replaced; retired ones stay for the audit trail.
    pub fn replace_discovered(&mut self, fresh: Vec<Topic>) {
        self.topics
            .retain(|_, t| !(t.kind == TopicKind::Discovered && t.is_active()));
        for t in fresh {
            self.upsert(t);
        }
    }

    /// Turn a discovered topic into a custom topic named `new_name`, frozen
    /// with the discovered term weights. Returns the updated registry and
    /// leaves `self` untouched.
    pub fn promote(&self, discovered_id: &str, new_name: &str, period: Period) -> Result<TopicRegistry> {
        let source = self
            .topics
            .get(discovered_id)
            .filter(|t| t.kind == TopicKind::Discovered)
            .ok_or_else(|| Error::UnknownTopic(discovered_id.to_string()))?;
        if !source.is_active() || self.promotions.iter().any(|p| p.discovered_id == discovered_id) {
            return Err(Error::AlreadyPromoted(discovered_id.to_string()));
        }
        let id = custom_id(new_name);
        if id == "custom-" {
            return Err(Error::InvalidConfig(format!("unusable topic name `{new_name}`")));
        }
        if self.topics.contains_key(&id) {
            return Err(Error::InvalidConfig(format!("topic `{id}` already exists")));
        }

        let mut next = self.clone();
        next.topics.insert(
            id.clone(),
            Topic {
                id: id.clone(),
                kind: TopicKind::Custom,
                label: new_name.to_string(),
                terms: source.terms.clone(),
                created_period: period,
                status: TopicStatus::Active,
                probe: None,
            },
        );
        next.topics
            .get_mut(discovered_id)
            .expect("checked above")
            .status = TopicStatus::Retired;
        next.promotions.push(Promotion {
            period,
            discovered_id: discovered_id.to_string(),
            custom_id: id,
        });
        Ok(next)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| match e {
            Error::Json(j) => Error::parse(path, j.line(), j.to_string()),
            other => other,
        })
    }
}
