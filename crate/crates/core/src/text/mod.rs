//! Text normalization: tokenizing, term elimination and stemming, plus
//! Soundex-based spelling suggestions.
//!
//! Per-token pipeline order is fixed:
//! synonyms -> numeral drop -> stop list -> start list -> stem,
//! followed by a corpus-wide minimum document frequency filter.

mod porter;
mod soundex;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use porter::porter_stem;
pub use soundex::soundex;

/// Lowercase and split on anything that is not alphanumeric. A trailing
/// possessive `'s` is dropped rather than producing a stray `s` token.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
            i += 1;
            continue;
        }
        let possessive = matches!(c, '\'' | '\u{2019}')
            && !cur.is_empty()
            && matches!(chars.get(i + 1), Some('s' | 'S'))
            && !chars.get(i + 2).is_some_and(|c| c.is_alphanumeric());
        if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
        i += if possessive { 2 } else { 1 };
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn is_numeral(token: &str) -> bool {
    token.chars().all(char::is_numeric)
}

fn is_stemmable(token: &str) -> bool {
    token.bytes().all(|b| b.is_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub stop_list: BTreeSet<String>,
    pub start_list: Option<BTreeSet<String>>,
    /// Surface variant -> canonical surface form; single tokens only.
    pub synonyms: BTreeMap<String, String>,
    pub min_df: usize,
    pub drop_numerals: bool,
    pub stemming: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            stop_list: BTreeSet::new(),
            start_list: None,
            synonyms: BTreeMap::new(),
            min_df: 4,
            drop_numerals: true,
            stemming: true,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_df < 1 {
            return Err(Error::InvalidConfig("min_df must be at least 1".into()));
        }
        if let Some(start) = &self.start_list {
            if let Some(t) = start.intersection(&self.stop_list).next() {
                return Err(Error::InvalidConfig(format!(
                    "`{t}` is in both the stop list and the start list"
                )));
            }
        }
        for (variant, canonical) in &self.synonyms {
            if tokenize(variant).len() != 1 || tokenize(canonical).len() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "synonym `{variant}` -> `{canonical}` must map a single token to a single token"
                )));
            }
        }
        Ok(())
    }
}

/// Applies a [`PrepConfig`] to text, without the corpus-level min-df step.
#[derive(Debug, Clone)]
pub struct Normalizer {
    config: PrepConfig,
    stemmed_start: Option<BTreeSet<String>>,
}

impl Normalizer {
    pub fn new(config: PrepConfig) -> Result<Self> {
        config.validate()?;
        let mut n = Normalizer {
            config,
            stemmed_start: None,
        };
        n.stemmed_start = n
            .config
            .start_list
            .as_ref()
            .map(|s| s.iter().map(|t| n.stem(t)).collect());
        Ok(n)
    }

    pub fn config(&self) -> &PrepConfig {
        &self.config
    }

    /// Porter stemming iterated to a fixed point so re-normalizing
    /// normalized text changes nothing. Non-ASCII and alphanumeric tokens
    /// are left as they are.
    fn stem(&self, token: &str) -> String {
        if !self.config.stemming || !is_stemmable(token) {
            return token.to_string();
        }
        let mut cur = token.to_string();
        loop {
            let next = porter_stem(&cur).expect("checked stemmable");
            // a lone "s" stems to nothing
            if next == cur || next.is_empty() {
                return cur;
            }
            cur = next;
        }
    }

    /// Normalize one surface token; `None` if it is eliminated.
    pub fn term(&self, token: &str) -> Option<String> {
        let cfg = &self.config;
        let token = cfg.synonyms.get(token).map(String::as_str).unwrap_or(token);
        if cfg.drop_numerals && is_numeral(token) {
            return None;
        }
        if cfg.stop_list.contains(token) {
            return None;
        }
        let stem = self.stem(token);
        if stem.is_empty() || cfg.stop_list.contains(&stem) {
            return None;
        }
        if let Some(start) = &self.stemmed_start {
            if !start.contains(&stem) {
                return None;
            }
        }
        Some(stem)
    }

    /// Normalized token stream of `text`, order preserved.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        tokenize(text).iter().filter_map(|t| self.term(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub term: String,
    pub df: usize,
    pub cf: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCorpus {
    pub doc_ids: Vec<String>,
    /// Per-document token lists after every elimination step.
    pub tokens: Vec<Vec<String>>,
    /// Sorted by term.
    pub vocabulary: Vec<VocabEntry>,
}

impl NormalizedCorpus {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn term_index(&self) -> HashMap<&str, usize> {
        self.vocabulary
            .iter()
            .enumerate()
            .map(|(i, v)| (v.term.as_str(), i))
            .collect()
    }
}

pub fn normalize_corpus(corpus: &Corpus, config: &PrepConfig) -> Result<NormalizedCorpus> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let normalizer = Normalizer::new(config.clone())?;
    let docs: Vec<(String, Vec<String>)> = corpus
        .documents()
        .iter()
        .map(|d| (d.id.clone(), normalizer.tokens(&d.text)))
        .collect();
    normalize_token_lists(docs, config.min_df)
}

/// Apply the min-df filter to already-normalized token lists and build the
/// vocabulary.
pub fn normalize_token_lists(
    docs: Vec<(String, Vec<String>)>,
    min_df: usize,
) -> Result<NormalizedCorpus> {
    let vocab = vocabulary(docs.iter().map(|(_, t)| t.as_slice()));
    let kept: BTreeMap<&str, &VocabEntry> = vocab
        .iter()
        .filter(|v| v.df >= min_df)
        .map(|v| (v.term.as_str(), v))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let (doc_ids, tokens) = docs
        .into_iter()
        .map(|(id, toks)| {
            let toks: Vec<String> = toks
                .into_iter()
                .filter(|t| kept.contains_key(t.as_str()))
                .collect();
            (id, toks)
        })
        .unzip();
    let vocabulary = kept.into_values().cloned().collect();
    Ok(NormalizedCorpus {
        doc_ids,
        tokens,
        vocabulary,
    })
}

/// Document and corpus frequencies of every term, sorted by term.
pub fn vocabulary<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Vec<VocabEntry> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for toks in docs {
        let mut seen = BTreeSet::new();
        for t in toks {
            let e = counts.entry(t.as_str()).or_default();
            e.1 += 1;
            if seen.insert(t.as_str()) {
                e.0 += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(term, (df, cf))| VocabEntry {
            term: term.to_string(),
            df,
            cf,
        })
        .collect()
}

/// A probable misspelling and the frequent term it likely stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpellSuggestion {
    pub rare_term: String,
    pub suggested_canonical: String,
    pub soundex_code: String,
    pub rare_df: usize,
    pub canonical_df: usize,
}

/// Pair each rare term (df below `df_threshold`) with the most frequent
/// term sharing its Soundex code. Ties go to the lexically smaller term.
/// Only alphabetic terms take part.
pub fn spell_cluster(vocabulary: &[VocabEntry], df_threshold: usize) -> Vec<SpellSuggestion> {
    let coded: Vec<(&VocabEntry, String)> = vocabulary
        .iter()
        .filter(|v| v.term.bytes().all(|b| b.is_ascii_alphabetic()))
        .filter_map(|v| soundex(&v.term).ok().map(|c| (v, c)))
        .collect();

    let mut best: HashMap<&str, &VocabEntry> = HashMap::new();
    for (v, code) in &coded {
        if v.df < df_threshold {
            continue;
        }
        let slot = best.entry(code.as_str()).or_insert(v);
        if v.df > slot.df || (v.df == slot.df && v.term < slot.term) {
            *slot = v;
        }
    }

    let mut out: Vec<SpellSuggestion> = coded
        .iter()
        .filter(|(v, _)| v.df < df_threshold)
        .filter_map(|(v, code)| {
            best.get(code.as_str()).map(|canon| SpellSuggestion {
                rare_term: v.term.clone(),
                suggested_canonical: canon.term.clone(),
                soundex_code: code.clone(),
                rare_df: v.df,
                canonical_df: canon.df,
            })
        })
        .collect();
    out.sort_by(|a, b| a.rare_term.cmp(&b.rare_term));
    out
}

/// One lowercase term per line; blank lines and `#` comments ignored.
pub fn load_term_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect())
}

#[derive(Debug, Deserialize)]
struct SynonymRow {
    variant: String,
    canonical: String,
}

/// `variant,canonical` CSV.
pub fn load_synonyms(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut map = BTreeMap::new();
    for (i, row) in reader.deserialize::<SynonymRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        map.insert(
            row.variant.trim().to_lowercase(),
            row.canonical.trim().to_lowercase(),
        );
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use chrono::NaiveDate;

    fn figure_one() -> Corpus {
        let d = |id: &str, day: u32, text: &str| Document {
            id: id.into(),
            date: NaiveDate::from_ymd_opt(2008, 1, day).unwrap(),
            product: "savoy".into(),
            text: text.into(),
        };
        Corpus::new(vec![
            d("1", 5, "Steering of my car locks while turning"),
            d(
                "2",
                20,
                "Vibrations at steering when car is running at high speed.",
            ),
        ])
        .unwrap()
    }

    fn plain() -> PrepConfig {
        PrepConfig {
            min_df: 1,
            stemming: false,
            // the figure lists the singular form
            synonyms: [("vibrations".to_string(), "vibration".to_string())].into(),
            ..PrepConfig::default()
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("Steering of my car locks while turning"),
            ["steering", "of", "my", "car", "locks", "while", "turning"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("2008 Speed Machine Savoy- the power steering"),
            ["2008", "speed", "machine", "savoy", "the", "power", "steering"]
        );
    }

    #[test]
    fn tokenize_possessive_and_separators() {
        assert_eq!(
            tokenize("The driver's seat/belt is half-broken; owner’s manual"),
            ["the", "driver", "seat", "belt", "is", "half", "broken", "owner", "manual"]
        );
        // not a possessive: the s starts a longer word
        assert_eq!(tokenize("rock'solid"), ["rock", "solid"]);
        assert_eq!(tokenize("'s"), ["s"]);
    }

    #[test]
    fn figure_one_vocabulary() {
        let nc = normalize_corpus(&figure_one(), &plain()).unwrap();
        let terms: BTreeSet<&str> = nc.vocabulary.iter().map(|v| v.term.as_str()).collect();
        let expected: BTreeSet<&str> = [
            "steering", "of", "my", "car", "locks", "while", "turning", "vibration", "at", "when",
            "is", "running", "high", "speed",
        ]
        .into();
        assert_eq!(terms, expected);
        let at = nc.vocabulary.iter().find(|v| v.term == "at").unwrap();
        assert_eq!((at.df, at.cf), (1, 2));
    }

    #[test]
    fn figure_one_stop_list() {
        let cfg = PrepConfig {
            stop_list: ["my", "at", "is", "when", "while", "of"]
                .map(String::from)
                .into(),
            ..plain()
        };
        let nc = normalize_corpus(&figure_one(), &cfg).unwrap();
        for v in &nc.vocabulary {
            assert!(!cfg.stop_list.contains(&v.term), "{}", v.term);
        }
        assert_eq!(nc.vocabulary.len(), 8);
    }

    #[test]
    fn start_list_containment() {
        let cfg = PrepConfig {
            start_list: Some(["steering".to_string()].into()),
            min_df: 1,
            ..PrepConfig::default()
        };
        let nc = normalize_corpus(&figure_one(), &cfg).unwrap();
        let terms: Vec<&str> = nc.vocabulary.iter().map(|v| v.term.as_str()).collect();
        assert_eq!(terms, ["steer"]);
    }

    #[test]
    fn stop_list_applies_to_stems_too() {
        let cfg = PrepConfig {
            stop_list: ["lock".to_string()].into(),
            min_df: 1,
            ..PrepConfig::default()
        };
        let nc = normalize_corpus(&figure_one(), &cfg).unwrap();
        assert!(nc.vocabulary.iter().all(|v| v.term != "lock"));
    }

    #[test]
    fn numerals_dropped_by_default() {
        let n = Normalizer::new(PrepConfig::default()).unwrap();
        assert_eq!(n.tokens("38 miles in 2008 on a v6"), ["mile", "in", "on", "a", "v6"]);
        let keep = Normalizer::new(PrepConfig {
            drop_numerals: false,
            ..PrepConfig::default()
        })
        .unwrap();
        assert_eq!(keep.tokens("38 miles")[0], "38");
    }

    #[test]
    fn synonyms_before_stemming() {
        let n = Normalizer::new(PrepConfig {
            synonyms: [("driven".to_string(), "driving".to_string())].into(),
            ..PrepConfig::default()
        })
        .unwrap();
        assert_eq!(n.tokens("driven driving drives"), ["drive", "drive", "drive"]);
    }

    #[test]
    fn min_df_and_empty_vocabulary() {
        let cfg = PrepConfig {
            min_df: 2,
            ..plain()
        };
        let nc = normalize_corpus(&figure_one(), &cfg).unwrap();
        let terms: Vec<&str> = nc.vocabulary.iter().map(|v| v.term.as_str()).collect();
        assert_eq!(terms, ["car", "steering"]);
        assert_eq!(nc.tokens[1], ["steering", "car"]);

        let cfg = PrepConfig {
            min_df: 3,
            ..plain()
        };
        assert!(matches!(
            normalize_corpus(&figure_one(), &cfg),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn config_validation() {
        let bad = PrepConfig {
            stop_list: ["car".to_string()].into(),
            start_list: Some(["car".to_string()].into()),
            ..PrepConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad = PrepConfig {
            min_df: 0,
            ..PrepConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PrepConfig {
            synonyms: [("gas pedal".to_string(), "accelerator".to_string())].into(),
            ..PrepConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn entry(term: &str, df: usize) -> VocabEntry {
        VocabEntry {
            term: term.into(),
            df,
            cf: df,
        }
    }

    #[test]
    fn spell_suggestions() {
        let s = spell_cluster(&[entry("steering", 40), entry("steeering", 1)], 4);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].rare_term, "steeering");
        assert_eq!(s[0].suggested_canonical, "steering");
        assert_eq!(s[0].soundex_code, "S365");
        assert_eq!((s[0].rare_df, s[0].canonical_df), (1, 40));

        assert!(spell_cluster(&[entry("brake", 10), entry("wheel", 1)], 4).is_empty());
        // two rare code-mates, no frequent target
        assert!(spell_cluster(&[entry("steeering", 1), entry("stering", 2)], 4).is_empty());
    }

    #[test]
    fn spell_picks_most_frequent_mate() {
        let s = spell_cluster(
            &[entry("steering", 40), entry("stearing", 1), entry("storing", 90)],
            4,
        );
        assert_eq!(s[0].suggested_canonical, "storing");
    }

    #[test]
    fn term_list_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stop.txt");
        fs::write(&p, "# common words\nmy\n  at  \n\nIs # trailing comment\n").unwrap();
        let l = load_term_list(&p).unwrap();
        assert_eq!(l, ["at", "is", "my"].map(String::from).into());
    }
}
