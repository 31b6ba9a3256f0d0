//! Sparse term-document matrix under boolean, count or TF-IDF weighting.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::NormalizedCorpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Boolean,
    #[default]
    Count,
    Tfidf,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boolean" => Ok(Weighting::Boolean),
            "count" => Ok(Weighting::Count),
            "tfidf" => Ok(Weighting::Tfidf),
            other => Err(Error::InvalidConfig(format!("unknown weighting `{other}`"))),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Boolean => "boolean",
            Weighting::Count => "count",
            Weighting::Tfidf => "tfidf",
        })
    }
}

/// `tf * ln(n_docs / df)`.
pub fn tfidf_weight(tf: usize, df: usize, n_docs: usize) -> Result<f64> {
    if df == 0 || df > n_docs {
        return Err(Error::DfOutOfRange { df, n_docs });
    }
    Ok(tf as f64 * (n_docs as f64 / df as f64).ln())
}

/// Weight a raw term count. `idf` is only consulted for TF-IDF.
fn weigh(weighting: Weighting, tf: usize, idf: f64) -> f64 {
    match weighting {
        Weighting::Boolean => 1.0,
        Weighting::Count => tf as f64,
        Weighting::Tfidf => tf as f64 * idf,
    }
}

/// Terms are rows, documents are columns. Stored column-compressed; no
/// explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    terms: Vec<String>,
    doc_ids: Vec<String>,
    /// Per column, `(row, value)` sorted by row.
    columns: Vec<Vec<(usize, f64)>>,
    weighting: Weighting,
    /// `ln(n_docs / df)` per row; present for TF-IDF.
    idf: Option<Vec<f64>>,
}

pub fn build_tdm(nc: &NormalizedCorpus, weighting: Weighting) -> Result<TermDocMatrix> {
    if nc.vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let index = nc.term_index();
    let n_docs = nc.n_docs();
    let idf = match weighting {
        Weighting::Tfidf => Some(
            nc.vocabulary
                .iter()
                .map(|v| tfidf_weight(1, v.df, n_docs))
                .collect::<Result<Vec<f64>>>()?,
        ),
        _ => None,
    };
    let columns = nc
        .tokens
        .iter()
        .map(|toks| {
            let counts = count_terms(toks, &index);
            weigh_counts(&counts, weighting, idf.as_deref())
        })
        .collect();
    Ok(TermDocMatrix {
        terms: nc.vocabulary.iter().map(|v| v.term.clone()).collect(),
        doc_ids: nc.doc_ids.clone(),
        columns,
        weighting,
        idf,
    })
}

fn count_terms(tokens: &[String], index: &HashMap<&str, usize>) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        if let Some(&row) = index.get(t.as_str()) {
            *counts.entry(row).or_insert(0) += 1;
        }
    }
    counts
}

fn weigh_counts(
    counts: &BTreeMap<usize, usize>,
    weighting: Weighting,
    idf: Option<&[f64]>,
) -> Vec<(usize, f64)> {
    counts
        .iter()
        .map(|(&row, &tf)| (row, weigh(weighting, tf, idf.map_or(1.0, |w| w[row]))))
        .filter(|&(_, v)| v != 0.0)
        .collect()
}

impl TermDocMatrix {
    /// Build from dense row-major data; zeros are not stored. Terms and
    /// documents get positional names. Intended for numerical tests.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let columns = (0..cols)
            .map(|j| {
                (0..rows)
                    .map(|i| (i, data[i * cols + j]))
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect();
        TermDocMatrix {
            terms: (0..rows).map(|i| format!("t{i}")).collect(),
            doc_ids: (0..cols).map(|j| format!("d{j}")).collect(),
            columns,
            weighting: Weighting::Count,
            idf: None,
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn idf(&self) -> Option<&[f64]> {
        self.idf.as_deref()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let c = &self.columns[col];
        c.binary_search_by_key(&row, |&(r, _)| r)
            .map(|i| c[i].1)
            .unwrap_or(0.0)
    }

    /// Row vector for `term`, dense over documents.
    pub fn row(&self, term: &str) -> Option<Vec<f64>> {
        let i = self.terms.iter().position(|t| t == term)?;
        Some((0..self.n_docs()).map(|j| self.get(i, j)).collect())
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (col, xj) in self.columns.iter().zip(x) {
            if *xj == 0.0 {
                continue;
            }
            for &(i, a) in col {
                y[i] += a * xj;
            }
        }
    }

    /// `y = A^T x`
    pub fn rmatvec(&self, x: &[f64], y: &mut [f64]) {
        for (yj, col) in y.iter_mut().zip(&self.columns) {
            *yj = col.iter().map(|&(i, a)| a * x[i]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_terms(), self.n_docs());
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Weight a new document's tokens against this matrix's vocabulary and
    /// weighting. Out-of-vocabulary tokens are ignored.
    pub fn weigh_tokens(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let index: HashMap<&str, usize> = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        weigh_counts(&count_terms(tokens, &index), self.weighting, self.idf())
    }

    /// MatrixMarket coordinate dump (1-based indices).
    pub fn write_matrix_market(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "% weighting: {}", self.weighting)?;
        writeln!(out, "{} {} {}", self.n_terms(), self.n_docs(), self.nnz())?;
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}
