//! Emerging-issue detection for complaint corpora.
//!
//! Complaints are normalized into a bag-of-words term-document matrix,
//! decomposed with a truncated SVD whose term loadings are varimax-rotated
//! into discovered topics, matched against analyst-defined custom topics,
//! and finally monitored per topic with an expectation-based Poisson scan
//! statistic over windows of monthly counts.

pub mod corpus;
pub mod decomposition;
pub mod error;
pub mod period;
pub mod surveillance;
pub mod text;
pub mod topics;
pub mod vector_space;

pub use error::{Error, Result};
pub use period::{Period, PeriodRange};
