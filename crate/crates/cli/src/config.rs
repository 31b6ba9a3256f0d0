use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use reliascan_core::corpus::CorpusFormat;
use reliascan_core::surveillance::ExposureMode;
use reliascan_core::vector_space::Weighting;
use serde::Deserialize;

use crate::error::CliError;

/// Flat project configuration. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectConfig {
    pub corpus: Option<PathBuf>,
    pub corpus_format: Option<String>,
    pub population: Option<PathBuf>,
    pub stop_list: Option<PathBuf>,
    pub start_list: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub custom_topics: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub output_dir: PathBuf,

    pub min_df: usize,
    pub k: usize,
    pub top_m: usize,
    pub tau: f64,
    pub cutoff_sigma: f64,
    pub n: usize,
    pub step: Option<usize>,
    pub threshold: f64,
    pub exposure_mode: String,
    pub seed: u64,
    pub weighting: String,
    pub drop_numerals: bool,
    pub stemming: bool,
    pub min_rate: f64,
    pub svd_tol: f64,
    pub varimax_max_iter: usize,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            corpus: None,
            corpus_format: None,
            population: None,
            stop_list: None,
            start_list: None,
            synonyms: None,
            custom_topics: None,
            registry: None,
            output_dir: PathBuf::from("out"),
            min_df: 4,
            k: 25,
            top_m: 8,
            tau: 0.25,
            cutoff_sigma: 1.0,
            n: 3,
            step: None,
            threshold: 1.0,
            exposure_mode: "per_product".into(),
            seed: 0,
            weighting: "tfidf".into(),
            drop_numerals: true,
            stemming: true,
            min_rate: 1e-6,
            svd_tol: 1e-10,
            varimax_max_iter: 200,
        }
    }
}

/// Command-line overrides, one per config key and spelled the same.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long = "corpus", global = true)]
    corpus: Option<PathBuf>,
    #[arg(long = "corpus_format", global = true)]
    corpus_format: Option<String>,
    #[arg(long = "population", global = true)]
    population: Option<PathBuf>,
    #[arg(long = "stop_list", global = true)]
    stop_list: Option<PathBuf>,
    #[arg(long = "start_list", global = true)]
    start_list: Option<PathBuf>,
    #[arg(long = "synonyms", global = true)]
    synonyms: Option<PathBuf>,
    #[arg(long = "custom_topics", global = true)]
    custom_topics: Option<PathBuf>,
    #[arg(long = "registry", global = true)]
    registry: Option<PathBuf>,
    #[arg(long = "output_dir", global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long = "min_df", global = true)]
    min_df: Option<usize>,
    #[arg(long = "k", global = true)]
    k: Option<usize>,
    #[arg(long = "top_m", global = true)]
    top_m: Option<usize>,
    #[arg(long = "tau", global = true)]
    tau: Option<f64>,
    #[arg(long = "cutoff_sigma", global = true)]
    cutoff_sigma: Option<f64>,
    #[arg(long = "n", global = true)]
    n: Option<usize>,
    #[arg(long = "step", global = true)]
    step: Option<usize>,
    #[arg(long = "threshold", global = true)]
    threshold: Option<f64>,
    #[arg(long = "exposure_mode", global = true)]
    exposure_mode: Option<String>,
    #[arg(long = "seed", global = true)]
    seed: Option<u64>,
    #[arg(long = "weighting", global = true)]
    weighting: Option<String>,
    #[arg(long = "drop_numerals", global = true)]
    drop_numerals: Option<bool>,
    #[arg(long = "stemming", global = true)]
    stemming: Option<bool>,
    #[arg(long = "min_rate", global = true)]
    min_rate: Option<f64>,
    #[arg(long = "svd_tol", global = true)]
    svd_tol: Option<f64>,
    #[arg(long = "varimax_max_iter", global = true)]
    varimax_max_iter: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident, opt: [$($o:ident),*], val: [$($v:ident),*]) => {
        $( if let Some(x) = $ov.$o.clone() { $cfg.$o = Some(x); } )*
        $( if let Some(x) = $ov.$v.clone() { $cfg.$v = x; } )*
    };
}

impl ProjectConfig {
    /// Read `path` (if given), apply `overrides`, resolve relative paths.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let (mut cfg, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let cfg: ProjectConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (ProjectConfig::default(), PathBuf::new()),
        };
        let ov = overrides;
        apply!(cfg, ov,
            opt: [corpus, corpus_format, population, stop_list, start_list, synonyms,
                  custom_topics, registry, step],
            val: [output_dir, min_df, k, top_m, tau, cutoff_sigma, n, threshold, exposure_mode,
                  seed, weighting, drop_numerals, stemming, min_rate, svd_tol, varimax_max_iter]);

        // overrides given on the command line are relative to the cwd
        let resolve = |p: &mut PathBuf, from_flag: bool| {
            if p.is_relative() && !from_flag {
                *p = base.join(&*p);
            }
        };
        macro_rules! resolve_opt {
            ($($f:ident),*) => {$(
                if let Some(p) = cfg.$f.as_mut() { resolve(p, ov.$f.is_some()); }
            )*};
        }
        resolve_opt!(corpus, population, stop_list, start_list, synonyms, custom_topics, registry);
        resolve(&mut cfg.output_dir, ov.output_dir.is_some());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.min_df < 1 {
            return bad("min_df must be >= 1".into());
        }
        if self.k < 1 {
            return bad("k must be >= 1".into());
        }
        if self.top_m < 1 {
            return bad("top_m must be >= 1".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (0, 1]", self.tau));
        }
        if !(self.cutoff_sigma.is_finite()) {
            return bad("cutoff_sigma must be finite".into());
        }
        if self.n < 1 || self.step == Some(0) {
            return bad("n and step must be >= 1".into());
        }
        if !(self.threshold >= 0.0) {
            return bad("threshold must be >= 0".into());
        }
        if !(self.min_rate > 0.0) {
            return bad("min_rate must be > 0".into());
        }
        if !(self.svd_tol > 0.0) {
            return bad("svd_tol must be > 0".into());
        }
        self.exposure()?;
        self.weighting()?;
        self.format()?;
        Ok(())
    }

    pub fn exposure(&self) -> Result<ExposureMode, CliError> {
        Ok(self.exposure_mode.parse()?)
    }

    pub fn weighting(&self) -> Result<Weighting, CliError> {
        Ok(self.weighting.parse()?)
    }

    pub fn format(&self) -> Result<CorpusFormat, CliError> {
        match (&self.corpus_format, &self.corpus) {
            (Some(f), _) => Ok(f.parse()?),
            (None, Some(p)) => Ok(CorpusFormat::from_path(p)),
            (None, None) => Ok(CorpusFormat::Jsonl),
        }
    }

    pub fn step(&self) -> usize {
        self.step.unwrap_or(self.n)
    }

    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Config("no corpus path configured".into()))
    }

    pub fn registry_path(&self) -> PathBuf {
        self.registry
            .clone()
            .unwrap_or_else(|| self.output_dir.join("registry.json"))
    }

    pub fn baseline_path(&self) -> PathBuf {
        self.output_dir.join("baseline.json")
    }

    pub fn trend_path(&self) -> PathBuf {
        self.output_dir.join("trend.csv")
    }
}
