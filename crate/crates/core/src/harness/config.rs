//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lp::LpBackend;
use crate::model::PositionWeightKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    LpFull,
    LpReduced,
    GreedySimple,
    GreedyWeighted,
    ScoreSort,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LpFull,
        Method::LpReduced,
        Method::GreedySimple,
        Method::GreedyWeighted,
        Method::ScoreSort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::LpFull => "lp_full",
            Method::LpReduced => "lp_reduced",
            Method::GreedySimple => "greedy_simple",
            Method::GreedyWeighted => "greedy_weighted",
            Method::ScoreSort => "score_sort",
        }
    }

    pub fn is_lp(self) -> bool {
        matches!(self, Method::LpFull | Method::LpReduced)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategorySource {
    Genre,
    Year,
    Popularity,
    File,
}

impl FromStr for CategorySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "genre" => Ok(Self::Genre),
            "year" => Ok(Self::Year),
            "popularity" => Ok(Self::Popularity),
            "file" => Ok(Self::File),
            other => Err(Error::invalid(format!("unknown category source {other:?}"))),
        }
    }
}

impl fmt::Display for CategorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Genre => "genre",
            Self::Year => "year",
            Self::Popularity => "popularity",
            Self::File => "file",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Files,
}

impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "synthetic" => Ok(Self::Synthetic),
            "files" => Ok(Self::Files),
            other => Err(Error::invalid(format!("unknown data source {other:?}"))),
        }
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Synthetic => "synthetic",
            Self::Files => "files",
        })
    }
}

/// `{0, 0.05, …, 1}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Everything a sweep or benchmark needs. See [`SweepConfig::KEYS`] for the
/// accepted keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub lambdas: Vec<f64>,
    pub weights: PositionWeightKind,
    pub n: usize,
    pub k: usize,
    pub source: DataSource,
    pub categories: CategorySource,
    pub ratings: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub category_file: Option<PathBuf>,
    pub users: usize,
    pub r: usize,
    pub sparsity: f64,
    pub relevant_frac: f64,
    pub positive_threshold: f64,
    pub min_interactions: usize,
    pub val_users: usize,
    pub test_users: usize,
    pub history_frac: f64,
    pub popular_frac: f64,
    pub max_users: Option<usize>,
    pub alpha: f64,
    pub backend: LpBackend,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::LpReduced, Method::GreedySimple, Method::GreedyWeighted, Method::ScoreSort],
            lambdas: default_lambda_grid(),
            weights: PositionWeightKind::Log,
            n: 150,
            k: 100,
            source: DataSource::Synthetic,
            categories: CategorySource::Genre,
            ratings: None,
            catalog: None,
            scores: None,
            category_file: None,
            users: 50,
            r: 8,
            sparsity: 0.75,
            relevant_frac: 0.15,
            positive_threshold: 3.5,
            min_interactions: 5,
            val_users: 0,
            test_users: 100,
            history_frac: 0.8,
            popular_frac: 0.05,
            max_users: None,
            alpha: 0.01,
            backend: LpBackend::ColumnGeneration,
            seed: 0,
            output: PathBuf::from("sweep.csv"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("invalid value {value:?} for {key}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

/// The textual form [`SweepConfig::set`] accepts for a TOML value.
fn toml_scalar_text(value: &toml::Value) -> Option<String> {
    match value {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(|v| match v {
                toml::Value::Array(_) | toml::Value::Table(_) => None,
                other => toml_scalar_text(other),
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(",")),
        _ => None,
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

impl SweepConfig {
    pub const KEYS: &'static [&'static str] = &[
        "methods",
        "lambdas",
        "weights",
        "n",
        "k",
        "source",
        "categories",
        "ratings",
        "catalog",
        "scores",
        "category_file",
        "users",
        "r",
        "sparsity",
        "relevant_frac",
        "positive_threshold",
        "min_interactions",
        "val_users",
        "test_users",
        "history_frac",
        "popular_frac",
        "max_users",
        "alpha",
        "backend",
        "seed",
        "output",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "methods" => {
                self.methods = list::<Method>(key, value)?;
            }
            "lambdas" => self.lambdas = list(key, value)?,
            "weights" => self.weights = value.parse()?,
            "n" => self.n = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "source" => self.source = value.parse()?,
            "categories" => self.categories = value.parse()?,
            "ratings" => self.ratings = optional_path(value),
            "catalog" => self.catalog = optional_path(value),
            "scores" => self.scores = optional_path(value),
            "category_file" => self.category_file = optional_path(value),
            "users" => self.users = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "sparsity" => self.sparsity = parse(key, value)?,
            "relevant_frac" => self.relevant_frac = parse(key, value)?,
            "positive_threshold" => self.positive_threshold = parse(key, value)?,
            "min_interactions" => self.min_interactions = parse(key, value)?,
            "val_users" => self.val_users = parse(key, value)?,
            "test_users" => self.test_users = parse(key, value)?,
            "history_frac" => self.history_frac = parse(key, value)?,
            "popular_frac" => self.popular_frac = parse(key, value)?,
            "max_users" => {
                let v = value.trim();
                self.max_users = if v.is_empty() || v == "none" { None } else { Some(parse(key, v)?) };
            }
            "alpha" => self.alpha = parse(key, value)?,
            "backend" => self.backend = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a TOML table of config keys over the defaults. Lists may be
    /// TOML arrays or comma-separated strings. Relative data paths are
    /// resolved against `base`.
    pub fn parse_text(text: &str, origin: &Path, base: Option<&Path>) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            parse_err(line, e.message().to_string())
        })?;
        let mut config = Self::default();
        for (key, value) in &table {
            let line = text
                .lines()
                .position(|l| l.trim_start().starts_with(key.as_str()))
                .map_or(0, |i| i + 1);
            let text = toml_scalar_text(value)
                .ok_or_else(|| parse_err(line, format!("{key}: expected a string, number or list")))?;
            config.set(key, &text).map_err(|e| parse_err(line, e.to_string()))?;
        }
        if let Some(base) = base {
            for p in [&mut config.ratings, &mut config.catalog, &mut config.scores, &mut config.category_file]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_text(&text, path, path.parent())
    }

    /// Checks value ranges and cross-key consistency.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.methods.is_empty() {
            problems.push("no methods".to_string());
        }
        if self.lambdas.is_empty() {
            problems.push("empty lambda grid".to_string());
        }
        if self.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            problems.push("lambda values must lie in [0, 1]".to_string());
        }
        if self.lambdas.windows(2).any(|w| w[0] > w[1]) {
            problems.push("lambda grid must be sorted ascending".to_string());
        }
        if self.k == 0 || self.k > self.n {
            problems.push(format!("need 0 < k ≤ n, got k = {} and n = {}", self.k, self.n));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            problems.push(format!("alpha {} outside [0, 1)", self.alpha));
        }
        if self.source == DataSource::Files {
            for (name, p) in [("ratings", &self.ratings), ("scores", &self.scores)] {
                if p.is_none() {
                    problems.push(format!("{name} path required for file data"));
                }
            }
            match self.categories {
                CategorySource::File if self.category_file.is_none() => {
                    problems.push("category_file required for file categories".to_string())
                }
                CategorySource::Genre | CategorySource::Year if self.catalog.is_none() => {
                    problems.push("catalog required for genre or year categories".to_string())
                }
                _ => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    pub fn describe(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let lambdas: Vec<String> = self.lambdas.iter().map(|l| l.to_string()).collect();
        format!(
            "methods={} lambdas={} weights={} n={} k={} source={} categories={} seed={}",
            methods.join(","),
            lambdas.join(","),
            self.weights,
            self.n,
            self.k,
            self.source,
            self.categories,
            self.seed
        )
    }
}
