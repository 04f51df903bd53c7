//! Multinomial Naive Bayes spam filter.
//!
//! Features are token counts. Tokens come from lowercasing the text and
//! splitting on every non-alphanumeric character; single-character tokens are
//! dropped and nothing is stemmed. Likelihoods use additive smoothing with
//! constant `alpha`. Tokens never seen in training carry no evidence and are
//! skipped at classification time.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Read};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};

pub const MODEL_FORMAT: &str = "entity-pulse-mnb";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Spam,
    Ham,
}

impl Label {
    fn slot(self) -> usize {
        match self {
            Self::Spam => 0,
            Self::Ham => 1,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Spam => "spam",
            Self::Ham => "ham",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = SpamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spam" => Ok(Self::Spam),
            "ham" => Ok(Self::Ham),
            other => Err(SpamError::BadLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum SpamError {
    #[error("training data must contain at least one spam and one ham example")]
    SingleClass,
    #[error("smoothing constant must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("unknown label `{0}` (expected spam or ham)")]
    BadLabel(String),
    #[error("training row {row}: {message}")]
    BadRow { row: u64, message: String },
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: Label,
    /// Posterior probability of `label`.
    pub posterior: f64,
    pub spam_posterior: f64,
    pub ham_posterior: f64,
}

#[derive(Debug, Clone)]
pub struct NbModel {
    alpha: f64,
    vocabulary: Vec<String>,
    lookup: HashMap<String, usize>,
    log_priors: [f64; 2],
    log_likelihoods: [Vec<f64>; 2],
}

#[derive(Serialize, Deserialize)]
struct PerClass<T> {
    spam: T,
    ham: T,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    alpha: f64,
    log_priors: PerClass<f64>,
    vocabulary: Vec<String>,
    log_likelihoods: PerClass<Vec<f64>>,
}

#[derive(Default)]
struct Counts {
    docs: [u64; 2],
    tokens: HashMap<String, [u64; 2]>,
}

impl Counts {
    fn add(mut self, text: &str, label: Label) -> Self {
        self.docs[label.slot()] += 1;
        for t in tokenize(text) {
            self.tokens.entry(t).or_default()[label.slot()] += 1;
        }
        self
    }

    fn merge(mut self, other: Counts) -> Self {
        let (mut big, small) = if self.tokens.len() >= other.tokens.len() {
            (std::mem::take(&mut self.tokens), other.tokens)
        } else {
            (other.tokens, std::mem::take(&mut self.tokens))
        };
        for (t, c) in small {
            let e = big.entry(t).or_default();
            e[0] += c[0];
            e[1] += c[1];
        }
        Counts {
            docs: [self.docs[0] + other.docs[0], self.docs[1] + other.docs[1]],
            tokens: big,
        }
    }
}

impl NbModel {
    /// Fits priors and smoothed token likelihoods. Counting runs in parallel
    /// shards; the result does not depend on example order.
    pub fn train<S: AsRef<str> + Sync>(
        examples: &[(S, Label)],
        alpha: f64,
    ) -> Result<Self, SpamError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SpamError::BadAlpha(alpha));
        }
        let counts = examples
            .par_iter()
            .fold(Counts::default, |acc, (text, label)| {
                acc.add(text.as_ref(), *label)
            })
            .reduce(Counts::default, Counts::merge);
        if counts.docs.contains(&0) {
            return Err(SpamError::SingleClass);
        }
        let mut vocabulary: Vec<(String, [u64; 2])> = counts.tokens.into_iter().collect();
        vocabulary.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let v = vocabulary.len() as f64;
        let total_docs = (counts.docs[0] + counts.docs[1]) as f64;
        let log_priors = [
            (counts.docs[0] as f64 / total_docs).ln(),
            (counts.docs[1] as f64 / total_docs).ln(),
        ];
        let mut log_likelihoods = [
            Vec::with_capacity(vocabulary.len()),
            Vec::with_capacity(vocabulary.len()),
        ];
        for (slot, ll) in log_likelihoods.iter_mut().enumerate() {
            let class_total: u64 = vocabulary.iter().map(|(_, c)| c[slot]).sum();
            let den = (class_total as f64 + alpha * v).ln();
            ll.extend(
                vocabulary
                    .iter()
                    .map(|(_, c)| (c[slot] as f64 + alpha).ln() - den),
            );
        }
        let vocabulary: Vec<String> = vocabulary.into_iter().map(|(t, _)| t).collect();
        Ok(Self::assemble(
            alpha,
            vocabulary,
            log_priors,
            log_likelihoods,
        ))
    }

    fn assemble(
        alpha: f64,
        vocabulary: Vec<String>,
        log_priors: [f64; 2],
        log_likelihoods: [Vec<f64>; 2],
    ) -> Self {
        let lookup = vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            alpha,
            vocabulary,
            lookup,
            log_priors,
            log_likelihoods,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn log_prior(&self, label: Label) -> f64 {
        self.log_priors[label.slot()]
    }

    pub fn log_likelihood(&self, label: Label, token: &str) -> Option<f64> {
        self.lookup
            .get(token)
            .map(|&i| self.log_likelihoods[label.slot()][i])
    }

    /// Log-likelihood ratio spam:ham contributed by one occurrence of
    /// `token`; zero for unknown tokens.
    pub fn token_log_odds(&self, token: &str) -> f64 {
        self.lookup.get(token).map_or(0.0, |&i| {
            self.log_likelihoods[0][i] - self.log_likelihoods[1][i]
        })
    }

    /// Per-class log joint scores `[spam, ham]`.
    pub fn log_scores(&self, text: &str) -> [f64; 2] {
        let mut scores = self.log_priors;
        for t in tokenize(text) {
            if let Some(&i) = self.lookup.get(&t) {
                scores[0] += self.log_likelihoods[0][i];
                scores[1] += self.log_likelihoods[1][i];
            }
        }
        scores
    }

    /// Argmax-posterior label; an exact tie goes to ham.
    pub fn classify(&self, text: &str) -> Classification {
        let [spam, ham] = self.log_scores(text);
        let d = spam - ham;
        let spam_posterior = 1.0 / (1.0 + (-d).exp());
        let ham_posterior = 1.0 / (1.0 + d.exp());
        let label = if d > 0.0 { Label::Spam } else { Label::Ham };
        Classification {
            label,
            posterior: if label == Label::Spam {
                spam_posterior
            } else {
                ham_posterior
            },
            spam_posterior,
            ham_posterior,
        }
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            alpha: self.alpha,
            log_priors: PerClass {
                spam: self.log_priors[0],
                ham: self.log_priors[1],
            },
            vocabulary: self.vocabulary.clone(),
            log_likelihoods: PerClass {
                spam: self.log_likelihoods[0].clone(),
                ham: self.log_likelihoods[1].clone(),
            },
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SpamError> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        let bad = |m: &str| Err(SpamError::BadModel(m.to_string()));
        if doc.format != MODEL_FORMAT {
            return bad("unexpected format tag");
        }
        if doc.version != MODEL_VERSION {
            return Err(SpamError::BadModel(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        if !(doc.alpha > 0.0 && doc.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        let n = doc.vocabulary.len();
        if doc.log_likelihoods.spam.len() != n || doc.log_likelihoods.ham.len() != n {
            return bad("likelihood vectors do not match vocabulary");
        }
        if doc.vocabulary.windows(2).any(|w| w[0] >= w[1]) {
            return bad("vocabulary not strictly sorted");
        }
        let prior_mass = doc.log_priors.spam.exp() + doc.log_priors.ham.exp();
        if (prior_mass - 1.0).abs() > 1e-12 {
            return bad("priors do not sum to one");
        }
        for ll in [&doc.log_likelihoods.spam, &doc.log_likelihoods.ham] {
            let mass: f64 = ll.iter().map(|v| v.exp()).sum();
            if n > 0 && (mass - 1.0).abs() > 1e-9 {
                return bad("likelihoods do not sum to one");
            }
        }
        Ok(Self::assemble(
            doc.alpha,
            doc.vocabulary,
            [doc.log_priors.spam, doc.log_priors.ham],
            [doc.log_likelihoods.spam, doc.log_likelihoods.ham],
        ))
    }

    pub fn load(path: &Path) -> Result<Self, SpamError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Reads a `label,text` training CSV; a `label,text` header is skipped.
pub fn read_labeled<R: Read>(source: R) -> Result<Vec<(String, Label)>, SpamError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let rec = rec.map_err(|e| SpamError::BadRow {
            row,
            message: e.to_string(),
        })?;
        if i == 0 && rec.get(0) == Some("label") && rec.get(1) == Some("text") {
            continue;
        }
        if rec.len() != 2 {
            return Err(SpamError::BadRow {
                row,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let label = rec[0].parse().map_err(|e: SpamError| SpamError::BadRow {
            row,
            message: e.to_string(),
        })?;
        out.push((rec[1].to_string(), label));
    }
    Ok(out)
}

#[derive(Debug)]
pub struct FilterOutcome {
    pub corpus: Corpus,
    pub removed_count: u64,
    /// Records without a text column, kept as-is.
    pub unclassified_count: u64,
}

/// Drops every record whose text classifies as spam. Records without text
/// cannot be classified and are kept.
pub fn filter_corpus(corpus: &Corpus, model: &NbModel) -> Result<FilterOutcome, SpamError> {
    let verdicts: Vec<Option<Label>> = corpus
        .records()
        .par_iter()
        .map(|r| r.text.as_deref().map(|t| model.classify(t).label))
        .collect();
    let mut kept = Vec::with_capacity(corpus.len());
    let mut removed = 0;
    let mut unclassified = 0;
    for (r, v) in corpus.records().iter().zip(verdicts) {
        match v {
            Some(Label::Spam) => removed += 1,
            Some(Label::Ham) => kept.push(r.clone()),
            None => {
                unclassified += 1;
                kept.push(r.clone());
            }
        }
    }
    Ok(FilterOutcome {
        corpus: Corpus::from_records(kept)?,
        removed_count: removed,
        unclassified_count: unclassified,
    })
}
