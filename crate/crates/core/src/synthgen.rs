//! Deterministic synthetic multi-label corpora with power-law label
//! imbalance, so the full pipeline can be exercised without restricted
//! clinical data.
//!
//! Label j is drawn per document with probability proportional to
//! `(j+1)^-s`, rescaled so the expected labels per document is about 2.
//! Each label owns a disjoint block of indicative tokens; a document's
//! tokens mix its labels' blocks (fraction sigma) with background
//! vocabulary. Every document is generated from its own RNG stream, so
//! output is independent of generation order.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_corpus, Document};
use crate::error::{Error, Result};

/// Cap on any single label probability; keeps the zero-label redraw loop
/// fast for every exponent while staying close to the target of two
/// expected labels per document.
const MAX_LABEL_PROBABILITY: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub n_labels: usize,
    pub vocab_size: usize,
    pub tokens_per_doc: usize,
    /// Power-law exponent s > 0: label j gets weight (j+1)^-s.
    pub power_exponent: f64,
    /// Fraction of tokens drawn from the document's label blocks.
    pub label_signal_strength: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_docs: 2000,
            n_labels: 10,
            vocab_size: 2000,
            tokens_per_doc: 80,
            power_exponent: 1.5,
            label_signal_strength: 0.7,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::InfeasibleSpec { reason: reason.to_string() });
        if self.n_labels == 0 {
            return fail("n_labels must be positive");
        }
        if self.n_labels * 10 > self.vocab_size {
            return fail("need vocab_size >= 10 * n_labels so each label owns >= 10 tokens");
        }
        if self.n_docs < 10 * self.n_labels {
            return fail("need n_docs >= 10 * n_labels");
        }
        if self.tokens_per_doc == 0 {
            return fail("tokens_per_doc must be positive");
        }
        if !(self.power_exponent > 0.0) {
            return fail("power exponent must be positive");
        }
        if !(self.label_signal_strength > 0.0 && self.label_signal_strength < 1.0) {
            return fail("label signal strength must lie in (0, 1)");
        }
        if self.tokens_per_label() * self.n_labels >= self.vocab_size {
            return fail("no background vocabulary left");
        }
        Ok(())
    }

    /// Indicative tokens owned by each label: at least 10, at most a tenth
    /// of the vocabulary split evenly.
    pub fn tokens_per_label(&self) -> usize {
        (self.vocab_size / (10 * self.n_labels)).max(10)
    }

    /// Per-label inclusion probabilities, proportional to (j+1)^-s and
    /// rescaled toward two expected labels per document.
    pub fn label_probabilities(&self) -> Vec<f64> {
        let weights: Vec<f64> =
            (1..=self.n_labels).map(|j| (j as f64).powf(-self.power_exponent)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| (2.0 * w / total).min(MAX_LABEL_PROBABILITY)).collect()
    }

    pub fn label_code(&self, j: usize) -> String {
        format!("L{j:03}")
    }

    fn token(&self, index: usize) -> String {
        format!("w{index:05}")
    }

    /// Deterministic key=value manifest describing this spec.
    pub fn manifest(&self) -> String {
        format!(
            "alpool-synth v1\nn_docs {}\nn_labels {}\nvocab_size {}\ntokens_per_doc {}\n\
             power_exponent {}\nlabel_signal_strength {}\nrng_seed {}\n",
            self.n_docs,
            self.n_labels,
            self.vocab_size,
            self.tokens_per_doc,
            self.power_exponent,
            self.label_signal_strength,
            self.rng_seed
        )
    }
}

/// Generates the corpus. Ground-truth label assignments are carried in
/// each document's `label_codes`; documents redraw until they have at
/// least one label.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let probs = spec.label_probabilities();
    let block = spec.tokens_per_label();
    let background_start = spec.n_labels * block;
    let background = spec.vocab_size - background_start;
    let sigma = spec.label_signal_strength;

    let mut docs = Vec::with_capacity(spec.n_docs);
    for id in 0..spec.n_docs {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        rng.set_stream(id as u64 + 1);

        let labels: Vec<usize> = loop {
            let drawn: Vec<usize> = probs
                .iter()
                .enumerate()
                .filter(|&(_, &p)| rng.gen::<f64>() < p)
                .map(|(j, _)| j)
                .collect();
            if !drawn.is_empty() {
                break drawn;
            }
        };

        // Indicative pool: the union of the drawn labels' token blocks.
        let indicative: Vec<usize> = labels
            .iter()
            .flat_map(|&j| (j * block)..((j + 1) * block))
            .collect();

        let mut tokens = Vec::with_capacity(spec.tokens_per_doc);
        for _ in 0..spec.tokens_per_doc {
            let index = if rng.gen::<f64>() < sigma {
                indicative[rng.gen_range(0..indicative.len())]
            } else {
                background_start + rng.gen_range(0..background)
            };
            tokens.push(spec.token(index));
        }

        let label_codes: BTreeSet<String> =
            labels.iter().map(|&j| spec.label_code(j)).collect();
        docs.push(Document {
            id: id as u64,
            raw_text: tokens.join(" "),
            label_codes,
        });
    }
    Ok(docs)
}

/// Generates and writes the corpus file plus its `<path>.manifest`.
pub fn generate_to_file(spec: &SynthSpec, path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let docs = generate(spec)?;
    let path = path.as_ref();
    write_corpus(&docs, path)?;
    let manifest_path = manifest_path(path);
    fs::write(manifest_path, spec.manifest())?;
    Ok(docs)
}

pub fn manifest_path(corpus_path: &Path) -> std::path::PathBuf {
    let mut os = corpus_path.as_os_str().to_os_string();
    os.push(".manifest");
    std::path::PathBuf::from(os)
}
