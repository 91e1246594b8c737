//! Corpus loading, text cleaning, label-space construction, and splitting.
//!
//! Corpus file format (UTF-8, one record per line):
//! `<id> <TAB> <comma-separated label codes> <TAB> <raw text>`.
//! Lines beginning with `#` are comments. An empty label field is allowed
//! at load time; such documents are dropped by [`filter_by_label_space`].

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::DocId;

/// Fixed English stopword list, version 1. The exact contents are part of
/// the cleaning contract: changing the list changes every downstream
/// feature vector, so additions require a version bump.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "although", "am", "among",
    "an", "and", "any", "are", "around", "as", "at", "be", "because", "been", "before", "being",
    "below", "beside", "besides", "between", "beyond", "both", "but", "by", "can", "cannot",
    "could", "despite", "did", "do", "does", "doing", "down", "during", "each", "either", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "however", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself",
    "neither", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "onto", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "same", "shall", "she", "should",
    "since", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
    "then", "there", "these", "they", "this", "those", "through", "to", "too", "under", "until",
    "up", "upon", "very", "was", "we", "were", "what", "when", "where", "whether", "which",
    "while", "who", "whom", "whose", "why", "will", "with", "within", "without", "would", "yet",
    "you", "your", "yours", "yourself", "yourselves",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// One text record with its set of true label codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: DocId,
    pub raw_text: String,
    pub label_codes: BTreeSet<String>,
}

/// The top-k label-code vocabulary, ordered by descending corpus frequency
/// (ties broken lexicographically).
#[derive(Debug, Clone)]
pub struct LabelSpace {
    codes: Vec<String>,
    index_of: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index_of.get(code).copied()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index_of.contains_key(code)
    }
}

/// Disjoint train/validation/test id sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_ids: Vec<DocId>,
    pub validation_ids: Vec<DocId>,
    pub test_ids: Vec<DocId>,
}

/// Cleans raw text: lowercase, delete `[** ... **]` de-identifier spans,
/// replace punctuation with spaces, drop stopwords, collapse whitespace.
/// Idempotent. Numerals are retained.
pub fn clean_text(raw_text: &str) -> String {
    let lower = raw_text.to_lowercase();
    let stripped = strip_deidentifiers(&lower);
    let mut spaced = String::with_capacity(stripped.len());
    for ch in stripped.chars() {
        if ch.is_alphanumeric() {
            spaced.push(ch);
        } else {
            spaced.push(' ');
        }
    }
    let kept: Vec<&str> = spaced
        .split_whitespace()
        .filter(|t| !is_stopword(t))
        .collect();
    kept.join(" ")
}

/// Removes `[** ... **]` spans (non-greedy). An unmatched trailing `[**`
/// removes the rest of the text, since the span never closes.
fn strip_deidentifiers(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("[**") {
        out.push_str(&rest[..start]);
        out.push(' ');
        match rest[start + 3..].find("**]") {
            Some(end) => rest = &rest[start + 3 + end + 3..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

/// Builds the label space from the `top_k` most frequent codes, frequency
/// descending, ties lexicographic ascending.
pub fn build_label_space(docs: &[Document], top_k: usize) -> Result<LabelSpace> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        for code in &doc.label_codes {
            *counts.entry(code.as_str()).or_insert(0) += 1;
        }
    }
    if counts.len() < top_k || top_k == 0 {
        return Err(Error::InsufficientLabelDiversity {
            found: counts.len(),
            requested: top_k,
        });
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let codes: Vec<String> = ranked
        .into_iter()
        .take(top_k)
        .map(|(code, _)| code.to_string())
        .collect();
    let index_of = codes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    Ok(LabelSpace { codes, index_of })
}

/// Keeps exactly the documents whose labels intersect the space, in input
/// order, with their label sets restricted to the space.
pub fn filter_by_label_space(docs: Vec<Document>, space: &LabelSpace) -> Vec<Document> {
    docs.into_iter()
        .filter_map(|mut doc| {
            doc.label_codes.retain(|c| space.contains(c));
            if doc.label_codes.is_empty() {
                None
            } else {
                Some(doc)
            }
        })
        .collect()
}

/// Binary label vector for a document: entry `j` is 1 iff `codes[j]` is one
/// of the document's labels. An all-zero result is an error — unlabeled
/// documents must have been dropped by [`filter_by_label_space`].
pub fn labels_to_vector(doc: &Document, space: &LabelSpace) -> Result<Vec<u8>> {
    let vec: Vec<u8> = space
        .codes()
        .iter()
        .map(|c| u8::from(doc.label_codes.contains(c)))
        .collect();
    if vec.iter().all(|&v| v == 0) {
        return Err(Error::UnlabeledDocument { id: doc.id });
    }
    Ok(vec)
}

/// Loads a corpus file. Errors name the offending line number; duplicate
/// ids name both lines involved.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let content = fs::read_to_string(path)?;
    parse_corpus(&content)
}

pub fn parse_corpus(content: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen: HashMap<DocId, usize> = HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedCorpusLine {
                line: line_no,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let id: DocId = fields[0].parse().map_err(|_| Error::MalformedCorpusLine {
            line: line_no,
            reason: format!("invalid document id `{}`", fields[0]),
        })?;
        if let Some(&first) = seen.get(&id) {
            return Err(Error::DuplicateDocumentId {
                id,
                first,
                second: line_no,
            });
        }
        seen.insert(id, line_no);
        let mut label_codes = BTreeSet::new();
        if !fields[1].is_empty() {
            for code in fields[1].split(',') {
                if code.is_empty() {
                    return Err(Error::MalformedCorpusLine {
                        line: line_no,
                        reason: "empty label code".to_string(),
                    });
                }
                label_codes.insert(code.to_string());
            }
        }
        docs.push(Document {
            id,
            raw_text: fields[2].to_string(),
            label_codes,
        });
    }
    Ok(docs)
}

/// Writes documents in the corpus file format. Label codes must not contain
/// the field or list separators; text must not contain tabs or newlines.
pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        for code in &doc.label_codes {
            if code.contains('\t') || code.contains(',') || code.contains('\n') {
                return Err(Error::MalformedCorpusLine {
                    line: 0,
                    reason: format!("label code `{code}` contains a separator"),
                });
            }
        }
        if doc.raw_text.contains('\t') || doc.raw_text.contains('\n') {
            return Err(Error::MalformedCorpusLine {
                line: 0,
                reason: format!("document {} text contains a tab or newline", doc.id),
            });
        }
        let codes: Vec<&str> = doc.label_codes.iter().map(|s| s.as_str()).collect();
        out.push_str(&format!("{}\t{}\t{}\n", doc.id, codes.join(","), doc.raw_text));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Splits document ids into train/validation/test by seeded uniform shuffle
/// and contiguous cut. Train and validation sizes are
/// `floor(fraction * n)`; the remainder goes to test.
pub fn split_corpus(
    docs: &[Document],
    train_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<SplitSpec> {
    let n = docs.len();
    if n < 3 {
        return Err(Error::CorpusTooSmall { n });
    }
    if train_fraction <= 0.0
        || validation_fraction <= 0.0
        || train_fraction + validation_fraction >= 1.0
    {
        return Err(Error::InvalidSplitFractions {
            train: train_fraction,
            validation: validation_fraction,
        });
    }
    let mut ids: Vec<DocId> = docs.iter().map(|d| d.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = (train_fraction * n as f64).floor() as usize;
    let n_val = (validation_fraction * n as f64).floor() as usize;
    let mut train_ids: Vec<DocId> = ids[..n_train].to_vec();
    let mut validation_ids: Vec<DocId> = ids[n_train..n_train + n_val].to_vec();
    let mut test_ids: Vec<DocId> = ids[n_train + n_val..].to_vec();
    train_ids.sort_unstable();
    validation_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(SplitSpec {
        train_ids,
        validation_ids,
        test_ids,
    })
}
