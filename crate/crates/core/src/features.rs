//! Sparse TF-IDF features, fit on the training split only.
//!
//! Weighting: raw term count times smoothed idf `ln((1 + N) / (1 + df)) + 1`,
//! followed by L2 normalization. Vectorization never reads labels.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::DocId;

/// Term dictionary plus the document-frequency statistics behind idf.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    /// Terms in index order (lexicographic by construction).
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
    /// Per-term document counts, aligned with `terms`.
    doc_frequency: Vec<u32>,
    n_train_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_train_docs(&self) -> usize {
        self.n_train_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn doc_frequency(&self, index: usize) -> u32 {
        self.doc_frequency[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        let n = self.n_train_docs as f64;
        let df = self.doc_frequency[index] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    /// Debug/fixture dump: `term <TAB> index <TAB> df`, index-ascending.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, term) in self.terms.iter().enumerate() {
            out.push_str(&format!("{term}\t{i}\t{}\n", self.doc_frequency[i]));
        }
        out
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.dump())?;
        Ok(())
    }
}

/// Sparse feature vector: (index, weight) entries sorted by index, all
/// weights nonzero and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl FeatureVector {
    pub fn new(mut entries: Vec<(usize, f64)>, dim: usize) -> Self {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_unstable_by_key(|&(i, _)| i);
        debug_assert!(entries.iter().all(|&(i, w)| i < dim && w.is_finite()));
        FeatureVector { entries, dim }
    }

    pub fn zero(dim: usize) -> Self {
        FeatureVector { entries: Vec::new(), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>()
    }

    /// Dot product against a dense vector of the same dimension.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.entries.iter().map(|&(i, w)| w * dense[i]).sum()
    }

    /// Scatters the vector into a dense buffer (must be zeroed by caller
    /// or freshly allocated).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            dense[i] = w;
        }
        dense
    }
}

/// Rows sharing one dimension, aligned with their document ids.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub row_ids: Vec<DocId>,
    pub dim: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Fits the vocabulary on cleaned training texts: the `max_features` terms
/// with highest document frequency (ties lexicographic ascending), indices
/// assigned in lexicographic term order.
pub fn fit_vocabulary(train_texts: &[String], max_features: usize) -> Result<Vocabulary> {
    let mut df: HashMap<&str, u32> = HashMap::new();
    for text in train_texts {
        let unique: HashSet<&str> = text.split_whitespace().collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut ranked: Vec<(&str, u32)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_features);
    ranked.sort_by(|a, b| a.0.cmp(b.0));

    let terms: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    let doc_frequency: Vec<u32> = ranked.iter().map(|&(_, c)| c).collect();
    let term_index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        terms,
        term_index,
        doc_frequency,
        n_train_docs: train_texts.len(),
    })
}

/// TF-IDF transform of one cleaned text. Out-of-vocabulary terms are
/// ignored; a text with no in-vocabulary term yields the all-zero vector.
pub fn tfidf_transform(text: &str, vocab: &Vocabulary) -> FeatureVector {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for term in text.split_whitespace() {
        if let Some(idx) = vocab.index_of(term) {
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return FeatureVector::zero(vocab.len());
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(idx, tf)| (idx, tf as f64 * vocab.idf(idx)))
        .collect();
    let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
    for entry in &mut entries {
        entry.1 /= norm;
    }
    FeatureVector::new(entries, vocab.len())
}

/// Transforms a batch of cleaned texts, preserving id order.
pub fn transform_all(ids: &[DocId], texts: &[String], vocab: &Vocabulary) -> FeatureMatrix {
    assert_eq!(ids.len(), texts.len());
    let rows = texts.iter().map(|t| tfidf_transform(t, vocab)).collect();
    FeatureMatrix {
        rows,
        row_ids: ids.to_vec(),
        dim: vocab.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fit_vocabulary_counts_document_frequency() {
        let vocab = fit_vocabulary(&texts(&["a b", "a c"]), 10).unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.doc_frequency(vocab.index_of("a").unwrap()), 2);
        assert_eq!(vocab.doc_frequency(vocab.index_of("b").unwrap()), 1);
        assert_eq!(vocab.doc_frequency(vocab.index_of("c").unwrap()), 1);
    }

    #[test]
    fn fit_vocabulary_caps_at_max_features_by_df() {
        let vocab = fit_vocabulary(&texts(&["a b", "a c"]), 1).unwrap();
        assert_eq!(vocab.len(), 1);
        assert!(vocab.index_of("a").is_some());
    }

    #[test]
    fn fit_vocabulary_rejects_empty_texts() {
        assert!(matches!(
            fit_vocabulary(&texts(&["", ""]), 10),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn fit_vocabulary_assigns_indices_lexicographically() {
        let vocab = fit_vocabulary(&texts(&["zeta alpha", "zeta mid"]), 10).unwrap();
        assert_eq!(vocab.index_of("alpha"), Some(0));
        assert_eq!(vocab.index_of("mid"), Some(1));
        assert_eq!(vocab.index_of("zeta"), Some(2));
    }

    #[test]
    fn transform_one_hot_normalizes_to_unit() {
        let vocab = fit_vocabulary(&texts(&["a b", "a c"]), 10).unwrap();
        let v = tfidf_transform("a a", &vocab);
        assert_eq!(v.nnz(), 1);
        assert!((v.get(vocab.index_of("a").unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_out_of_vocabulary_is_zero() {
        let vocab = fit_vocabulary(&texts(&["a b", "a c"]), 10).unwrap();
        let v = tfidf_transform("z z", &vocab);
        assert_eq!(v.nnz(), 0);
        assert_eq!(v.l2_norm(), 0.0);
    }

    #[test]
    fn transform_matches_smoothed_idf_formula() {
        // N = 2, df(b) = 1: pre-normalization weight = ln(3/2) + 1.
        let vocab = fit_vocabulary(&texts(&["a b", "a c"]), 10).unwrap();
        let idx = vocab.index_of("b").unwrap();
        let expected = (3.0_f64 / 2.0).ln() + 1.0;
        assert!((expected - 1.405_465_108_108_164_4).abs() < 1e-12);
        assert!((vocab.idf(idx) - expected).abs() < 1e-12);
        let v = tfidf_transform("b", &vocab);
        assert!((v.get(idx) - 1.0).abs() < 1e-12, "single term normalizes to 1");
    }

    #[test]
    fn transform_all_preserves_order_and_is_deterministic() {
        let vocab = fit_vocabulary(&texts(&["a b", "a c", "b c"]), 10).unwrap();
        let ids = vec![5, 3, 9];
        let docs = texts(&["a b", "", "c c b"]);
        let m1 = transform_all(&ids, &docs, &vocab);
        let m2 = transform_all(&ids, &docs, &vocab);
        assert_eq!(m1.row_ids, ids);
        assert_eq!(m1.rows.len(), 3);
        assert_eq!(m1.rows, m2.rows);
        let empty = transform_all(&[], &[], &vocab);
        assert!(empty.is_empty());
    }

    #[test]
    fn idf_is_monotone_in_df() {
        let vocab = fit_vocabulary(&texts(&["a b c", "a b", "a"]), 10).unwrap();
        let ia = vocab.index_of("a").unwrap();
        let ib = vocab.index_of("b").unwrap();
        let ic = vocab.index_of("c").unwrap();
        assert!(vocab.idf(ic) > vocab.idf(ib));
        assert!(vocab.idf(ib) > vocab.idf(ia));
    }

    #[test]
    fn vocabulary_dump_format() {
        let vocab = fit_vocabulary(&texts(&["b a", "a"]), 10).unwrap();
        assert_eq!(vocab.dump(), "a\t0\t2\nb\t1\t1\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn word() -> impl Strategy<Value = String> {
            "[a-e]{1,3}"
        }

        proptest! {
            #[test]
            fn nonempty_vectors_have_unit_norm(
                train in proptest::collection::vec(proptest::collection::vec(word(), 1..8), 1..6),
                query in proptest::collection::vec(word(), 0..8),
            ) {
                let train: Vec<String> = train.iter().map(|ws| ws.join(" ")).collect();
                let vocab = fit_vocabulary(&train, 50).unwrap();
                let v = tfidf_transform(&query.join(" "), &vocab);
                prop_assert!(v.entries().iter().all(|&(i, w)| i < vocab.len() && w.is_finite() && w != 0.0));
                if v.nnz() > 0 {
                    prop_assert!((v.l2_norm() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
