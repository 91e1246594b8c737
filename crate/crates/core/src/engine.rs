//! Pool-based experiment engine: seed the labeled pool, then iterate
//! train / evaluate / select / label until the iteration budget or the
//! unlabeled pool runs out.
//!
//! Iteration t of the emitted records evaluates the model trained on the
//! labeled set after t strategy selections, so iteration 0 is the
//! seed-only evaluation and `n_labeled = seed_size + t * batch_size`
//! until exhaustion. The model is retrained from scratch every iteration.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{select_batch, Strategy};
use crate::clustering::{kmeans_fit, ClusterModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::corpus::{
    build_label_space, clean_text, filter_by_label_space, labels_to_vector, split_corpus,
    Document, LabelSpace,
};
use crate::error::{Error, Result};
use crate::features::{fit_vocabulary, transform_all, FeatureMatrix, FeatureVector, Vocabulary};
use crate::metrics::{confusion, micro_prf};
use crate::models::{fit, predict, ModelConfig, ModelKind};
use crate::{derive_seed, DocId, LabelVec};

/// Seed-derivation tags for the independent random streams of one run.
const TAG_SEED_POOL: u64 = 1;
const TAG_CLUSTERING: u64 = 2;
const TAG_MODEL: u64 = 3;
const TAG_SELECT_BASE: u64 = 1000;

/// Labeled ids in acquisition order plus the remaining unlabeled pool.
/// Their union is constant over an experiment.
#[derive(Debug, Clone)]
pub struct Pool {
    labeled: Vec<DocId>,
    unlabeled: BTreeSet<DocId>,
}

impl Pool {
    pub fn labeled(&self) -> &[DocId] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<DocId> {
        &self.unlabeled
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    /// Moves freshly selected ids into the labeled sequence.
    pub fn mark_labeled(&mut self, ids: &[DocId]) {
        for id in ids {
            let was_unlabeled = self.unlabeled.remove(id);
            assert!(was_unlabeled, "selector returned id {id} outside the unlabeled pool");
            self.labeled.push(*id);
        }
    }
}

/// Simulated annotator: ground-truth label vectors for training-pool ids
/// only. Test and validation ids are refused so no experiment can leak
/// evaluation labels into training.
#[derive(Debug, Clone)]
pub struct Oracle {
    train_labels: HashMap<DocId, LabelVec>,
    known_ids: BTreeSet<DocId>,
}

impl Oracle {
    pub fn labels(&self, ids: &[DocId]) -> Result<Vec<LabelVec>> {
        ids.iter()
            .map(|id| match self.train_labels.get(id) {
                Some(labels) => Ok(labels.clone()),
                None if self.known_ids.contains(id) => {
                    Err(Error::OracleOutsideTrainingPool { id: *id })
                }
                None => Err(Error::UnknownDocumentId { id: *id }),
            })
            .collect()
    }
}

/// Vectorized corpus ready for experiments: per-split feature matrices and
/// label vectors, the label space, and the training-pool oracle. The
/// validation split is reserved but unused by the default protocol.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub label_space: LabelSpace,
    pub vocabulary: Vocabulary,
    pub train: FeatureMatrix,
    pub train_labels: Vec<LabelVec>,
    pub validation: FeatureMatrix,
    pub validation_labels: Vec<LabelVec>,
    pub test: FeatureMatrix,
    pub test_labels: Vec<LabelVec>,
    pub oracle: Oracle,
}

impl Artifacts {
    pub fn n_labels(&self) -> usize {
        self.label_space.len()
    }

    fn train_row(&self, id: DocId) -> usize {
        self.train
            .row_ids
            .binary_search(&id)
            .expect("id comes from the training split")
    }
}

/// Corpus preparation parameters.
#[derive(Debug, Clone)]
pub struct PrepareParams {
    pub top_k: usize,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub split_seed: u64,
    pub max_features: usize,
}

impl Default for PrepareParams {
    fn default() -> Self {
        PrepareParams {
            top_k: 10,
            train_fraction: 0.7,
            validation_fraction: 0.1,
            split_seed: 42,
            max_features: 20_000,
        }
    }
}

/// Full preparation pipeline: label space from the whole corpus, filter,
/// split, clean, fit the vocabulary on the training split only, vectorize
/// every split, and freeze the oracle.
pub fn prepare_artifacts(docs: Vec<Document>, params: &PrepareParams) -> Result<Artifacts> {
    let label_space = build_label_space(&docs, params.top_k)?;
    let docs = filter_by_label_space(docs, &label_space);
    let split = split_corpus(
        &docs,
        params.train_fraction,
        params.validation_fraction,
        params.split_seed,
    )?;

    let by_id: HashMap<DocId, &Document> = docs.iter().map(|d| (d.id, d)).collect();
    let prepare_split = |ids: &[DocId]| -> Result<(Vec<String>, Vec<LabelVec>)> {
        let mut texts = Vec::with_capacity(ids.len());
        let mut labels = Vec::with_capacity(ids.len());
        for id in ids {
            let doc = by_id[id];
            texts.push(clean_text(&doc.raw_text));
            labels.push(labels_to_vector(doc, &label_space)?);
        }
        Ok((texts, labels))
    };

    let (train_texts, train_labels) = prepare_split(&split.train_ids)?;
    let (validation_texts, validation_labels) = prepare_split(&split.validation_ids)?;
    let (test_texts, test_labels) = prepare_split(&split.test_ids)?;

    let vocabulary = fit_vocabulary(&train_texts, params.max_features)?;
    let train = transform_all(&split.train_ids, &train_texts, &vocabulary);
    let validation = transform_all(&split.validation_ids, &validation_texts, &vocabulary);
    let test = transform_all(&split.test_ids, &test_texts, &vocabulary);

    let oracle = Oracle {
        train_labels: split
            .train_ids
            .iter()
            .copied()
            .zip(train_labels.iter().cloned())
            .collect(),
        known_ids: docs.iter().map(|d| d.id).collect(),
    };

    Ok(Artifacts {
        label_space,
        vocabulary,
        train,
        train_labels,
        validation,
        validation_labels,
        test,
        test_labels,
        oracle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        }
    }
}

/// One evaluation record. Two are emitted per iteration: the labeled-set
/// evaluation and the full-test-set evaluation.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Instances selected by the strategy so far (seed excluded).
    pub n_selected: usize,
    /// Labeled-set size including the seed.
    pub n_labeled: usize,
    pub split: SplitTag,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub f1_micro: f64,
    /// Fit-plus-evaluation time of this iteration. Kept in memory only:
    /// result files must be byte-reproducible, so timings never reach the
    /// CSV (its wall_time_ms column is written as 0).
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub model: ModelKind,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub threshold: f64,
    /// Labeled-seed size. The label-covering logistic-regression seed uses
    /// 50; everything else uses the batch size of 10.
    pub seed_size: usize,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    pub fn new(strategy: Strategy, model: ModelKind, rng_seed: u64) -> Self {
        let seed_size = default_seed_size(&model);
        ExperimentConfig {
            experiment_id: format!("{}__{}__s{}", strategy.name(), model.name(), rng_seed),
            strategy,
            model,
            batch_size: 10,
            max_iterations: 300,
            threshold: 0.5,
            seed_size,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidConfig { reason });
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".to_string());
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be >= 1".to_string());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold {} outside (0, 1)", self.threshold));
        }
        if self.seed_size == 0 {
            return fail("seed_size must be >= 1".to_string());
        }
        Ok(())
    }
}

pub fn default_seed_size(model: &ModelKind) -> usize {
    match model {
        ModelKind::Logistic(_) => 50,
        _ => 10,
    }
}

/// Draws the initial labeled pool. For logistic regression the seed must
/// cover every label: up to 1000 fresh draws, then a greedy repair that
/// swaps lowest-id positive documents in for redundant members.
pub fn seed_pool(
    train_ids: &[DocId],
    model: &ModelKind,
    labels_of: &dyn Fn(DocId) -> LabelVec,
    n_labels: usize,
    seed_size: usize,
    rng_seed: u64,
) -> Result<Pool> {
    assert!(seed_size <= train_ids.len(), "seed_size exceeds the training split");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<DocId> {
        let mut ids = train_ids.to_vec();
        let (picked, _) = ids.partial_shuffle(rng, seed_size);
        picked.to_vec()
    };

    let labeled = if matches!(model, ModelKind::Logistic(_)) {
        // Coverage must be possible at all.
        for j in 0..n_labels {
            if !train_ids.iter().any(|&id| labels_of(id)[j] != 0) {
                return Err(Error::LabelCoverageImpossible { code: format!("index {j}") });
            }
        }
        let covers = |ids: &[DocId]| -> bool {
            let mut seen = vec![false; n_labels];
            for &id in ids {
                for (j, &v) in labels_of(id).iter().enumerate() {
                    if v != 0 {
                        seen[j] = true;
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        let mut picked = draw(&mut rng);
        let mut attempts = 1;
        while !covers(&picked) && attempts < 1000 {
            picked = draw(&mut rng);
            attempts += 1;
        }
        if !covers(&picked) {
            greedy_repair(&mut picked, train_ids, &labels_of, n_labels);
        }
        picked
    } else {
        draw(&mut rng)
    };

    let labeled_set: BTreeSet<DocId> = labeled.iter().copied().collect();
    let unlabeled: BTreeSet<DocId> =
        train_ids.iter().copied().filter(|id| !labeled_set.contains(id)).collect();
    Ok(Pool { labeled, unlabeled })
}

/// For each uncovered label (in index order) swaps in the lowest-id
/// positive document, removing the highest-id member whose labels are all
/// covered at least twice.
fn greedy_repair(
    picked: &mut Vec<DocId>,
    train_ids: &[DocId],
    labels_of: &dyn Fn(DocId) -> LabelVec,
    n_labels: usize,
) {
    for j in 0..n_labels {
        let covered = picked.iter().any(|&id| labels_of(id)[j] != 0);
        if covered {
            continue;
        }
        let incoming = train_ids
            .iter()
            .copied()
            .filter(|&id| labels_of(id)[j] != 0 && !picked.contains(&id))
            .min()
            .expect("coverage feasibility was checked");

        let mut coverage_count = vec![0usize; n_labels];
        for &id in picked.iter() {
            for (l, &v) in labels_of(id).iter().enumerate() {
                if v != 0 {
                    coverage_count[l] += 1;
                }
            }
        }
        let removable = picked
            .iter()
            .copied()
            .filter(|&id| {
                labels_of(id)
                    .iter()
                    .enumerate()
                    .all(|(l, &v)| v == 0 || coverage_count[l] >= 2)
            })
            .max();
        if let Some(out) = removable {
            picked.retain(|&id| id != out);
        }
        picked.push(incoming);
    }
}

/// Evaluates thresholded predictions over a row set.
fn evaluate(
    model: &crate::models::TrainedModel,
    rows: &[&FeatureVector],
    truth: &[LabelVec],
    threshold: f64,
) -> Result<(f64, f64, f64)> {
    let mut pred = Vec::with_capacity(rows.len());
    for row in rows {
        pred.push(predict(model, row, threshold)?);
    }
    Ok(micro_prf(&confusion(&pred, truth)?))
}

/// Runs one experiment and returns its full record sequence.
pub fn run_experiment(
    config: &ExperimentConfig,
    artifacts: &Artifacts,
) -> Result<Vec<IterationRecord>> {
    config.validate()?;
    let train_ids = &artifacts.train.row_ids;
    let labels_of = |id: DocId| artifacts.train_labels[artifacts.train_row(id)].clone();

    let mut pool = seed_pool(
        train_ids,
        &config.model,
        &labels_of,
        artifacts.n_labels(),
        config.seed_size.min(train_ids.len()),
        derive_seed(config.rng_seed, TAG_SEED_POOL),
    )?;

    // Clusters are fit once, on the initial unlabeled pool; selected points
    // simply leave the membership as they leave the pool.
    let cluster_model: Option<ClusterModel> = match config.strategy.cluster_k() {
        Some(k) => {
            let rows: Vec<FeatureVector> = pool
                .unlabeled()
                .iter()
                .map(|&id| artifacts.train.rows[artifacts.train_row(id)].clone())
                .collect();
            let matrix = FeatureMatrix {
                row_ids: pool.unlabeled().iter().copied().collect(),
                dim: artifacts.train.dim,
                rows,
            };
            Some(kmeans_fit(
                &matrix,
                k,
                derive_seed(config.rng_seed, TAG_CLUSTERING),
                DEFAULT_MAX_ITER,
                DEFAULT_TOL,
            )?)
        }
        None => None,
    };

    let test_rows: Vec<&FeatureVector> = artifacts.test.rows.iter().collect();
    let model_config = ModelConfig {
        kind: config.model.clone(),
        rng_seed: derive_seed(config.rng_seed, TAG_MODEL),
    };

    let mut records = Vec::new();
    let mut n_selected = 0usize;
    for iteration in 0..=config.max_iterations {
        let start = Instant::now();
        let labeled_rows: Vec<&FeatureVector> = pool
            .labeled()
            .iter()
            .map(|&id| &artifacts.train.rows[artifacts.train_row(id)])
            .collect();
        let labeled_y: Vec<LabelVec> = pool.labeled().iter().map(|&id| labels_of(id)).collect();
        let labeled_matrix = FeatureMatrix {
            rows: labeled_rows.iter().map(|r| (*r).clone()).collect(),
            row_ids: pool.labeled().to_vec(),
            dim: artifacts.train.dim,
        };

        let model = fit(&model_config, &labeled_matrix, &labeled_y)?;
        let (tp, tr, tf) = evaluate(&model, &labeled_rows, &labeled_y, config.threshold)?;
        let (sp, sr, sf) =
            evaluate(&model, &test_rows, &artifacts.test_labels, config.threshold)?;
        let wall_time = start.elapsed();

        for (split, (p, r, f)) in
            [(SplitTag::Train, (tp, tr, tf)), (SplitTag::Test, (sp, sr, sf))]
        {
            records.push(IterationRecord {
                iteration,
                n_selected,
                n_labeled: pool.n_labeled(),
                split,
                precision_micro: p,
                recall_micro: r,
                f1_micro: f,
                wall_time,
            });
        }

        if iteration == config.max_iterations || pool.n_unlabeled() == 0 {
            break;
        }

        let batch = config.batch_size.min(pool.n_unlabeled());
        let pool_ids: Vec<DocId> = pool.unlabeled().iter().copied().collect();
        let pool_rows: Vec<&FeatureVector> = pool_ids
            .iter()
            .map(|&id| &artifacts.train.rows[artifacts.train_row(id)])
            .collect();
        let select_seed = derive_seed(config.rng_seed, TAG_SELECT_BASE + iteration as u64);
        let selected = select_batch(
            &config.strategy,
            Some(&model),
            cluster_model.as_ref(),
            &pool_rows,
            &pool_ids,
            batch,
            select_seed,
        )?;

        // The oracle provides the ground truth for the new batch.
        let _ = artifacts.oracle.labels(&selected)?;
        pool.mark_labeled(&selected);
        n_selected += selected.len();
    }
    Ok(records)
}

pub const RESULTS_CSV_HEADER: &str = "experiment_id,strategy,model,seed,iteration,n_selected,\
                                      n_labeled,split,precision_micro,recall_micro,f1_micro,\
                                      wall_time_ms";

/// Renders records in the results CSV schema. The wall_time_ms column is
/// written as 0: files must be byte-identical across reruns.
pub fn render_results_csv(config: &ExperimentConfig, records: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 80 + 100);
    out.push_str(RESULTS_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},0\n",
            config.experiment_id,
            config.strategy.name(),
            config.model.name(),
            config.rng_seed,
            r.iteration,
            r.n_selected,
            r.n_labeled,
            r.split.as_str(),
            r.precision_micro,
            r.recall_micro,
            r.f1_micro,
        ));
    }
    out
}

/// Atomic overwrite: write to a temporary sibling, then rename.
pub fn write_results_csv(
    path: impl AsRef<Path>,
    config: &ExperimentConfig,
    records: &[IterationRecord],
) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, render_results_csv(config, records))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs a strategy x model x seed grid, one results CSV per cell, using up
/// to `jobs` worker threads. Cells are independent experiments, so the
/// file contents never depend on the worker count.
pub fn run_grid(
    artifacts: &Artifacts,
    configs: &[ExperimentConfig],
    jobs: usize,
    outdir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let outdir = outdir.as_ref();
    fs::create_dir_all(outdir)?;
    let jobs = jobs.max(1);
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let paths: Vec<PathBuf> = configs
        .iter()
        .map(|c| outdir.join(format!("{}.csv", c.experiment_id)))
        .collect();

    std::thread::scope(|scope| {
        for _ in 0..jobs.min(configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() || failure.lock().unwrap().is_some() {
                    break;
                }
                let config = &configs[i];
                log::info!("running {}", config.experiment_id);
                match run_experiment(config, artifacts)
                    .and_then(|records| write_results_csv(&paths[i], config, &records))
                {
                    Ok(()) => log::info!("finished {}", config.experiment_id),
                    Err(e) => {
                        *failure.lock().unwrap() = Some(e);
                        break;
                    }
                }
            });
        }
    });

    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(paths),
    }
}
