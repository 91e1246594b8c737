//! One-vs-rest random forest with Gini impurity splits.
//!
//! Bootstrap sample size equals the training size; each split evaluates
//! ceil(sqrt(V)) candidate features drawn from the features with nonzero
//! support at the node, topped up from the remaining feature range.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureVector;

#[derive(Debug, Clone)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 30, max_depth: 500, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { positive: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn vote(&self, x: &FeatureVector) -> bool {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { positive } => return *positive,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x.get(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A fitted forest for one binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Fraction of trees voting positive.
    pub fn probability(&self, x: &FeatureVector) -> f64 {
        let votes = self.trees.iter().filter(|t| t.vote(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub fn fit_forest(
    rows: &[&FeatureVector],
    targets: &[u8],
    dim: usize,
    params: &ForestParams,
    rng_seed: u64,
) -> Forest {
    let n = rows.len();
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(rng_seed, t as u64));
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                rows,
                targets,
                dim,
                params,
                rng,
                nodes: Vec::new(),
            };
            builder.build(sample, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Forest { trees }
}

struct TreeBuilder<'a> {
    rows: &'a [&'a FeatureVector],
    targets: &'a [u8],
    dim: usize,
    params: &'a ForestParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Builds the subtree for `samples`, returning its node index.
    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let positives = samples.iter().filter(|&&i| self.targets[i] != 0).count();
        let n = samples.len();
        let pure = positives == 0 || positives == n;
        if pure || depth >= self.params.max_depth || n < self.params.min_samples_split {
            return self.push_leaf(positives, n);
        }
        match self.best_split(&samples) {
            Some((feature, threshold)) => {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
                    .into_iter()
                    .partition(|&i| self.rows[i].get(feature) <= threshold);
                let idx = self.nodes.len();
                self.nodes.push(Node::Leaf { positive: false }); // placeholder
                let left = self.build(left_samples, depth + 1);
                let right = self.build(right_samples, depth + 1);
                self.nodes[idx] = Node::Split { feature, threshold, left, right };
                idx
            }
            None => self.push_leaf(positives, n),
        }
    }

    fn push_leaf(&mut self, positives: usize, n: usize) -> usize {
        self.nodes.push(Node::Leaf { positive: 2 * positives > n });
        self.nodes.len() - 1
    }

    /// Candidate features: ceil(sqrt(V)) drawn from the node's nonzero
    /// support, topped up with features sampled from the complement.
    fn candidate_features(&mut self, samples: &[usize]) -> Vec<usize> {
        let m = (self.dim as f64).sqrt().ceil() as usize;
        let m = m.clamp(1, self.dim);
        let mut support: Vec<usize> = {
            let mut set = HashSet::new();
            for &i in samples {
                for &(j, _) in self.rows[i].entries() {
                    set.insert(j);
                }
            }
            let mut v: Vec<usize> = set.into_iter().collect();
            v.sort_unstable();
            v
        };
        if support.len() >= m {
            support.shuffle(&mut self.rng);
            support.truncate(m);
        } else {
            let need = m - support.len();
            let taken: HashSet<usize> = support.iter().copied().collect();
            let mut extra = Vec::with_capacity(need);
            let mut guard = 0;
            while extra.len() < need && guard < 100 * need + 100 {
                let j = self.rng.gen_range(0..self.dim);
                if !taken.contains(&j) && !extra.contains(&j) {
                    extra.push(j);
                }
                guard += 1;
            }
            support.extend(extra);
        }
        support.sort_unstable();
        support
    }

    fn best_split(&mut self, samples: &[usize]) -> Option<(usize, f64)> {
        let n = samples.len();
        let total_pos = samples.iter().filter(|&&i| self.targets[i] != 0).count();
        let parent = gini(total_pos, n);
        let mut best: Option<(usize, f64)> = None;
        let mut best_impurity = parent - 1e-12;
        for feature in self.candidate_features(samples) {
            let mut values: Vec<(f64, u8)> = samples
                .iter()
                .map(|&i| (self.rows[i].get(feature), self.targets[i]))
                .collect();
            values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_n = 0;
            let mut left_pos = 0;
            for w in 0..n - 1 {
                left_n += 1;
                if values[w].1 != 0 {
                    left_pos += 1;
                }
                if values[w].0 == values[w + 1].0 {
                    continue;
                }
                let right_n = n - left_n;
                let right_pos = total_pos - left_pos;
                let weighted = (left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(right_pos, right_n))
                    / n as f64;
                if weighted < best_impurity {
                    best_impurity = weighted;
                    best = Some((feature, 0.5 * (values[w].0 + values[w + 1].0)));
                }
            }
        }
        best
    }
}

fn gini(positives: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = positives as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}
