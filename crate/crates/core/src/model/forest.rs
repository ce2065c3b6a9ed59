//! Random forest of CART trees: Gini splits over a √p feature subsample,
//! midpoint thresholds, bootstrap resampling, and leaf-fraction probability
//! averaging. Everything is driven by per-tree seeds derived from the master
//! seed, so results are identical across runs and thread schedules.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::tabular::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        RandomForestConfig { n_trees: 500, bootstrap: true, min_leaf: 1, max_depth: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { prob: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    /// Single-leaf tree with a fixed probability (useful as a stub
    /// predictor in tests and diagnostics).
    pub fn constant(prob: f64) -> Tree {
        Tree { nodes: vec![TreeNode::Leaf { prob }] }
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { prob } => return *prob,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    pub seed: u64,
    /// Training saw a single class; trees are constant predictors.
    pub single_class_training: bool,
}

// ── Fitting ──────────────────────────────────────────────────────────────────

struct TreeBuilder<'a> {
    x: &'a [f64],
    y: &'a [u8],
    p: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    /// Best (gain, feature, threshold) over the node's feature subsample;
    /// ties keep the lowest feature index, then the lowest threshold, which
    /// the ascending scan with a strict improvement test produces naturally.
    fn best_split(&mut self, rows: &[usize]) -> Option<(u32, f64)> {
        let n = rows.len() as f64;
        let pos = rows.iter().filter(|&&i| self.y[i] == 1).count() as f64;
        let parent_gini = gini(pos, n);
        if parent_gini == 0.0 {
            return None;
        }

        let mut features: Vec<usize> = (0..self.p).collect();
        features.shuffle(&mut self.rng);
        features.truncate(self.mtry);
        features.sort_unstable();

        let mut best: Option<(f64, u32, f64)> = None;
        let mut sorted = rows.to_vec();
        for &feature in &features {
            sorted.sort_unstable_by(|&a, &b| {
                self.x[a * self.p + feature].total_cmp(&self.x[b * self.p + feature])
            });
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for split_at in 1..sorted.len() {
                let prev = sorted[split_at - 1];
                left_n += 1.0;
                left_pos += self.y[prev] as f64;
                let prev_v = self.x[prev * self.p + feature];
                let next_v = self.x[sorted[split_at] * self.p + feature];
                if prev_v == next_v {
                    continue;
                }
                let right_n = n - left_n;
                if (left_n as usize) < self.min_leaf || (right_n as usize) < self.min_leaf {
                    continue;
                }
                let gain = parent_gini
                    - (left_n / n) * gini(left_pos, left_n)
                    - (right_n / n) * gini(pos - left_pos, right_n);
                let threshold = 0.5 * (prev_v + next_v);
                if gain > 0.0 && best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, feature as u32, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> u32 {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.y[i] == 1).count();
        let node_id = self.nodes.len() as u32;

        let depth_ok = self.max_depth.map_or(true, |d| depth < d);
        let can_split = depth_ok && n >= 2 * self.min_leaf && pos > 0 && pos < n;
        let split = if can_split { self.best_split(&rows) } else { None };

        match split {
            None => {
                self.nodes.push(TreeNode::Leaf { prob: pos as f64 / n as f64 });
                node_id
            }
            Some((feature, threshold)) => {
                self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| self.x[i * self.p + feature as usize] <= threshold);
                let left = self.build(left_rows, depth + 1);
                let right = self.build(right_rows, depth + 1);
                if let TreeNode::Split { left: l, right: r, .. } =
                    &mut self.nodes[node_id as usize]
                {
                    *l = left;
                    *r = right;
                }
                node_id
            }
        }
    }
}

#[inline]
fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let fp = pos / n;
    let fnn = 1.0 - fp;
    1.0 - fp * fp - fnn * fnn
}

fn fit_tree(
    x: &[f64],
    y: &[u8],
    p: usize,
    config: &RandomForestConfig,
    tree_seed: u64,
) -> Tree {
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
    let rows: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mtry = (p as f64).sqrt().ceil() as usize;
    let mut builder = TreeBuilder {
        x,
        y,
        p,
        mtry: mtry.clamp(1, p),
        min_leaf: config.min_leaf.max(1),
        max_depth: config.max_depth,
        rng,
        nodes: Vec::new(),
    };
    builder.build(rows, 0);
    Tree { nodes: builder.nodes }
}

/// Grow `n_trees` CART trees, each on its own bootstrap resample (when
/// enabled) with its own derived seed. Single-class training is allowed but
/// flagged: every tree degenerates to a constant leaf.
pub fn fit_random_forest(
    train: &FeatureTable,
    config: &RandomForestConfig,
) -> Result<RandomForest> {
    let labels = train
        .labels()
        .ok_or_else(|| Error::Fit("training table has no labels".into()))?;
    if train.n_rows() == 0 || train.n_features() == 0 {
        return Err(Error::Fit("training table is empty".into()));
    }
    if config.n_trees == 0 {
        return Err(Error::Fit("forest needs at least one tree".into()));
    }
    let (pos, neg) = train.class_counts()?;
    let single_class_training = pos == 0 || neg == 0;

    let x = train.feature_matrix();
    let p = train.n_features();
    let tree_seeds: Vec<u64> =
        (0..config.n_trees).map(|t| derive_seed(config.seed, 0x7265_73, t as u64)).collect();
    let trees: Vec<Tree> = tree_seeds
        .par_iter()
        .map(|&seed| fit_tree(&x, labels, p, config, seed))
        .collect();

    Ok(RandomForest {
        feature_names: train.feature_names().to_vec(),
        trees,
        seed: config.seed,
        single_class_training,
    })
}

// ── Prediction ───────────────────────────────────────────────────────────────

impl RandomForest {
    /// Mean over trees of the leaf positive fraction; columns are matched by
    /// name so unused extra columns are ignored.
    pub fn predict_proba(&self, rows: &FeatureTable) -> Result<Vec<f64>> {
        let mut cols = Vec::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            cols.push(rows.column(name).ok_or_else(|| {
                Error::InvalidInput(format!("prediction rows lack feature column `{name}`"))
            })?);
        }
        let n = rows.n_rows();
        let p = cols.len();
        let mut row_buf = vec![0.0; p];
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            for (j, col) in cols.iter().enumerate() {
                row_buf[j] = col[i];
            }
            let sum: f64 = self.trees.iter().map(|t| t.predict_row(&row_buf)).sum();
            out.push(sum / self.trees.len() as f64);
        }
        Ok(out)
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────
