//! Bagged regression trees with feature subsampling.
//!
//! Rows are put in plot-id order before any random draw, so a fitted forest
//! depends on the set of training plots and the seed but not on row order.
//! Tree `t` draws from stream `t` of the forest seed: first the `n`
//! bootstrap indices, then the candidate feature subsets in depth-first
//! (left child first) order.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{Design, PlotTable};
use crate::rng;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `max(1, p / 3)`.
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub seed: u64,
    /// Draw a bootstrap sample per tree. Without it every tree sees each
    /// row once and no out-of-bag estimate exists.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node_size: 5,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or((p / 3).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// One regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub schema: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
    pub n_train: usize,
    pub y_min: f64,
    pub y_max: f64,
    /// Out-of-bag mean prediction per training row, in input row order.
    pub oob_predictions: Vec<Option<f64>>,
    /// Permutation importance per schema column.
    pub importance: Vec<f64>,
}

struct Grower<'a> {
    x: &'a Design,
    y: &'a [f64],
    mtry: usize,
    min_node_size: usize,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn leaf(&mut self, samples: &[usize]) -> usize {
        let value = mean_clamped(samples.iter().map(|&i| self.y[i]));
        self.nodes.push(TreeNode::Leaf { value });
        self.nodes.len() - 1
    }

    fn grow(&mut self, samples: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let first = self.y[samples[0]];
        let constant = samples.iter().all(|&i| self.y[i] == first);
        if samples.len() < 2 * self.min_node_size || constant {
            return self.leaf(samples);
        }
        let p = self.x.ncols();
        let mut features = index::sample(rng, p, self.mtry).into_vec();
        features.sort_unstable();

        let Some((feature, threshold)) = self.best_split(samples, &features) else {
            return self.leaf(samples);
        };
        // partition preserving relative order
        let (mut l, mut r): (Vec<usize>, Vec<usize>) =
            samples.iter().copied().partition(|&i| self.x.get(i, feature) < threshold);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let left = self.grow(&mut l, rng);
        let right = self.grow(&mut r, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Split maximizing `S_L²/n_L + S_R²/n_R`, which is equivalent to
    /// minimizing the children's summed squared deviations. Ties keep the
    /// lowest feature index, then the lowest threshold.
    fn best_split(&self, samples: &[usize], features: &[usize]) -> Option<(usize, f64)> {
        let n = samples.len();
        let total: f64 = samples.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &f in features {
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += pairs[k].1;
                let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if best.is_none_or(|(s, _, _)| score > s) {
                    let mut thr = 0.5 * (lo + hi);
                    if thr <= lo {
                        thr = hi;
                    }
                    best = Some((score, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Mean of `values`, clamped into their own range so that rounding can
/// never push it outside.
fn mean_clamped(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        sum += v;
        n += 1;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (sum / n as f64).clamp(lo, hi)
}

fn canonical_order(x: &Design) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| x.ids[a].cmp(&x.ids[b]));
    order
}

fn tree_rng(params: &ForestParams, tree: usize) -> ChaCha8Rng {
    rng::stream_rng(params.seed, tree as u64)
}

fn bootstrap(params: &ForestParams, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if params.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    }
}

fn out_of_bag(in_bag: &[usize], n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    for &i in in_bag {
        seen[i] = true;
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

fn validate_xy(x: &Design, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch(y.len(), x.nrows()));
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    Ok(())
}

pub fn fit_forest(x: &Design, y: &[f64], params: &ForestParams) -> Result<Forest> {
    validate_xy(x, y)?;
    let n = x.nrows();
    let p = x.ncols();
    let mtry = params.resolved_mtry(p);
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    if mtry == 0 || mtry > p {
        return Err(Error::InvalidConfig(format!("mtry {mtry} outside 1..={p}")));
    }
    if params.min_node_size == 0 || n < params.min_node_size {
        return Err(Error::InvalidConfig(format!(
            "min_node_size {} invalid for {n} rows",
            params.min_node_size
        )));
    }

    let order = canonical_order(x);
    let xc = x.permute_rows(&order);
    let yc: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let grown: Vec<(Tree, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params, t);
            let mut samples = bootstrap(params, n, &mut rng);
            let oob = if params.bootstrap { out_of_bag(&samples, n) } else { Vec::new() };
            let mut g = Grower {
                x: &xc,
                y: &yc,
                mtry,
                min_node_size: params.min_node_size,
                nodes: Vec::new(),
            };
            g.grow(&mut samples, &mut rng);
            (Tree { nodes: g.nodes }, oob)
        })
        .collect();

    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (tree, oob) in &grown {
        for &i in oob {
            sums[i] += tree.predict(xc.row(i));
            counts[i] += 1;
        }
    }
    let mut oob_predictions = vec![None; n];
    for (c, &orig) in order.iter().enumerate() {
        if counts[c] > 0 {
            oob_predictions[orig] = Some(sums[c] / counts[c] as f64);
        }
    }

    let (trees, oob_sets): (Vec<Tree>, Vec<Vec<usize>>) = grown.into_iter().unzip();
    let importance = importance_from_oob(&trees, &oob_sets, &xc, &yc, params.seed);
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Forest {
        schema: x.names.clone(),
        params: *params,
        trees,
        n_train: n,
        y_min,
        y_max,
        oob_predictions,
        importance,
    })
}

/// Per-feature mean over trees of (OOB MSE with the feature permuted among
/// the tree's OOB rows − OOB MSE). Trees with no OOB rows are skipped.
fn importance_from_oob(trees: &[Tree], oob_sets: &[Vec<usize>], x: &Design, y: &[f64], seed: u64) -> Vec<f64> {
    let p = x.ncols();
    let perm_seed = rng::derive_seed(seed, &[0x1A9]);
    let per_tree: Vec<Option<Vec<f64>>> = trees
        .par_iter()
        .zip(oob_sets.par_iter())
        .enumerate()
        .map(|(t, (tree, oob))| {
            if oob.is_empty() {
                return None;
            }
            let mse = |rows: &mut dyn Iterator<Item = (usize, f64)>| -> f64 {
                let mut s = 0.0;
                for (i, pred) in rows {
                    s += (y[i] - pred).powi(2);
                }
                s / oob.len() as f64
            };
            let base = mse(&mut oob.iter().map(|&i| (i, tree.predict(x.row(i)))));
            let mut row = vec![0.0; p];
            let mut scores = Vec::with_capacity(p);
            for j in 0..p {
                let mut rng = rng::stream_rng(perm_seed, (t * p + j) as u64);
                let mut donors: Vec<usize> = oob.clone();
                donors.shuffle(&mut rng);
                let permuted = mse(&mut oob.iter().zip(&donors).map(|(&i, &d)| {
                    row.copy_from_slice(x.row(i));
                    row[j] = x.get(d, j);
                    (i, tree.predict(&row))
                }));
                scores.push(permuted - base);
            }
            Some(scores)
        })
        .collect();
    let mut total = vec![0.0; p];
    let mut used = 0usize;
    for s in per_tree.into_iter().flatten() {
        used += 1;
        for (acc, v) in total.iter_mut().zip(s) {
            *acc += v;
        }
    }
    if used > 0 {
        total.iter_mut().for_each(|v| *v /= used as f64);
    }
    total
}

/// Permutation importance of a fitted forest, recomputed on its training
/// data with a fresh permutation seed. `x` must hold the training rows
/// (any order).
pub fn permutation_importance(forest: &Forest, x: &Design, y: &[f64], seed: u64) -> Result<Vec<f64>> {
    validate_xy(x, y)?;
    if x.nrows() != forest.n_train {
        return Err(Error::DimensionMismatch {
            expected: forest.n_train,
            got: x.nrows(),
        });
    }
    let x = x.select(&forest.schema)?;
    let order = canonical_order(&x);
    let xc = x.permute_rows(&order);
    let yc: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let n = x.nrows();
    let oob_sets: Vec<Vec<usize>> = (0..forest.trees.len())
        .map(|t| {
            if !forest.params.bootstrap {
                return Vec::new();
            }
            let mut rng = tree_rng(&forest.params, t);
            out_of_bag(&bootstrap(&forest.params, n, &mut rng), n)
        })
        .collect();
    Ok(importance_from_oob(&forest.trees, &oob_sets, &xc, &yc, seed))
}

/// Out-of-bag accuracy of a fitted forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OobError {
    pub rmse: f64,
    pub r2: f64,
}

pub fn oob_error(forest: &Forest, y: &[f64]) -> Result<OobError> {
    if y.len() != forest.oob_predictions.len() {
        return Err(Error::LengthMismatch(y.len(), forest.oob_predictions.len()));
    }
    let preds = forest
        .oob_predictions
        .iter()
        .enumerate()
        .map(|(i, p)| p.ok_or(Error::NeverOutOfBag(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OobError {
        rmse: metrics::rmse(y, &preds)?,
        r2: metrics::r_squared(y, &preds)?,
    })
}

impl Forest {
    /// Ensemble mean of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.schema.len() {
            return Err(Error::DimensionMismatch {
                expected: self.schema.len(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        (sum / self.trees.len() as f64).clamp(self.y_min, self.y_max)
    }

    /// Predict every row of `x`, matching columns by name.
    pub fn predict_design(&self, x: &Design) -> Result<Vec<f64>> {
        let x = x.select(&self.schema)?;
        Ok(x.rows().map(|r| self.predict_unchecked(r)).collect())
    }

    pub fn predict_table(&self, table: &PlotTable) -> Result<Vec<f64>> {
        self.predict_design(&table.design(&self.schema)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ForestDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ForestDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Flattened tree arrays. `feature[i] < 0` marks a leaf whose prediction
/// is `value[i]`; otherwise rows with `x[feature] < threshold` go to
/// `left[i]`.
#[derive(Serialize, Deserialize)]
struct TreeDoc {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    value: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    version: u32,
    schema: Vec<String>,
    params: ForestParams,
    n_train: usize,
    y_min: f64,
    y_max: f64,
    importance: Vec<f64>,
    oob_predictions: Vec<Option<f64>>,
    trees: Vec<TreeDoc>,
}

impl From<&Forest> for ForestDoc {
    fn from(f: &Forest) -> Self {
        let trees = f
            .trees
            .iter()
            .map(|t| {
                let mut d = TreeDoc {
                    feature: vec![],
                    threshold: vec![],
                    left: vec![],
                    right: vec![],
                    value: vec![],
                };
                for node in &t.nodes {
                    match *node {
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            d.feature.push(feature as i64);
                            d.threshold.push(threshold);
                            d.left.push(left as u32);
                            d.right.push(right as u32);
                            d.value.push(0.0);
                        }
                        TreeNode::Leaf { value } => {
                            d.feature.push(-1);
                            d.threshold.push(0.0);
                            d.left.push(0);
                            d.right.push(0);
                            d.value.push(value);
                        }
                    }
                }
                d
            })
            .collect();
        ForestDoc {
            version: MODEL_VERSION,
            schema: f.schema.clone(),
            params: f.params,
            n_train: f.n_train,
            y_min: f.y_min,
            y_max: f.y_max,
            importance: f.importance.clone(),
            oob_predictions: f.oob_predictions.clone(),
            trees,
        }
    }
}

impl TryFrom<ForestDoc> for Forest {
    type Error = Error;

    fn try_from(doc: ForestDoc) -> Result<Self> {
        if doc.version != MODEL_VERSION {
            return Err(Error::Version {
                found: doc.version,
                expected: MODEL_VERSION,
            });
        }
        let p = doc.schema.len();
        let bad = |msg: &str| Error::InvalidConfig(format!("model document: {msg}"));
        if doc.trees.is_empty() {
            return Err(bad("no trees"));
        }
        let mut trees = Vec::with_capacity(doc.trees.len());
        for t in doc.trees {
            let m = t.feature.len();
            if m == 0 || [t.threshold.len(), t.left.len(), t.right.len(), t.value.len()] != [m; 4] {
                return Err(bad("ragged tree arrays"));
            }
            let mut nodes = Vec::with_capacity(m);
            for i in 0..m {
                if t.feature[i] < 0 {
                    nodes.push(TreeNode::Leaf { value: t.value[i] });
                } else {
                    let (l, r) = (t.left[i] as usize, t.right[i] as usize);
                    // children always follow their parent, so walks terminate
                    if t.feature[i] as usize >= p || l <= i || r <= i || l >= m || r >= m {
                        return Err(bad("invalid split node"));
                    }
                    nodes.push(TreeNode::Split {
                        feature: t.feature[i] as usize,
                        threshold: t.threshold[i],
                        left: l,
                        right: r,
                    });
                }
            }
            trees.push(Tree { nodes });
        }
        Ok(Forest {
            schema: doc.schema,
            params: doc.params,
            trees,
            n_train: doc.n_train,
            y_min: doc.y_min,
            y_max: doc.y_max,
            oob_predictions: doc.oob_predictions,
            importance: doc.importance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn design(rows: &[Vec<f64>]) -> Design {
        let p = rows[0].len();
        Design::from_rows((0..p).map(|j| format!("f{j}")).collect(), rows).unwrap()
    }

    fn random_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    fn small_params(n_trees: usize) -> ForestParams {
        ForestParams {
            n_trees,
            ..ForestParams::with_seed(11)
        }
    }

    #[test]
    fn constant_response_predicts_constant() {
        let rows = random_rows(50, 3, 1);
        let f = fit_forest(&design(&rows), &[25.0; 50], &small_params(20)).unwrap();
        for r in random_rows(20, 3, 2) {
            assert_eq!(f.predict(&r).unwrap(), 25.0);
        }
    }

    #[test]
    fn step_function_is_recovered() {
        let rows = random_rows(200, 1, 3);
        let y: Vec<f64> = rows.iter().map(|r| if r[0] < 0.0 { 10.0 } else { 30.0 }).collect();
        let f = fit_forest(&design(&rows), &y, &small_params(200)).unwrap();
        let e = oob_error(&f, &y).unwrap();
        assert!(e.rmse < 1.0, "oob rmse {}", e.rmse);
    }

    #[test]
    fn same_seed_same_forest() {
        let rows = random_rows(80, 4, 4);
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 3.0 + r[1]).collect();
        let a = fit_forest(&design(&rows), &y, &small_params(30)).unwrap();
        let b = fit_forest(&design(&rows), &y, &small_params(30)).unwrap();
        for probe in random_rows(50, 4, 5) {
            assert_eq!(a.predict(&probe).unwrap().to_bits(), b.predict(&probe).unwrap().to_bits());
        }
        assert_eq!(a, b);
    }

    #[test]
    fn single_unsplit_tree_predicts_mean() {
        let rows = random_rows(9, 2, 6);
        let y: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let params = ForestParams {
            n_trees: 1,
            min_node_size: 5,
            bootstrap: false,
            ..ForestParams::default()
        };
        let f = fit_forest(&design(&rows), &y, &params).unwrap();
        assert_eq!(f.trees[0].nodes().len(), 1);
        assert_eq!(f.predict(&[0.3, -0.2]).unwrap(), 4.0);
    }

    #[test]
    fn fully_grown_tree_interpolates_training_points() {
        let rows = random_rows(60, 3, 7);
        let y: Vec<f64> = rows.iter().map(|r| r[0].sin() * 10.0 + r[1] * r[2]).collect();
        let params = ForestParams {
            n_trees: 1,
            mtry: Some(3),
            min_node_size: 1,
            bootstrap: false,
            seed: 1,
        };
        let f = fit_forest(&design(&rows), &y, &params).unwrap();
        for (r, v) in rows.iter().zip(&y) {
            assert_eq!(f.predict(r).unwrap(), *v);
        }
    }

    #[test]
    fn schema_length_checked() {
        let rows = random_rows(20, 2, 8);
        let f = fit_forest(&design(&rows), &[1.0; 20], &small_params(2)).unwrap();
        assert!(matches!(f.predict(&[1.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let rows = random_rows(20, 2, 9);
        let mut bad = rows.clone();
        bad[3][1] = f64::NAN;
        assert!(matches!(
            fit_forest(&design(&bad), &[1.0; 20], &small_params(2)),
            Err(Error::NonFinite(_))
        ));
        let p = ForestParams {
            mtry: Some(3),
            ..small_params(2)
        };
        assert!(fit_forest(&design(&rows), &[1.0; 20], &p).is_err());
        assert!(fit_forest(&design(&rows), &[1.0; 19], &small_params(2)).is_err());
    }

    #[test]
    fn one_tree_leaves_rows_never_oob() {
        let rows = random_rows(40, 2, 10);
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let f = fit_forest(&design(&rows), &y, &small_params(1)).unwrap();
        assert!(matches!(oob_error(&f, &y), Err(Error::NeverOutOfBag(_))));
    }

    #[test]
    fn row_order_does_not_matter() {
        let rows = random_rows(70, 3, 12);
        let y: Vec<f64> = rows.iter().map(|r| 5.0 * r[0] - r[2]).collect();
        let d = design(&rows);
        let a = fit_forest(&d, &y, &small_params(25)).unwrap();
        let order: Vec<usize> = (0..70).rev().collect();
        let yr: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let b = fit_forest(&d.permute_rows(&order), &yr, &small_params(25)).unwrap();
        for probe in random_rows(40, 3, 13) {
            assert_eq!(a.predict(&probe).unwrap().to_bits(), b.predict(&probe).unwrap().to_bits());
        }
        assert_eq!(a.importance, b.importance);
        for (k, &i) in order.iter().enumerate() {
            assert_eq!(a.oob_predictions[i], b.oob_predictions[k]);
        }
    }

    #[test]
    fn importance_recomputation_matches_fit() {
        let rows = random_rows(60, 3, 14);
        let y: Vec<f64> = rows.iter().map(|r| 4.0 * r[1]).collect();
        let d = design(&rows);
        let f = fit_forest(&d, &y, &small_params(40)).unwrap();
        let again = permutation_importance(&f, &d, &y, f.params.seed).unwrap();
        assert_eq!(again, f.importance);
        assert!(f.importance[1] > 5.0 * f.importance[0].max(f.importance[2]));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let rows = random_rows(50, 3, 15);
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 1.1 + 0.3).collect();
        let f = fit_forest(&design(&rows), &y, &small_params(10)).unwrap();
        let back = Forest::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, back);
        let mut doc: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        doc["version"] = 99.into();
        assert!(matches!(Forest::from_json(&doc.to_string()), Err(Error::Version { found: 99, .. })));
    }
}
