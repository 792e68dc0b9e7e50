//! Lasso by cyclic coordinate descent, and a cross-validated path over a
//! geometric lambda grid.
//!
//! The objective is `(1/2n)·‖y − Xβ‖² + λ·‖β‖₁` on a column-standardized
//! design and centered response; the intercept is the response mean.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mean_sd, PlotTable, Standardizer};
use crate::rng;

pub const MAX_SWEEPS: usize = 10_000;
pub const TOLERANCE: f64 = 1e-8;
pub const GRID_SIZE: usize = 100;
pub const GRID_RATIO: f64 = 1e-3;

/// Column-major dense design.
#[derive(Debug, Clone)]
pub struct Columns {
    pub n: usize,
    pub cols: Vec<Vec<f64>>,
}

impl Columns {
    pub fn new(cols: Vec<Vec<f64>>) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidTable("ragged design columns".into()));
        }
        if cols.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lasso design"));
        }
        Ok(Self { n, cols })
    }

    pub fn p(&self) -> usize {
        self.cols.len()
    }

    fn dot(&self, j: usize, v: &[f64]) -> f64 {
        self.cols[j].iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest lambda at which every coefficient is zero.
pub fn lambda_max(x: &Columns, y: &[f64]) -> f64 {
    let n = x.n as f64;
    (0..x.p()).map(|j| (x.dot(j, y) / n).abs()).fold(0.0, f64::max)
}

/// Coordinate descent from `warm` (or zero). Stops once a full sweep moves
/// no coefficient by more than [`TOLERANCE`].
pub fn lasso_fit(x: &Columns, y: &[f64], lambda: f64, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    if y.len() != x.n {
        return Err(Error::LengthMismatch(y.len(), x.n));
    }
    if y.iter().any(|v| !v.is_finite()) || !lambda.is_finite() {
        return Err(Error::NonFinite("lasso response or lambda"));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = x.n as f64;
    let p = x.p();
    let mut beta = warm.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    let scale: Vec<f64> = (0..p).map(|j| x.dot(j, &x.cols[j]) / n).collect();
    let mut resid: Vec<f64> = y.to_vec();
    for (b, col) in beta.iter().zip(&x.cols) {
        if *b != 0.0 {
            for (r, v) in resid.iter_mut().zip(col) {
                *r -= v * b;
            }
        }
    }
    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if scale[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho = x.dot(j, &resid) / n + scale[j] * old;
            let new = soft_threshold(rho, lambda) / scale[j];
            let delta = new - old;
            if delta != 0.0 {
                for (r, v) in resid.iter_mut().zip(&x.cols[j]) {
                    *r -= v * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOLERANCE {
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence(MAX_SWEEPS))
}

/// Largest violation of the lasso optimality conditions:
/// `|g_j| ≤ λ` where `β_j = 0` and `g_j = λ·sign(β_j)` otherwise, with
/// `g = (1/n)·Xᵀ(y − Xβ)`.
pub fn kkt_violation(x: &Columns, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = x.n as f64;
    let mut resid = y.to_vec();
    for (j, b) in beta.iter().enumerate() {
        for (r, v) in resid.iter_mut().zip(&x.cols[j]) {
            *r -= v * b;
        }
    }
    (0..x.p())
        .map(|j| {
            let g = x.dot(j, &resid) / n;
            if beta[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * beta[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Geometric grid from `lmax` down to `lmax · GRID_RATIO`.
pub fn lambda_grid(lmax: f64) -> Vec<f64> {
    (0..GRID_SIZE)
        .map(|i| lmax * GRID_RATIO.powf(i as f64 / (GRID_SIZE - 1) as f64))
        .collect()
}

/// Warm-started fits along `lambdas`.
pub fn lasso_path(x: &Columns, y: &[f64], lambdas: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let beta = lasso_fit(x, y, l, out.last().map(Vec::as_slice))?;
        out.push(beta);
    }
    Ok(out)
}

/// Which point of the CV curve defines the retained predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaRule {
    /// Largest lambda within one standard error of the CV minimum.
    OneSe,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub predictors: Vec<String>,
    pub standardizer: Standardizer,
    pub intercept: f64,
    /// Strictly decreasing.
    pub lambdas: Vec<f64>,
    /// `coefficients[i]` is the standardized-scale fit at `lambdas[i]`.
    pub coefficients: Vec<Vec<f64>>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub folds: usize,
    /// Fold index per plot, in table order.
    pub fold_of: Vec<usize>,
    pub index_min: usize,
    pub index_1se: usize,
}

impl LassoPath {
    pub fn lambda_min(&self) -> f64 {
        self.lambdas[self.index_min]
    }

    pub fn lambda_1se(&self) -> f64 {
        self.lambdas[self.index_1se]
    }

    pub fn index(&self, rule: LambdaRule) -> usize {
        match rule {
            LambdaRule::OneSe => self.index_1se,
            LambdaRule::Min => self.index_min,
        }
    }

    /// Predictors with a nonzero coefficient at the rule's lambda.
    pub fn nonzero(&self, rule: LambdaRule) -> Vec<String> {
        let beta = &self.coefficients[self.index(rule)];
        self.predictors
            .iter()
            .zip(beta)
            .filter(|(_, b)| **b != 0.0)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

struct Prepared {
    x: Columns,
    y: Vec<f64>,
    standardizer: Standardizer,
    y_mean: f64,
}

fn prepare(columns: &[Vec<f64>], names: &[String], y: &[f64]) -> Result<Prepared> {
    let standardizer = Standardizer::fit_columns(names.to_vec(), columns)?;
    let cols = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            c.iter()
                .map(|v| (v - standardizer.means[j]) / standardizer.sds[j])
                .collect()
        })
        .collect();
    let (y_mean, _) = mean_sd(y);
    Ok(Prepared {
        x: Columns::new(cols)?,
        y: y.iter().map(|v| v - y_mean).collect(),
        standardizer,
        y_mean,
    })
}

/// Fold index per position: plots in id order are shuffled with `seed`,
/// then the i-th shuffled plot goes to fold `i mod k`.
pub fn assign_folds(ids: &[&str], k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(ids[b]));
    order.shuffle(&mut rng::stream_rng(seed, 0));
    let mut fold = vec![0; ids.len()];
    for (rank, &i) in order.iter().enumerate() {
        fold[i] = rank % k;
    }
    fold
}

/// K-fold cross-validated lasso over the continuous predictors of `table`.
pub fn cv_lasso(table: &PlotTable, k: usize, seed: u64) -> Result<LassoPath> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let n = table.len();
    if n < 2 * k {
        return Err(Error::TooFewPlots { needed: 2 * k, got: n });
    }
    let names = table.schema().to_vec();
    let columns: Vec<Vec<f64>> = names.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let y = table.ba();
    let full = prepare(&columns, &names, &y)?;
    let lmax = lambda_max(&full.x, &full.y);
    if lmax == 0.0 {
        return Err(Error::ConstantResponse);
    }
    let lambdas = lambda_grid(lmax);
    let coefficients = lasso_path(&full.x, &full.y, &lambdas)?;

    let fold_of = assign_folds(&table.ids(), k, seed);
    let fold_errors: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            let held: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let cols_tr: Vec<Vec<f64>> = columns.iter().map(|c| train.iter().map(|&i| c[i]).collect()).collect();
            let y_tr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let prep = prepare(&cols_tr, &names, &y_tr)?;
            let path = lasso_path(&prep.x, &prep.y, &lambdas)?;
            Ok(path
                .iter()
                .map(|beta| {
                    let sq: f64 = held
                        .iter()
                        .map(|&i| {
                            let pred = prep.y_mean
                                + (0..names.len())
                                    .map(|j| beta[j] * (columns[j][i] - prep.standardizer.means[j]) / prep.standardizer.sds[j])
                                    .sum::<f64>();
                            (y[i] - pred).powi(2)
                        })
                        .sum();
                    sq / held.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let (cv_mean, cv_se): (Vec<f64>, Vec<f64>) = (0..lambdas.len())
        .map(|l| {
            let errs: Vec<f64> = fold_errors.iter().map(|fe| fe[l]).collect();
            let (m, sd) = mean_sd(&errs);
            (m, sd / (k as f64).sqrt())
        })
        .unzip();
    let index_min = (0..lambdas.len())
        .fold(0, |best, i| if cv_mean[i] < cv_mean[best] { i } else { best });
    let bound = cv_mean[index_min] + cv_se[index_min];
    let index_1se = (0..=index_min).find(|&i| cv_mean[i] <= bound).unwrap_or(index_min);

    Ok(LassoPath {
        predictors: names,
        standardizer: full.standardizer,
        intercept: full.y_mean,
        lambdas,
        coefficients,
        cv_mean,
        cv_se,
        folds: k,
        fold_of,
        index_min,
        index_1se,
    })
}
