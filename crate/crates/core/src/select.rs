//! Predictor selection: lasso retention, capped by random-forest importance.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forest::{fit_forest, ForestParams};
use crate::lasso::{cv_lasso, LambdaRule};
use crate::model::{PlotTable, FOREST_TYPE_COLUMNS};

pub const DEFAULT_CAP: usize = 5;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub folds: usize,
    pub seed: u64,
    /// Maximum number of continuous predictors kept.
    pub cap: usize,
    pub rule: LambdaRule,
    /// Forest used for importance ranking.
    pub forest: ForestParams,
}

impl SelectOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            seed,
            cap: DEFAULT_CAP,
            rule: LambdaRule::OneSe,
            forest: ForestParams::with_seed(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Continuous predictors followed by the forest-type indicators.
    pub retained: Vec<String>,
    pub continuous: Vec<String>,
    pub rule: LambdaRule,
    pub lambda: f64,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    /// Lasso-nonzero predictors at the chosen lambda, before the cap.
    pub lasso_nonzero: Vec<String>,
    /// (predictor, permutation importance) for each retained continuous
    /// predictor, highest first.
    pub importance: Vec<(String, f64)>,
    pub cap_applied: bool,
    /// Set when the lasso kept nothing at the chosen lambda and a
    /// fallback filled the set.
    pub fallback: Option<String>,
}

fn with_indicators(continuous: &[String]) -> Vec<String> {
    continuous
        .iter()
        .cloned()
        .chain(FOREST_TYPE_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

/// Importance of `candidates` in a forest fitted on them plus the
/// forest-type indicators, highest first; ties keep schema order.
fn rank_by_importance(table: &PlotTable, candidates: &[String], params: &ForestParams) -> Result<Vec<(String, f64)>> {
    let columns = with_indicators(candidates);
    let design = table.design(&columns)?;
    let forest = fit_forest(&design, &table.ba(), params)?;
    let mut ranked: Vec<(String, f64)> = candidates
        .iter()
        .cloned()
        .zip(forest.importance.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

pub fn select_predictors(table: &PlotTable, opts: &SelectOptions) -> Result<SelectionResult> {
    let path = cv_lasso(table, opts.folds, opts.seed)?;
    let mut lasso_nonzero = path.nonzero(opts.rule);
    let mut fallback = None;
    if lasso_nonzero.is_empty() && opts.rule == LambdaRule::OneSe {
        lasso_nonzero = path.nonzero(LambdaRule::Min);
        if !lasso_nonzero.is_empty() {
            fallback = Some("lambda_1se kept no predictor; used lambda_min".to_string());
        }
    }

    let (candidates, top_only) = if lasso_nonzero.is_empty() {
        fallback = Some("lasso kept no predictor; used the single most important one".to_string());
        (table.schema().to_vec(), Some(1))
    } else {
        (lasso_nonzero.clone(), None)
    };

    let ranked = rank_by_importance(table, &candidates, &opts.forest)?;
    let keep = top_only.unwrap_or(opts.cap.max(1)).min(ranked.len());
    let cap_applied = top_only.is_none() && ranked.len() > keep;
    let importance: Vec<(String, f64)> = ranked.into_iter().take(keep).collect();
    let continuous: Vec<String> = table
        .schema()
        .iter()
        .filter(|c| importance.iter().any(|(n, _)| n == *c))
        .cloned()
        .collect();

    Ok(SelectionResult {
        retained: with_indicators(&continuous),
        continuous,
        rule: opts.rule,
        lambda: path.lambdas[path.index(opts.rule)],
        lambda_min: path.lambda_min(),
        lambda_1se: path.lambda_1se(),
        lasso_nonzero,
        importance,
        cap_applied,
        fallback,
    })
}
