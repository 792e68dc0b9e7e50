//! Per-dataset modelling recipe: split, select predictors, fit the forest
//! and build the calibration envelope.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forest::{fit_forest, Forest, ForestParams};
use crate::effort::pixel_queries;
use crate::hull::{extrapolation_summary, CalibrationEnvelope, ExtrapolationSummary};
use crate::metrics::{transfer_matrix, TransferMatrix};
use crate::model::{split_dataset, DataSplit, PlotTable, SplitSpec};
use crate::raster::RasterStack;
use crate::rng::{derive_seed, stage};
use crate::select::{select_predictors, SelectOptions, SelectionResult, DEFAULT_CAP, DEFAULT_FOLDS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub seed: u64,
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub cap: usize,
    pub folds: usize,
}

impl Recipe {
    pub fn new(seed: u64) -> Self {
        let d = ForestParams::default();
        Self {
            seed,
            n_trees: d.n_trees,
            mtry: d.mtry,
            min_node_size: d.min_node_size,
            cap: DEFAULT_CAP,
            folds: DEFAULT_FOLDS,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec::new(derive_seed(self.seed, &[stage::SPLIT]))
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            mtry: self.mtry,
            min_node_size: self.min_node_size,
            seed: derive_seed(self.seed, &[stage::FOREST]),
            bootstrap: true,
        }
    }

    pub fn select_options(&self) -> SelectOptions {
        let seed = derive_seed(self.seed, &[stage::SELECT]);
        SelectOptions {
            folds: self.folds,
            cap: self.cap,
            forest: ForestParams {
                seed,
                ..self.forest_params()
            },
            ..SelectOptions::new(seed)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedDataset {
    pub name: String,
    pub split: DataSplit,
    pub selection: SelectionResult,
    pub forest: Forest,
    pub envelope: CalibrationEnvelope,
}

/// Fit one dataset: predictors are selected, the forest trained and the
/// envelope built on the calibration part; the test part is held out.
pub fn fit_dataset(table: &PlotTable, recipe: &Recipe) -> Result<FittedDataset> {
    let split = split_dataset(table, &recipe.split_spec())?;
    let selection = select_predictors(&split.calib, &recipe.select_options())?;
    let forest = fit_forest(
        &split.calib.design(&selection.retained)?,
        &split.calib.ba(),
        &recipe.forest_params(),
    )?;
    let envelope = CalibrationEnvelope::build(&split.calib, &selection.continuous)?;
    Ok(FittedDataset {
        name: table.name().to_string(),
        split,
        selection,
        forest,
        envelope,
    })
}

/// Every fitted model evaluated on every dataset's test part.
pub fn transfer_study(fitted: &[FittedDataset]) -> Result<TransferMatrix> {
    let models: Vec<(String, &Forest)> = fitted.iter().map(|f| (f.name.clone(), &f.forest)).collect();
    let tests: Vec<(String, &PlotTable)> = fitted.iter().map(|f| (f.name.clone(), &f.split.test)).collect();
    transfer_matrix(&models, &tests)
}

/// Transferability contrasts of a square matrix whose diagonal holds each
/// model's own test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferContrast {
    pub model: String,
    pub own_r2: f64,
    /// Mean R² over the other datasets.
    pub transferred_r2: f64,
    pub own_abs_bias: f64,
    pub transferred_abs_bias: f64,
}

/// Per-model contrasts for models at indices `models` (diagonal entries
/// must be defined). Undefined off-diagonal cells are skipped.
pub fn transfer_contrasts(matrix: &TransferMatrix, models: &[usize]) -> Vec<TransferContrast> {
    models
        .iter()
        .filter_map(|&m| {
            let own = matrix.get(m, m)?;
            let others: Vec<_> = (0..matrix.datasets.len())
                .filter(|&d| d != m)
                .filter_map(|d| matrix.get(m, d))
                .collect();
            if others.is_empty() {
                return None;
            }
            let k = others.len() as f64;
            Some(TransferContrast {
                model: matrix.models[m].clone(),
                own_r2: own.r2,
                transferred_r2: others.iter().map(|c| c.r2).sum::<f64>() / k,
                own_abs_bias: own.bias.abs(),
                transferred_abs_bias: others.iter().map(|c| c.bias.abs()).sum::<f64>() / k,
            })
        })
        .collect()
}

/// Extrapolation of one model over one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaExtrapolation {
    pub model: String,
    pub area: String,
    pub summary: ExtrapolationSummary,
}

/// Classify every forest pixel of `stack` against `env`.
pub fn area_extrapolation(model: &str, area: &str, stack: &RasterStack, env: &CalibrationEnvelope) -> Result<AreaExtrapolation> {
    let queries = pixel_queries(stack, env.predictors(), usize::MAX, 0)?;
    Ok(AreaExtrapolation {
        model: model.to_string(),
        area: area.to_string(),
        summary: extrapolation_summary(env, &queries)?,
    })
}

/// Percentages per model and area, then an unweighted mean row.
pub fn write_extrapolation_csv<W: Write>(rows: &[AreaExtrapolation], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "model,area,pixels,inside_pct,near_pct,far_pct,exterior_pct,mean_distance")?;
    let pct = |s: &ExtrapolationSummary| {
        [
            100.0 * s.prop_inside(),
            100.0 * s.prop_near(),
            100.0 * s.prop_far(),
            100.0 * s.prop_exterior(),
        ]
    };
    for r in rows {
        let p = pct(&r.summary);
        let dist = r.summary.mean_distance.map_or_else(|| "NA".to_string(), |d| format!("{d:.3}"));
        writeln!(
            w,
            "{},{},{},{:.2},{:.2},{:.2},{:.2},{dist}",
            r.model, r.area, r.summary.n, p[0], p[1], p[2], p[3]
        )?;
    }
    if !rows.is_empty() {
        let k = rows.len() as f64;
        let mut mean = [0.0; 4];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(pct(&r.summary)) {
                *m += v / k;
            }
        }
        let dists: Vec<f64> = rows.iter().filter_map(|r| r.summary.mean_distance).collect();
        let dist = if dists.is_empty() {
            "NA".to_string()
        } else {
            format!("{:.3}", dists.iter().sum::<f64>() / dists.len() as f64)
        };
        writeln!(
            w,
            "mean_unweighted,,{},{:.2},{:.2},{:.2},{:.2},{dist}",
            rows.iter().map(|r| r.summary.n).sum::<usize>(),
            mean[0],
            mean[1],
            mean[2],
            mean[3]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FitMetrics;
    use crate::model::test_util::table_from_fn;

    #[test]
    fn recipe_fits_and_holds_out() {
        let t = table_from_fn(60, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 + j as f64, |i| 10.0 + ((i * 7) % 11) as f64 * 2.0);
        let r = Recipe {
            n_trees: 50,
            ..Recipe::new(1)
        };
        let f = fit_dataset(&t, &r).unwrap();
        assert_eq!(f.split.calib.len() + f.split.valid.len() + f.split.test.len(), 60);
        assert_eq!(f.forest.n_train, f.split.calib.len());
        assert_eq!(f.envelope.predictors(), f.selection.continuous.as_slice());
        let again = fit_dataset(&t, &r).unwrap();
        assert_eq!(f.forest.to_json().unwrap(), again.forest.to_json().unwrap());
    }

    #[test]
    fn contrasts_hand_example() {
        let cell = |r2, bias| {
            Some(FitMetrics {
                r2,
                rmse: 1.0,
                bias,
                n: 10,
            })
        };
        let m = TransferMatrix {
            models: vec!["a".into(), "b".into()],
            datasets: vec!["a".into(), "b".into()],
            cells: vec![vec![cell(0.8, 0.5), cell(0.1, 4.0)], vec![cell(0.3, -3.0), cell(0.7, -0.2)]],
        };
        let c = transfer_contrasts(&m, &[0, 1]);
        assert_eq!(c[0].own_r2, 0.8);
        assert_eq!(c[0].transferred_r2, 0.3);
        assert_eq!(c[0].transferred_abs_bias, 3.0);
        assert_eq!(c[1].transferred_r2, 0.1);
        assert_eq!(c[1].own_abs_bias, 0.2);
    }

    #[test]
    fn extrapolation_csv_layout() {
        let s = |inside, near, far, d| ExtrapolationSummary {
            n: inside + near + far,
            inside,
            near,
            far,
            mean_distance: d,
        };
        let rows = vec![
            AreaExtrapolation {
                model: "a".into(),
                area: "forest1".into(),
                summary: s(3, 1, 0, Some(0.5)),
            },
            AreaExtrapolation {
                model: "b".into(),
                area: "aoi".into(),
                summary: s(4, 0, 0, None),
            },
        ];
        let mut out = Vec::new();
        write_extrapolation_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "a,forest1,4,75.00,25.00,0.00,25.00,0.500");
        assert_eq!(lines[2], "b,aoi,4,100.00,0.00,0.00,0.00,NA");
        assert_eq!(lines[3], "mean_unweighted,,8,87.50,12.50,0.00,12.50,0.500");
    }
}
