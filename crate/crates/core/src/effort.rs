//! Grid thinning of a plot network and the resulting effort curves:
//! accuracy and extrapolation as a function of sampling density.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::hull::{CalibrationEnvelope, ExtrapolationSummary};
use crate::metrics::{mean_bias, relative_pct, rmse};
use crate::model::PlotTable;
use crate::raster::RasterStack;
use crate::rng::{derive_seed, stage, stream_rng};

/// Smallest thinned sample for which a curve point is computed.
pub const MIN_EFFORT_PLOTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinningPlan {
    pub resolutions_km: Vec<f64>,
    pub iterations: Vec<usize>,
    pub seed: u64,
}

impl ThinningPlan {
    pub fn new(seed: u64) -> Self {
        Self {
            resolutions_km: vec![2.0, 4.0, 6.0, 10.0, 20.0],
            iterations: vec![4, 4, 5, 6, 7],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolutions_km.is_empty() || self.resolutions_km.len() != self.iterations.len() {
            return Err(Error::InvalidConfig(format!(
                "thinning plan needs one iteration count per resolution ({} resolutions, {} counts)",
                self.resolutions_km.len(),
                self.iterations.len()
            )));
        }
        if self.resolutions_km.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig("resolutions must be positive".into()));
        }
        if self.resolutions_km.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("resolutions must be strictly increasing".into()));
        }
        if self.iterations.contains(&0) {
            return Err(Error::InvalidConfig("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// Rectangle in map units (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Extent {
    pub fn of_stack(stack: &RasterStack) -> Self {
        let g = stack.geometry();
        Self {
            xmin: g.xllcorner,
            ymin: g.yllcorner,
            xmax: g.xllcorner + g.width(),
            ymax: g.yllcorner + g.height(),
        }
    }
}

/// Square cells of one resolution anchored at the lower-left corner of an
/// extent; the last column and row may be partial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub extent: Extent,
    pub size_m: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl CellGrid {
    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells as extents, row by row from the bottom.
    pub fn cells(&self) -> Vec<Extent> {
        let e = &self.extent;
        (0..self.nrows)
            .flat_map(|r| {
                (0..self.ncols).map(move |c| Extent {
                    xmin: e.xmin + c as f64 * self.size_m,
                    ymin: e.ymin + r as f64 * self.size_m,
                    xmax: (e.xmin + (c + 1) as f64 * self.size_m).min(e.xmax),
                    ymax: (e.ymin + (r + 1) as f64 * self.size_m).min(e.ymax),
                })
            })
            .collect()
    }

    /// Index of the cell holding (x, y); points on the far edges belong to
    /// the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let e = &self.extent;
        if !(x >= e.xmin && x <= e.xmax && y >= e.ymin && y <= e.ymax) {
            return None;
        }
        let c = (((x - e.xmin) / self.size_m).floor() as usize).min(self.ncols - 1);
        let r = (((y - e.ymin) / self.size_m).floor() as usize).min(self.nrows - 1);
        Some(r * self.ncols + c)
    }
}

pub fn grid_cells(extent: Extent, resolution_km: f64) -> Result<CellGrid> {
    let size_m = resolution_km * 1000.0;
    let (w, h) = (extent.xmax - extent.xmin, extent.ymax - extent.ymin);
    if !(size_m > 0.0 && w > 0.0 && h > 0.0) {
        return Err(Error::InvalidConfig("extent and resolution must be positive".into()));
    }
    Ok(CellGrid {
        extent,
        size_m,
        ncols: (w / size_m).ceil() as usize,
        nrows: (h / size_m).ceil() as usize,
    })
}

/// One plot drawn uniformly per nonempty cell. Candidates within a cell
/// are taken in id order, so the draw does not depend on table row order;
/// the output keeps the table's row order. Plots outside the grid are
/// dropped.
pub fn thin_sample(table: &PlotTable, grid: &CellGrid, seed: u64) -> PlotTable {
    let mut by_cell: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in table.plots().iter().enumerate() {
        if let Some(c) = grid.cell_of(p.x, p.y) {
            by_cell.entry(c).or_default().push(i);
        }
    }
    let mut rng = stream_rng(seed, 0);
    let mut chosen: Vec<usize> = by_cell
        .into_values()
        .map(|mut members| {
            members.sort_by(|&a, &b| table.plots()[a].id.cmp(&table.plots()[b].id));
            members[rng.gen_range(0..members.len())]
        })
        .collect();
    chosen.sort_unstable();
    table.subset(table.name(), &chosen)
}

/// Model recipe refitted on every thinned sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortRecipe {
    /// Design columns of the forest (continuous plus indicators).
    pub retained: Vec<String>,
    /// Continuous predictors spanning the envelope, in query order.
    pub continuous: Vec<String>,
    pub forest: ForestParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortCurvePoint {
    pub resolution_km: f64,
    pub iteration: usize,
    pub n: usize,
    /// `None` when the thinned sample is too small.
    pub rmse_pct: Option<f64>,
    pub bias_pct: Option<f64>,
    pub prop_exterior: Option<f64>,
    pub prop_far: Option<f64>,
    /// `None` also when every query is inside.
    pub mean_distance: Option<f64>,
}

impl EffortCurvePoint {
    fn undefined(resolution_km: f64, iteration: usize, n: usize) -> Self {
        Self {
            resolution_km,
            iteration,
            n,
            rmse_pct: None,
            bias_pct: None,
            prop_exterior: None,
            prop_far: None,
            mean_distance: None,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.rmse_pct.is_some()
    }
}

fn run_point(
    table: &PlotTable,
    grid: &CellGrid,
    seed: u64,
    recipe: &EffortRecipe,
    test: &PlotTable,
    queries: &[Vec<f64>],
    (resolution_km, iteration): (f64, usize),
) -> Result<EffortCurvePoint> {
    let thinned = thin_sample(table, grid, seed);
    let n = thinned.len();
    if n < MIN_EFFORT_PLOTS {
        log::warn!(
            "{resolution_km} km, iteration {iteration}: {n} plots after thinning (< {MIN_EFFORT_PLOTS}); point left undefined"
        );
        return Ok(EffortCurvePoint::undefined(resolution_km, iteration, n));
    }
    let params = ForestParams {
        seed: derive_seed(seed, &[stage::FOREST]),
        ..recipe.forest
    };
    let forest = fit_forest(&thinned.design(&recipe.retained)?, &thinned.ba(), &params)?;
    let y = test.ba();
    let yhat = forest.predict_table(test)?;
    let envelope = match CalibrationEnvelope::build(&thinned, &recipe.continuous) {
        Ok(env) => env,
        Err(Error::ZeroVariance(col)) => {
            log::warn!("{resolution_km} km, iteration {iteration}: '{col}' is constant in the thinned sample; point left undefined");
            return Ok(EffortCurvePoint::undefined(resolution_km, iteration, n));
        }
        Err(e) => return Err(e),
    };
    let summary = ExtrapolationSummary::from_classes(&envelope.classify_all(queries)?);
    Ok(EffortCurvePoint {
        resolution_km,
        iteration,
        n,
        rmse_pct: Some(relative_pct(rmse(&y, &yhat)?, &y)),
        bias_pct: Some(relative_pct(mean_bias(&y, &yhat)?, &y)),
        prop_exterior: Some(summary.prop_exterior()),
        prop_far: Some(summary.prop_far()),
        mean_distance: summary.mean_distance,
    })
}

/// Thin `table` at every resolution and iteration of `plan`, refit, score
/// on the fixed `test` table and classify the fixed `queries` (raw vectors
/// of `recipe.continuous`). Runs are independent and ordered by
/// (resolution, iteration) in the output.
pub fn effort_experiment(
    table: &PlotTable,
    extent: Extent,
    plan: &ThinningPlan,
    recipe: &EffortRecipe,
    test: &PlotTable,
    queries: &[Vec<f64>],
) -> Result<Vec<EffortCurvePoint>> {
    plan.validate()?;
    if queries.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    let grids: Vec<CellGrid> = plan
        .resolutions_km
        .iter()
        .map(|&r| grid_cells(extent, r))
        .collect::<Result<_>>()?;
    let runs: Vec<(usize, usize)> = plan
        .iterations
        .iter()
        .enumerate()
        .flat_map(|(ri, &k)| (0..k).map(move |it| (ri, it)))
        .collect();
    runs.par_iter()
        .map(|&(ri, it)| {
            let seed = derive_seed(plan.seed, &[stage::THIN, ri as u64, it as u64]);
            run_point(table, &grids[ri], seed, recipe, test, queries, (plan.resolutions_km[ri], it))
        })
        .collect()
}

/// Mean of each curve quantity over the defined iterations of one
/// resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionMean {
    pub resolution_km: f64,
    pub defined: usize,
    pub n: f64,
    pub rmse_pct: Option<f64>,
    pub bias_pct: Option<f64>,
    pub prop_exterior: Option<f64>,
    pub prop_far: Option<f64>,
}

pub fn resolution_means(points: &[EffortCurvePoint]) -> Vec<ResolutionMean> {
    let mut resolutions: Vec<f64> = points.iter().map(|p| p.resolution_km).collect();
    resolutions.sort_by(f64::total_cmp);
    resolutions.dedup();
    resolutions
        .into_iter()
        .map(|r| {
            let here: Vec<&EffortCurvePoint> = points.iter().filter(|p| p.resolution_km == r).collect();
            let defined: Vec<&&EffortCurvePoint> = here.iter().filter(|p| p.is_defined()).collect();
            let mean = |f: &dyn Fn(&EffortCurvePoint) -> Option<f64>| {
                let v: Vec<f64> = defined.iter().filter_map(|p| f(p)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            ResolutionMean {
                resolution_km: r,
                defined: defined.len(),
                n: here.iter().map(|p| p.n as f64).sum::<f64>() / here.len() as f64,
                rmse_pct: mean(&|p| p.rmse_pct),
                bias_pct: mean(&|p| p.bias_pct),
                prop_exterior: mean(&|p| p.prop_exterior),
                prop_far: mean(&|p| p.prop_far),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

pub fn write_effort_csv<W: Write>(points: &[EffortCurvePoint], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "resolution_km,iteration,n,rmse_pct,bias_pct,prop_exterior,prop_far,mean_distance")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.resolution_km,
            p.iteration,
            p.n,
            opt(p.rmse_pct),
            opt(p.bias_pct),
            opt(p.prop_exterior),
            opt(p.prop_far),
            opt(p.mean_distance)
        )?;
    }
    Ok(())
}

/// Fixed random sample of forest pixels, as raw vectors of `predictors`.
/// Pixels with nodata in any of these bands or in the forest-type band
/// are never drawn.
pub fn pixel_queries(stack: &RasterStack, predictors: &[String], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let bands = predictors
        .iter()
        .map(|p| stack.band(p))
        .collect::<Result<Vec<_>>>()?;
    let ft = stack.forest_type();
    let valid: Vec<usize> = (0..ft.len())
        .filter(|&i| !ft.is_nodata(ft.values[i]) && bands.iter().all(|b| !b.is_nodata(b.values[i])))
        .collect();
    if valid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut rng = stream_rng(derive_seed(seed, &[stage::QUERIES]), 0);
    let mut picked: Vec<usize> = sample(&mut rng, valid.len(), n.min(valid.len())).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|k| bands.iter().map(|b| b.values[valid[k]]).collect())
        .collect())
}
