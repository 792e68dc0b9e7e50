//! Forest basal-area modelling with transferability and extrapolation
//! diagnostics: predictor selection, random-forest regression, transfer
//! metrics, convex-hull validity domains, sampling-effort curves and map
//! products.

pub mod effort;
pub mod error;
pub mod forest;
pub mod hull;
pub mod io;
pub mod kdtree;
pub mod lasso;
pub mod lp;
pub mod mapping;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod rng;
pub mod select;
pub mod study;
pub mod synth;

pub use error::{Error, Result};
pub use forest::{fit_forest, Forest, ForestParams};
pub use hull::{extrapolation_summary, CalibrationEnvelope, ExtrapolationClass, ExtrapolationSummary};
pub use metrics::{mean_bias, r_squared, rmse, transfer_matrix, FitMetrics, TransferMatrix};
pub use model::{split_dataset, DataSplit, ForestType, Plot, PlotTable, SplitSpec, Standardizer};
pub use raster::{RasterGrid, RasterStack};
pub use select::{select_predictors, SelectOptions, SelectionResult};
