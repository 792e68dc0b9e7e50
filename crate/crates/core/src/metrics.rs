//! Goodness-of-fit metrics and the model × dataset transferability matrix.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::model::PlotTable;

fn check_pair(y: &[f64], yhat: &[f64], min_n: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < min_n {
        return Err(Error::TooFewValues {
            needed: min_n,
            got: y.len(),
        });
    }
    Ok(())
}

fn sse(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// 1 − SSE/SST. Negative when the predictions do worse than the mean of `y`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 2)?;
    let m = mean(y);
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantResponse);
    }
    Ok(1.0 - sse(y, yhat) / sst)
}

/// Root mean square error with an n − 1 denominator.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 2)?;
    Ok((sse(y, yhat) / (y.len() as f64 - 1.0)).sqrt())
}

/// Mean of observed − predicted; positive means the model underpredicts.
pub fn mean_bias(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64)
}

/// `100 · value / mean(y)`, the relative form used for effort curves.
pub fn relative_pct(value: f64, y: &[f64]) -> f64 {
    100.0 * value / mean(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub r2: f64,
    pub rmse: f64,
    pub bias: f64,
    pub n: usize,
}

impl FitMetrics {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Self {
            r2: r_squared(y, yhat)?,
            rmse: rmse(y, yhat)?,
            bias: mean_bias(y, yhat)?,
            n: y.len(),
        })
    }
}

/// Column means of a transfer matrix for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub r2: f64,
    pub rmse: f64,
    pub bias: f64,
    /// Number of defined cells averaged.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `cells[d][m]`: model `m` evaluated on dataset `d`. `None` marks an
    /// undefined cell (constant observed response).
    pub cells: Vec<Vec<Option<FitMetrics>>>,
}

impl TransferMatrix {
    pub fn get(&self, model: usize, dataset: usize) -> Option<&FitMetrics> {
        self.cells[dataset][model].as_ref()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unweighted mean over the defined datasets, per model.
    pub fn model_means(&self) -> Vec<Option<MetricMeans>> {
        (0..self.models.len())
            .map(|m| {
                let defined: Vec<&FitMetrics> = (0..self.datasets.len()).filter_map(|d| self.get(m, d)).collect();
                if defined.is_empty() {
                    return None;
                }
                let k = defined.len() as f64;
                Some(MetricMeans {
                    r2: defined.iter().map(|c| c.r2).sum::<f64>() / k,
                    rmse: defined.iter().map(|c| c.rmse).sum::<f64>() / k,
                    bias: defined.iter().map(|c| c.bias).sum::<f64>() / k,
                    cells: defined.len(),
                })
            })
            .collect()
    }

    /// CSV with one row per dataset, an (r2, rmse, bias) triple per model,
    /// and a final unweighted mean row. Values are rounded to 2 decimals;
    /// undefined cells print as `NA`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "dataset")?;
        for m in &self.models {
            write!(w, ",{m}_r2,{m}_rmse,{m}_bias")?;
        }
        writeln!(w)?;
        for (d, name) in self.datasets.iter().enumerate() {
            write!(w, "{name}")?;
            for m in 0..self.models.len() {
                match self.get(m, d) {
                    Some(c) => write!(w, ",{:.2},{:.2},{:.2}", c.r2, c.rmse, c.bias)?,
                    None => write!(w, ",NA,NA,NA")?,
                }
            }
            writeln!(w)?;
        }
        write!(w, "mean_unweighted")?;
        for mm in self.model_means() {
            match mm {
                Some(c) => write!(w, ",{:.2},{:.2},{:.2}", c.r2, c.rmse, c.bias)?,
                None => write!(w, ",NA,NA,NA")?,
            }
        }
        writeln!(w)
    }
}

/// Evaluate every model on every test table.
///
/// Fails with [`Error::MissingPredictors`] when a test table lacks a
/// predictor used by a model; a constant-response test table yields
/// undefined cells instead of an error.
pub fn transfer_matrix(models: &[(String, &Forest)], tests: &[(String, &PlotTable)]) -> Result<TransferMatrix> {
    let cells = tests
        .par_iter()
        .map(|(_, table)| {
            let y = table.ba();
            models
                .iter()
                .map(|(_, forest)| {
                    let yhat = forest.predict_table(table)?;
                    match FitMetrics::compute(&y, &yhat) {
                        Ok(m) => Ok(Some(m)),
                        Err(Error::ConstantResponse) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferMatrix {
        models: models.iter().map(|(l, _)| l.clone()).collect(),
        datasets: tests.iter().map(|(l, _)| l.clone()).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r2_cases() {
        let y = [10.0, 20.0, 30.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[20.0; 3]).unwrap(), 0.0);
        assert_eq!(r_squared(&y, &[30.0, 10.0, 20.0]).unwrap(), -2.0);
        assert!(matches!(r_squared(&[5.0; 4], &[1.0; 4]), Err(Error::ConstantResponse)));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn rmse_cases() {
        let v = rmse(&[10.0, 20.0], &[12.0, 16.0]).unwrap();
        assert!((v - 20f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let pct = relative_pct(v, &[10.0, 30.0]);
        assert!((pct - 22.360679774997898).abs() < 1e-9);
        assert!(rmse(&[1.0], &[1.0]).is_err());
        assert!(matches!(rmse(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch(2, 1))));
    }

    #[test]
    fn bias_cases() {
        assert_eq!(mean_bias(&[10.0, 20.0], &[12.0, 16.0]).unwrap(), 1.0);
        assert_eq!(mean_bias(&[10.0, 20.0], &[10.0, 20.0]).unwrap(), 0.0);
        let y = [4.0, 9.0, 13.5];
        let shifted: Vec<f64> = y.iter().map(|v| v - 3.0).collect();
        assert_eq!(mean_bias(&y, &shifted).unwrap(), 3.0);
    }

    #[test]
    fn csv_layout_and_means() {
        let m = |r2| Some(FitMetrics { r2, rmse: 1.0, bias: -0.5, n: 4 });
        let tm = TransferMatrix {
            models: vec!["a".into(), "b".into()],
            datasets: vec!["a".into(), "b".into()],
            cells: vec![vec![m(0.9), m(0.1)], vec![None, m(0.7)]],
        };
        assert_eq!(tm.len(), 4);
        let means = tm.model_means();
        assert_eq!(means[0].unwrap().cells, 1);
        assert!((means[1].unwrap().r2 - 0.4).abs() < 1e-12);
        let mut buf = Vec::new();
        tm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "dataset,a_r2,a_rmse,a_bias,b_r2,b_rmse,b_bias");
        assert_eq!(lines[2], "b,NA,NA,NA,0.70,1.00,-0.50");
        assert_eq!(lines[3], "mean_unweighted,0.90,1.00,-0.50,0.40,1.00,-0.50");
    }

    proptest! {
        #[test]
        fn metric_identities(pairs in proptest::collection::vec((-50f64..50.0, -50f64..50.0), 2..40), c in -100f64..100.0) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yhat: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let n = y.len() as f64;
            let e = rmse(&y, &yhat).unwrap();
            let s = sse(&y, &yhat);
            prop_assert!((e * e * (n - 1.0) - s).abs() <= 1e-9 * s.max(1.0));

            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let yhs: Vec<f64> = yhat.iter().map(|v| v + c).collect();
            prop_assert!((rmse(&ys, &yhs).unwrap() - e).abs() < 1e-9);
            let b = mean_bias(&y, &yhat).unwrap();
            prop_assert!((mean_bias(&ys, &yhs).unwrap() - b).abs() < 1e-9);
            prop_assert!((mean_bias(&y, &yhs).unwrap() - (b - c)).abs() < 1e-9);

            if let Ok(r2) = r_squared(&y, &yhat) {
                prop_assert!(r2 <= 1.0);
                prop_assert!((r_squared(&ys, &yhs).unwrap() - r2).abs() < 1e-6);
                prop_assert_eq!(r2 == 1.0, s == 0.0);
            }
        }
    }
}
