//! Wall-to-wall basal-area and extrapolation-risk maps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::hull::{CalibrationEnvelope, ExtrapolationClass, ExtrapolationSummary};
use crate::model::{indicators, ForestType, FOREST_TYPE_COLUMNS};
use crate::raster::{write_ascii_grid, RasterGrid, RasterStack};

/// FNV-1a 64-bit hash, hex encoded.
pub fn content_id(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub envelope_id: String,
    pub model_schema: Vec<String>,
    pub envelope_predictors: Vec<String>,
    pub mcd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapBundle {
    pub ba_map: RasterGrid,
    /// 0 inside, 1 near, 2 far.
    pub risk_map: RasterGrid,
    /// Class proportions over the mapped pixels.
    pub summary: Option<ExtrapolationSummary>,
    pub provenance: Provenance,
}

/// Where each forest input column comes from.
enum Source<'a> {
    Band(&'a RasterGrid),
    Indicator(usize),
}

fn sources<'a>(stack: &'a RasterStack, names: &[String]) -> Result<Vec<Source<'a>>> {
    names
        .iter()
        .map(|n| match FOREST_TYPE_COLUMNS.iter().position(|c| c == n) {
            Some(k) => Ok(Source::Indicator(k)),
            None => stack.band(n).map(Source::Band),
        })
        .collect()
}

/// Predict and classify every pixel. A pixel with nodata in the
/// forest-type band or any band the model or envelope reads is nodata in
/// both outputs.
pub fn predict_raster(stack: &RasterStack, forest: &Forest, env: &CalibrationEnvelope) -> Result<MapBundle> {
    let model_src = sources(stack, &forest.schema)?;
    let env_src: Vec<&RasterGrid> = env
        .predictors()
        .iter()
        .map(|p| stack.band(p))
        .collect::<Result<_>>()?;
    let geo = stack.geometry();
    let ft = stack.forest_type();
    let nodata = geo.nodata_value;
    let ncols = geo.ncols;

    let rows: Vec<Vec<(f64, f64, Option<ExtrapolationClass>)>> = (0..geo.nrows)
        .into_par_iter()
        .map(|r| {
            let mut x = vec![0.0; model_src.len()];
            let mut q = vec![0.0; env_src.len()];
            (0..ncols)
                .map(|c| {
                    let i = r * ncols + c;
                    let Some(t) = ForestType::from_code(ft.values[i]).filter(|_| !ft.is_nodata(ft.values[i])) else {
                        return Ok((nodata, nodata, None));
                    };
                    let onehot = indicators(t);
                    for (v, s) in x.iter_mut().zip(&model_src) {
                        *v = match s {
                            Source::Band(g) => g.values[i],
                            Source::Indicator(k) => onehot[*k],
                        };
                    }
                    let model_missing = model_src
                        .iter()
                        .zip(&x)
                        .any(|(s, v)| matches!(s, Source::Band(g) if g.is_nodata(*v)));
                    for (v, g) in q.iter_mut().zip(&env_src) {
                        *v = g.values[i];
                    }
                    if model_missing || env_src.iter().zip(&q).any(|(g, v)| g.is_nodata(*v)) {
                        return Ok((nodata, nodata, None));
                    }
                    let class = env.classify(&q)?;
                    Ok((forest.predict(&x)?, class.code() as f64, Some(class)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(f64, f64, Option<ExtrapolationClass>)> = rows.into_iter().flatten().collect();
    let classes: Vec<ExtrapolationClass> = cells.iter().filter_map(|c| c.2).collect();
    let summary = (!classes.is_empty()).then(|| ExtrapolationSummary::from_classes(&classes));
    Ok(MapBundle {
        ba_map: geo.with_values(cells.iter().map(|c| c.0).collect())?,
        risk_map: geo.with_values(cells.iter().map(|c| c.1).collect())?,
        summary,
        provenance: Provenance {
            model_id: content_id(forest.to_json()?.as_bytes()),
            envelope_id: content_id(env.to_json()?.as_bytes()),
            model_schema: forest.schema.clone(),
            envelope_predictors: env.predictors().to_vec(),
            mcd: env.mcd(),
        },
    })
}

/// Pixel counts per risk code (inside, near, far) read back from a risk map.
pub fn risk_counts(risk: &RasterGrid) -> [usize; 3] {
    let mut counts = [0; 3];
    for &v in &risk.values {
        if !risk.is_nodata(v) {
            counts[v as usize] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    /// Linear gray ramp between the grid minimum and maximum.
    Gray,
    /// Fixed colors for risk codes 0, 1, 2.
    Risk,
}

/// Reserved gray level for nodata in PGM previews (data use 0..=255).
pub const PGM_NODATA: u16 = 256;
pub const RISK_COLORS: [[u8; 3]; 3] = [[26, 150, 65], [253, 174, 97], [215, 25, 28]];
pub const NODATA_COLOR: [u8; 3] = [0, 0, 0];

/// Plain-text PGM (gray) or PPM (risk) rendering.
pub fn render_preview(grid: &RasterGrid, palette: Palette) -> Result<String> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut out = String::new();
    match palette {
        Palette::Gray => {
            let valid = grid.values.iter().copied().filter(|v| !grid.is_nodata(*v));
            let (lo, hi) = valid.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let _ = writeln!(out, "P2\n{} {}\n{}", grid.ncols, grid.nrows, PGM_NODATA);
            for row in grid.values.chunks(grid.ncols) {
                let line: Vec<String> = row
                    .iter()
                    .map(|&v| {
                        if grid.is_nodata(v) {
                            PGM_NODATA
                        } else if hi > lo {
                            ((v - lo) / (hi - lo) * 255.0).round() as u16
                        } else {
                            0
                        }
                    })
                    .map(|g| g.to_string())
                    .collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        Palette::Risk => {
            let _ = writeln!(out, "P3\n{} {}\n255", grid.ncols, grid.nrows);
            for row in grid.values.chunks(grid.ncols) {
                let line: Vec<String> = row
                    .iter()
                    .map(|&v| {
                        let c = if grid.is_nodata(v) {
                            NODATA_COLOR
                        } else {
                            RISK_COLORS[(v as usize).min(2)]
                        };
                        format!("{} {} {}", c[0], c[1], c[2])
                    })
                    .collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
    }
    Ok(out)
}

/// Sidecar manifest written next to a map bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapManifest {
    pub name: String,
    pub provenance: Provenance,
    pub summary: Option<ExtrapolationSummary>,
    pub prop_inside: Option<f64>,
    pub prop_near: Option<f64>,
    pub prop_far: Option<f64>,
    pub files: Vec<String>,
    pub arguments: serde_json::Value,
}

/// Write `<name>_ba.asc`, `<name>_risk.asc`, optional previews and
/// `<name>_manifest.json` into `dir`; returns the written paths.
pub fn write_bundle(
    bundle: &MapBundle,
    dir: impl AsRef<Path>,
    name: &str,
    previews: bool,
    arguments: serde_json::Value,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = vec![dir.join(format!("{name}_ba.asc")), dir.join(format!("{name}_risk.asc"))];
    write_ascii_grid(&bundle.ba_map, &paths[0])?;
    write_ascii_grid(&bundle.risk_map, &paths[1])?;
    if previews {
        for (grid, palette, ext) in [(&bundle.ba_map, Palette::Gray, "ba.pgm"), (&bundle.risk_map, Palette::Risk, "risk.ppm")] {
            let path = dir.join(format!("{name}_{ext}"));
            std::fs::write(&path, render_preview(grid, palette)?).map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
    }
    let manifest_path = dir.join(format!("{name}_manifest.json"));
    let manifest = MapManifest {
        name: name.to_string(),
        provenance: bundle.provenance.clone(),
        summary: bundle.summary,
        prop_inside: bundle.summary.map(|s| s.prop_inside()),
        prop_near: bundle.summary.map(|s| s.prop_near()),
        prop_far: bundle.summary.map(|s| s.prop_far()),
        files: paths
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        arguments,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    paths.push(manifest_path);
    Ok(paths)
}
