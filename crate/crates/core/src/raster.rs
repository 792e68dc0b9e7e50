//! ESRI ASCII grids and aligned band stacks.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ForestType;

pub const DEFAULT_NODATA: f64 = -9999.0;

/// Single-band grid. Row 0 is the northern-most row.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata_value: f64,
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        nodata_value: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::EmptyGrid);
        }
        if cellsize.is_nan() || cellsize <= 0.0 {
            return Err(Error::InvalidConfig(format!("cellsize must be positive, got {cellsize}")));
        }
        if values.len() != ncols * nrows {
            return Err(Error::DimensionMismatch {
                expected: ncols * nrows,
                got: values.len(),
            });
        }
        Ok(Self {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize,
            nodata_value,
            values,
        })
    }

    /// Grid with the same georeferencing as `self` and new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.ncols,
            self.nrows,
            self.xllcorner,
            self.yllcorner,
            self.cellsize,
            self.nodata_value,
            values,
        )
    }

    pub fn filled(like: &RasterGrid, value: f64) -> Self {
        Self {
            values: vec![value; like.len()],
            ..like.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.ncols as f64 * self.cellsize
    }

    pub fn height(&self) -> f64 {
        self.nrows as f64 * self.cellsize
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata_value || v.is_nan()
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xllcorner + (col as f64 + 0.5) * self.cellsize,
            self.yllcorner + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
        )
    }

    /// Cell containing (x, y), if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.xllcorner) / self.cellsize).floor();
        let r_from_bottom = ((y - self.yllcorner) / self.cellsize).floor();
        if c < 0.0 || r_from_bottom < 0.0 || c >= self.ncols as f64 || r_from_bottom >= self.nrows as f64 {
            return None;
        }
        Some((self.nrows - 1 - r_from_bottom as usize, c as usize))
    }

    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        self.cell_at(x, y)
            .map(|(r, c)| self.get(r, c))
            .filter(|v| !self.is_nodata(*v))
    }

    pub fn same_georef(&self, other: &RasterGrid) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.xllcorner == other.xllcorner
            && self.yllcorner == other.yllcorner
            && self.cellsize == other.cellsize
    }

    /// Sub-grid of `ncols × nrows` cells whose top-left cell is (row0, col0).
    pub fn crop(&self, row0: usize, col0: usize, nrows: usize, ncols: usize) -> Result<RasterGrid> {
        if row0 + nrows > self.nrows || col0 + ncols > self.ncols {
            return Err(Error::InvalidConfig("crop window exceeds grid".into()));
        }
        let mut values = Vec::with_capacity(nrows * ncols);
        for r in row0..row0 + nrows {
            values.extend_from_slice(&self.values[r * self.ncols + col0..r * self.ncols + col0 + ncols]);
        }
        RasterGrid::new(
            ncols,
            nrows,
            self.xllcorner + col0 as f64 * self.cellsize,
            self.yllcorner + (self.nrows - row0 - nrows) as f64 * self.cellsize,
            self.cellsize,
            self.nodata_value,
            values,
        )
    }
}

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_grid(BufReader::new(file), &path.display().to_string())
}

pub fn parse_ascii_grid<R: BufRead>(reader: R, origin: &str) -> Result<RasterGrid> {
    let mut header = [None::<f64>; 6];
    let mut lines = reader.lines().enumerate();
    let mut data_rows: Vec<(usize, String)> = Vec::new();

    for (i, line) in lines.by_ref() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut toks = trimmed.split_whitespace();
        let key = toks.next().unwrap_or_default().to_ascii_lowercase();
        match HEADER_KEYS.iter().position(|k| *k == key) {
            Some(k) => {
                let v = toks
                    .next()
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(origin, i + 1, format!("bad value for header key '{key}'")))?;
                header[k] = Some(v);
            }
            None => {
                data_rows.push((i + 1, line));
                break;
            }
        }
    }
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if !line.trim().is_empty() {
            data_rows.push((i + 1, line));
        }
    }

    let mut vals = [0.0; 6];
    for (k, v) in header.iter().enumerate() {
        vals[k] = v.ok_or_else(|| Error::parse(origin, 1, format!("missing header key '{}'", HEADER_KEYS[k])))?;
    }
    let [ncols, nrows, xll, yll, cellsize, nodata] = vals;
    if ncols < 1.0 || nrows < 1.0 || ncols.fract() != 0.0 || nrows.fract() != 0.0 {
        return Err(Error::parse(origin, 1, "ncols and nrows must be positive integers"));
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);
    if data_rows.len() != nrows {
        return Err(Error::parse(
            origin,
            data_rows.last().map(|r| r.0).unwrap_or(1),
            format!("expected {nrows} data rows, found {}", data_rows.len()),
        ));
    }
    let mut values = Vec::with_capacity(ncols * nrows);
    for (row, (line_no, line)) in data_rows.iter().enumerate() {
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(origin, *line_no, format!("row {row}: cannot parse '{tok}'")))?;
            values.push(v);
        }
        let got = values.len() - before;
        if got != ncols {
            return Err(Error::parse(
                origin,
                *line_no,
                format!("row {row}: expected {ncols} values, found {got}"),
            ));
        }
    }
    RasterGrid::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

pub fn write_ascii_grid(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_grid(grid, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_grid<W: Write>(grid: &RasterGrid, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ncols {}", grid.ncols)?;
    writeln!(w, "nrows {}", grid.nrows)?;
    writeln!(w, "xllcorner {}", grid.xllcorner)?;
    writeln!(w, "yllcorner {}", grid.yllcorner)?;
    writeln!(w, "cellsize {}", grid.cellsize)?;
    writeln!(w, "NODATA_value {}", grid.nodata_value)?;
    let mut line = String::new();
    for row in grid.values.chunks(grid.ncols) {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            if grid.is_nodata(*v) {
                line.push_str(&grid.nodata_value.to_string());
            } else {
                line.push_str(&v.to_string());
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Continuous predictor bands plus a forest-type band, all aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterStack {
    bands: Vec<(String, RasterGrid)>,
    forest_type: RasterGrid,
}

impl RasterStack {
    pub fn new(bands: Vec<(String, RasterGrid)>, forest_type: RasterGrid) -> Result<Self> {
        for (name, b) in &bands {
            if !b.same_georef(&forest_type) {
                return Err(Error::GeoMismatch(format!("band '{name}' is not aligned with the forest-type band")));
            }
        }
        if let Some(v) = forest_type
            .values
            .iter()
            .find(|v| !forest_type.is_nodata(**v) && ForestType::from_code(**v).is_none())
        {
            return Err(Error::InvalidConfig(format!("forest-type band holds invalid code {v}")));
        }
        Ok(Self { bands, forest_type })
    }

    pub fn bands(&self) -> &[(String, RasterGrid)] {
        &self.bands
    }

    pub fn band_names(&self) -> Vec<String> {
        self.bands.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn band(&self, name: &str) -> Result<&RasterGrid> {
        self.bands
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, g)| g)
            .ok_or_else(|| Error::MissingBand(name.to_string()))
    }

    pub fn forest_type(&self) -> &RasterGrid {
        &self.forest_type
    }

    /// Template grid carrying the shared georeferencing.
    pub fn geometry(&self) -> &RasterGrid {
        &self.forest_type
    }

    pub fn crop(&self, row0: usize, col0: usize, nrows: usize, ncols: usize) -> Result<RasterStack> {
        let bands = self
            .bands
            .iter()
            .map(|(n, g)| Ok((n.clone(), g.crop(row0, col0, nrows, ncols)?)))
            .collect::<Result<Vec<_>>>()?;
        RasterStack::new(bands, self.forest_type.crop(row0, col0, nrows, ncols)?)
    }
}

const STACK_MANIFEST: &str = "stack.json";
const FOREST_TYPE_FILE: &str = "forest_type.asc";

#[derive(Serialize, Deserialize)]
struct StackManifest {
    version: u32,
    bands: Vec<String>,
    forest_type: String,
}

/// Write `<band>.asc` files plus a `stack.json` manifest into `dir`.
pub fn write_stack(stack: &RasterStack, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, grid) in &stack.bands {
        write_ascii_grid(grid, dir.join(format!("{name}.asc")))?;
    }
    write_ascii_grid(&stack.forest_type, dir.join(FOREST_TYPE_FILE))?;
    let manifest = StackManifest {
        version: 1,
        bands: stack.band_names(),
        forest_type: FOREST_TYPE_FILE.into(),
    };
    let path = dir.join(STACK_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))
}

pub fn read_stack(dir: impl AsRef<Path>) -> Result<RasterStack> {
    let dir = dir.as_ref();
    let path = dir.join(STACK_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: StackManifest = serde_json::from_str(&text)?;
    if manifest.version != 1 {
        return Err(Error::Version {
            found: manifest.version,
            expected: 1,
        });
    }
    let bands = manifest
        .bands
        .iter()
        .map(|b| Ok((b.clone(), read_ascii_grid(dir.join(format!("{b}.asc")))?)))
        .collect::<Result<Vec<_>>>()?;
    let ft = read_ascii_grid(dir.join(&manifest.forest_type))?;
    RasterStack::new(bands, ft)
}
