//! Plot-table CSV reading and writing.
//!
//! Layout: `id,x,y,ba,forest_type,<pred1>,...`. Every column after the
//! reserved five is a continuous predictor, in header order. Floats are
//! written in shortest round-trip form, so a read/write cycle is lossless.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ForestType, Plot, PlotTable};

pub const RESERVED_COLUMNS: [&str; 5] = ["id", "x", "y", "ba", "forest_type"];

pub fn read_plots_csv(path: impl AsRef<Path>) -> Result<PlotTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_plots(file, &path.display().to_string(), &name)
}

/// Parse plot CSV from any reader; `origin` labels error messages.
pub fn parse_plots<R: Read>(reader: R, origin: &str, name: &str) -> Result<PlotTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < RESERVED_COLUMNS.len() + 1 {
        return Err(Error::parse(origin, 1, "header needs id,x,y,ba,forest_type and at least one predictor"));
    }
    for (i, want) in RESERVED_COLUMNS.iter().enumerate() {
        if !header[i].eq_ignore_ascii_case(want) {
            return Err(Error::parse(
                origin,
                1,
                format!("column {} must be '{want}', found '{}'", i + 1, &header[i]),
            ));
        }
    }
    let schema: Vec<String> = header.iter().skip(RESERVED_COLUMNS.len()).map(str::to_string).collect();

    let mut plots = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::parse(
                origin,
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            record[k].parse::<f64>().map_err(|_| {
                Error::parse(origin, line, format!("column '{}': cannot parse '{}'", &header[k], &record[k]))
            })
        };
        let forest_type: ForestType = record[4].parse().map_err(|e: String| Error::parse(origin, line, e))?;
        let features = (RESERVED_COLUMNS.len()..record.len()).map(num).collect::<Result<Vec<_>>>()?;
        plots.push(Plot {
            id: record[0].to_string(),
            x: num(1)?,
            y: num(2)?,
            ba: num(3)?,
            features,
            forest_type,
        });
    }
    PlotTable::new(name, schema, plots)
}

pub fn write_plots_csv(table: &PlotTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_plots(table, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_plots<W: Write>(table: &PlotTable, w: &mut W) -> std::io::Result<()> {
    let mut header: Vec<&str> = RESERVED_COLUMNS.to_vec();
    header.extend(table.schema().iter().map(String::as_str));
    writeln!(w, "{}", header.join(","))?;
    for p in table.plots() {
        write!(w, "{},{},{},{},{}", p.id, p.x, p.y, p.ba, p.forest_type)?;
        for v in &p.features {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
