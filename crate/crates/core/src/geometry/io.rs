//! CSV encodings for point clouds.
//!
//! Radar clouds use the header `x,y,z,range_rate` (the last column may be
//! omitted, e.g. for aerial laser scans); labeled clouds use `x,y,z,label`
//! with labels `L`, `R` or `S`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{BehaviorLabel, LabeledCloud, LabeledPoint, PointCloud, RadarPoint};
use crate::{Error, Result};

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file)))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

/// Maps header names to column positions, failing on missing required columns.
pub(crate) fn column_map<const N: usize>(
    path: &Path,
    headers: &csv::StringRecord,
    required: [&str; N],
) -> Result<[usize; N]> {
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(required) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing column `{name}`")))?;
    }
    Ok(out)
}

pub(crate) fn parse_f64(path: &Path, record: &csv::StringRecord, col: usize, name: &str) -> Result<f64> {
    let line = record.position().map(|p| p.line()).unwrap_or(0);
    let field = record
        .get(col)
        .ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))?;
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("`{name}`: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("`{name}` is not finite")));
    }
    Ok(v)
}

pub(crate) fn write_header(wtr: &mut csv::Writer<BufWriter<File>>, path: &Path, header: &[&str]) -> Result<()> {
    wtr.write_record(header).map_err(|e| csv_error(path, e))
}

pub(crate) fn finish(wtr: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    let mut inner = wtr.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Reads a radar cloud; a missing `range_rate` column reads as zero.
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let [cx, cy, cz] = column_map(path, &headers, ["x", "y", "z"])?;
    let crr = headers.iter().position(|h| h == "range_rate");
    let mut cloud = PointCloud::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let range_rate = match crr {
            Some(c) => parse_f64(path, &record, c, "range_rate")?,
            None => 0.0,
        };
        cloud.push(RadarPoint::new(
            parse_f64(path, &record, cx, "x")?,
            parse_f64(path, &record, cy, "y")?,
            parse_f64(path, &record, cz, "z")?,
            range_rate,
        ));
    }
    Ok(cloud)
}

pub fn write_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv_writer(path)?;
    write_header(&mut wtr, path, &["x", "y", "z", "range_rate"])?;
    for p in cloud {
        wtr.serialize((p.x, p.y, p.z, p.range_rate)).map_err(|e| csv_error(path, e))?;
    }
    finish(wtr, path)
}

pub fn read_labeled_cloud(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let [cx, cy, cz, cl] = column_map(path, &headers, ["x", "y", "z", "label"])?;
    let mut cloud = LabeledCloud::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let code = record.get(cl).unwrap_or("");
        let label = BehaviorLabel::from_code(code)
            .ok_or_else(|| Error::parse(path, line, format!("unknown label {code:?}")))?;
        cloud.push(LabeledPoint::new(
            parse_f64(path, &record, cx, "x")?,
            parse_f64(path, &record, cy, "y")?,
            parse_f64(path, &record, cz, "z")?,
            label,
        ));
    }
    Ok(cloud)
}

pub fn write_labeled_cloud(path: impl AsRef<Path>, cloud: &LabeledCloud) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv_writer(path)?;
    write_header(&mut wtr, path, &["x", "y", "z", "label"])?;
    for p in cloud {
        wtr.serialize((p.x, p.y, p.z, p.label.code().to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    finish(wtr, path)
}
