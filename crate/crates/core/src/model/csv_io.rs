//! Cluster dataset CSV format.
//!
//! ```text
//! timestamp,outdoor_c,solar_kw,zone1_temp_c,zone1_load_kw,…,zoneK_temp_c,zoneK_load_kw
//! ```
//!
//! Rows are strictly increasing in time at a fixed interval; the first `M` rows
//! are lag history. Timestamps are ISO-8601 (`YYYY-MM-DD HH:MM[:SS]`, optional
//! `T` separator) or plain numbers of seconds.

use std::io::{Read, Write};

use chrono::{NaiveDateTime, TimeDelta};
use nalgebra::{DMatrix, DVector};

use super::{ClusterDataset, ModelError};
use crate::fmt17;

const FIXED: [&str; 3] = ["timestamp", "outdoor_c", "solar_kw"];
const TIME_FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

fn parse_timestamp(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<f64>() {
        return secs.is_finite().then_some(secs);
    }
    TIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|t| t.and_utc().timestamp() as f64)
}

fn header_zones(header: &csv::StringRecord) -> Result<usize, ModelError> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 5 || (cols.len() - 3) % 2 != 0 {
        return Err(ModelError::Csv { line: 1, message: format!("expected 3 + 2K columns, found {}", cols.len()) });
    }
    for (i, name) in FIXED.iter().enumerate() {
        if !cols[i].eq_ignore_ascii_case(name) {
            return Err(ModelError::Csv { line: 1, message: format!("column {} must be `{name}`, found `{}`", i + 1, cols[i]) });
        }
    }
    let zones = (cols.len() - 3) / 2;
    for z in 0..zones {
        for (offset, suffix) in [(0, "temp_c"), (1, "load_kw")] {
            let want = format!("zone{}_{suffix}", z + 1);
            let got = cols[3 + 2 * z + offset];
            if !got.eq_ignore_ascii_case(&want) {
                return Err(ModelError::Csv { line: 1, message: format!("expected column `{want}`, found `{got}`") });
            }
        }
    }
    Ok(zones)
}

/// Reads and validates a dataset; `order` rows at the top become lag history.
pub fn read_dataset_csv<R: Read>(reader: R, order: usize) -> Result<ClusterDataset, ModelError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| ModelError::Csv { line: 1, message: e.to_string() })?.clone();
    let zones = header_zones(&header)?;
    let width = 3 + 2 * zones;

    let mut times = Vec::new();
    let mut cells: Vec<f64> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| ModelError::Csv { line, message: e.to_string() })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        for col in 0..width {
            let raw = record.get(col).unwrap_or("");
            let name = header.get(col).unwrap_or("?").trim();
            if raw.is_empty() {
                return Err(ModelError::Csv { line, message: format!("missing value in column `{name}`") });
            }
            if col == 0 {
                let t = parse_timestamp(raw)
                    .ok_or_else(|| ModelError::Csv { line, message: format!("unparseable timestamp `{raw}`") })?;
                times.push(t);
            } else {
                let v: f64 = raw
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| ModelError::Csv { line, message: format!("invalid number `{raw}` in column `{name}`") })?;
                cells.push(v);
            }
        }
        if record.len() > width {
            return Err(ModelError::Csv { line, message: format!("{} cells, header has {width}", record.len()) });
        }
    }

    let rows = times.len();
    if rows < order + 1 {
        return Err(ModelError::TooShort { periods: rows.saturating_sub(order), required: 1 });
    }
    let step = times[1.min(rows - 1)] - times[0];
    for (i, pair) in times.windows(2).enumerate() {
        let line = i + 3;
        let d = pair[1] - pair[0];
        if d <= 0.0 {
            return Err(ModelError::Csv { line, message: "timestamps must be strictly increasing".into() });
        }
        if (d - step).abs() > 1e-6 * step.abs().max(1.0) {
            return Err(ModelError::Csv { line, message: format!("irregular interval: {d} s, expected {step} s (gap?)") });
        }
    }
    let dt_minutes = if rows > 1 { step / 60.0 } else { 0.0 };

    let per_row = width - 1;
    let at = |r: usize, c: usize| cells[r * per_row + c];
    ClusterDataset::new(
        order,
        dt_minutes,
        DMatrix::from_fn(rows, zones, |r, z| at(r, 2 + 2 * z)),
        DMatrix::from_fn(rows, zones, |r, z| at(r, 3 + 2 * z)),
        DVector::from_fn(rows, |r, _| at(r, 0)),
        DVector::from_fn(rows, |r, _| at(r, 1)),
    )
}

/// Writes a dataset with ISO timestamps starting at `start`.
pub fn write_dataset_csv<W: Write>(dataset: &ClusterDataset, writer: W, start: NaiveDateTime) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| ModelError::Csv { line: 0, message: e.to_string() };
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    for z in 1..=dataset.zones() {
        header.push(format!("zone{z}_temp_c"));
        header.push(format!("zone{z}_load_kw"));
    }
    w.write_record(&header).map_err(io)?;
    let step = TimeDelta::milliseconds((dataset.dt_minutes() * 60_000.0).round() as i64);
    let rows = dataset.tau_in().nrows();
    for r in 0..rows {
        let ts = start + step * r as i32;
        let mut rec = vec![ts.format("%Y-%m-%d %H:%M:%S").to_string(), fmt17(dataset.tau_out()[r]), fmt17(dataset.h_rad()[r])];
        for z in 0..dataset.zones() {
            rec.push(fmt17(dataset.tau_in()[(r, z)]));
            rec.push(fmt17(dataset.h_load()[(r, z)]));
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| ModelError::Csv { line: 0, message: e.to_string() })
}

/// Default timestamp origin for generated files.
pub fn default_start() -> NaiveDateTime {
    NaiveDateTime::parse_from_str("2014-01-01 00:00:00", TIME_FORMATS[0]).expect("valid literal")
}
