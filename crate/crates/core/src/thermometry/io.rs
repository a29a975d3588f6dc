//! Spot profiles as CSV: `ion_index,axis,pixel,counts`, header required.

use std::io::{Read, Write};

use super::{Axis, ThermometryError};

pub const HEADER: [&str; 4] = ["ion_index", "axis", "pixel", "counts"];

/// Raw profile of one ion along one axis, samples as `(pixel, counts)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotProfile {
    pub ion_index: usize,
    pub axis: Axis,
    pub profile: Vec<(f64, f64)>,
}

fn csv_error(line: u64, message: impl Into<String>) -> ThermometryError {
    ThermometryError::Csv { line, message: message.into() }
}

fn parse_axis(s: &str) -> Option<Axis> {
    match s.to_ascii_lowercase().as_str() {
        "axial" | "z" => Some(Axis::Axial),
        "radial" | "r" => Some(Axis::Radial),
        _ => None,
    }
}

/// Reads profiles grouped by `(ion_index, axis)` in order of first
/// appearance.
pub fn read_spot_profiles<R: Read>(reader: R) -> Result<Vec<SpotProfile>, ThermometryError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(1, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != HEADER {
        return Err(csv_error(1, format!("expected header `{}`, found `{}`", HEADER.join(","), names.join(","))));
    }
    let mut out: Vec<SpotProfile> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let ion: usize = record[0].parse().map_err(|_| csv_error(line, format!("bad ion_index `{}`", &record[0])))?;
        let axis = parse_axis(&record[1]).ok_or_else(|| csv_error(line, format!("bad axis `{}`", &record[1])))?;
        let pixel: f64 = record[2].parse().map_err(|_| csv_error(line, format!("bad pixel `{}`", &record[2])))?;
        let counts: f64 = record[3].parse().map_err(|_| csv_error(line, format!("bad counts `{}`", &record[3])))?;
        if !pixel.is_finite() || !counts.is_finite() {
            return Err(csv_error(line, "non-finite value"));
        }
        match out.iter_mut().find(|p| p.ion_index == ion && p.axis == axis) {
            Some(p) => p.profile.push((pixel, counts)),
            None => out.push(SpotProfile { ion_index: ion, axis, profile: vec![(pixel, counts)] }),
        }
    }
    Ok(out)
}

/// Writes profiles in the format read by [`read_spot_profiles`].
pub fn write_spot_profiles<W: Write>(writer: W, profiles: &[SpotProfile]) -> Result<(), ThermometryError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let err = |e: csv::Error| csv_error(0, e.to_string());
    w.write_record(HEADER).map_err(err)?;
    for p in profiles {
        for &(pixel, counts) in &p.profile {
            w.write_record([p.ion_index.to_string(), p.axis.name().to_string(), pixel.to_string(), counts.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| csv_error(0, e.to_string()))
}
