//! Contour and field CSV files.
//!
//! Format: a `theta,value` header followed by one row per grid point, theta
//! strictly increasing and value in [0, 1]. Numbers are written rounded to 12
//! significant digits in the shortest form that reproduces them (exponent
//! notation below 1e-4), so reading and rewriting a canonically formatted
//! file is byte-identical.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::contour::{Contour, GridFunction, ParameterGrid, ScoreField};
use crate::error::{FusionError, Result};

pub const CONTOUR_HEADER: &str = "theta,value";
pub const CURVE_HEADER: &str = "x,F";

/// Canonical 12-significant-digit rendering of `x`.
pub fn format_number(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("exponent form parses");
    if rounded == 0.0 {
        // also folds -0
        return "0".to_owned();
    }
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        return format!("{rounded:e}");
    }
    format!("{rounded}")
}

fn parse_error(line: usize, msg: impl Into<String>) -> FusionError {
    FusionError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a field file; values must lie in [0, 1].
pub fn read_field<R: Read>(reader: R) -> Result<ScoreField> {
    let mut lines = BufReader::new(reader).lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if header.trim() != CONTOUR_HEADER {
                return Err(parse_error(1, format!("expected header `{CONTOUR_HEADER}`, got `{}`", header.trim())));
            }
        }
        None => return Err(parse_error(1, "empty file")),
    }

    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| parse_error(lineno, "expected two comma-separated columns"))?;
        let theta: f64 = t
            .trim()
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad theta `{}`", t.trim())))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad value `{}`", v.trim())))?;
        if !theta.is_finite() {
            return Err(parse_error(lineno, format!("non-finite theta {theta}")));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(parse_error(lineno, format!("value {value} outside [0, 1]")));
        }
        if let Some(&prev) = thetas.last() {
            if theta <= prev {
                return Err(parse_error(lineno, format!("theta {theta} does not increase (previous {prev})")));
            }
        }
        thetas.push(theta);
        values.push(value);
    }
    if thetas.len() < 2 {
        return Err(parse_error(thetas.len() + 1, format!("need at least 2 rows, got {}", thetas.len())));
    }
    ScoreField::new(ParameterGrid::new(thetas)?, values)
}

/// Reads a contour file; the values must also attain 1.
pub fn read_contour<R: Read>(reader: R) -> Result<Contour> {
    let field = read_field(reader)?;
    let grid = field.grid().clone();
    Contour::new(grid, field.into_values())
}

pub fn read_contour_path(path: &Path) -> Result<Contour> {
    read_contour(fs::File::open(path)?)
}

pub fn read_field_path(path: &Path) -> Result<ScoreField> {
    read_field(fs::File::open(path)?)
}

pub fn write_grid_function<W: Write, F: GridFunction + ?Sized>(mut w: W, f: &F) -> Result<()> {
    writeln!(w, "{CONTOUR_HEADER}")?;
    for (t, v) in f.grid().points().iter().zip(f.values()) {
        writeln!(w, "{},{}", format_number(*t), format_number(*v))?;
    }
    Ok(())
}

pub fn grid_function_to_string<F: GridFunction + ?Sized>(f: &F) -> String {
    let mut buf = Vec::new();
    write_grid_function(&mut buf, f).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

/// `x,F` rows of a calibration curve.
pub fn curve_to_string(points: &[(f64, f64)]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for (x, f) in points {
        s.push_str(&format_number(*x));
        s.push(',');
        s.push_str(&format_number(*f));
        s.push('\n');
    }
    s
}

/// Writes `contents` to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| FusionError::Io(std::io::Error::other(format!("not a file path: {}", path.display()))))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
