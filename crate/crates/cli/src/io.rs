//! Density readers (headerless CSV, PGM) and CSV writers.
//!
//! Densities are stored in grid order: axis 0 is x, and in 2D the linear
//! index is `ix * ny + iy`. Files are laid out the other way round (one row
//! per y), so readers and writers transpose.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityFile {
    pub n_space: Vec<usize>,
    pub lengths: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Deserialize)]
struct Sidecar {
    lengths: Vec<f64>,
}

fn unreadable(path: &Path, reason: impl Into<String>) -> CliError {
    CliError::Unreadable {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// `rho0.csv` looks for `rho0.json` next to it.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads a density from CSV or PGM (picked by extension) plus its optional
/// sidecar. Without a sidecar every axis has length 1.
pub fn read_density(path: &Path) -> Result<DensityFile, CliError> {
    let bytes = fs::read(path).map_err(|e| unreadable(path, e.to_string()))?;
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let (n_space, values) = if is_pgm {
        parse_pgm(&bytes).map_err(|r| unreadable(path, r))?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| unreadable(path, "not UTF-8 text"))?;
        parse_csv(&text).map_err(|r| unreadable(path, r))?
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(unreadable(path, format!("densities must be finite and non-negative, found {v}")));
    }
    let side = sidecar_path(path);
    let lengths = if side.exists() && side != path {
        let text = fs::read_to_string(&side).map_err(|e| unreadable(&side, e.to_string()))?;
        let s: Sidecar = serde_json::from_str(&text).map_err(|e| unreadable(&side, e.to_string()))?;
        if s.lengths.len() != n_space.len() {
            return Err(CliError::Shape(format!(
                "{} gives {} lengths for a {}D density",
                side.display(),
                s.lengths.len(),
                n_space.len()
            )));
        }
        s.lengths
    } else {
        vec![1.0; n_space.len()]
    };
    Ok(DensityFile {
        n_space,
        lengths,
        values,
    })
}

/// One value per line gives a 1D density; otherwise rows are y and columns x.
pub fn parse_csv(text: &str) -> Result<(Vec<usize>, Vec<f64>), String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", n + 1))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no values".into());
    }
    let nx = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nx) {
        return Err(format!("row {} has {} values, expected {nx}", i + 1, r.len()));
    }
    if nx == 1 {
        return Ok((vec![rows.len()], rows.into_iter().map(|r| r[0]).collect()));
    }
    Ok(transpose_rows(&rows))
}

fn transpose_rows(rows: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    let (ny, nx) = (rows.len(), rows[0].len());
    let mut values = vec![0.0; nx * ny];
    for (iy, row) in rows.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            values[ix * ny + iy] = *v;
        }
    }
    (vec![nx, ny], values)
}

/// P2 or P5 greymap, scaled so that `maxval` maps to 1.
pub fn parse_pgm(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>), String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|e| format!("bad header field {s:?}: {e}"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported header {width}x{height} maxval {maxval}"));
    }
    let count = width * height;
    let raw: Vec<usize> = match magic.as_str() {
        "P2" => (0..count).map(|_| token().and_then(num)).collect::<Result<_, _>>()?,
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let start = pos + 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            let data = bytes
                .get(start..start + need)
                .ok_or_else(|| format!("raster has {} bytes, expected {need}", bytes.len().saturating_sub(start)))?;
            if wide {
                data.chunks(2).map(|c| (c[0] as usize) << 8 | c[1] as usize).collect()
            } else {
                data.iter().map(|b| *b as usize).collect()
            }
        }
        m => return Err(format!("unsupported magic {m:?}")),
    };
    let rows: Vec<Vec<f64>> = raw
        .chunks(width)
        .map(|r| r.iter().map(|v| *v as f64 / maxval as f64).collect())
        .collect();
    Ok(transpose_rows(&rows))
}

/// 17 significant digits, enough to read every value back bit for bit.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns holding counts or flags, written without an exponent.
const INTEGER_COLUMNS: [&str; 3] = ["index", "iterations", "converged"];

/// A CSV with a header row and numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        let integral: Vec<bool> = self.header.iter().map(|h| INTEGER_COLUMNS.contains(&h.as_str())).collect();
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if integral[i] {
                    let _ = write!(out, "{}", *v as i64);
                } else {
                    out.push_str(&fmt_value(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.to_csv())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| unreadable(path, e.to_string()))?;
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| unreadable(path, "empty file"))?
            .split(',')
            .map(str::to_owned)
            .collect();
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| unreadable(path, e.to_string()))?;
        Ok(Self { header, rows })
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_1d_and_2d() {
        assert_eq!(parse_csv("1\n2.5\n\n3\n").unwrap(), (vec![3], vec![1.0, 2.5, 3.0]));
        // Two rows (y), three columns (x).
        let (n, v) = parse_csv("1,2,3\n4,5,6\n").unwrap();
        assert_eq!(n, vec![3, 2]);
        assert_eq!(v, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert!(parse_csv("1,2\n3\n").is_err());
        assert!(parse_csv("a\n").is_err());
        assert!(parse_csv("\n").is_err());
    }

    #[test]
    fn pgm_ascii_and_binary_agree() {
        let p2 = b"P2\n# comment\n3 2\n255\n0 51 255\n102 0 0\n";
        let mut p5 = b"P5 3 2 255\n".to_vec();
        p5.extend_from_slice(&[0, 51, 255, 102, 0, 0]);
        let a = parse_pgm(p2).unwrap();
        assert_eq!(a, parse_pgm(&p5).unwrap());
        assert_eq!(a.0, vec![3, 2]);
        assert_eq!(a.1, vec![0.0, 0.4, 0.2, 0.0, 1.0, 0.0]);
        let mut wide = b"P5 1 1 65535\n".to_vec();
        wide.extend_from_slice(&[0x80, 0x00]);
        assert_eq!(parse_pgm(&wide).unwrap().1, vec![32768.0 / 65535.0]);
        assert!(parse_pgm(b"P5 2 2 255\n\x01").is_err());
        assert!(parse_pgm(b"P3 1 1 255\n0").is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, -7.25e12, f64::MIN_POSITIVE] {
            assert_eq!(fmt_value(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
