//! CSV and JSON point-set files.
//!
//! CSV: one point per row, `d` comma separated coordinates, optional first
//! line `# d=<d> N=<N>`; other `#` lines are comments.
//! JSON: `{"d": 3, "N": 2, "points": [[1,0,0],[0,1,0]]}`.
//!
//! Both writers emit shortest round-trip decimal representations, so a
//! save/load cycle reproduces every coordinate bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PointSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonPointSet {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    points: Vec<Vec<f64>>,
}

pub fn load_pointset(path: &Path, format: Format) -> Result<PointSet> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pointset(&text, format)
}

pub fn save_pointset(x: &PointSet, path: &Path, format: Format) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_pointset(x, &mut file, format).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn write_pointset<W: Write>(x: &PointSet, out: &mut W, format: Format) -> Result<()> {
    let io_err = |source| Error::Io {
        path: "<stream>".into(),
        source,
    };
    match format {
        Format::Json => {
            let doc = JsonPointSet {
                d: x.dim(),
                n: x.len(),
                points: x.points().map(<[f64]>::to_vec).collect(),
            };
            serde_json::to_writer(&mut *out, &doc).map_err(|e| io_err(e.into()))?;
            writeln!(out).map_err(io_err)
        }
        Format::Csv => {
            writeln!(out, "# d={} N={}", x.dim(), x.len()).map_err(io_err)?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut *out);
            for p in x.points() {
                w.write_record(p.iter().map(|v| v.to_string()))
                    .map_err(|e| io_err(e.into()))?;
            }
            w.flush().map_err(io_err)
        }
    }
}

pub fn parse_pointset(text: &str, format: Format) -> Result<PointSet> {
    match format {
        Format::Json => parse_json(text),
        Format::Csv => parse_csv(text),
    }
}

fn parse_json(text: &str) -> Result<PointSet> {
    let doc: JsonPointSet = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.points.len() != doc.n {
        return Err(Error::Shape(format!(
            "header says N={} but {} points are listed",
            doc.n,
            doc.points.len()
        )));
    }
    if let Some((i, p)) = doc.points.iter().enumerate().find(|(_, p)| p.len() != doc.d) {
        return Err(Error::Shape(format!(
            "point {} has {} coordinates, expected d={}",
            i + 1,
            p.len(),
            doc.d
        )));
    }
    PointSet::from_columns(doc.d, doc.points.concat())
}

/// Reads `# d=<d> N=<N>` if the first non-blank line is such a header.
fn csv_header(text: &str) -> Result<(Option<usize>, Option<usize>)> {
    let Some((lineno, line)) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
    else {
        return Ok((None, None));
    };
    let Some(rest) = line.trim().strip_prefix('#') else {
        return Ok((None, None));
    };
    let (mut d, mut n) = (None, None);
    for token in rest.split_whitespace() {
        let Some((key, value)) = token.split_once('=') else {
            continue;
        };
        let parsed = || {
            value.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: line.find(token).map_or(1, |c| c + 1),
                message: format!("bad header value {token:?}"),
            })
        };
        match key {
            "d" => d = Some(parsed()?),
            "N" => n = Some(parsed()?),
            _ => {}
        }
    }
    Ok((d, n))
}

fn parse_csv(text: &str) -> Result<PointSet> {
    let (header_d, header_n) = csv_header(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut dim = header_d;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 1,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Shape(format!(
                "line {line} has {} entries, expected d={expected}",
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Shape("file contains no points".into()));
    }
    if let Some(n) = header_n {
        if n != rows {
            return Err(Error::Shape(format!("header says N={n} but {rows} rows were read")));
        }
    }
    PointSet::from_columns(dim.unwrap_or(1), data)
}
