//! Results CSV and the append-only checkpoint used for resuming.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::run::{PointRecord, SweepResult};
use crate::error::{Error, Result};
use crate::signal::Shape;

pub const RESULTS_HEADER: &str = "m_c,shape,f_m_hz,depth_pct,pst,below_floor,wall_time_s";

/// Exact identity of a grid cell (bit patterns of the float coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointKey {
    m_c: u64,
    shape: Shape,
    f_m: u64,
    depth: u64,
}

impl PointKey {
    pub fn new(m_c: f64, shape: Shape, f_m: f64, depth: f64) -> Self {
        Self {
            m_c: m_c.to_bits(),
            shape,
            f_m: f_m.to_bits(),
            depth: depth.to_bits(),
        }
    }
}

fn format_row(r: &PointRecord) -> String {
    // `{}` on f64 prints the shortest representation that parses back exactly
    format!(
        "{},{},{},{},{},{},{:.3}",
        r.m_c, r.shape, r.f_m, r.depth, r.pst, r.below_floor, r.wall_time
    )
}

fn parse_row(line: &str) -> Result<PointRecord> {
    let bad = || Error::Plan(format!("malformed results row: {line}"));
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 7 {
        return Err(bad());
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    Ok(PointRecord {
        m_c: num(cols[0])?,
        shape: cols[1].parse()?,
        f_m: num(cols[2])?,
        depth: num(cols[3])?,
        pst: num(cols[4])?,
        below_floor: cols[5].parse().map_err(|_| bad())?,
        wall_time: num(cols[6])?,
    })
}

pub fn write_results<W: Write>(records: &[PointRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(w, "{}", format_row(r))?;
    }
    w.flush()
}

pub fn write_results_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(&result.records, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Reads a results file; `#` lines are ignored.
pub fn read_results<R: Read>(r: R) -> Result<Vec<PointRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line.map_err(|e| Error::io("<results>", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == RESULTS_HEADER {
            continue;
        }
        out.push(parse_row(line)?);
    }
    Ok(out)
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<PointRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(file)
}

/// Append-only results file tagged with the plan fingerprint.
#[derive(Debug)]
pub struct Checkpoint {
    path: PathBuf,
    file: File,
}

impl Checkpoint {
    /// Opens or creates `path`. Returns the records already present. A file
    /// written for a different plan is refused.
    pub fn open(path: impl AsRef<Path>, fingerprint: &str) -> Result<(Self, Vec<PointRecord>)> {
        let path = path.as_ref().to_path_buf();
        let tag = format!("# plan {fingerprint}");
        let mut records = Vec::new();
        let exists = path.exists() && std::fs::metadata(&path).map(|m| m.len() > 0).unwrap_or(false);
        if exists {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let first = text.lines().next().unwrap_or_default();
            if first != tag {
                return Err(Error::Plan(format!(
                    "checkpoint {} was written for a different plan",
                    path.display()
                )));
            }
            // a torn final line from an interrupted write is dropped
            let complete = if text.ends_with('\n') {
                &text[..]
            } else {
                &text[..text.rfind('\n').map_or(0, |i| i + 1)]
            };
            records = read_results(complete.as_bytes())?;
            if complete.len() != text.len() {
                std::fs::write(&path, complete).map_err(|e| Error::io(&path, e))?;
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if !exists {
            writeln!(file, "{tag}\n{RESULTS_HEADER}").map_err(|e| Error::io(&path, e))?;
        }
        Ok((Self { path, file }, records))
    }

    pub fn append(&mut self, record: &PointRecord) -> Result<()> {
        writeln!(self.file, "{}", format_row(record))
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}
