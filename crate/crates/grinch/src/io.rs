//! Vector file ingestion and export.
//!
//! Two formats are supported:
//! - TSV: one row per point, `id<TAB>label<TAB>v1<TAB>...<TAB>vd`. A label
//!   of -1 marks an unlabeled point.
//! - GRVC binary: magic `GRVC`, little-endian u32 point count and
//!   dimension, then n*d f32 values, then n i32 labels (-1 = unlabeled).
//!
//! Ground truth is returned only when every point carries a label.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::eval::GroundTruth;
use crate::tree::DataPoint;

const GRVC_MAGIC: &[u8; 4] = b"GRVC";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("file contains no points")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed header: {0}")]
    BadHeader(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorFormat {
    Tsv,
    Grvc,
}

pub fn load_vectors(
    path: impl AsRef<Path>,
    format: VectorFormat,
) -> Result<(Vec<DataPoint>, Option<GroundTruth>), DatasetError> {
    match format {
        VectorFormat::Tsv => read_tsv(path),
        VectorFormat::Grvc => read_grvc(path),
    }
}

pub fn save_vectors(
    path: impl AsRef<Path>,
    format: VectorFormat,
    points: &[DataPoint],
) -> Result<(), DatasetError> {
    match format {
        VectorFormat::Tsv => write_tsv(path, points),
        VectorFormat::Grvc => write_grvc(path, points),
    }
}

pub fn read_tsv(
    path: impl AsRef<Path>,
) -> Result<(Vec<DataPoint>, Option<GroundTruth>), DatasetError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DatasetError::Parse {
                line: line_no,
                message: "bad point id".to_string(),
            })?;
        let label: i64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DatasetError::Parse {
                line: line_no,
                message: "bad label".to_string(),
            })?;
        let mut vector = Vec::new();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| DatasetError::Parse {
                line: line_no,
                message: format!("bad value {field:?}"),
            })?;
            vector.push(v);
        }
        if vector.is_empty() {
            return Err(DatasetError::Parse {
                line: line_no,
                message: "row has no vector values".to_string(),
            });
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(DatasetError::RaggedRow {
                    line: line_no,
                    expected: d,
                    found: vector.len(),
                })
            }
            _ => {}
        }
        points.push(DataPoint {
            id,
            vector,
            label: (label >= 0).then_some(label as u64),
        });
    }
    if points.is_empty() {
        return Err(DatasetError::Empty);
    }
    let gt = GroundTruth::from_points(&points);
    Ok((points, gt))
}

pub fn write_tsv(path: impl AsRef<Path>, points: &[DataPoint]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in points {
        let label = p.label.map(|l| l as i64).unwrap_or(-1);
        write!(w, "{}\t{}", p.id, label)?;
        for v in &p.vector {
            write!(w, "\t{}", v)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grvc(
    path: impl AsRef<Path>,
) -> Result<(Vec<DataPoint>, Option<GroundTruth>), DatasetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| DatasetError::BadHeader("file too short for magic".to_string()))?;
    if &magic != GRVC_MAGIC {
        return Err(DatasetError::BadHeader(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let n = read_u32(&mut r)? as usize;
    let d = read_u32(&mut r)? as usize;
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    let mut vectors = Vec::with_capacity(n);
    let mut buf = vec![0u8; d * 4];
    for _ in 0..n {
        r.read_exact(&mut buf)
            .map_err(|_| DatasetError::BadHeader("truncated vector data".to_string()))?;
        let v: Vec<f64> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        vectors.push(v);
    }
    let mut labels = Vec::with_capacity(n);
    let mut lbuf = [0u8; 4];
    for _ in 0..n {
        r.read_exact(&mut lbuf)
            .map_err(|_| DatasetError::BadHeader("truncated label data".to_string()))?;
        labels.push(i32::from_le_bytes(lbuf));
    }
    let points: Vec<DataPoint> = vectors
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (vector, label))| DataPoint {
            id: i as u64,
            vector,
            label: (label >= 0).then_some(label as u64),
        })
        .collect();
    let gt = GroundTruth::from_points(&points);
    Ok((points, gt))
}

pub fn write_grvc(path: impl AsRef<Path>, points: &[DataPoint]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = points.len() as u32;
    let d = points.first().map(|p| p.vector.len()).unwrap_or(0) as u32;
    w.write_all(GRVC_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    for p in points {
        debug_assert_eq!(p.vector.len(), d as usize);
        for v in &p.vector {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    for p in points {
        let label = p.label.map(|l| l as i32).unwrap_or(-1);
        w.write_all(&label.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, DatasetError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| DatasetError::BadHeader("truncated header".to_string()))?;
    Ok(u32::from_le_bytes(buf))
}
