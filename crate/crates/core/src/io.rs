//! Dataset files and run outputs.
//!
//! Two dataset encodings are accepted:
//!
//! * binary: `b"CVSM"`, `u32` version (1), `u32` dim, `u64` count, `u8` float
//!   width (4 or 8), then `count * dim` little-endian floats. Ids are the row
//!   indices.
//! * JSONL: one `{"id": int, "vec": [..], "text": ".."}` object per line, with
//!   `text` optional and ids strictly increasing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::StepRecord;
use crate::error::{CoverSummError, Result};
use crate::vectorspace::{Point, PointId};

pub const MAGIC: &[u8; 4] = b"CVSM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Binary,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FloatWidth {
    F32,
    F64,
}

impl FloatWidth {
    pub fn bytes(self) -> u8 {
        match self {
            FloatWidth::F32 => 4,
            FloatWidth::F64 => 8,
        }
    }
}

/// A loaded stream together with the SHA-256 of the file it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Point>,
    pub dim: usize,
    pub sha256: String,
}

fn format_err(msg: impl Into<String>) -> CoverSummError {
    CoverSummError::Format(msg.into())
}

/// Reads either encoding, detected from the leading magic bytes.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let sha256 = hex_digest(&bytes);
    let points = if bytes.starts_with(MAGIC) {
        decode_binary(&bytes)?
    } else {
        decode_jsonl(&bytes)?
    };
    let dim = points.first().map_or(0, Point::dim);
    Ok(Dataset { points, dim, sha256 })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<Point>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(format_err("missing CVSM header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let dim = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let width = bytes[20] as usize;
    if width != 4 && width != 8 {
        return Err(format_err(format!("float width must be 4 or 8, got {width}")));
    }
    if dim == 0 && count > 0 {
        return Err(format_err("zero dimension"));
    }
    let expected = (count as u128) * (dim as u128) * (width as u128);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u128 != expected {
        return Err(format_err(format!(
            "payload has {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let mut points = Vec::with_capacity(count as usize);
    for (i, row) in payload.chunks_exact((dim * width).max(1)).enumerate().take(count as usize) {
        let vec: Vec<f64> = if width == 8 {
            row.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        } else {
            row.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
        };
        if vec.iter().any(|x| !x.is_finite()) {
            return Err(format_err(format!("row {i} has a non-finite value")));
        }
        points.push(Point::new(i as PointId, vec));
    }
    Ok(points)
}

pub fn encode_binary(points: &[Point], width: FloatWidth) -> Result<Vec<u8>> {
    let dim = check_rows(points)?;
    let mut out = Vec::with_capacity(HEADER_LEN + points.len() * dim * width.bytes() as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(points.len() as u64).to_le_bytes());
    out.push(width.bytes());
    for p in points {
        for &x in &p.vec {
            match width {
                FloatWidth::F64 => out.extend_from_slice(&x.to_le_bytes()),
                FloatWidth::F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    id: PointId,
    vec: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

pub fn decode_jsonl(bytes: &[u8]) -> Result<Vec<Point>> {
    let mut points: Vec<Point> = Vec::new();
    for (lineno, line) in bytes.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line)
            .map_err(|e| format_err(format!("line {}: {e}", lineno + 1)))?;
        if let Some(prev) = points.last() {
            if row.id <= prev.id {
                return Err(format_err(format!(
                    "line {}: id {} does not increase on {}",
                    lineno + 1,
                    row.id,
                    prev.id
                )));
            }
            if row.vec.len() != prev.dim() {
                return Err(format_err(format!(
                    "line {}: vector has {} entries, expected {}",
                    lineno + 1,
                    row.vec.len(),
                    prev.dim()
                )));
            }
        } else if row.vec.is_empty() {
            return Err(format_err("line 1: empty vector"));
        }
        if row.vec.iter().any(|x| !x.is_finite()) {
            return Err(format_err(format!("line {}: non-finite value", lineno + 1)));
        }
        points.push(Point { id: row.id, vec: row.vec, text: row.text });
    }
    Ok(points)
}

pub fn encode_jsonl(points: &[Point]) -> Result<Vec<u8>> {
    check_rows(points)?;
    let mut out = Vec::new();
    for w in points.windows(2) {
        if w[1].id <= w[0].id {
            return Err(CoverSummError::InvalidInput(format!("ids must increase: {} after {}", w[1].id, w[0].id)));
        }
    }
    for p in points {
        serde_json::to_writer(&mut out, p)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn check_rows(points: &[Point]) -> Result<usize> {
    let dim = points.first().map_or(0, Point::dim);
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(CoverSummError::DimensionMismatch { expected: dim, got: p.dim() });
    }
    Ok(dim)
}

pub fn write_dataset(path: &Path, points: &[Point], format: Format, width: FloatWidth) -> Result<()> {
    let bytes = match format {
        Format::Binary => encode_binary(points, width)?,
        Format::Jsonl => encode_jsonl(points)?,
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Writes the per-step table: `t,elapsed_ns,did_rs,cum_rs,reservoir_size,drift,lambda,changed`.
pub fn write_steps_csv(w: impl Write, records: &[StepRecord]) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "t,elapsed_ns,did_rs,cum_rs,reservoir_size,drift,lambda,changed")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.step,
            r.elapsed_ns,
            r.did_reservoir_search as u8,
            r.cumulative_rs,
            r.reservoir_size,
            r.drift,
            r.lambda,
            r.summary.changed as u8
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub t: u64,
    pub ids: Vec<PointId>,
    pub distances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texts: Option<Vec<String>>,
}

/// Writes one summary per line. Texts are included when the stream carries them.
pub fn write_summaries_jsonl(w: impl Write, records: &[StepRecord], points: &[Point]) -> Result<()> {
    let has_text = points.iter().any(|p| p.text.is_some());
    let text_of = |id: PointId| -> String {
        points
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .and_then(|i| points[i].text.clone())
            .unwrap_or_default()
    };
    let mut w = BufWriter::new(w);
    for r in records {
        let line = SummaryLine {
            t: r.step,
            ids: r.summary.member_ids.clone(),
            distances: r.summary.distances.clone(),
            texts: has_text.then(|| r.summary.member_ids.iter().map(|&id| text_of(id)).collect()),
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summaries_jsonl(path: &Path) -> Result<Vec<SummaryLine>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format_err(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Summary;

    fn sample() -> Vec<Point> {
        vec![
            Point::new(0, vec![0.5, -1.25, 1e-300]),
            Point::new(1, vec![f64::MAX, 0.0, -0.0]),
            Point::new(7, vec![1.0 / 3.0, 2.0, 3.0]).with_text("great room"),
        ]
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let pts: Vec<Point> = sample().into_iter().enumerate().map(|(i, p)| Point::new(i as u64, p.vec)).collect();
        let bytes = encode_binary(&pts, FloatWidth::F64).unwrap();
        assert_eq!(bytes.len(), 21 + 3 * 3 * 8);
        let back = decode_binary(&bytes).unwrap();
        for (a, b) in pts.iter().zip(&back) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.vec), bits(&b.vec));
        }
    }

    #[test]
    fn f32_width() {
        let pts = vec![Point::new(0, vec![0.1, 0.2])];
        let back = decode_binary(&encode_binary(&pts, FloatWidth::F32).unwrap()).unwrap();
        assert_eq!(back[0].vec, vec![0.1f32 as f64, 0.2f32 as f64]);
    }

    #[test]
    fn binary_rejects_bad_payloads() {
        let pts = vec![Point::new(0, vec![1.0, 2.0])];
        let mut bytes = encode_binary(&pts, FloatWidth::F64).unwrap();
        bytes.pop();
        assert!(decode_binary(&bytes).is_err());
        let mut bytes = encode_binary(&pts, FloatWidth::F64).unwrap();
        bytes[20] = 3;
        assert!(decode_binary(&bytes).is_err());
        let mut bytes = encode_binary(&pts, FloatWidth::F64).unwrap();
        bytes[4] = 2;
        assert!(decode_binary(&bytes).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let pts = sample();
        let back = decode_jsonl(&encode_jsonl(&pts).unwrap()).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn jsonl_validation() {
        assert!(decode_jsonl(b"{\"id\":2,\"vec\":[1]}\n{\"id\":2,\"vec\":[1]}\n").is_err());
        assert!(decode_jsonl(b"{\"id\":1,\"vec\":[1]}\n{\"id\":2,\"vec\":[1,2]}\n").is_err());
        assert!(decode_jsonl(b"{\"id\":1}\n").is_err());
        assert!(decode_jsonl(b"{\"id\":1,\"vec\":[]}\n").is_err());
        assert_eq!(decode_jsonl(b"\n{\"id\":1,\"vec\":[1]}\n\n").unwrap().len(), 1);
    }

    #[test]
    fn encodings_agree() {
        let pts: Vec<Point> = (0..5).map(|i| Point::new(i, vec![i as f64 * 0.1, -(i as f64)])).collect();
        let a = decode_binary(&encode_binary(&pts, FloatWidth::F64).unwrap()).unwrap();
        let b = decode_jsonl(&encode_jsonl(&pts).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summaries_with_texts() {
        let pts = sample();
        let rec = StepRecord {
            step: 3,
            elapsed_ns: 5,
            did_reservoir_search: true,
            cumulative_rs: 1,
            reservoir_size: 3,
            drift: 0.0,
            lambda: 1.0,
            summary: Summary { step: 3, member_ids: vec![7, 0], distances: vec![0.1, 0.2], changed: true },
        };
        let mut buf = Vec::new();
        write_summaries_jsonl(&mut buf, std::slice::from_ref(&rec), &pts).unwrap();
        let line: SummaryLine = serde_json::from_slice(buf.trim_ascii_end()).unwrap();
        assert_eq!(line.texts, Some(vec!["great room".to_string(), String::new()]));

        let mut csv = Vec::new();
        write_steps_csv(&mut csv, &[rec]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "3,5,1,1,3,0,1,1");
    }
}
