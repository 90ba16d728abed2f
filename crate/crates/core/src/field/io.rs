//! WFS1 field files.
//!
//! Layout: 8-byte magic `WFS1\0\0\0\0`, u32 little-endian header length, UTF-8
//! JSON header, then `nt*ny*nx` little-endian f32 values, row-major and
//! frame-major. A companion stream of kind `mask` stores one 0/1 byte per cell
//! instead of f32 values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FieldError, Grid2D, ScalarField, ScalarFieldSeries};

pub const MAGIC: &[u8; 8] = b"WFS1\0\0\0\0";
pub const FORMAT_VERSION: u32 = 1;
pub const MASK_KIND: &str = "mask";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfsHeader {
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub x0: f64,
    pub y0: f64,
    pub t0: f64,
    pub kind: String,
    /// Free-form provenance (seed, config hash); not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl WfsHeader {
    pub fn grid(&self) -> Grid2D {
        Grid2D { nx: self.nx, ny: self.ny, dx: self.dx, dy: self.dy, x0: self.x0, y0: self.y0 }
    }

    fn for_frames(grid: Grid2D, nt: usize, dt: f64, t0: f64, kind: &str, meta: Option<serde_json::Value>) -> Self {
        Self {
            version: FORMAT_VERSION,
            nx: grid.nx,
            ny: grid.ny,
            nt,
            dx: grid.dx,
            dy: grid.dy,
            dt,
            x0: grid.x0,
            y0: grid.y0,
            t0,
            kind: kind.to_string(),
            meta,
        }
    }

    fn bytes_per_value(&self) -> usize {
        if self.kind == MASK_KIND {
            1
        } else {
            4
        }
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> FieldError {
    FieldError::Format { offset: offset as u64, message: message.into() }
}

/// Serializes a header and a value payload into WFS1 bytes.
pub fn encode(header: &WfsHeader, payload: &[f64]) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + payload.len() * header.bytes_per_value());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    if header.kind == MASK_KIND {
        out.extend(payload.iter().map(|&v| u8::from(v != 0.0)));
    } else {
        for &v in payload {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parses WFS1 bytes into a header and the payload widened to f64.
pub fn decode(bytes: &[u8]) -> Result<(WfsHeader, Vec<f64>), FieldError> {
    if bytes.len() < 12 {
        return Err(format_err(0, format!("file too short for preamble: {} bytes", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(format_err(0, "bad magic, expected WFS1"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let hend = 12 + hlen;
    if bytes.len() < hend {
        return Err(format_err(12, format!("header length {hlen} exceeds file size {}", bytes.len())));
    }
    let header: WfsHeader =
        serde_json::from_slice(&bytes[12..hend]).map_err(|e| format_err(12, format!("malformed header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(format_err(12, format!("unsupported version {}", header.version)));
    }
    if !(header.dt > 0.0) {
        return Err(format_err(12, "non-positive dt"));
    }
    if header.nx < 2 || header.ny < 2 || !(header.dx > 0.0) || !(header.dy > 0.0) {
        return Err(format_err(12, format!("invalid grid {}x{} dx={} dy={}", header.nx, header.ny, header.dx, header.dy)));
    }
    if header.nt == 0 {
        return Err(format_err(12, "nt must be positive"));
    }
    let count = header.nt * header.ny * header.nx;
    let expected = count * header.bytes_per_value();
    let actual = bytes.len() - hend;
    if actual != expected {
        return Err(format_err(hend, format!("payload size mismatch: expected {expected} bytes, found {actual}")));
    }
    let body = &bytes[hend..];
    let payload = if header.kind == MASK_KIND {
        body.iter().map(|&b| f64::from(b)).collect()
    } else {
        body.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect()
    };
    Ok((header, payload))
}

/// Companion mask path: `eta.wfs` -> `eta.mask.wfs`.
pub fn mask_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "wfs".into());
    path.with_file_name(format!("{stem}.mask.{ext}"))
}

/// Writes any number of congruent frames. Invalid cells are stored as 0 and a
/// companion mask stream is written whenever some cell is invalid.
pub fn write_frames(
    path: &Path,
    kind: &str,
    frames: &[&ScalarField],
    dt: f64,
    t0: f64,
    meta: Option<serde_json::Value>,
) -> Result<(), FieldError> {
    let first = frames.first().ok_or_else(|| FieldError::InvalidParameter("no frames to write".into()))?;
    let grid = first.grid;
    if frames.iter().any(|f| f.grid != grid) {
        return Err(FieldError::GridMismatch("frames written to one file must share a grid".into()));
    }
    let header = WfsHeader::for_frames(grid, frames.len(), dt, t0, kind, meta.clone());
    let payload: Vec<f64> = frames.iter().flat_map(|f| f.filled(0.0)).collect();
    fs::write(path, encode(&header, &payload))?;
    let mpath = mask_path(path);
    if frames.iter().any(|f| f.mask.is_some()) {
        let mheader = WfsHeader::for_frames(grid, frames.len(), dt, t0, MASK_KIND, meta);
        let mask: Vec<f64> = frames.iter().flat_map(|f| f.mask_vec().into_iter().map(f64::from)).collect();
        fs::write(&mpath, encode(&mheader, &mask))?;
    } else if mpath.exists() {
        fs::remove_file(&mpath)?;
    }
    Ok(())
}

/// Reads a WFS1 file (and its companion mask, if present) as individual frames.
pub fn read_frames(path: &Path) -> Result<(WfsHeader, Vec<ScalarField>), FieldError> {
    let (header, payload) = decode(&fs::read(path)?)?;
    let grid = header.grid();
    let n = grid.len();
    let mpath = mask_path(path);
    let mask = if mpath.exists() {
        let (mh, m) = decode(&fs::read(&mpath)?)?;
        if mh.kind != MASK_KIND || mh.nx != header.nx || mh.ny != header.ny || mh.nt != header.nt {
            return Err(format_err(12, "companion mask does not match field dimensions"));
        }
        Some(m)
    } else {
        None
    };
    let frames = (0..header.nt)
        .map(|k| {
            let f = ScalarField { grid, values: payload[k * n..(k + 1) * n].to_vec(), mask: None };
            match &mask {
                Some(m) => f.with_mask(m[k * n..(k + 1) * n].iter().map(|&b| b != 0.0).collect()),
                None => Ok(f),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, frames))
}

pub fn write_field(path: &Path, series: &ScalarFieldSeries, kind: &str, meta: Option<serde_json::Value>) -> Result<(), FieldError> {
    let frames: Vec<&ScalarField> = series.frames.iter().collect();
    write_frames(path, kind, &frames, series.dt, series.t0, meta)
}

pub fn read_field(path: &Path) -> Result<(WfsHeader, ScalarFieldSeries), FieldError> {
    let (header, frames) = read_frames(path)?;
    let series = ScalarFieldSeries::new(header.grid(), header.dt, header.t0, frames)?;
    Ok((header, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(kind: &str) -> WfsHeader {
        WfsHeader::for_frames(Grid2D::pixels(3, 2).unwrap(), 2, 0.5, 0.0, kind, None)
    }

    #[test]
    fn truncated_payload_reports_byte_counts() {
        let mut bytes = encode(&header("eta"), &[1.0; 12]);
        bytes.truncate(bytes.len() - 3);
        match decode(&bytes) {
            Err(FieldError::Format { message, .. }) => {
                assert!(message.contains("expected 48 bytes"), "{message}");
                assert!(message.contains("found 45"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn non_positive_dt_rejected() {
        let mut h = header("eta");
        h.dt = 0.0;
        match decode(&encode(&h, &[0.0; 12])) {
            Err(FieldError::Format { message, offset }) => {
                assert_eq!(message, "non-positive dt");
                assert_eq!(offset, 12);
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = encode(&header("eta"), &[0.0; 12]);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(FieldError::Format { offset: 0, .. })));
    }

    #[test]
    fn mask_stream_uses_single_bytes() {
        let bytes = encode(&header(MASK_KIND), &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        let (h, p) = decode(&bytes).unwrap();
        assert_eq!(h.kind, MASK_KIND);
        assert_eq!(p.iter().filter(|&&v| v == 0.0).count(), 3);
    }

    #[test]
    fn masked_series_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eta.wfs");
        let g = Grid2D::new(3, 2, 0.5, 0.25, 1.0, 2.0).unwrap();
        let mut frames: Vec<ScalarField> = (0..3).map(|k| ScalarField::constant(g, k as f64)).collect();
        frames[1] = frames[1].clone().with_mask(vec![true, false, true, true, true, true]).unwrap();
        let s = ScalarFieldSeries::new(g, 0.1, 3.0, frames).unwrap();
        write_field(&path, &s, "eta", Some(serde_json::json!({"seed": 7}))).unwrap();
        assert!(mask_path(&path).exists());
        let (h, back) = read_field(&path).unwrap();
        assert_eq!(h.meta.unwrap()["seed"], 7);
        assert_eq!(back.frames[1].mask.as_ref().unwrap()[1], false);
        assert!(back.frames[0].mask.is_none());
        assert_eq!(back.grid, g);
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            nx in 2usize..6, ny in 2usize..6, nt in 3usize..5,
            seed in proptest::collection::vec(-1.0e6f32..1.0e6f32, 100),
        ) {
            let g = Grid2D::new(nx, ny, 0.3, 0.7, -2.0, 5.0).unwrap();
            let n = g.len();
            let frames: Vec<ScalarField> = (0..nt)
                .map(|k| ScalarField::new(g, (0..n).map(|i| f64::from(seed[(k * n + i) % seed.len()])).collect()).unwrap())
                .collect();
            let s = ScalarFieldSeries::new(g, 0.04, 1.5, frames).unwrap();
            let h = WfsHeader::for_frames(g, nt, s.dt, s.t0, "eta", None);
            let payload: Vec<f64> = s.frames.iter().flat_map(|f| f.values.clone()).collect();
            let bytes = encode(&h, &payload);
            let (h2, p2) = decode(&bytes).unwrap();
            prop_assert_eq!(&h2, &h);
            prop_assert!(p2.iter().zip(&payload).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(encode(&h2, &p2), bytes);
        }
    }
}
