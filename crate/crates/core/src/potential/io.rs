//! Coefficient files.
//!
//! Layout: 8-byte magic `WPC1\0\0\0\0`, u32 little-endian header length, UTF-8
//! JSON header (basis, time axis, per-frame penalty weights), then for every
//! frame the independent modes as little-endian `(f32 re, f32 im)` pairs.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PotentialBasis, PotentialCoefficients, PotentialError};
use crate::field::FieldError;

pub const MAGIC: &[u8; 8] = b"WPC1\0\0\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientHeader {
    pub version: u32,
    pub basis: PotentialBasis,
    pub nt: usize,
    pub dt: f64,
    pub t0: f64,
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

fn format_err(offset: usize, message: impl Into<String>) -> PotentialError {
    FieldError::Format { offset: offset as u64, message: message.into() }.into()
}

pub fn encode(coeffs: &PotentialCoefficients, meta: Option<serde_json::Value>) -> Vec<u8> {
    let header = CoefficientHeader {
        version: FORMAT_VERSION,
        basis: coeffs.basis.clone(),
        nt: coeffs.frames.len(),
        dt: coeffs.dt,
        t0: coeffs.t0,
        lambda: coeffs.lambda.clone(),
        meta,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + 8 * coeffs.basis.len() * coeffs.frames.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for frame in &coeffs.frames {
        for c in frame {
            out.extend_from_slice(&(c.re as f32).to_le_bytes());
            out.extend_from_slice(&(c.im as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(CoefficientHeader, PotentialCoefficients), PotentialError> {
    if bytes.len() < 12 {
        return Err(format_err(0, format!("file too short for preamble: {} bytes", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(format_err(0, "bad magic, expected WPC1"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let hend = 12 + hlen;
    if bytes.len() < hend {
        return Err(format_err(12, format!("header length {hlen} exceeds file size {}", bytes.len())));
    }
    let header: CoefficientHeader =
        serde_json::from_slice(&bytes[12..hend]).map_err(|e| format_err(12, format!("malformed header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(format_err(12, format!("unsupported version {}", header.version)));
    }
    let b = &header.basis;
    PotentialBasis::new(b.n_max, b.m_max, b.lx, b.ly, b.x0, b.y0).map_err(|e| format_err(12, e.to_string()))?;
    if header.lambda.len() != header.nt {
        return Err(format_err(12, "lambda list length differs from nt"));
    }
    let nj = b.len();
    let expected = header.nt * nj * 8;
    let actual = bytes.len() - hend;
    if actual != expected {
        return Err(format_err(hend, format!("payload size mismatch: expected {expected} bytes, found {actual}")));
    }
    let values: Vec<Complex64> = bytes[hend..]
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(f64::from(re), f64::from(im))
        })
        .collect();
    let frames = if nj == 0 { vec![Vec::new(); header.nt] } else { values.chunks(nj).map(<[_]>::to_vec).collect() };
    let coeffs = PotentialCoefficients {
        basis: header.basis.clone(),
        dt: header.dt,
        t0: header.t0,
        lambda: header.lambda.clone(),
        frames,
    };
    Ok((header, coeffs))
}

pub fn write_coefficients(
    path: &Path,
    coeffs: &PotentialCoefficients,
    meta: Option<serde_json::Value>,
) -> Result<(), PotentialError> {
    fs::write(path, encode(coeffs, meta)).map_err(FieldError::from)?;
    Ok(())
}

pub fn read_coefficients(path: &Path) -> Result<(CoefficientHeader, PotentialCoefficients), PotentialError> {
    let bytes = fs::read(path).map_err(FieldError::from)?;
    decode(&bytes)
}
