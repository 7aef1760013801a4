//! Feature/target record files (`.pnft`).
//!
//! Little-endian. A 16-byte header `"PNFT"`, version, feature dimension (70)
//! and target dimension (69), followed by one row of 139 `f32` per frame:
//! 70 features, 34 gain targets, 34 strength targets and an
//! attenuation-applied flag (0.0 or 1.0).

use std::io::Write;

use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::spectral::NB_BANDS;

pub const RECORD_MAGIC: &[u8; 4] = b"PNFT";
pub const RECORD_VERSION: u32 = 1;
pub const TARGET_DIM: usize = 2 * NB_BANDS + 1;
pub const ROW_LEN: usize = FEATURE_DIM + TARGET_DIM;
const HEADER_LEN: usize = 16;

/// One frame of training data.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub features: [f32; FEATURE_DIM],
    /// `g_b * g_att_b`, clamped to `[0, 1]`.
    pub gains: [f32; NB_BANDS],
    pub strengths: [f32; NB_BANDS],
    /// Whether any band took the extra-attenuation branch.
    pub attenuated: bool,
}

pub fn write_records<W: Write>(mut out: W, records: &[FrameRecord]) -> Result<()> {
    out.write_all(RECORD_MAGIC)?;
    out.write_all(&RECORD_VERSION.to_le_bytes())?;
    out.write_all(&(FEATURE_DIM as u32).to_le_bytes())?;
    out.write_all(&(TARGET_DIM as u32).to_le_bytes())?;
    let mut row = Vec::with_capacity(ROW_LEN * 4);
    for r in records {
        row.clear();
        for v in r
            .features
            .iter()
            .chain(&r.gains)
            .chain(&r.strengths)
            .chain(std::iter::once(&if r.attenuated { 1.0f32 } else { 0.0 }))
        {
            row.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&row)?;
    }
    Ok(())
}

pub fn records_to_bytes(records: &[FrameRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + records.len() * ROW_LEN * 4);
    write_records(&mut out, records).expect("writing to a Vec cannot fail");
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

pub fn read_records(bytes: &[u8]) -> Result<Vec<FrameRecord>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len(), "truncated record header"));
    }
    if &bytes[0..4] != RECORD_MAGIC {
        return Err(Error::format(0, "bad magic, expected PNFT"));
    }
    let version = read_u32(bytes, 4);
    if version != RECORD_VERSION {
        return Err(Error::format(4, format!("unsupported record version {version}")));
    }
    let feature_dim = read_u32(bytes, 8) as usize;
    if feature_dim != FEATURE_DIM {
        return Err(Error::format(8, format!("feature dimension {feature_dim}, expected {FEATURE_DIM}")));
    }
    let target_dim = read_u32(bytes, 12) as usize;
    if target_dim != TARGET_DIM {
        return Err(Error::format(12, format!("target dimension {target_dim}, expected {TARGET_DIM}")));
    }
    let body = &bytes[HEADER_LEN..];
    let row_bytes = ROW_LEN * 4;
    if body.len() % row_bytes != 0 {
        let frames = body.len() / row_bytes;
        return Err(Error::format(
            HEADER_LEN + frames * row_bytes,
            "truncated frame row",
        ));
    }
    let mut records = Vec::with_capacity(body.len() / row_bytes);
    for (i, row) in body.chunks_exact(row_bytes).enumerate() {
        let mut vals = [0.0f32; ROW_LEN];
        for (v, b) in vals.iter_mut().zip(row.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
        if let Some(pos) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(HEADER_LEN + i * row_bytes + pos * 4, "non-finite value"));
        }
        let mut r = FrameRecord {
            features: [0.0; FEATURE_DIM],
            gains: [0.0; NB_BANDS],
            strengths: [0.0; NB_BANDS],
            attenuated: vals[ROW_LEN - 1] != 0.0,
        };
        r.features.copy_from_slice(&vals[..FEATURE_DIM]);
        r.gains.copy_from_slice(&vals[FEATURE_DIM..FEATURE_DIM + NB_BANDS]);
        r.strengths
            .copy_from_slice(&vals[FEATURE_DIM + NB_BANDS..FEATURE_DIM + 2 * NB_BANDS]);
        records.push(r);
    }
    Ok(records)
}
