//! Portable spectrogram files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `CSIS`                           |
//! | 4      | 2    | version, `u16` = 1                     |
//! | 6      | 4    | width `w`, `u32`                       |
//! | 10     | 4    | height `h`, `u32`                      |
//! | 14     | 1    | label, `i8` (-1 = unlabeled)           |
//! | 15     | 7    | reserved, zero                         |
//! | 22     | 4wh  | `f32` values, time-major               |

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::spectro::Spectrogram;

pub const MAGIC: &[u8; 4] = b"CSIS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 22;
pub const UNLABELED: i8 = -1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl FormatError {
    fn invalid(path: &str, msg: impl Into<String>) -> Self {
        Self::Invalid { path: path.to_string(), msg: msg.into() }
    }
}

/// A decoded spectrogram file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramFile {
    pub label: i8,
    pub spectrogram: Spectrogram,
}

/// Encodes a spectrogram. Values are narrowed to `f32`.
pub fn encode(spec: &Spectrogram, label: i8) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * spec.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.width() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.height() as u32).to_le_bytes());
    out.push(label as u8);
    out.extend_from_slice(&[0u8; 7]);
    for &v in spec.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Decodes file contents. `name` is used in error messages.
pub fn decode(bytes: &[u8], name: &str) -> Result<SpectrogramFile, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::invalid(name, format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::invalid(name, "bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::invalid(name, format!("unsupported version {version}")));
    }
    let w = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let label = bytes[14] as i8;
    if !(-1..=2).contains(&label) {
        return Err(FormatError::invalid(name, format!("label {label} outside -1..=2")));
    }
    if bytes[15..22].iter().any(|&b| b != 0) {
        return Err(FormatError::invalid(name, "reserved bytes are not zero"));
    }
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| FormatError::invalid(name, "dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(FormatError::invalid(
            name,
            format!("size {} does not match {w}x{h} (expected {expected})", bytes.len()),
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let spectrogram = Spectrogram::new(w, h, values).map_err(|e| FormatError::invalid(name, e.to_string()))?;
    Ok(SpectrogramFile { label, spectrogram })
}

pub fn write_file(path: &Path, spec: &Spectrogram, label: i8) -> Result<(), FormatError> {
    fs::write(path, encode(spec, label)).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

pub fn read_file(path: &Path) -> Result<SpectrogramFile, FormatError> {
    let name = path.display().to_string();
    let bytes = fs::read(path).map_err(|source| FormatError::Io { path: name.clone(), source })?;
    decode(&bytes, &name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let s = Spectrogram::new(2, 3, vec![1.0; 6]).unwrap();
        let bytes = encode(&s, 2);
        assert_eq!(bytes.len(), 22 + 4 * 6);
        assert_eq!(&bytes[..4], b"CSIS");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[2, 0, 0, 0]);
        assert_eq!(&bytes[10..14], &[3, 0, 0, 0]);
        assert_eq!(bytes[14], 2);
        assert_eq!(&bytes[22..26], &1.0f32.to_le_bytes());
        assert_eq!(encode(&s, -1)[14], 0xFF);
    }

    #[test]
    fn rejects_corruption() {
        let s = Spectrogram::new(2, 2, vec![0.5; 4]).unwrap();
        let good = encode(&s, 0);
        assert!(decode(&good, "ok").is_ok());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode(&bad, "m").unwrap_err().to_string().contains("magic"));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(decode(&bad, "v").unwrap_err().to_string().contains("version"));
        assert!(decode(&good[..good.len() - 1], "t").unwrap_err().to_string().contains("size"));
        assert!(decode(&good[..10], "t").unwrap_err().to_string().contains("truncated"));
        let mut bad = good.clone();
        bad[20] = 1;
        assert!(decode(&bad, "r").is_err());
        let mut bad = good.clone();
        bad[22..26].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(decode(&bad, "n").is_err());
        let mut bad = good;
        bad[22..26].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode(&bad, "nan.csis").unwrap_err().to_string();
        assert!(err.starts_with("nan.csis"), "{err}");
    }

    proptest! {
        #[test]
        fn round_trip(w in 1usize..20, h in 1usize..20, label in -1i8..=2, vals in proptest::collection::vec(0.0f32..1e6, 400)) {
            let values: Vec<f64> = vals.iter().cycle().take(w * h).map(|&v| v as f64).collect();
            let s = Spectrogram::new(w, h, values).unwrap();
            let bytes = encode(&s, label);
            let back = decode(&bytes, "p").unwrap();
            prop_assert_eq!(back.label, label);
            prop_assert_eq!(&back.spectrogram, &s);
            prop_assert_eq!(encode(&back.spectrogram, back.label), bytes);
        }
    }
}
