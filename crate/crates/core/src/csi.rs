//! CSI packet log parsing and amplitude extraction.
//!
//! A log line is a delimiter-separated record. One column holds the raw
//! subcarrier array as a bracketed list of signed integers, interleaved as
//! `(imaginary, real)` pairs by default:
//!
//! ```text
//! 1690000000123,17,-61,[3 4 0 0 -2 7 ...]
//! ```
//!
//! The bracketed list may use spaces or commas between values and may be
//! wrapped in double quotes, which covers the common ESP32 CSI dump styles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of retained subcarriers under the default selection.
pub const LLTF_SUBCARRIERS: usize = 52;

#[derive(Debug, Error, PartialEq)]
pub enum CsiError {
    #[error("line {line}: field `{field}`: {msg}")]
    Parse { line: usize, field: &'static str, msg: String },
    #[error("line {line}: {msg}")]
    Structure { line: usize, msg: String },
    #[error("subcarrier slot {index} out of range for {pairs} I/Q pairs")]
    Bounds { index: usize, pairs: usize },
    #[error("invalid subcarrier selection: {0}")]
    Selection(String),
}

/// Integer order inside each raw I/Q pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IqOrder {
    #[default]
    ImagReal,
    RealImag,
}

/// Which columns of a log line carry which field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub delimiter: char,
    pub timestamp: usize,
    pub seq: usize,
    pub rssi: Option<usize>,
    pub csi: usize,
    pub iq_order: IqOrder,
    /// Skip the first line of every log.
    pub header: bool,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            delimiter: ',',
            timestamp: 0,
            seq: 1,
            rssi: Some(2),
            csi: 3,
            iq_order: IqOrder::ImagReal,
            header: false,
        }
    }
}

/// One received CSI packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsiRecord {
    pub timestamp_ms: i64,
    pub seq: u64,
    pub rssi_dbm: Option<i32>,
    /// `(imaginary, real)` per raw subcarrier slot.
    pub iq: Vec<(i32, i32)>,
}

/// Splits on `delim`, keeping bracketed and quoted spans intact.
fn split_fields(line: &str, delim: char) -> Vec<&str> {
    let mut fields = Vec::new();
    let mut depth = 0usize;
    let mut quoted = false;
    let mut start = 0;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => depth = depth.saturating_sub(1),
            c if c == delim && depth == 0 && !quoted => {
                fields.push(&line[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    fields.push(&line[start..]);
    fields
}

fn parse_int<T: std::str::FromStr>(text: &str, line: usize, field: &'static str) -> Result<T, CsiError> {
    text.trim().parse().map_err(|_| CsiError::Parse {
        line,
        field,
        msg: format!("not an integer: {:?}", text.trim()),
    })
}

fn parse_iq(text: &str, line: usize, order: IqOrder) -> Result<Vec<(i32, i32)>, CsiError> {
    let body = text.trim().trim_matches('"').trim();
    let inner = body
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| CsiError::Structure { line, msg: format!("csi field is not a bracketed list: {body:?}") })?;
    let flat = inner
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_int::<i32>(s, line, "csi"))
        .collect::<Result<Vec<_>, _>>()?;
    if flat.len() % 2 != 0 {
        return Err(CsiError::Structure { line, msg: format!("odd-length I/Q array ({} values)", flat.len()) });
    }
    Ok(flat
        .chunks_exact(2)
        .map(|p| match order {
            IqOrder::ImagReal => (p[0], p[1]),
            IqOrder::RealImag => (p[1], p[0]),
        })
        .collect())
}

/// Parses one log line. `line_no` is only used in error messages.
pub fn parse_csi_line(line: &str, mapping: &ColumnMapping, line_no: usize) -> Result<CsiRecord, CsiError> {
    let fields = split_fields(line.trim_end_matches(['\r', '\n']), mapping.delimiter);
    let get = |idx: usize, name: &str| {
        fields.get(idx).copied().ok_or_else(|| CsiError::Structure {
            line: line_no,
            msg: format!("missing {name} column {idx} (line has {} columns)", fields.len()),
        })
    };
    let timestamp_ms = parse_int(get(mapping.timestamp, "timestamp")?, line_no, "timestamp")?;
    let seq = parse_int(get(mapping.seq, "seq")?, line_no, "seq")?;
    let rssi_dbm = match mapping.rssi {
        Some(idx) => {
            let text = get(idx, "rssi")?;
            if text.trim().is_empty() {
                None
            } else {
                Some(parse_int(text, line_no, "rssi")?)
            }
        }
        None => None,
    };
    let iq = parse_iq(get(mapping.csi, "csi")?, line_no, mapping.iq_order)?;
    Ok(CsiRecord { timestamp_ms, seq, rssi_dbm, iq })
}

/// Writes a record back in the layout described by `mapping`.
///
/// Columns the mapping does not reference are emitted empty.
pub fn format_csi_line(record: &CsiRecord, mapping: &ColumnMapping) -> String {
    let mut cols = vec![mapping.timestamp, mapping.seq, mapping.csi];
    cols.extend(mapping.rssi);
    let ncols = cols.iter().max().map_or(0, |m| m + 1);
    let mut fields = vec![String::new(); ncols];
    fields[mapping.timestamp] = record.timestamp_ms.to_string();
    fields[mapping.seq] = record.seq.to_string();
    if let (Some(idx), Some(rssi)) = (mapping.rssi, record.rssi_dbm) {
        fields[idx] = rssi.to_string();
    }
    let values: Vec<String> = record
        .iq
        .iter()
        .flat_map(|&(im, re)| match mapping.iq_order {
            IqOrder::ImagReal => [im, re],
            IqOrder::RealImag => [re, im],
        })
        .map(|v| v.to_string())
        .collect();
    fields[mapping.csi] = format!("[{}]", values.join(" "));
    fields.join(&mapping.delimiter.to_string())
}

/// Records parsed from a whole log, plus bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<CsiRecord>,
    /// Number of records whose timestamp went backwards.
    pub non_monotonic: usize,
}

/// Parses every non-blank line of a log. Stops at the first hard error.
pub fn parse_csi_log(text: &str, mapping: &ColumnMapping) -> Result<ParsedLog, CsiError> {
    let mut out = ParsedLog::default();
    let mut last_ts: Option<i64> = None;
    for (i, line) in text.lines().enumerate() {
        if (mapping.header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let rec = parse_csi_line(line, mapping, i + 1)?;
        if last_ts.is_some_and(|t| rec.timestamp_ms < t) {
            out.non_monotonic += 1;
        }
        last_ts = Some(rec.timestamp_ms);
        out.records.push(rec);
    }
    Ok(out)
}

/// Raw slot indices retained as spectrogram rows, in output order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcarrierSelection {
    pub name: String,
    pub indices: Vec<usize>,
}

impl SubcarrierSelection {
    /// The 52 non-null L-LTF subcarriers of a 64-slot capture.
    ///
    /// Slots follow FFT order as in ESP32 dumps: slot `s` holds subcarrier
    /// `s` for `s < 32` and `s - 64` otherwise. Output rows run from
    /// subcarrier -26 up to +26, skipping DC.
    pub fn lltf_64() -> Self {
        let indices = (38..64).chain(1..27).collect();
        Self { name: "lltf52".into(), indices }
    }

    pub fn custom(name: impl Into<String>, indices: Vec<usize>) -> Result<Self, CsiError> {
        let sel = Self { name: name.into(), indices };
        sel.validate(None)?;
        Ok(sel)
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "lltf52" => Some(Self::lltf_64()),
            _ => None,
        }
    }

    /// Checks the selection, optionally against a raw slot count.
    pub fn validate(&self, slots: Option<usize>) -> Result<(), CsiError> {
        if self.indices.len() != LLTF_SUBCARRIERS {
            return Err(CsiError::Selection(format!(
                "expected {LLTF_SUBCARRIERS} indices, got {}",
                self.indices.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &i in &self.indices {
            if !seen.insert(i) {
                return Err(CsiError::Selection(format!("duplicate index {i}")));
            }
            if let Some(n) = slots {
                if i >= n {
                    return Err(CsiError::Bounds { index: i, pairs: n });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Magnitudes of the selected subcarriers, in selection order.
pub fn amplitudes(record: &CsiRecord, sel: &SubcarrierSelection) -> Result<Vec<f64>, CsiError> {
    sel.indices
        .iter()
        .map(|&i| {
            let &(im, re) = record.iq.get(i).ok_or(CsiError::Bounds { index: i, pairs: record.iq.len() })?;
            let sq = im as i64 * im as i64 + re as i64 * re as i64;
            Ok((sq as f64).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(iq: Vec<(i32, i32)>) -> CsiRecord {
        CsiRecord { timestamp_ms: 0, seq: 0, rssi_dbm: None, iq }
    }

    #[test]
    fn single_pair_line() {
        let r = parse_csi_line("10,1,-40,[3 4]", &ColumnMapping::default(), 1).unwrap();
        assert_eq!(r.iq, vec![(3, 4)]);
        assert_eq!(r.timestamp_ms, 10);
        assert_eq!(r.rssi_dbm, Some(-40));
    }

    #[test]
    fn missing_csi_column_is_structural() {
        let err = parse_csi_line("10,1,-40", &ColumnMapping::default(), 7).unwrap_err();
        assert!(matches!(err, CsiError::Structure { line: 7, .. }), "{err}");
    }

    #[test]
    fn flat_128_values_give_64_pairs() {
        let vals: Vec<String> = (0..128).map(|v| (v - 64).to_string()).collect();
        let line = format!("0,0,-50,[{}]", vals.join(" "));
        let r = parse_csi_line(&line, &ColumnMapping::default(), 1).unwrap();
        assert_eq!(r.iq.len(), 64);
        assert_eq!(r.iq[0], (-64, -63));
    }

    #[test]
    fn odd_length_is_structural() {
        let err = parse_csi_line("0,0,0,[1 2 3]", &ColumnMapping::default(), 2).unwrap_err();
        assert!(matches!(err, CsiError::Structure { line: 2, .. }));
    }

    #[test]
    fn bad_number_reports_line_and_field() {
        let err = parse_csi_line("0,x1,0,[1 2]", &ColumnMapping::default(), 9).unwrap_err();
        assert_eq!(err, CsiError::Parse { line: 9, field: "seq", msg: "not an integer: \"x1\"".into() });
        let err = parse_csi_line("0,1,0,[1 q]", &ColumnMapping::default(), 3).unwrap_err();
        assert!(matches!(err, CsiError::Parse { line: 3, field: "csi", .. }));
    }

    #[test]
    fn quoted_comma_array_and_real_imag_order() {
        let mapping = ColumnMapping { iq_order: IqOrder::RealImag, ..Default::default() };
        let r = parse_csi_line("5,6,,\"[4,3,1,2]\"", &mapping, 1).unwrap();
        assert_eq!(r.rssi_dbm, None);
        assert_eq!(r.iq, vec![(3, 4), (2, 1)]);
    }

    #[test]
    fn semicolon_delimiter_and_reordered_columns() {
        let mapping = ColumnMapping { delimiter: ';', timestamp: 2, seq: 0, rssi: None, csi: 1, ..Default::default() };
        let r = parse_csi_line("4;[1 1];99", &mapping, 1).unwrap();
        assert_eq!((r.timestamp_ms, r.seq, r.iq.clone()), (99, 4, vec![(1, 1)]));
    }

    #[test]
    fn log_counts_backwards_timestamps() {
        let text = "10,0,0,[0 1]\n\n5,1,0,[0 1]\n20,2,0,[0 1]\n";
        let log = parse_csi_log(text, &ColumnMapping::default()).unwrap();
        assert_eq!(log.records.len(), 3);
        assert_eq!(log.non_monotonic, 1);
    }

    #[test]
    fn log_error_carries_physical_line() {
        let text = "ts,seq,rssi,csi\n10,0,0,[0 1]\n11,1,0,[0 1 2]\n";
        let mapping = ColumnMapping { header: true, ..Default::default() };
        let err = parse_csi_log(text, &mapping).unwrap_err();
        assert!(matches!(err, CsiError::Structure { line: 3, .. }));
    }

    #[test]
    fn amplitude_examples() {
        let sel = |idx: Vec<usize>| SubcarrierSelection { name: "t".into(), indices: idx };
        assert_eq!(amplitudes(&rec(vec![(3, 4)]), &sel(vec![0])).unwrap(), vec![5.0]);
        assert_eq!(amplitudes(&rec(vec![(0, 0)]), &sel(vec![0])).unwrap(), vec![0.0]);
        assert_eq!(amplitudes(&rec(vec![(1, 0), (0, 1)]), &sel(vec![0, 1])).unwrap(), vec![1.0, 1.0]);
        assert_eq!(
            amplitudes(&rec(vec![(1, 0)]), &sel(vec![1])).unwrap_err(),
            CsiError::Bounds { index: 1, pairs: 1 }
        );
    }

    #[test]
    fn lltf_preset_shape() {
        let sel = SubcarrierSelection::lltf_64();
        sel.validate(Some(64)).unwrap();
        assert!(!sel.indices.contains(&0));
        assert!(!sel.indices.contains(&32));
        assert_eq!(sel.indices.first(), Some(&38));
        assert_eq!(sel.indices.last(), Some(&26));
        assert!(sel.validate(Some(40)).is_err());
        assert!(SubcarrierSelection::custom("short", vec![0, 1]).is_err());
        let mut dup: Vec<usize> = (0..52).collect();
        dup[51] = 0;
        assert!(SubcarrierSelection::custom("dup", dup).is_err());
    }

    fn arb_record() -> impl Strategy<Value = CsiRecord> {
        (
            any::<i64>(),
            any::<u64>(),
            proptest::option::of(-100i32..0),
            proptest::collection::vec((-128i32..128, -128i32..128), 64),
        )
            .prop_map(|(timestamp_ms, seq, rssi_dbm, iq)| CsiRecord { timestamp_ms, seq, rssi_dbm, iq })
    }

    proptest! {
        #[test]
        fn line_round_trip(r in arb_record()) {
            let mapping = ColumnMapping::default();
            let line = format_csi_line(&r, &mapping);
            prop_assert_eq!(parse_csi_line(&line, &mapping, 1).unwrap(), r);
        }

        #[test]
        fn amplitude_scale_covariant(r in arb_record(), c in 0i32..100) {
            let sel = SubcarrierSelection::lltf_64();
            let base = amplitudes(&r, &sel).unwrap();
            let scaled = CsiRecord { iq: r.iq.iter().map(|&(a, b)| (a * c, b * c)).collect(), ..r.clone() };
            let got = amplitudes(&scaled, &sel).unwrap();
            for (g, b) in got.iter().zip(&base) {
                // sqrt of the exact integer sum is correctly rounded; the
                // product c * base adds one more rounding.
                prop_assert!((g - c as f64 * b).abs() <= 1e-12 * g.max(1.0));
                prop_assert!(*g >= 0.0 && g.is_finite());
            }
        }

        #[test]
        fn amplitude_permutation_equivariant(r in arb_record(), seed in any::<u64>()) {
            let sel = SubcarrierSelection::lltf_64();
            let mut perm: Vec<usize> = (0..sel.len()).collect();
            crate::rng::Stream::new(seed).shuffle(&mut perm);
            let permuted = SubcarrierSelection {
                name: "p".into(),
                indices: perm.iter().map(|&p| sel.indices[p]).collect(),
            };
            let a = amplitudes(&r, &sel).unwrap();
            let b = amplitudes(&r, &permuted).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                prop_assert_eq!(b[k], a[p]);
            }
        }
    }
}
