//! Amplitude time series and fixed-size spectrograms.

use thiserror::Error;

use crate::csi::{amplitudes, CsiError, CsiRecord, SubcarrierSelection};

/// Nominal packet rate of the captures.
pub const DEFAULT_RATE_HZ: f64 = 100.0;
/// Spectrogram width in packets.
pub const DEFAULT_WIDTH: usize = 400;
/// Spectrogram height in subcarriers.
pub const DEFAULT_HEIGHT: usize = 52;

#[derive(Debug, Error, PartialEq)]
pub enum SpectroError {
    #[error("range {start}..{end} invalid for series of length {len}")]
    Bounds { start: usize, end: usize, len: usize },
    #[error("window and hop must be at least 1 (window={window}, hop={hop})")]
    Window { window: usize, hop: usize },
    #[error("row {row} has {got} values, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("{0}")]
    Value(String),
    #[error(transparent)]
    Csi(#[from] CsiError),
}

/// A `width x height` (time x subcarrier) non-negative matrix.
///
/// Storage is time-major: the value for time column `t` and subcarrier row
/// `k` sits at `t * height + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Spectrogram {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, SpectroError> {
        if width == 0 || height == 0 {
            return Err(SpectroError::Value(format!("empty spectrogram {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(SpectroError::Value(format!(
                "{} values for a {width}x{height} spectrogram",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(SpectroError::Value(format!("value {} at index {i} is not finite and non-negative", values[i])));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    /// Builds from a function of `(t, k)`. Values are not validated.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for t in 0..width {
            for k in 0..height {
                values.push(f(t, k));
            }
        }
        Self { width, height, values }
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.height + k]
    }

    /// All subcarrier values at time `t`.
    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.height..(t + 1) * self.height]
    }

    /// The time series of subcarrier `k`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        (0..self.width).map(|t| self.get(t, k)).collect()
    }

    pub fn is_valid(&self) -> bool {
        self.values.len() == self.width * self.height && self.values.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Time-ordered per-packet amplitude vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSeries {
    channels: usize,
    rate_hz: f64,
    values: Vec<f64>,
}

impl AmplitudeSeries {
    pub fn from_rows(rows: Vec<Vec<f64>>, rate_hz: f64) -> Result<Self, SpectroError> {
        let channels = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * channels);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != channels {
                return Err(SpectroError::Ragged { row: i, got: row.len(), expected: channels });
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SpectroError::Value(format!("row {i} has a negative or non-finite amplitude")));
            }
            values.extend(row);
        }
        Ok(Self { channels, rate_hz, values })
    }

    /// Amplitudes of every record under `sel`, at the nominal rate.
    pub fn from_records(records: &[CsiRecord], sel: &SubcarrierSelection) -> Result<Self, SpectroError> {
        let rows = records.iter().map(|r| amplitudes(r, sel)).collect::<Result<Vec<_>, _>>()?;
        let mut series = Self::from_rows(rows, DEFAULT_RATE_HZ)?;
        series.channels = sel.len();
        Ok(series)
    }

    pub fn len(&self) -> usize {
        if self.channels == 0 {
            0
        } else {
            self.values.len() / self.channels
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }
}

/// Keeps rows `start..end`.
pub fn trim(series: &AmplitudeSeries, start: usize, end: usize) -> Result<AmplitudeSeries, SpectroError> {
    let len = series.len();
    if start >= end || end > len {
        return Err(SpectroError::Bounds { start, end, len });
    }
    let c = series.channels;
    Ok(AmplitudeSeries {
        channels: c,
        rate_hz: series.rate_hz,
        values: series.values[start * c..end * c].to_vec(),
    })
}

/// Number of windows `segment` emits.
pub fn segment_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window {
        0
    } else {
        (len - window) / hop + 1
    }
}

/// Cuts the series into `window`-packet spectrograms every `hop` packets.
/// A trailing remainder shorter than `window` is dropped.
pub fn segment(series: &AmplitudeSeries, window: usize, hop: usize) -> Result<Vec<Spectrogram>, SpectroError> {
    if window == 0 || hop == 0 {
        return Err(SpectroError::Window { window, hop });
    }
    let c = series.channels;
    Ok((0..segment_count(series.len(), window, hop))
        .map(|i| {
            let off = i * hop;
            Spectrogram::from_raw(window, c, series.values[off * c..(off + window) * c].to_vec())
        })
        .collect())
}
