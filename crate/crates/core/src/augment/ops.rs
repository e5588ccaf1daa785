//! Deterministic augmentation operators and their seeded wrappers.

use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::rng::Stream;
use crate::spectro::Spectrogram;

/// Shifts every column `n` steps toward later time, wrapping at the end.
/// Output column `(t + n) % w` equals input column `t`.
pub fn circular_rotate(x: &Spectrogram, n: usize) -> Result<Spectrogram, AugmentError> {
    let (w, h) = (x.width(), x.height());
    if n > w {
        return Err(AugmentError::Param(format!("rotation {n} outside [0, {w}]")));
    }
    let n = n % w;
    let src = x.values();
    let mut out = Vec::with_capacity(src.len());
    // Output column t comes from input column (t - n) mod w.
    out.extend_from_slice(&src[(w - n) * h..]);
    out.extend_from_slice(&src[..(w - n) * h]);
    Ok(Spectrogram::from_raw(w, h, out))
}

/// Draws `n` uniformly from `1..=w` and rotates by it.
pub fn random_circular_rotation(x: &Spectrogram, stream: &mut Stream) -> Spectrogram {
    let n = stream.int_in(1, x.width() as u64) as usize;
    circular_rotate(x, n).expect("n within [1, w]")
}

/// Sample position of output `j` of `m` when resampling `len` inputs with
/// endpoints aligned.
#[inline]
fn sample_position(j: usize, len: usize, m: usize) -> f64 {
    if m == 1 {
        0.0
    } else {
        (j * (len - 1)) as f64 / (m - 1) as f64
    }
}

/// Resamples columns `start..start+len` of `x` to `m` columns by linear
/// interpolation along time.
fn resample_columns(x: &Spectrogram, start: usize, len: usize, m: usize) -> Vec<f64> {
    let h = x.height();
    let mut out = Vec::with_capacity(m * h);
    for j in 0..m {
        let pos = sample_position(j, len, m);
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        let a = x.column(start + i0);
        if frac == 0.0 || i0 + 1 >= len {
            out.extend_from_slice(a);
        } else {
            let b = x.column(start + i0 + 1);
            out.extend(a.iter().zip(b).map(|(&u, &v)| (u + frac * (v - u)).clamp(u.min(v), u.max(v))));
        }
    }
    out
}

/// How the compress branch of the resized crop restores full width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompressFill {
    /// Repeat the compressed columns circularly from the first one.
    #[default]
    Tile,
    /// Stretch the compressed columns back to full width.
    Rescale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    /// Take `c` columns from `start` and stretch them to full width (slow-down).
    CropStretch,
    /// Squeeze all `w` columns into `c` and fill back to `w` (speed-up).
    Compress(CompressFill),
}

/// Smallest admissible crop or compression length for width `w`.
pub fn min_crop(w: usize) -> usize {
    w.div_ceil(2)
}

pub fn resized_crop(x: &Spectrogram, mode: CropMode, c: usize, start: usize) -> Result<Spectrogram, AugmentError> {
    let (w, h) = (x.width(), x.height());
    if c < min_crop(w) || c > w {
        return Err(AugmentError::Param(format!("crop length {c} outside [{}, {w}]", min_crop(w))));
    }
    let values = match mode {
        CropMode::CropStretch => {
            if start > w - c {
                return Err(AugmentError::Param(format!("crop start {start} beyond {}", w - c)));
            }
            let tmp = Spectrogram::from_raw(c, h, x.values()[start * h..(start + c) * h].to_vec());
            resample_columns(&tmp, 0, c, w)
        }
        CropMode::Compress(fill) => {
            let squeezed = Spectrogram::from_raw(c, h, resample_columns(x, 0, w, c));
            match fill {
                CompressFill::Tile => (0..w).flat_map(|t| squeezed.column(t % c).iter().copied()).collect(),
                CompressFill::Rescale => resample_columns(&squeezed, 0, c, w),
            }
        }
    };
    Ok(Spectrogram::from_raw(w, h, values))
}

/// Parameters drawn by [`random_resized_crop`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropDraw {
    pub mode: CropMode,
    /// Real factor before rounding.
    pub factor: f64,
    pub c: usize,
    pub start: usize,
}

/// Draws crop parameters within `[lo, hi]` (columns) for width `w`.
///
/// Always consumes the mode coin, the factor and the start, in that order.
/// The start index is drawn even in compress mode.
pub fn draw_crop(stream: &mut Stream, w: usize, lo: f64, hi: f64, fill: CompressFill) -> CropDraw {
    let crop = stream.uniform() < 0.5;
    let factor = stream.uniform_in(lo, hi);
    let c = (factor.round() as usize).clamp(min_crop(w), w);
    let start = stream.int_in(0, (w - c) as u64) as usize;
    let mode = if crop { CropMode::CropStretch } else { CropMode::Compress(fill) };
    CropDraw { mode, factor, c, start }
}

/// Random crop-and-stretch or compress-and-fill with `c ~ U(w/2, w)`.
pub fn random_resized_crop(x: &Spectrogram, stream: &mut Stream) -> Spectrogram {
    let w = x.width();
    let d = draw_crop(stream, w, w as f64 / 2.0, w as f64, CompressFill::Tile);
    resized_crop(x, d.mode, d.c, d.start).expect("draw within bounds")
}

fn check_factors(factors: &[f64], h: usize) -> Result<(), AugmentError> {
    if factors.len() != h {
        return Err(AugmentError::Param(format!("{} factors for {h} rows", factors.len())));
    }
    if let Some(f) = factors.iter().find(|f| !f.is_finite() || **f <= 0.0) {
        return Err(AugmentError::Param(format!("factor {f} is not finite and positive")));
    }
    Ok(())
}

/// Multiplies subcarrier row `k` by `factors[k]`.
pub fn amplitude_scale(x: &Spectrogram, factors: &[f64]) -> Result<Spectrogram, AugmentError> {
    let h = x.height();
    check_factors(factors, h)?;
    let values = x.values().chunks_exact(h).flat_map(|col| col.iter().zip(factors).map(|(v, f)| v * f)).collect();
    Ok(Spectrogram::from_raw(x.width(), h, values))
}

/// Time-mean of each subcarrier row.
pub fn row_means(x: &Spectrogram) -> Vec<f64> {
    let h = x.height();
    let mut sums = vec![0.0; h];
    for col in x.values().chunks_exact(h) {
        for (s, v) in sums.iter_mut().zip(col) {
            *s += v;
        }
    }
    sums.iter().map(|s| s / x.width() as f64).collect()
}

/// Scales each row's deviation from its time-mean by `factors[k]`,
/// clamping the result at zero.
pub fn contrast_scale(x: &Spectrogram, factors: &[f64]) -> Result<Spectrogram, AugmentError> {
    let h = x.height();
    check_factors(factors, h)?;
    let means = row_means(x);
    let values = x
        .values()
        .chunks_exact(h)
        .flat_map(|col| {
            col.iter()
                .zip(factors.iter().zip(&means))
                .map(|(&v, (&f, &mu))| (mu + f * (v - mu)).max(0.0))
        })
        .collect();
    Ok(Spectrogram::from_raw(x.width(), h, values))
}

/// `h` independent uniform draws on `[lo, hi]`, in row order.
pub fn random_channel_factors(stream: &mut Stream, h: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..h).map(|_| stream.uniform_in(lo, hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_row(vals: &[f64]) -> Spectrogram {
        Spectrogram::new(vals.len(), 1, vals.to_vec()).unwrap()
    }

    fn random_spec(stream: &mut Stream, w: usize, h: usize) -> Spectrogram {
        Spectrogram::from_fn(w, h, |_, _| stream.uniform() * 10.0)
    }

    #[test]
    fn rotation_examples() {
        let x = one_row(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(circular_rotate(&x, 1).unwrap().values(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(circular_rotate(&x, 4).unwrap(), x);
        assert_eq!(circular_rotate(&x, 0).unwrap(), x);
        assert!(circular_rotate(&x, 5).is_err());
    }

    #[test]
    fn rotation_moves_whole_columns() {
        let x = Spectrogram::from_fn(5, 3, |t, k| (10 * t + k) as f64);
        let y = circular_rotate(&x, 2).unwrap();
        for t in 0..5 {
            assert_eq!(y.column((t + 2) % 5), x.column(t));
        }
    }

    #[test]
    fn crop_stretch_examples() {
        let x = one_row(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(resized_crop(&x, CropMode::CropStretch, 4, 0).unwrap(), x);
        let y = resized_crop(&x, CropMode::CropStretch, 2, 0).unwrap();
        for (got, want) in y.values().iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
        let y = resized_crop(&x, CropMode::CropStretch, 2, 2).unwrap();
        assert!((y.values()[1] - (2.0 + 1.0 / 3.0)).abs() <= 1e-12);
    }

    #[test]
    fn compress_examples() {
        let x = one_row(&[0.0, 1.0, 2.0, 3.0]);
        let tiled = resized_crop(&x, CropMode::Compress(CompressFill::Tile), 2, 0).unwrap();
        assert_eq!(tiled.values(), &[0.0, 3.0, 0.0, 3.0]);
        let rescaled = resized_crop(&x, CropMode::Compress(CompressFill::Rescale), 2, 0).unwrap();
        assert_eq!(rescaled.values()[0], 0.0);
        assert_eq!(rescaled.values()[3], 3.0);
        assert_eq!(resized_crop(&x, CropMode::Compress(CompressFill::Tile), 4, 0).unwrap(), x);
    }

    #[test]
    fn crop_parameter_errors() {
        let x = one_row(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(resized_crop(&x, CropMode::CropStretch, 2, 0).is_err());
        assert!(resized_crop(&x, CropMode::CropStretch, 3, 0).is_ok());
        assert!(resized_crop(&x, CropMode::CropStretch, 3, 3).is_err());
        assert!(resized_crop(&x, CropMode::CropStretch, 6, 0).is_err());
    }

    #[test]
    fn amplitude_examples() {
        let x = Spectrogram::from_fn(6, 2, |_, _| 2.0);
        assert_eq!(amplitude_scale(&x, &[1.0, 1.0]).unwrap(), x);
        let y = amplitude_scale(&x, &[1.25, 1.0]).unwrap();
        assert_eq!(y.row(0), vec![2.5; 6]);
        assert_eq!(y.row(1), vec![2.0; 6]);
        assert!(amplitude_scale(&x, &[0.0, 1.0]).is_err());
        assert!(amplitude_scale(&x, &[f64::INFINITY, 1.0]).is_err());
        assert!(amplitude_scale(&x, &[1.0]).is_err());
    }

    #[test]
    fn amplitude_scales_row_means() {
        let mut s = Stream::new(11);
        let x = random_spec(&mut s, 40, 5);
        let f = random_channel_factors(&mut s, 5, 0.75, 1.25);
        let before = row_means(&x);
        let after = row_means(&amplitude_scale(&x, &f).unwrap());
        for k in 0..5 {
            assert!((after[k] - f[k] * before[k]).abs() <= 1e-12 * after[k]);
        }
    }

    #[test]
    fn contrast_examples() {
        let x = Spectrogram::from_fn(5, 1, |_, _| 3.0);
        assert_eq!(contrast_scale(&x, &[1.2]).unwrap(), x);
        let y = contrast_scale(&one_row(&[1.0, 3.0]), &[0.75]).unwrap();
        assert_eq!(y.values(), &[1.25, 2.75]);
        let z = one_row(&[0.5, 1.0, 7.0]);
        assert_eq!(contrast_scale(&z, &[1.0]).unwrap(), z);
        assert!(contrast_scale(&z, &[-1.0]).is_err());
    }

    #[test]
    fn contrast_clamps_at_zero() {
        let y = contrast_scale(&one_row(&[0.0, 0.0, 9.0]), &[2.0]).unwrap();
        assert_eq!(y.values()[0], 0.0);
        assert_eq!(y.values()[2], 15.0);
    }

    #[test]
    fn channel_factor_examples() {
        let mut s = Stream::new(5);
        assert_eq!(random_channel_factors(&mut s, 4, 1.0, 1.0), vec![1.0; 4]);
        let f = random_channel_factors(&mut s, 52, 0.75, 1.25);
        assert_eq!(f.len(), 52);
        assert!(f.iter().all(|v| (0.75..=1.25).contains(v)));
    }

    #[test]
    fn forced_rotation_draws() {
        // Search seeds for draws that hit n = 1 and n = w exactly.
        let x = one_row(&[1.0, 2.0, 3.0, 4.0]);
        let mut hit_one = false;
        let mut hit_full = false;
        for seed in 0..200 {
            let mut probe = Stream::new(seed);
            let n = probe.int_in(1, 4);
            let y = random_circular_rotation(&x, &mut Stream::new(seed));
            match n {
                1 => {
                    assert_eq!(y.values(), &[4.0, 1.0, 2.0, 3.0]);
                    hit_one = true;
                }
                4 => {
                    assert_eq!(y, x);
                    hit_full = true;
                }
                _ => {}
            }
        }
        assert!(hit_one && hit_full);
    }

    #[test]
    fn forced_identity_crop_draw() {
        let x = Spectrogram::from_fn(8, 2, |t, k| (t * 3 + k) as f64);
        let mut found = false;
        for seed in 0..5_000 {
            let d = draw_crop(&mut Stream::new(seed), 8, 4.0, 8.0, CompressFill::Tile);
            if d.mode == CropMode::CropStretch && d.c == 8 {
                assert_eq!(random_resized_crop(&x, &mut Stream::new(seed)), x);
                found = true;
                break;
            }
        }
        assert!(found);
    }

    proptest! {
        #[test]
        fn rotation_group_law(w in 1usize..40, h in 1usize..4, a in 0usize..40, b in 0usize..40, seed in any::<u64>()) {
            let (a, b) = (a % (w + 1), b % (w + 1));
            let x = random_spec(&mut Stream::new(seed), w, h);
            let twice = circular_rotate(&circular_rotate(&x, a).unwrap(), b).unwrap();
            prop_assert_eq!(twice, circular_rotate(&x, (a + b) % w).unwrap());
        }

        #[test]
        fn crop_stretch_stays_within_window(w in 2usize..50, seed in any::<u64>()) {
            let mut s = Stream::new(seed);
            let x = random_spec(&mut s, w, 2);
            let c = s.int_in(min_crop(w) as u64, w as u64) as usize;
            let start = s.int_in(0, (w - c) as u64) as usize;
            let y = resized_crop(&x, CropMode::CropStretch, c, start).unwrap();
            for k in 0..2 {
                let window = &x.row(k)[start..start + c];
                let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for v in y.row(k) {
                    prop_assert!(v >= lo && v <= hi);
                }
            }
        }

        #[test]
        fn amplitude_commutes_with_rotation(w in 1usize..30, h in 1usize..5, n in 0usize..30, seed in any::<u64>()) {
            let mut s = Stream::new(seed);
            let x = random_spec(&mut s, w, h);
            let f = random_channel_factors(&mut s, h, 0.75, 1.25);
            let n = n % (w + 1);
            let a = amplitude_scale(&circular_rotate(&x, n).unwrap(), &f).unwrap();
            let b = circular_rotate(&amplitude_scale(&x, &f).unwrap(), n).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
