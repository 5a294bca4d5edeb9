//! Range processing and micro-Doppler spectrograms.
//!
//! The beamformed vector is cut into pulses, each pulse is transformed into
//! range bins, the bins around the subjects are summed into one slow-time
//! signal, and a sliding windowed DFT of that signal gives the spectrogram.

mod export;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::radar::RadarParams;

pub use export::{read_spectrogram, write_spectrogram, SpectrogramMeta};

/// Default STFT window length.
pub const DEFAULT_WINDOW_LEN: usize = 128;
/// Hop that turns 12000 slow-time samples into 128 frames.
pub const DEFAULT_HOP: usize = 93;
pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 60.0;

/// Fast time by slow time. Column `q` is pulse `q`; storage is column-major,
/// so the backing vector is exactly the beamformed sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseMatrix {
    pub samples_per_pulse: usize,
    pub num_pulses: usize,
    pub values: Vec<Complex64>,
}

impl PulseMatrix {
    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        self.values[q * self.samples_per_pulse + p]
    }

    pub fn column(&self, q: usize) -> &[Complex64] {
        let p = self.samples_per_pulse;
        &self.values[q * p..(q + 1) * p]
    }

    pub fn into_flat(self) -> Vec<Complex64> {
        self.values
    }
}

/// Per-pulse range spectra, same layout as [`PulseMatrix`]: `get(l, q)` is
/// range bin `l` of pulse `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeMap {
    pub bins: usize,
    pub num_pulses: usize,
    pub values: Vec<Complex64>,
}

impl RangeMap {
    pub fn get(&self, l: usize, q: usize) -> Complex64 {
        self.values[q * self.bins + l]
    }

    pub fn column(&self, q: usize) -> &[Complex64] {
        &self.values[q * self.bins..(q + 1) * self.bins]
    }

    pub fn row(&self, l: usize) -> Vec<Complex64> {
        (0..self.num_pulses).map(|q| self.get(l, q)).collect()
    }
}

/// Slow-time signal after summing range bins `r_lower..=r_upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeSignal {
    pub values: Vec<Complex64>,
    pub r_lower: usize,
    pub r_upper: usize,
}

/// Power spectrogram. `bins` rows (Doppler, zero at row `bins / 2`, positive
/// frequencies above it) by `frames` columns; stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub hop: usize,
    pub window: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrogram {
    pub fn from_frames(bins: usize, hop: usize, window: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if bins == 0 || !power.len().is_multiple_of(bins) {
            return Err(Error::invalid(format!(
                "{} power values do not fill columns of {bins} bins",
                power.len()
            )));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("spectrogram power must be finite and non-negative"));
        }
        Ok(Self {
            bins,
            frames: power.len() / bins,
            hop,
            window,
            power,
        })
    }

    /// All bins of frame `t`, from most negative to most positive Doppler.
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.power[t * self.bins..(t + 1) * self.bins]
    }

    pub fn at(&self, row: usize, t: usize) -> f64 {
        self.power[t * self.bins + row]
    }

    /// Row holding zero Doppler.
    pub fn center_row(&self) -> usize {
        self.bins / 2
    }

    /// Centre time of each frame, seconds.
    pub fn frame_times(&self, sample_period: f64) -> Vec<f64> {
        let half = self.window.len() as f64 / 2.0;
        (0..self.frames)
            .map(|t| (t as f64 * self.hop as f64 + half) * sample_period)
            .collect()
    }

    /// Doppler frequency of each row, Hz.
    pub fn doppler_axis(&self, sample_period: f64) -> Vec<f64> {
        let df = 1.0 / (self.bins as f64 * sample_period);
        let c = self.center_row() as f64;
        (0..self.bins).map(|r| (r as f64 - c) * df).collect()
    }

    /// Intensity-weighted mean Doppler offset, in rows relative to zero Doppler.
    pub fn mean_doppler_offset(&self) -> f64 {
        let c = self.center_row() as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for t in 0..self.frames {
            for (row, p) in self.frame(t).iter().enumerate() {
                num += p * (row as f64 - c);
                den += p;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Stacks consecutive runs of `samples_per_pulse` samples into columns.
pub fn reshape_pulses(x: Vec<Complex64>, samples_per_pulse: usize) -> Result<PulseMatrix> {
    if samples_per_pulse == 0 || !x.len().is_multiple_of(samples_per_pulse) {
        return Err(Error::invalid(format!(
            "vector of length {} cannot be split into pulses of {samples_per_pulse}",
            x.len()
        )));
    }
    Ok(PulseMatrix {
        samples_per_pulse,
        num_pulses: x.len() / samples_per_pulse,
        values: x,
    })
}

/// Column-wise P-point DFT, `r(l, q) = Σ_p x(p, q) exp(-j 2π l p / P)`.
pub fn range_map(pm: PulseMatrix) -> RangeMap {
    let bins = pm.samples_per_pulse;
    let mut values = pm.values;
    if bins > 0 && !values.is_empty() {
        let fft = FftPlanner::<f64>::new().plan_fft_forward(bins);
        fft.process(&mut values);
    }
    RangeMap {
        bins,
        num_pulses: pm.num_pulses,
        values,
    }
}

/// Sums range bins `r_lower..=r_upper` of every pulse.
pub fn collapse_range(rm: &RangeMap, r_lower: usize, r_upper: usize) -> Result<SlowTimeSignal> {
    if r_lower > r_upper || r_upper >= rm.bins {
        return Err(Error::invalid(format!(
            "range bins [{r_lower}, {r_upper}] invalid for {} bins",
            rm.bins
        )));
    }
    let values = (0..rm.num_pulses)
        .map(|q| rm.column(q)[r_lower..=r_upper].iter().sum())
        .collect();
    Ok(SlowTimeSignal {
        values,
        r_lower,
        r_upper,
    })
}

/// Range bins covering `[min_range, max_range]` metres, clipped to the map.
pub fn range_bins_for(params: &RadarParams, min_range: f64, max_range: f64) -> Result<(usize, usize)> {
    if !(min_range >= 0.0 && max_range > min_range) {
        return Err(Error::invalid(format!(
            "range interval [{min_range}, {max_range}] m is empty"
        )));
    }
    let res = params.range_bin_resolution();
    let last = params.samples_per_pulse - 1;
    let lower = ((min_range / res).ceil() as usize).min(last);
    let upper = ((max_range / res).floor() as usize).min(last);
    if lower > upper {
        return Err(Error::invalid(format!(
            "no range bin falls inside [{min_range}, {max_range}] m"
        )));
    }
    Ok((lower, upper))
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|m| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * m as f64 / len as f64).cos())
        .collect()
}

pub fn rectangular(len: usize) -> Vec<f64> {
    vec![1.0; len]
}

/// Moves index 0 to the centre: `out[r] = x[(r + n - n/2) % n]`.
pub fn fftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..n).map(|r| x[(r + n - n / 2) % n]).collect()
}

/// Inverse of [`fftshift`] for any length.
pub fn ifftshift<T: Copy>(x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..n).map(|k| x[(k + n / 2) % n]).collect()
}

/// Sliding windowed DFT power of `v`. Frame `t` covers samples
/// `[t * hop, t * hop + H)`; each column is fftshifted so row `H / 2` is zero
/// Doppler.
pub fn spectrogram(v: &SlowTimeSignal, window: &[f64], hop: usize) -> Result<Spectrogram> {
    let h = window.len();
    if h == 0 || h > v.values.len() {
        return Err(Error::invalid(format!(
            "window length {h} must be in 1..={} (signal length)",
            v.values.len()
        )));
    }
    if hop == 0 {
        return Err(Error::invalid("hop must be at least 1"));
    }
    let frames = (v.values.len() - h) / hop + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(h);
    let mut buf = vec![Complex64::new(0.0, 0.0); h];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = Vec::with_capacity(frames * h);
    for t in 0..frames {
        let seg = &v.values[t * hop..t * hop + h];
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(window) {
            *b = x * *w;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        power.extend((0..h).map(|r| buf[(r + h - h / 2) % h].norm_sqr()));
    }
    Ok(Spectrogram {
        bins: h,
        frames,
        hop,
        window: window.to_vec(),
        power,
    })
}

/// Row-major real image, `rows` by `cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ImageMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// Log-compresses the spectrogram to `[0, 1]`: dB relative to the global
/// maximum, clipped to `-dynamic_range_db`, mapped linearly. Rows are Doppler
/// bins, columns are frames.
pub fn to_image(spec: &Spectrogram, dynamic_range_db: f64) -> ImageMatrix {
    let mut img = ImageMatrix::zeros(spec.bins, spec.frames);
    let max = spec.power.iter().fold(0.0_f64, |a, &b| a.max(b));
    if max <= 0.0 {
        return img;
    }
    for t in 0..spec.frames {
        for (row, &p) in spec.frame(t).iter().enumerate() {
            let db = if p > 0.0 { 10.0 * (p / max).log10() } else { f64::NEG_INFINITY };
            let clipped = db.max(-dynamic_range_db).min(0.0);
            img.set(row, t, (clipped + dynamic_range_db) / dynamic_range_db);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn reshape_stacks_columns() {
        let x: Vec<Complex64> = (0..6).map(|i| c(i as f64)).collect();
        let pm = reshape_pulses(x.clone(), 3).unwrap();
        assert_eq!(pm.num_pulses, 2);
        assert_eq!(pm.column(0), &x[0..3]);
        assert_eq!(pm.get(1, 1), c(4.0));
        assert_eq!(pm.into_flat(), x);
        assert!(reshape_pulses(vec![c(0.0); 7], 3).is_err());
    }

    #[test]
    fn full_size_reshape_shape() {
        let pm = reshape_pulses(vec![c(0.0); 6_144_000], 512).unwrap();
        assert_eq!((pm.samples_per_pulse, pm.num_pulses), (512, 12_000));
    }

    #[test]
    fn dc_column_concentrates_in_bin_zero() {
        let rm = range_map(reshape_pulses(vec![c(1.0); 64], 64).unwrap());
        assert!((rm.get(0, 0) - c(64.0)).norm() < 1e-9);
        for l in 1..64 {
            assert!(rm.get(l, 0).norm() < 1e-9);
        }
    }

    #[test]
    fn collapse_single_row_and_bounds() {
        let x: Vec<Complex64> = (0..32).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let rm = range_map(reshape_pulses(x, 8).unwrap());
        let v = collapse_range(&rm, 3, 3).unwrap();
        assert_eq!(v.values, rm.row(3));
        assert!(collapse_range(&rm, 4, 3).is_err());
        assert!(collapse_range(&rm, 0, 8).is_err());
    }

    #[test]
    fn collapse_of_isolated_row() {
        let mut values = vec![c(0.0); 40];
        for q in 0..5 {
            values[q * 8 + 5] = Complex64::new(q as f64, -1.0);
        }
        let rm = RangeMap {
            bins: 8,
            num_pulses: 5,
            values,
        };
        assert_eq!(collapse_range(&rm, 2, 7).unwrap().values, rm.row(5));
    }

    #[test]
    fn default_range_bins_cover_subjects() {
        let p = RadarParams::default();
        let (lo, hi) = range_bins_for(&p, 0.5, 4.0).unwrap();
        assert_eq!((lo, hi), (14, 106));
        let short = p.with_samples_per_pulse(128);
        assert_eq!(range_bins_for(&short, 0.5, 4.0).unwrap(), (14, 106));
        assert!(range_bins_for(&p, 4.0, 0.5).is_err());
    }

    #[test]
    fn frame_count_for_default_hop() {
        let v = SlowTimeSignal {
            values: vec![c(0.0); 12_000],
            r_lower: 0,
            r_upper: 0,
        };
        let s = spectrogram(&v, &hann(128), DEFAULT_HOP).unwrap();
        assert_eq!((s.bins, s.frames), (128, 128));
        assert!(s.power.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn tone_lands_on_shifted_bin() {
        let h = 128;
        let v = SlowTimeSignal {
            values: (0..4 * h)
                .map(|n| Complex64::from_polar(1.0, 2.0 * PI * 16.0 * n as f64 / h as f64))
                .collect(),
            r_lower: 0,
            r_upper: 0,
        };
        let s = spectrogram(&v, &rectangular(h), h).unwrap();
        assert_eq!(s.frames, 4);
        for t in 0..4 {
            let frame = s.frame(t);
            let peak = (0..h).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
            assert_eq!(peak, 80);
            assert!((frame[80] - (h * h) as f64).abs() < 1e-6);
        }
        assert!(s.mean_doppler_offset() > 15.9);
    }

    #[test]
    fn spectrogram_rejects_long_window() {
        let v = SlowTimeSignal {
            values: vec![c(1.0); 10],
            r_lower: 0,
            r_upper: 0,
        };
        assert!(spectrogram(&v, &hann(11), 1).is_err());
        assert!(spectrogram(&v, &hann(4), 0).is_err());
    }

    #[test]
    fn shift_layouts() {
        let even: Vec<usize> = (0..8).collect();
        assert_eq!(fftshift(&even), vec![4, 5, 6, 7, 0, 1, 2, 3]);
        assert_eq!(fftshift(&fftshift(&even)), even);
        let odd: Vec<usize> = (0..5).collect();
        assert_eq!(fftshift(&odd), vec![3, 4, 0, 1, 2]);
        assert_eq!(ifftshift(&fftshift(&odd)), odd);
    }

    fn spec_from(power: Vec<f64>, bins: usize) -> Spectrogram {
        Spectrogram::from_frames(bins, 1, rectangular(bins), power).unwrap()
    }

    #[test]
    fn image_of_single_pixel() {
        let mut power = vec![0.0; 16];
        power[5] = 3.0;
        let img = to_image(&spec_from(power, 4), 60.0);
        assert_eq!(img.get(1, 1), 1.0);
        assert_eq!(img.data.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn image_is_scale_invariant_and_uniform() {
        let power: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin().abs() + 1e-3).collect();
        let a = to_image(&spec_from(power.clone(), 8), 40.0);
        let b = to_image(&spec_from(power.iter().map(|p| p * 1234.5).collect(), 8), 40.0);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-12);
        }
        let uniform = to_image(&spec_from(vec![2.5; 64], 8), 40.0);
        assert!(uniform.data.iter().all(|&v| v == 1.0));
        let zero = to_image(&spec_from(vec![0.0; 64], 8), 40.0);
        assert!(zero.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_negative_power() {
        assert!(Spectrogram::from_frames(2, 1, rectangular(2), vec![1.0, -1.0]).is_err());
    }
}
