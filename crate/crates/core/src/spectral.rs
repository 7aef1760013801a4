//! STFT analysis/synthesis, the ERB band layout and band-domain helpers.
//!
//! All frames are 20 ms long with 50% overlap. The forward DFT is
//! unnormalized and the inverse is scaled by `1/window_len`, so a frame that
//! goes through [`Stft::analyze`] and [`Stft::synthesize`] unchanged comes
//! back windowed twice. The Vorbis window makes that overlap-add exact.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Number of perceptual bands.
pub const NB_BANDS: usize = 34;

/// Upper edge of the enhanced region.
pub const MAX_BAND_HZ: f64 = 20_000.0;

/// Minimum band width.
pub const MIN_BAND_HZ: f64 = 100.0;

/// Frame duration in seconds.
pub const FRAME_SECONDS: f64 = 0.02;

/// Framing parameters of one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameSpec {
    sample_rate: u32,
    window_len: usize,
}

impl FrameSpec {
    /// 20 ms windows at `sample_rate`.
    pub fn new(sample_rate: u32) -> Result<Self> {
        if sample_rate % 50 != 0 {
            return Err(Error::config(format!(
                "sample rate {sample_rate} Hz does not give an integer 20 ms window"
            )));
        }
        Self::with_window_len(sample_rate, sample_rate as usize / 50)
    }

    pub fn with_window_len(sample_rate: u32, window_len: usize) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if window_len < 4 || window_len % 2 != 0 {
            return Err(Error::config(format!(
                "window length {window_len} must be even and at least 4"
            )));
        }
        Ok(FrameSpec {
            sample_rate,
            window_len,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Always half the window.
    pub fn hop(&self) -> usize {
        self.window_len / 2
    }

    pub fn fft_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frequency distance between adjacent DFT bins, in Hz.
    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate as f64 / self.window_len as f64
    }
}

/// Vorbis power-complementary window `sin(pi/2 * sin^2(pi (n + 0.5) / N))`.
pub fn vorbis_window(window_len: usize) -> Result<Vec<f64>> {
    if window_len < 4 || window_len % 2 != 0 {
        return Err(Error::config(format!(
            "window length {window_len} must be even and at least 4"
        )));
    }
    let n = window_len as f64;
    Ok((0..window_len)
        .map(|i| {
            let s = (PI * (i as f64 + 0.5) / n).sin();
            (0.5 * PI * s * s).sin()
        })
        .collect())
}

/// Complex half-spectrum of one analysis frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    pub frame_index: i64,
}

impl Spectrum {
    pub fn zeros(fft_bins: usize, frame_index: i64) -> Self {
        Spectrum {
            bins: vec![Complex64::new(0.0, 0.0); fft_bins],
            frame_index,
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.bins.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Total energy of all bins.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Tail of the previous synthesized window, waiting to be overlap-added.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapState {
    tail: Vec<f64>,
}

impl OverlapState {
    pub fn new(hop: usize) -> Self {
        OverlapState {
            tail: vec![0.0; hop],
        }
    }

    pub fn reset(&mut self) {
        self.tail.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Windowed real STFT of a fixed frame size.
#[derive(Clone)]
pub struct Stft {
    spec: FrameSpec,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for Stft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stft").field("spec", &self.spec).finish()
    }
}

impl Stft {
    pub fn new(spec: FrameSpec) -> Result<Self> {
        let window = vorbis_window(spec.window_len())?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Stft {
            spec,
            window,
            forward: planner.plan_fft_forward(spec.window_len()),
            inverse: planner.plan_fft_inverse(spec.window_len()),
        })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Window `frame` and take its real DFT.
    pub fn analyze(&self, frame: &[f64], frame_index: i64) -> Result<Spectrum> {
        let n = self.spec.window_len();
        if frame.len() != n {
            return Err(Error::usage(format!(
                "analysis frame has {} samples, expected {n}",
                frame.len()
            )));
        }
        let mut input: Vec<f64> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| x * w)
            .collect();
        let mut bins = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut bins)
            .map_err(|e| Error::usage(e.to_string()))?;
        Ok(Spectrum { bins, frame_index })
    }

    /// Inverse DFT, window, and overlap-add. Returns the `hop` samples that
    /// are complete after adding this frame.
    pub fn synthesize(&self, spec: &Spectrum, overlap: &mut OverlapState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.spec.hop()];
        self.synthesize_into(spec, overlap, &mut out)?;
        Ok(out)
    }

    pub fn synthesize_into(
        &self,
        spec: &Spectrum,
        overlap: &mut OverlapState,
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.spec.window_len();
        let hop = self.spec.hop();
        if spec.len() != self.spec.fft_bins() {
            return Err(Error::usage(format!(
                "spectrum has {} bins, expected {}",
                spec.len(),
                self.spec.fft_bins()
            )));
        }
        if overlap.tail.len() != hop || out.len() != hop {
            return Err(Error::usage("overlap state or output does not match hop size"));
        }
        let mut bins = spec.bins.clone();
        // a real signal has no imaginary DC or Nyquist component
        bins[0].im = 0.0;
        let last = bins.len() - 1;
        bins[last].im = 0.0;
        let mut time = self.inverse.make_output_vec();
        self.inverse
            .process(&mut bins, &mut time)
            .map_err(|e| Error::usage(e.to_string()))?;
        let scale = 1.0 / n as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o = overlap.tail[i] + time[i] * scale * self.window[i];
        }
        for i in 0..hop {
            overlap.tail[i] = time[hop + i] * scale * self.window[hop + i];
        }
        Ok(())
    }
}

/// Perceptual partition of the DFT bins into [`NB_BANDS`] bands with
/// triangular, 50%-overlapping responses.
#[derive(Clone, Debug, PartialEq)]
pub struct BandLayout {
    edges: Vec<usize>,
    fft_bins: usize,
    /// First bin with a non-zero weight for each band.
    starts: Vec<usize>,
    /// Weights of consecutive bins starting at `starts[b]`.
    weights: Vec<Vec<f64>>,
}

/// ERB-rate (number of ERBs below `hz`).
pub fn erb_rate(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

pub fn erb_rate_to_hz(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) / 0.00437
}

/// Equivalent rectangular bandwidth at `hz`.
pub fn erb_width(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

/// Place band edges uniformly on the ERB-rate scale from 0 to
/// `min(20 kHz, Nyquist)`, widening narrow bands to 100 Hz and spreading the
/// remaining range over the remaining bands.
pub fn build_erb_layout(spec: &FrameSpec) -> Result<BandLayout> {
    if spec.sample_rate() < 8_000 {
        return Err(Error::config(format!(
            "sample rate {} Hz is below 8 kHz",
            spec.sample_rate()
        )));
    }
    let spacing = spec.bin_spacing();
    let f_max = MAX_BAND_HZ.min(spec.sample_rate() as f64 / 2.0);
    let last_edge = (f_max / spacing).round() as usize;
    let min_width = ((MIN_BAND_HZ / spacing) - 1e-9).ceil().max(1.0) as usize;
    if NB_BANDS * min_width > last_edge {
        return Err(Error::config(format!(
            "only {} bands of {min_width} bins fit below {f_max} Hz",
            last_edge / min_width
        )));
    }

    let rate_max = erb_rate(f_max);
    let mut edges = Vec::with_capacity(NB_BANDS + 1);
    edges.push(0usize);
    let mut prev_width = 0usize;
    for band in 0..NB_BANDS {
        let remaining = NB_BANDS - band;
        let cur = *edges.last().unwrap();
        if remaining == 1 {
            edges.push(last_edge);
            break;
        }
        let rate_cur = erb_rate(cur as f64 * spacing);
        let target = erb_rate_to_hz(rate_cur + (rate_max - rate_cur) / remaining as f64);
        let mut edge = (target / spacing).round() as usize;
        edge = edge.max(cur + min_width).max(cur + prev_width);
        edge = edge.min(last_edge - (remaining - 1) * min_width);
        prev_width = edge - cur;
        edges.push(edge);
    }
    Ok(BandLayout::from_edges(edges, spec.fft_bins()))
}

impl BandLayout {
    fn from_edges(edges: Vec<usize>, fft_bins: usize) -> Self {
        let last = edges[NB_BANDS];
        let centers: Vec<f64> = (0..NB_BANDS)
            .map(|b| {
                if b + 1 == NB_BANDS {
                    (edges[b] + edges[b + 1]) as f64 / 2.0
                } else {
                    (edges[b] + edges[b + 1] - 1) as f64 / 2.0
                }
            })
            .collect();

        let mut dense = vec![vec![0.0f64; last + 1]; NB_BANDS];
        for k in 0..=last {
            let kf = k as f64;
            if kf <= centers[0] {
                dense[0][k] = 1.0;
            } else if kf >= centers[NB_BANDS - 1] {
                dense[NB_BANDS - 1][k] = 1.0;
            } else {
                let b = centers.partition_point(|&c| c <= kf) - 1;
                let frac = (kf - centers[b]) / (centers[b + 1] - centers[b]);
                dense[b][k] = 1.0 - frac;
                dense[b + 1][k] = frac;
            }
        }

        let mut starts = Vec::with_capacity(NB_BANDS);
        let mut weights = Vec::with_capacity(NB_BANDS);
        for row in dense {
            let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let end = row.iter().rposition(|&w| w > 0.0).map_or(first, |p| p + 1);
            starts.push(first);
            weights.push(row[first..end].to_vec());
        }
        BandLayout {
            edges,
            fft_bins,
            starts,
            weights,
        }
    }

    /// The 35 band edges, as bin indices.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn fft_bins(&self) -> usize {
        self.fft_bins
    }

    /// Number of bins covered by the bands (bins `0..=last edge`).
    pub fn covered_bins(&self) -> usize {
        self.edges[NB_BANDS] + 1
    }

    /// Nominal width of each band, in bins.
    pub fn band_widths(&self) -> Vec<usize> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Weight of `band` at `bin`.
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        let start = self.starts[band];
        if bin < start {
            return 0.0;
        }
        self.weights[band].get(bin - start).copied().unwrap_or(0.0)
    }

    /// `(first_bin, weights)` of one band.
    pub fn band_weights(&self, band: usize) -> (usize, &[f64]) {
        (self.starts[band], &self.weights[band])
    }

    fn check(&self, spec: &Spectrum) -> Result<()> {
        if spec.len() != self.fft_bins {
            return Err(Error::usage(format!(
                "spectrum has {} bins, layout expects {}",
                spec.len(),
                self.fft_bins
            )));
        }
        Ok(())
    }
}

/// Fixed-size vector with one value per band.
pub type BandVector = [f64; NB_BANDS];

/// Weighted band energies `sum_k w_b(k) |X_k|^2`.
pub fn band_energy_sq(spec: &Spectrum, layout: &BandLayout) -> Result<BandVector> {
    layout.check(spec)?;
    let mut out = [0.0; NB_BANDS];
    for (b, e) in out.iter_mut().enumerate() {
        let (start, w) = layout.band_weights(b);
        *e = w
            .iter()
            .zip(&spec.bins[start..start + w.len()])
            .map(|(w, c)| w * c.norm_sqr())
            .sum();
    }
    Ok(out)
}

/// Band L2 norms `X_b = sqrt(sum_k w_b(k) |X_k|^2)`.
pub fn band_energies(spec: &Spectrum, layout: &BandLayout) -> Result<BandVector> {
    let mut e = band_energy_sq(spec, layout)?;
    e.iter_mut().for_each(|x| *x = x.sqrt());
    Ok(e)
}

/// Weighted band cross term `Re[sum_k w_b(k) conj(a_k) b_k]`.
pub fn band_cross(a: &Spectrum, b: &Spectrum, layout: &BandLayout) -> Result<BandVector> {
    layout.check(a)?;
    layout.check(b)?;
    let mut out = [0.0; NB_BANDS];
    for (band, e) in out.iter_mut().enumerate() {
        let (start, w) = layout.band_weights(band);
        let end = start + w.len();
        *e = w
            .iter()
            .zip(a.bins[start..end].iter().zip(&b.bins[start..end]))
            .map(|(w, (x, y))| w * (x.re * y.re + x.im * y.im))
            .sum();
    }
    Ok(out)
}

/// Linear interpolation of band gains onto bins. Bins above the last band
/// edge take the gain of the top band.
pub fn interpolate_gains(band_gains: &BandVector, layout: &BandLayout) -> Vec<f64> {
    let mut out = vec![0.0; layout.fft_bins];
    for (b, g) in band_gains.iter().enumerate() {
        let (start, w) = layout.band_weights(b);
        for (o, w) in out[start..start + w.len()].iter_mut().zip(w) {
            *o += w * g;
        }
    }
    let top = band_gains[NB_BANDS - 1];
    for o in out.iter_mut().skip(layout.covered_bins()) {
        *o = top;
    }
    out
}

const RESAMPLE_RATES: [u32; 5] = [8_000, 16_000, 24_000, 32_000, 48_000];

/// Move a 20 ms spectrum between sample rates by zero-padding or truncating
/// bins. Amplitudes are rescaled so the time-domain waveform keeps its level.
pub fn stft_resample(spec: &Spectrum, from_rate: u32, to_rate: u32) -> Result<Spectrum> {
    if !RESAMPLE_RATES.contains(&from_rate) || !RESAMPLE_RATES.contains(&to_rate) {
        return Err(Error::UnsupportedRate {
            from: from_rate,
            to: to_rate,
        });
    }
    let from_bins = FrameSpec::new(from_rate)?.fft_bins();
    let to_bins = FrameSpec::new(to_rate)?.fft_bins();
    if spec.len() != from_bins {
        return Err(Error::usage(format!(
            "spectrum has {} bins, {from_rate} Hz frames have {from_bins}",
            spec.len()
        )));
    }
    if from_rate == to_rate {
        return Ok(spec.clone());
    }
    let scale = to_rate as f64 / from_rate as f64;
    let mut out = Spectrum::zeros(to_bins, spec.frame_index);
    if to_bins > from_bins {
        for (o, c) in out.bins.iter_mut().zip(&spec.bins) {
            *o = c * scale;
        }
        // the old Nyquist bin is real and counted once; as an interior bin
        // its conjugate twin doubles it
        let nyq = from_bins - 1;
        out.bins[nyq] = Complex64::new(spec.bins[nyq].re * scale * 0.5, 0.0);
    } else {
        for (o, c) in out.bins.iter_mut().zip(&spec.bins) {
            *o = c * scale;
        }
        let nyq = to_bins - 1;
        out.bins[nyq] = Complex64::new(2.0 * spec.bins[nyq].re * scale, 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n / 2 + 1)
            .map(|m| {
                x.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let ph = -2.0 * PI * (m * k % n) as f64 / n as f64;
                        Complex64::new(v * ph.cos(), v * ph.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn vorbis_window_princen_bradley() {
        let w = vorbis_window(960).unwrap();
        let worst = (0..480)
            .map(|n| (w[n] * w[n] + w[n + 480] * w[n + 480] - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
        for n in 0..960 {
            assert!((w[n] - w[959 - n]).abs() < 1e-15);
        }
    }

    #[test]
    fn vorbis_window_len4_closed_form() {
        // sin(pi/2 sin^2(pi/8)) etc., evaluated independently with mpmath
        let expected = [
            0.228014324191697900, 0.973657777642331212, 0.973657777642331212,
            0.228014324191697900,
        ];
        let w = vorbis_window(4).unwrap();
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn vorbis_window_rejects_bad_lengths() {
        assert!(matches!(vorbis_window(3), Err(Error::Config(_))));
        assert!(matches!(vorbis_window(2), Err(Error::Config(_))));
        assert!(matches!(vorbis_window(961), Err(Error::Config(_))));
    }

    #[test]
    fn analyze_zero_and_impulse() {
        let stft = Stft::new(FrameSpec::new(48_000).unwrap()).unwrap();
        let zero = stft.analyze(&[0.0; 960], 0).unwrap();
        assert!(zero.bins.iter().all(|c| c.norm() == 0.0));

        let k = 37;
        let mut frame = vec![0.0; 960];
        frame[k] = 1.0;
        let spec = stft.analyze(&frame, 0).unwrap();
        let w = stft.window()[k];
        for (m, c) in spec.bins.iter().enumerate() {
            let ph = -2.0 * PI * (m * k) as f64 / 960.0;
            let expected = Complex64::new(w * ph.cos(), w * ph.sin());
            assert!((c - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn analyze_matches_naive_dft() {
        let stft = Stft::new(FrameSpec::new(48_000).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frame: Vec<f64> = (0..960).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = stft.analyze(&frame, 3).unwrap();
        let windowed: Vec<f64> = frame.iter().zip(stft.window()).map(|(x, w)| x * w).collect();
        let oracle = naive_dft(&windowed);
        let scale = oracle.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in spec.bins.iter().zip(&oracle) {
            assert!((a - b).norm() <= 1e-6 * scale);
        }
        assert_eq!(spec.frame_index, 3);
    }

    #[test]
    fn analyze_rejects_wrong_length() {
        let stft = Stft::new(FrameSpec::new(48_000).unwrap()).unwrap();
        assert!(matches!(stft.analyze(&[0.0; 959], 0), Err(Error::Usage(_))));
    }

    fn stream(stft: &Stft, x: &[f64]) -> Vec<f64> {
        let hop = stft.spec().hop();
        let n = stft.spec().window_len();
        let mut buf = vec![0.0; n];
        let mut ola = OverlapState::new(hop);
        let mut out = Vec::new();
        for chunk in x.chunks_exact(hop) {
            buf.copy_within(hop.., 0);
            buf[n - hop..].copy_from_slice(chunk);
            let spec = stft.analyze(&buf, 0).unwrap();
            out.extend(stft.synthesize(&spec, &mut ola).unwrap());
        }
        out
    }

    #[test]
    fn perfect_reconstruction_one_hop_delay() {
        let stft = Stft::new(FrameSpec::new(48_000).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..48_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = stream(&stft, &x);
        let hop = 480;
        let (mut err, mut sig) = (0.0, 0.0);
        for n in hop..x.len() {
            err += (y[n] - x[n - hop]).powi(2);
            sig += x[n - hop].powi(2);
        }
        let db = 10.0 * (err / sig).log10();
        assert!(db < -60.0, "{db}");
    }

    #[test]
    fn zero_spectrum_stream_is_silent() {
        let stft = Stft::new(FrameSpec::new(48_000).unwrap()).unwrap();
        let mut ola = OverlapState::new(480);
        for _ in 0..4 {
            let out = stft.synthesize(&Spectrum::zeros(481, 0), &mut ola).unwrap();
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_tone_frame_synthesis() {
        // a single frame of a 1 kHz tone comes back as w^2 * tone
        let stft = Stft::new(FrameSpec::new(48_000).unwrap()).unwrap();
        let tone: Vec<f64> = (0..960)
            .map(|n| (2.0 * PI * 1000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let spec = stft.analyze(&tone, 0).unwrap();
        let mut ola = OverlapState::new(480);
        let first = stft.synthesize(&spec, &mut ola).unwrap();
        let second = stft.synthesize(&Spectrum::zeros(481, 1), &mut ola).unwrap();
        let w = stft.window();
        for n in 0..960 {
            let got = if n < 480 { first[n] } else { second[n - 480] };
            assert!((got - tone[n] * w[n] * w[n]).abs() < 1e-6);
        }
    }

    #[test]
    fn erb_layout_48k() {
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        let edges = layout.edges();
        assert_eq!(edges.len(), NB_BANDS + 1);
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        assert!(edges[NB_BANDS] as f64 * 50.0 <= 20_000.0);
        let widths = layout.band_widths();
        assert!(widths[0] >= 2);
        assert!(widths.iter().all(|&w| w >= 2));
        // non-decreasing once past the 100 Hz floor
        for w in widths.windows(2) {
            assert!(w[1] >= w[0], "{widths:?}");
        }
    }

    #[test]
    fn erb_layout_widths_follow_erb_scale() {
        // above the floor, a band should be roughly 1.2 ERB wide at its center
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        let e = layout.edges();
        let per_band = erb_rate(20_000.0) / NB_BANDS as f64;
        for b in 20..NB_BANDS {
            let lo = e[b] as f64 * 50.0;
            let hi = e[b + 1] as f64 * 50.0;
            let erbs = erb_rate(hi) - erb_rate(lo);
            assert!((erbs - per_band).abs() < 0.5 * per_band, "band {b}: {erbs}");
            let center = 0.5 * (lo + hi);
            assert!(hi - lo >= 0.5 * erb_width(center));
        }
    }

    #[test]
    fn erb_layout_other_rates_and_errors() {
        for rate in [8_000, 16_000, 24_000, 32_000] {
            let spec = FrameSpec::new(rate).unwrap();
            let layout = build_erb_layout(&spec).unwrap();
            assert_eq!(layout.edges().len(), NB_BANDS + 1);
            assert!(layout.band_widths().iter().all(|&w| w >= 2));
            assert_eq!(layout.edges()[NB_BANDS], spec.fft_bins() - 1);
        }
        assert!(matches!(
            build_erb_layout(&FrameSpec::new(6_000).unwrap()),
            Err(Error::Config(_))
        ));
        // too few bins: 8 kHz with a 5 ms window has 100 Hz spacing
        let coarse = FrameSpec::with_window_len(8_000, 40).unwrap();
        assert!(matches!(build_erb_layout(&coarse), Err(Error::Config(_))));
    }

    #[test]
    fn erb_layout_is_deterministic() {
        let spec = FrameSpec::new(48_000).unwrap();
        assert_eq!(build_erb_layout(&spec).unwrap(), build_erb_layout(&spec).unwrap());
    }

    #[test]
    fn partition_of_unity() {
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        for k in 0..layout.covered_bins() {
            let s: f64 = (0..NB_BANDS).map(|b| layout.weight(b, k)).sum();
            assert!((s - 1.0).abs() < 1e-12, "bin {k}: {s}");
        }
        for k in layout.covered_bins()..481 {
            assert!((0..NB_BANDS).all(|b| layout.weight(b, k) == 0.0));
        }
    }

    #[test]
    fn band_energies_cases() {
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        let zero = band_energies(&Spectrum::zeros(481, 0), &layout).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let flat = Spectrum {
            bins: vec![Complex64::new(0.6, 0.8); 481],
            frame_index: 0,
        };
        let e = band_energies(&flat, &layout).unwrap();
        for b in 0..NB_BANDS {
            let s: f64 = (0..481).map(|k| layout.weight(b, k)).sum();
            assert!((e[b] - s.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn band_energies_match_brute_force() {
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = Spectrum {
            bins: (0..481)
                .map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
                .collect(),
            frame_index: 0,
        };
        let e = band_energies(&spec, &layout).unwrap();
        for b in 0..NB_BANDS {
            let mut acc = 0.0;
            for k in 0..481 {
                acc += layout.weight(b, k) * (spec.bins[k].re.powi(2) + spec.bins[k].im.powi(2));
            }
            assert!((e[b] - acc.sqrt()).abs() <= 1e-12 * acc.sqrt());
        }
        // Parseval over the covered bins
        let total: f64 = e.iter().map(|x| x * x).sum();
        let direct: f64 = spec.bins[..layout.covered_bins()].iter().map(|c| c.norm_sqr()).sum();
        assert!((total - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn band_energies_shape_mismatch() {
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        assert!(band_energies(&Spectrum::zeros(161, 0), &layout).is_err());
    }

    #[test]
    fn interpolate_gains_cases() {
        let layout = build_erb_layout(&FrameSpec::new(48_000).unwrap()).unwrap();
        let ones = interpolate_gains(&[1.0; NB_BANDS], &layout);
        assert!(ones.iter().all(|&g| (g - 1.0).abs() < 1e-12));
        let zeros = interpolate_gains(&[0.0; NB_BANDS], &layout);
        assert!(zeros.iter().all(|&g| g == 0.0));

        let band = 12;
        let mut single = [0.0; NB_BANDS];
        single[band] = 1.0;
        let bump = interpolate_gains(&single, &layout);
        for (k, g) in bump.iter().enumerate() {
            assert_eq!(*g, layout.weight(band, k));
        }
        let peak = bump.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 0.5 && peak <= 1.0);
    }

    #[test]
    fn resample_round_trip_and_zero() {
        let up = stft_resample(&Spectrum::zeros(161, 4), 16_000, 48_000).unwrap();
        assert_eq!(up.len(), 481);
        assert!(up.bins.iter().all(|c| c.norm() == 0.0));
        assert_eq!(up.frame_index, 4);

        assert!(matches!(
            stft_resample(&Spectrum::zeros(442, 0), 44_100, 48_000),
            Err(Error::UnsupportedRate { .. })
        ));
        assert!(stft_resample(&Spectrum::zeros(100, 0), 16_000, 48_000).is_err());
    }

    #[test]
    fn resample_band_limited_stream_round_trip() {
        // 16 kHz stream -> up to 48 kHz bins -> back down -> 16 kHz synthesis
        let stft16 = Stft::new(FrameSpec::new(16_000).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..16_000)
            .map(|n| {
                let t = n as f64 / 16_000.0;
                (2.0 * PI * 440.0 * t).sin() + 0.3 * (2.0 * PI * 3100.0 * t).cos()
                    + 0.01 * rng.random_range(-1.0..1.0)
            })
            .collect();
        let mut buf = vec![0.0; 320];
        let mut ola = OverlapState::new(160);
        let mut y = Vec::new();
        for chunk in x.chunks_exact(160) {
            buf.copy_within(160.., 0);
            buf[160..].copy_from_slice(chunk);
            let spec = stft16.analyze(&buf, 0).unwrap();
            let up = stft_resample(&spec, 16_000, 48_000).unwrap();
            let down = stft_resample(&up, 48_000, 16_000).unwrap();
            y.extend(stft16.synthesize(&down, &mut ola).unwrap());
        }
        let (mut err, mut sig) = (0.0, 0.0);
        for n in 160..x.len() {
            err += (y[n] - x[n - 160]).powi(2);
            sig += x[n - 160].powi(2);
        }
        assert!(10.0 * (err / sig).log10() < -60.0);
    }
}
