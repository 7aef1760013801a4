//! Streaming front end shared by the enhancer and target extraction.
//!
//! Every input hop advances the analysis by one frame. Frame `l` is reported
//! once frame `l + 3` has been analysed, so the band magnitudes used as
//! look-ahead features are available. Band analysis, pitch search and comb
//! filtering always run in the 48 kHz domain: other input rates are analysed
//! at their own rate, their spectra zero-padded up to 48 kHz, and a 48 kHz
//! waveform is resynthesized (one hop late) for the pitch search and the comb.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::features::{assemble_features, FeatureVector, LOOKAHEAD_FRAMES};
use crate::pitch::{
    comb_filter, pitch_coherence, refine_period, CombConfig, PitchConfig, PitchEstimate, PitchTracker, PITCH_RATE,
    T_MAX,
};
use crate::spectral::{
    band_energies, build_erb_layout, stft_resample, BandLayout, BandVector, FrameSpec, OverlapState, Spectrum, Stft,
};

/// Comb periods on each side used by default.
pub const DEFAULT_COMB_PERIODS: usize = 5;

/// Everything the back end and the target extractor need about frame `l`.
#[derive(Clone, Debug)]
pub struct AnalysisFrame {
    pub index: i64,
    /// Input spectrum in the 48 kHz domain.
    pub spectrum: Spectrum,
    /// Comb-filtered spectrum in the 48 kHz domain.
    pub periodic: Spectrum,
    pub pitch: PitchEstimate,
    /// Noise power gain of the comb taps actually applied.
    pub comb_sigma_sq: f64,
    pub band_mag: BandVector,
    /// Coherence of the input with its comb-filtered version.
    pub coherence: BandVector,
    pub features: FeatureVector,
}

#[derive(Clone)]
pub struct FrontEnd {
    input_rate: u32,
    input_stft: Stft,
    stft: Stft,
    layout: BandLayout,
    hop: usize,
    input_hop: usize,
    /// Hops by which the 48 kHz waveform trails the newest input.
    time_lag: usize,
    comb: CombConfig,
    tracker: PitchTracker,
    buffer: Vec<f64>,
    /// Input samples of the newest analysis window at the input rate.
    input_window: Vec<f64>,
    upsample_overlap: OverlapState,
    pending: VecDeque<(Spectrum, BandVector)>,
    frames: i64,
}

impl FrontEnd {
    pub fn new(input_rate: u32) -> Result<Self> {
        Self::with_comb_periods(input_rate, DEFAULT_COMB_PERIODS)
    }

    pub fn with_comb_periods(input_rate: u32, periods: usize) -> Result<Self> {
        let full = FrameSpec::new(PITCH_RATE)?;
        let input_spec = FrameSpec::new(input_rate)?;
        // probe the rate pair once so unsupported rates fail here
        stft_resample(&Spectrum::zeros(input_spec.fft_bins(), 0), input_rate, PITCH_RATE)?;
        let hop = full.hop();
        let time_lag = usize::from(input_rate != PITCH_RATE);
        let ahead = LOOKAHEAD_FRAMES - time_lag;
        let comb = CombConfig::hann(periods, ahead * hop);
        let past = (periods * T_MAX).max(T_MAX + 3);
        let buffer = vec![0.0; past + 2 * hop + ahead * hop];
        let tracker = PitchTracker::new(PitchConfig {
            hop,
            decision_lag: ahead,
            ..PitchConfig::default()
        });
        Ok(FrontEnd {
            input_rate,
            input_stft: Stft::new(input_spec)?,
            stft: Stft::new(full)?,
            layout: build_erb_layout(&full)?,
            hop,
            input_hop: input_spec.hop(),
            time_lag,
            comb,
            tracker,
            buffer,
            input_window: vec![0.0; input_spec.window_len()],
            upsample_overlap: OverlapState::new(hop),
            pending: VecDeque::with_capacity(LOOKAHEAD_FRAMES + 1),
            frames: 0,
        })
    }

    pub fn input_rate(&self) -> u32 {
        self.input_rate
    }

    /// Samples per hop at the input rate.
    pub fn input_hop(&self) -> usize {
        self.input_hop
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    /// The 48 kHz STFT.
    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    /// The STFT at the input rate.
    pub fn input_stft(&self) -> &Stft {
        &self.input_stft
    }

    pub fn comb(&self) -> &CombConfig {
        &self.comb
    }

    pub fn reset(&mut self) {
        self.tracker.reset();
        self.buffer.iter_mut().for_each(|x| *x = 0.0);
        self.input_window.iter_mut().for_each(|x| *x = 0.0);
        self.upsample_overlap.reset();
        self.pending.clear();
        self.frames = 0;
    }

    fn push_time(&mut self, hop: &[f64]) -> Result<()> {
        let n = self.buffer.len();
        self.buffer.copy_within(self.hop.., 0);
        self.buffer[n - self.hop..].copy_from_slice(hop);
        self.tracker.push(hop)
    }

    /// Feed one hop at the input rate. Returns frame `l = k - 3` after the
    /// `k`-th hop, `None` for the first three hops.
    pub fn push(&mut self, input: &[f64]) -> Result<Option<AnalysisFrame>> {
        if input.len() != self.input_hop {
            return Err(Error::usage(format!(
                "expected {} samples per hop, got {}",
                self.input_hop,
                input.len()
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::usage("input contains non-finite samples"));
        }
        let k = self.frames;
        self.frames += 1;
        self.input_window.copy_within(self.input_hop.., 0);
        let n = self.input_window.len();
        self.input_window[n - self.input_hop..].copy_from_slice(input);

        let newest = if self.time_lag == 0 {
            self.push_time(input)?;
            self.stft.analyze(&self.input_window, k)?
        } else {
            let local = self.input_stft.analyze(&self.input_window, k)?;
            let up = stft_resample(&local, self.input_rate, PITCH_RATE)?;
            let wave = self.stft.synthesize(&up, &mut self.upsample_overlap)?;
            self.push_time(&wave)?;
            up
        };
        let mags = band_energies(&newest, &self.layout)?;
        self.pending.push_back((newest, mags));
        if self.pending.len() <= LOOKAHEAD_FRAMES {
            return Ok(None);
        }
        let (spectrum, band_mag) = self.pending.pop_front().unwrap();
        let future = &self.pending.back().unwrap().1;
        let index = k - LOOKAHEAD_FRAMES as i64;

        let end = self.buffer.len() - (LOOKAHEAD_FRAMES - self.time_lag) * self.hop;
        let win = 2 * self.hop;
        let start = end - win;
        let pitch = refine_period(&self.buffer, start, end, self.tracker.decide())?;
        let (p, taps) = comb_filter(&self.buffer, start, win, pitch.period, &self.comb)?;
        let periodic = self.stft.analyze(&p, index)?;
        let coherence = pitch_coherence(&spectrum, &periodic, &self.layout)?;
        let features = assemble_features(future, &coherence, &pitch);
        Ok(Some(AnalysisFrame {
            index,
            spectrum,
            periodic,
            pitch,
            comb_sigma_sq: taps.sigma_w_sq,
            band_mag,
            coherence,
            features,
        }))
    }
}

/// Run a front end over a whole signal (zero-padded to whole hops plus the
/// look-ahead) and collect every frame.
pub fn analyze_signal(signal: &[f64], rate: u32) -> Result<Vec<AnalysisFrame>> {
    let mut fe = FrontEnd::new(rate)?;
    let hop = fe.input_hop();
    let hops = signal.len().div_ceil(hop) + LOOKAHEAD_FRAMES + 1;
    let mut frames = Vec::with_capacity(hops);
    let mut buf = vec![0.0; hop];
    for h in 0..hops {
        buf.iter_mut().for_each(|x| *x = 0.0);
        let lo = (h * hop).min(signal.len());
        let hi = ((h + 1) * hop).min(signal.len());
        buf[..hi - lo].copy_from_slice(&signal[lo..hi]);
        if let Some(f) = fe.push(&buf)? {
            frames.push(f);
        }
    }
    Ok(frames)
}
