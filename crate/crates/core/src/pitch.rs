//! Pitch tracking, the multi-period comb filter and per-band pitch coherence.
//!
//! The tracker scores candidate lags by normalized autocorrelation on a
//! 12 kHz copy of the input and runs a Viterbi search with a log-lag jump
//! penalty. Decisions are taken a fixed number of frames behind the newest
//! frame, so the search sees the same look-ahead as the rest of the engine.
//! The winning lag is then refined at the full rate.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{band_cross, band_energy_sq, BandLayout, BandVector, Spectrum, NB_BANDS};

/// Working sample rate of the engine.
pub const PITCH_RATE: u32 = 48_000;
/// Shortest period searched (500 Hz at 48 kHz).
pub const T_MIN: usize = 96;
/// Longest period searched (60 Hz at 48 kHz).
pub const T_MAX: usize = 800;

const DECIMATION: usize = 4;
const LAG_MIN_DS: usize = T_MIN / DECIMATION;
const LAG_MAX_DS: usize = T_MAX / DECIMATION;
/// 25 ms at 12 kHz.
const SCORE_WINDOW_DS: usize = 300;
const LOWPASS_TAPS: usize = 32;
const REFINE_RADIUS: usize = 3;

/// Result of pitch analysis for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PitchEstimate {
    /// Period in samples at 48 kHz, within `[T_MIN, T_MAX]`.
    pub period: usize,
    /// Normalized cross-correlation at `period`, in `[-1, 1]`.
    pub correlation: f64,
    /// `correlation` clamped to `[0, 1]`.
    pub voiced_confidence: f64,
}

impl PitchEstimate {
    /// Frames below this confidence are treated as unvoiced.
    pub const VOICED_THRESHOLD: f64 = 0.5;

    pub fn unvoiced() -> Self {
        PitchEstimate {
            period: T_MAX,
            correlation: 0.0,
            voiced_confidence: 0.0,
        }
    }

    pub fn frequency_hz(&self) -> f64 {
        PITCH_RATE as f64 / self.period as f64
    }

    pub fn is_voiced(&self) -> bool {
        self.voiced_confidence >= Self::VOICED_THRESHOLD
    }
}

/// Tunables of the pitch search.
#[derive(Clone, Debug, PartialEq)]
pub struct PitchConfig {
    /// Samples per frame advance (10 ms).
    pub hop: usize,
    /// Frames between the newest analysed frame and the decided one.
    pub decision_lag: usize,
    /// Bias towards short lags, guards against picking multiples of the period.
    pub lag_weight: f64,
    /// Cost per unit of `|ln(T / T_prev)|` between consecutive frames.
    pub transition_weight: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            hop: 480,
            decision_lag: 3,
            lag_weight: 0.3,
            transition_weight: 0.4,
        }
    }
}

/// Streaming coarse pitch search.
#[derive(Clone, Debug)]
pub struct PitchTracker {
    cfg: PitchConfig,
    lowpass: Vec<f64>,
    fir_history: Vec<f64>,
    phase: usize,
    downsampled: VecDeque<f64>,
    log_lags: Vec<f64>,
    cost: Vec<f64>,
    backpointers: VecDeque<Vec<u16>>,
    frames: usize,
}

fn lowpass_taps() -> Vec<f64> {
    // Hann-windowed sinc, cutoff 5 kHz at 48 kHz
    let fc = 5_000.0 / PITCH_RATE as f64;
    let mid = (LOWPASS_TAPS - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..LOWPASS_TAPS)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            let w = 0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / LOWPASS_TAPS as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

impl PitchTracker {
    pub fn new(cfg: PitchConfig) -> Self {
        let n_lags = LAG_MAX_DS - LAG_MIN_DS + 1;
        PitchTracker {
            lowpass: lowpass_taps(),
            fir_history: vec![0.0; LOWPASS_TAPS],
            phase: 0,
            downsampled: VecDeque::from(vec![0.0; SCORE_WINDOW_DS + LAG_MAX_DS]),
            log_lags: (LAG_MIN_DS..=LAG_MAX_DS).map(|l| (l as f64).ln()).collect(),
            cost: vec![0.0; n_lags],
            backpointers: VecDeque::with_capacity(cfg.decision_lag + 1),
            frames: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &PitchConfig {
        &self.cfg
    }

    pub fn reset(&mut self) {
        *self = PitchTracker::new(self.cfg.clone());
    }

    /// Number of frames pushed so far.
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Feed one hop of 48 kHz samples and advance the search by one frame.
    pub fn push(&mut self, hop: &[f64]) -> Result<()> {
        if hop.len() != self.cfg.hop {
            return Err(Error::usage(format!(
                "pitch tracker expects {} samples per hop, got {}",
                self.cfg.hop,
                hop.len()
            )));
        }
        for &x in hop {
            self.fir_history.rotate_left(1);
            *self.fir_history.last_mut().unwrap() = x;
            self.phase += 1;
            if self.phase == DECIMATION {
                self.phase = 0;
                let y: f64 = self
                    .fir_history
                    .iter()
                    .zip(self.lowpass.iter().rev())
                    .map(|(a, b)| a * b)
                    .sum();
                self.downsampled.pop_front();
                self.downsampled.push_back(y);
            }
        }
        let local = self.local_costs();
        self.viterbi_step(&local);
        self.frames += 1;
        Ok(())
    }

    fn local_costs(&self) -> Vec<f64> {
        let s: Vec<f64> = self.downsampled.iter().copied().collect();
        let end = s.len();
        let start = end - SCORE_WINDOW_DS;
        let e0: f64 = s[start..end].iter().map(|v| v * v).sum();
        (LAG_MIN_DS..=LAG_MAX_DS)
            .map(|lag| {
                let mut xy = 0.0;
                let mut e1 = 0.0;
                for n in start..end {
                    xy += s[n] * s[n - lag];
                    e1 += s[n - lag] * s[n - lag];
                }
                let r = if e0 > 0.0 && e1 > 0.0 {
                    xy / (e0 * e1).sqrt()
                } else {
                    0.0
                };
                1.0 - r * (1.0 - self.cfg.lag_weight * lag as f64 / LAG_MAX_DS as f64)
            })
            .collect()
    }

    fn viterbi_step(&mut self, local: &[f64]) {
        let n = local.len();
        let mut next = vec![0.0; n];
        let mut back = vec![0u16; n];
        for s in 0..n {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for p in 0..n {
                let c = self.cost[p]
                    + self.cfg.transition_weight * (self.log_lags[s] - self.log_lags[p]).abs();
                if c < best {
                    best = c;
                    arg = p;
                }
            }
            next[s] = best + local[s];
            back[s] = arg as u16;
        }
        let min = next.iter().cloned().fold(f64::INFINITY, f64::min);
        next.iter_mut().for_each(|c| *c -= min);
        self.cost = next;
        if self.backpointers.len() == self.cfg.decision_lag {
            self.backpointers.pop_front();
        }
        if self.cfg.decision_lag > 0 {
            self.backpointers.push_back(back);
        }
    }

    /// Coarse period (in 48 kHz samples) of the frame `decision_lag` frames
    /// behind the newest, taken from the best path ending at the newest frame.
    pub fn decide(&self) -> usize {
        let mut state = self
            .cost
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc })
            .0;
        for back in self.backpointers.iter().rev() {
            state = back[state] as usize;
        }
        (state + LAG_MIN_DS) * DECIMATION
    }
}

/// Normalized cross-correlation of `signal[start..end]` with itself delayed
/// by `lag`. Requires `start >= lag`.
pub fn normalized_xcorr(signal: &[f64], start: usize, end: usize, lag: usize) -> f64 {
    let mut xy = 0.0;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for n in start..end {
        let a = signal[n];
        let b = signal[n - lag];
        xy += a * b;
        e0 += a * a;
        e1 += b * b;
    }
    if e0 > 0.0 && e1 > 0.0 {
        (xy / (e0 * e1).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Refine a coarse period at the full rate by maximizing the normalized
/// cross-correlation over `signal[start..end]`.
pub fn refine_period(signal: &[f64], start: usize, end: usize, coarse: usize) -> Result<PitchEstimate> {
    if end > signal.len() || start < T_MAX + REFINE_RADIUS || start >= end {
        return Err(Error::usage(format!(
            "refinement segment {start}..{end} needs {} samples of history in a buffer of {}",
            T_MAX,
            signal.len()
        )));
    }
    let lo = coarse.saturating_sub(REFINE_RADIUS).max(T_MIN);
    let hi = (coarse + REFINE_RADIUS).min(T_MAX);
    let mut best = PitchEstimate {
        period: coarse.clamp(T_MIN, T_MAX),
        correlation: f64::NEG_INFINITY,
        voiced_confidence: 0.0,
    };
    for lag in lo..=hi {
        let r = normalized_xcorr(signal, start, end, lag);
        if r > best.correlation {
            best.period = lag;
            best.correlation = r;
        }
    }
    if !best.correlation.is_finite() {
        best.correlation = 0.0;
    }
    best.voiced_confidence = best.correlation.clamp(0.0, 1.0);
    Ok(best)
}

/// Minimum buffer length accepted by [`estimate_pitch`].
pub fn min_pitch_buffer(cfg: &PitchConfig) -> usize {
    2 * T_MAX + 2 * cfg.hop + cfg.decision_lag * cfg.hop
}

/// One-shot pitch estimate for the 20 ms window that ends
/// `decision_lag * hop` samples before the end of `buffer`.
///
/// Runs a fresh tracker over the whole buffer, so it is only meant for
/// offline use; streams should keep a [`PitchTracker`].
pub fn estimate_pitch(buffer: &[f64], cfg: &PitchConfig) -> Result<PitchEstimate> {
    let min_len = min_pitch_buffer(cfg);
    if buffer.len() < min_len {
        return Err(Error::usage(format!(
            "pitch buffer has {} samples, needs at least {min_len}",
            buffer.len()
        )));
    }
    let mut tracker = PitchTracker::new(cfg.clone());
    let skip = buffer.len() % cfg.hop;
    for hop in buffer[skip..].chunks_exact(cfg.hop) {
        tracker.push(hop)?;
    }
    let end = buffer.len();
    let start = end - cfg.decision_lag * cfg.hop - 2 * cfg.hop;
    refine_period(buffer, start, end, tracker.decide())
}

/// Taps of the comb filter `sum_k w_k z^{-kT}` after truncation to the
/// available look-ahead for one period.
#[derive(Clone, Debug, PartialEq)]
pub struct CombTaps {
    /// `(k, w_k)`: positive `k` reaches into the past.
    pub taps: Vec<(i32, f64)>,
    pub sigma_w_sq: f64,
}

/// Comb filter shape and look-ahead bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CombConfig {
    taps: Vec<(i32, f64)>,
    /// Longest permitted reach into the future, in samples.
    pub max_lookahead: usize,
}

impl CombConfig {
    /// Hann taps over `k = -M..=M`. The window spans `2M+3` points so its
    /// zero endpoints fall outside the filter and every tap is non-zero.
    pub fn hann(periods: usize, max_lookahead: usize) -> Self {
        let len = 2 * periods + 2;
        let taps = (0..=2 * periods)
            .map(|i| {
                let s = (PI * (i + 1) as f64 / len as f64).sin();
                (i as i32 - periods as i32, s * s)
            })
            .collect();
        CombConfig::from_taps(taps, max_lookahead)
    }

    /// Equal weights over `k = -M..=M`.
    pub fn uniform(periods: usize, max_lookahead: usize) -> Self {
        let taps = (-(periods as i32)..=periods as i32).map(|k| (k, 1.0)).collect();
        CombConfig::from_taps(taps, max_lookahead)
    }

    /// The causal single-period comb `(1 + z^-T) / 2`.
    pub fn single_period() -> Self {
        CombConfig::from_taps(vec![(0, 0.5), (1, 0.5)], 0)
    }

    pub fn identity() -> Self {
        CombConfig::from_taps(vec![(0, 1.0)], 0)
    }

    /// Arbitrary taps, normalized to sum to one.
    pub fn from_taps(mut taps: Vec<(i32, f64)>, max_lookahead: usize) -> Self {
        taps.retain(|&(_, w)| w != 0.0);
        let sum: f64 = taps.iter().map(|t| t.1).sum();
        taps.iter_mut().for_each(|t| t.1 /= sum);
        CombConfig {
            taps,
            max_lookahead,
        }
    }

    /// Untruncated taps.
    pub fn taps(&self) -> &[(i32, f64)] {
        &self.taps
    }

    /// Periods reached on the past side.
    pub fn periods(&self) -> usize {
        self.taps.iter().map(|t| t.0.max(0) as usize).max().unwrap_or(0)
    }

    /// Noise power gain `sum w_k^2` of the untruncated filter.
    pub fn sigma_w_sq(&self) -> f64 {
        self.taps.iter().map(|t| t.1 * t.1).sum()
    }

    /// Drop future taps that reach beyond `max_lookahead` for this period and
    /// renormalize the rest.
    pub fn taps_for_period(&self, period: usize) -> CombTaps {
        let kept: Vec<(i32, f64)> = self
            .taps
            .iter()
            .copied()
            .filter(|&(k, _)| k >= 0 || (-k) as usize * period <= self.max_lookahead)
            .collect();
        let sum: f64 = kept.iter().map(|t| t.1).sum();
        let taps: Vec<(i32, f64)> = kept.into_iter().map(|(k, w)| (k, w / sum)).collect();
        let sigma_w_sq = taps.iter().map(|t| t.1 * t.1).sum();
        CombTaps { taps, sigma_w_sq }
    }
}

/// Apply the comb filter to `signal[window_start..window_start + window_len]`,
/// reading past and future samples from the same buffer.
pub fn comb_filter(
    signal: &[f64],
    window_start: usize,
    window_len: usize,
    period: usize,
    cfg: &CombConfig,
) -> Result<(Vec<f64>, CombTaps)> {
    let taps = cfg.taps_for_period(period);
    let past = taps.taps.iter().map(|t| t.0.max(0) as usize).max().unwrap_or(0) * period;
    let future = taps.taps.iter().map(|t| (-t.0).max(0) as usize).max().unwrap_or(0) * period;
    if window_start < past {
        return Err(Error::usage(format!(
            "comb filter needs {past} samples of history, window starts at {window_start}"
        )));
    }
    if window_start + window_len + future > signal.len() {
        return Err(Error::usage(format!(
            "comb filter needs {future} samples after the window, buffer ends {} samples after it",
            signal.len().saturating_sub(window_start + window_len)
        )));
    }
    let mut out = vec![0.0; window_len];
    for &(k, w) in &taps.taps {
        let offset = window_start as isize - k as isize * period as isize;
        let src = &signal[offset as usize..offset as usize + window_len];
        for (o, s) in out.iter_mut().zip(src) {
            *o += w * s;
        }
    }
    Ok((out, taps))
}

/// Magnitude response in dB of the comb for `period` samples at `freqs_hz`.
pub fn comb_response_db(taps: &[(i32, f64)], period: usize, sample_rate: f64, freqs_hz: &[f64]) -> Vec<f64> {
    freqs_hz
        .iter()
        .map(|&f| {
            let omega = 2.0 * PI * f / sample_rate;
            let (mut re, mut im) = (0.0, 0.0);
            for &(k, w) in taps {
                let ph = -omega * (k as f64 * period as f64);
                re += w * ph.cos();
                im += w * ph.sin();
            }
            (20.0 * (re * re + im * im).sqrt().log10()).max(-200.0)
        })
        .collect()
}

/// CSV (`frequency_hz,magnitude_db`) of the untruncated Hann comb response
/// for a talker at `pitch_hz`, from 0 to `max_hz` in `step_hz` steps.
pub fn comb_response_csv(pitch_hz: f64, periods: usize, max_hz: f64, step_hz: f64) -> Result<String> {
    if !(pitch_hz > 0.0) || !(step_hz > 0.0) || !(max_hz > 0.0) {
        return Err(Error::usage("pitch, step and range must be positive"));
    }
    let period = (PITCH_RATE as f64 / pitch_hz).round() as usize;
    let cfg = CombConfig::hann(periods, usize::MAX);
    let n = (max_hz / step_hz).floor() as usize + 1;
    let freqs: Vec<f64> = (0..n).map(|i| i as f64 * step_hz).collect();
    let mags = comb_response_db(cfg.taps(), period, PITCH_RATE as f64, &freqs);
    let mut out = String::from("frequency_hz,magnitude_db\n");
    for (f, m) in freqs.iter().zip(mags) {
        out.push_str(&format!("{f:.3},{m:.4}\n"));
    }
    Ok(out)
}

/// Per-band cosine similarity `Re[p^H x] / (|p| |x|)`, clamped to `[-1, 1]`.
/// Bands where either side has no energy get 0.
pub fn pitch_coherence(x_spec: &Spectrum, p_spec: &Spectrum, layout: &BandLayout) -> Result<BandVector> {
    let cross = band_cross(p_spec, x_spec, layout)?;
    let ex = band_energy_sq(x_spec, layout)?;
    let ep = band_energy_sq(p_spec, layout)?;
    let mut q = [0.0; NB_BANDS];
    for b in 0..NB_BANDS {
        let denom = (ex[b] * ep[b]).sqrt();
        q[b] = if denom > 0.0 {
            (cross[b] / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        };
    }
    Ok(q)
}

/// Coherence of the comb-filtered signal predicted from the noisy coherence,
/// `q / sqrt((1 - s) q^2 + s)` with `s = sigma_w^2`. Negative input is
/// clamped to zero first.
pub fn enhanced_coherence(q_y: f64, sigma_w_sq: f64) -> f64 {
    let q = q_y.clamp(0.0, 1.0);
    let denom = ((1.0 - sigma_w_sq) * q * q + sigma_w_sq).sqrt();
    if denom > 0.0 {
        (q / denom).min(1.0)
    } else {
        0.0
    }
}

pub fn estimate_enhanced_coherence(q_y: &BandVector, sigma_w_sq: f64) -> BandVector {
    let mut out = [0.0; NB_BANDS];
    for (o, &q) in out.iter_mut().zip(q_y) {
        *o = enhanced_coherence(q, sigma_w_sq);
    }
    out
}
