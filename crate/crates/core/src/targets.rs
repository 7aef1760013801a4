//! Training targets, losses and mixture synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realfft::RealFftPlanner;

use crate::analysis::{AnalysisFrame, FrontEnd};
use crate::error::{Error, Result};
use crate::features::LOOKAHEAD_FRAMES;
use crate::pitch::{enhanced_coherence, pitch_coherence, PITCH_RATE};
use crate::records::FrameRecord;
use crate::spectral::{BandLayout, BandVector, NB_BANDS};

/// Noise-masking-tone floor of the extra attenuation.
pub const N0: f64 = 0.03;
const MIN_EXAMPLE_SECONDS: f64 = 1.0;
/// Early reflections kept in the target, after the direct path.
pub const EARLY_REFLECTION_SECONDS: f64 = 0.05;
pub const SNR_RANGE_DB: (f64, f64) = (-5.0, 45.0);
pub const LOWPASS_RANGE_HZ: (f64, f64) = (3_000.0, 20_000.0);
const LOWPASS_TAPER_HZ: f64 = 200.0;
const MAX_FILTER_RADIUS: f64 = 0.9;
const MAX_TILT_DB: f64 = 6.0;
const TILT_REFERENCE_HZ: f64 = 20_000.0;
const ACTIVE_RANGE_DB: f64 = 40.0;

/// `X / Y` clamped to `[0, 1]`; an empty noisy band needs no attenuation.
pub fn ideal_gain(x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        1.0
    } else {
        (x / y).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrengthTarget {
    pub strength: f64,
    /// Extra attenuation, 1 unless `degenerate`.
    pub attenuation: f64,
    /// The comb output is less coherent than the clean signal.
    pub degenerate: bool,
}

/// Filtering strength that gives `(1 - r) y + r p̂` the coherence of the
/// clean signal, or full strength plus extra attenuation when even `p̂`
/// is not coherent enough.
pub fn ideal_strength(q_x: f64, q_y: f64, q_p: f64) -> StrengthTarget {
    let qx = q_x.clamp(0.0, 1.0);
    let qy = q_y.clamp(0.0, 1.0);
    let qp = q_p.clamp(0.0, 1.0);
    if qp < qx {
        return StrengthTarget {
            strength: 1.0,
            attenuation: ((1.0 + N0 - qx * qx) / (1.0 + N0 - qp * qp)).sqrt(),
            degenerate: true,
        };
    }
    let normal = |strength: f64| StrengthTarget {
        strength: strength.clamp(0.0, 1.0),
        attenuation: 1.0,
        degenerate: false,
    };
    if qx <= qy {
        return normal(0.0);
    }
    let a = qp * qp - qx * qx;
    let b = qp * qy * (1.0 - qx * qx);
    let c = qx * qx - qy * qy;
    let alpha = if a.abs() < 1e-9 {
        if b <= 0.0 {
            return normal(1.0);
        }
        c / (2.0 * b)
    } else {
        ((b * b + a * c).max(0.0).sqrt() - b) / a
    };
    if !alpha.is_finite() {
        return normal(1.0);
    }
    normal(alpha / (1.0 + alpha))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub c4: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { gamma: 0.5, c4: 10.0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(self.c4 >= 0.0) {
            return Err(Error::config(format!("c4 {} is negative", self.c4)));
        }
        Ok(())
    }
}

/// Smallest value the power-law gradients are evaluated at.
pub const GRAD_FLOOR: f64 = 1e-9;

pub fn gain_loss(g: &[f64], g_hat: &[f64], cfg: &LossConfig) -> f64 {
    g.iter()
        .zip(g_hat)
        .map(|(&g, &h)| {
            let d = g.powf(cfg.gamma) - h.powf(cfg.gamma);
            let d2 = d * d;
            d2 + cfg.c4 * d2 * d2
        })
        .sum()
}

/// Derivative of [`gain_loss`] with respect to each `g_hat`.
pub fn gain_loss_grad(g: &[f64], g_hat: &[f64], cfg: &LossConfig) -> Vec<f64> {
    g.iter()
        .zip(g_hat)
        .map(|(&g, &h)| {
            let h = h.max(GRAD_FLOOR);
            let d = g.powf(cfg.gamma) - h.powf(cfg.gamma);
            let dh = cfg.gamma * h.powf(cfg.gamma - 1.0);
            -(2.0 * d + 4.0 * cfg.c4 * d * d * d) * dh
        })
        .collect()
}

pub fn strength_loss(r: &[f64], r_hat: &[f64], cfg: &LossConfig) -> f64 {
    r.iter()
        .zip(r_hat)
        .map(|(&r, &h)| {
            let d = (1.0 - r).powf(cfg.gamma) - (1.0 - h).powf(cfg.gamma);
            d * d
        })
        .sum()
}

/// Derivative of [`strength_loss`] with respect to each `r_hat`.
pub fn strength_loss_grad(r: &[f64], r_hat: &[f64], cfg: &LossConfig) -> Vec<f64> {
    r.iter()
        .zip(r_hat)
        .map(|(&r, &h)| {
            let u = (1.0 - h).max(GRAD_FLOOR);
            let d = (1.0 - r).powf(cfg.gamma) - u.powf(cfg.gamma);
            2.0 * d * cfg.gamma * u.powf(cfg.gamma - 1.0)
        })
        .collect()
}

/// Ideal quantities for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameTargets {
    pub gains: BandVector,
    pub strengths: BandVector,
    pub attenuation: BandVector,
}

impl FrameTargets {
    /// What the gain head is trained to predict.
    pub fn combined_gains(&self) -> BandVector {
        let mut g = [0.0; NB_BANDS];
        for b in 0..NB_BANDS {
            g[b] = (self.gains[b] * self.attenuation[b]).clamp(0.0, 1.0);
        }
        g
    }

    pub fn attenuated(&self) -> bool {
        self.attenuation.iter().any(|&a| a < 1.0)
    }

    pub fn to_record(&self, noisy: &AnalysisFrame) -> FrameRecord {
        let mut rec = FrameRecord {
            features: noisy.features.to_f32(),
            gains: [0.0; NB_BANDS],
            strengths: [0.0; NB_BANDS],
            attenuated: self.attenuated(),
        };
        for (o, g) in rec.gains.iter_mut().zip(self.combined_gains()) {
            *o = g as f32;
        }
        for (o, r) in rec.strengths.iter_mut().zip(&self.strengths) {
            *o = *r as f32;
        }
        rec
    }
}

/// Targets from time-aligned clean and noisy analyses of the same frame.
/// The clean frame's comb output stands in for the periodic component.
pub fn frame_targets(clean: &AnalysisFrame, noisy: &AnalysisFrame, layout: &BandLayout) -> Result<FrameTargets> {
    if clean.index != noisy.index {
        return Err(Error::usage(format!(
            "clean frame {} paired with noisy frame {}",
            clean.index, noisy.index
        )));
    }
    let q_x = pitch_coherence(&clean.spectrum, &clean.periodic, layout)?;
    let q_y = pitch_coherence(&noisy.spectrum, &clean.periodic, layout)?;
    let mut t = FrameTargets {
        gains: [0.0; NB_BANDS],
        strengths: [0.0; NB_BANDS],
        attenuation: [1.0; NB_BANDS],
    };
    for b in 0..NB_BANDS {
        t.gains[b] = ideal_gain(clean.band_mag[b], noisy.band_mag[b]);
        let q_p = enhanced_coherence(q_y[b], noisy.comb_sigma_sq);
        let s = ideal_strength(q_x[b], q_y[b], q_p);
        t.strengths[b] = s.strength;
        t.attenuation[b] = s.attenuation;
    }
    Ok(t)
}

/// Streams clean and noisy audio in lockstep and yields targets per frame.
#[derive(Clone)]
pub struct TargetExtractor {
    clean: FrontEnd,
    noisy: FrontEnd,
}

impl TargetExtractor {
    pub fn new(rate: u32) -> Result<Self> {
        Ok(TargetExtractor {
            clean: FrontEnd::new(rate)?,
            noisy: FrontEnd::new(rate)?,
        })
    }

    pub fn input_hop(&self) -> usize {
        self.noisy.input_hop()
    }

    pub fn reset(&mut self) {
        self.clean.reset();
        self.noisy.reset();
    }

    pub fn push(&mut self, clean: &[f64], noisy: &[f64]) -> Result<Option<(AnalysisFrame, FrameTargets)>> {
        if clean.len() != noisy.len() {
            return Err(Error::usage(format!(
                "clean hop has {} samples, noisy hop {}",
                clean.len(),
                noisy.len()
            )));
        }
        let c = self.clean.push(clean)?;
        let n = self.noisy.push(noisy)?;
        match (c, n) {
            (Some(c), Some(n)) => {
                let t = frame_targets(&c, &n, self.noisy.layout())?;
                Ok(Some((n, t)))
            }
            _ => Ok(None),
        }
    }
}

/// Frame-by-frame targets for whole signals, zero-padded so every input
/// sample is covered by an analysis window.
pub fn extract_targets(clean: &[f64], noisy: &[f64], rate: u32) -> Result<Vec<(AnalysisFrame, FrameTargets)>> {
    if clean.len() != noisy.len() {
        return Err(Error::usage(format!(
            "clean has {} samples, noisy {}",
            clean.len(),
            noisy.len()
        )));
    }
    let mut ex = TargetExtractor::new(rate)?;
    let hop = ex.input_hop();
    let hops = clean.len().div_ceil(hop) + LOOKAHEAD_FRAMES + 1;
    let mut out = Vec::with_capacity(hops);
    let mut cb = vec![0.0; hop];
    let mut nb = vec![0.0; hop];
    for h in 0..hops {
        let lo = (h * hop).min(clean.len());
        let hi = ((h + 1) * hop).min(clean.len());
        cb.iter_mut().for_each(|x| *x = 0.0);
        nb.iter_mut().for_each(|x| *x = 0.0);
        cb[..hi - lo].copy_from_slice(&clean[lo..hi]);
        nb[..hi - lo].copy_from_slice(&noisy[lo..hi]);
        if let Some(f) = ex.push(&cb, &nb)? {
            out.push(f);
        }
    }
    Ok(out)
}

pub fn extract_records(clean: &[f64], noisy: &[f64], rate: u32) -> Result<Vec<FrameRecord>> {
    Ok(extract_targets(clean, noisy, rate)?
        .iter()
        .map(|(n, t)| t.to_record(n))
        .collect())
}

/// Parameters drawn for one mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixMetadata {
    pub seed: u64,
    pub snr_db: f64,
    pub lowpass_hz: f64,
    pub tilt_db: f64,
    pub speech_filter: PoleZero,
    pub noise_filter: PoleZero,
    pub rir_id: String,
}

impl MixMetadata {
    /// One manifest line: `seed snr_db lowpass_hz rir_id`.
    pub fn manifest_line(&self) -> String {
        format!("{} {:.3} {:.1} {}", self.seed, self.snr_db, self.lowpass_hz, self.rir_id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixExample {
    /// Target: speech with early reflections only.
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    /// Reverberant speech as mixed, before the low-pass.
    pub speech_component: Vec<f64>,
    /// Scaled noise as mixed, before the low-pass.
    pub noise_component: Vec<f64>,
    pub meta: MixMetadata,
}

/// Second-order section `(1 - 2 rz cos(wz) z^-1 + rz^2 z^-2) /
/// (1 - 2 rp cos(wp) z^-1 + rp^2 z^-2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleZero {
    pub pole_radius: f64,
    pub pole_angle: f64,
    pub zero_radius: f64,
    pub zero_angle: f64,
}

impl PoleZero {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        PoleZero {
            pole_radius: rng.random_range(0.0..=MAX_FILTER_RADIUS),
            pole_angle: rng.random_range(0.0..PI),
            zero_radius: rng.random_range(0.0..=MAX_FILTER_RADIUS),
            zero_angle: rng.random_range(0.0..PI),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let b1 = -2.0 * self.zero_radius * self.zero_angle.cos();
        let b2 = self.zero_radius * self.zero_radius;
        let a1 = -2.0 * self.pole_radius * self.pole_angle.cos();
        let a2 = self.pole_radius * self.pole_radius;
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
                x2 = x1;
                x1 = v;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// Coefficient `c` of the normalized FIR `(1 + c z^-1) / (1 + c)` whose
/// response at `hz` is `tilt_db` relative to DC.
pub fn tilt_coefficient(tilt_db: f64, hz: f64, rate: f64) -> f64 {
    let t2 = 10f64.powf(tilt_db / 10.0);
    let cw = (2.0 * PI * hz / rate).cos();
    let a = 1.0 - t2;
    if a.abs() < 1e-12 {
        return 0.0;
    }
    let b = cw - t2;
    let disc = (b * b - a * a).max(0.0).sqrt();
    let r1 = (-b + disc) / a;
    let r2 = (-b - disc) / a;
    if r1.abs() <= 1.0 {
        r1
    } else {
        r2
    }
}

fn apply_tilt(x: &[f64], c: f64) -> Vec<f64> {
    let norm = 1.0 / (1.0 + c);
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            let y = (v + c * prev) * norm;
            prev = v;
            y
        })
        .collect()
}

/// Linear convolution via FFT, truncated to `x.len()` samples.
pub fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectrum = |s: &[f64]| {
        let mut buf = vec![0.0; n];
        buf[..s.len()].copy_from_slice(s);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("planned size");
        out
    };
    let xs = spectrum(x);
    let hs = spectrum(h);
    let mut prod: Vec<Complex64> = xs.iter().zip(&hs).map(|(a, b)| a * b).collect();
    prod[0].im = 0.0;
    prod[n / 2].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut prod, &mut out).expect("planned size");
    out.truncate(x.len());
    out.iter_mut().for_each(|v| *v /= n as f64);
    out
}

/// Zero-phase low-pass over the whole signal: bins below `cutoff` pass,
/// a raised-cosine taper spans the next 200 Hz, everything above is removed.
pub fn brickwall_lowpass(x: &[f64], cutoff_hz: f64, rate: f64) -> Vec<f64> {
    if x.is_empty() || cutoff_hz >= rate / 2.0 {
        return x.to_vec();
    }
    let n = x.len().next_power_of_two() * 2;
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = vec![0.0; n];
    buf[..x.len()].copy_from_slice(x);
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut buf, &mut spec).expect("planned size");
    let df = rate / n as f64;
    for (k, c) in spec.iter_mut().enumerate() {
        let f = k as f64 * df;
        let g = if f <= cutoff_hz {
            1.0
        } else if f >= cutoff_hz + LOWPASS_TAPER_HZ {
            0.0
        } else {
            0.5 + 0.5 * (PI * (f - cutoff_hz) / LOWPASS_TAPER_HZ).cos()
        };
        *c *= g / n as f64;
    }
    spec[0].im = 0.0;
    spec[n / 2].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("planned size");
    out.truncate(x.len());
    out
}

/// Mask of 20 ms frames whose energy is within 40 dB of the loudest.
pub fn active_frames(x: &[f64], frame: usize) -> Vec<bool> {
    let e: Vec<f64> = x.chunks(frame).map(|c| c.iter().map(|v| v * v).sum()).collect();
    let max = e.iter().cloned().fold(0.0, f64::max);
    let floor = max * 10f64.powf(-ACTIVE_RANGE_DB / 10.0);
    e.iter().map(|&v| max > 0.0 && v > floor).collect()
}

/// Energy ratio in dB of `speech` to `noise` over the frames where speech is
/// active.
pub fn active_snr_db(speech: &[f64], noise: &[f64], frame: usize) -> f64 {
    let mask = active_frames(speech, frame);
    let (mut s, mut n) = (0.0, 0.0);
    for ((a, b), &m) in speech.chunks(frame).zip(noise.chunks(frame)).zip(&mask) {
        if m {
            s += a.iter().map(|v| v * v).sum::<f64>();
            n += b.iter().map(|v| v * v).sum::<f64>();
        }
    }
    10.0 * (s / n).log10()
}

fn fit_noise(noise: &[f64], len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if noise.len() >= len {
        let off = rng.random_range(0..=noise.len() - len);
        noise[off..off + len].to_vec()
    } else {
        let off = rng.random_range(0..noise.len());
        (0..len).map(|i| noise[(off + i) % noise.len()]).collect()
    }
}

/// Options that pin some of the random draws (tests and ablations).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixOverrides {
    pub snr_db: Option<f64>,
    pub lowpass_hz: Option<f64>,
    pub rir_id: Option<String>,
}

/// Build one augmented training mixture at 48 kHz.
pub fn mix_example(speech: &[f64], noise: &[f64], rir: &[f64], seed: u64) -> Result<MixExample> {
    mix_example_with(speech, noise, rir, seed, &MixOverrides::default())
}

pub fn mix_example_with(
    speech: &[f64],
    noise: &[f64],
    rir: &[f64],
    seed: u64,
    overrides: &MixOverrides,
) -> Result<MixExample> {
    let rate = PITCH_RATE as f64;
    if (speech.len() as f64) < MIN_EXAMPLE_SECONDS * rate {
        return Err(Error::Rejected(format!(
            "speech has {} samples, need at least {}",
            speech.len(),
            (MIN_EXAMPLE_SECONDS * rate) as usize
        )));
    }
    if !speech.iter().any(|&v| v != 0.0) {
        return Err(Error::Rejected("speech is silent".into()));
    }
    if noise.is_empty() {
        return Err(Error::Rejected("noise is empty".into()));
    }
    let direct = rir
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Rejected("impulse response is empty".into()))?;
    if rir[direct] == 0.0 {
        return Err(Error::Rejected("impulse response is silent".into()));
    }
    if speech.iter().chain(noise).chain(rir).any(|v| !v.is_finite()) {
        return Err(Error::Rejected("non-finite input samples".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snr_db = rng.random_range(SNR_RANGE_DB.0..=SNR_RANGE_DB.1);
    let speech_filter = PoleZero::draw(&mut rng);
    let noise_filter = PoleZero::draw(&mut rng);
    let tilt_db = rng.random_range(-MAX_TILT_DB..=MAX_TILT_DB);
    let lowpass_hz = rng.random_range(LOWPASS_RANGE_HZ.0..=LOWPASS_RANGE_HZ.1);
    let noise = fit_noise(noise, speech.len(), &mut rng);
    let snr_db = overrides.snr_db.unwrap_or(snr_db);
    let lowpass_hz = overrides.lowpass_hz.unwrap_or(lowpass_hz);

    let c = tilt_coefficient(tilt_db, TILT_REFERENCE_HZ, rate);
    let s = apply_tilt(&speech_filter.apply(speech), c);
    let n = apply_tilt(&noise_filter.apply(&noise), c);

    let early_end = (direct + (EARLY_REFLECTION_SECONDS * rate) as usize + 1).min(rir.len());
    let reverberant = fft_convolve(&s, rir);
    let early = fft_convolve(&s, &rir[..early_end]);

    let frame = (rate * 0.02) as usize;
    let mask = active_frames(&reverberant, frame);
    if !mask.iter().any(|&m| m) {
        return Err(Error::Rejected("speech is silent after filtering".into()));
    }
    let (mut es, mut en) = (0.0, 0.0);
    for ((a, b), &m) in reverberant.chunks(frame).zip(n.chunks(frame)).zip(&mask) {
        if m {
            es += a.iter().map(|v| v * v).sum::<f64>();
            en += b.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let noise_gain = if en > 0.0 {
        (es / en / 10f64.powf(snr_db / 10.0)).sqrt()
    } else {
        0.0
    };
    let mut noise_component: Vec<f64> = n.iter().map(|v| v * noise_gain).collect();
    let mut speech_component = reverberant;
    let mixed: Vec<f64> = speech_component.iter().zip(&noise_component).map(|(a, b)| a + b).collect();
    let mut noisy = brickwall_lowpass(&mixed, lowpass_hz, rate);
    let mut clean = brickwall_lowpass(&early, lowpass_hz, rate);

    let peak = noisy.iter().chain(&clean).fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.95 {
        let g = 0.95 / peak;
        for v in noisy
            .iter_mut()
            .chain(clean.iter_mut())
            .chain(speech_component.iter_mut())
            .chain(noise_component.iter_mut())
        {
            *v *= g;
        }
    }
    Ok(MixExample {
        clean,
        noisy,
        speech_component,
        noise_component,
        meta: MixMetadata {
            seed,
            snr_db,
            lowpass_hz,
            tilt_db,
            speech_filter,
            noise_filter,
            rir_id: overrides.rir_id.clone().unwrap_or_else(|| "-".into()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{harmonic_speech, synthetic_rir, white_noise};
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest};

    /// p = e1, y and p̂ unit vectors whose off-axis parts are orthogonal to
    /// each other. Returns the coherence of (1-r) y + r p̂ with p.
    fn constructed_qz(qy: f64, qp: f64, r: f64) -> f64 {
        let y = [qy, (1.0 - qy * qy).sqrt(), 0.0];
        let p = [qp, 0.0, (1.0 - qp * qp).sqrt()];
        let z: Vec<f64> = (0..3).map(|i| (1.0 - r) * y[i] + r * p[i]).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z[0] / norm
    }

    #[test]
    fn gain_examples() {
        assert_eq!(ideal_gain(0.7, 0.7), 1.0);
        assert_eq!(ideal_gain(0.0, 0.4), 0.0);
        assert_eq!(ideal_gain(0.3, 0.6), 0.5);
        assert_eq!(ideal_gain(0.3, 0.0), 1.0);
        assert_eq!(ideal_gain(2.0, 1.0), 1.0);
    }

    #[test]
    fn strength_examples() {
        let s = ideal_strength(0.6, 0.6, 0.8);
        assert_eq!((s.strength, s.attenuation, s.degenerate), (0.0, 1.0, false));
        let s = ideal_strength(1.0, 0.0, 0.0);
        assert!(s.degenerate);
        assert_eq!(s.strength, 1.0);
        assert!((s.attenuation - (0.03f64 / 1.03).sqrt()).abs() < 1e-15);
        assert!((20.0 * s.attenuation.log10() + 15.357).abs() < 0.01);
        let s = ideal_strength(0.9, 0.5, 0.95);
        assert!(!s.degenerate);
        assert!((constructed_qz(0.5, 0.95, s.strength) - 0.9).abs() < 1e-6);
        // a = 0 limit
        let s = ideal_strength(0.8, 0.5, 0.8);
        assert!((constructed_qz(0.5, 0.8, s.strength) - 0.8).abs() < 1e-6);
        let s = ideal_strength(1.0, 0.5, 1.0);
        assert_eq!(s.strength, 1.0);
    }

    proptest! {
        #[test]
        fn strength_solves_geometry(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let mut v = [a, b, c];
            v.sort_by(|x, y| x.total_cmp(y));
            let (qy, qx, qp) = (v[0], v[1], v[2]);
            prop_assume!(qp < 0.999_999);
            let s = ideal_strength(qx, qy, qp);
            prop_assert!(!s.degenerate && s.attenuation == 1.0);
            prop_assert!((0.0..=1.0).contains(&s.strength));
            prop_assert!((constructed_qz(qy, qp, s.strength) - qx).abs() < 1e-6);
        }

        #[test]
        fn strength_monotone_in_qx(qy in 0.0f64..0.9, qp_frac in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let qp = qy + (1.0 - qy) * qp_frac;
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let x1 = qy + (qp - qy) * lo;
            let x2 = qy + (qp - qy) * hi;
            prop_assert!(ideal_strength(x1, qy, qp).strength <= ideal_strength(x2, qy, qp).strength + 1e-12);
        }

        #[test]
        fn degenerate_attenuation_bounded(qx in 0.0f64..1.0, qp in 0.0f64..1.0) {
            prop_assume!(qp < qx);
            let s = ideal_strength(qx, 0.0, qp);
            prop_assert!(s.attenuation <= 1.0 && s.attenuation >= (0.03f64 / 1.03).sqrt() - 1e-15);
        }

        #[test]
        fn losses_are_metrics(g in proptest::collection::vec(0.0f64..=1.0, 34), h in proptest::collection::vec(0.0f64..=1.0, 34)) {
            let cfg = LossConfig::default();
            let a = gain_loss(&g, &h, &cfg);
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a, gain_loss(&h, &g, &cfg));
            prop_assert_eq!(gain_loss(&g, &g, &cfg), 0.0);
            let b = strength_loss(&g, &h, &cfg);
            prop_assert!(b >= 0.0);
            prop_assert_eq!(b, strength_loss(&h, &g, &cfg));
            if g != h {
                prop_assert!(a > 0.0 && b > 0.0);
            }
        }

        #[test]
        fn gradients_match_differences(g in proptest::collection::vec(0.0f64..=1.0, 4), h in proptest::collection::vec(0.05f64..=0.95, 4)) {
            let cfg = LossConfig::default();
            let eps = 1e-6;
            let gg = gain_loss_grad(&g, &h, &cfg);
            let gs = strength_loss_grad(&g, &h, &cfg);
            for i in 0..4 {
                let mut hp = h.clone();
                let mut hm = h.clone();
                hp[i] += eps;
                hm[i] -= eps;
                let fd = (gain_loss(&g, &hp, &cfg) - gain_loss(&g, &hm, &cfg)) / (2.0 * eps);
                prop_assert!((fd - gg[i]).abs() <= 1e-4 * fd.abs().max(1e-3));
                let fd = (strength_loss(&g, &hp, &cfg) - strength_loss(&g, &hm, &cfg)) / (2.0 * eps);
                prop_assert!((fd - gs[i]).abs() <= 1e-4 * fd.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn loss_examples() {
        let cfg = LossConfig::default();
        let mut g = [0.4; 34];
        let mut h = g;
        assert_eq!(gain_loss(&g, &h, &cfg), 0.0);
        g[3] = 1.0;
        h[3] = 0.0;
        assert_eq!(gain_loss(&g, &h, &cfg), 11.0);
        g[3] = 0.25;
        h[3] = 1.0;
        assert!((gain_loss(&g, &h, &cfg) - 0.875).abs() < 1e-15);
        let mut r = [0.2; 34];
        let mut rh = r;
        assert_eq!(strength_loss(&r, &rh, &cfg), 0.0);
        r[0] = 1.0;
        rh[0] = 0.0;
        assert_eq!(strength_loss(&r, &rh, &cfg), 1.0);
        r[0] = 0.75;
        assert!((strength_loss(&r, &rh, &cfg) - 0.25).abs() < 1e-15);
        assert!(LossConfig { gamma: 0.0, c4: 1.0 }.validate().is_err());
        assert!(LossConfig { gamma: 0.5, c4: -1.0 }.validate().is_err());
    }

    #[test]
    fn tilt_hits_target() {
        for &db in &[-6.0, -2.5, 0.0, 3.0, 6.0] {
            let c = tilt_coefficient(db, 20_000.0, 48_000.0);
            assert!(c.abs() < 1.0);
            let w = 2.0 * PI * 20_000.0 / 48_000.0;
            let mag = (Complex64::new(1.0, 0.0) + c * Complex64::from_polar(1.0, -w)).norm() / (1.0 + c);
            assert!((20.0 * mag.log10() - db).abs() < 1e-9);
        }
    }

    #[test]
    fn convolution_matches_direct() {
        let x = white_noise(300, 1.0, 1);
        let h = white_noise(40, 1.0, 2);
        let y = fft_convolve(&x, &h);
        for n in [0, 17, 39, 40, 299] {
            let d: f64 = (0..=n.min(39)).map(|k| h[k] * x[n - k]).sum();
            assert!((y[n] - d).abs() < 1e-10);
        }
    }

    fn speech(seed: u64) -> Vec<f64> {
        harmonic_speech(1.5, 48_000, seed)
    }

    #[test]
    fn mix_identity_and_determinism() {
        let s = speech(1);
        let ex = mix_example(&s, &[0.0; 1000], &[1.0], 7).unwrap();
        assert_eq!(ex.clean, ex.noisy);
        assert_eq!(ex.clean.len(), s.len());
        let n = white_noise(30_000, 0.1, 2);
        let rir = synthetic_rir(48_000, 0.4, 30, 3);
        let a = mix_example(&s, &n, &rir, 11).unwrap();
        let b = mix_example(&s, &n, &rir, 11).unwrap();
        assert_eq!(a, b);
        assert!((-5.0..=45.0).contains(&a.meta.snr_db));
        assert!((3000.0..=20000.0).contains(&a.meta.lowpass_hz));
        assert_ne!(a.noisy, mix_example(&s, &n, &rir, 12).unwrap().noisy);
    }

    #[test]
    fn mix_snr_and_lowpass() {
        let s = speech(2);
        let n = white_noise(48_000 * 2, 0.1, 5);
        let ov = MixOverrides {
            snr_db: Some(0.0),
            lowpass_hz: Some(3000.0),
            rir_id: Some("room".into()),
        };
        let ex = mix_example_with(&s, &n, &[0.0, 1.0, 0.3], 3, &ov).unwrap();
        let snr = active_snr_db(&ex.speech_component, &ex.noise_component, 960);
        assert!(snr.abs() < 0.1, "{snr}");
        assert_eq!(ex.meta.manifest_line(), "3 0.000 3000.0 room");
        for sig in [&ex.clean, &ex.noisy] {
            let ratio = energy_above(sig, 4_000.0);
            assert!(10.0 * ratio.max(1e-30).log10() < -60.0, "{ratio}");
        }
    }

    /// Fraction of Hann-windowed periodogram energy above `hz`.
    fn energy_above(x: &[f64], hz: f64) -> f64 {
        let n = x.len();
        let mut planner = RealFftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut buf: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| v * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
            .collect();
        let mut spec = fft.make_output_vec();
        fft.process(&mut buf, &mut spec).unwrap();
        let k0 = (hz * n as f64 / 48_000.0) as usize;
        let total: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        spec[k0..].iter().map(|c| c.norm_sqr()).sum::<f64>() / total
    }

    #[test]
    fn mix_rejections() {
        assert!(matches!(mix_example(&vec![0.0; 60_000], &[1.0], &[1.0], 0), Err(Error::Rejected(_))));
        assert!(matches!(mix_example(&speech(1)[..1000], &[1.0], &[1.0], 0), Err(Error::Rejected(_))));
        assert!(mix_example(&speech(1), &[1.0], &[], 0).is_err());
        assert!(mix_example(&speech(1), &[], &[1.0], 0).is_err());
    }

    #[test]
    fn clean_equals_noisy_targets() {
        let s = speech(4);
        let frames = extract_targets(&s, &s, 48_000).unwrap();
        for (f, t) in &frames {
            for b in 0..NB_BANDS {
                if f.band_mag[b] > 1e-3 {
                    assert!(t.gains[b] >= 0.99);
                    assert!(t.strengths[b] <= 0.05);
                }
            }
            assert!(!t.attenuated());
        }
    }

    #[test]
    fn noise_only_targets() {
        let n = white_noise(48_000, 0.1, 9);
        let frames = extract_targets(&vec![0.0; n.len()], &n, 48_000).unwrap();
        for (_, t) in frames.iter().skip(2).take(90) {
            assert!(t.gains.iter().all(|&g| g == 0.0));
        }
    }
}
