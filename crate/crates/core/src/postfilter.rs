//! Envelope postfilter and the pitch-adaptive output high-pass.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::pitch::PitchEstimate;
use crate::spectral::{BandVector, NB_BANDS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostfilterConfig {
    pub beta: f64,
    /// Reverberation time the decay floor imitates, in seconds.
    pub t60: f64,
    pub hop_seconds: f64,
}

impl Default for PostfilterConfig {
    fn default() -> Self {
        PostfilterConfig {
            beta: 0.02,
            t60: 0.1,
            hop_seconds: 0.01,
        }
    }
}

impl PostfilterConfig {
    /// Per-frame magnitude decay, `10^(-60 hop / (20 t60))`.
    pub fn delta(&self) -> f64 {
        10f64.powf(-60.0 * self.hop_seconds / (20.0 * self.t60))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::config("beta must be positive"));
        }
        if !(self.t60 > 0.0 && self.hop_seconds > 0.0) {
            return Err(Error::config("t60 and hop must be positive"));
        }
        Ok(())
    }
}

pub fn warp_gain(g: f64) -> f64 {
    g * (FRAC_PI_2 * g).sin()
}

/// Loudness compensation from the energy with plain gains (`e0`) and with
/// warped gains (`e1`).
pub fn global_compensation(e0: f64, e1: f64, beta: f64) -> f64 {
    if e1 <= 0.0 {
        return 1.0;
    }
    let ratio = e0 / e1;
    ((1.0 + beta) * ratio / (1.0 + beta * ratio * ratio)).sqrt()
}

pub fn envelope_decay_floor(x: f64, prev_floor: f64, y: f64, delta: f64) -> f64 {
    x.max(delta * prev_floor).min(y)
}

/// Per-stream postfilter state: the previous frame's floored magnitudes.
#[derive(Clone, Debug)]
pub struct Postfilter {
    cfg: PostfilterConfig,
    delta: f64,
    prev: BandVector,
}

impl Postfilter {
    pub fn new(cfg: PostfilterConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Postfilter {
            delta: cfg.delta(),
            cfg,
            prev: [0.0; NB_BANDS],
        })
    }

    pub fn config(&self) -> &PostfilterConfig {
        &self.cfg
    }

    pub fn reset(&mut self) {
        self.prev = [0.0; NB_BANDS];
    }

    /// Final band gains for noisy band magnitudes `y`. `envelope` enables the
    /// warp and compensation, `floor` the decay floor.
    pub fn process(&mut self, gains: &BandVector, y: &BandVector, envelope: bool, floor: bool) -> BandVector {
        let mut g = *gains;
        if envelope {
            let (mut e0, mut e1) = (0.0, 0.0);
            for b in 0..NB_BANDS {
                let w = warp_gain(gains[b]);
                e0 += (gains[b] * y[b]).powi(2);
                e1 += (w * y[b]).powi(2);
                g[b] = w;
            }
            let comp = global_compensation(e0, e1, self.cfg.beta);
            g.iter_mut().for_each(|v| *v *= comp);
        }
        let mut out = [0.0; NB_BANDS];
        for b in 0..NB_BANDS {
            let x = g[b] * y[b];
            let xr = if floor {
                envelope_decay_floor(x, self.prev[b], y[b], self.delta)
            } else {
                x
            };
            self.prev[b] = xr;
            out[b] = if y[b] > 0.0 { xr / y[b] } else { g[b] };
        }
        out
    }
}

pub const HIGHPASS_UNVOICED_HZ: f64 = 60.0;
pub const HIGHPASS_MIN_HZ: f64 = 40.0;
pub const HIGHPASS_MAX_HZ: f64 = 150.0;
/// Cutoff as a fraction of the talker's fundamental.
pub const HIGHPASS_PITCH_RATIO: f64 = 0.55;

pub fn highpass_cutoff(pitch: &PitchEstimate) -> f64 {
    if pitch.is_voiced() {
        (HIGHPASS_PITCH_RATIO * pitch.frequency_hz()).clamp(HIGHPASS_MIN_HZ, HIGHPASS_MAX_HZ)
    } else {
        HIGHPASS_UNVOICED_HZ
    }
}

/// Second-order Butterworth high-pass coefficients `(b, a)` with `a[0] = 1`.
pub fn butterworth_highpass(cutoff_hz: f64, rate: f64) -> ([f64; 3], [f64; 3]) {
    let k = (PI * cutoff_hz / rate).tan();
    let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
    (
        [norm, -2.0 * norm, norm],
        [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
    )
}

/// Magnitude response in dB of [`butterworth_highpass`].
pub fn highpass_response_db(cutoff_hz: f64, rate: f64, hz: f64) -> f64 {
    let (b, a) = butterworth_highpass(cutoff_hz, rate);
    let w = 2.0 * PI * hz / rate;
    let eval = |c: &[f64; 3]| {
        let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
        let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
        (re * re + im * im).sqrt()
    };
    20.0 * (eval(&b) / eval(&a)).log10()
}

/// Streaming high-pass whose cutoff glides linearly over each hop to the
/// value for the current pitch.
#[derive(Clone, Debug)]
pub struct AdaptiveHighpass {
    rate: f64,
    cutoff: f64,
    x: [f64; 2],
    y: [f64; 2],
}

impl AdaptiveHighpass {
    pub fn new(rate: u32) -> Self {
        AdaptiveHighpass {
            rate: rate as f64,
            cutoff: HIGHPASS_UNVOICED_HZ,
            x: [0.0; 2],
            y: [0.0; 2],
        }
    }

    pub fn reset(&mut self) {
        *self = AdaptiveHighpass::new(self.rate as u32);
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn process(&mut self, samples: &mut [f64], pitch: &PitchEstimate) {
        let target = highpass_cutoff(pitch);
        let start = self.cutoff;
        let n = samples.len().max(1) as f64;
        let mut coeffs = butterworth_highpass(start, self.rate);
        for (i, s) in samples.iter_mut().enumerate() {
            if target != start {
                let fc = start + (target - start) * (i + 1) as f64 / n;
                coeffs = butterworth_highpass(fc, self.rate);
            }
            let (b, a) = &coeffs;
            let y = b[0] * *s + b[1] * self.x[0] + b[2] * self.x[1] - a[1] * self.y[0] - a[2] * self.y[1];
            self.x = [*s, self.x[0]];
            self.y = [y, self.y[0]];
            *s = y;
        }
        self.cutoff = target;
    }
}
