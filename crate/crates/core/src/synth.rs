//! Seeded synthetic signals for tests, benches and demo datasets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Speech-like signal: voiced syllables with a drifting fundamental, a
/// falling harmonic envelope with two formant bumps, short noise bursts for
/// fricatives, and pauses.
pub fn harmonic_speech(seconds: f64, rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * rate as f64).round() as usize;
    let fs = rate as f64;
    let mut out = vec![0.0; n];
    let base_f0 = rng.random_range(100.0..220.0);
    let mut pos = (rng.random_range(0.02..0.1) * fs) as usize;
    while pos < n {
        let syl = (rng.random_range(0.12..0.3) * fs) as usize;
        let end = (pos + syl).min(n);
        if rng.random_bool(0.2) {
            // unvoiced burst
            let amp = rng.random_range(0.02..0.06);
            let mut prev = 0.0;
            for (i, o) in out[pos..end].iter_mut().enumerate() {
                let env = (PI * i as f64 / (end - pos) as f64).sin();
                let w: f64 = StandardNormal.sample(&mut rng);
                // first difference tilts the burst towards high frequencies
                *o += amp * env * (w - prev);
                prev = w;
            }
        } else {
            let f_start = base_f0 * rng.random_range(0.85..1.15);
            let f_end = base_f0 * rng.random_range(0.85..1.15);
            let formants = [rng.random_range(400.0..900.0), rng.random_range(1100.0..2400.0)];
            let amp = rng.random_range(0.1..0.3);
            let mut phase = 0.0;
            for (i, o) in out[pos..end].iter_mut().enumerate() {
                let t = i as f64 / (end - pos) as f64;
                let f0 = f_start + (f_end - f_start) * t;
                phase += 2.0 * PI * f0 / fs;
                let env = (PI * t).sin().powf(0.6);
                let mut s = 0.0;
                let mut h = 1;
                while h as f64 * f0 < (fs / 2.0).min(16_000.0) {
                    let f = h as f64 * f0;
                    let mut a = 1.0 / h as f64;
                    for &fm in &formants {
                        a *= 1.0 + 3.0 / (1.0 + ((f - fm) / 150.0).powi(2));
                    }
                    s += a * (h as f64 * phase).sin();
                    h += 1;
                }
                *o += amp * env * s / 4.0;
            }
        }
        pos = end + (rng.random_range(0.03..0.2) * fs) as usize;
    }
    out
}

pub fn white_noise(len: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            amplitude * w
        })
        .collect()
}

/// Approximately 1/f noise from a bank of first-order smoothers.
pub fn pink_noise(len: usize, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poles = [0.99886, 0.99332, 0.96900, 0.86650, 0.55000, -0.7616];
    let gains = [0.0555179, 0.0750759, 0.1538520, 0.3104856, 0.5329522, -0.0168980];
    let mut state = [0.0; 6];
    (0..len)
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            let mut s = 0.5362 * w;
            for i in 0..6 {
                state[i] = poles[i] * state[i] + gains[i] * w;
                s += state[i];
            }
            amplitude * s * 0.2
        })
        .collect()
}

pub fn sine(freq: f64, amplitude: f64, len: usize, rate: u32) -> Vec<f64> {
    (0..len)
        .map(|n| amplitude * (2.0 * PI * freq * n as f64 / rate as f64).sin())
        .collect()
}

/// Sum of the first `harmonics` harmonics of `f0`, equal amplitude.
pub fn harmonic_tone(f0: f64, harmonics: usize, amplitude: f64, len: usize, rate: u32) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for h in 1..=harmonics {
        if h as f64 * f0 >= rate as f64 / 2.0 {
            break;
        }
        for (n, o) in out.iter_mut().enumerate() {
            *o += amplitude * (2.0 * PI * h as f64 * f0 * n as f64 / rate as f64).sin();
        }
    }
    out
}

/// Exponentially decaying noise tail behind a unit direct path at
/// `predelay` samples.
pub fn synthetic_rir(rate: u32, t60: f64, predelay: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = predelay + (t60 * rate as f64 * 1.2) as usize + 1;
    let decay = (-6.9078 / (t60 * rate as f64)).exp();
    let mut rir = vec![0.0; len];
    rir[predelay] = 1.0;
    let mut g = 0.3;
    for r in rir.iter_mut().skip(predelay + 1) {
        let w: f64 = StandardNormal.sample(&mut rng);
        *r = g * w;
        g *= decay;
    }
    rir
}
