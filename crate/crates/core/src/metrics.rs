//! Objective measures used by tests and the CLI.

use num_complex::Complex64;
use realfft::RealFftPlanner;

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.max(1e-30).log10()
}

/// Segmental SNR in dB over 20 ms frames at 48 kHz (`frame` samples in
/// general). Per-frame values are clamped to [-10, 35] dB; frames whose
/// reference energy is more than 40 dB below the loudest frame are skipped.
pub fn segmental_snr(reference: &[f64], test: &[f64], frame: usize) -> f64 {
    let n = reference.len().min(test.len());
    let frames: Vec<(f64, f64)> = (0..n / frame)
        .map(|i| {
            let r = &reference[i * frame..(i + 1) * frame];
            let t = &test[i * frame..(i + 1) * frame];
            let err: f64 = r.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            (energy(r), err)
        })
        .collect();
    let max = frames.iter().map(|f| f.0).fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let active: Vec<f64> = frames
        .iter()
        .filter(|f| f.0 > max * 1e-4)
        .map(|&(s, e)| db(s / e.max(1e-20)).clamp(-10.0, 35.0))
        .collect();
    active.iter().sum::<f64>() / active.len() as f64
}

/// Harmonic-to-noise ratio in dB of `x` for a known fundamental: energy in
/// +-`half_width_hz` around each harmonic versus everything else between
/// `f0 / 2` and `max_hz`. Uses one Hann-windowed FFT over the whole signal.
pub fn harmonic_to_noise(x: &[f64], rate: u32, f0: f64, half_width_hz: f64, max_hz: f64) -> f64 {
    let n = x.len();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let mut spec: Vec<Complex64> = fft.make_output_vec();
    fft.process(&mut buf, &mut spec).expect("sizes come from the planner");
    let df = rate as f64 / n as f64;
    let (mut h, mut noise) = (0.0, 0.0);
    for (k, c) in spec.iter().enumerate() {
        let f = k as f64 * df;
        if f < f0 / 2.0 || f > max_hz {
            continue;
        }
        let nearest = (f / f0).round() * f0;
        if (f - nearest).abs() <= half_width_hz {
            h += c.norm_sqr();
        } else {
            noise += c.norm_sqr();
        }
    }
    db(h / noise.max(1e-30))
}

/// Spearman rank correlation (average ranks for ties).
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{harmonic_tone, white_noise};

    #[test]
    fn segsnr_known_values() {
        let r: Vec<f64> = (0..9600).map(|i| ((i as f64) * 0.01).sin()).collect();
        let t: Vec<f64> = r.iter().map(|v| v * 1.1).collect();
        // error is 0.1 r in every frame: 20 dB
        assert!((segmental_snr(&r, &t, 960) - 20.0).abs() < 1e-9);
        assert_eq!(segmental_snr(&r, &r, 960), 35.0);
    }

    #[test]
    fn hnr_orders_signals() {
        let tone = harmonic_tone(200.0, 20, 0.1, 48_000, 48_000);
        let noise = white_noise(48_000, 0.05, 3);
        let mix: Vec<f64> = tone.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let a = harmonic_to_noise(&tone, 48_000, 200.0, 20.0, 4000.0);
        let b = harmonic_to_noise(&mix, 48_000, 200.0, 20.0, 4000.0);
        assert!(a > b + 20.0);
    }

    #[test]
    fn spearman() {
        assert!((rank_correlation(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]) - 1.0).abs() < 1e-12);
        assert!((rank_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(rank_correlation(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }
}
