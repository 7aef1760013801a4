//! The 70-value per-frame model input.
//!
//! Index layout is part of the weight-file contract:
//!
//! | indices | content |
//! |---------|---------|
//! | 0..34   | `log10(Y_b(l + 3) + 1e-8)` |
//! | 34..68  | pitch coherence `q_{y,b}(l)` |
//! | 68      | `T(l) / T_MAX` |
//! | 69      | pitch correlation |

use crate::pitch::{PitchEstimate, T_MAX};
use crate::spectral::{BandVector, NB_BANDS};

pub const FEATURE_DIM: usize = 2 * NB_BANDS + 2;
/// Frames of look-ahead on the band magnitudes.
pub const LOOKAHEAD_FRAMES: usize = 3;
/// Floor added before the log.
pub const MAG_EPSILON: f64 = 1e-8;

pub const MAG_OFFSET: usize = 0;
pub const COHERENCE_OFFSET: usize = NB_BANDS;
pub const PERIOD_INDEX: usize = 2 * NB_BANDS;
pub const CORRELATION_INDEX: usize = 2 * NB_BANDS + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
}

impl FeatureVector {
    pub fn magnitudes(&self) -> &[f64] {
        &self.values[MAG_OFFSET..MAG_OFFSET + NB_BANDS]
    }

    pub fn coherences(&self) -> &[f64] {
        &self.values[COHERENCE_OFFSET..COHERENCE_OFFSET + NB_BANDS]
    }

    pub fn period(&self) -> f64 {
        self.values[PERIOD_INDEX]
    }

    pub fn correlation(&self) -> f64 {
        self.values[CORRELATION_INDEX]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_f32(&self) -> [f32; FEATURE_DIM] {
        let mut out = [0.0f32; FEATURE_DIM];
        for (o, v) in out.iter_mut().zip(&self.values) {
            *o = *v as f32;
        }
        out
    }
}

/// Build the feature vector for frame `l` from the band magnitudes of frame
/// `l + 3`, the coherences of frame `l` and the pitch of frame `l`.
pub fn assemble_features(mag_future: &BandVector, q_now: &BandVector, pitch: &PitchEstimate) -> FeatureVector {
    let mut values = [0.0; FEATURE_DIM];
    for b in 0..NB_BANDS {
        values[MAG_OFFSET + b] = (mag_future[b] + MAG_EPSILON).log10();
        values[COHERENCE_OFFSET + b] = q_now[b].clamp(-1.0, 1.0);
    }
    values[PERIOD_INDEX] = pitch.period as f64 / T_MAX as f64;
    values[CORRELATION_INDEX] = pitch.correlation.clamp(-1.0, 1.0);
    FeatureVector { values }
}
