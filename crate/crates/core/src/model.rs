//! int8-weight network: time convolutions, GRUs and two sigmoid heads.
//!
//! The graph is read from the weight file. Trunk layers (dense, conv, GRU)
//! run in file order; both heads read the output of the last trunk layer
//! (or the features directly when there is no trunk).
//!
//! Weight file (`.pnwt`), little-endian:
//!
//! ```text
//! "PNWT" | version u32 | feature_dim u32 | n_layers u32 | m_frames u32 | t_max f32
//! per layer:
//!   kind u8 | activation u8 | rows u32 | cols u32 | kernel_width u32
//!   rows*cols i8 weights, row-major
//!   rows f32 biases
//! ```
//!
//! Kinds: 0 dense, 1 conv_time, 2 gru, 3 gain head, 4 strength head.
//! Activations: 0 tanh, 1 sigmoid, 2 relu.
//!
//! Conv layers store `cols = kernel_width * input_dim`, column
//! `tap * input_dim + i`, tap 0 being the oldest frame. GRU layers store
//! `rows = 3 * hidden` (update, reset, candidate) and
//! `cols = input_dim + hidden` (input weights, then recurrent weights).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM, LOOKAHEAD_FRAMES};
use crate::pitch::T_MAX;
use crate::spectral::{BandVector, NB_BANDS};

pub const WEIGHT_MAGIC: &[u8; 4] = b"PNWT";
pub const WEIGHT_VERSION: u32 = 1;
pub const WEIGHT_SCALE: f64 = 1.0 / 256.0;
pub const MAX_QUANT: i8 = 127;
const HEADER_LEN: usize = 24;
const LAYER_HEADER_LEN: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    ConvTime,
    Gru,
    GainHead,
    StrengthHead,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Dense => 0,
            LayerKind::ConvTime => 1,
            LayerKind::Gru => 2,
            LayerKind::GainHead => 3,
            LayerKind::StrengthHead => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => LayerKind::Dense,
            1 => LayerKind::ConvTime,
            2 => LayerKind::Gru,
            3 => LayerKind::GainHead,
            4 => LayerKind::StrengthHead,
            _ => return None,
        })
    }

    pub fn is_head(self) -> bool {
        matches!(self, LayerKind::GainHead | LayerKind::StrengthHead)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Sigmoid => 1,
            Activation::Relu => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Tanh,
            1 => Activation::Sigmoid,
            2 => Activation::Relu,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn quantize_weight(w: f64) -> i8 {
    if w.is_nan() {
        return 0;
    }
    (w * 256.0).round().clamp(-(MAX_QUANT as f64), MAX_QUANT as f64) as i8
}

pub fn dequantize(q: i8) -> f64 {
    q as f64 * WEIGHT_SCALE
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    values: Vec<i8>,
}

impl QuantizedMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<i8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config("matrix dimensions must be positive"));
        }
        if values.len() != rows * cols {
            return Err(Error::config(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|&q| q < -MAX_QUANT) {
            return Err(Error::config("quantized value -128 out of range"));
        }
        Ok(QuantizedMatrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        QuantizedMatrix {
            rows,
            cols,
            values: vec![0; rows * cols],
        }
    }

    pub fn from_f64(rows: usize, cols: usize, weights: &[f64]) -> Result<Self> {
        Self::new(rows, cols, weights.iter().map(|&w| quantize_weight(w)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.values[r * self.cols + c]
    }

    pub fn dequantized(&self) -> Vec<f64> {
        self.values.iter().map(|&q| dequantize(q)).collect()
    }
}

/// Sequential sum of `q_j * x_j`. Every layer funnels through this so the
/// accumulation order is fixed.
#[inline]
fn dot_q(q: &[i8], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&w, &v) in q.iter().zip(x) {
        acc += w as f64 * v;
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub activation: Activation,
    pub kernel_width: usize,
    pub weights: QuantizedMatrix,
    pub bias: Vec<f32>,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        match self.kind {
            LayerKind::ConvTime => self.weights.cols / self.kernel_width,
            LayerKind::Gru => self.weights.cols - self.weights.rows / 3,
            _ => self.weights.cols,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            LayerKind::Gru => self.weights.rows / 3,
            _ => self.weights.rows,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.weights.values.len()
    }

    /// `act(W x * scale + b)` for dense layers and heads.
    fn dense(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.weights.rows {
            let acc = dot_q(self.weights.row(r), x) * WEIGHT_SCALE + self.bias[r] as f64;
            out.push(self.activation.apply(acc));
        }
    }

    /// `history` holds `kernel_width - 1` previous inputs, oldest first.
    fn conv(&self, history: &[f64], x: &[f64], out: &mut Vec<f64>) {
        let in_dim = x.len();
        let split = history.len();
        out.clear();
        for r in 0..self.weights.rows {
            let row = self.weights.row(r);
            let acc = dot_q(&row[..split], history) + dot_q(&row[split..split + in_dim], x);
            out.push(self.activation.apply(acc * WEIGHT_SCALE + self.bias[r] as f64));
        }
    }

    fn gru(&self, x: &[f64], h: &mut [f64], scratch: &mut Vec<f64>) {
        let hidden = h.len();
        let in_dim = x.len();
        let w = &self.weights;
        let b = &self.bias;
        // z and r gates
        scratch.clear();
        for r in 0..2 * hidden {
            let row = w.row(r);
            let acc = dot_q(&row[..in_dim], x) * WEIGHT_SCALE
                + dot_q(&row[in_dim..], h) * WEIGHT_SCALE
                + b[r] as f64;
            scratch.push(sigmoid(acc));
        }
        let mut rh = Vec::with_capacity(hidden);
        for j in 0..hidden {
            rh.push(scratch[hidden + j] * h[j]);
        }
        for j in 0..hidden {
            let row = w.row(2 * hidden + j);
            let acc = dot_q(&row[..in_dim], x) * WEIGHT_SCALE
                + dot_q(&row[in_dim..], &rh) * WEIGHT_SCALE
                + b[2 * hidden + j] as f64;
            scratch.push(self.activation.apply(acc));
        }
        for j in 0..hidden {
            let z = scratch[j];
            h[j] = z * h[j] + (1.0 - z) * scratch[2 * hidden + j];
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub feature_dim: usize,
    pub m_frames: usize,
    pub t_max: f32,
    layers: Vec<Layer>,
    gain_head: usize,
    strength_head: usize,
}

fn layer_err(offset: usize, layer: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset,
        layer: Some(layer),
        message: message.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, layer: Option<usize>, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len(),
                layer,
                message: format!("truncated file while reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, layer: Option<usize>, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, layer, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, layer: Option<usize>, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, layer, what)?.try_into().unwrap()))
    }
}

impl ModelWeights {
    /// Validate a layer list and locate the heads.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let mut m = ModelWeights {
            feature_dim: FEATURE_DIM,
            m_frames: LOOKAHEAD_FRAMES,
            t_max: T_MAX as f32,
            layers,
            gain_head: 0,
            strength_head: 0,
        };
        m.validate().map_err(|(layer, msg)| Error::config(match layer {
            Some(l) => format!("layer {l}: {msg}"),
            None => msg,
        }))?;
        Ok(m)
    }

    fn validate(&mut self) -> std::result::Result<(), (Option<usize>, String)> {
        let mut dim = self.feature_dim;
        let mut gain = None;
        let mut strength = None;
        let mut in_heads = false;
        for (i, l) in self.layers.iter().enumerate() {
            let err = |m: String| Err((Some(i), m));
            let (rows, cols) = (l.weights.rows, l.weights.cols);
            if rows == 0 || cols == 0 {
                return err("zero dimension".into());
            }
            if l.bias.len() != rows {
                return err(format!("{} biases for {rows} rows", l.bias.len()));
            }
            if l.bias.iter().any(|b| !b.is_finite()) {
                return err("non-finite bias".into());
            }
            match l.kind {
                LayerKind::ConvTime => {
                    if l.kernel_width != 3 && l.kernel_width != 5 {
                        return err(format!("conv kernel width {} not in {{3, 5}}", l.kernel_width));
                    }
                    if cols % l.kernel_width != 0 {
                        return err(format!("{cols} columns not a multiple of kernel width"));
                    }
                }
                _ if l.kernel_width != 0 => {
                    return err("kernel width set on a non-conv layer".into());
                }
                LayerKind::Gru if rows % 3 != 0 || cols <= rows / 3 => {
                    return err(format!("GRU shape {rows}x{cols} is not 3H x (in + H)"));
                }
                _ => {}
            }
            if l.kind.is_head() {
                in_heads = true;
                if rows != NB_BANDS {
                    return err(format!("head has {rows} outputs, expected {NB_BANDS}"));
                }
                if l.activation != Activation::Sigmoid {
                    return err("head activation must be sigmoid".into());
                }
                if l.input_dim() != dim {
                    return err(format!("head expects {} inputs, trunk gives {dim}", l.input_dim()));
                }
                let slot = if l.kind == LayerKind::GainHead { &mut gain } else { &mut strength };
                if slot.replace(i).is_some() {
                    return err("duplicate head".into());
                }
            } else {
                if in_heads {
                    return err("trunk layer after a head".into());
                }
                if l.input_dim() != dim {
                    return err(format!("expects {} inputs, previous layer gives {dim}", l.input_dim()));
                }
                dim = l.output_dim();
            }
        }
        match (gain, strength) {
            (Some(g), Some(s)) => {
                self.gain_head = g;
                self.strength_head = s;
                Ok(())
            }
            _ => Err((None, "gain and strength heads are both required".into())),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn trunk(&self) -> &[Layer] {
        let first_head = self.gain_head.min(self.strength_head);
        &self.layers[..first_head]
    }

    pub fn total_weights(&self) -> usize {
        self.layers.iter().map(Layer::weight_count).sum()
    }

    pub fn complexity_report(&self, frame_rate: f64) -> f64 {
        mmacs(self.total_weights(), frame_rate)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        let magic = rd.take(4, None, "magic")?;
        if magic != WEIGHT_MAGIC {
            return Err(Error::format(0, "bad magic, expected PNWT"));
        }
        let version = rd.u32(None, "version")?;
        if version != WEIGHT_VERSION {
            return Err(Error::format(4, format!("unsupported weight version {version}")));
        }
        let feature_dim = rd.u32(None, "feature_dim")? as usize;
        if feature_dim != FEATURE_DIM {
            return Err(Error::format(8, format!("feature_dim {feature_dim}, engine uses {FEATURE_DIM}")));
        }
        let n_layers = rd.u32(None, "n_layers")? as usize;
        let m_frames = rd.u32(None, "m_frames")? as usize;
        if m_frames != LOOKAHEAD_FRAMES {
            return Err(Error::format(16, format!("m_frames {m_frames}, engine uses {LOOKAHEAD_FRAMES}")));
        }
        let t_max = rd.f32(None, "t_max")?;
        if t_max != T_MAX as f32 {
            return Err(Error::format(20, format!("t_max {t_max}, engine uses {T_MAX}")));
        }
        // each layer needs at least its header, so this bounds the allocation
        if n_layers > (bytes.len() - HEADER_LEN) / LAYER_HEADER_LEN {
            return Err(Error::format(12, format!("{n_layers} layers cannot fit in the file")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let start = rd.pos;
            let l = Some(i);
            let kind_code = rd.take(1, l, "layer kind")?[0];
            let kind = LayerKind::from_code(kind_code)
                .ok_or_else(|| layer_err(start, i, format!("unknown layer kind {kind_code}")))?;
            let act_code = rd.take(1, l, "activation")?[0];
            let activation = Activation::from_code(act_code)
                .ok_or_else(|| layer_err(start + 1, i, format!("unknown activation {act_code}")))?;
            let rows = rd.u32(l, "rows")? as usize;
            let cols = rd.u32(l, "cols")? as usize;
            let kernel_width = rd.u32(l, "kernel_width")? as usize;
            if rows == 0 || cols == 0 {
                return Err(layer_err(start + 2, i, "zero dimension"));
            }
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| layer_err(start + 2, i, "dimension overflow"))?;
            let wpos = rd.pos;
            let raw = rd.take(n, l, "weights")?;
            if let Some(k) = raw.iter().position(|&b| b as i8 == i8::MIN) {
                return Err(layer_err(wpos + k, i, "quantized weight -128 out of range [-127, 127]"));
            }
            let values = raw.iter().map(|&b| b as i8).collect();
            let bpos = rd.pos;
            let rawb = rd.take(rows * 4, l, "biases")?;
            let bias: Vec<f32> = rawb
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if let Some(k) = bias.iter().position(|b| !b.is_finite()) {
                return Err(layer_err(bpos + 4 * k, i, "non-finite bias"));
            }
            layers.push((
                start,
                Layer {
                    kind,
                    activation,
                    kernel_width,
                    weights: QuantizedMatrix { rows, cols, values },
                    bias,
                },
            ));
        }
        if rd.pos != bytes.len() {
            return Err(Error::format(rd.pos, "trailing bytes after last layer"));
        }
        let offsets: Vec<usize> = layers.iter().map(|(o, _)| *o).collect();
        let mut m = ModelWeights {
            feature_dim,
            m_frames,
            t_max,
            layers: layers.into_iter().map(|(_, l)| l).collect(),
            gain_head: 0,
            strength_head: 0,
        };
        m.validate().map_err(|(layer, message)| Error::Format {
            offset: layer.map(|l| offsets[l]).unwrap_or(12),
            layer,
            message,
        })?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.total_weights() * 2);
        out.extend_from_slice(WEIGHT_MAGIC);
        out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.feature_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.m_frames as u32).to_le_bytes());
        out.extend_from_slice(&self.t_max.to_le_bytes());
        for l in &self.layers {
            out.push(l.kind.code());
            out.push(l.activation.code());
            out.extend_from_slice(&(l.weights.rows as u32).to_le_bytes());
            out.extend_from_slice(&(l.weights.cols as u32).to_le_bytes());
            out.extend_from_slice(&(l.kernel_width as u32).to_le_bytes());
            out.extend(l.weights.values.iter().map(|&q| q as u8));
            for b in &l.bias {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Random weights for the default desk architecture.
    pub fn desk_random(seed: u64) -> Self {
        DeskConfig::default().random(seed)
    }
}

pub fn mmacs(total_weights: usize, frame_rate: f64) -> f64 {
    total_weights as f64 * frame_rate / 1e6
}

/// Layer widths of the default desk-scale architecture:
/// conv 1x5, conv 1x3, stacked GRUs, then the two heads.
#[derive(Clone, Debug, PartialEq)]
pub struct DeskConfig {
    pub conv1: usize,
    pub conv2: usize,
    pub gru: Vec<usize>,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            conv1: 48,
            conv2: 48,
            gru: vec![48, 48, 48],
        }
    }
}

impl DeskConfig {
    /// Layer shapes `(kind, activation, rows, cols, kernel_width)`.
    pub fn shapes(&self) -> Vec<(LayerKind, Activation, usize, usize, usize)> {
        let mut v = vec![
            (LayerKind::ConvTime, Activation::Tanh, self.conv1, 5 * FEATURE_DIM, 5),
            (LayerKind::ConvTime, Activation::Tanh, self.conv2, 3 * self.conv1, 3),
        ];
        let mut dim = self.conv2;
        for &h in &self.gru {
            v.push((LayerKind::Gru, Activation::Tanh, 3 * h, dim + h, 0));
            dim = h;
        }
        v.push((LayerKind::GainHead, Activation::Sigmoid, NB_BANDS, dim, 0));
        v.push((LayerKind::StrengthHead, Activation::Sigmoid, NB_BANDS, dim, 0));
        v
    }

    pub fn random(&self, seed: u64) -> ModelWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = self
            .shapes()
            .into_iter()
            .map(|(kind, activation, rows, cols, kernel_width)| {
                let fan_in = if kind == LayerKind::Gru { cols - rows / 3 } else { cols };
                let limit = (3.0 / fan_in as f64).sqrt().min(0.5);
                let w: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
                Layer {
                    kind,
                    activation,
                    kernel_width,
                    weights: QuantizedMatrix::from_f64(rows, cols, &w).unwrap(),
                    bias: (0..rows).map(|_| rng.random_range(-0.1f32..0.1)).collect(),
                }
            })
            .collect();
        ModelWeights::new(layers).expect("desk shapes chain by construction")
    }
}

/// Per-stream recurrent state.
#[derive(Clone, Debug)]
pub struct ModelState {
    /// Per layer: conv history (oldest first) or GRU hidden vector.
    slots: Vec<Vec<f64>>,
    frames: u64,
}

impl ModelState {
    pub fn new(model: &ModelWeights) -> Self {
        let slots = model
            .layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::ConvTime => vec![0.0; (l.kernel_width - 1) * l.input_dim()],
                LayerKind::Gru => vec![0.0; l.output_dim()],
                _ => Vec::new(),
            })
            .collect();
        ModelState { slots, frames: 0 }
    }

    pub fn reset(&mut self) {
        for s in &mut self.slots {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        self.frames = 0;
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    fn check(&self, model: &ModelWeights) -> Result<()> {
        let ok = self.slots.len() == model.layers.len()
            && model.layers.iter().zip(&self.slots).all(|(l, s)| match l.kind {
                LayerKind::ConvTime => s.len() == (l.kernel_width - 1) * l.input_dim(),
                LayerKind::Gru => s.len() == l.output_dim(),
                _ => s.is_empty(),
            });
        if ok {
            Ok(())
        } else {
            Err(Error::usage("model state was built for a different model"))
        }
    }
}

/// Gains and strengths for one frame, both in (0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelOutput {
    pub gains: BandVector,
    pub strengths: BandVector,
}

fn head_output(layer: &Layer, x: &[f64], buf: &mut Vec<f64>) -> BandVector {
    layer.dense(x, buf);
    let mut out = [0.0; NB_BANDS];
    out.copy_from_slice(buf);
    out
}

fn step_layer(layer: &Layer, slot: &mut Vec<f64>, x: &[f64], out: &mut Vec<f64>, scratch: &mut Vec<f64>) {
    match layer.kind {
        LayerKind::Dense => layer.dense(x, out),
        LayerKind::ConvTime => {
            layer.conv(slot, x, out);
            let d = x.len();
            if !slot.is_empty() {
                slot.copy_within(d.., 0);
                let n = slot.len();
                slot[n - d..].copy_from_slice(x);
            }
        }
        LayerKind::Gru => {
            layer.gru(x, slot, scratch);
            out.clear();
            out.extend_from_slice(slot);
        }
        LayerKind::GainHead | LayerKind::StrengthHead => unreachable!("heads are not trunk layers"),
    }
}

pub fn infer(model: &ModelWeights, state: &mut ModelState, features: &FeatureVector) -> Result<ModelOutput> {
    state.check(model)?;
    let mut x: Vec<f64> = features.values.to_vec();
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    for (layer, slot) in model.trunk().iter().zip(state.slots.iter_mut()) {
        step_layer(layer, slot, &x, &mut out, &mut scratch);
        std::mem::swap(&mut x, &mut out);
    }
    state.frames += 1;
    Ok(ModelOutput {
        gains: head_output(&model.layers[model.gain_head], &x, &mut out),
        strengths: head_output(&model.layers[model.strength_head], &x, &mut out),
    })
}

/// Run several consecutive frames layer by layer. Outputs are bit-identical
/// to calling [`infer`] once per frame.
pub fn infer_batch(
    model: &ModelWeights,
    state: &mut ModelState,
    frames: &[FeatureVector],
) -> Result<Vec<ModelOutput>> {
    state.check(model)?;
    let mut xs: Vec<Vec<f64>> = frames.iter().map(|f| f.values.to_vec()).collect();
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    for (layer, slot) in model.trunk().iter().zip(state.slots.iter_mut()) {
        for x in xs.iter_mut() {
            step_layer(layer, slot, x, &mut out, &mut scratch);
            std::mem::swap(x, &mut out);
        }
    }
    state.frames += frames.len() as u64;
    Ok(xs
        .iter()
        .map(|x| ModelOutput {
            gains: head_output(&model.layers[model.gain_head], x, &mut out),
            strengths: head_output(&model.layers[model.strength_head], x, &mut out),
        })
        .collect())
}
