//! Streaming enhancer: front end, gain source, per-band combination,
//! postfilter and synthesis.
//!
//! Output hop `k` carries the enhanced input hop `k - 4`: three hops of
//! feature look-ahead plus the synthesis overlap, 40 ms in total. The first
//! four output hops are silence. [`Enhancer::flush`] feeds four zero hops to
//! push out the tail.

use std::sync::Arc;
use std::time::Instant;

use crate::analysis::{AnalysisFrame, FrontEnd, DEFAULT_COMB_PERIODS};
use crate::error::{Error, Result};
use crate::features::LOOKAHEAD_FRAMES;
use crate::model::{infer, infer_batch, ModelState, ModelWeights};
use crate::pitch::{PitchEstimate, PITCH_RATE};
use crate::postfilter::{AdaptiveHighpass, Postfilter, PostfilterConfig};
use crate::spectral::{
    band_energies, interpolate_gains, stft_resample, BandVector, FrameSpec, OverlapState, Spectrum, Stft, NB_BANDS,
};
use crate::targets::frame_targets;

/// Hops between an input hop and the output hop that carries it.
pub const LATENCY_HOPS: usize = LOOKAHEAD_FRAMES + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineConfig {
    pub sample_rate: u32,
    /// Blend towards the comb-filtered signal by the predicted strengths.
    pub pitch_filter: bool,
    /// Gain warping and loudness compensation.
    pub postfilter: bool,
    pub decay_floor: bool,
    pub highpass: bool,
    pub comb_periods: usize,
    pub postfilter_cfg: PostfilterConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            sample_rate: PITCH_RATE,
            pitch_filter: true,
            postfilter: true,
            decay_floor: true,
            highpass: true,
            comb_periods: DEFAULT_COMB_PERIODS,
            postfilter_cfg: PostfilterConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn at_rate(sample_rate: u32) -> Self {
        EngineConfig {
            sample_rate,
            ..Self::default()
        }
    }

    /// Everything after the gain source switched off.
    pub fn transparent(mut self) -> Self {
        self.pitch_filter = false;
        self.postfilter = false;
        self.decay_floor = false;
        self.highpass = false;
        self
    }
}

/// Where the band gains and strengths come from.
#[derive(Clone)]
enum Source {
    Missing,
    Model(Arc<ModelWeights>, ModelState),
    Unity,
    Oracle(FrontEnd),
}

/// Diagnostics for one processed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInfo {
    pub index: i64,
    pub pitch: PitchEstimate,
    pub band_mag: BandVector,
    /// Gains and strengths from the gain source, before the postfilter.
    pub gains: BandVector,
    pub strengths: BandVector,
    /// Band gains actually applied.
    pub applied: BandVector,
}

#[derive(Clone)]
pub struct Enhancer {
    cfg: EngineConfig,
    source: Source,
    front: FrontEnd,
    postfilter: Postfilter,
    highpass: AdaptiveHighpass,
    out_stft: Stft,
    overlap: OverlapState,
    hop: usize,
    frames_processed: u64,
    info: Option<Vec<FrameInfo>>,
}

impl Enhancer {
    fn build(cfg: EngineConfig, source: Source) -> Result<Self> {
        if cfg.comb_periods == 0 {
            return Err(Error::config("comb needs at least one period"));
        }
        let front = FrontEnd::with_comb_periods(cfg.sample_rate, cfg.comb_periods)?;
        let out_spec = FrameSpec::new(cfg.sample_rate)?;
        Ok(Enhancer {
            source,
            hop: front.input_hop(),
            front,
            postfilter: Postfilter::new(cfg.postfilter_cfg)?,
            highpass: AdaptiveHighpass::new(cfg.sample_rate),
            out_stft: Stft::new(out_spec)?,
            overlap: OverlapState::new(out_spec.hop()),
            frames_processed: 0,
            info: None,
            cfg,
        })
    }

    /// Model-driven enhancer. Without a model every hop is rejected.
    pub fn new(cfg: EngineConfig, model: Option<Arc<ModelWeights>>) -> Result<Self> {
        let source = match model {
            Some(m) => {
                let st = ModelState::new(&m);
                Source::Model(m, st)
            }
            None => Source::Missing,
        };
        Self::build(cfg, source)
    }

    /// Unit gains and zero strengths.
    pub fn unity(cfg: EngineConfig) -> Result<Self> {
        Self::build(cfg, Source::Unity)
    }

    /// Ideal gains and strengths from a time-aligned clean reference.
    pub fn oracle(cfg: EngineConfig) -> Result<Self> {
        let clean = FrontEnd::with_comb_periods(cfg.sample_rate, cfg.comb_periods)?;
        Self::build(cfg, Source::Oracle(clean))
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Samples per hop at the stream rate.
    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn latency_samples(&self) -> usize {
        LATENCY_HOPS * self.hop
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames_processed
    }

    pub fn model(&self) -> Option<&ModelWeights> {
        match &self.source {
            Source::Model(m, _) => Some(m),
            _ => None,
        }
    }

    /// Start collecting a [`FrameInfo`] per frame.
    pub fn record_frames(&mut self) {
        self.info = Some(Vec::new());
    }

    pub fn take_frame_info(&mut self) -> Vec<FrameInfo> {
        self.info.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn reset(&mut self) {
        self.front.reset();
        match &mut self.source {
            Source::Model(_, st) => st.reset(),
            Source::Oracle(fe) => fe.reset(),
            _ => {}
        }
        self.postfilter.reset();
        self.highpass.reset();
        self.overlap.reset();
        self.frames_processed = 0;
        if let Some(v) = &mut self.info {
            v.clear();
        }
    }

    fn check_hop(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.hop {
            return Err(Error::usage(format!(
                "expected {} samples per hop, got {}",
                self.hop,
                input.len()
            )));
        }
        Ok(())
    }

    /// One hop in, one hop out.
    pub fn process_hop(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_hop(input)?;
        match self.source {
            Source::Missing => return Err(Error::usage("no model loaded")),
            Source::Oracle(_) => return Err(Error::usage("oracle enhancer needs the clean reference")),
            _ => {}
        }
        let Some(frame) = self.front.push(input)? else {
            return Ok(vec![0.0; self.hop]);
        };
        let (gains, strengths) = match &mut self.source {
            Source::Model(m, st) => {
                let o = infer(m, st, &frame.features)?;
                (o.gains, o.strengths)
            }
            _ => ([1.0; NB_BANDS], [0.0; NB_BANDS]),
        };
        self.render(&frame, &gains, &strengths)
    }

    /// Several hops at once; the model runs batched over the frames. The
    /// output is bit-identical to calling [`Enhancer::process_hop`] per hop.
    pub fn process_block(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() % self.hop != 0 {
            return Err(Error::usage(format!(
                "block of {} samples is not a whole number of {}-sample hops",
                input.len(),
                self.hop
            )));
        }
        let Source::Model(model, _) = &self.source else {
            let mut out = Vec::with_capacity(input.len());
            for h in input.chunks(self.hop) {
                out.extend(self.process_hop(h)?);
            }
            return Ok(out);
        };
        let model = model.clone();
        let mut slots: Vec<Option<AnalysisFrame>> = Vec::with_capacity(input.len() / self.hop);
        for h in input.chunks(self.hop) {
            slots.push(self.front.push(h)?);
        }
        let feats: Vec<_> = slots.iter().flatten().map(|f| f.features).collect();
        let outputs = match &mut self.source {
            Source::Model(_, st) => infer_batch(&model, st, &feats)?,
            _ => unreachable!("checked above"),
        };
        let mut outputs = outputs.into_iter();
        let mut out = Vec::with_capacity(input.len());
        for slot in slots {
            match slot {
                None => out.extend(std::iter::repeat_n(0.0, self.hop)),
                Some(frame) => {
                    let o = outputs.next().expect("one output per frame");
                    out.extend(self.render(&frame, &o.gains, &o.strengths)?);
                }
            }
        }
        Ok(out)
    }

    /// Oracle mode: gains and strengths come from the clean reference.
    pub fn process_oracle_hop(&mut self, noisy: &[f64], clean: &[f64]) -> Result<Vec<f64>> {
        self.check_hop(noisy)?;
        if clean.len() != noisy.len() {
            return Err(Error::usage(format!(
                "clean hop has {} samples, noisy hop {}",
                clean.len(),
                noisy.len()
            )));
        }
        let Source::Oracle(clean_front) = &mut self.source else {
            return Err(Error::usage("enhancer was not built for oracle processing"));
        };
        let c = clean_front.push(clean)?;
        let n = self.front.push(noisy)?;
        match (c, n) {
            (Some(c), Some(n)) => {
                let t = frame_targets(&c, &n, self.front.layout())?;
                self.render(&n, &t.combined_gains(), &t.strengths)
            }
            _ => Ok(vec![0.0; self.hop]),
        }
    }

    fn render(&mut self, frame: &AnalysisFrame, gains: &BandVector, strengths: &BandVector) -> Result<Vec<f64>> {
        let layout = self.front.layout();
        let mut z = frame.spectrum.clone();
        if self.cfg.pitch_filter {
            let r = interpolate_gains(strengths, layout);
            for ((zk, pk), rk) in z.bins.iter_mut().zip(&frame.periodic.bins).zip(&r) {
                *zk = *zk * (1.0 - rk) + pk * *rk;
            }
            // restore the noisy band energies so the gains act on the right level
            let zb = band_energies(&z, layout)?;
            let mut scale = [1.0; NB_BANDS];
            for b in 0..NB_BANDS {
                if zb[b] > 0.0 {
                    scale[b] = frame.band_mag[b] / zb[b];
                }
            }
            let s = interpolate_gains(&scale, layout);
            z.bins.iter_mut().zip(&s).for_each(|(c, s)| *c *= *s);
        }
        let applied = self
            .postfilter
            .process(gains, &frame.band_mag, self.cfg.postfilter, self.cfg.decay_floor);
        let g = interpolate_gains(&applied, layout);
        z.bins.iter_mut().zip(&g).for_each(|(c, g)| *c *= *g);
        let out_spec: Spectrum = if self.cfg.sample_rate == PITCH_RATE {
            z
        } else {
            stft_resample(&z, PITCH_RATE, self.cfg.sample_rate)?
        };
        let mut samples = self.out_stft.synthesize(&out_spec, &mut self.overlap)?;
        if self.cfg.highpass {
            self.highpass.process(&mut samples, &frame.pitch);
        }
        if frame.index == 0 {
            // these samples precede the stream
            samples.iter_mut().for_each(|s| *s = 0.0);
        }
        self.frames_processed += 1;
        if let Some(v) = &mut self.info {
            v.push(FrameInfo {
                index: frame.index,
                pitch: frame.pitch,
                band_mag: frame.band_mag,
                gains: *gains,
                strengths: *strengths,
                applied,
            });
        }
        Ok(samples)
    }

    /// Feed zero hops to push out the last 40 ms.
    pub fn flush(&mut self) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.hop];
        let mut out = Vec::with_capacity(LATENCY_HOPS * self.hop);
        for _ in 0..LATENCY_HOPS {
            out.extend(self.process_hop(&zeros)?);
        }
        Ok(out)
    }

    fn flush_oracle(&mut self) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.hop];
        let mut out = Vec::with_capacity(LATENCY_HOPS * self.hop);
        for _ in 0..LATENCY_HOPS {
            out.extend(self.process_oracle_hop(&zeros, &zeros)?);
        }
        Ok(out)
    }

    /// Whole-signal convenience: stream, flush, and drop the latency so the
    /// result lines up with `input` sample for sample. `batch` > 1 uses
    /// [`Enhancer::process_block`] with that many hops per block.
    pub fn enhance(&mut self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let padded = pad_to_hops(input, self.hop);
        let mut out = Vec::with_capacity(padded.len() + self.latency_samples());
        if batch > 1 {
            for block in padded.chunks(batch * self.hop) {
                out.extend(self.process_block(block)?);
            }
        } else {
            for h in padded.chunks(self.hop) {
                out.extend(self.process_hop(h)?);
            }
        }
        out.extend(self.flush()?);
        Ok(align(out, self.latency_samples(), input.len()))
    }

    /// Whole-signal oracle processing, aligned with the input.
    pub fn enhance_oracle(&mut self, noisy: &[f64], clean: &[f64]) -> Result<Vec<f64>> {
        if noisy.len() != clean.len() {
            return Err(Error::usage(format!(
                "noisy has {} samples, clean {}",
                noisy.len(),
                clean.len()
            )));
        }
        let n = pad_to_hops(noisy, self.hop);
        let c = pad_to_hops(clean, self.hop);
        let mut out = Vec::with_capacity(n.len() + self.latency_samples());
        for (a, b) in n.chunks(self.hop).zip(c.chunks(self.hop)) {
            out.extend(self.process_oracle_hop(a, b)?);
        }
        out.extend(self.flush_oracle()?);
        Ok(align(out, self.latency_samples(), noisy.len()))
    }
}

fn pad_to_hops(x: &[f64], hop: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    v.resize(x.len().div_ceil(hop) * hop, 0.0);
    v
}

fn align(mut out: Vec<f64>, latency: usize, len: usize) -> Vec<f64> {
    out.drain(..latency.min(out.len()));
    out.truncate(len);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub seconds_of_audio: f64,
    pub wall_seconds: f64,
    pub real_time_factor: f64,
    pub mmacs: f64,
    pub frames_processed: u64,
    pub batch: usize,
}

/// Time the enhancer on `seconds` of synthetic noisy speech at 48 kHz.
pub fn bench(model: Arc<ModelWeights>, seconds: f64, batch: usize) -> Result<BenchReport> {
    if !(seconds > 0.0) {
        return Err(Error::config("bench needs a positive duration"));
    }
    let len = (seconds * PITCH_RATE as f64) as usize;
    let speech = crate::synth::harmonic_speech(seconds, PITCH_RATE, 1);
    let noise = crate::synth::pink_noise(len, 0.05, 2);
    let input: Vec<f64> = speech.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let mmacs = model.complexity_report(100.0);
    let mut enh = Enhancer::new(EngineConfig::default(), Some(model))?;
    let start = Instant::now();
    let out = enh.enhance(&input, batch.max(1))?;
    let wall = start.elapsed().as_secs_f64();
    std::hint::black_box(&out);
    let audio = input.len() as f64 / PITCH_RATE as f64;
    Ok(BenchReport {
        seconds_of_audio: audio,
        wall_seconds: wall,
        real_time_factor: audio / wall.max(1e-12),
        mmacs,
        frames_processed: enh.frames_processed(),
        batch: batch.max(1),
    })
}
