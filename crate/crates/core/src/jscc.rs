//! Spiking joint source-channel coding.
//!
//! A sensor raster `o` drives an encoder SNN whose output neurons `x` are
//! sent over the impulse-radio link. The received raster `y` drives a
//! decoder SNN whose read-out neurons `v` are rate-decoded into a class.
//! Training clamps `v` to a rate-coded target and updates every parameter
//! once per time step: decoder read-out neurons by the direct rule, every
//! other neuron (encoder outputs included) through the shared error signal.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;

use crate::channel::{BinaryChannel, ChannelConfig, GaussianChannel, IdealChannel};
use crate::data::{rate_target, LabeledSpikeSet, TARGET_HIGH_RATE, TARGET_LOW_RATE};
use crate::error::{config, Result};
use crate::filter::FilterConfig;
use crate::fl::{argmax_lowest, error_signal};
use crate::learning::{RuleConfig, ThreeFactorLearner};
use crate::network::{NetworkParams, NetworkState, Topology, INIT_SCALE};
use crate::neuron::NeuronParams;
use crate::raster::SpikeRaster;
use crate::seed::{self, Rng};

/// How the sensor raster reaches the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Trainable encoder SNN in front of the link.
    #[default]
    NeuroJscc,
    /// The sensor raster is sent as is (rate 1); only a receiver is trained.
    Uncoded,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::NeuroJscc => "neurojscc",
            Scheme::Uncoded => "uncoded",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neurojscc" => Ok(Scheme::NeuroJscc),
            "uncoded" => Ok(Scheme::Uncoded),
            other => config(format!("unknown scheme {other:?} (expected neurojscc or uncoded)")),
        }
    }
}

/// Shape and training hyper-parameters of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scheme: Scheme,
    /// Sensor channels `d_o`.
    pub d_o: usize,
    /// Rate `r = d_x / d_o` as a fraction.
    pub rate_num: usize,
    pub rate_den: usize,
    /// Read-out neurons (classes) `d_v`.
    pub d_v: usize,
    /// Hidden decoder neurons; `None` uses `d_x`.
    pub decoder_hidden: Option<usize>,
    /// Hidden encoder neurons.
    pub encoder_hidden: usize,
    /// Half-width of the encoder's initial synaptic weights.
    pub encoder_init_scale: f64,
    pub horizon: usize,
    pub filters: FilterConfig,
    pub target_high: f64,
    pub target_low: f64,
    pub learning_rate: f64,
    /// Step size for the encoder; `None` uses `learning_rate`.
    pub encoder_learning_rate: Option<f64>,
    pub rule: RuleConfig,
}

impl PipelineConfig {
    pub fn new(scheme: Scheme, d_o: usize, horizon: usize) -> Self {
        Self {
            scheme,
            d_o,
            rate_num: 1,
            rate_den: 1,
            d_v: 2,
            decoder_hidden: None,
            encoder_hidden: 0,
            encoder_init_scale: INIT_SCALE,
            horizon,
            filters: FilterConfig::default(),
            target_high: TARGET_HIGH_RATE,
            target_low: TARGET_LOW_RATE,
            learning_rate: 0.01,
            encoder_learning_rate: None,
            rule: RuleConfig::default(),
        }
    }

    /// `d_x = r d_o`; rejects rates that do not give a whole lane count.
    pub fn d_x(&self) -> Result<usize> {
        if self.rate_num == 0 || self.rate_den == 0 {
            return config("rate must be a positive fraction");
        }
        if self.scheme == Scheme::Uncoded && self.rate_num != self.rate_den {
            return config("uncoded transmission has rate 1");
        }
        let scaled = self.rate_num * self.d_o;
        if scaled % self.rate_den != 0 {
            return config(format!(
                "rate {}/{} times d_o = {} is not an integer number of lanes",
                self.rate_num, self.rate_den, self.d_o
            ));
        }
        match scaled / self.rate_den {
            0 => config("rate gives zero transmitted lanes"),
            d => Ok(d),
        }
    }

    pub fn decoder_hidden_count(&self) -> Result<usize> {
        Ok(self.decoder_hidden.unwrap_or(self.d_x()?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_o == 0 || self.d_v == 0 || self.horizon == 0 {
            return config("d_o, d_v and horizon must be positive");
        }
        self.d_x()?;
        if !(self.encoder_init_scale.is_finite() && self.encoder_init_scale >= 0.0) {
            return config("encoder init scale must be finite and >= 0");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return config(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.target_low)
            || !(0.0..=1.0).contains(&self.target_high)
            || self.target_low >= self.target_high
        {
            return config("target rates must satisfy 0 <= low < high <= 1");
        }
        Ok(())
    }
}

/// Sampled signals of one pass through the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: SpikeRaster,
    pub y: SpikeRaster,
    pub v: SpikeRaster,
    /// Per-step summed read-out loss, present when the read-out was clamped.
    pub losses: Option<Vec<f64>>,
}

/// Encoder, link and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub config: PipelineConfig,
    /// `None` for uncoded transmission.
    pub encoder: Option<NetworkParams>,
    pub decoder: NetworkParams,
    /// `None` is an error-free link.
    pub channel: Option<ChannelConfig>,
}

impl Pipeline {
    /// Randomly initialized pipeline over an error-free link.
    pub fn new(config: PipelineConfig, init_seed: u64) -> Result<Self> {
        config.validate()?;
        let d_x = config.d_x()?;
        let encoder = match config.scheme {
            Scheme::NeuroJscc => {
                let topo = if config.encoder_hidden == 0 {
                    Topology::feedforward(config.d_o, d_x)?
                } else {
                    Topology::dense(config.d_o, d_x, config.encoder_hidden)?
                };
                Some(NetworkParams::random_scaled(
                    Arc::new(topo),
                    seed::derive(init_seed, seed::stream::INIT, 0),
                    config.encoder_init_scale,
                ))
            }
            Scheme::Uncoded => None,
        };
        let dec_topo = Topology::dense(d_x, config.d_v, config.decoder_hidden_count()?)?;
        let decoder = NetworkParams::random(
            Arc::new(dec_topo),
            seed::derive(init_seed, seed::stream::INIT, 1),
        );
        Ok(Self {
            config,
            encoder,
            decoder,
            channel: None,
        })
    }

    /// Rebuilds a pipeline from stored parameters, checking their shapes.
    pub fn from_parts(
        cfg: PipelineConfig,
        encoder: Option<NetworkParams>,
        decoder: NetworkParams,
    ) -> Result<Self> {
        let template = Self::new(cfg, 0)?;
        match (&template.encoder, &encoder) {
            (None, None) => {}
            (Some(a), Some(b)) if a.same_shape(b) => {}
            _ => return config("encoder parameters do not match the configuration"),
        }
        if !template.decoder.same_shape(&decoder) {
            return config("decoder parameters do not match the configuration");
        }
        Ok(Self {
            encoder,
            decoder,
            ..template
        })
    }

    pub fn d_x(&self) -> usize {
        self.decoder.topology().exogenous()
    }

    /// Sets the link to the given noise level.
    pub fn set_channel(&mut self, channel: Option<ChannelConfig>) -> Result<()> {
        if let Some(c) = &channel {
            if c.lanes != self.d_x() {
                return config(format!(
                    "channel has {} lanes, pipeline transmits {}",
                    c.lanes,
                    self.d_x()
                ));
            }
        }
        self.channel = channel;
        Ok(())
    }

    /// Calibrates the link so that a transmitted raster of the given density
    /// sees `snr_db`.
    pub fn calibrate(&mut self, density: f64, snr_db: f64) -> Result<()> {
        let c = ChannelConfig::calibrated(self.d_x(), density, snr_db)?;
        self.set_channel(Some(c))
    }

    fn link(&self) -> Box<dyn BinaryChannel> {
        match self.channel {
            Some(c) => Box::new(GaussianChannel::new(c)),
            None => Box::new(IdealChannel { lanes: self.d_x() }),
        }
    }

    fn check_input(&self, o: &SpikeRaster) -> Result<()> {
        if o.channels() != self.config.d_o {
            return config(format!(
                "sensor raster has {} channels, pipeline expects {}",
                o.channels(),
                self.config.d_o
            ));
        }
        Ok(())
    }

    /// One sampled pass; when `clamp_v` is given the read-out is clamped and
    /// per-step losses are recorded.
    pub fn forward(
        &self,
        o: &SpikeRaster,
        clamp_v: Option<&SpikeRaster>,
        rng: &mut Rng,
    ) -> Result<Trajectory> {
        self.check_input(o)?;
        if let Some(v) = clamp_v {
            if v.channels() != self.config.d_v || v.horizon() != o.horizon() {
                return config("clamped read-out raster has the wrong shape");
            }
        }
        let horizon = o.horizon();
        let mut run = Run::new(self, rng);
        let mut x = SpikeRaster::zeros(self.d_x(), horizon)?;
        let mut y = SpikeRaster::zeros(self.d_x(), horizon)?;
        let mut v = SpikeRaster::zeros(self.config.d_v, horizon)?;
        let mut losses = clamp_v.map(|_| Vec::with_capacity(horizon));
        for t in 0..horizon {
            run.step(self, o.column(t), clamp_v.map(|c| c.column(t)), rng)?;
            x.column_mut(t).copy_from_slice(&run.x);
            y.column_mut(t).copy_from_slice(&run.y);
            for (slot, &i) in self.decoder.topology().visible().iter().enumerate() {
                v.column_mut(t)[slot] = run.decoder.spikes()[i];
            }
            if let Some(l) = losses.as_mut() {
                l.push(error_signal(run.decoder.visible_losses()));
            }
        }
        Ok(Trajectory { x, y, v, losses })
    }

    /// Clamped pass with a per-step update of every parameter; returns the
    /// summed read-out loss, a sample of the training bound.
    pub fn train_step(&mut self, o: &SpikeRaster, v_target: &SpikeRaster, rng: &mut Rng) -> Result<f64> {
        self.check_input(o)?;
        if v_target.channels() != self.config.d_v || v_target.horizon() != o.horizon() {
            return config("target raster has the wrong shape");
        }
        let lr = self.config.learning_rate;
        let enc_lr = self.config.encoder_learning_rate.unwrap_or(lr);
        let rule = self.config.rule;
        let dec_topo = self.decoder.topology().clone();
        let mut dec_learner = ThreeFactorLearner::for_visible(&dec_topo, rule);
        let mut dec_acc = self.decoder.zeros_like();
        let enc_topo = self.encoder.as_ref().map(|e| e.topology().clone());
        let mut enc_learner = enc_topo
            .as_ref()
            .map(|t| ThreeFactorLearner::all_latent(t, rule));
        let mut enc_acc = self.encoder.as_ref().map(|e| e.zeros_like());
        let mut run = Run::new(self, rng);
        let mut bound = 0.0;
        for t in 0..o.horizon() {
            run.step(self, o.column(t), Some(v_target.column(t)), rng)?;
            let e = error_signal(run.decoder.visible_losses());
            bound += e;
            dec_learner.accumulate(&dec_topo, &run.decoder, e, &mut dec_acc);
            apply(&mut self.decoder.neurons, &mut dec_acc, lr);
            if let (Some(topo), Some(learner), Some(acc), Some(state), Some(enc)) = (
                enc_topo.as_ref(),
                enc_learner.as_mut(),
                enc_acc.as_mut(),
                run.encoder.as_ref(),
                self.encoder.as_mut(),
            ) {
                learner.accumulate(topo, state, e, acc);
                apply(&mut enc.neurons, acc, enc_lr);
            }
        }
        Ok(bound)
    }

    /// Ones-density of the encoder output (or of the raw data when
    /// uncoded) over a whole set, with the given seed.
    pub fn transmitted_density(&self, set: &LabeledSpikeSet, seed: u64) -> Result<f64> {
        if set.is_empty() {
            return config("cannot measure density on an empty set");
        }
        let Some(encoder) = &self.encoder else {
            return Ok(set.density());
        };
        let topo = encoder.topology().clone();
        let ones = set
            .examples()
            .par_iter()
            .enumerate()
            .map(|(i, ex)| -> Result<usize> {
                let mut rng = seed::derived_rng(seed, seed::stream::CHANNEL, i as u64);
                let mut state = NetworkState::new(&topo, &self.config.filters);
                let mut ones = 0;
                for t in 0..ex.raster.horizon() {
                    state.step(encoder, ex.raster.column(t), None, &mut rng)?;
                    ones += topo.visible().iter().map(|&i| state.spikes()[i] as usize).sum::<usize>();
                }
                Ok(ones)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(ones as f64 / (set.len() * set.horizon() * self.d_x()) as f64)
    }
}

fn apply(params: &mut [NeuronParams], acc: &mut [NeuronParams], lr: f64) {
    for (p, a) in params.iter_mut().zip(acc.iter_mut()) {
        p.add_scaled(a, lr);
        a.fill(0.0);
    }
}

/// Per-trajectory simulation state.
///
/// The link draws its noise from a stream of its own, seeded once from the
/// trajectory stream, so the encoder and decoder see the same draws over
/// every link.
struct Run {
    encoder: Option<NetworkState>,
    decoder: NetworkState,
    link: Box<dyn BinaryChannel>,
    link_rng: Rng,
    x: Vec<u8>,
    y: Vec<u8>,
}

impl Run {
    fn new(p: &Pipeline, rng: &mut Rng) -> Self {
        Self {
            link_rng: seed::rng(rng.next_u64()),
            encoder: p
                .encoder
                .as_ref()
                .map(|e| NetworkState::new(e.topology(), &p.config.filters)),
            decoder: NetworkState::new(p.decoder.topology(), &p.config.filters),
            link: p.link(),
            x: vec![0; p.d_x()],
            y: vec![0; p.d_x()],
        }
    }

    fn step(&mut self, p: &Pipeline, o: &[u8], clamp: Option<&[u8]>, rng: &mut Rng) -> Result<()> {
        match (&mut self.encoder, &p.encoder) {
            (Some(state), Some(params)) => {
                state.step(params, o, None, rng)?;
                for (x, &i) in self.x.iter_mut().zip(params.topology().visible()) {
                    *x = state.spikes()[i];
                }
            }
            _ => self.x.copy_from_slice(o),
        }
        self.link.step(&self.x, &mut self.y, &mut self.link_rng)?;
        self.decoder.step(&p.decoder, &self.y, clamp, rng)
    }
}

/// Options for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Training SNR; `None` trains over an error-free link.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

/// Trains for `epochs` passes over `train` in a seeded random order. When
/// an SNR is given, noise is recalibrated at the start of every epoch from
/// the current transmitted density. Returns the mean bound per epoch.
pub fn fit(pipeline: &mut Pipeline, train: &LabeledSpikeSet, options: &TrainOptions) -> Result<Vec<f64>> {
    if train.channels() != pipeline.config.d_o {
        return config("training data does not match the pipeline input width");
    }
    if train.class_count() > pipeline.config.d_v {
        return config("more classes than read-out neurons");
    }
    let mut rng = seed::derived_rng(options.seed, seed::stream::TRAIN, 0);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        match options.snr_db {
            Some(snr) => {
                let density = pipeline
                    .transmitted_density(train, seed::derive(options.seed, seed::stream::CHANNEL, epoch as u64))?;
                pipeline.calibrate(density.max(f64::MIN_POSITIVE), snr)?;
            }
            None => pipeline.set_channel(None)?,
        }
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &train.examples()[i];
            let target = rate_target(
                ex.label,
                pipeline.config.d_v,
                ex.raster.horizon(),
                pipeline.config.target_high,
                pipeline.config.target_low,
                &mut rng,
            )?;
            total += pipeline.train_step(&ex.raster, &target, &mut rng)?;
        }
        let mean = total / train.len().max(1) as f64;
        log::info!("epoch {epoch}: mean bound {mean:.4}");
        history.push(mean);
    }
    Ok(history)
}

/// Per-step accuracy: entry `t - 1` is the fraction of examples whose
/// read-out spike counts over the first `t` steps decode to the label.
/// Example `i` uses its own stream derived from `seed`.
pub fn evaluate_accuracy_vs_time(pipeline: &Pipeline, test: &LabeledSpikeSet, seed: u64) -> Result<Vec<f64>> {
    let horizon = test.horizon();
    if test.is_empty() {
        return Ok(vec![0.0; horizon]);
    }
    let hits = test
        .examples()
        .par_iter()
        .enumerate()
        .map(|(i, ex)| -> Result<Vec<u32>> {
            let mut rng = seed::derived_rng(seed, seed::stream::EVAL, i as u64);
            let traj = pipeline.forward(&ex.raster, None, &mut rng)?;
            let mut counts = vec![0usize; pipeline.config.d_v];
            Ok((0..horizon)
                .map(|t| {
                    for (c, &s) in counts.iter_mut().zip(traj.v.column(t)) {
                        *c += s as usize;
                    }
                    (argmax_lowest(&counts) == ex.label) as u32
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..horizon)
        .map(|t| hits.iter().map(|h| h[t] as f64).sum::<f64>() / test.len() as f64)
        .collect())
}

/// Final-step accuracy at each SNR, averaged over `repeats` seeded runs.
/// Noise is calibrated per grid point from the transmitted density measured
/// on the test set itself.
pub fn evaluate_accuracy_vs_snr(
    pipeline: &Pipeline,
    test: &LabeledSpikeSet,
    snr_grid_db: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if snr_grid_db.is_empty() {
        return config("SNR grid is empty");
    }
    if repeats == 0 {
        return config("repeats must be positive");
    }
    let mut out = Vec::with_capacity(snr_grid_db.len());
    for &snr in snr_grid_db {
        let mut sum = 0.0;
        for r in 0..repeats {
            let run_seed = seed::derive(seed, seed::stream::REPEAT, r as u64);
            let mut p = pipeline.clone();
            let density = p.transmitted_density(test, run_seed)?;
            p.calibrate(density.max(f64::MIN_POSITIVE), snr)?;
            sum += final_accuracy(&p, test, run_seed)?;
        }
        out.push(sum / repeats as f64);
    }
    Ok(out)
}

/// Accuracy-against-time at `snr_db`, averaged over `repeats` runs. Each
/// run recalibrates the noise from the transmitted density on `test`.
pub fn evaluate_accuracy_vs_time_at_snr(
    pipeline: &Pipeline,
    test: &LabeledSpikeSet,
    snr_db: f64,
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if repeats == 0 {
        return config("repeats must be positive");
    }
    let mut mean = vec![0.0; test.horizon()];
    for r in 0..repeats {
        let run_seed = seed::derive(seed, seed::stream::REPEAT, r as u64);
        let mut p = pipeline.clone();
        let density = p.transmitted_density(test, run_seed)?;
        p.calibrate(density.max(f64::MIN_POSITIVE), snr_db)?;
        for (m, a) in mean.iter_mut().zip(evaluate_accuracy_vs_time(&p, test, run_seed)?) {
            *m += a / repeats as f64;
        }
    }
    Ok(mean)
}

/// Accuracy after all `T` steps.
pub fn final_accuracy(pipeline: &Pipeline, test: &LabeledSpikeSet, seed: u64) -> Result<f64> {
    Ok(evaluate_accuracy_vs_time(pipeline, test, seed)?
        .last()
        .copied()
        .unwrap_or(0.0))
}
