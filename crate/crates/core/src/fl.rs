//! Federated training of on-device spiking networks.
//!
//! Each device presents its local examples online, one per `T`-step window.
//! A local iteration closes every `delta_t` steps and applies the update
//! accumulated over that interval. Every `delta_j` local iterations the base
//! station replaces all device parameters by their dataset-size weighted
//! mean. Wall steps are counted per device, so communication happens every
//! `delta_t * delta_j` steps.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{rate_target, LabeledSpikeSet, TARGET_HIGH_RATE, TARGET_LOW_RATE};
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::learning::{RuleConfig, ThreeFactorLearner};
use crate::network::{NetworkParams, NetworkState};
use crate::neuron::NeuronParams;
use crate::raster::SpikeRaster;
use crate::seed::{self, Rng};

/// Relates SNN time steps, local iterations and communication rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlSchedule {
    pub delta_t: usize,
    pub delta_j: usize,
    pub examples_n: usize,
    pub horizon: usize,
}

impl FlSchedule {
    /// Rejects schedules where `N * T` is not a whole number of local
    /// iterations.
    pub fn new(delta_t: usize, delta_j: usize, examples_n: usize, horizon: usize) -> Result<Self> {
        if delta_t == 0 || delta_j == 0 || examples_n == 0 || horizon == 0 {
            return Err(Error::Schedule(
                "delta_t, delta_j, N and T must all be positive".into(),
            ));
        }
        if (examples_n * horizon) % delta_t != 0 {
            return Err(Error::Schedule(format!(
                "N*T = {} is not a multiple of delta_t = {delta_t}",
                examples_n * horizon
            )));
        }
        Ok(Self {
            delta_t,
            delta_j,
            examples_n,
            horizon,
        })
    }

    /// Smallest `N` giving at least `rounds` full rounds.
    pub fn for_rounds(delta_t: usize, delta_j: usize, rounds: usize, horizon: usize) -> Result<Self> {
        let steps = rounds * delta_j * delta_t;
        let mut n = steps.div_ceil(horizon).max(1);
        // Keep N*T a multiple of delta_t.
        while (n * horizon) % delta_t != 0 {
            n += 1;
        }
        Self::new(delta_t, delta_j, n, horizon)
    }

    pub fn total_steps(&self) -> usize {
        self.examples_n * self.horizon
    }

    /// `J = N T / delta_t`.
    pub fn local_iterations(&self) -> usize {
        self.total_steps() / self.delta_t
    }

    pub fn steps_per_round(&self) -> usize {
        self.delta_t * self.delta_j
    }

    /// Complete communication rounds; a trailing partial round is dropped.
    pub fn rounds(&self) -> usize {
        self.local_iterations() / self.delta_j
    }
}

/// Summed visible-neuron loss of one step; the scalar learning signal.
pub fn error_signal(per_visible_loss: &[f64]) -> f64 {
    per_visible_loss.iter().sum()
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Class with the most output spikes over the first `upto` steps.
pub fn rate_decode(output: &SpikeRaster, upto: usize) -> usize {
    argmax_lowest(&output.counts_upto(upto))
}

/// Hyper-parameters of on-device training.
#[derive(Debug, Clone)]
pub struct LocalSettings {
    pub delta_t: usize,
    pub learning_rate: f64,
    /// Learning-rate multiplier applied after every local iteration.
    pub lr_decay: f64,
    pub rule: RuleConfig,
    pub filters: FilterConfig,
    pub target_high: f64,
    pub target_low: f64,
}

impl Default for LocalSettings {
    fn default() -> Self {
        Self {
            delta_t: 1,
            learning_rate: 0.05,
            lr_decay: 1.0,
            rule: RuleConfig::default(),
            filters: FilterConfig::default(),
            target_high: TARGET_HIGH_RATE,
            target_low: TARGET_LOW_RATE,
        }
    }
}

/// One device: its local model copy, data and online-training state.
#[derive(Debug, Clone)]
pub struct DeviceReplica {
    pub id: usize,
    pub params: NetworkParams,
    pub accumulator: Vec<NeuronParams>,
    pub learning_rate: f64,
    dataset: Arc<LabeledSpikeSet>,
    settings: LocalSettings,
    state: NetworkState,
    learner: ThreeFactorLearner,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    current: Option<(usize, SpikeRaster)>,
    step_in_example: usize,
    steps_in_interval: usize,
    wall_step: usize,
    iterations: usize,
    loss_sum: f64,
    loss_steps: usize,
}

impl DeviceReplica {
    pub fn new(
        id: usize,
        params: NetworkParams,
        dataset: Arc<LabeledSpikeSet>,
        settings: LocalSettings,
        seed: u64,
    ) -> Result<Self> {
        let topo = params.topology().clone();
        if dataset.is_empty() {
            return Err(Error::Config(format!("device {id} has an empty dataset")));
        }
        if dataset.channels() != topo.exogenous() {
            return Err(Error::Config(format!(
                "device {id}: data has {} channels, network expects {}",
                dataset.channels(),
                topo.exogenous()
            )));
        }
        if dataset.class_count() > topo.visible().len() {
            return Err(Error::Config(format!(
                "device {id}: {} classes but only {} read-out neurons",
                dataset.class_count(),
                topo.visible().len()
            )));
        }
        if settings.delta_t == 0 {
            return Err(Error::Schedule("delta_t must be positive".into()));
        }
        let state = NetworkState::new(&topo, &settings.filters);
        let learner = ThreeFactorLearner::for_visible(&topo, settings.rule);
        Ok(Self {
            id,
            accumulator: params.zeros_like(),
            learning_rate: settings.learning_rate,
            params,
            order: (0..dataset.len()).collect(),
            cursor: dataset.len(),
            dataset,
            settings,
            state,
            learner,
            rng: seed::rng(seed),
            current: None,
            step_in_example: 0,
            steps_in_interval: 0,
            wall_step: 0,
            iterations: 0,
            loss_sum: 0.0,
            loss_steps: 0,
        })
    }

    /// `|D^(d)|`, the device's weight in the global average.
    pub fn dataset_weight(&self) -> usize {
        self.dataset.len()
    }

    pub fn dataset(&self) -> &LabeledSpikeSet {
        &self.dataset
    }

    pub fn settings(&self) -> &LocalSettings {
        &self.settings
    }

    pub fn wall_step(&self) -> usize {
        self.wall_step
    }

    pub fn local_iterations_done(&self) -> usize {
        self.iterations
    }

    /// Mean per-step error signal since the last call.
    pub fn take_mean_loss(&mut self) -> Option<f64> {
        let mean = (self.loss_steps > 0).then(|| self.loss_sum / self.loss_steps as f64);
        self.loss_sum = 0.0;
        self.loss_steps = 0;
        mean
    }

    fn begin_example(&mut self) -> Result<()> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let idx = self.order[self.cursor];
        self.cursor += 1;
        let ex = &self.dataset.examples()[idx];
        let visible = self.params.topology().visible().len();
        let target = rate_target(
            ex.label,
            visible,
            self.dataset.horizon(),
            self.settings.target_high,
            self.settings.target_low,
            &mut self.rng,
        )?;
        self.current = Some((idx, target));
        self.state.reset();
        self.learner.reset_episode();
        Ok(())
    }

    /// Runs one SNN time step and accumulates its update contribution.
    pub fn step(&mut self) -> Result<()> {
        if self.step_in_example == 0 {
            self.begin_example()?;
        }
        let t = self.step_in_example;
        let (idx, target) = self.current.as_ref().expect("example selected");
        let exogenous = self.dataset.examples()[*idx].raster.column(t);
        self.state
            .step(&self.params, exogenous, Some(target.column(t)), &mut self.rng)?;
        let e = error_signal(self.state.visible_losses());
        let topo = self.params.topology().clone();
        self.learner
            .accumulate(&topo, &self.state, e, &mut self.accumulator);
        self.loss_sum += e;
        self.loss_steps += 1;
        self.steps_in_interval += 1;
        self.wall_step += 1;
        self.step_in_example = (t + 1) % self.dataset.horizon();
        Ok(())
    }

    /// Adds one step's already-credited update contribution by hand.
    pub fn accumulate(&mut self, contribution: &[NeuronParams]) -> Result<()> {
        if contribution.len() != self.accumulator.len() {
            return Err(Error::Config("contribution shape mismatch".into()));
        }
        for (acc, c) in self.accumulator.iter_mut().zip(contribution) {
            if acc.weights.len() != c.weights.len() {
                return Err(Error::Config("contribution shape mismatch".into()));
            }
            acc.add_scaled(c, 1.0);
        }
        self.steps_in_interval += 1;
        Ok(())
    }

    /// Closes the local iteration: moves the parameters by
    /// `learning_rate * accumulator` and clears the accumulator.
    pub fn local_update(&mut self) -> Result<()> {
        if self.steps_in_interval != self.settings.delta_t {
            return Err(Error::Schedule(format!(
                "device {}: local update after {} steps, delta_t is {}",
                self.id, self.steps_in_interval, self.settings.delta_t
            )));
        }
        for (p, acc) in self.params.neurons.iter_mut().zip(&mut self.accumulator) {
            p.add_scaled(acc, self.learning_rate);
            acc.fill(0.0);
        }
        self.steps_in_interval = 0;
        self.iterations += 1;
        self.learning_rate *= self.settings.lr_decay;
        Ok(())
    }

    /// Feeds a whole interval of per-step contributions, then updates.
    pub fn local_update_from(&mut self, interval: &[Vec<NeuronParams>]) -> Result<()> {
        if interval.len() != self.settings.delta_t {
            return Err(Error::Schedule(format!(
                "interval covers {} steps, delta_t is {}",
                interval.len(),
                self.settings.delta_t
            )));
        }
        for step in interval {
            self.accumulate(step)?;
        }
        self.local_update()
    }

    /// `delta_t` online steps followed by a local update.
    pub fn run_local_iteration(&mut self) -> Result<()> {
        for _ in 0..self.settings.delta_t {
            self.step()?;
        }
        self.local_update()
    }

    /// Online training without any communication.
    pub fn train_standalone(&mut self, local_iterations: usize) -> Result<()> {
        for _ in 0..local_iterations {
            self.run_local_iteration()?;
        }
        Ok(())
    }
}

/// Parameters held by the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub params: NetworkParams,
    pub round_counter: usize,
}

/// `sum_d (w_d / sum w) * theta_d`, elementwise.
pub fn weighted_average(models: &[(&NetworkParams, usize)]) -> Result<NetworkParams> {
    let Some(&(first, _)) = models.first() else {
        return Err(Error::Protocol("no models to average".into()));
    };
    let total: usize = models.iter().map(|(_, w)| w).sum();
    if total == 0 {
        return Err(Error::Protocol("total dataset weight is zero".into()));
    }
    let mut avg = NetworkParams::zeros(first.topology().clone());
    for (i, (params, weight)) in models.iter().enumerate() {
        if !params.same_shape(first) {
            return Err(Error::Protocol(format!(
                "model {i} does not match the shape of model 0"
            )));
        }
        let share = *weight as f64 / total as f64;
        for (a, p) in avg.neurons.iter_mut().zip(&params.neurons) {
            a.add_scaled(p, share);
        }
    }
    Ok(avg)
}

/// Dataset-size weighted mean of the device models.
pub fn global_average(devices: &[DeviceReplica]) -> Result<GlobalModel> {
    let models: Vec<_> = devices
        .iter()
        .map(|d| (&d.params, d.dataset_weight()))
        .collect();
    Ok(GlobalModel {
        params: weighted_average(&models)?,
        round_counter: 0,
    })
}

/// Overwrites every device model with the global parameters.
pub fn broadcast(global: &GlobalModel, devices: &mut [DeviceReplica]) {
    for d in devices.iter_mut() {
        d.params = global.params.clone();
        for acc in &mut d.accumulator {
            acc.fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Right after the previous broadcast (or the initial parameters).
    RoundStart,
    /// After the round's local iterations, before upload.
    RoundEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub round: usize,
    pub device: usize,
    pub wall_step: usize,
    pub phase: Phase,
    pub train_loss: Option<f64>,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<LogRecord>,
    pub rounds: usize,
    pub steps_per_device: usize,
    /// Wall steps at which the base station averaged.
    pub communication_steps: Vec<usize>,
}

impl TrainingLog {
    /// Mean test accuracy over devices at the given round and phase.
    pub fn device_mean(&self, round: usize, phase: Phase) -> Option<f64> {
        let accs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.round == round && r.phase == phase)
            .map(|r| r.test_accuracy)
            .collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    /// Device-mean accuracy of the model broadcast after the last round.
    pub fn final_accuracy(&self) -> Option<f64> {
        self.device_mean(self.rounds + 1, Phase::RoundStart)
    }

    /// Device-mean accuracy at the end of the last round, before averaging.
    pub fn final_local_accuracy(&self) -> Option<f64> {
        self.device_mean(self.rounds, Phase::RoundEnd)
    }

    /// Mean over rounds `2..=rounds` of (round-start accuracy minus
    /// round-end accuracy): how far devices fall back between averagings.
    pub fn mean_within_round_decay(&self) -> Option<f64> {
        let drops: Vec<f64> = (2..=self.rounds)
            .filter_map(|r| {
                Some(self.device_mean(r, Phase::RoundStart)? - self.device_mean(r, Phase::RoundEnd)?)
            })
            .collect();
        (!drops.is_empty()).then(|| drops.iter().sum::<f64>() / drops.len() as f64)
    }
}

/// Runs the federated protocol for `min(rounds_budget, schedule.rounds())`
/// rounds. `eval(device, params)` returns a test accuracy and is called for
/// every device at the start and at the end of each round.
pub fn run_fl<F>(
    devices: &mut [DeviceReplica],
    schedule: &FlSchedule,
    rounds_budget: usize,
    mut eval: F,
) -> Result<TrainingLog>
where
    F: FnMut(usize, &NetworkParams) -> f64,
{
    if devices.is_empty() {
        return Err(Error::Config("federated run needs at least one device".into()));
    }
    for d in devices.iter() {
        if d.settings.delta_t != schedule.delta_t {
            return Err(Error::Schedule(format!(
                "device {} uses delta_t = {}, schedule says {}",
                d.id, d.settings.delta_t, schedule.delta_t
            )));
        }
        if d.dataset.horizon() != schedule.horizon {
            return Err(Error::Schedule(format!(
                "device {} has horizon {}, schedule says {}",
                d.id,
                d.dataset.horizon(),
                schedule.horizon
            )));
        }
        if !d.params.same_shape(&devices[0].params) {
            return Err(Error::Protocol(format!(
                "device {} model shape differs from device {}",
                d.id, devices[0].id
            )));
        }
    }
    if schedule.local_iterations() % schedule.delta_j != 0 {
        log::warn!(
            "{} trailing local iterations do not fill a communication round and are dropped",
            schedule.local_iterations() % schedule.delta_j
        );
    }
    let rounds = schedule.rounds().min(rounds_budget);
    if rounds < rounds_budget {
        log::warn!("schedule allows only {rounds} of the requested {rounds_budget} rounds");
    }
    let per_round = schedule.steps_per_round();
    let mut log = TrainingLog {
        rounds,
        steps_per_device: rounds * per_round,
        ..TrainingLog::default()
    };
    for round in 1..=rounds {
        for d in devices.iter() {
            log.records.push(LogRecord {
                round,
                device: d.id,
                wall_step: d.wall_step,
                phase: Phase::RoundStart,
                train_loss: None,
                test_accuracy: eval(d.id, &d.params),
            });
        }
        for d in devices.iter_mut() {
            for _ in 0..schedule.delta_j {
                d.run_local_iteration()?;
            }
        }
        for d in devices.iter_mut() {
            let train_loss = d.take_mean_loss();
            log.records.push(LogRecord {
                round,
                device: d.id,
                wall_step: d.wall_step,
                phase: Phase::RoundEnd,
                train_loss,
                test_accuracy: eval(d.id, &d.params),
            });
        }
        let mut global = global_average(devices)?;
        global.round_counter = round;
        broadcast(&global, devices);
        log.communication_steps.push(round * per_round);
    }
    // The averaged model that the last round produced.
    for d in devices.iter() {
        log.records.push(LogRecord {
            round: rounds + 1,
            device: d.id,
            wall_step: d.wall_step,
            phase: Phase::RoundStart,
            train_loss: None,
            test_accuracy: eval(d.id, &d.params),
        });
    }
    Ok(log)
}

/// Rate-decoded test accuracy of a network run freely (no clamping) on
/// every example. Example `i` uses its own stream derived from `seed`.
pub fn evaluate_accuracy(
    params: &NetworkParams,
    filters: &FilterConfig,
    test: &LabeledSpikeSet,
    seed: u64,
) -> Result<f64> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let topo = params.topology().clone();
    let hits = test
        .examples()
        .par_iter()
        .enumerate()
        .map(|(i, ex)| -> Result<usize> {
            let mut rng = seed::derived_rng(seed, seed::stream::EVAL, i as u64);
            let mut state = NetworkState::new(&topo, filters);
            let mut counts = vec![0usize; topo.visible().len()];
            for t in 0..ex.raster.horizon() {
                state.step(params, ex.raster.column(t), None, &mut rng)?;
                for (c, &v) in counts.iter_mut().zip(topo.visible()) {
                    *c += state.spikes()[v] as usize;
                }
            }
            Ok((argmax_lowest(&counts) == ex.label) as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / test.len() as f64)
}

/// A complete federated run: one model shape, one class split, one schedule.
#[derive(Debug, Clone)]
pub struct FlExperiment {
    /// Hidden neurons of the dense device network.
    pub hidden: usize,
    pub delta_t: usize,
    pub delta_j: usize,
    pub rounds: usize,
    pub local: LocalSettings,
    /// `assignment[class] = device`.
    pub assignment: std::collections::BTreeMap<usize, usize>,
}

impl FlExperiment {
    /// Two-or-more class split with one class per device.
    pub fn one_class_per_device(classes: usize, delta_t: usize, delta_j: usize, rounds: usize) -> Self {
        Self {
            hidden: 16,
            delta_t,
            delta_j,
            rounds,
            local: LocalSettings {
                delta_t,
                ..LocalSettings::default()
            },
            assignment: crate::data::one_class_per_device(classes),
        }
    }

    /// Splits `train`, initializes every device from the same random model,
    /// trains and evaluates each device on `test` at both ends of every
    /// round. All randomness derives from `seed`.
    pub fn run(&self, train: &LabeledSpikeSet, test: &LabeledSpikeSet, seed: u64) -> Result<TrainingLog> {
        let mut local = self.local.clone();
        local.delta_t = self.delta_t;
        let schedule = FlSchedule::for_rounds(self.delta_t, self.delta_j, self.rounds, train.horizon())?;
        let parts = crate::data::federated_split(train, &self.assignment)?;
        let topo = Arc::new(crate::network::Topology::dense(
            train.channels(),
            train.class_count(),
            self.hidden,
        )?);
        let init = NetworkParams::random(topo, seed::derive(seed, seed::stream::INIT, 0));
        let mut devices = parts
            .into_iter()
            .enumerate()
            .map(|(d, part)| {
                DeviceReplica::new(
                    d,
                    init.clone(),
                    Arc::new(part),
                    local.clone(),
                    seed::derive(seed, seed::stream::DEVICE, d as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let eval_seed = seed::derive(seed, seed::stream::EVAL, 0);
        let mut failure = None;
        let log = run_fl(&mut devices, &schedule, self.rounds, |_, params| {
            evaluate_accuracy(params, &local.filters, test, eval_seed).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            })
        })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(log),
        }
    }
}
