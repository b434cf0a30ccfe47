//! Networks of GLM neurons: topology, parameters, and the per-step simulator.

use std::sync::Arc;

use rand::Rng;

use crate::error::{config, Result};
use crate::filter::{FilterConfig, TraceBank};
use crate::neuron::{bce_loss, sigmoid, NeuronParams};
use crate::seed;

/// A pre-synaptic source feeding a neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Exogenous(usize),
    Neuron(usize),
}

/// Connectivity and the visible/hidden partition of a network.
///
/// Neuron indices run over `0..neurons()`. A neuron never lists itself as a
/// source: its own spike history enters through the feedback weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    exogenous: usize,
    sources: Vec<Vec<Source>>,
    visible: Vec<usize>,
    hidden: Vec<usize>,
    // Position of each neuron inside `visible`, if it is visible.
    visible_slot: Vec<Option<usize>>,
    // Source -> index into the synaptic trace bank (exogenous lanes first).
    signal_index: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(exogenous: usize, sources: Vec<Vec<Source>>, visible: Vec<usize>) -> Result<Self> {
        let n = sources.len();
        if n == 0 {
            return config("a network needs at least one neuron");
        }
        let mut visible_slot = vec![None; n];
        for (slot, &v) in visible.iter().enumerate() {
            if v >= n {
                return config(format!("visible neuron {v} out of range (0..{n})"));
            }
            if visible_slot[v].replace(slot).is_some() {
                return config(format!("neuron {v} listed twice as visible"));
            }
        }
        let hidden = (0..n).filter(|&i| visible_slot[i].is_none()).collect();
        let mut signal_index = Vec::with_capacity(n);
        for (i, list) in sources.iter().enumerate() {
            let mut idx = Vec::with_capacity(list.len());
            for &src in list {
                match src {
                    Source::Exogenous(k) if k < exogenous => idx.push(k),
                    Source::Neuron(k) if k < n && k != i => idx.push(exogenous + k),
                    Source::Neuron(k) if k == i => {
                        return config(format!(
                            "neuron {i} lists itself as a source; use the feedback weight"
                        ))
                    }
                    other => {
                        return config(format!("neuron {i} references invalid source {other:?}"))
                    }
                }
            }
            signal_index.push(idx);
        }
        Ok(Self {
            exogenous,
            sources,
            visible,
            hidden,
            visible_slot,
            signal_index,
        })
    }

    /// Every exogenous input and every other neuron feeds every neuron.
    /// Neurons `0..visible` are visible, the rest hidden.
    pub fn dense(exogenous: usize, visible: usize, hidden: usize) -> Result<Self> {
        let n = visible + hidden;
        let sources = (0..n)
            .map(|i| {
                (0..exogenous)
                    .map(Source::Exogenous)
                    .chain((0..n).filter(|&k| k != i).map(Source::Neuron))
                    .collect()
            })
            .collect();
        Self::new(exogenous, sources, (0..visible).collect())
    }

    /// A single layer driven only by the exogenous inputs; every neuron is an
    /// output (visible) neuron.
    pub fn feedforward(exogenous: usize, outputs: usize) -> Result<Self> {
        let sources = (0..outputs)
            .map(|_| (0..exogenous).map(Source::Exogenous).collect())
            .collect();
        Self::new(exogenous, sources, (0..outputs).collect())
    }

    pub fn exogenous(&self) -> usize {
        self.exogenous
    }

    pub fn neurons(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self, neuron: usize) -> &[Source] {
        &self.sources[neuron]
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn visible_slot(&self, neuron: usize) -> Option<usize> {
        self.visible_slot[neuron]
    }

    pub fn is_visible(&self, neuron: usize) -> bool {
        self.visible_slot[neuron].is_some()
    }

    pub(crate) fn signal_index(&self, neuron: usize) -> &[usize] {
        &self.signal_index[neuron]
    }

    /// Total scalar parameter count.
    pub fn parameter_count(&self) -> usize {
        self.sources.iter().map(|s| s.len() + 2).sum()
    }
}

/// Parameters of every neuron in a network, tied to its topology.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    topology: Arc<Topology>,
    pub neurons: Vec<NeuronParams>,
}

impl PartialEq for NetworkParams {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.neurons == other.neurons
    }
}

/// Half-width of the default uniform weight initialization.
pub const INIT_SCALE: f64 = 0.1;

impl NetworkParams {
    pub fn zeros(topology: Arc<Topology>) -> Self {
        let neurons = (0..topology.neurons())
            .map(|i| NeuronParams::zeros(topology.sources(i).len()))
            .collect();
        Self { topology, neurons }
    }

    /// Weights and feedback weights uniform in `[-0.1, 0.1]`, biases zero.
    /// Each neuron draws from its own stream derived from `seed`.
    pub fn random(topology: Arc<Topology>, seed: u64) -> Self {
        Self::random_scaled(topology, seed, INIT_SCALE)
    }

    /// Like [`NetworkParams::random`] with synaptic weights uniform in
    /// `[-scale, scale]`; feedback weights keep the default range.
    pub fn random_scaled(topology: Arc<Topology>, seed: u64, scale: f64) -> Self {
        let mut params = Self::zeros(topology);
        for (i, neuron) in params.neurons.iter_mut().enumerate() {
            let mut rng = seed::derived_rng(seed, seed::stream::INIT, i as u64);
            for w in neuron.weights.iter_mut() {
                *w = rng.random_range(-scale..=scale);
            }
            neuron.feedback = rng.random_range(-INIT_SCALE..=INIT_SCALE);
        }
        params
    }

    /// Rebuilds parameters from a flat vector in storage order.
    pub fn from_flat(topology: Arc<Topology>, flat: &[f64]) -> Result<Self> {
        if flat.len() != topology.parameter_count() {
            return config(format!(
                "expected {} parameters for this topology, got {}",
                topology.parameter_count(),
                flat.len()
            ));
        }
        let mut params = Self::zeros(topology);
        let mut it = flat.iter().copied();
        for neuron in params.neurons.iter_mut() {
            for w in neuron.weights.iter_mut() {
                *w = it.next().unwrap();
            }
            neuron.feedback = it.next().unwrap();
            neuron.bias = it.next().unwrap();
        }
        Ok(params)
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        Arc::ptr_eq(&self.topology, &other.topology) || self.topology == other.topology
    }

    /// Flat view: per neuron, its weights, feedback weight, then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        self.neurons.iter().flat_map(|n| n.iter()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.neurons.iter().all(NeuronParams::is_finite)
    }

    /// Zero-valued parameters of the same shape, used as accumulators.
    pub fn zeros_like(&self) -> Vec<NeuronParams> {
        self.neurons
            .iter()
            .map(|n| NeuronParams::zeros(n.weights.len()))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &NetworkParams) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dynamic state of one network instance.
///
/// Between steps the trace banks hold the filtered histories that the next
/// step will read. After a step, the `last_*` accessors describe the step
/// that just ran; [`NetworkState::gradient_terms`] consumes them.
#[derive(Debug, Clone)]
pub struct NetworkState {
    synaptic: TraceBank,
    feedback: TraceBank,
    step_synaptic: Vec<f64>,
    step_feedback: Vec<f64>,
    potentials: Vec<f64>,
    probs: Vec<f64>,
    spikes: Vec<u8>,
    losses: Vec<f64>,
    lanes: Vec<u8>,
    clock: usize,
}

impl NetworkState {
    pub fn new(topology: &Topology, filters: &FilterConfig) -> Self {
        let n = topology.neurons();
        let signals = topology.exogenous() + n;
        Self {
            synaptic: TraceBank::new(filters.synaptic.clone(), signals),
            feedback: TraceBank::new(filters.feedback.clone(), n),
            step_synaptic: vec![0.0; signals],
            step_feedback: vec![0.0; n],
            potentials: vec![0.0; n],
            probs: vec![0.5; n],
            spikes: vec![0; n],
            losses: vec![0.0; topology.visible().len()],
            lanes: vec![0; signals],
            clock: 0,
        }
    }

    /// Clears all spike history; the next step is step 1 again.
    pub fn reset(&mut self) {
        self.synaptic.reset();
        self.feedback.reset();
        self.step_synaptic.fill(0.0);
        self.step_feedback.fill(0.0);
        self.potentials.fill(0.0);
        self.probs.fill(0.5);
        self.spikes.fill(0);
        self.losses.fill(0.0);
        self.clock = 0;
    }

    /// Number of steps executed since the last reset.
    pub fn clock(&self) -> usize {
        self.clock
    }

    /// Trace of every synaptic signal (exogenous lanes, then neurons) as it
    /// stands for the next step.
    pub fn signal_traces(&self) -> &[f64] {
        self.synaptic.values()
    }

    pub fn feedback_traces(&self) -> &[f64] {
        self.feedback.values()
    }

    /// Traces of `neuron`'s sources as seen by the last executed step.
    pub fn last_source_traces(&self, topology: &Topology, neuron: usize) -> Vec<f64> {
        topology
            .signal_index(neuron)
            .iter()
            .map(|&j| self.step_synaptic[j])
            .collect()
    }

    pub fn last_feedback_trace(&self, neuron: usize) -> f64 {
        self.step_feedback[neuron]
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn spikes(&self) -> &[u8] {
        &self.spikes
    }

    /// Cross-entropy of each visible neuron at the last step, against its
    /// clamped target or, when unclamped, against its own sample.
    pub fn visible_losses(&self) -> &[f64] {
        &self.losses
    }

    /// Runs one time step.
    ///
    /// Every neuron consumes one uniform draw whether or not it is clamped,
    /// so clamping never shifts the random stream seen by other neurons.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        params: &NetworkParams,
        exogenous: &[u8],
        clamp: Option<&[u8]>,
        rng: &mut R,
    ) -> Result<()> {
        let topo = params.topology();
        if exogenous.len() != topo.exogenous() {
            return config(format!(
                "network expects {} exogenous inputs, got {}",
                topo.exogenous(),
                exogenous.len()
            ));
        }
        if let Some(c) = clamp {
            if c.len() != topo.visible().len() {
                return config(format!(
                    "clamp covers {} visible neurons, network has {}",
                    c.len(),
                    topo.visible().len()
                ));
            }
        }
        self.step_synaptic.copy_from_slice(self.synaptic.values());
        self.step_feedback.copy_from_slice(self.feedback.values());
        for (i, neuron) in params.neurons.iter().enumerate() {
            let drive: f64 = neuron
                .weights
                .iter()
                .zip(topo.signal_index(i))
                .map(|(w, &j)| w * self.step_synaptic[j])
                .sum();
            let u = drive + neuron.feedback * self.step_feedback[i] + neuron.bias;
            let p = sigmoid(u);
            let draw: f64 = rng.random();
            let sampled = (draw < p) as u8;
            let spike = match (clamp, topo.visible_slot(i)) {
                (Some(c), Some(slot)) => c[slot],
                _ => sampled,
            };
            if let Some(slot) = topo.visible_slot(i) {
                self.losses[slot] = bce_loss(spike, p);
            }
            self.potentials[i] = u;
            self.probs[i] = p;
            self.spikes[i] = spike;
        }
        let n_exo = topo.exogenous();
        self.lanes[..n_exo].copy_from_slice(exogenous);
        self.lanes[n_exo..].copy_from_slice(&self.spikes);
        self.synaptic.push(&self.lanes)?;
        self.feedback.push(&self.spikes)?;
        self.clock += 1;
        Ok(())
    }

    /// Adds `scale * (s_i - sigma(u_i)) * [traces, feedback trace, 1]` of
    /// the last step into `acc`.
    pub fn accumulate_neuron_terms(
        &self,
        topology: &Topology,
        neuron: usize,
        scale: f64,
        acc: &mut NeuronParams,
    ) {
        let err = scale * (self.spikes[neuron] as f64 - self.probs[neuron]);
        if err == 0.0 {
            return;
        }
        for (a, &j) in acc.weights.iter_mut().zip(topology.signal_index(neuron)) {
            *a += err * self.step_synaptic[j];
        }
        acc.feedback += err * self.step_feedback[neuron];
        acc.bias += err;
    }

    /// Raw per-step learning terms `(s_i - sigma(u_i))` times the pre-synaptic
    /// trace, the feedback trace and the constant 1, for every neuron.
    ///
    /// `s_i` is the clamped target for clamped visible neurons and the
    /// sampled spike otherwise. No error-signal scaling is applied.
    pub fn gradient_terms(&self, topology: &Topology) -> Vec<NeuronParams> {
        (0..topology.neurons())
            .map(|i| {
                let mut acc = NeuronParams::zeros(topology.sources(i).len());
                self.accumulate_neuron_terms(topology, i, 1.0, &mut acc);
                acc
            })
            .collect()
    }
}

/// Output of [`step_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub spikes: Vec<u8>,
    pub visible_losses: Vec<f64>,
}

/// One forward step; see [`NetworkState::step`].
pub fn step_network<R: Rng + ?Sized>(
    params: &NetworkParams,
    state: &mut NetworkState,
    exogenous: &[u8],
    clamp: Option<&[u8]>,
    rng: &mut R,
) -> Result<StepOutput> {
    state.step(params, exogenous, clamp, rng)?;
    Ok(StepOutput {
        spikes: state.spikes().to_vec(),
        visible_losses: state.visible_losses().to_vec(),
    })
}
