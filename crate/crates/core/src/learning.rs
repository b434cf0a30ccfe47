//! Three-factor online learning.
//!
//! Supervised (clamped read-out) neurons follow the direct rule
//! `(x - sigma(u)) * trace`. Every other neuron is latent: its update is the
//! scalar learning signal `-(e_t - b)` times an eligibility that accumulates
//! the neuron's own `(s - sigma(u)) * trace` terms from earlier steps of the
//! same episode. Because `e_t` depends on latent spikes only up to `t - 1`,
//! pairing it with strictly earlier terms makes the update an unbiased
//! estimate of the negative gradient of the expected summed loss.

use crate::network::{NetworkState, Topology};
use crate::neuron::NeuronParams;

/// How latent neurons are credited with the error signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HiddenCredit {
    /// Error signal times the episode eligibility (unbiased).
    #[default]
    Eligibility,
    /// Error signal times the same-step term only. This is zero-mean under
    /// strictly causal traces and is kept for comparison studies.
    SameStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConfig {
    pub credit: HiddenCredit,
    /// Per-step decay of the eligibility; 1 keeps the full episode history.
    pub eligibility_decay: f64,
    /// Rate of the moving-average baseline subtracted from the error signal;
    /// `None` disables the baseline.
    pub baseline_rate: Option<f64>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            credit: HiddenCredit::Eligibility,
            eligibility_decay: 1.0,
            baseline_rate: None,
        }
    }
}

/// Per-network learner state: which neurons are supervised, the latent
/// eligibilities and the error-signal baseline.
#[derive(Debug, Clone)]
pub struct ThreeFactorLearner {
    config: RuleConfig,
    supervised: Vec<bool>,
    eligibility: Vec<NeuronParams>,
    baseline: f64,
}

impl ThreeFactorLearner {
    /// `supervised[i]` marks neurons trained by the direct rule.
    pub fn new(topology: &Topology, supervised: Vec<bool>, config: RuleConfig) -> Self {
        assert_eq!(supervised.len(), topology.neurons());
        let eligibility = (0..topology.neurons())
            .map(|i| {
                if supervised[i] {
                    NeuronParams::zeros(0)
                } else {
                    NeuronParams::zeros(topology.sources(i).len())
                }
            })
            .collect();
        Self {
            config,
            supervised,
            eligibility,
            baseline: 0.0,
        }
    }

    /// Visible neurons supervised, hidden neurons latent.
    pub fn for_visible(topology: &Topology, config: RuleConfig) -> Self {
        let supervised = (0..topology.neurons())
            .map(|i| topology.is_visible(i))
            .collect();
        Self::new(topology, supervised, config)
    }

    /// Every neuron latent.
    pub fn all_latent(topology: &Topology, config: RuleConfig) -> Self {
        Self::new(topology, vec![false; topology.neurons()], config)
    }

    pub fn config(&self) -> &RuleConfig {
        &self.config
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Starts a new episode (example): eligibilities restart from zero.
    pub fn reset_episode(&mut self) {
        for e in &mut self.eligibility {
            e.fill(0.0);
        }
    }

    /// Adds the update direction for the step just executed by `state` into
    /// `acc`, given the step's global error signal.
    pub fn accumulate(
        &mut self,
        topology: &Topology,
        state: &NetworkState,
        error_signal: f64,
        acc: &mut [NeuronParams],
    ) {
        let signal = -(error_signal - self.baseline);
        for i in 0..topology.neurons() {
            if self.supervised[i] {
                state.accumulate_neuron_terms(topology, i, 1.0, &mut acc[i]);
                continue;
            }
            match self.config.credit {
                HiddenCredit::Eligibility => {
                    let elig = &mut self.eligibility[i];
                    if signal != 0.0 {
                        acc[i].add_scaled(elig, signal);
                    }
                    let decay = self.config.eligibility_decay;
                    if decay != 1.0 {
                        for w in elig.weights.iter_mut() {
                            *w *= decay;
                        }
                        elig.feedback *= decay;
                        elig.bias *= decay;
                    }
                    state.accumulate_neuron_terms(topology, i, 1.0, elig);
                }
                HiddenCredit::SameStep => {
                    state.accumulate_neuron_terms(topology, i, signal, &mut acc[i]);
                }
            }
        }
        if let Some(rate) = self.config.baseline_rate {
            self.baseline += rate * (error_signal - self.baseline);
        }
    }
}
