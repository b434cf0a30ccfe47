//! The GLM spiking neuron: potential, spiking probability, loss and sampling.

use rand::Rng;

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Logistic function, evaluated without overflow for any finite input.
///
/// The result is clamped to the open unit interval: saturated inputs return
/// `1 - EPSILON` or the smallest positive normal value instead of exactly 1
/// or 0.
pub fn sigmoid(a: f64) -> f64 {
    let p = if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Binary cross-entropy `-a ln b - (1-a) ln(1-b)` for a binary target `a`.
pub fn bce_loss(target: u8, prob: f64) -> f64 {
    let p = prob.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    if target != 0 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Bernoulli draw with success probability `prob`.
pub fn sample_spike<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> u8 {
    (rng.random::<f64>() < prob) as u8
}

/// Learnable parameters of one neuron.
///
/// `weights[j]` multiplies the trace of the neuron's `j`-th pre-synaptic
/// source (see [`Topology`](crate::network::Topology)).
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    pub weights: Vec<f64>,
    pub feedback: f64,
    pub bias: f64,
}

impl NeuronParams {
    pub fn zeros(sources: usize) -> Self {
        Self {
            weights: vec![0.0; sources],
            feedback: 0.0,
            bias: 0.0,
        }
    }

    /// Number of scalar parameters (weights, feedback weight, bias).
    pub fn len(&self) -> usize {
        self.weights.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_finite(&self) -> bool {
        self.feedback.is_finite()
            && self.bias.is_finite()
            && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.weights.fill(value);
        self.feedback = value;
        self.bias = value;
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &NeuronParams, scale: f64) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += scale * o;
        }
        self.feedback += scale * other.feedback;
        self.bias += scale * other.bias;
    }

    /// Parameters in storage order: weights, then feedback weight, then bias.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .copied()
            .chain([self.feedback, self.bias])
    }
}

/// `u = sum_j w_j * trace_j + w_fb * feedback_trace + bias`.
pub fn membrane_potential(params: &NeuronParams, traces: &[f64], feedback_trace: f64) -> f64 {
    let drive: f64 = params
        .weights
        .iter()
        .zip(traces)
        .map(|(w, tr)| w * tr)
        .sum();
    drive + params.feedback * feedback_trace + params.bias
}
