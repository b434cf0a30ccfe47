//! Causal synaptic filters and the trace banks that apply them.
//!
//! A filter with taps `a_1..a_K` turns a spike train `s` into the trace
//! `sum_{d=1..K} a_d * s[t-d]`. The sum starts at lag one, so a spike emitted
//! at step `t` is first visible in the trace at step `t + 1`.

use crate::error::{config, Result};

/// Finite, strictly causal kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapticFilter {
    taps: Vec<f64>,
    /// Ratio between consecutive taps when the kernel is a truncated
    /// exponential; enables the O(1) recursive update.
    decay: Option<f64>,
    tau: Option<f64>,
}

impl SynapticFilter {
    /// Arbitrary kernel, applied by direct convolution.
    pub fn from_taps(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return config("a filter needs at least one tap");
        }
        if taps.iter().any(|a| !a.is_finite()) {
            return config("filter taps must be finite");
        }
        Ok(Self {
            taps,
            decay: None,
            tau: None,
        })
    }

    /// `a_d = exp(-(d-1)/tau)` for `d = 1..=len`.
    pub fn exponential(tau: f64, len: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return config(format!("filter time constant must be positive, got {tau}"));
        }
        if len == 0 {
            return config("a filter needs at least one tap");
        }
        let decay = (-1.0 / tau).exp();
        let taps = (0..len).map(|d| (-(d as f64) / tau).exp()).collect();
        Ok(Self {
            taps,
            decay: Some(decay),
            tau: Some(tau),
        })
    }

    /// Default synaptic kernel: exponential, 3-step time constant, 10 taps.
    pub fn default_synaptic() -> Self {
        Self::exponential(3.0, 10).expect("valid constants")
    }

    /// Default self-feedback kernel: exponential, 1-step time constant, 10 taps.
    pub fn default_feedback() -> Self {
        Self::exponential(1.0, 10).expect("valid constants")
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn is_recursive(&self) -> bool {
        self.decay.is_some()
    }

    /// Time constant of an exponential kernel.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    /// Direct convolution at (0-based) step `t` of a full spike history.
    pub fn convolve_at(&self, history: &[u8], t: usize) -> f64 {
        self.taps
            .iter()
            .enumerate()
            .take_while(|(d, _)| d + 1 <= t)
            .map(|(d, a)| a * history[t - d - 1] as f64)
            .sum()
    }
}

/// Text form: `exp:<tau>:<len>` or `taps:<a1>,<a2>,...`.
impl std::fmt::Display for SynapticFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.tau {
            Some(tau) => write!(f, "exp:{tau}:{}", self.taps.len()),
            None => {
                let taps: Vec<String> = self.taps.iter().map(|a| a.to_string()).collect();
                write!(f, "taps:{}", taps.join(","))
            }
        }
    }
}

impl std::str::FromStr for SynapticFilter {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || crate::Error::Config(format!("cannot parse filter {s:?}"));
        if let Some(rest) = s.strip_prefix("exp:") {
            let (tau, len) = rest.split_once(':').ok_or_else(bad)?;
            let tau: f64 = tau.trim().parse().map_err(|_| bad())?;
            let len: usize = len.trim().parse().map_err(|_| bad())?;
            Self::exponential(tau, len)
        } else if let Some(rest) = s.strip_prefix("taps:") {
            let taps = rest
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            Self::from_taps(taps)
        } else {
            Err(bad())
        }
    }
}

/// The pair of kernels used by a network: one for synapses, one for the
/// neuron's own spike history.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub synaptic: SynapticFilter,
    pub feedback: SynapticFilter,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            synaptic: SynapticFilter::default_synaptic(),
            feedback: SynapticFilter::default_feedback(),
        }
    }
}

/// Filtered traces of a set of spike trains sharing one kernel.
#[derive(Debug, Clone)]
pub struct TraceBank {
    filter: SynapticFilter,
    signals: usize,
    values: Vec<f64>,
    // Last `K` spikes per signal, ring-indexed by `head`.
    history: Vec<u8>,
    head: usize,
    tail_weight: f64,
}

impl TraceBank {
    pub fn new(filter: SynapticFilter, signals: usize) -> Self {
        let k = filter.len();
        let tail_weight = match filter.decay {
            Some(decay) => filter.taps[0] * decay.powi(k as i32),
            None => 0.0,
        };
        Self {
            filter,
            signals,
            values: vec![0.0; signals],
            history: vec![0; signals * k],
            head: 0,
            tail_weight,
        }
    }

    pub fn signals(&self) -> usize {
        self.signals
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn filter(&self) -> &SynapticFilter {
        &self.filter
    }

    pub fn reset(&mut self) {
        self.values.fill(0.0);
        self.history.fill(0);
        self.head = 0;
    }

    /// Records the spikes of the current step; afterwards the traces hold the
    /// values for the next step.
    pub fn push(&mut self, spikes: &[u8]) -> Result<()> {
        if spikes.len() != self.signals {
            return config(format!(
                "trace bank expects {} spike lanes, got {}",
                self.signals,
                spikes.len()
            ));
        }
        let k = self.filter.len();
        let slot = self.head;
        match self.filter.decay {
            Some(decay) => {
                let first = self.filter.taps[0];
                for (j, &s) in spikes.iter().enumerate() {
                    let oldest = self.history[j * k + slot];
                    let v = &mut self.values[j];
                    *v = decay * *v + first * s as f64 - self.tail_weight * oldest as f64;
                    self.history[j * k + slot] = s;
                }
                self.head = (slot + 1) % k;
            }
            None => {
                for (j, &s) in spikes.iter().enumerate() {
                    self.history[j * k + slot] = s;
                }
                self.head = (slot + 1) % k;
                let taps = &self.filter.taps;
                for j in 0..self.signals {
                    let ring = &self.history[j * k..(j + 1) * k];
                    self.values[j] = taps
                        .iter()
                        .enumerate()
                        .map(|(d, a)| a * ring[(self.head + k - 1 - d) % k] as f64)
                        .sum();
                }
            }
        }
        Ok(())
    }
}
