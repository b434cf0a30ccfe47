//! Brute-force reference computations for verification.
//!
//! Everything here recomputes potentials by direct convolution over full
//! spike histories and evaluates losses with softplus identities, sharing no
//! code with the recursive trace banks or the stepping simulator.

use crate::error::{config, Error, Result};
use crate::filter::FilterConfig;
use crate::network::{NetworkParams, Source};
use crate::raster::SpikeRaster;

/// Largest `|H| * T` accepted by the enumerations.
pub const ENUMERATION_LIMIT: usize = 16;

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// `-ln p(s | u)` for a binary `s` under `p(s = 1 | u) = 1/(1+e^-u)`.
pub fn neg_log_prob(spike: u8, u: f64) -> f64 {
    if spike == 1 {
        softplus(-u)
    } else {
        softplus(u)
    }
}

/// Membrane potential of `neuron` at 0-based step `t`, given the complete
/// spike history of every neuron (`history[i][t]`).
pub fn direct_potential(
    params: &NetworkParams,
    filters: &FilterConfig,
    exogenous: &SpikeRaster,
    history: &[Vec<u8>],
    neuron: usize,
    t: usize,
) -> f64 {
    let np = &params.neurons[neuron];
    let mut u = np.bias;
    for (w, src) in np.weights.iter().zip(params.topology().sources(neuron)) {
        let row = match *src {
            Source::Exogenous(k) => exogenous.row(k),
            Source::Neuron(k) => history[k].clone(),
        };
        u += w * filters.synaptic.convolve_at(&row, t);
    }
    u + np.feedback * filters.feedback.convolve_at(&history[neuron], t)
}

/// Per hidden pattern: `(ln p(h || x), sum_t sum_i l(x_it, sigma(u_it)))`.
fn enumerate(
    params: &NetworkParams,
    filters: &FilterConfig,
    exogenous: &SpikeRaster,
    target: &SpikeRaster,
) -> Result<Vec<(f64, f64)>> {
    let topo = params.topology();
    let horizon = exogenous.horizon();
    if target.channels() != topo.visible().len() || target.horizon() != horizon {
        return config("target raster does not match visible neurons and horizon");
    }
    if exogenous.channels() != topo.exogenous() {
        return config("exogenous raster does not match the network");
    }
    let hidden = topo.hidden();
    let bits = hidden.len() * horizon;
    if bits > ENUMERATION_LIMIT {
        return Err(Error::Enumeration {
            bits,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = topo.neurons();
    let mut out = Vec::with_capacity(1 << bits);
    for pattern in 0u32..(1u32 << bits) {
        let mut history = vec![vec![0u8; horizon]; n];
        for (slot, &v) in topo.visible().iter().enumerate() {
            history[v] = target.row(slot);
        }
        for (h, &i) in hidden.iter().enumerate() {
            for t in 0..horizon {
                history[i][t] = ((pattern >> (h * horizon + t)) & 1) as u8;
            }
        }
        let mut log_ph = 0.0;
        let mut loss = 0.0;
        for t in 0..horizon {
            for i in 0..n {
                let u = direct_potential(params, filters, exogenous, &history, i, t);
                let nlp = neg_log_prob(history[i][t], u);
                if topo.is_visible(i) {
                    loss += nlp;
                } else {
                    log_ph -= nlp;
                }
            }
        }
        out.push((log_ph, loss));
    }
    Ok(out)
}

/// Exact `-ln E_{p(h||x)}[p(x||h)]` by enumerating every hidden pattern.
pub fn exact_nll_oracle(
    params: &NetworkParams,
    filters: &FilterConfig,
    exogenous: &SpikeRaster,
    target: &SpikeRaster,
) -> Result<f64> {
    let terms = enumerate(params, filters, exogenous, target)?;
    let logs: Vec<f64> = terms.iter().map(|(lp, loss)| lp - loss).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(-(max + sum.ln()))
}

/// Exact expected summed visible loss `E_{p(h||x)}[sum_t sum_i l]`, the
/// quantity the online rule descends.
pub fn exact_bound(
    params: &NetworkParams,
    filters: &FilterConfig,
    exogenous: &SpikeRaster,
    target: &SpikeRaster,
) -> Result<f64> {
    let terms = enumerate(params, filters, exogenous, target)?;
    Ok(terms.iter().map(|(lp, loss)| lp.exp() * loss).sum())
}

/// Central finite difference of `f` with respect to one flat parameter.
pub fn central_difference<F>(params: &NetworkParams, index: usize, step: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&NetworkParams) -> Result<f64>,
{
    let topo = params.topology().clone();
    let mut flat = params.to_flat();
    let original = flat[index];
    flat[index] = original + step;
    let plus = f(&NetworkParams::from_flat(topo.clone(), &flat)?)?;
    flat[index] = original - step;
    let minus = f(&NetworkParams::from_flat(topo, &flat)?)?;
    Ok((plus - minus) / (2.0 * step))
}
