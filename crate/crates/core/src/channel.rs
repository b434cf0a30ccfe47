//! Memoryless impulse-radio link: on-off keying, additive Gaussian noise,
//! hard-threshold detection.
//!
//! The per-symbol SNR of a transmitted raster `x` over `d_x` lanes and `T`
//! steps is `(|x|_1 / (d_x T)) / sigma^2`. Noise power is therefore tied to
//! the spike density of whatever is being sent.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Error, Result};
use crate::raster::SpikeRaster;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Gaussian tail function `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Linear per-symbol SNR of `x` under noise standard deviation `sigma`.
///
/// An all-zero raster carries no power and reports 0.
pub fn measured_snr(x: &SpikeRaster, sigma: f64) -> f64 {
    let density = x.density();
    if density == 0.0 {
        log::debug!("measured_snr: all-zero raster, SNR undefined");
        return 0.0;
    }
    density / (sigma * sigma)
}

/// Noise standard deviation giving `target_snr_db` for a raster of the given
/// ones-density.
pub fn calibrate_sigma(density: f64, target_snr_db: f64) -> Result<f64> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Calibration(format!(
            "spike density must be in (0, 1] to calibrate noise, got {density}"
        )));
    }
    if !target_snr_db.is_finite() {
        return Err(Error::Calibration(format!(
            "target SNR must be finite, got {target_snr_db}"
        )));
    }
    Ok((density / db_to_linear(target_snr_db)).sqrt())
}

/// Operating point of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub noise_sigma: f64,
    pub threshold: f64,
    pub lanes: usize,
}

impl ChannelConfig {
    pub fn new(lanes: usize, noise_sigma: f64, threshold: f64) -> Result<Self> {
        if lanes == 0 {
            return config("channel needs at least one lane");
        }
        if !(noise_sigma.is_finite() && noise_sigma > 0.0) {
            return config(format!("noise sigma must be positive, got {noise_sigma}"));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return config(format!("threshold must lie in (0, 1), got {threshold}"));
        }
        Ok(Self {
            snr_db: f64::NAN,
            noise_sigma,
            threshold,
            lanes,
        })
    }

    /// Calibrates sigma so that a signal of the given density sees
    /// `snr_db`.
    pub fn calibrated(lanes: usize, density: f64, snr_db: f64) -> Result<Self> {
        let sigma = calibrate_sigma(density, snr_db)?;
        let mut cfg = Self::new(lanes, sigma, DEFAULT_THRESHOLD)?;
        cfg.snr_db = snr_db;
        Ok(cfg)
    }

    /// `(P(0 -> 1), P(1 -> 0))` of the equivalent binary channel.
    pub fn flip_probabilities(&self) -> (f64, f64) {
        (
            q_function(self.threshold / self.noise_sigma),
            q_function((1.0 - self.threshold) / self.noise_sigma),
        )
    }
}

/// A binary-input, binary-output link driven one time step at a time.
///
/// Implementations with memory keep their own input history between calls;
/// [`BinaryChannel::reset`] starts a new transmission.
pub trait BinaryChannel {
    fn lanes(&self) -> usize;

    fn step(&mut self, input: &[u8], output: &mut [u8], rng: &mut dyn RngCore) -> Result<()>;

    fn reset(&mut self) {}
}

/// Independent per-lane OOK over additive Gaussian noise with a hard
/// threshold.
#[derive(Debug, Clone)]
pub struct GaussianChannel {
    pub config: ChannelConfig,
}

impl GaussianChannel {
    pub fn new(config: ChannelConfig) -> Self {
        Self { config }
    }
}

impl BinaryChannel for GaussianChannel {
    fn lanes(&self) -> usize {
        self.config.lanes
    }

    fn step(&mut self, input: &[u8], output: &mut [u8], rng: &mut dyn RngCore) -> Result<()> {
        if input.len() != self.config.lanes || output.len() != self.config.lanes {
            return config(format!(
                "channel has {} lanes, got {} inputs and {} outputs",
                self.config.lanes,
                input.len(),
                output.len()
            ));
        }
        let sigma = self.config.noise_sigma;
        let threshold = self.config.threshold;
        for (y, &x) in output.iter_mut().zip(input) {
            let noise: f64 = StandardNormal.sample(rng);
            *y = (x as f64 + sigma * noise > threshold) as u8;
        }
        Ok(())
    }
}

/// Error-free link, used when a scheme is trained without channel noise.
#[derive(Debug, Clone)]
pub struct IdealChannel {
    pub lanes: usize,
}

impl BinaryChannel for IdealChannel {
    fn lanes(&self) -> usize {
        self.lanes
    }

    fn step(&mut self, input: &[u8], output: &mut [u8], _rng: &mut dyn RngCore) -> Result<()> {
        if input.len() != self.lanes || output.len() != self.lanes {
            return config("ideal channel lane mismatch");
        }
        output.copy_from_slice(input);
        Ok(())
    }
}

/// Sends a whole raster through the Gaussian link.
pub fn transmit<R: Rng>(x: &SpikeRaster, config: &ChannelConfig, rng: &mut R) -> Result<SpikeRaster> {
    if x.channels() != config.lanes {
        return self::config(format!(
            "raster has {} channels, channel has {} lanes",
            x.channels(),
            config.lanes
        ));
    }
    let mut link = GaussianChannel::new(*config);
    let mut y = SpikeRaster::zeros(x.channels(), x.horizon())?;
    for t in 0..x.horizon() {
        link.step(x.column(t), y.column_mut(t), rng)?;
    }
    Ok(y)
}

/// Uncoded OOK: the sensor raster goes straight over the link (rate 1).
pub fn uncoded_link<R: Rng>(o: &SpikeRaster, config: &ChannelConfig, rng: &mut R) -> Result<SpikeRaster> {
    transmit(o, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use approx::assert_relative_eq;

    #[test]
    fn snr_examples() {
        let quarter = SpikeRaster::from_rows(&[[1u8, 0, 0, 0], [0, 1, 0, 0]]).unwrap();
        assert_relative_eq!(measured_snr(&quarter, 0.5), 1.0, max_relative = 1e-15);
        let ones = SpikeRaster::from_rows(&[[1u8, 1]]).unwrap();
        assert_relative_eq!(measured_snr(&ones, 1.0), 1.0);
        assert_eq!(measured_snr(&SpikeRaster::zeros(2, 2).unwrap(), 1.0), 0.0);
        let s = calibrate_sigma(0.25, -8.0).unwrap();
        assert_relative_eq!(s * s, 0.25 / 10f64.powf(-0.8), max_relative = 1e-14);
        assert!((s * s - 1.5773).abs() < 1e-4);
    }

    #[test]
    fn calibration_examples() {
        assert_relative_eq!(calibrate_sigma(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(calibrate_sigma(0.25, 0.0).unwrap(), 0.5);
        assert!((calibrate_sigma(0.25, -6.0).unwrap() - 0.99763).abs() < 1e-5);
        assert!(calibrate_sigma(0.0, 0.0).is_err());
        assert!(calibrate_sigma(0.5, f64::NAN).is_err());
    }

    #[test]
    fn q_function_reference_values() {
        assert_relative_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.0) - 0.158655).abs() < 1e-6);
        assert!((q_function(2.0) - 0.0227501).abs() < 1e-7);
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(0, 1.0, 0.5).is_err());
        assert!(ChannelConfig::new(1, 0.0, 0.5).is_err());
        assert!(ChannelConfig::new(1, 1.0, 1.0).is_err());
        let cfg = ChannelConfig::new(2, 0.5, 0.5).unwrap();
        let (a, b) = cfg.flip_probabilities();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_limit_is_identity() {
        let mut rng = seed::rng(1);
        let x = SpikeRaster::from_rows(&[[1u8, 0, 1, 1, 0], [0, 0, 1, 0, 1]]).unwrap();
        let cfg = ChannelConfig::new(2, 1e-9, 0.5).unwrap();
        assert_eq!(transmit(&x, &cfg, &mut rng).unwrap(), x);
        let y = uncoded_link(&x, &cfg, &mut rng).unwrap();
        assert_eq!(y.channels(), x.channels());
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_flip_rate() {
        let mut rng = seed::rng(2);
        let x = SpikeRaster::zeros(100, 10_000).unwrap();
        let cfg = ChannelConfig::new(100, 0.5, 0.5).unwrap();
        let y = transmit(&x, &cfg, &mut rng).unwrap();
        assert!((y.density() - 0.158655).abs() < 0.002);
    }

    #[test]
    fn lane_mismatch() {
        let cfg = ChannelConfig::new(3, 0.5, 0.5).unwrap();
        let x = SpikeRaster::zeros(2, 4).unwrap();
        assert!(transmit(&x, &cfg, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn memoryless_and_deterministic() {
        let x = SpikeRaster::from_time_major(4, 50, (0..200).map(|i| (i % 3 == 0) as u8).collect())
            .unwrap();
        let cfg = ChannelConfig::new(4, 0.6, 0.5).unwrap();
        let y1 = transmit(&x, &cfg, &mut seed::rng(9)).unwrap();
        let y2 = transmit(&x, &cfg, &mut seed::rng(9)).unwrap();
        assert_eq!(y1, y2);
        let mut flipped = x.clone();
        flipped.set(2, 17, x.get(2, 17) == 0);
        let y3 = transmit(&flipped, &cfg, &mut seed::rng(9)).unwrap();
        assert!(y1.hamming(&y3) <= 1);
        for c in 0..4 {
            for t in 0..50 {
                if (c, t) != (2, 17) {
                    assert_eq!(y1.get(c, t), y3.get(c, t));
                }
            }
        }
    }
}
