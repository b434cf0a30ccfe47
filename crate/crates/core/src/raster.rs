//! Binary spike rasters.

use std::fmt;

use crate::error::{config, Result};

/// A `channels × horizon` matrix of binary spikes.
///
/// Storage is time-major so that one time step (a column) is a contiguous
/// slice: simulators consume rasters one step at a time.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpikeRaster {
    channels: usize,
    horizon: usize,
    bits: Vec<u8>,
}

impl SpikeRaster {
    pub fn zeros(channels: usize, horizon: usize) -> Result<Self> {
        if channels == 0 || horizon == 0 {
            return config(format!(
                "raster needs at least one channel and one step, got {channels}x{horizon}"
            ));
        }
        Ok(Self {
            channels,
            horizon,
            bits: vec![0; channels * horizon],
        })
    }

    /// Builds a raster from time-major bits (`bits[t * channels + c]`).
    pub fn from_time_major(channels: usize, horizon: usize, bits: Vec<u8>) -> Result<Self> {
        let mut raster = Self::zeros(channels, horizon)?;
        if bits.len() != channels * horizon {
            return config(format!(
                "expected {} bits for a {channels}x{horizon} raster, got {}",
                channels * horizon,
                bits.len()
            ));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return config(format!("raster entries must be 0 or 1, found {bad}"));
        }
        raster.bits = bits;
        Ok(raster)
    }

    /// Builds a raster from one row per channel.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let channels = rows.len();
        let horizon = rows.first().map_or(0, |r| r.as_ref().len());
        let mut raster = Self::zeros(channels, horizon)?;
        for (c, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != horizon {
                return config(format!(
                    "channel {c} has {} steps, expected {horizon}",
                    row.len()
                ));
            }
            for (t, &b) in row.iter().enumerate() {
                if b > 1 {
                    return config(format!("raster entries must be 0 or 1, found {b}"));
                }
                raster.bits[t * channels + c] = b;
            }
        }
        Ok(raster)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Spikes of every channel at step `t` (0-based).
    pub fn column(&self, t: usize) -> &[u8] {
        &self.bits[t * self.channels..(t + 1) * self.channels]
    }

    pub fn column_mut(&mut self, t: usize) -> &mut [u8] {
        &mut self.bits[t * self.channels..(t + 1) * self.channels]
    }

    pub fn get(&self, channel: usize, t: usize) -> u8 {
        self.bits[t * self.channels + channel]
    }

    pub fn set(&mut self, channel: usize, t: usize, spike: bool) {
        self.bits[t * self.channels + channel] = spike as u8;
    }

    pub fn row(&self, channel: usize) -> Vec<u8> {
        (0..self.horizon).map(|t| self.get(channel, t)).collect()
    }

    pub fn time_major(&self) -> &[u8] {
        &self.bits
    }

    /// Number of ones, i.e. the l1 norm.
    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.ones() as f64 / self.bits.len() as f64
    }

    /// Per-channel spike counts over the first `upto` steps.
    pub fn counts_upto(&self, upto: usize) -> Vec<usize> {
        let mut counts = vec![0; self.channels];
        for t in 0..upto.min(self.horizon) {
            for (count, &b) in counts.iter_mut().zip(self.column(t)) {
                *count += b as usize;
            }
        }
        counts
    }

    pub fn hamming(&self, other: &SpikeRaster) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl fmt::Debug for SpikeRaster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SpikeRaster({}x{})", self.channels, self.horizon)?;
        for c in 0..self.channels.min(16) {
            let row: String = (0..self.horizon.min(80))
                .map(|t| if self.get(c, t) == 1 { '|' } else { '.' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}
