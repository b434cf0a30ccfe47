//! Labeled spike datasets: synthetic generation, federated splits and
//! read-out targets.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{config, Result};
use crate::raster::SpikeRaster;
use crate::seed;

/// Default firing rate of a target's true-class neuron.
pub const TARGET_HIGH_RATE: f64 = 0.9;
/// Default firing rate of the other read-out neurons.
pub const TARGET_LOW_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub raster: SpikeRaster,
    pub label: usize,
}

/// A set of equally shaped rasters with class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSpikeSet {
    channels: usize,
    horizon: usize,
    class_count: usize,
    examples: Vec<LabeledExample>,
}

impl LabeledSpikeSet {
    pub fn new(
        channels: usize,
        horizon: usize,
        class_count: usize,
        examples: Vec<LabeledExample>,
    ) -> Result<Self> {
        if channels == 0 || horizon == 0 || class_count == 0 {
            return config("dataset needs positive channels, horizon and class count");
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.raster.channels() != channels || ex.raster.horizon() != horizon {
                return config(format!(
                    "example {i} is {}x{}, dataset is {channels}x{horizon}",
                    ex.raster.channels(),
                    ex.raster.horizon()
                ));
            }
            if ex.label >= class_count {
                return config(format!(
                    "example {i} has label {} but only {class_count} classes",
                    ex.label
                ));
            }
        }
        Ok(Self {
            channels,
            horizon,
            class_count,
            examples,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for ex in &self.examples {
            sizes[ex.label] += 1;
        }
        sizes
    }

    /// Mean ones-density over all rasters.
    pub fn density(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        let ones: usize = self.examples.iter().map(|e| e.raster.ones()).sum();
        ones as f64 / (self.examples.len() * self.channels * self.horizon) as f64
    }

    /// The same rasters with labels permuted by `rng`.
    pub fn with_shuffled_labels<R: Rng>(&self, rng: &mut R) -> Self {
        let mut labels: Vec<usize> = self.examples.iter().map(|e| e.label).collect();
        for i in (1..labels.len()).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        let examples = self
            .examples
            .iter()
            .zip(labels)
            .map(|(e, label)| LabeledExample {
                raster: e.raster.clone(),
                label,
            })
            .collect();
        Self {
            examples,
            ..self.clone()
        }
    }
}

/// Parameters of the synthetic class-prototype benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub channels: usize,
    pub horizon: usize,
    pub class_count: usize,
    /// Fraction of channels active in each class prototype.
    pub pattern_density: f64,
    /// Probability of flipping each bit after sampling.
    pub noise_flip: f64,
    /// Firing rate on prototype channels.
    pub active_rate: f64,
    /// Firing rate elsewhere.
    pub background_rate: f64,
    pub count: usize,
    /// Index of the first example; sets drawn with the same seed and
    /// disjoint offsets share prototypes but not examples.
    pub offset: u64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            channels: 64,
            horizon: 40,
            class_count: 2,
            pattern_density: 0.2,
            noise_flip: 0.05,
            active_rate: 0.5,
            background_rate: 0.02,
            count: 200,
            offset: 0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.horizon == 0 || self.class_count == 0 {
            return config("channels, horizon and classes must be positive");
        }
        for (name, v) in [
            ("pattern_density", self.pattern_density),
            ("noise_flip", self.noise_flip),
            ("active_rate", self.active_rate),
            ("background_rate", self.background_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return config(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }

    /// Active-channel mask of each class.
    pub fn prototypes(&self) -> Vec<Vec<bool>> {
        (0..self.class_count)
            .map(|c| {
                let mut rng = seed::derived_rng(self.seed, seed::stream::DATA, u64::MAX - c as u64);
                (0..self.channels)
                    .map(|_| rng.random_bool(self.pattern_density))
                    .collect()
            })
            .collect()
    }
}

/// Draws a balanced synthetic set: example `i` has label `(offset + i) mod
/// classes` and Bernoulli spikes at `active_rate` on its class prototype's
/// channels, `background_rate` elsewhere, followed by independent bit flips.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledSpikeSet> {
    spec.validate()?;
    let prototypes = spec.prototypes();
    let examples = (0..spec.count as u64)
        .map(|i| {
            let index = spec.offset + i;
            let label = (index % spec.class_count as u64) as usize;
            let mut rng = seed::derived_rng(spec.seed, seed::stream::DATA, index);
            let proto = &prototypes[label];
            let mut raster = SpikeRaster::zeros(spec.channels, spec.horizon)?;
            for t in 0..spec.horizon {
                for (c, &active) in proto.iter().enumerate() {
                    let rate = if active {
                        spec.active_rate
                    } else {
                        spec.background_rate
                    };
                    let mut bit = rng.random_bool(rate);
                    if rng.random_bool(spec.noise_flip) {
                        bit = !bit;
                    }
                    raster.set(c, t, bit);
                }
            }
            Ok(LabeledExample { raster, label })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledSpikeSet::new(spec.channels, spec.horizon, spec.class_count, examples)
}

/// Partitions `set` by class: `assignment[class] = device`.
///
/// Devices are numbered `0..=max(device)`; a device without classes receives
/// an empty set.
pub fn federated_split(
    set: &LabeledSpikeSet,
    assignment: &BTreeMap<usize, usize>,
) -> Result<Vec<LabeledSpikeSet>> {
    for class in 0..set.class_count() {
        if !assignment.contains_key(&class) {
            return config(format!("class {class} is not assigned to any device"));
        }
    }
    let devices = assignment.values().max().map_or(0, |d| d + 1);
    let mut parts: Vec<Vec<LabeledExample>> = vec![Vec::new(); devices];
    for ex in set.examples() {
        parts[assignment[&ex.label]].push(ex.clone());
    }
    parts
        .into_iter()
        .map(|examples| {
            LabeledSpikeSet::new(set.channels(), set.horizon(), set.class_count(), examples)
        })
        .collect()
}

/// One class per device, class `c` on device `c`.
pub fn one_class_per_device(class_count: usize) -> BTreeMap<usize, usize> {
    (0..class_count).map(|c| (c, c)).collect()
}

/// Rate-coded read-out target: `high_rate` on the row of `class`,
/// `low_rate` on every other row.
pub fn rate_target<R: Rng>(
    class: usize,
    classes: usize,
    horizon: usize,
    high_rate: f64,
    low_rate: f64,
    rng: &mut R,
) -> Result<SpikeRaster> {
    if class >= classes {
        return config(format!("class {class} out of range for {classes} outputs"));
    }
    if !(high_rate > low_rate) || !(0.0..=1.0).contains(&high_rate) || !(0.0..=1.0).contains(&low_rate) {
        return config(format!(
            "target rates must satisfy 0 <= low < high <= 1, got low {low_rate}, high {high_rate}"
        ));
    }
    let mut raster = SpikeRaster::zeros(classes, horizon)?;
    for t in 0..horizon {
        for c in 0..classes {
            let rate = if c == class { high_rate } else { low_rate };
            raster.set(c, t, rng.random_bool(rate));
        }
    }
    Ok(raster)
}

/// Read-out target for a federated device with `visible` output neurons,
/// using the default target rates.
pub fn to_fl_target<R: Rng>(example: &LabeledExample, visible: usize, rng: &mut R) -> Result<SpikeRaster> {
    rate_target(
        example.label,
        visible,
        example.raster.horizon(),
        TARGET_HIGH_RATE,
        TARGET_LOW_RATE,
        rng,
    )
}
