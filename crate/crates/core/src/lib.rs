//! Probabilistic spiking neural networks trained online with a local
//! three-factor rule, a federated protocol that averages on-device models,
//! and a spiking encoder/decoder pair for communicating over a noisy
//! impulse-radio link.
//!
//! The main entry points are:
//!
//! - [`network`] for topologies, parameters and the stepping simulator,
//! - [`learning`] for the online update rule,
//! - [`fl`] for federated training,
//! - [`channel`] for the on-off keyed Gaussian link,
//! - [`jscc`] for the trainable encoder/channel/decoder pipeline,
//! - [`data`] and [`spkt`] for spike datasets.

pub mod channel;
pub mod data;
pub mod error;
pub mod filter;
pub mod fl;
pub mod jscc;
pub mod learning;
pub mod network;
pub mod neuron;
pub mod oracle;
pub mod paramfile;
pub mod raster;
pub mod seed;
pub mod spkt;

pub use error::{Error, Result};
pub use filter::{FilterConfig, SynapticFilter};
pub use fl::{rate_decode, FlSchedule};
pub use jscc::{Pipeline, PipelineConfig, Scheme};
pub use network::{NetworkParams, NetworkState, Source, Topology};
pub use raster::SpikeRaster;
