//! `neurocomm`: dataset generation, federated training sweeps and spiking
//! joint source-channel coding experiments.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for data errors.

mod commands;
mod error;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "neurocomm", version, about = "Neuromorphic communication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic labeled SPKT dataset.
    GenData(GenDataArgs),
    /// Federated training sweep over (delta-t, delta-j); writes a CSV log.
    FlTrain(FlTrainArgs),
    /// Train an encoder/decoder pipeline and save its parameters.
    JsccTrain(JsccTrainArgs),
    /// Accuracy against time and against SNR for a trained pipeline.
    JsccEval(JsccEvalArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// key=value file supplying defaults for any flag below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Fraction of channels in each class prototype.
    #[arg(long)]
    pub density: Option<f64>,
    /// Bit-flip probability applied after sampling.
    #[arg(long)]
    pub flip: Option<f64>,
    #[arg(long)]
    pub active_rate: Option<f64>,
    #[arg(long)]
    pub background_rate: Option<f64>,
    /// Index of the first example; use disjoint offsets for train and test.
    #[arg(long)]
    pub offset: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlTrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training set, split across devices by class.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Test set used for every accuracy measurement.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Device count; class c goes to device c mod devices.
    #[arg(long)]
    pub devices: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub delta_t: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub delta_j: Option<Vec<usize>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Hidden neurons per device network.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JsccTrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// neurojscc or uncoded.
    #[arg(long)]
    pub scheme: Option<String>,
    /// d_x / d_o as an integer or a fraction such as 1/2.
    #[arg(long)]
    pub rate: Option<String>,
    /// Training SNR in dB; omit to train over an error-free link.
    #[arg(long, allow_hyphen_values = true)]
    pub train_snr_db: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Encoder step size.
    #[arg(long)]
    pub encoder_lr: Option<f64>,
    /// Hidden decoder neurons (default d_x).
    #[arg(long)]
    pub decoder_hidden: Option<usize>,
    #[arg(long)]
    pub eligibility_decay: Option<f64>,
    /// `uncoded` also trains an uncoded receiver, saved next to the model.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parameter file; the manifest is written alongside.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of the mean training bound per epoch.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JsccEvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Operating point of the accuracy-against-time curve.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// `uncoded` adds the receiver saved by `jscc-train --baseline uncoded`.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the CSVs and the plotting script.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::FlTrain(a) => commands::fl_train(a),
        Command::JsccTrain(a) => commands::jscc_train(a),
        Command::JsccEval(a) => commands::jscc_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("neurocomm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
