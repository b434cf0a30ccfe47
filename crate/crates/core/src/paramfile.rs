//! Trained pipeline storage.
//!
//! The parameter file is the magic `NJSC`, a version byte, then every
//! parameter as a little-endian `f64`: the encoder's neurons in order (if
//! any), then the decoder's. Each neuron contributes its synaptic weights,
//! its feedback weight and its bias. Shapes are not stored in the binary
//! file; they come from the manifest, a `key=value` text sidecar that also
//! records the channel and any provenance fields.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::channel::ChannelConfig;
use crate::error::{config, Error, Result};
use crate::filter::FilterConfig;
use crate::jscc::{Pipeline, PipelineConfig, Scheme};
use crate::learning::{HiddenCredit, RuleConfig};
use crate::network::NetworkParams;
use crate::spkt::write_atomic;

pub const MAGIC: &[u8; 4] = b"NJSC";
pub const VERSION: u8 = 1;

/// Ordered `key=value` pairs. Lines starting with `#` and blank lines are
/// ignored when parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest(pub BTreeMap<String, String>);

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("manifest is missing {key:?}")))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("manifest value {key}={raw:?} is invalid")))
    }
}

/// Manifest entries describing a pipeline's configuration and link.
pub fn pipeline_manifest(pipeline: &Pipeline) -> Manifest {
    let c = &pipeline.config;
    let mut m = Manifest::default();
    m.set("format", "njsc-1");
    m.set("scheme", c.scheme.name());
    m.set("d_o", c.d_o);
    m.set("rate", format!("{}/{}", c.rate_num, c.rate_den));
    m.set("d_v", c.d_v);
    m.set(
        "decoder_hidden",
        c.decoder_hidden.map_or("auto".to_string(), |h| h.to_string()),
    );
    m.set("encoder_hidden", c.encoder_hidden);
    m.set("encoder_init_scale", c.encoder_init_scale);
    m.set("horizon", c.horizon);
    m.set("synaptic_filter", &c.filters.synaptic);
    m.set("feedback_filter", &c.filters.feedback);
    m.set("target_high", c.target_high);
    m.set("target_low", c.target_low);
    m.set("learning_rate", c.learning_rate);
    m.set(
        "encoder_learning_rate",
        c.encoder_learning_rate.map_or("same".to_string(), |r| r.to_string()),
    );
    m.set(
        "hidden_credit",
        match c.rule.credit {
            HiddenCredit::Eligibility => "eligibility",
            HiddenCredit::SameStep => "same-step",
        },
    );
    m.set("eligibility_decay", c.rule.eligibility_decay);
    m.set(
        "baseline_rate",
        c.rule.baseline_rate.map_or("none".to_string(), |r| r.to_string()),
    );
    match &pipeline.channel {
        Some(ch) => {
            m.set("channel", "gaussian");
            m.set("channel_snr_db", ch.snr_db);
            m.set("channel_sigma", ch.noise_sigma);
            m.set("channel_threshold", ch.threshold);
        }
        None => m.set("channel", "ideal"),
    }
    m
}

/// Rebuilds the configuration recorded by [`pipeline_manifest`].
pub fn config_from_manifest(m: &Manifest) -> Result<PipelineConfig> {
    let scheme: Scheme = m.require("scheme")?.parse()?;
    let mut c = PipelineConfig::new(scheme, m.parsed("d_o")?, m.parsed("horizon")?);
    let rate = m.require("rate")?;
    let (num, den) = rate.split_once('/').unwrap_or((rate, "1"));
    c.rate_num = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad rate {rate:?}")))?;
    c.rate_den = den
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad rate {rate:?}")))?;
    c.d_v = m.parsed("d_v")?;
    c.decoder_hidden = match m.require("decoder_hidden")? {
        "auto" => None,
        _ => Some(m.parsed("decoder_hidden")?),
    };
    c.encoder_hidden = m.parsed("encoder_hidden")?;
    c.encoder_init_scale = m.parsed("encoder_init_scale")?;
    c.filters = FilterConfig {
        synaptic: m.parsed("synaptic_filter")?,
        feedback: m.parsed("feedback_filter")?,
    };
    c.target_high = m.parsed("target_high")?;
    c.target_low = m.parsed("target_low")?;
    c.learning_rate = m.parsed("learning_rate")?;
    c.encoder_learning_rate = match m.require("encoder_learning_rate")? {
        "same" => None,
        _ => Some(m.parsed("encoder_learning_rate")?),
    };
    c.rule = RuleConfig {
        credit: match m.require("hidden_credit")? {
            "eligibility" => HiddenCredit::Eligibility,
            "same-step" => HiddenCredit::SameStep,
            other => return config(format!("unknown hidden_credit {other:?}")),
        },
        eligibility_decay: m.parsed("eligibility_decay")?,
        baseline_rate: match m.require("baseline_rate")? {
            "none" => None,
            _ => Some(m.parsed("baseline_rate")?),
        },
    };
    c.validate()?;
    Ok(c)
}

fn channel_from_manifest(m: &Manifest, lanes: usize) -> Result<Option<ChannelConfig>> {
    match m.require("channel")? {
        "ideal" => Ok(None),
        "gaussian" => {
            let mut ch = ChannelConfig::new(lanes, m.parsed("channel_sigma")?, m.parsed("channel_threshold")?)?;
            ch.snr_db = m.parsed("channel_snr_db")?;
            Ok(Some(ch))
        }
        other => config(format!("unknown channel {other:?}")),
    }
}

/// Binary parameter payload of a pipeline.
pub fn encode_params(pipeline: &Pipeline) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    let enc = pipeline.encoder.iter().flat_map(|e| e.to_flat());
    for v in enc.chain(pipeline.decoder.to_flat()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a parameter payload against a configuration.
pub fn decode_params(bytes: &[u8], config: PipelineConfig) -> Result<Pipeline> {
    let parse = |offset: usize, message: String| Error::Parse {
        offset: offset as u64,
        message,
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(parse(0, "missing NJSC magic".into()));
    }
    match bytes.get(4) {
        Some(&VERSION) => {}
        Some(v) => return Err(parse(4, format!("unsupported version {v}"))),
        None => return Err(parse(bytes.len(), "missing version byte".into())),
    }
    let template = Pipeline::new(config.clone(), 0)?;
    let enc_len = template.encoder.as_ref().map_or(0, |e| e.topology().parameter_count());
    let dec_len = template.decoder.topology().parameter_count();
    let payload = &bytes[5..];
    let expected = (enc_len + dec_len) * 8;
    if payload.len() != expected {
        return Err(parse(
            bytes.len(),
            format!("expected {expected} parameter bytes, found {}", payload.len()),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(parse(5 + 8 * i, "non-finite parameter".into()));
    }
    let encoder = match &template.encoder {
        Some(e) => Some(NetworkParams::from_flat(e.topology().clone(), &values[..enc_len])?),
        None => None,
    };
    let decoder = NetworkParams::from_flat(template.decoder.topology().clone(), &values[enc_len..])?;
    Pipeline::from_parts(config, encoder, decoder)
}

/// `model.njsc` -> `model.njsc.manifest`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Writes the parameter file and its manifest; `extra` entries (seeds,
/// training SNR and so on) are added to the manifest.
pub fn save_pipeline(pipeline: &Pipeline, path: &Path, extra: &Manifest) -> Result<()> {
    let mut m = pipeline_manifest(pipeline);
    for (k, v) in &extra.0 {
        m.0.entry(k.clone()).or_insert_with(|| v.clone());
    }
    write_atomic(path, &encode_params(pipeline))?;
    write_atomic(&manifest_path(path), m.render().as_bytes())
}

/// Loads a pipeline and its manifest.
pub fn load_pipeline(path: &Path) -> Result<(Pipeline, Manifest)> {
    let m = Manifest::parse(&std::fs::read_to_string(manifest_path(path))?)?;
    let config = config_from_manifest(&m)?;
    let mut pipeline = decode_params(&std::fs::read(path)?, config)?;
    let lanes = pipeline.d_x();
    pipeline.set_channel(channel_from_manifest(&m, lanes)?)?;
    Ok((pipeline, m))
}
