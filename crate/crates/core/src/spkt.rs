//! The SPKT v1 spike-train container and the CSV fixture format.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! offset 0   "SPKT"
//! offset 4   channels d
//! offset 8   horizon T
//! offset 12  example count N
//! offset 16  N records: [label: u8]? bits: ceil(d*T/8) bytes
//! ```
//!
//! Bits are stored channel-major (bit index `c * T + t`), most significant
//! bit first within each byte. The label byte is either present on every
//! record or on none; readers tell the two apart from the payload length.

use std::fs;
use std::path::Path;

use crate::data::{LabeledExample, LabeledSpikeSet};
use crate::error::{Error, Result};
use crate::raster::SpikeRaster;

pub const MAGIC: &[u8; 4] = b"SPKT";
const HEADER_LEN: usize = 16;

/// Raw contents of an SPKT file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpktFile {
    pub channels: usize,
    pub horizon: usize,
    pub rasters: Vec<SpikeRaster>,
    pub labels: Option<Vec<u8>>,
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset: offset as u64,
        message: message.into(),
    })
}

fn record_bytes(channels: usize, horizon: usize) -> usize {
    (channels * horizon).div_ceil(8)
}

impl SpktFile {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit in u32")))
        };
        let mut out = Vec::with_capacity(
            HEADER_LEN + self.rasters.len() * (1 + record_bytes(self.channels, self.horizon)),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&to_u32(self.channels, "channel count")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.horizon, "horizon")?.to_le_bytes());
        out.extend_from_slice(&to_u32(self.rasters.len(), "example count")?.to_le_bytes());
        if let Some(labels) = &self.labels {
            if labels.len() != self.rasters.len() {
                return Err(Error::Config("label count differs from raster count".into()));
            }
        }
        let nbytes = record_bytes(self.channels, self.horizon);
        for (i, raster) in self.rasters.iter().enumerate() {
            if raster.channels() != self.channels || raster.horizon() != self.horizon {
                return Err(Error::Config(format!("raster {i} has the wrong shape")));
            }
            if let Some(labels) = &self.labels {
                out.push(labels[i]);
            }
            let start = out.len();
            out.resize(start + nbytes, 0);
            for c in 0..self.channels {
                for t in 0..self.horizon {
                    if raster.get(c, t) == 1 {
                        let bit = c * self.horizon + t;
                        out[start + bit / 8] |= 0x80 >> (bit % 8);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return parse_err(0, "bad magic, expected \"SPKT\"");
        }
        if bytes.len() < HEADER_LEN {
            return parse_err(bytes.len(), "truncated header");
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (channels, horizon, count) = (word(4), word(8), word(12));
        if channels == 0 {
            return parse_err(4, "channel count must be positive");
        }
        if horizon == 0 {
            return parse_err(8, "horizon must be positive");
        }
        let nbytes = record_bytes(channels, horizon);
        let payload = bytes.len() - HEADER_LEN;
        let labeled = if count == 0 {
            if payload != 0 {
                return parse_err(HEADER_LEN, "trailing bytes after an empty example list");
            }
            true
        } else if payload == count * (nbytes + 1) {
            true
        } else if payload == count * nbytes {
            false
        } else if payload < count * nbytes {
            return parse_err(
                bytes.len(),
                format!(
                    "truncated payload: {count} records of {nbytes} bytes need {} bytes, found {payload}",
                    count * nbytes
                ),
            );
        } else {
            return parse_err(
                HEADER_LEN,
                format!("payload of {payload} bytes matches neither labeled nor unlabeled records"),
            );
        };
        let stride = nbytes + labeled as usize;
        let mut rasters = Vec::with_capacity(count);
        let mut labels = labeled.then(Vec::new);
        for i in 0..count {
            let mut at = HEADER_LEN + i * stride;
            if let Some(labels) = labels.as_mut() {
                labels.push(bytes[at]);
                at += 1;
            }
            let record = &bytes[at..at + nbytes];
            let mut raster = SpikeRaster::zeros(channels, horizon)?;
            for c in 0..channels {
                for t in 0..horizon {
                    let bit = c * horizon + t;
                    if record[bit / 8] & (0x80 >> (bit % 8)) != 0 {
                        raster.set(c, t, true);
                    }
                }
            }
            rasters.push(raster);
        }
        Ok(Self {
            channels,
            horizon,
            rasters,
            labels,
        })
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_spkt(set: &LabeledSpikeSet, path: &Path) -> Result<()> {
    let labels = set
        .examples()
        .iter()
        .map(|e| {
            u8::try_from(e.label)
                .map_err(|_| Error::Config(format!("label {} does not fit in one byte", e.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let file = SpktFile {
        channels: set.channels(),
        horizon: set.horizon(),
        rasters: set.examples().iter().map(|e| e.raster.clone()).collect(),
        labels: Some(labels),
    };
    write_atomic(path, &file.encode()?)
}

/// Decodes a labeled set. `class_count` defaults to one more than the
/// largest label; when given, larger labels are rejected.
pub fn decode_labeled(bytes: &[u8], class_count: Option<usize>) -> Result<LabeledSpikeSet> {
    let file = SpktFile::decode(bytes)?;
    let Some(labels) = file.labels else {
        return parse_err(HEADER_LEN, "records carry no label byte");
    };
    let classes = class_count.unwrap_or_else(|| labels.iter().max().map_or(1, |&m| m as usize + 1));
    let nbytes = record_bytes(file.channels, file.horizon);
    let mut examples = Vec::with_capacity(labels.len());
    for (i, (raster, label)) in file.rasters.into_iter().zip(labels).enumerate() {
        if label as usize >= classes {
            return parse_err(
                HEADER_LEN + i * (nbytes + 1),
                format!("label {label} is not below the class count {classes}"),
            );
        }
        examples.push(LabeledExample {
            raster,
            label: label as usize,
        });
    }
    LabeledSpikeSet::new(file.channels, file.horizon, classes, examples)
}

pub fn load_spkt(path: &Path) -> Result<LabeledSpikeSet> {
    decode_labeled(&fs::read(path)?, None)
}

pub fn load_spkt_with_classes(path: &Path, class_count: usize) -> Result<LabeledSpikeSet> {
    decode_labeled(&fs::read(path)?, Some(class_count))
}

/// Parses a CSV fixture: one line per channel, comma-separated 0/1 entries.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_raster_csv(text: &str) -> Result<SpikeRaster> {
    let mut rows = Vec::new();
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            let row = trimmed
                .split(',')
                .map(|cell| match cell.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => parse_err(offset, format!("expected 0 or 1, found {other:?}")),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        offset += line.len();
    }
    if rows.is_empty() {
        return parse_err(0, "no rows");
    }
    if let Some(i) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return parse_err(0, format!("row {i} has {} entries, expected {}", rows[i].len(), rows[0].len()));
    }
    SpikeRaster::from_rows(&rows)
}

pub fn raster_to_csv(raster: &SpikeRaster) -> String {
    let mut out = String::new();
    for c in 0..raster.channels() {
        let row: Vec<&str> = raster
            .row(c)
            .iter()
            .map(|&b| if b == 1 { "1" } else { "0" })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
