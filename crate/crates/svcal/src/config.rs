//! Human-readable `key = value` configuration files covering the feature
//! front end and the model architecture.

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, WindowKind};
use crate::model::{BlockSpec, ModelConfig};

/// Front-end plus architecture configuration as read from one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolConfig {
    pub features: FeatureConfig,
    pub model: ModelConfig,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            model: ModelConfig::paper(),
        }
    }
}

fn blocks_to_string(specs: &[BlockSpec]) -> String {
    specs
        .iter()
        .map(|s| format!("{}:{}:{}:{}", s.bottleneck, s.out_channels, s.repeats, s.stride))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_blocks(value: &str) -> Result<Vec<BlockSpec>> {
    value
        .split(',')
        .map(|entry| {
            let parts: Vec<&str> = entry.trim().split(':').collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!(
                    "block spec '{entry}' must be bottleneck:out:repeats:stride"
                )));
            }
            let nums: Vec<usize> = parts
                .iter()
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad number in block spec '{entry}'")))
                })
                .collect::<Result<_>>()?;
            Ok(BlockSpec {
                bottleneck: nums[0],
                out_channels: nums[1],
                repeats: nums[2],
                stride: nums[3],
            })
        })
        .collect()
}

impl ToolConfig {
    /// Canonical `key = value` rendition; parse/format round-trips.
    pub fn to_text(&self) -> String {
        let f = &self.features;
        let m = &self.model;
        let mut out = String::new();
        out.push_str("# feature front end\n");
        out.push_str(&format!("frame_len_ms = {}\n", f.frame_len_ms));
        out.push_str(&format!("frame_shift_ms = {}\n", f.frame_shift_ms));
        out.push_str(&format!("n_mels = {}\n", f.n_mels));
        out.push_str(&format!(
            "fft_size = {}\n",
            f.fft_size.map_or("auto".to_string(), |v| v.to_string())
        ));
        out.push_str(&format!("low_freq = {}\n", f.low_freq));
        out.push_str(&format!("high_freq = {}\n", f.high_freq));
        out.push_str(&format!("preemphasis = {}\n", f.preemphasis));
        out.push_str(&format!("dither = {}\n", f.dither));
        out.push_str(&format!("window = {}\n", f.window.name()));
        out.push_str(&format!("energy_floor = {}\n", f.energy_floor));
        out.push_str("\n# embedding model\n");
        out.push_str(&format!("basewidth = {}\n", m.basewidth));
        out.push_str(&format!("scale = {}\n", m.scale));
        out.push_str(&format!("stem_channels = {}\n", m.stem_channels));
        out.push_str(&format!("blocks = {}\n", blocks_to_string(&m.block_specs)));
        out.push_str(&format!("embedding_dim = {}\n", m.embedding_dim));
        out.push_str(&format!("n_classes = {}\n", m.n_classes));
        out.push_str(&format!("margin = {}\n", m.margin));
        out.push_str(&format!("loss_scale = {}\n", m.loss_scale));
        out.push_str(&format!("asp_eps = {}\n", m.asp_eps));
        out.push_str(&format!("asp_hidden = {}\n", m.asp_hidden));
        out.push_str(&format!("input_mels = {}\n", m.input_mels));
        out
    }

    /// Parses a config file; unset keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = ToolConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {line_no} is not 'key = value': '{raw}'"))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad_num = |what: &str| {
                Error::Parse(format!("config line {line_no}: bad {what} value '{value}'"))
            };
            match key {
                "frame_len_ms" => {
                    config.features.frame_len_ms = value.parse().map_err(|_| bad_num(key))?
                }
                "frame_shift_ms" => {
                    config.features.frame_shift_ms = value.parse().map_err(|_| bad_num(key))?
                }
                "n_mels" => config.features.n_mels = value.parse().map_err(|_| bad_num(key))?,
                "fft_size" => {
                    config.features.fft_size = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad_num(key))?)
                    }
                }
                "low_freq" => config.features.low_freq = value.parse().map_err(|_| bad_num(key))?,
                "high_freq" => config.features.high_freq = value.parse().map_err(|_| bad_num(key))?,
                "preemphasis" => {
                    config.features.preemphasis = value.parse().map_err(|_| bad_num(key))?
                }
                "dither" => config.features.dither = value.parse().map_err(|_| bad_num(key))?,
                "window" => config.features.window = WindowKind::parse(value)?,
                "energy_floor" => {
                    config.features.energy_floor = value.parse().map_err(|_| bad_num(key))?
                }
                "basewidth" => config.model.basewidth = value.parse().map_err(|_| bad_num(key))?,
                "scale" => config.model.scale = value.parse().map_err(|_| bad_num(key))?,
                "stem_channels" => {
                    config.model.stem_channels = value.parse().map_err(|_| bad_num(key))?
                }
                "blocks" => config.model.block_specs = parse_blocks(value)?,
                "embedding_dim" => {
                    config.model.embedding_dim = value.parse().map_err(|_| bad_num(key))?
                }
                "n_classes" => config.model.n_classes = value.parse().map_err(|_| bad_num(key))?,
                "margin" => config.model.margin = value.parse().map_err(|_| bad_num(key))?,
                "loss_scale" => config.model.loss_scale = value.parse().map_err(|_| bad_num(key))?,
                "asp_eps" => config.model.asp_eps = value.parse().map_err(|_| bad_num(key))?,
                "asp_hidden" => config.model.asp_hidden = value.parse().map_err(|_| bad_num(key))?,
                "input_mels" => config.model.input_mels = value.parse().map_err(|_| bad_num(key))?,
                other => {
                    return Err(Error::Parse(format!(
                        "unknown config key '{other}' at line {line_no}"
                    )))
                }
            }
        }
        config.model.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
