use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
            Activation::Sigmoid => a * (T::one() - a),
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Single valid-padding, stride-1 convolution over the observation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Observation grid as (depth, width).
    pub obs_shape: (usize, usize),
    pub conv: Option<ConvSpec>,
    pub encoder: Vec<LayerSpec>,
    pub lstm_width: usize,
    pub actions: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            obs_shape: (12, 8),
            conv: None,
            encoder: vec![
                LayerSpec { width: 64, activation: Activation::Relu },
                LayerSpec { width: 32, activation: Activation::Relu },
            ],
            lstm_width: 32,
            actions: 5,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn obs_len(&self) -> usize {
        self.obs_shape.0 * self.obs_shape.1
    }

    pub fn validate(&self) -> Result<()> {
        let (d, w) = self.obs_shape;
        if d == 0 || w == 0 {
            return Err(Error::config("observation shape must be non-empty"));
        }
        if let Some(c) = self.conv {
            if c.channels == 0 || c.kernel == 0 {
                return Err(Error::config("conv channels and kernel must be >= 1"));
            }
            if c.kernel > d || c.kernel > w {
                return Err(Error::config(format!(
                    "conv kernel {} does not fit observation {d}x{w}",
                    c.kernel
                )));
            }
        }
        if self.encoder.iter().any(|l| l.width == 0) {
            return Err(Error::config("encoder widths must be >= 1"));
        }
        if self.lstm_width == 0 {
            return Err(Error::config("lstm width must be >= 1"));
        }
        if self.actions == 0 {
            return Err(Error::config("action count must be >= 1"));
        }
        Ok(())
    }

    /// `key = value` lines, as embedded in checkpoint headers.
    pub fn to_text(&self) -> String {
        let conv = match self.conv {
            None => "none".to_string(),
            Some(c) => format!("{}x{}:{}", c.channels, c.kernel, c.activation),
        };
        let encoder = self
            .encoder
            .iter()
            .map(|l| format!("{}:{}", l.width, l.activation))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "obs_shape = {}x{}\nconv = {conv}\nencoder = {encoder}\nlstm_width = {}\nactions = {}\nseed = {}\n",
            self.obs_shape.0, self.obs_shape.1, self.lstm_width, self.actions, self.seed
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = NetworkConfig::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "obs_shape" => self.obs_shape = parse_dims(value)?,
            "conv" => self.conv = parse_conv(value)?,
            "encoder" => self.encoder = parse_encoder(value)?,
            "lstm_width" => self.lstm_width = parse_usize(key, value)?,
            "actions" => self.actions = parse_usize(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::config(format!("seed: `{value}` is not an integer")))?
            }
            _ => return Err(Error::config(format!("unknown network key `{key}`"))),
        }
        Ok(())
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: `{value}` is not a non-negative integer")))
}

fn parse_dims(value: &str) -> Result<(usize, usize)> {
    let (a, b) = value
        .split_once('x')
        .ok_or_else(|| Error::config(format!("expected `DxW`, got `{value}`")))?;
    Ok((parse_usize("dims", a.trim())?, parse_usize("dims", b.trim())?))
}

fn parse_conv(value: &str) -> Result<Option<ConvSpec>> {
    if value == "none" {
        return Ok(None);
    }
    let (dims, act) = value.split_once(':').unwrap_or((value, "relu"));
    let (channels, kernel) = parse_dims(dims)?;
    Ok(Some(ConvSpec { channels, kernel, activation: act.parse()? }))
}

fn parse_encoder(value: &str) -> Result<Vec<LayerSpec>> {
    if value.trim().is_empty() || value.trim() == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            let (w, act) = item.split_once(':').unwrap_or((item, "relu"));
            Ok(LayerSpec { width: parse_usize("encoder", w.trim())?, activation: act.parse()? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = NetworkConfig {
            obs_shape: (5, 4),
            conv: Some(ConvSpec { channels: 3, kernel: 2, activation: Activation::Tanh }),
            encoder: vec![LayerSpec { width: 7, activation: Activation::Sigmoid }],
            lstm_width: 6,
            actions: 5,
            seed: 99,
        };
        assert_eq!(NetworkConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        let d = NetworkConfig::default();
        assert_eq!(NetworkConfig::from_text(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn rejects_degenerate_widths() {
        let mut cfg = NetworkConfig::default();
        cfg.lstm_width = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::default();
        cfg.conv = Some(ConvSpec { channels: 1, kernel: 20, activation: Activation::Relu });
        assert!(cfg.validate().is_err());
    }
}
