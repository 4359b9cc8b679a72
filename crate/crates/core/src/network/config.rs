use std::fmt::Write as _;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Activation;
use crate::distributions::WeightLaw;
use crate::error::{Error, Result};

/// Network input: either the all-ones vector of length `n_0` or an explicit point.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InputSpec {
    #[default]
    Ones,
    Explicit(Vec<f64>),
}

impl InputSpec {
    pub fn resolve(&self, n0: usize) -> Vec<f64> {
        match self {
            InputSpec::Ones => vec![1.0; n0],
            InputSpec::Explicit(v) => v.clone(),
        }
    }
}

impl Serialize for InputSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InputSpec::Ones => s.serialize_str("ones"),
            InputSpec::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for InputSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Token(String),
            Vector(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Token(t) if t == "ones" => Ok(InputSpec::Ones),
            Raw::Token(t) => Err(de::Error::custom(format!(
                "input must be \"ones\" or a vector of numbers, got \"{t}\""
            ))),
            Raw::Vector(v) => Ok(InputSpec::Explicit(v)),
        }
    }
}

/// Architecture and initialization law of a random fully connected network.
///
/// `widths` holds `n_0, …, n_{L+1}`. Layer 1 always has Gaussian weights;
/// layers `2..=L+1` use `hidden_law`, except that with `switch_index = Some(K)`
/// layers `L-K+1..=L+1` are switched to Gaussian weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub depth: usize,
    pub widths: Vec<usize>,
    pub c_w: f64,
    pub c_b: f64,
    pub activation: Activation,
    pub hidden_law: WeightLaw,
    #[serde(default)]
    pub switch_index: Option<i64>,
    #[serde(default)]
    pub input: InputSpec,
}

/// Default input dimension; with the all-ones input it gives `K⁽¹⁾ = c_b + C_W`.
pub const DEFAULT_INPUT_DIM: usize = 4;

impl NetworkConfig {
    /// `depth` hidden layers of width `width`, scalar output, input `(1, 1, 1, 1)`.
    pub fn equal_width(
        depth: usize,
        width: usize,
        activation: Activation,
        hidden_law: WeightLaw,
    ) -> Self {
        let mut widths = vec![width; depth + 2];
        widths[0] = DEFAULT_INPUT_DIM;
        widths[depth + 1] = 1;
        Self {
            depth,
            widths,
            c_w: 1.0,
            c_b: 0.0,
            activation,
            hidden_law,
            switch_index: None,
            input: InputSpec::Ones,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: NetworkConfig = serde_json::from_str(s).map_err(|source| Error::Json {
            context: "network config".into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::config("depth", "must be at least 1"));
        }
        if self.widths.len() != self.depth + 2 {
            return Err(Error::config(
                "widths",
                format!(
                    "expected depth + 2 = {} entries, got {}",
                    self.depth + 2,
                    self.widths.len()
                ),
            ));
        }
        if let Some(pos) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::config("widths", format!("entry {pos} is zero")));
        }
        if !(self.c_w.is_finite() && self.c_w > 0.0) {
            return Err(Error::config("c_w", format!("must be positive, got {}", self.c_w)));
        }
        if !(self.c_b.is_finite() && self.c_b >= 0.0) {
            return Err(Error::config("c_b", format!("must be nonnegative, got {}", self.c_b)));
        }
        if let Some(k) = self.switch_index {
            let l = self.depth as i64;
            if !(-1..=l - 1).contains(&k) {
                return Err(Error::config(
                    "switch_index",
                    format!("must lie in -1..={}, got {k}", l - 1),
                ));
            }
        }
        if let InputSpec::Explicit(v) = &self.input {
            if v.len() != self.widths[0] {
                return Err(Error::config(
                    "input",
                    format!("length {} does not match n_0 = {}", v.len(), self.widths[0]),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("input", "entries must be finite"));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.depth + 1]
    }

    /// The configured input point.
    pub fn input_vector(&self) -> Vec<f64> {
        self.input.resolve(self.input_dim())
    }

    /// Weight law of layer `layer ∈ 1..=L+1`.
    pub fn layer_law(&self, layer: usize) -> WeightLaw {
        if layer <= 1 {
            return WeightLaw::Gaussian;
        }
        match self.switch_index {
            Some(k) if layer as i64 > self.depth as i64 - k => WeightLaw::Gaussian,
            _ => self.hidden_law,
        }
    }

    /// Variance `C_W / n_{ℓ-1}` of a layer-ℓ weight.
    pub fn weight_variance(&self, layer: usize) -> f64 {
        self.c_w / self.widths[layer - 1] as f64
    }

    /// Copy with every hidden width set to `width`.
    pub fn with_hidden_width(&self, width: usize) -> Self {
        let mut cfg = self.clone();
        for w in &mut cfg.widths[1..=self.depth] {
            *w = width;
        }
        cfg
    }

    pub fn with_switch(&self, switch_index: Option<i64>) -> Self {
        Self {
            switch_index,
            ..self.clone()
        }
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("network config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn digest(&self) -> String {
        digest_of(&self.canonical_json())
    }
}

pub(crate) fn digest_of(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(16);
    for b in &hash[..8] {
        write!(out, "{b:02x}").unwrap();
    }
    out
}
