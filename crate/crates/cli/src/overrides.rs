//! Network config from a JSON file (or the Appendix A default) plus flag
//! overrides, which always win over file values.

use std::path::PathBuf;

use clap::Args;

use nngp_core::experiments::StudyConfig;
use nngp_core::{Activation, Error, InputSpec, NetworkConfig, WeightLaw};

use crate::{read_config, CliFailure};

#[derive(Debug, Args)]
pub struct NetworkOverrides {
    /// Network config JSON.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    fields: FieldOverrides,
}

impl NetworkOverrides {
    pub fn resolve(&self) -> Result<NetworkConfig, CliFailure> {
        let mut config = match &self.config {
            Some(path) => NetworkConfig::from_json_str(&read_config(path)?)?,
            None => StudyConfig::appendix_a().network,
        };
        self.fields.apply(&mut config)?;
        Ok(config)
    }
}

/// One flag per network config key.
#[derive(Debug, Args)]
pub struct FieldOverrides {
    /// Number of hidden layers L.
    #[arg(long)]
    depth: Option<usize>,
    /// All widths n_0,...,n_{L+1}.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    /// Sets every hidden width n_1..n_L.
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    c_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c_b: Option<f64>,
    #[arg(long)]
    activation: Option<Activation>,
    #[arg(long)]
    hidden_law: Option<WeightLaw>,
    #[arg(long, allow_hyphen_values = true)]
    switch_index: Option<i64>,
    /// `ones` or comma-separated coordinates.
    #[arg(long)]
    input: Option<String>,
}

impl FieldOverrides {
    pub fn apply(&self, config: &mut NetworkConfig) -> Result<(), CliFailure> {
        if let Some(depth) = self.depth {
            if self.widths.is_none() && depth != config.depth {
                // Keep n_0, the first hidden width and the output width.
                let (n0, hidden, out) = (config.widths[0], config.widths[1], *config.widths.last().unwrap());
                config.widths = std::iter::once(n0)
                    .chain(std::iter::repeat_n(hidden, depth))
                    .chain(std::iter::once(out))
                    .collect();
            }
            config.depth = depth;
        }
        if let Some(w) = &self.widths {
            config.widths = w.clone();
        }
        if let Some(h) = self.hidden_width {
            config.validate()?;
            *config = config.with_hidden_width(h);
        }
        if let Some(v) = self.c_w {
            config.c_w = v;
        }
        if let Some(v) = self.c_b {
            config.c_b = v;
        }
        if let Some(a) = self.activation {
            config.activation = a;
        }
        if let Some(l) = self.hidden_law {
            config.hidden_law = l;
        }
        if let Some(k) = self.switch_index {
            config.switch_index = Some(k);
        }
        if let Some(s) = &self.input {
            config.input = parse_input(s)?;
        }
        config.validate()?;
        Ok(())
    }
}

pub fn parse_input(s: &str) -> Result<InputSpec, CliFailure> {
    if s.trim() == "ones" {
        return Ok(InputSpec::Ones);
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map(InputSpec::Explicit)
        .map_err(|e| {
            Error::InvalidConfig {
                key: "input".into(),
                reason: format!("`{s}` is neither `ones` nor a list of numbers ({e})"),
            }
            .into()
        })
}
