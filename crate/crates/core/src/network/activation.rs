use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use libm::erf;

use crate::error::{Error, Result};

/// Regularity class of an activation, as far as the universality bounds care.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    /// Smooth with all derivatives bounded.
    BoundedSmooth,
    /// Smooth but unbounded.
    Unbounded,
    /// Not differentiable everywhere.
    Nonsmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Arctan,
    Erf,
    Identity,
    ConstantZero,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 7] = [
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Arctan,
        Activation::Erf,
        Activation::Identity,
        Activation::ConstantZero,
        Activation::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Arctan => "arctan",
            Activation::Erf => "erf",
            Activation::Identity => "identity",
            Activation::ConstantZero => "constant_zero",
            Activation::Relu => "relu",
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Arctan => x.atan(),
            Activation::Erf => erf(x),
            Activation::Identity => x,
            Activation::ConstantZero => 0.0,
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn smoothness(self) -> Smoothness {
        match self {
            Activation::Identity => Smoothness::Unbounded,
            Activation::Relu => Smoothness::Nonsmooth,
            _ => Smoothness::BoundedSmooth,
        }
    }

    /// `sup |σ|`, or `None` when σ is unbounded.
    pub fn sup_norm(self) -> Option<f64> {
        match self {
            Activation::Sigmoid | Activation::Tanh | Activation::Erf => Some(1.0),
            Activation::Arctan => Some(FRAC_PI_2),
            Activation::ConstantZero => Some(0.0),
            Activation::Identity | Activation::Relu => None,
        }
    }

    pub fn is_constant(self) -> bool {
        self == Activation::ConstantZero
    }

    /// Logs a warning when σ lies outside the bounded-smooth class the
    /// quantitative bounds are stated for. Returns whether it does.
    pub fn warn_if_outside_hypotheses(self, context: &str) -> bool {
        if self.smoothness() == Smoothness::BoundedSmooth {
            return false;
        }
        log::warn!(
            "{context}: activation `{}` is not bounded with bounded derivatives; \
             the quantitative rates are not guaranteed for it",
            self.name()
        );
        true
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("activation", format!("unknown activation `{s}`")))
    }
}
