//! Penalty families `p_lambda(|t|)` and their derivatives, used as the
//! adaptive weights of the majorize-minimize iterations.

use crate::error::{Error, Result};
use crate::scalar::{as_f64, sf, Scalar};

/// Supported penalty families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyFamily {
    Lasso,
    Scad,
    Mcp,
}

impl PenaltyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mcp => "mcp",
        }
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(PenaltyFamily::Lasso),
            "scad" => Ok(PenaltyFamily::Scad),
            "mcp" => Ok(PenaltyFamily::Mcp),
            other => Err(Error::InvalidPenalty(format!("unknown family `{other}`"))),
        }
    }
}

/// Default concavity parameter for SCAD.
pub const DEFAULT_SCAD_GAMMA: f64 = 3.7;
/// Default concavity parameter for MCP.
pub const DEFAULT_MCP_GAMMA: f64 = 1.5;

/// A penalty family with its level `lambda` and concavity `gamma`.
///
/// SCAD requires `gamma > 2`, MCP `gamma > 1`; the Lasso ignores `gamma`
/// (stored as infinity so the flat region never starts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec<S> {
    family: PenaltyFamily,
    lambda: S,
    gamma: S,
}

impl<S: Scalar> PenaltySpec<S> {
    pub fn new(family: PenaltyFamily, lambda: S, gamma: Option<S>) -> Result<Self> {
        if !lambda.is_finite() || lambda < S::zero() {
            return Err(Error::InvalidPenalty(format!(
                "lambda must be finite and nonnegative, got {}",
                as_f64(lambda)
            )));
        }
        let gamma = match family {
            PenaltyFamily::Lasso => S::infinity(),
            PenaltyFamily::Scad => {
                let g = gamma.unwrap_or_else(|| sf(DEFAULT_SCAD_GAMMA));
                if g <= sf(2.0) {
                    return Err(Error::InvalidPenalty(format!(
                        "SCAD requires gamma > 2, got {}",
                        as_f64(g)
                    )));
                }
                g
            }
            PenaltyFamily::Mcp => {
                let g = gamma.unwrap_or_else(|| sf(DEFAULT_MCP_GAMMA));
                if g <= S::one() {
                    return Err(Error::InvalidPenalty(format!(
                        "MCP requires gamma > 1, got {}",
                        as_f64(g)
                    )));
                }
                g
            }
        };
        Ok(Self {
            family,
            lambda,
            gamma,
        })
    }

    pub fn lasso(lambda: S) -> Result<Self> {
        Self::new(PenaltyFamily::Lasso, lambda, None)
    }

    pub fn scad(lambda: S, gamma: S) -> Result<Self> {
        Self::new(PenaltyFamily::Scad, lambda, Some(gamma))
    }

    pub fn mcp(lambda: S, gamma: S) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, Some(gamma))
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    /// Lower-bound constant `a_1` of the derivative on `(0, a_2 lambda]`.
    pub fn a1(&self) -> S {
        match self.family {
            PenaltyFamily::Lasso | PenaltyFamily::Scad => S::one(),
            PenaltyFamily::Mcp => S::one() - S::one() / self.gamma,
        }
    }

    /// Range constant `a_2`.
    pub fn a2(&self) -> S {
        S::one()
    }

    /// `p_lambda(t)` for `t >= 0`.
    ///
    /// Callers pass `|beta_k|`; a negative argument is a bug and is rejected.
    pub fn value(&self, t: S) -> Result<S> {
        if t < S::zero() {
            return Err(Error::NegativePenaltyArgument(as_f64(t)));
        }
        let (l, g) = (self.lambda, self.gamma);
        let two = sf::<S>(2.0);
        let v = match self.family {
            PenaltyFamily::Lasso => l * t,
            PenaltyFamily::Scad => {
                if t <= l {
                    l * t
                } else if t <= g * l {
                    (two * g * l * t - t * t - l * l) / (two * (g - S::one()))
                } else {
                    l * l * (g * g - S::one()) / (two * (g - S::one()))
                }
            }
            PenaltyFamily::Mcp => {
                if t <= g * l {
                    l * t - t * t / (two * g)
                } else {
                    g * l * l / two
                }
            }
        };
        Ok(v)
    }

    /// `p'_lambda(t)` for `t >= 0`, with `t = 0` returning the right
    /// derivative `p'_lambda(0+)`.
    pub fn deriv(&self, t: S) -> Result<S> {
        if t < S::zero() {
            return Err(Error::NegativePenaltyArgument(as_f64(t)));
        }
        let (l, g) = (self.lambda, self.gamma);
        // the flat region is closed at gamma lambda: p'(t) = 0 on
        // [gamma lambda, infinity)
        let v = match self.family {
            PenaltyFamily::Lasso => l,
            PenaltyFamily::Scad => {
                if t <= l {
                    l
                } else if t < g * l {
                    (g * l - t) / (g - S::one())
                } else {
                    S::zero()
                }
            }
            PenaltyFamily::Mcp => {
                if t < g * l {
                    l - t / g
                } else {
                    S::zero()
                }
            }
        };
        Ok(v)
    }
}
