//! Penalty functions for sparse regression: value, derivative (the source of
//! LLA weights), LQA ridge coefficients, and maximum concavity.
//!
//! The regularization strength `lambda` is folded into every quantity here, so
//! downstream weighted-L1 subproblems use the derivative directly as the
//! per-coordinate penalty weight.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Supported penalty families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyFamily {
    /// Subset-size penalty `0.5 * lambda^2 * 1[t != 0]`. Served by exhaustive
    /// search only; it has no derivative.
    L0,
    /// `lambda * |t|` (the lasso penalty).
    L1,
    /// Smoothly clipped absolute deviation; linear near zero, flat beyond
    /// `a * lambda`. Shape constant `a > 2`.
    Scad,
    /// Minimax concave penalty `(lambda - t/gamma)_+` in derivative form.
    /// Shape constant `gamma > 1`.
    Mcp,
    /// `lambda * |t|^gamma` with exponent `0 < gamma`; concave for `gamma <= 1`.
    Bridge,
    /// Derivative `lambda / (t + epsilon)`; its value is defined only up to an
    /// additive constant when `epsilon = 0`.
    LogPenalty,
    /// Adaptive-lasso weight generator `lambda * (|b| + epsilon)^(-gamma)`.
    /// The implied penalty value exists only for `gamma < 1`.
    AdaptivePower,
}

impl PenaltyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyFamily::L0 => "l0",
            PenaltyFamily::L1 => "l1",
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mcp => "mcp",
            PenaltyFamily::Bridge => "bridge",
            PenaltyFamily::LogPenalty => "log",
            PenaltyFamily::AdaptivePower => "adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PenaltyError {
    #[error("invalid penalty spec: {0}")]
    InvalidSpec(String),
    #[error("non-differentiable family: {0}")]
    NonDifferentiable(&'static str),
    #[error("singular penalty value: {family} at t = 0 with epsilon = 0")]
    SingularValue { family: &'static str },
    #[error("penalty value undefined: adaptive weights with gamma >= 1 imply a negative penalty")]
    NegativeImpliedPenalty,
    #[error("concavity not defined in scope for family {0}")]
    ConcavityUndefined(&'static str),
}

/// A penalty family with its regularization strength and shape constants.
///
/// Serializes to `{"family", "lambda", "shape", "epsilon"}` with that field
/// order. `shape` is `a` for SCAD, `gamma` for MCP/Bridge/AdaptivePower, and
/// ignored (stored as 0) for L0/L1/LogPenalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenaltySpec")]
pub struct PenaltySpec {
    family: PenaltyFamily,
    lambda: f64,
    shape: f64,
    epsilon: f64,
}

#[derive(Deserialize)]
struct RawPenaltySpec {
    family: PenaltyFamily,
    lambda: f64,
    #[serde(default)]
    shape: f64,
    #[serde(default)]
    epsilon: f64,
}

impl TryFrom<RawPenaltySpec> for PenaltySpec {
    type Error = PenaltyError;
    fn try_from(raw: RawPenaltySpec) -> Result<Self, PenaltyError> {
        PenaltySpec::new(raw.family, raw.lambda, raw.shape, raw.epsilon)
    }
}

/// Default SCAD shape constant.
pub const SCAD_DEFAULT_A: f64 = 3.7;
/// Default MCP shape constant.
pub const MCP_DEFAULT_GAMMA: f64 = 3.0;

impl PenaltySpec {
    /// Validated constructor. `shape` is interpreted per family; for L0, L1 and
    /// LogPenalty it is forced to 0.
    pub fn new(
        family: PenaltyFamily,
        lambda: f64,
        shape: f64,
        epsilon: f64,
    ) -> Result<Self, PenaltyError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(PenaltyError::InvalidSpec(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(PenaltyError::InvalidSpec(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        let shape = match family {
            PenaltyFamily::L0 | PenaltyFamily::L1 | PenaltyFamily::LogPenalty => 0.0,
            PenaltyFamily::Scad => {
                if !(shape > 2.0) {
                    return Err(PenaltyError::InvalidSpec(format!(
                        "scad requires a > 2, got {shape}"
                    )));
                }
                shape
            }
            PenaltyFamily::Mcp => {
                if !(shape > 1.0) {
                    return Err(PenaltyError::InvalidSpec(format!(
                        "mcp requires gamma > 1, got {shape}"
                    )));
                }
                shape
            }
            PenaltyFamily::Bridge | PenaltyFamily::AdaptivePower => {
                if !(shape > 0.0) {
                    return Err(PenaltyError::InvalidSpec(format!(
                        "{} requires gamma > 0, got {shape}",
                        family.name()
                    )));
                }
                shape
            }
        };
        Ok(Self {
            family,
            lambda,
            shape,
            epsilon,
        })
    }

    pub fn l0(lambda: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::L0, lambda, 0.0, 0.0)
    }

    pub fn l1(lambda: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::L1, lambda, 0.0, 0.0)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::Scad, lambda, a, 0.0)
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::Mcp, lambda, gamma, 0.0)
    }

    pub fn bridge(lambda: f64, gamma: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::Bridge, lambda, gamma, 0.0)
    }

    pub fn log_penalty(lambda: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::LogPenalty, lambda, 0.0, 0.0)
    }

    pub fn adaptive(lambda: f64, gamma: f64) -> Result<Self, PenaltyError> {
        Self::new(PenaltyFamily::AdaptivePower, lambda, gamma, 0.0)
    }

    /// Replaces the zero-guard epsilon.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, PenaltyError> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(PenaltyError::InvalidSpec(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Same family and shape at a different regularization strength.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self, PenaltyError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(PenaltyError::InvalidSpec(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Penalty value `p_lambda(t)` at `t >= 0`.
    ///
    /// For LogPenalty with `epsilon > 0` this is the normalized
    /// `lambda * (ln(t + eps) - ln(eps))`, which vanishes at zero; with
    /// `epsilon = 0` the value is defined only up to a constant and is
    /// returned as `lambda * ln(t)` (negative below t = 1, used only through
    /// its derivative).
    pub fn value(&self, t: f64) -> Result<f64, PenaltyError> {
        debug_assert!(t >= 0.0, "penalty value evaluated at negative t");
        let l = self.lambda;
        match self.family {
            PenaltyFamily::L0 => Ok(if t != 0.0 { 0.5 * l * l } else { 0.0 }),
            PenaltyFamily::L1 => Ok(l * t),
            PenaltyFamily::Scad => {
                let a = self.shape;
                Ok(if t <= l {
                    l * t
                } else if t <= a * l {
                    (2.0 * a * l * t - t * t - l * l) / (2.0 * (a - 1.0))
                } else {
                    0.5 * (a + 1.0) * l * l
                })
            }
            PenaltyFamily::Mcp => {
                let g = self.shape;
                Ok(if t <= g * l {
                    l * t - t * t / (2.0 * g)
                } else {
                     0.5 * g * l * l
                })
            }
            PenaltyFamily::Bridge => Ok(l * t.powf(self.shape)),
            PenaltyFamily::LogPenalty => {
                if self.epsilon > 0.0 {
                    Ok(l * ((t + self.epsilon).ln() - self.epsilon.ln()))
                } else if t == 0.0 {
                    Err(PenaltyError::SingularValue { family: "log" })
                } else {
                    Ok(l * t.ln())
                }
            }
            PenaltyFamily::AdaptivePower => {
                let g = self.shape;
                if g >= 1.0 {
                    Err(PenaltyError::NegativeImpliedPenalty)
                } else {
                    Ok(l / (1.0 - g) * t.powf(1.0 - g))
                }
            }
        }
    }

    /// Derivative `p'_lambda(t)` for `t > 0` (and its right limit at 0, which
    /// is what [`PenaltySpec::lla_weight`] uses).
    pub fn derivative(&self, t: f64) -> Result<f64, PenaltyError> {
        let l = self.lambda;
        if l == 0.0 {
            return match self.family {
                PenaltyFamily::L0 => Err(PenaltyError::NonDifferentiable("l0")),
                _ => Ok(0.0),
            };
        }
        match self.family {
            PenaltyFamily::L0 => Err(PenaltyError::NonDifferentiable("l0")),
            PenaltyFamily::L1 => Ok(l),
            PenaltyFamily::Scad => {
                let a = self.shape;
                Ok(if t <= l {
                    l
                } else {
                    (a * l - t).max(0.0) / (a - 1.0)
                })
            }
            PenaltyFamily::Mcp => Ok((l - t / self.shape).max(0.0)),
            PenaltyFamily::Bridge => {
                let g = self.shape;
                Ok(g * l * (t + self.epsilon).powf(g - 1.0))
            }
            PenaltyFamily::LogPenalty => Ok(l / (t + self.epsilon)),
            PenaltyFamily::AdaptivePower => Ok(l * (t + self.epsilon).powf(-self.shape)),
        }
    }

    /// Weight of coordinate `j` in the linearized (weighted-L1) subproblem,
    /// given the current coefficient `beta0_j`: `w_j = p'_lambda(|beta0_j|)`.
    ///
    /// Returns `+inf` when the derivative diverges at zero (Bridge with
    /// `gamma < 1`, LogPenalty, AdaptivePower, all with `epsilon = 0`), which
    /// pins the coordinate to zero in the subproblem.
    pub fn lla_weight(&self, beta0_j: f64) -> Result<f64, PenaltyError> {
        self.derivative(beta0_j.abs())
    }

    /// Quadratic coefficient `p'(|b|) / (2|b|)` of the local quadratic
    /// majorization, or the drop signal when `|b|` falls below `tau`.
    pub fn lqa_coefficient(&self, beta_kj: f64, tau: f64) -> Result<LqaTerm, PenaltyError> {
        debug_assert!(tau > 0.0);
        let t = beta_kj.abs();
        if t < tau {
            return Ok(LqaTerm::Drop);
        }
        Ok(LqaTerm::Coefficient(self.derivative(t)? / (2.0 * t)))
    }

    /// Supremum of `-p''_lambda(t)` over `t > 0`. Defined for L1, SCAD, MCP.
    pub fn max_concavity(&self) -> Result<f64, PenaltyError> {
        match self.family {
            PenaltyFamily::L1 => Ok(0.0),
            PenaltyFamily::Scad => Ok(1.0 / (self.shape - 1.0)),
            PenaltyFamily::Mcp => Ok(1.0 / self.shape),
            other => Err(PenaltyError::ConcavityUndefined(other.name())),
        }
    }
}

/// One diagonal term of the LQA ridge subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LqaTerm {
    /// Coefficient magnitude fell below the thresholding constant; the
    /// variable is removed (permanently, under the LQA iteration rule).
    Drop,
    /// Ridge coefficient `p'(|b|) / (2|b|)`.
    Coefficient(f64),
}

impl LqaTerm {
    pub fn coefficient(&self) -> Option<f64> {
        match self {
            LqaTerm::Drop => None,
            LqaTerm::Coefficient(c) => Some(*c),
        }
    }
}
