//! Analytic one-dimensional potentials with closed-form derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::grid::Grid;

/// External potential `U(x)`.
///
/// In run configs: `{"type": "double_well", "alpha": 1.0, "beta": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Free,
    /// `k x^2 / 2`
    Harmonic { k: f64 },
    /// `U0 cos(q x)`
    Cosine { u0: f64, q: f64 },
    /// `-2 alpha x^2 + beta x^4`; minima at `+-sqrt(alpha / beta)`, barrier `alpha^2 / beta`.
    DoubleWell { alpha: f64, beta: f64 },
    /// `m g x`
    LinearGravity { mg: f64 },
}

fn require_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: "must be finite".into() })
    }
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Free => Ok(()),
            Potential::Harmonic { k } => require_positive("k", k),
            Potential::Cosine { u0, q } => {
                require_finite("u0", u0)?;
                require_positive("q", q)
            }
            Potential::DoubleWell { alpha, beta } => {
                require_positive("alpha", alpha)?;
                require_positive("beta", beta)
            }
            Potential::LinearGravity { mg } => require_finite("mg", mg),
        }
    }

    /// `n`-th derivative of `U` at `x`; `n = 0` is the value.
    pub fn derivative(&self, x: f64, n: u32) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { k } => match n {
                0 => 0.5 * k * x * x,
                1 => k * x,
                2 => k,
                _ => 0.0,
            },
            Potential::Cosine { u0, q } => {
                // d^n/dx^n cos(qx) = q^n cos(qx + n pi/2)
                let phase = q * x;
                let amp = u0 * q.powi(n as i32);
                match n % 4 {
                    0 => amp * phase.cos(),
                    1 => -amp * phase.sin(),
                    2 => -amp * phase.cos(),
                    _ => amp * phase.sin(),
                }
            }
            Potential::DoubleWell { alpha, beta } => match n {
                0 => x * x * (beta * x * x - 2.0 * alpha),
                1 => 4.0 * beta * x * x * x - 4.0 * alpha * x,
                2 => 12.0 * beta * x * x - 4.0 * alpha,
                3 => 24.0 * beta * x,
                4 => 24.0 * beta,
                _ => 0.0,
            },
            Potential::LinearGravity { mg } => match n {
                0 => mg * x,
                1 => mg,
                _ => 0.0,
            },
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        self.derivative(x, 1)
    }

    #[inline]
    pub fn laplacian(&self, x: f64) -> f64 {
        self.derivative(x, 2)
    }

    #[inline]
    pub fn bilaplacian(&self, x: f64) -> f64 {
        self.derivative(x, 4)
    }

    /// Values of the `n`-th derivative at every grid point.
    pub fn sample_on_grid(&self, grid: &Grid, n: u32) -> Vec<f64> {
        grid.sample(|x| self.derivative(x, n))
    }

    /// True when the third and higher derivatives vanish identically.
    pub fn is_at_most_quadratic(&self) -> bool {
        !matches!(self, Potential::Cosine { .. } | Potential::DoubleWell { .. })
    }
}
