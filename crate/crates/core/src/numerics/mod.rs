//! Double-precision kernels: adaptive ODE integration with dense output and
//! event location, bracketed root refinement, and adaptive quadrature.
//!
//! Everything here is a pure function of its inputs.

mod ode;
mod quad;
mod roots;

pub use ode::{integrate_ivp, DenseTrajectory, EventFn, EventHit, IvpSolution, IvpStats};
pub use quad::{integrate_adaptive, integrate_segments};
pub use roots::find_root_bracketed;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error targets and work budget shared by all kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative error target.
    pub rel: f64,
    /// Absolute error target.
    pub abs: f64,
    /// Step (ODE), iteration (root) or evaluation (quadrature) budget.
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

impl Tolerances {
    pub fn new(rel: f64, abs: f64, max_steps: usize) -> Result<Self> {
        let tol = Self {
            rel,
            abs,
            max_steps,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel > 0.0 && self.rel.is_finite()) {
            return Err(Error::domain(format!(
                "rel tolerance must be > 0, got {}",
                self.rel
            )));
        }
        if !(self.abs > 0.0 && self.abs.is_finite()) {
            return Err(Error::domain(format!(
                "abs tolerance must be > 0, got {}",
                self.abs
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::domain("max_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    /// Same relative target, absolute target rescaled to a problem whose
    /// natural magnitude is `scale`.
    pub fn scaled(self, scale: f64) -> Self {
        let scale = scale.abs();
        if scale > 0.0 && scale.is_finite() {
            self.with_abs(self.abs * scale)
        } else {
            self
        }
    }
}
