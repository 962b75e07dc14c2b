use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::MAX_HERMITE_DEGREE;

/// Recipe for a (photon-added, then photon-subtracted) compass state:
/// four coherent components at `±X0/√2` and `±i X0/√2`, each acted on by
/// `a^q a†^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompassParams {
    pub x0: f64,
    pub p: usize,
    pub q: usize,
}

impl CompassParams {
    pub fn new(x0: f64, p: usize, q: usize) -> Result<Self> {
        let params = Self { x0, p, q };
        params.validate()?;
        Ok(params)
    }

    /// The plain four-component compass state (`p = q = 0`).
    pub fn compass(x0: f64) -> Result<Self> {
        Self::new(x0, 0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() || self.x0 < 0.0 {
            return Err(Error::Config(format!(
                "x0 must be a finite non-negative number, got {}",
                self.x0
            )));
        }
        if self.p > MAX_HERMITE_DEGREE || self.q > MAX_HERMITE_DEGREE {
            return Err(Error::Config(format!(
                "p and q must not exceed {MAX_HERMITE_DEGREE} (got p={}, q={})",
                self.p, self.q
            )));
        }
        if self.x0 == 0.0 && self.q > self.p {
            return Err(Error::Config(format!(
                "x0 = 0 with q > p annihilates the state (p={}, q={})",
                self.p, self.q
            )));
        }
        Ok(())
    }

    pub fn is_pure_compass(&self) -> bool {
        self.p == 0 && self.q == 0
    }
}

/// Thermal bath description. Time is always the dimensionless `τ = ω t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    pub n_bar: f64,
}

impl ReservoirParams {
    pub fn new(n_bar: f64) -> Result<Self> {
        if !n_bar.is_finite() || n_bar < 0.0 {
            return Err(Error::Config(format!(
                "nbar must be a finite non-negative number, got {n_bar}"
            )));
        }
        Ok(Self { n_bar })
    }

    pub fn zero_temperature() -> Self {
        Self { n_bar: 0.0 }
    }

    /// Diffusion coefficient `n̄ + 1/2` of the phase-space Fokker–Planck form.
    pub fn diffusion(&self) -> f64 {
        self.n_bar + 0.5
    }

    /// Linear entropy of the equilibrium state, `2n̄ / (2n̄ + 1)`.
    pub fn equilibrium_linear_entropy(&self) -> f64 {
        2.0 * self.n_bar / (2.0 * self.n_bar + 1.0)
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(CompassParams::new(-1.0, 0, 0).is_err());
        assert!(CompassParams::new(f64::NAN, 0, 0).is_err());
        assert!(CompassParams::new(0.0, 0, 0).is_ok());
        assert!(CompassParams::new(0.0, 1, 2).is_err());
        assert!(CompassParams::new(1.5, 201, 0).is_err());
        assert!(ReservoirParams::new(-0.1).is_err());
        assert_eq!(
            ReservoirParams::new(0.5)
                .unwrap()
                .equilibrium_linear_entropy(),
            0.5
        );
    }
}
