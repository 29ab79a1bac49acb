//! Analytic parameter pack.
//!
//! The nonlinear equation is studied in the regime `alpha in (1,2)`,
//! `beta in (0,1)`, `alpha + beta > 2`. The linear flow alone makes sense for
//! any `alpha in (0,2]`; [`Params::linear_only`] builds a pack for that case
//! (used for the Gaussian `alpha = 2` oracle) and it is rejected by every
//! operation that touches the nonlinearity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents of the equation plus the derived Hölder and decay exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Order of the velocity diffusion `Λ_v^alpha`.
    pub alpha: f64,
    /// Order of the inverse operator `Λ_v^{-beta}` in the drift.
    pub beta: f64,
    /// Spatial dimension; phase space has dimension `2 d`.
    pub d: usize,
    /// Hölder exponent of the solution space.
    pub gamma: f64,
    /// Reduced Hölder exponent `gamma + 1 - alpha` of the force space.
    pub gamma0: f64,
    /// Critical decay exponent `(alpha + beta - 2) / alpha`.
    pub kappa: f64,
    /// Cap on derivative orders in norms and kernel decorations.
    pub max_deriv: usize,
    #[serde(default = "default_true")]
    pub nonlinear: bool,
}

fn default_true() -> bool {
    true
}

impl Default for Params {
    fn default() -> Self {
        Params::new(1.5, 0.8, 1).expect("default parameters are in the admissible regime")
    }
}

impl Params {
    pub const DEFAULT_MAX_DERIV: usize = 3;

    /// Validated pack with `gamma` at the midpoint of `(alpha - 1, 2 - beta)`.
    pub fn new(alpha: f64, beta: f64, d: usize) -> Result<Self> {
        let gamma = 0.5 * (alpha - 1.0 + 2.0 - beta);
        let p = Params {
            alpha,
            beta,
            d,
            gamma,
            gamma0: gamma + 1.0 - alpha,
            kappa: (alpha + beta - 2.0) / alpha,
            max_deriv: Self::DEFAULT_MAX_DERIV,
            nonlinear: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pack for the linear flow only: `alpha in (0, 2]`, no drift.
    pub fn linear_only(alpha: f64, d: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid("alpha", format!("{alpha} is outside (0, 2]")));
        }
        check_dim(d)?;
        Ok(Params {
            alpha,
            beta: 0.0,
            d,
            gamma: 0.5,
            gamma0: 0.5,
            kappa: 0.0,
            max_deriv: Self::DEFAULT_MAX_DERIV,
            nonlinear: false,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.gamma0 = gamma + 1.0 - self.alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_deriv(mut self, max_deriv: usize) -> Result<Self> {
        self.max_deriv = max_deriv;
        self.validate()?;
        Ok(self)
    }

    /// Checks every regime invariant. Linear-only packs only check `alpha` and `d`.
    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        if self.max_deriv < 1 {
            return Err(invalid("max_deriv", "must be at least 1".into()));
        }
        if !self.nonlinear {
            if !(self.alpha > 0.0 && self.alpha <= 2.0) {
                return Err(invalid("alpha", format!("{} is outside (0, 2]", self.alpha)));
            }
            return Ok(());
        }
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(invalid("alpha", format!("{} is outside (1, 2)", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("beta", format!("{} is outside (0, 1)", self.beta)));
        }
        if self.alpha + self.beta <= 2.0 {
            return Err(invalid(
                "beta",
                format!("alpha + beta = {} must exceed 2", self.alpha + self.beta),
            ));
        }
        let kappa = (self.alpha + self.beta - 2.0) / self.alpha;
        if (self.kappa - kappa).abs() > 1e-14 || self.kappa <= 0.0 {
            return Err(invalid("kappa", format!("{} != (alpha + beta - 2)/alpha", self.kappa)));
        }
        if !(self.gamma > self.alpha - 1.0 && self.gamma < 2.0 - self.beta) {
            return Err(invalid(
                "gamma",
                format!(
                    "{} is outside (alpha - 1, 2 - beta) = ({}, {})",
                    self.gamma,
                    self.alpha - 1.0,
                    2.0 - self.beta
                ),
            ));
        }
        let gamma0 = self.gamma + 1.0 - self.alpha;
        if (self.gamma0 - gamma0).abs() > 1e-14 {
            return Err(invalid("gamma0", format!("{} != gamma + 1 - alpha", self.gamma0)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 < self.gamma.min(1.0)) {
            return Err(invalid("gamma0", format!("{} is outside (0, min(1, gamma))", self.gamma0)));
        }
        Ok(())
    }

    /// Fails unless the pack describes the full nonlinear regime.
    pub fn require_nonlinear(&self) -> Result<()> {
        if !self.nonlinear {
            return Err(invalid("beta", "linear-only parameter pack used with the drift".into()));
        }
        self.validate()
    }

    /// Seed-norm weight exponent `1 + (beta - 2)/alpha`.
    pub fn seed_exponent(&self) -> f64 {
        1.0 + (self.beta - 2.0) / self.alpha
    }

    /// Kinetic length scales `(t^{1+1/alpha}, t^{1/alpha})` of the kernel at time `t`.
    pub fn kinetic_scales(&self, t: f64) -> (f64, f64) {
        let v = t.powf(1.0 / self.alpha);
        (t * v, v)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(invalid("d", format!("{d} is not 1 or 2")))
    }
}

fn invalid(field: &'static str, reason: String) -> Error {
    Error::InvalidParams { field, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let p = Params::default();
        assert_eq!(p.alpha, 1.5);
        assert_eq!(p.beta, 0.8);
        assert!((p.kappa - 0.2).abs() < 1e-15);
        assert!((p.gamma - 0.85).abs() < 1e-15);
        assert!((p.gamma0 - 0.35).abs() < 1e-15);
        assert!((p.seed_exponent() - p.kappa).abs() < 1e-15);
    }

    #[test]
    fn regime_violations_are_rejected() {
        assert!(Params::new(2.0, 0.5, 1).is_err());
        assert!(Params::new(1.5, 0.4, 1).is_err());
        assert!(Params::new(1.5, 1.0, 1).is_err());
        assert!(Params::new(1.5, 0.8, 3).is_err());
        assert!(Params::default().with_gamma(0.4).is_err());
        assert!(Params::default().with_gamma(1.25).is_err());
        assert!(Params::default().with_max_deriv(0).is_err());
    }

    #[test]
    fn linear_only_accepts_gaussian_case() {
        let p = Params::linear_only(2.0, 1).unwrap();
        assert!(p.validate().is_ok());
        assert!(p.require_nonlinear().is_err());
    }
}
