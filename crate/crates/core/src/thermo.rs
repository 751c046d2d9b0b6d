//! Gibbs-state arithmetic for a two-level system with ground energy 0 and
//! excited energy `E`.
//!
//! Energies are in natural units with the inverse temperature carried
//! explicitly; entropies are in nats. The excited level may sit at a negative
//! energy, only the boundary energy of a [`ThermalContext`] is constrained to be
//! non-negative.

use crate::error::{domain, ensure_finite, ensure_probability, Result};

/// The fixed environment of every computation: bath inverse temperature and
/// the boundary (initial and final) excited-level energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalContext {
    beta: f64,
    e0: f64,
}

impl ThermalContext {
    pub fn new(beta: f64, e0: f64) -> Result<Self> {
        ensure_finite("beta", beta)?;
        ensure_finite("e0", e0)?;
        if beta <= 0.0 {
            return domain(format!("beta must be positive, got {beta}"));
        }
        if e0 < 0.0 {
            return domain(format!("e0 must be non-negative, got {e0}"));
        }
        Ok(Self { beta, e0 })
    }

    /// Builds a context from the Gibbs population at the boundary energy.
    pub fn from_gibbs_population(beta: f64, p_beta: f64) -> Result<Self> {
        if !(p_beta > 0.0 && p_beta <= 0.5) {
            return domain(format!("p_beta must lie in (0, 1/2], got {p_beta}"));
        }
        let probe = Self::new(beta, 0.0)?;
        let e0 = probe.energy_of_population(p_beta)?.max(0.0);
        Self::new(beta, e0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// Excited population of the Gibbs state at the boundary energy.
    pub fn p_beta(&self) -> f64 {
        self.g(self.e0)
    }

    /// Excited-level population of the Gibbs state at energy `e`.
    pub fn gibbs_population(&self, e: f64) -> Result<f64> {
        ensure_finite("energy", e)?;
        Ok(self.g(e))
    }

    /// The energy at which the Gibbs state has excited population `p`.
    pub fn energy_of_population(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("population must lie strictly inside (0, 1), got {p}"));
        }
        Ok(self.energy_unchecked(p))
    }

    pub fn partition_function(&self, e: f64) -> Result<f64> {
        ensure_finite("energy", e)?;
        Ok(1.0 + (-self.beta * e).exp())
    }

    /// Free energy `p E - S / beta` of a diagonal state at excited energy `e`.
    pub fn free_energy(&self, state: QubitState, e: f64) -> Result<f64> {
        ensure_finite("energy", e)?;
        Ok(state.p_excited() * e - state.entropy() / self.beta)
    }

    /// Free energy of the Gibbs state at energy `e`, i.e. `-ln(Z_E) / beta`.
    pub fn gibbs_free_energy(&self, e: f64) -> Result<f64> {
        ensure_finite("energy", e)?;
        Ok(-self.ln_z(e) / self.beta)
    }

    /// Integral of the Gibbs curve from `e_from` to `e_to`, which equals the
    /// Gibbs free-energy difference `F(e_to) - F(e_from)`.
    pub fn gibbs_integral(&self, e_from: f64, e_to: f64) -> Result<f64> {
        ensure_finite("e_from", e_from)?;
        ensure_finite("e_to", e_to)?;
        Ok(self.integral(e_from, e_to))
    }

    pub(crate) fn g(&self, e: f64) -> f64 {
        let x = self.beta * e;
        if x >= 0.0 {
            let t = (-x).exp();
            t / (1.0 + t)
        } else {
            1.0 / (1.0 + x.exp())
        }
    }

    pub(crate) fn energy_unchecked(&self, p: f64) -> f64 {
        ((-p).ln_1p() - p.ln()) / self.beta
    }

    /// `ln(1 + exp(-beta e))` without overflow.
    pub(crate) fn ln_z(&self, e: f64) -> f64 {
        let y = -self.beta * e;
        if y > 0.0 {
            y + (-y).exp().ln_1p()
        } else {
            y.exp().ln_1p()
        }
    }

    pub(crate) fn integral(&self, e_from: f64, e_to: f64) -> f64 {
        if e_from == e_to {
            return 0.0;
        }
        (self.ln_z(e_from) - self.ln_z(e_to)) / self.beta
    }
}

/// A state diagonal in the energy basis, `(1 - p, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    p_excited: f64,
}

impl QubitState {
    pub fn new(p_excited: f64) -> Result<Self> {
        ensure_probability("excited population", p_excited)?;
        Ok(Self { p_excited })
    }

    pub fn ground() -> Self {
        Self { p_excited: 0.0 }
    }

    pub fn excited() -> Self {
        Self { p_excited: 1.0 }
    }

    /// Gibbs state of the Hamiltonian with excited energy `e`.
    pub fn gibbs(ctx: &ThermalContext, e: f64) -> Result<Self> {
        Ok(Self {
            p_excited: ctx.gibbs_population(e)?,
        })
    }

    pub(crate) fn clamped(p: f64) -> Self {
        Self {
            p_excited: p.clamp(0.0, 1.0),
        }
    }

    pub fn p_excited(&self) -> f64 {
        self.p_excited
    }

    /// Populations `(ground, excited)`.
    pub fn populations(&self) -> [f64; 2] {
        [1.0 - self.p_excited, self.p_excited]
    }

    /// Binary Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        binary_entropy(self.p_excited)
    }
}

pub(crate) fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}
