//! Approximate multi-medium Riemann solver for hydro-elastoplastic solids
//! with general Mie-Gruneisen equations of state, and a one-dimensional
//! sharp-interface finite-volume simulator built on top of it.

pub mod eos;
pub mod error;
pub mod ode;
pub mod plasticity;
pub mod riemann;
pub mod wavecurves;

pub use error::{Error, Result};

/// A medium: equation of state plus deviatoric constitutive model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub eos: eos::EosParams,
    pub deviatoric: plasticity::DeviatoricModel,
}

impl Material {
    pub fn new(eos: eos::EosParams, deviatoric: plasticity::DeviatoricModel) -> Self {
        Material { eos, deviatoric }
    }

    pub fn fluid(eos: eos::EosParams) -> Self {
        Material { eos, deviatoric: plasticity::DeviatoricModel::fluid() }
    }

    pub fn validate(&self) -> Result<()> {
        self.eos.validate()?;
        self.deviatoric.validate()
    }
}
