//! Deviatoric constitutive model under the uniaxial-strain closure.
//!
//! The full deviator tensor is `diag(S, -S/2, -S/2)`, so `S:S = 3/2 S^2`
//! and the effective stress is `S_eff = 3/2 |S|`. The von Mises criterion
//! splits material response into elastic, plastic and fluid phases at the
//! yield limits `Y_E` and `Y_P`. Across an acoustic wave the normal
//! deviator jumps linearly in 1/rho with the phase-frozen stiffness
//! `beta = rho_k mu`.

use crate::eos::EosParams;
use crate::error::{Error, Result};
use crate::ode::{self, RkfOptions};

/// Material response phase per the von Mises criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Elastic,
    Plastic,
    Fluid,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Elastic => "elastic",
            Phase::Plastic => "plastic",
            Phase::Fluid => "fluid",
        }
    }
}

/// Shear moduli and yield limits. `y_p` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviatoricModel {
    pub mu_e: f64,
    pub mu_p: f64,
    pub y_e: f64,
    pub y_p: f64,
    /// Direct overrides for beta = rho mu, when the problem data
    /// specifies beta instead of a shear modulus.
    pub beta_e_override: Option<f64>,
    pub beta_p_override: Option<f64>,
}

impl DeviatoricModel {
    pub fn fluid() -> Self {
        DeviatoricModel { mu_e: 0.0, mu_p: 0.0, y_e: 0.0, y_p: 0.0, beta_e_override: None, beta_p_override: None }
    }

    /// Hooke's law with no yield.
    pub fn elastic(mu: f64) -> Self {
        DeviatoricModel {
            mu_e: mu,
            mu_p: mu,
            y_e: f64::INFINITY,
            y_p: f64::INFINITY,
            beta_e_override: None,
            beta_p_override: None,
        }
    }

    /// Perfect elastoplasticity: no hardening, plastic flow never exhausts.
    pub fn perfect_plastic(mu_e: f64, y_e: f64) -> Self {
        DeviatoricModel { mu_e, mu_p: 0.0, y_e, y_p: f64::INFINITY, beta_e_override: None, beta_p_override: None }
    }

    pub fn hardening(mu_e: f64, mu_p: f64, y_e: f64, y_p: f64) -> Self {
        DeviatoricModel { mu_e, mu_p, y_e, y_p, beta_e_override: None, beta_p_override: None }
    }

    pub fn with_beta_e(mut self, beta_e: f64) -> Self {
        self.beta_e_override = Some(beta_e);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.mu_p && self.mu_p <= self.mu_e) {
            return Err(Error::Validation {
                field: "deviatoric".into(),
                message: format!("need 0 <= mu_p <= mu_e, got mu_p={}, mu_e={}", self.mu_p, self.mu_e),
            });
        }
        if !(0.0 <= self.y_e && self.y_e <= self.y_p) {
            return Err(Error::Validation {
                field: "deviatoric".into(),
                message: format!("need 0 <= y_e <= y_p, got y_e={}, y_p={}", self.y_e, self.y_p),
            });
        }
        Ok(())
    }

    pub fn is_fluid(&self) -> bool {
        self.mu_e == 0.0 && self.beta_e_override.unwrap_or(0.0) == 0.0 && self.y_p == 0.0
    }
}

/// beta of the requested phase, frozen at the generating density.
pub fn beta(model: &DeviatoricModel, rho_k: f64, phase: Phase) -> f64 {
    match phase {
        Phase::Elastic => model.beta_e_override.unwrap_or(rho_k * model.mu_e),
        Phase::Plastic => model.beta_p_override.unwrap_or(rho_k * model.mu_p),
        Phase::Fluid => 0.0,
    }
}

/// Effective stress 3/2 |S| of the uniaxial deviator state.
pub fn s_eff(s: f64) -> f64 {
    1.5 * s.abs()
}

const FLUID_PHASE_REL_TOL: f64 = 1e-9;

/// Phase of a state with effective stress `s_eff`.
pub fn classify_phase(s_eff: f64, model: &DeviatoricModel) -> Result<Phase> {
    debug_assert!(s_eff >= 0.0);
    if model.y_p.is_finite() && s_eff >= model.y_p * (1.0 - FLUID_PHASE_REL_TOL) - f64::MIN_POSITIVE {
        if s_eff <= model.y_p * (1.0 + FLUID_PHASE_REL_TOL) {
            return Ok(Phase::Fluid);
        }
        return Err(Error::ConstitutiveViolation { s_eff, y_p: model.y_p });
    }
    if s_eff <= model.y_e {
        Ok(Phase::Elastic)
    } else {
        Ok(Phase::Plastic)
    }
}

/// Normal deviator after an acoustic wave: S = S_k + 4 beta/3 (1/rho - 1/rho_k).
pub fn deviator_after_wave(s_k: f64, beta: f64, rho_k: f64, rho: f64) -> f64 {
    s_k + 4.0 * beta / 3.0 * (1.0 / rho - 1.0 / rho_k)
}

/// One side of a Riemann problem: density, normal velocity, pressure and
/// normal deviator component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub s: f64,
}

impl SideState {
    pub fn new(rho: f64, u: f64, p: f64, s: f64) -> Self {
        SideState { rho, u, p, s }
    }

    /// Negative normal Cauchy stress q = p - S.
    pub fn q(&self) -> f64 {
        self.p - self.s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Domain(format!("density must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

/// Kind of yield-limit state along a wave curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    ElasticCompression,
    ElasticTension,
    PlasticCompression,
    PlasticTension,
}

impl LimitKind {
    pub fn is_compression(&self) -> bool {
        matches!(self, LimitKind::ElasticCompression | LimitKind::PlasticCompression)
    }

    pub fn is_plastic(&self) -> bool {
        matches!(self, LimitKind::PlasticCompression | LimitKind::PlasticTension)
    }
}

/// State on a wave curve where the effective stress first reaches a yield
/// limit; waypoint for split waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitState {
    pub kind: LimitKind,
    pub rho: f64,
    pub p: f64,
    pub s: f64,
    pub q: f64,
}

/// Densities where `S_eff` first reaches `y` along jumps from
/// `(rho_g, s_g)` with stiffness `beta`: (compression, tension).
///
/// `None` marks an unreachable limit (infinite yield). Zero stiffness with
/// a finite yield is degenerate: the segment has zero length and both
/// limits collapse onto the generating density.
pub(crate) fn yield_limit_densities(
    rho_g: f64,
    s_g: f64,
    beta: f64,
    y: f64,
) -> Result<(Option<f64>, Option<f64>)> {
    if !(rho_g > 0.0) {
        return Err(Error::Domain(format!("density must be positive, got {rho_g}")));
    }
    if y.is_infinite() {
        return Ok((None, None));
    }
    if beta == 0.0 {
        return Ok((Some(rho_g), Some(rho_g)));
    }
    let s_dot_s = 1.5 * s_g * s_g;
    let disc = s_g * s_g + 4.0 / 9.0 * y * y - 2.0 / 3.0 * s_dot_s;
    if disc < 0.0 {
        return Err(Error::LimitUndefined(format!(
            "negative discriminant {disc} (S = {s_g}, Y = {y}); state already past yield"
        )));
    }
    let root = disc.sqrt();
    let k = 3.0 / (4.0 * beta);
    let inv_c = 1.0 / rho_g - k * s_g - k * root;
    let inv_t = 1.0 / rho_g - k * s_g + k * root;
    let check = |inv: f64, which: &str| -> Result<f64> {
        if inv <= 0.0 {
            return Err(Error::LimitUndefined(format!(
                "{which} limit has non-positive reciprocal density {inv}; yield Y = {y} inconsistent with S = {s_g}"
            )));
        }
        Ok(1.0 / inv)
    };
    Ok((Some(check(inv_c, "compression")?), Some(check(inv_t, "tension")?)))
}

/// Solid densities at the elastic limits of compression and tension.
pub fn elastic_limit_densities(
    state: &SideState,
    model: &DeviatoricModel,
) -> Result<(Option<f64>, Option<f64>)> {
    let b = beta(model, state.rho, Phase::Elastic);
    yield_limit_densities(state.rho, state.s, b, model.y_e)
}

/// Solid densities at the plastic limits, chained from the elastic limit
/// states (the generating state for rho_PC is the compression elastic
/// limit, not the raw initial state).
pub fn plastic_limit_densities(
    state: &SideState,
    model: &DeviatoricModel,
) -> Result<(Option<f64>, Option<f64>)> {
    if model.y_p.is_infinite() {
        return Ok((None, None));
    }
    let beta_e = beta(model, state.rho, Phase::Elastic);
    let beta_p = beta(model, state.rho, Phase::Plastic);
    let (rho_c, rho_t) = yield_limit_densities(state.rho, state.s, beta_e, model.y_e)?;
    let chain = |rho_limit: Option<f64>, compression: bool| -> Result<Option<f64>> {
        let Some(rho_l) = rho_limit else { return Ok(None) };
        let s_l = deviator_after_wave(state.s, beta_e, state.rho, rho_l);
        let pair = yield_limit_densities(rho_l, s_l, beta_p, model.y_p)?;
        Ok(if compression { pair.0 } else { pair.1 })
    };
    Ok((chain(rho_c, true)?, chain(rho_t, false)?))
}

/// Hugoniot pressure at density `rho` for a shock from base state
/// `(rho_b, p_b)`. Barotropic EOS collapses to p = h(rho).
pub fn hugoniot_pressure(eos: &EosParams, rho_b: f64, p_b: f64, rho: f64) -> Result<f64> {
    let cb = eos.coefficients(rho_b)?;
    let c = eos.coefficients(rho)?;
    if cb.gamma == 0.0 {
        return Ok(c.h);
    }
    let denom = cb.gamma * ((2.0 + c.gamma) * rho_b - c.gamma * rho);
    if denom <= 0.0 {
        return Err(Error::LocusDegenerate { rho });
    }
    Ok((2.0 * cb.gamma * rho_b * c.h + 2.0 * c.gamma * rho * (p_b - cb.h)
        + cb.gamma * c.gamma * p_b * (rho - rho_b))
        / denom)
}

/// Isentrope pressure at `rho` integrated from `(rho_b, p_b)` along
/// dp/drho = c^2. Barotropic EOS evaluates h(rho) directly.
pub fn isentrope_pressure(eos: &EosParams, rho_b: f64, p_b: f64, rho: f64) -> Result<f64> {
    if eos.is_barotropic() {
        return Ok(eos.coefficients(rho)?.h);
    }
    if rho == rho_b {
        return Ok(p_b);
    }
    let mut rhs = |r: f64, y: &[f64; 1]| -> Result<[f64; 1]> { Ok([eos.sound_speed_squared_raw(r, y[0])?]) };
    let out = ode::integrate(&mut rhs, rho_b, rho, [p_b], &RkfOptions::default())
        .map_err(|e| Error::Integration(format!("isentrope from rho={rho_b} to {rho}: {e}")))?;
    Ok(out.y[0])
}

/// Full limit state (rho, p, S, q) of the requested kind.
///
/// Compression limits take the closed-form Hugoniot pressure; tension
/// limits integrate the isentrope. Plastic kinds chain from the elastic
/// limit state.
pub fn limit_state(
    state: &SideState,
    eos: &EosParams,
    model: &DeviatoricModel,
    kind: LimitKind,
) -> Result<LimitState> {
    let beta_e = beta(model, state.rho, Phase::Elastic);
    let beta_p = beta(model, state.rho, Phase::Plastic);

    let elastic_stage = |compression: bool| -> Result<LimitState> {
        let (rho_c, rho_t) = elastic_limit_densities(state, model)?;
        let (rho_l, k) = if compression {
            (rho_c, LimitKind::ElasticCompression)
        } else {
            (rho_t, LimitKind::ElasticTension)
        };
        let rho_l = rho_l.ok_or_else(|| {
            Error::LimitUndefined("elastic limit unreachable (infinite yield or zero stiffness)".into())
        })?;
        let p = if compression {
            hugoniot_pressure(eos, state.rho, state.p, rho_l)?
        } else {
            isentrope_pressure(eos, state.rho, state.p, rho_l)?
        };
        let s = deviator_after_wave(state.s, beta_e, state.rho, rho_l);
        Ok(LimitState { kind: k, rho: rho_l, p, s, q: p - s })
    };

    match kind {
        LimitKind::ElasticCompression => elastic_stage(true),
        LimitKind::ElasticTension => elastic_stage(false),
        LimitKind::PlasticCompression | LimitKind::PlasticTension => {
            let compression = kind == LimitKind::PlasticCompression;
            let base = elastic_stage(compression)?;
            let (rho_pc, rho_pt) = yield_limit_densities(base.rho, base.s, beta_p, model.y_p)?;
            let rho_l = (if compression { rho_pc } else { rho_pt }).ok_or_else(|| {
                Error::LimitUndefined("plastic limit unreachable (infinite yield or zero hardening)".into())
            })?;
            let p = if compression {
                hugoniot_pressure(eos, base.rho, base.p, rho_l)?
            } else {
                isentrope_pressure(eos, base.rho, base.p, rho_l)?
            };
            let s = deviator_after_wave(base.s, beta_p, base.rho, rho_l);
            Ok(LimitState { kind, rho: rho_l, p, s, q: p - s })
        }
    }
}
