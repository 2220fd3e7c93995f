//! Mie-Gruneisen equation-of-state family.
//!
//! Every variant fits the general form
//!
//! ```text
//! p(rho, e) = Gamma(rho) * rho * e + h(rho)
//! ```
//!
//! where `Gamma` is the Gruneisen coefficient and `h` the cold-curve
//! pressure. The wave-curve machinery only ever touches the EOS through
//! [`EosParams::coefficients`], so adding a variant means filling in the
//! six coefficient values and their closed-form derivatives.
//!
//! The Murnaghan variant is barotropic: it is represented with
//! `Gamma == 0`, pressure depends on density alone, and energy-dependent
//! operations reject it.

use crate::error::{Error, Result};

/// Parameter set for one Mie-Gruneisen EOS variant. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EosParams {
    IdealGas {
        gamma: f64,
    },
    StiffenedGas {
        gamma: f64,
        p_inf: f64,
    },
    /// Barotropic solid model, p = (K/gamma) [(rho/rho0)^gamma - 1] + p0.
    Murnaghan {
        bulk_k: f64,
        gamma: f64,
        rho0: f64,
        p0: f64,
    },
    /// Piecewise-cubic compaction model with the modified tension branch
    /// p = T1 mu + T2 mu^2 + (B0 + B1 mu) rho0 e, mu = rho/rho0 - 1,
    /// which keeps the sound speed continuous across mu = 0.
    Polynomial {
        a1: f64,
        a2: f64,
        a3: f64,
        t1: f64,
        t2: f64,
        b0: f64,
        b1: f64,
        rho0: f64,
    },
    /// Jones-Wilkins-Lee detonation-product EOS.
    Jwl {
        a1: f64,
        a2: f64,
        omega: f64,
        r1: f64,
        r2: f64,
        rho0: f64,
    },
}

/// Gruneisen coefficient, cold curve, and their first two density
/// derivatives at a fixed density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosCoefficients {
    pub gamma: f64,
    pub dgamma_drho: f64,
    pub d2gamma_drho2: f64,
    pub h: f64,
    pub dh_drho: f64,
    pub d2h_drho2: f64,
}

impl EosParams {
    /// Checks the parameter-range invariants of the variant.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation { field: "eos".into(), message: msg });
        match *self {
            EosParams::IdealGas { gamma } => {
                if !(gamma > 1.0) {
                    return fail(format!("ideal gas requires gamma > 1, got {gamma}"));
                }
            }
            EosParams::StiffenedGas { gamma, p_inf } => {
                if !(gamma > 1.0) {
                    return fail(format!("stiffened gas requires gamma > 1, got {gamma}"));
                }
                if !p_inf.is_finite() {
                    return fail(format!("p_inf must be finite, got {p_inf}"));
                }
            }
            EosParams::Murnaghan { bulk_k, gamma, rho0, .. } => {
                if !(bulk_k > 0.0 && gamma > 0.0 && rho0 > 0.0) {
                    return fail(format!(
                        "Murnaghan requires K, gamma, rho0 > 0, got K={bulk_k}, gamma={gamma}, rho0={rho0}"
                    ));
                }
            }
            EosParams::Polynomial { a1, a2, a3, t1, t2, b0, b1, rho0 } => {
                if !(a1 > 0.0 && a2 > 0.0 && a3 > 0.0 && t1 > 0.0 && rho0 > 0.0) {
                    return fail("polynomial requires A1, A2, A3, T1, rho0 > 0".into());
                }
                if !(t2 >= 0.0) {
                    return fail(format!("polynomial requires T2 >= 0, got {t2}"));
                }
                if !(b1 <= b0 && b0 <= b1 + 2.0) {
                    return fail(format!("polynomial requires B1 <= B0 <= B1 + 2, got B0={b0}, B1={b1}"));
                }
                if !(t1 >= 2.0 * t2) {
                    return fail(format!("polynomial requires T1 >= 2 T2, got T1={t1}, T2={t2}"));
                }
            }
            EosParams::Jwl { a1, a2, omega, r1, r2, rho0 } => {
                if !(a1 > 0.0 && a2 > 0.0 && omega > 0.0 && r1 > 0.0 && r2 > 0.0 && rho0 > 0.0) {
                    return fail("JWL requires all parameters > 0".into());
                }
                if !(r1 > r2) {
                    return fail(format!("JWL requires R1 > R2, got R1={r1}, R2={r2}"));
                }
            }
        }
        Ok(())
    }

    /// Gamma(rho), h(rho) and their first two derivatives.
    ///
    /// The polynomial branch point rho = rho0 (mu = 0) evaluates on the
    /// compression branch; both branches agree in value there.
    pub fn coefficients(&self, rho: f64) -> Result<EosCoefficients> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("density must be positive, got {rho}")));
        }
        let c = match *self {
            EosParams::IdealGas { gamma } => EosCoefficients {
                gamma: gamma - 1.0,
                dgamma_drho: 0.0,
                d2gamma_drho2: 0.0,
                h: 0.0,
                dh_drho: 0.0,
                d2h_drho2: 0.0,
            },
            EosParams::StiffenedGas { gamma, p_inf } => EosCoefficients {
                gamma: gamma - 1.0,
                dgamma_drho: 0.0,
                d2gamma_drho2: 0.0,
                h: -gamma * p_inf,
                dh_drho: 0.0,
                d2h_drho2: 0.0,
            },
            EosParams::Murnaghan { bulk_k, gamma, rho0, p0 } => {
                let x = rho / rho0;
                EosCoefficients {
                    gamma: 0.0,
                    dgamma_drho: 0.0,
                    d2gamma_drho2: 0.0,
                    h: bulk_k / gamma * (x.powf(gamma) - 1.0) + p0,
                    dh_drho: bulk_k / rho0 * x.powf(gamma - 1.0),
                    d2h_drho2: bulk_k * (gamma - 1.0) / (rho0 * rho0) * x.powf(gamma - 2.0),
                }
            }
            EosParams::Polynomial { a1, a2, a3, t1, t2, b0, b1, rho0 } => {
                let mu = rho / rho0 - 1.0;
                let (h, dh, ddh) = if mu >= 0.0 {
                    (
                        a1 * mu + a2 * mu * mu + a3 * mu * mu * mu,
                        (a1 + 2.0 * a2 * mu + 3.0 * a3 * mu * mu) / rho0,
                        (2.0 * a2 + 6.0 * a3 * mu) / (rho0 * rho0),
                    )
                } else {
                    (
                        t1 * mu + t2 * mu * mu,
                        (t1 + 2.0 * t2 * mu) / rho0,
                        2.0 * t2 / (rho0 * rho0),
                    )
                };
                EosCoefficients {
                    gamma: b1 + (b0 - b1) * rho0 / rho,
                    dgamma_drho: -(b0 - b1) * rho0 / (rho * rho),
                    d2gamma_drho2: 2.0 * (b0 - b1) * rho0 / (rho * rho * rho),
                    h,
                    dh_drho: dh,
                    d2h_drho2: ddh,
                }
            }
            EosParams::Jwl { a1, a2, omega, r1, r2, rho0 } => {
                let term = |a: f64, r: f64| {
                    let z = r * rho0 / rho;
                    let e = (-z).exp();
                    let h = a * (1.0 - omega * rho / (r * rho0)) * e;
                    let dh = a * (r * rho0 / (rho * rho) - omega / rho - omega / (r * rho0)) * e;
                    let ddh = a * r * rho0 / (rho * rho * rho) * (r * rho0 / rho - 2.0 - omega) * e;
                    (h, dh, ddh)
                };
                let (h1, dh1, ddh1) = term(a1, r1);
                let (h2, dh2, ddh2) = term(a2, r2);
                EosCoefficients {
                    gamma: omega,
                    dgamma_drho: 0.0,
                    d2gamma_drho2: 0.0,
                    h: h1 + h2,
                    dh_drho: dh1 + dh2,
                    d2h_drho2: ddh1 + ddh2,
                }
            }
        };
        Ok(c)
    }

    /// p = Gamma(rho) rho e + h(rho). Murnaghan ignores e.
    pub fn pressure(&self, rho: f64, e: f64) -> Result<f64> {
        let c = self.coefficients(rho)?;
        Ok(c.gamma * rho * e + c.h)
    }

    /// Inverts the pressure law: e = (p - h(rho)) / (Gamma(rho) rho).
    pub fn internal_energy(&self, rho: f64, p: f64) -> Result<f64> {
        if matches!(self, EosParams::Murnaghan { .. }) {
            return Err(Error::Unsupported(
                "Murnaghan EOS is barotropic; internal energy is not determined by pressure".into(),
            ));
        }
        let c = self.coefficients(rho)?;
        let gr = c.gamma * rho;
        if gr == 0.0 {
            return Err(Error::Unsupported("Gamma(rho) rho vanished; cannot invert EOS".into()));
        }
        Ok((p - c.h) / gr)
    }

    /// Squared sound speed c^2 = dp/drho|_e + (p/rho^2) dp/de.
    ///
    /// May be negative for states outside the physically admissible
    /// region; callers that require hyperbolicity should use
    /// [`EosParams::sound_speed_squared`].
    pub fn sound_speed_squared_raw(&self, rho: f64, p: f64) -> Result<f64> {
        let c = self.coefficients(rho)?;
        if c.gamma == 0.0 {
            // barotrope: c^2 = h'(rho)
            return Ok(c.dh_drho);
        }
        let e = (p - c.h) / (c.gamma * rho);
        Ok((c.gamma + rho * c.dgamma_drho) * e + c.dh_drho + c.gamma * p / rho)
    }

    /// Squared sound speed; errors if the state is not hyperbolic.
    pub fn sound_speed_squared(&self, rho: f64, p: f64) -> Result<f64> {
        let c2 = self.sound_speed_squared_raw(rho, p)?;
        if !(c2 > 0.0) {
            return Err(Error::NonHyperbolic { rho, p, c2 });
        }
        Ok(c2)
    }

    /// Limiting Gruneisen coefficient as rho -> infinity.
    pub fn gamma_infinity(&self) -> f64 {
        match *self {
            EosParams::IdealGas { gamma } | EosParams::StiffenedGas { gamma, .. } => gamma - 1.0,
            EosParams::Murnaghan { .. } => 0.0,
            EosParams::Polynomial { b1, .. } => b1,
            EosParams::Jwl { omega, .. } => omega,
        }
    }

    pub fn is_barotropic(&self) -> bool {
        matches!(self, EosParams::Murnaghan { .. })
    }

    /// Samples the convexity conditions C1-C3 on `[rho_lo, rho_hi]`.
    ///
    /// Failures are report content, not errors.
    pub fn validate_convexity(&self, rho_lo: f64, rho_hi: f64, n_samples: usize) -> Result<ConvexityReport> {
        if !(rho_lo > 0.0 && rho_lo < rho_hi) {
            return Err(Error::Domain(format!("need 0 < rho_lo < rho_hi, got [{rho_lo}, {rho_hi}]")));
        }
        if n_samples < 2 {
            return Err(Error::Domain(format!("need at least 2 samples, got {n_samples}")));
        }

        let gamma_inf = self.gamma_infinity();
        let mut conds = vec![
            ConditionSamples::new("C1: Gamma' <= 0"),
            ConditionSamples::new("C1: (rho Gamma)' >= 0"),
            ConditionSamples::new("C1: (rho Gamma)'' >= 0"),
            ConditionSamples::new("C2: Gamma <= Gamma_inf + 2"),
            ConditionSamples::new("C3: h' >= 0"),
            ConditionSamples::new("C3: h'' >= 0"),
        ];

        for i in 0..n_samples {
            let t = i as f64 / (n_samples - 1) as f64;
            let rho = rho_lo + t * (rho_hi - rho_lo);
            let c = self.coefficients(rho)?;
            // slack scaled to the local magnitudes so exact zeros pass
            let tol = |scale: f64| 1e-12 * (1.0 + scale.abs());
            let rg1 = c.gamma + rho * c.dgamma_drho;
            let rg2 = 2.0 * c.dgamma_drho + rho * c.d2gamma_drho2;
            let checks = [
                c.dgamma_drho <= tol(c.dgamma_drho),
                rg1 >= -tol(rg1),
                rg2 >= -tol(rg2),
                c.gamma <= gamma_inf + 2.0 + tol(c.gamma),
                c.dh_drho >= -tol(c.dh_drho),
                c.d2h_drho2 >= -tol(c.d2h_drho2),
            ];
            for (cond, ok) in conds.iter_mut().zip(checks) {
                cond.push(rho, ok);
            }
        }

        let gamma_inf_positive = gamma_inf > 0.0;
        let jwl = if let EosParams::Jwl { a1, a2, omega, r1, r2, rho0 } = *self {
            let alpha = a2 * r2 * r2 / (a1 * r1 * (r1 - r2))
                * (((2.0 + omega) * (r1 - r2) - r2) / r2).exp();
            Some(JwlBound { alpha, rho_limit: r1 * rho0 / (2.0 + omega + alpha) })
        } else {
            None
        };
        let polynomial_rho_floor = if let EosParams::Polynomial { b0, b1, rho0, .. } = *self {
            Some(b0 * rho0 / (b1 + 2.0))
        } else {
            None
        };

        let all_hold = gamma_inf_positive && conds.iter().all(|c| c.holds_everywhere);
        Ok(ConvexityReport { conditions: conds, gamma_inf, gamma_inf_positive, jwl, polynomial_rho_floor, all_hold })
    }
}

/// Pass/fail runs of one convexity condition over a sampled density range.
#[derive(Debug, Clone)]
pub struct ConditionSamples {
    pub label: &'static str,
    /// Maximal sub-ranges (rho_from, rho_to, holds) in sample order.
    pub runs: Vec<(f64, f64, bool)>,
    pub holds_everywhere: bool,
}

impl ConditionSamples {
    fn new(label: &'static str) -> Self {
        ConditionSamples { label, runs: Vec::new(), holds_everywhere: true }
    }

    fn push(&mut self, rho: f64, ok: bool) {
        if !ok {
            self.holds_everywhere = false;
        }
        match self.runs.last_mut() {
            Some((_, hi, holds)) if *holds == ok => *hi = rho,
            _ => self.runs.push((rho, rho, ok)),
        }
    }
}

/// JWL sufficient-condition data: C3 holds for rho <= rho_limit.
#[derive(Debug, Clone, Copy)]
pub struct JwlBound {
    pub alpha: f64,
    pub rho_limit: f64,
}

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub conditions: Vec<ConditionSamples>,
    pub gamma_inf: f64,
    /// C2 also requires Gamma_inf > 0 (fails for the barotropic Murnaghan).
    pub gamma_inf_positive: bool,
    pub jwl: Option<JwlBound>,
    pub polynomial_rho_floor: Option<f64>,
    pub all_hold: bool,
}

impl std::fmt::Display for ConvexityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Gamma_inf = {} ({})", self.gamma_inf, if self.gamma_inf_positive { "positive" } else { "NOT positive" })?;
        for c in &self.conditions {
            writeln!(f, "{}: {}", c.label, if c.holds_everywhere { "holds on the whole range" } else { "VIOLATED" })?;
            if !c.holds_everywhere {
                for (lo, hi, ok) in &c.runs {
                    writeln!(f, "    [{lo:.6e}, {hi:.6e}] {}", if *ok { "holds" } else { "fails" })?;
                }
            }
        }
        if let Some(j) = &self.jwl {
            writeln!(f, "JWL bound: alpha = {:.6e}, C3 guaranteed for rho <= {:.6e}", j.alpha, j.rho_limit)?;
        }
        if let Some(r) = self.polynomial_rho_floor {
            writeln!(f, "Polynomial C2 density floor: rho >= {r:.6e}")?;
        }
        writeln!(f, "overall: {}", if self.all_hold { "all conditions hold" } else { "violations found" })
    }
}
