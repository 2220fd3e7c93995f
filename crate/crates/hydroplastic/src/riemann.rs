//! The approximate multi-medium Riemann solver.
//!
//! Finds the interface normal stress q* as the zero of the stress
//! function f(q) = f_l(q) + f_r(q) + u_r - u_l by a safeguarded inexact
//! Newton iteration, with per-side branch evaluations supplied by
//! [`WaveSide`]. Assembles the star states and the ordered wave fan, and
//! samples the self-similar solution for reference profiles.

use crate::error::{Error, Result};
use crate::plasticity::{Phase, SideState};
use crate::wavecurves::{BranchEval, TraversedSegment, WaveSide};
use crate::Material;

#[derive(Debug, Clone, Copy)]
pub struct RiemannInput {
    pub left: SideState,
    pub left_material: Material,
    pub right: SideState,
    pub right_material: Material,
    /// Relative termination tolerance on the stress update.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl RiemannInput {
    pub fn new(left: SideState, left_material: Material, right: SideState, right_material: Material) -> Self {
        RiemannInput { left, left_material, right, right_material, tolerance: 1e-10, max_iters: 60 }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    fn p_scale(&self) -> f64 {
        self.left.q().abs().max(self.right.q().abs()).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveType {
    Shock,
    Rarefaction,
}

/// One nonlinear wave of the fan.
#[derive(Debug, Clone, Copy)]
pub struct Wave {
    pub side: Side,
    pub wave_type: WaveType,
    pub phase: Phase,
    pub head_speed: f64,
    pub tail_speed: f64,
    /// Upstream state (away from the interface).
    pub pre: SideState,
    /// Downstream state (toward the interface).
    pub post: SideState,
}

#[derive(Debug, Clone)]
pub struct SideStar {
    pub rho: f64,
    pub p: f64,
    pub s: f64,
    pub waves: Vec<Wave>,
}

/// Solver output: interface stress and velocity, per-side star states and
/// wave fans, and iteration diagnostics.
#[derive(Debug, Clone)]
pub struct StarState {
    pub q_star: f64,
    pub u_star: f64,
    pub left: SideStar,
    pub right: SideStar,
    pub iterations: usize,
    /// |f(q*)| of the final re-evaluation, in velocity units.
    pub residual: f64,
    /// Stress iterates, q_0 first.
    pub trace: Vec<f64>,
}

/// Sample of the self-similar fan at speed coordinate xi/tau.
#[derive(Debug, Clone, Copy)]
pub struct FanSample {
    pub s: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub s_dev: f64,
    pub side: Side,
}

/// Admissibility of the Riemann problem per the vacuum criterion.
pub fn vacuum_check(input: &RiemannInput) -> Result<(bool, f64)> {
    let left = WaveSide::new(input.left, input.left_material)?;
    let right = WaveSide::new(input.right, input.right_material)?;
    let du = input.right.u - input.left.u;
    let f_min = f_at_cutoff(&left, &right, du)?;
    Ok((f_min < 0.0, -f_min))
}

fn f_at_cutoff(left: &WaveSide, right: &WaveSide, du: f64) -> Result<f64> {
    let (q_min_l, f_tail_l) = left.vacuum_tail()?;
    let (q_min_r, f_tail_r) = right.vacuum_tail()?;
    let q_min = q_min_l.max(q_min_r);
    let f_l = if q_min_l >= q_min_r {
        f_tail_l
    } else {
        left.classify_and_eval(q_min, None)?.f
    };
    let f_r = if q_min_r >= q_min_l {
        f_tail_r
    } else {
        right.classify_and_eval(q_min, None)?.f
    };
    Ok(f_l + f_r + du)
}

/// Acoustic initial estimate of the interface stress, clamped above the
/// admissible lower bound.
pub fn initial_guess(input: &RiemannInput) -> Result<f64> {
    let left = WaveSide::new(input.left, input.left_material)?;
    let right = WaveSide::new(input.right, input.right_material)?;
    Ok(acoustic_guess(&left, &right))
}

fn acoustic_guess(left: &WaveSide, right: &WaveSide) -> f64 {
    let zl = left.state.rho * left.signal_speed();
    let zr = right.state.rho * right.signal_speed();
    (zl * right.state.q() + zr * left.state.q() + zl * zr * (left.state.u - right.state.u)) / (zl + zr)
}

pub fn solve(input: &RiemannInput) -> Result<StarState> {
    let left = WaveSide::new(input.left, input.left_material)?;
    let right = WaveSide::new(input.right, input.right_material)?;
    let du = input.right.u - input.left.u;
    let p_scale = input.p_scale();

    // admissibility with a cheap probe first: f is increasing, so any q
    // with f(q) < 0 proves a root above it
    let probe_q = left.state.q().min(right.state.q());
    let probe_f = left.classify_and_eval(probe_q, None)?.f + right.classify_and_eval(probe_q, None)?.f + du;
    let mut lo = if probe_f < 0.0 {
        probe_q
    } else {
        let f_min = f_at_cutoff(&left, &right, du)?;
        if f_min >= 0.0 {
            return Err(Error::Vacuum { f_at_qmin: f_min });
        }
        let (q_min_l, _) = left.vacuum_tail()?;
        let (q_min_r, _) = right.vacuum_tail()?;
        q_min_l.max(q_min_r)
    };
    let mut hi: Option<f64> = None;

    let mut q = acoustic_guess(&left, &right);
    if !(q > lo) {
        q = lo + 1e-6 * p_scale;
    }

    let mut trace = vec![q];
    let mut budget: Option<f64> = None;
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..input.max_iters {
        let eval_l = left.classify_and_eval(q, budget)?;
        let eval_r = right.classify_and_eval(q, budget)?;
        let f = eval_l.f + eval_r.f + du;
        let df = eval_l.df + eval_r.df;
        if f > 0.0 {
            hi = Some(hi.map_or(q, |h: f64| h.min(q)));
        } else {
            lo = lo.max(q);
        }

        let mut q_next = q - f / df;
        let inside = q_next.is_finite() && q_next > lo && hi.map_or(true, |h| q_next < h);
        if !inside {
            q_next = match hi {
                Some(h) => 0.5 * (lo + h),
                // no upper bound yet: expand geometrically above
                None => q + 2.0 * (q - lo).abs().max(p_scale),
            };
        }
        iterations += 1;
        trace.push(q_next);
        let f_scale = eval_l.f.abs() + eval_r.f.abs();
        budget = Some((0.01 * f.abs()).max(1e-13 * f_scale).max(1e-300));

        if (q_next - q).abs() <= input.tolerance * (q_next.abs() + p_scale) {
            q = q_next;
            converged = true;
            break;
        }
        q = q_next;
    }

    if !converged {
        let tail = trace.split_off(trace.len().saturating_sub(8));
        return Err(Error::NonConvergence { iterations, trace: tail });
    }

    // final re-evaluation at the converged stress
    let tight = Some(1e-13 * p_scale);
    let eval_l = left.classify_and_eval(q, tight)?;
    let eval_r = right.classify_and_eval(q, tight)?;
    let residual = (eval_l.f + eval_r.f + du).abs();
    let u_star = 0.5 * (input.left.u + input.right.u + eval_r.f - eval_l.f);

    let left_star = assemble_side(Side::Left, &left, &eval_l, p_scale)?;
    let right_star = assemble_side(Side::Right, &right, &eval_r, p_scale)?;

    let star = StarState {
        q_star: q,
        u_star,
        left: left_star,
        right: right_star,
        iterations,
        residual,
        trace,
    };
    check_fan_order(&star)?;
    Ok(star)
}

fn assemble_side(side: Side, ws: &WaveSide, eval: &BranchEval, p_scale: f64) -> Result<SideStar> {
    let sign = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let u0 = ws.state.u;
    let u_at = |f: f64| u0 + sign * f;
    let mut waves = Vec::new();
    for seg in &eval.segments {
        if (seg.q_to - seg.q_from).abs() <= 1e-13 * p_scale {
            continue;
        }
        let pre = SideState::new(seg.rho_from, u_at(seg.f_from), seg.p_from, seg.s_from);
        let post = SideState::new(seg.rho_to, u_at(seg.f_to), seg.p_to, seg.s_to);
        let (wave_type, head, tail) = if seg.is_shock {
            let j = (seg.q_to - seg.q_from) / (pre.u - post.u);
            let speed = pre.u - j / pre.rho;
            (WaveType::Shock, speed, speed)
        } else {
            let a_pre = char_speed(ws, seg, pre.rho, pre.p)?;
            let a_post = char_speed(ws, seg, post.rho, post.p)?;
            (WaveType::Rarefaction, pre.u + sign * a_pre, post.u + sign * a_post)
        };
        waves.push(Wave { side, wave_type, phase: seg.phase, head_speed: head, tail_speed: tail, pre, post });
    }
    Ok(SideStar { rho: eval.rho, p: eval.p, s: eval.s, waves })
}

fn char_speed(ws: &WaveSide, seg: &TraversedSegment, rho: f64, p: f64) -> Result<f64> {
    let c2 = ws.material.eos.sound_speed_squared_raw(rho, p)?;
    let a2 = c2 + 4.0 * seg.beta / (3.0 * rho * rho);
    if !(a2 > 0.0) {
        return Err(Error::NonHyperbolic { rho, p, c2: a2 });
    }
    Ok(a2.sqrt())
}

fn check_fan_order(star: &StarState) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for w in &star.left.waves {
        if w.head_speed < prev - 1e-9 * (1.0 + prev.abs()) {
            return Err(Error::ClassificationUnsupported(format!(
                "left fan speeds not ordered: head {} after {prev}",
                w.head_speed
            )));
        }
        prev = w.tail_speed.max(w.head_speed);
    }
    let mut prev = f64::INFINITY;
    for w in &star.right.waves {
        if w.head_speed > prev + 1e-9 * (1.0 + prev.abs()) {
            return Err(Error::ClassificationUnsupported(format!(
                "right fan speeds not ordered: head {} after {prev}",
                w.head_speed
            )));
        }
        prev = w.tail_speed.min(w.head_speed);
    }
    Ok(())
}

/// Samples the self-similar fan of a solved Riemann problem.
pub struct FanSampler {
    left: WaveSide,
    right: WaveSide,
    star: StarState,
}

impl FanSampler {
    pub fn new(input: &RiemannInput, star: StarState) -> Result<Self> {
        Ok(FanSampler {
            left: WaveSide::new(input.left, input.left_material)?,
            right: WaveSide::new(input.right, input.right_material)?,
            star,
        })
    }

    pub fn star(&self) -> &StarState {
        &self.star
    }

    /// State at self-similar speed `s`.
    pub fn sample(&self, s: f64) -> Result<FanSample> {
        if s <= self.star.u_star {
            self.sample_side(Side::Left, &self.left, &self.star.left, s)
        } else {
            self.sample_side(Side::Right, &self.right, &self.star.right, s)
        }
    }

    fn sample_side(&self, side: Side, ws: &WaveSide, sstar: &SideStar, s: f64) -> Result<FanSample> {
        let pack = |st: &SideState| FanSample { s, rho: st.rho, u: st.u, p: st.p, s_dev: st.s, side };
        // between the interface and the innermost wave: star state
        let mut state = SideState::new(sstar.rho, self.star.u_star, sstar.p, sstar.s);
        // walk outward from the interface
        for w in sstar.waves.iter().rev() {
            let (inner, outer) = match side {
                Side::Left => (w.tail_speed, w.head_speed),
                Side::Right => (w.head_speed, w.tail_speed),
            };
            let beyond_inner = match side {
                Side::Left => s >= inner,
                Side::Right => s <= inner,
            };
            if beyond_inner {
                return Ok(pack(&state));
            }
            let inside = match side {
                Side::Left => s > outer && s < inner,
                Side::Right => s > inner && s < outer,
            };
            if inside {
                if w.wave_type == WaveType::Shock {
                    // zero width: report the downstream state
                    return Ok(pack(&w.post));
                }
                return self.sample_rarefaction(side, ws, w, s);
            }
            state = w.pre;
        }
        Ok(pack(&state))
    }

    /// Bisection on q inside one rarefaction segment until the
    /// characteristic speed matches `s`.
    fn sample_rarefaction(&self, side: Side, ws: &WaveSide, w: &Wave, s: f64) -> Result<FanSample> {
        let sign = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        let u0 = ws.state.u;
        let lambda_at = |q: f64| -> Result<(f64, SideState)> {
            let eval = ws.classify_and_eval(q, None)?;
            let seg = eval.segments.last().expect("rarefaction has segments");
            let u = u0 + sign * eval.f;
            let a2 = ws.material.eos.sound_speed_squared_raw(eval.rho, eval.p)?
                + 4.0 * seg.beta / (3.0 * eval.rho * eval.rho);
            if !(a2 > 0.0) {
                return Err(Error::Sampling(format!("characteristic speed lost at q = {q}")));
            }
            Ok((u + sign * a2.sqrt(), SideState::new(eval.rho, u, eval.p, eval.s)))
        };
        // q runs from the segment's upstream stress (head) to downstream (tail)
        let (q_head, q_tail) = (w.pre.q(), w.post.q());
        let (lam_head, _) = lambda_at(q_head)?;
        let (lam_tail, _) = lambda_at(q_tail)?;
        if (s - lam_head) * (s - lam_tail) > 0.0 {
            return Err(Error::Sampling(format!(
                "speed {s} not bracketed by rarefaction characteristics [{lam_head}, {lam_tail}]"
            )));
        }
        let increasing = lam_tail > lam_head;
        let (mut qa, mut qb) = (q_head, q_tail);
        for _ in 0..80 {
            let qm = 0.5 * (qa + qb);
            let (lam, _) = lambda_at(qm)?;
            let below = lam < s;
            if below == increasing {
                qa = qm;
            } else {
                qb = qm;
            }
        }
        let (_, st) = lambda_at(0.5 * (qa + qb))?;
        Ok(FanSample { s, rho: st.rho, u: st.u, p: st.p, s_dev: st.s, side })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::EosParams;
    use crate::plasticity::DeviatoricModel;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn gas_gas() -> RiemannInput {
        let eos = EosParams::IdealGas { gamma: 1.4 };
        RiemannInput::new(
            SideState::new(1.0, 0.0, 1000.0, 0.0),
            Material::fluid(eos),
            SideState::new(1.0, 0.0, 0.01, 0.0),
            Material::fluid(eos),
        )
    }

    fn elastic_impact() -> RiemannInput {
        let mat = Material::new(
            EosParams::StiffenedGas { gamma: 4.4, p_inf: 6e6 },
            DeviatoricModel::elastic(1e10),
        );
        RiemannInput::new(
            SideState::new(1000.0, 100.0, 1e5, 0.0),
            mat,
            SideState::new(1000.0, -100.0, 1e5, 0.0),
            mat,
        )
    }

    #[test]
    fn identical_states_trivial_solution() {
        let eos = EosParams::IdealGas { gamma: 1.4 };
        let st = SideState::new(1.0, 3.0, 2.0, 0.0);
        let input = RiemannInput::new(st, Material::fluid(eos), st, Material::fluid(eos));
        let star = solve(&input).unwrap();
        assert!(rel_err(star.q_star, 2.0) < 1e-12);
        assert!((star.u_star - 3.0).abs() < 1e-12);
        assert!(star.left.waves.is_empty() && star.right.waves.is_empty());
        assert!(star.iterations <= 2);
    }

    #[test]
    fn gas_gas_star_state() {
        let star = solve(&gas_gas()).unwrap();
        assert!(rel_err(star.q_star, 460.894) < 1e-3, "q* = {}", star.q_star);
        assert!(rel_err(star.u_star, 19.5975) < 1e-3, "u* = {}", star.u_star);
        assert!(star.iterations <= 30);
        // left rarefaction, right shock
        assert_eq!(star.left.waves.len(), 1);
        assert_eq!(star.right.waves.len(), 1);
        assert_eq!(star.left.waves[0].wave_type, WaveType::Rarefaction);
        assert_eq!(star.right.waves[0].wave_type, WaveType::Shock);
        // compatibility p - S = q on both sides
        assert!(rel_err(star.left.p - star.left.s, star.q_star) < 1e-9);
        assert!(rel_err(star.right.p - star.right.s, star.q_star) < 1e-9);
    }

    #[test]
    fn symmetric_impact_stationary_interface() {
        let star = solve(&elastic_impact()).unwrap();
        assert!(star.u_star.abs() <= 1e-9 * 100.0, "u* = {}", star.u_star);
        assert!(star.q_star > 1e5);
        // mirror-symmetric fans
        assert_eq!(star.left.waves.len(), star.right.waves.len());
        for (l, r) in star.left.waves.iter().zip(&star.right.waves) {
            assert!(rel_err(-l.head_speed, r.head_speed) < 1e-9);
            assert!(rel_err(l.post.rho, r.post.rho) < 1e-10);
        }
        assert!(rel_err(star.left.p, star.right.p) < 1e-10);
    }

    #[test]
    fn mirror_symmetry_of_solver() {
        let input = gas_gas();
        let mirrored = RiemannInput::new(
            SideState::new(input.right.rho, -input.right.u, input.right.p, input.right.s),
            input.right_material,
            SideState::new(input.left.rho, -input.left.u, input.left.p, input.left.s),
            input.left_material,
        );
        let a = solve(&input).unwrap();
        let b = solve(&mirrored).unwrap();
        assert!(rel_err(a.q_star, b.q_star) < 1e-12);
        assert!(rel_err(a.u_star, -b.u_star) < 1e-12);
    }

    #[test]
    fn galilean_shift() {
        let base = solve(&gas_gas()).unwrap();
        let v = 37.5;
        let mut shifted = gas_gas();
        shifted.left.u += v;
        shifted.right.u += v;
        let s = solve(&shifted).unwrap();
        assert!(rel_err(s.q_star, base.q_star) < 1e-12);
        assert!(((s.u_star - base.u_star) - v).abs() < 1e-12 * v.abs().max(base.u_star.abs()));
    }

    #[test]
    fn vacuum_criterion_symmetric_expansion() {
        let eos = EosParams::IdealGas { gamma: 1.4 };
        let make = |u: f64| {
            RiemannInput::new(
                SideState::new(1.0, -u, 1.0, 0.0),
                Material::fluid(eos),
                SideState::new(1.0, u, 1.0, 0.0),
                Material::fluid(eos),
            )
        };
        // closed-form threshold: u_r - u_l = 4 c / (gamma - 1)
        let c = (1.4f64).sqrt();
        let u_crit = 2.0 * c / 0.4;
        let (ok, margin) = vacuum_check(&make(0.9 * u_crit)).unwrap();
        assert!(ok && margin > 0.0);
        let (ok, _) = vacuum_check(&make(1.1 * u_crit)).unwrap();
        assert!(!ok);
        assert!(matches!(solve(&make(1.1 * u_crit)), Err(Error::Vacuum { .. })));
    }

    #[test]
    fn initial_guess_examples() {
        let eos = EosParams::IdealGas { gamma: 1.4 };
        let st = SideState::new(1.0, 0.0, 7.0, 0.0);
        let same = RiemannInput::new(st, Material::fluid(eos), st, Material::fluid(eos));
        assert!(rel_err(initial_guess(&same).unwrap(), 7.0) < 1e-12);

        let q0 = initial_guess(&gas_gas()).unwrap();
        assert!(q0.is_finite() && q0 > 0.0 && q0 < 1000.0);

        // symmetric impact collapses to q + Z u
        let imp = elastic_impact();
        let q0 = initial_guess(&imp).unwrap();
        let ws = WaveSide::new(imp.left, imp.left_material).unwrap();
        let expect = 1e5 + imp.left.rho * ws.signal_speed() * 100.0;
        assert!(rel_err(q0, expect) < 1e-12);
    }

    #[test]
    fn fluid_deviatoric_model_degenerates_bitwise() {
        let eos = EosParams::StiffenedGas { gamma: 4.4, p_inf: 6e6 };
        let zero_strength = DeviatoricModel {
            mu_e: 0.0,
            mu_p: 0.0,
            y_e: 0.0,
            y_p: 0.0,
            beta_e_override: None,
            beta_p_override: None,
        };
        let a = RiemannInput::new(
            SideState::new(1000.0, 30.0, 5e6, 0.0),
            Material::fluid(eos),
            SideState::new(800.0, -10.0, 1e5, 0.0),
            Material::fluid(eos),
        );
        let b = RiemannInput::new(
            SideState::new(1000.0, 30.0, 5e6, 0.0),
            Material::new(eos, zero_strength),
            SideState::new(800.0, -10.0, 1e5, 0.0),
            Material::new(eos, zero_strength),
        );
        let sa = solve(&a).unwrap();
        let sb = solve(&b).unwrap();
        assert_eq!(sa.q_star.to_bits(), sb.q_star.to_bits());
        assert_eq!(sa.u_star.to_bits(), sb.u_star.to_bits());
    }

    #[test]
    fn split_fan_for_perfect_elastoplastic_impact() {
        let mat = Material::new(
            EosParams::Murnaghan { bulk_k: 2.225e6, gamma: 3.7, rho0: 7.8, p0: 1.0 },
            DeviatoricModel::perfect_plastic(8.53e5, 6.5e3),
        );
        let input = RiemannInput::new(
            SideState::new(7.8, 10.0, 1.0, 0.0),
            mat,
            SideState::new(7.8, -5.0, 1.0, 0.0),
            mat,
        );
        let star = solve(&input).unwrap();
        // q* far beyond the elastic limit stress: leading elastic and
        // trailing plastic shock per side
        assert_eq!(star.left.waves.len(), 2);
        assert_eq!(star.right.waves.len(), 2);
        assert_eq!(star.left.waves[0].phase, Phase::Elastic);
        assert_eq!(star.left.waves[1].phase, Phase::Plastic);
        // leading wave strictly faster (further from the interface)
        assert!(star.left.waves[0].head_speed < star.left.waves[1].head_speed);
        assert!(star.right.waves[0].head_speed > star.right.waves[1].head_speed);
        assert!(star.iterations <= 30);
    }

    #[test]
    fn fan_sampling_recovers_constant_states() {
        let input = gas_gas();
        let star = solve(&input).unwrap();
        let sampler = FanSampler::new(&input, star).unwrap();
        let star = sampler.star().clone();

        let far_left = sampler.sample(-1e5).unwrap();
        assert!(rel_err(far_left.rho, 1.0) < 1e-12);
        assert!(far_left.u.abs() < 1e-12);

        let left_star = sampler.sample(star.u_star - 1e-6).unwrap();
        assert!(rel_err(left_star.rho, star.left.rho) < 1e-9);
        let right_star = sampler.sample(star.u_star + 1e-6).unwrap();
        assert!(rel_err(right_star.rho, star.right.rho) < 1e-9);

        let far_right = sampler.sample(1e5).unwrap();
        assert!(rel_err(far_right.p, 0.01) < 1e-12);

        // inside the left rarefaction: state varies smoothly and matches
        // the characteristic relation lambda = u - c
        let w = star.left.waves[0];
        let mid = 0.5 * (w.head_speed + w.tail_speed);
        let inside = sampler.sample(mid).unwrap();
        let c = (1.4 * inside.p / inside.rho).sqrt();
        assert!((inside.u - c - mid).abs() < 1e-6 * c.abs());
        assert!(inside.rho < 1.0 && inside.rho > star.left.rho);
    }

    #[test]
    fn iterate_trace_monotone_after_second() {
        let star = solve(&gas_gas()).unwrap();
        let q = star.q_star;
        for w in star.trace.windows(2).skip(2) {
            assert!((w[1] - q).abs() <= (w[0] - q).abs() * (1.0 + 1e-12));
        }
    }
}
